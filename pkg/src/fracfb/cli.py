"""Experiment runner: ``fracfb run <config>``, ``fracfb list``, ``fracfb validate <config>``.

Configs are flat ``key = value`` files with ``#`` comments and dotted keys
(``grid.nx = 257``).  Each run writes its CSV/JSON/DAT artifacts and a
``manifest.json`` under the output directory (overridable through the
``FRACFB_OUTPUT_DIR`` environment variable).

Exit codes: 0 all checks pass, 1 a check failed, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import difflib
import hashlib
import json
import math
import os
import sys
import time
import traceback
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from fracfb import __version__

OUTPUT_ENV = "FRACFB_OUTPUT_DIR"
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# -- config ---------------------------------------------------------------------------------


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _open_unit(v: float) -> bool:
    return 0.0 < v < 1.0


def _all_open_unit(v: tuple) -> bool:
    return len(v) > 0 and all(0.0 < x < 1.0 for x in v)


# key -> (parser, default, validator, description)
SCHEMA: dict[str, tuple] = {
    "experiment": (str, None, None, "experiment name"),
    "seed": (int, 0, lambda v: v >= 0, "random seed"),
    "output_dir": (str, "results", None, "output directory"),
    "params.sigma": (float, 0.5, _open_unit, "fractional order in (0, 1)"),
    "params.gamma": (float, 0.5, _open_unit, "penalty exponent in (0, 1)"),
    "params.n": (int, 1, lambda v: v in (1, 2, 3), "thin-space dimension"),
    "grid.nx": (int, 257, lambda v: v >= 8, "x nodes"),
    "grid.ny": (int, 129, lambda v: v >= 8, "y nodes"),
    "grid.halfwidth": (float, 1.0, lambda v: v > 0, "x half-width"),
    "grid.height": (float, 1.0, lambda v: v > 0, "domain height"),
    "grid.grading": (float, 0.0, lambda v: v >= 0, "y grading exponent (0 = default)"),
    "grid.shape": (str, "box", lambda v: v in ("box", "half_ball"), "box or half_ball"),
    "grid.coarse_nx": (int, 129, lambda v: v >= 8, "coarse x nodes for refinement studies"),
    "grid.coarse_ny": (int, 65, lambda v: v >= 8, "coarse y nodes for refinement studies"),
    "solver.tol": (float, 1e-10, lambda v: v > 0, "linear solve tolerance"),
    "minimizer.tol": (float, 1e-8, lambda v: v > 0, "projected-gradient tolerance"),
    "minimizer.maxiter": (int, 20000, lambda v: v > 0, "iteration cap per stage"),
    "data.amplitude": (float, 1.0, lambda v: v >= 0, "outer data amplitude"),
    "scan.sigmas": (_floats, (0.3, 0.5, 0.7), _all_open_unit, "sigma values"),
    "scan.gammas": (_floats, (0.25, 0.5, 0.75), _all_open_unit, "gamma values"),
    "scan.blowups": (int, 6, lambda v: v >= 0, "blow-up iterations"),
    "probe.trials": (int, 20, lambda v: v >= 1, "random trials per probe"),
    "barrier.n": (int, 2, lambda v: v in (2, 3), "dimension of the second-order ball"),
    "barrier.m": (int, 49, lambda v: v >= 9 and v % 2 == 1, "ball grid nodes per axis (odd)"),
    "barrier.nx": (int, 129, lambda v: v >= 9, "fractional barrier x nodes"),
    "barrier.ny": (int, 65, lambda v: v >= 8, "fractional barrier y nodes"),
    "holder.excess": (float, 0.1, lambda v: v > 0, "exponent excess for the sharpness check"),
}


@dataclass
class ExperimentConfig:
    values: dict
    source: str = ""
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def experiment(self) -> str:
        return self.values["experiment"]

    def canonical(self) -> str:
        def fmt(v):
            if isinstance(v, tuple):
                return ",".join(_num(x) for x in v)
            if isinstance(v, float):
                return _num(v)
            return str(v)

        return "\n".join(f"{k} = {fmt(self.values[k])}" for k in sorted(self.values) if k != "output_dir")

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _nearest(name: str, options) -> str:
    best = difflib.get_close_matches(name, list(options), n=1, cutoff=0.0)
    return best[0] if best else ""


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    seen, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}; did you mean {_nearest(key, SCHEMA)!r}?")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} (first set on line {lines[key]})")
        parser, _, check, desc = SCHEMA[key]
        try:
            parsed = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: cannot parse {key} = {value!r}: {exc}") from None
        if check is not None and not check(parsed):
            raise ConfigError(f"{source}:{lineno}: {key} = {value!r} out of range ({desc})")
        seen[key] = parsed
        lines[key] = lineno
    if "experiment" not in seen:
        raise ConfigError(f"{source}: missing required key 'experiment'")
    name = seen["experiment"]
    if name not in REGISTRY:
        raise ConfigError(f"{source}:{lines['experiment']}: unknown experiment {name!r}; "
                          f"did you mean {_nearest(name, REGISTRY)!r}?")
    values = {k: spec[1] for k, spec in SCHEMA.items()}
    values.update(seen)
    return ExperimentConfig(values, source, lines)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {str(p)!r} not found")
    return parse_config(p.read_text(), str(p))


# -- output helpers ---------------------------------------------------------------------------


def _num(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


class Output:
    """Collects artifacts written under one directory."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def _track(self, path: Path) -> Path:
        rel = str(path.relative_to(self.root))
        if rel not in self.files:
            self.files.append(rel)
        return path

    def csv(self, name: str, header, rows) -> Path:
        path = self.root / name
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_num(v) for v in row) + "\n")
        return self._track(path)

    def dat(self, name: str, columns, rows) -> Path:
        path = self.root / name
        with open(path, "w") as fh:
            fh.write("# " + " ".join(columns) + "\n")
            for row in rows:
                fh.write(" ".join(_num(v) for v in row) + "\n")
        return self._track(path)

    def json(self, name: str, obj) -> Path:
        path = self.root / name
        path.write_text(json.dumps(_plain(obj), indent=1, sort_keys=True))
        return self._track(path)

    def adopt(self, paths) -> None:
        for p in paths:
            self._track(Path(p))


@dataclass
class Result:
    checks: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def _params(cfg):
    from fracfb.params import EnergyParams

    return EnergyParams(cfg["params.sigma"], cfg["params.gamma"], cfg["params.n"])


def _grid(cfg, a: float, nx=None, ny=None):
    from fracfb.grid import GridConfig, build_grid

    g = cfg["grid.grading"]
    return build_grid(GridConfig(a=a, n=1, nx=nx or cfg["grid.nx"], ny=ny or cfg["grid.ny"],
                                 halfwidth=cfg["grid.halfwidth"], height=cfg["grid.height"],
                                 grading=g if g > 0 else None, shape=cfg["grid.shape"]))


def _opts(cfg):
    from fracfb.energy import MinimizeOpts

    return MinimizeOpts(tol=cfg["minimizer.tol"], maxiter=cfg["minimizer.maxiter"])


def _pairs(cfg):
    return [(s, g) for s in cfg["scan.sigmas"] for g in cfg["scan.gammas"]]


# -- experiments ------------------------------------------------------------------------------


def exp_scaling_identity(cfg, out: Output) -> Result:
    """Dirichlet and penalty scaling exponents agree on a 20 x 20 (sigma, gamma) grid."""
    from fracfb.params import EnergyParams

    vals = np.linspace(0.025, 0.975, 20)
    rows, worst = [], 0.0
    for s in vals:
        for g in vals:
            p = EnergyParams(float(s), float(g), cfg["params.n"])
            d, q = p.energy_exponents()
            jd, jq = p.jacobian_exponents()
            worst = max(worst, abs(d - q), abs(jd - jq))
            rows.append((s, g, p.beta, d, q, d - q, jd, jq))
    out.csv("scaling_identity.csv", ["sigma", "gamma", "beta", "dirichlet_exp", "penalty_exp", "difference",
                                     "jacobian_dirichlet", "jacobian_penalty"], rows)
    return Result({"exponents_equal": worst <= 1e-12}, {"max_difference": worst, "points": len(rows)})


def exp_extension_identity(cfg, out: Output) -> Result:
    """Flux of the Poisson extension of a Gaussian against the direct and spectral fractional Laplacians."""
    from fracfb import riesz
    from fracfb.grid import GridConfig, build_grid
    from fracfb.solver import dtn_flux, extension_constant, gaussian_frac_laplacian, poisson_extend

    checks, summary, rows = {}, {}, []
    window = 0.5
    f = lambda z: np.exp(-np.asarray(z, float) ** 2)
    for s in cfg["scan.sigmas"]:
        g = build_grid(GridConfig(a=1 - 2 * s, n=1, nx=cfg["grid.nx"], ny=cfg["grid.ny"]))
        x, fl = dtn_flux(poisson_extend(f, s, g))
        sel = np.abs(x) <= window
        xs = x[sel]
        ext = -fl[sel] / extension_constant(s)
        spec = gaussian_frac_laplacian(xs, s)
        direct = np.array([riesz.frac_laplacian(f, s, xi, T=20.0, tail="zero", tol=1e-10) for xi in xs])
        e_spec = float(np.linalg.norm(ext - spec) / np.linalg.norm(spec))
        e_dir = float(np.linalg.norm(ext - direct) / np.linalg.norm(direct))
        e_oracle = float(np.linalg.norm(direct - spec) / np.linalg.norm(spec))
        checks[f"sigma={s:g}"] = e_spec <= 0.03 and e_dir <= 0.03
        summary[f"sigma={s:g}"] = {"vs_spectral": e_spec, "vs_direct": e_dir, "direct_vs_spectral": e_oracle}
        rows += [(s, a, b, c, d) for a, b, c, d in zip(xs, ext, direct, spec)]
    out.csv("extension_identity.csv", ["sigma", "x", "extension", "direct", "spectral"], rows)
    return Result(checks, summary)


def exp_minimize_single(cfg, out: Output) -> Result:
    """One minimization with ramp outer data; trace, energy and Euler-Lagrange residuals."""
    from fracfb.analysis import contact_set, ramp_data
    from fracfb.energy import continuation_bound_holds, minimize
    from fracfb.grid import save_field, trace

    p = _params(cfg)
    g = _grid(cfg, p.a)
    res = minimize(g, ramp_data(cfg["data.amplitude"]), p, _opts(cfg))
    x, tr = trace(res.u)
    out.csv("trace.csv", ["x", "u"], zip(x, tr))
    out.dat("trace.dat", ["x", "u"], zip(x, tr))
    out.adopt(save_field(res.u, out.root / "minimizer"))
    gm = float(np.sum(g.gamma_weights))
    el = res.el_report
    cs = contact_set(res.u, res.theta)
    checks = {"el_gamma_residual": el.gamma_residual <= 1e-2 or el.vacuous,
              "continuation_bound": continuation_bound_holds(res, gm, p.gamma)}
    summary = {"energy": res.energy.as_dict(), "el": el.__dict__, "theta": res.theta, "basin": res.basin,
               "free_boundary": cs.free_boundary.tolist()}
    out.json("minimizer_report.json", summary)
    return Result(checks, summary)


def exp_opt_reg_scan(cfg, out: Output) -> Result:
    """Growth exponent at a free boundary point for every (sigma, gamma) pair of the scan."""
    from fracfb.analysis import opt_reg_pipeline
    from fracfb.params import EnergyParams

    rows, checks, summary = [], {}, {}
    for s, g in _pairs(cfg):
        p = EnergyParams(s, g, 1)
        r = opt_reg_pipeline(p, cfg["grid.nx"], cfg["grid.ny"], cfg["scan.blowups"], opts=_opts(cfg))
        ok = abs(r.beta_hat - r.beta) <= 0.1 and r.rsq > 0.95 and r.ratio_spread <= 10.0
        key = f"sigma={s:g},gamma={g:g}"
        checks[key] = ok
        summary[key] = r.as_dict()
        rows.append((s, g, r.beta, r.beta_hat, r.rsq, r.ratio_spread, len(r.fit.radii), r.x0))
        out.dat(f"growth_s{s:g}_g{g:g}.dat", ["r", "sup_u", "ratio"],
                zip(r.fit.radii, r.fit.values, r.fit.ratios))
    out.csv("opt_reg_scan.csv", ["sigma", "gamma", "beta", "beta_hat", "rsq", "ratio_spread", "radii", "x0"], rows)
    return Result(checks, summary)


def _centred(cfg, p, nx=None, ny=None):
    from fracfb.analysis import centre_free_boundary
    from fracfb.grid import GridConfig, build_grid

    g = build_grid(GridConfig(a=p.a, n=1, nx=nx or cfg["grid.nx"], ny=ny or cfg["grid.ny"]))
    return centre_free_boundary(g, p, _opts(cfg))


def exp_nondegeneracy_scan(cfg, out: Output) -> Result:
    """Nondegeneracy chain from the free boundary of a centred minimizer, per scan pair."""
    from fracfb.analysis import nondegeneracy_chain
    from fracfb.params import EnergyParams

    rows, checks, summary = [], {}, {}
    for s, g in _pairs(cfg):
        p = EnergyParams(s, g, 1)
        res, amp, x0 = _centred(cfg, p)
        chain, rep = nondegeneracy_chain(res.u, x0, theta=res.theta)
        key = f"sigma={s:g},gamma={g:g}"
        checks[key] = rep.passed
        summary[key] = rep.as_dict()
        rows.append((s, g, rep.constant_hat, len(chain), rep.passed))
        out.dat(f"chain_s{s:g}_g{g:g}.dat", ["x", "u"], chain)
    out.csv("nondegeneracy_scan.csv", ["sigma", "gamma", "min_gain", "chain_length", "passed"], rows)
    return Result(checks, summary)


def exp_density_check(cfg, out: Output) -> Result:
    """Positivity density at dyadic radii around every detected free boundary point."""
    from fracfb.analysis import contact_set, dyadic_radii, positivity_density
    from fracfb.params import EnergyParams

    rows, checks, summary = [], {}, {}
    for s, g in _pairs(cfg):
        p = EnergyParams(s, g, 1)
        res, amp, x0 = _centred(cfg, p)
        cs = contact_set(res.u, res.theta)
        x = res.u.grid.x_nodes[0]
        h = float(x[1] - x[0])
        for k, fb in enumerate(cs.free_boundary):
            radii = dyadic_radii(h, min(fb - x[0], x[-1] - fb), 4.0)
            rep = positivity_density(res.u, float(fb), radii, res.theta)
            key = f"sigma={s:g},gamma={g:g},fb={k}"
            checks[key] = rep.passed
            summary[key] = rep.as_dict()
            rows += [(s, g, fb, r, fr) for r, fr in zip(radii, rep.details["fractions"])]
    out.csv("density_check.csv", ["sigma", "gamma", "free_boundary", "radius", "positive_fraction"], rows)
    return Result(checks, summary)


def exp_barrier_2nd(cfg, out: Output) -> Result:
    """Second-order barrier at the clearing threshold, and the comparison with the minimizer."""
    from fracfb import barriers as B

    gam = cfg["params.gamma"]
    grid = B.BallGrid(cfg["barrier.n"], cfg["barrier.m"])
    shape = lambda d: 1.0 + 0.5 * d[..., 0]
    A = B.clearing_threshold(shape, gam, grid)
    data = lambda d: A * shape(d)
    bundle = B.build_barrier_2nd(data, gam, grid)
    rep = B.verify_subsolution_2nd(bundle, gam)
    mini = B.minimize_bulk(grid, data, gam, _opts(cfg))
    comp = B.verify_comparison(mini.u, bundle.w, mini.theta, grid=grid)
    act = grid.active
    coords = [c[act] for c in grid.coords]
    out.csv("barrier_2nd_fields.csv", [f"x{k + 1}" for k in range(grid.n)] + ["w1", "w2", "w3", "w", "u"],
            zip(*coords, bundle.w1[act], bundle.w2[act], bundle.w3[act], bundle.w[act], mini.u[act]))
    summary = {"threshold_A": A, "bundle": bundle.report(), "subsolution": rep.as_dict(),
               "comparison": comp.as_dict(), "el_residual": mini.el_residual}
    checks = {"cleared": bundle.cleared, "subsolution": rep.passed,
              "w_center_positive": bundle.conditions["w_center"] > 0, "comparison": comp.passed}
    if grid.n >= 3:
        fs = B.fundamental_solution_check(bundle)
        summary["fundamental_solution"] = fs.as_dict()
        checks["fundamental_solution"] = fs.passed
    out.json("barrier_2nd_report.json", summary)
    return Result(checks, summary)


def exp_barrier_frac(cfg, out: Output) -> Result:
    """Fractional barrier: invariants, c0 threshold bisection, and the comparison with the minimizer."""
    from fracfb import barriers as B
    from fracfb.energy import minimize
    from fracfb.grid import trace

    p = _params(cfg)
    base = B.build_frac_base(p, nx=cfg["barrier.nx"], ny=cfg["barrier.ny"])
    th = B.find_c0_threshold(p, base=base)
    c0 = th.c0_hat
    bundle = B.build_barrier_frac(p, c0, base=base)
    rep = B.verify_subsolution_frac(bundle, p)
    res = minimize(base.grid, lambda X, Y: c0 * B.default_boundary_shape(X, Y), p, _opts(cfg))
    comp = B.verify_comparison(res.u, bundle.w, res.theta, params=p)
    x, tr = trace(res.u)
    inner = np.abs(x) < 1.0 / 3.0
    flux_err = B.flux_of_w1_error(base)
    out.adopt(bundle.save(out.root / "bundle"))
    out.csv("c0_bisection.csv", ["c0", "passed"], [(e["c0"], e["passed"]) for e in th.path])
    inv = bundle.invariants
    checks = {
        "w_tilde_nonpositive": inv["w_tilde_nonpositive"],
        "Q_dominates_w1": inv["Q_dominates_w1"],
        "w_nonnegative": inv["w_nonnegative"],
        "subsolution_at_threshold": rep.passed,
        "fails_below_quarter": th.fails_below,
        "threshold_monotone": th.monotone,
        "comparison": comp.passed,
        "trace_positive_on_B_third": bool(np.all(tr[inner] > res.theta)),
        "w1_flux": flux_err < 0.05,
        "energy_order": comp.energy_max is None or comp.energy_max >= comp.energy_u - 1e-9 * abs(comp.energy_u),
    }
    summary = {"c0_hat": c0, "bisection": th.as_dict(), "bundle": bundle.report(),
               "subsolution": rep.as_dict(), "comparison": comp.as_dict(), "w1_flux_error": flux_err}
    out.json("barrier_frac_report.json", summary)
    return Result(checks, summary)


def exp_riesz_suite(cfg, out: Output) -> Result:
    """psi in L^1, inversion of the Riesz potential, Hoelder modulus at the ring, maximal function."""
    from fracfb import riesz
    from fracfb.params import EnergyParams

    p = _params(cfg)
    psi = riesz.psi_barrier(p, n=1)
    l1 = riesz.l1_norm(psi)
    l1_ref = riesz.psi_l1_closed_form(p)
    # inversion at sigma = 0.75 through the growth-normalized kernel
    pinv = EnergyParams(0.75, p.gamma, 1)
    psi_inv = riesz.psi_barrier(pinv, n=1)
    F = riesz.riesz_interpolant(psi_inv, pinv.sigma)
    pts = (0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.45, 0.5, 0.6, 0.8)
    f0 = float(abs(psi_inv(0.0)))
    inv_rows, worst = [], 0.0
    for x in pts:
        lap = riesz.frac_laplacian(F, pinv.sigma, x, breakpoints=(-1 / 3, 1 / 3, -1, 1), tol=1e-9)
        ref = float(psi_inv(x))
        err = abs(lap - ref) / max(abs(ref), f0)
        worst = max(worst, err)
        inv_rows.append((x, lap, ref, err))
    # Hoelder modulus of I_{2 sigma} psi below r = 1/3
    d = np.logspace(-4, -1, 16)
    r = (1.0 - d) / 3.0
    vals = np.array([riesz.riesz_potential(psi, p.sigma, ri) for ri in r])
    g0 = riesz.riesz_potential(psi, p.sigma, 1.0 / 3.0)
    fit = riesz.holder_modulus_fit((r, vals), 1.0 / 3.0, g0=g0)
    alpha = 2 * p.sigma - p.beta
    sup, arg, mvals = riesz.maximal_at_ring(psi, alpha, 1.0 / 3.0)
    radii = riesz.maximal_radii()
    out.csv("riesz_inversion.csv", ["x", "frac_laplacian", "psi", "relative_error"], inv_rows)
    out.csv("riesz_holder.csv", ["r", "I2s_psi"], zip(r, vals))
    out.dat("maximal_at_ring.dat", ["r", "scaled_mass"], zip(radii, mvals))
    checks = {"l1_closed_form": abs(l1 - l1_ref) <= 1e-8, "inversion": worst <= 0.02,
              "holder_above_sigma": (not fit.degenerate) and fit.alpha_hat > p.sigma,
              "maximal_bounded": bool(np.isfinite(sup))}
    summary = {"l1": l1, "l1_closed_form": l1_ref, "inversion_worst": worst, "holder": fit.as_dict(),
               "maximal_sup": sup, "maximal_argmax": arg, "alpha": alpha}
    return Result(checks, summary)


def exp_harnack_suite(cfg, out: Output) -> Result:
    """Harnack-type constants on two grids; finite and changing by less than a factor two."""
    from fracfb import analysis as an

    p = _params(cfg)
    grids = [(cfg["grid.coarse_nx"], cfg["grid.coarse_ny"]), (cfg["grid.nx"], cfg["grid.ny"])]
    trials, seed = cfg["probe.trials"], cfg["seed"]
    probes = {
        "boundary_harnack": lambda nx, ny: an.boundary_harnack_probe(p, trials, nx, ny, seed),
        "harnack": lambda nx, ny: an.harnack_probe(p, trials, nx, ny, seed),
        "oscillation": lambda nx, ny: an.oscillation_probe(p, trials=trials, nx=nx, ny=ny, seed=seed),
        "poincare": lambda nx, ny: an.poincare_probe(p, trials=trials, nx=nx, ny=ny, seed=seed),
        "hopf": lambda nx, ny: an.hopf_probe(p, nx=nx, ny=ny),
    }
    rows, checks, summary = [], {}, {}
    for name, fn in probes.items():
        reps = [fn(nx, ny) for nx, ny in grids]
        vals = [r.constant_hat for r in reps]
        finite = all(math.isfinite(v) and v != 0 for v in vals)
        ratio = max(abs(vals[0]), abs(vals[1])) / min(abs(vals[0]), abs(vals[1])) if finite else math.inf
        checks[name] = finite and ratio < 2.0 and all(r.passed for r in reps)
        summary[name] = {"coarse": reps[0].as_dict(), "fine": reps[1].as_dict(), "ratio": ratio}
        rows.append((name, vals[0], vals[1], ratio, reps[0].passed and reps[1].passed))
    out.csv("harnack_suite.csv", ["probe", "coarse", "fine", "ratio", "passed"], rows)
    return Result(checks, summary)


def exp_holder_suite(cfg, out: Output) -> Result:
    """Hoelder seminorms at beta and beta + excess of centred minimizers on two grids."""
    from fracfb.analysis import holder_norm

    p = _params(cfg)
    ex = cfg["holder.excess"]
    grids = [(cfg["grid.coarse_nx"], cfg["grid.coarse_ny"]), (cfg["grid.nx"], cfg["grid.ny"])]
    norms = {"beta": [], "beta_plus": []}
    rows = []
    for nx, ny in grids:
        res, amp, x0 = _centred(cfg, p, nx, ny)
        nb = holder_norm(res.u, p.beta, "gamma", window=0.5)
        nbp = holder_norm(res.u, p.beta + ex, "gamma", window=0.5)
        norms["beta"].append(nb)
        norms["beta_plus"].append(nbp)
        rows.append((nx, ny, nb, nbp))
    out.csv("holder_suite.csv", ["nx", "ny", "seminorm_beta", "seminorm_beta_plus"], rows)
    rb = norms["beta"][1] / norms["beta"][0]
    rp = norms["beta_plus"][1] / norms["beta_plus"][0]
    checks = {"stable_at_beta": max(rb, 1 / rb) < 1.5, "grows_above_beta": rp > 2.0}
    return Result(checks, {"ratio_beta": rb, "ratio_beta_plus": rp, "norms": norms})


@dataclass(frozen=True)
class Experiment:
    name: str
    driver: Callable
    doc: str


REGISTRY: dict[str, Experiment] = {}
for _name, _fn in [
    ("scaling_identity", exp_scaling_identity),
    ("extension_identity", exp_extension_identity),
    ("minimize_single", exp_minimize_single),
    ("opt_reg_scan", exp_opt_reg_scan),
    ("nondegeneracy_scan", exp_nondegeneracy_scan),
    ("barrier_2nd", exp_barrier_2nd),
    ("barrier_frac", exp_barrier_frac),
    ("riesz_suite", exp_riesz_suite),
    ("harnack_suite", exp_harnack_suite),
    ("holder_suite", exp_holder_suite),
    ("density_check", exp_density_check),
]:
    REGISTRY[_name] = Experiment(_name, _fn, (_fn.__doc__ or "").strip().splitlines()[0])


def registry() -> list[tuple[str, str]]:
    return [(e.name, e.doc) for e in REGISTRY.values()]


# -- run ----------------------------------------------------------------------------------------


def _stamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def run(cfg: ExperimentConfig, output_dir: str | None = None) -> tuple[int, dict]:
    """Execute one experiment; returns (exit code, manifest)."""
    root = Path(output_dir or os.environ.get(OUTPUT_ENV) or cfg["output_dir"])
    out = Output(root)
    start = _stamp()
    t0 = time.time()
    exp = REGISTRY[cfg.experiment]
    error = None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = exp.driver(cfg, out)
    except Exception as exc:  # runtime failure: still write the manifest
        error = f"{type(exc).__name__}: {exc}"
        result = Result({}, {"traceback": traceback.format_exc()})
    checks = {k: bool(v) for k, v in result.checks.items()}
    passed = error is None and all(checks.values())
    manifest = {
        "experiment": cfg.experiment,
        "config_hash": cfg.digest(),
        "config": cfg.canonical(),
        "code_version": __version__,
        "start": start,
        "end": _stamp(),
        "elapsed_s": round(time.time() - t0, 3),
        "checks": checks,
        "passed": passed,
        "error": error,
        "output_dir": str(root),
        "summary": result.summary,
    }
    out.json("summary.json", result.summary)
    manifest["artifacts"] = sorted(out.files) + ["manifest.json"]
    (root / "manifest.json").write_text(json.dumps(_plain(manifest), indent=1, sort_keys=True))
    code = EXIT_RUNTIME if error else (EXIT_PASS if passed else EXIT_FAIL)
    return code, manifest


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fracfb", description="Free-boundary experiments for the fractional energy.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run the experiment named in a config file")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None, help=f"override output_dir (also ${OUTPUT_ENV})")
    sub.add_parser("list", help="list experiments")
    p_val = sub.add_parser("validate", help="parse and validate a config file")
    p_val.add_argument("config")
    args = ap.parse_args(argv)
    if args.cmd == "list":
        for name, doc in registry():
            print(f"{name:20s} {doc}")
        return EXIT_PASS
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.cmd == "validate":
        print(f"{args.config}: ok ({cfg.experiment})")
        return EXIT_PASS
    code, manifest = run(cfg, args.output_dir)
    for name, ok in manifest["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if manifest["error"]:
        print(f"error: {manifest['error']}", file=sys.stderr)
    status = "passed" if manifest["passed"] else "failed"
    print(f"{status}: {cfg.experiment} -> {manifest['output_dir']}")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
