"""Explicit lower barriers and the comparison u >= w.

Two constructions:

* second order: ``Delta w >= 2 w^(gamma-1)`` on the unit ball of R^n, built
  from a boundary layer ``w1``, a quadratic ``w2`` and the harmonic
  extension ``w3`` of the boundary data, on a Cartesian ball grid;
* fractional (n = 1): ``w = w1 + w2`` on the half ball with
  ``lim y^a dw/dy >= 2 w^(gamma-1)`` on Gamma where ``w > 0``, built from
  the Riesz potential of ``psi``.

Sign convention: the discrete flux is ``lim y^a du/dy`` (see
:func:`fracfb.solver.dtn_flux`), so the extension of data with fractional
Laplacian ``g`` has flux ``-d_sigma g``.  The flux of ``w1`` is therefore
``d_sigma (1 - 3|x|)^(beta - 2 sigma)`` on ``B_{1/3}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from fracfb import riesz
from fracfb.energy import MinimizeOpts, _continuation, _newton_positive, eval_energy
from fracfb.grid import Field, GridConfig, build_grid, weighted_integral
from fracfb.params import EnergyParams, ParameterDomainError
from fracfb.solver import BoundaryData, DegenerateSolver, dtn_flux, extension_constant, poisson_extend


class GridMismatchError(ValueError):
    pass


class ComponentSolveError(RuntimeError):
    pass


# -- scalar inequality ---------------------------------------------------------------------


def phi_value(s, t, gamma: float, M: float):
    """``(s - t)(gamma t^(gamma-1) + M s^(gamma-1)) / 2``; at ``t = 0`` only the ``M s^gamma / 2`` term."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lead = np.where(t > 0, gamma * np.where(t > 0, t, 1.0) ** (gamma - 1.0), 0.0)
        out = 0.5 * (s - t) * (lead + M * np.where(s > 0, s, 1.0) ** (gamma - 1.0))
    return np.where(s > 0, out, 0.0)


def psi_value(s, t, gamma: float):
    return np.asarray(s, dtype=float) ** gamma - np.asarray(t, dtype=float) ** gamma


@dataclass
class DominanceReport:
    holds: bool
    worst_margin: float
    worst_pair: tuple
    pairs: int
    violations: int

    def as_dict(self) -> dict:
        return {"holds": self.holds, "worst_margin": self.worst_margin,
                "worst_pair": list(self.worst_pair), "pairs": self.pairs, "violations": self.violations}


def phi_psi_dominance(gamma: float, M: float, t: float | None = None, points: int = 241) -> DominanceReport:
    """Check ``phi(s) >= psi(s)`` for ``s > t >= 0`` on a logarithmic grid.

    With ``t`` given only that ``t`` is used; otherwise ``t`` runs over zero and
    a log grid in ``[1e-6, 1e6]``.  ``s = t + d`` with ``d`` logarithmic in
    ``[1e-6, 1e6] * max(t, 1)``.  The margin is scaled by ``s^gamma``.
    """
    if not 0.0 < gamma < 1.0:
        raise ParameterDomainError(f"gamma must lie in (0, 1), got {gamma}")
    ts = np.concatenate([[0.0], np.logspace(-6, 6, points)]) if t is None else np.array([float(t)])
    if np.any(ts < 0):
        raise ValueError("t must be non-negative")
    worst, pair, count, bad = math.inf, (math.nan, math.nan), 0, 0
    for tv in ts:
        d = np.logspace(-6, 6, points) * max(tv, 1.0)
        s = tv + d
        margin = (phi_value(s, tv, gamma, M) - psi_value(s, tv, gamma)) / s**gamma
        count += s.size
        tol = -1e-12
        bad += int(np.sum(margin < tol))
        k = int(np.argmin(margin))
        if margin[k] < worst:
            worst, pair = float(margin[k]), (float(tv), float(s[k]))
    return DominanceReport(bad == 0, worst, pair, count, bad)


# -- Cartesian ball grid (second-order problem) ---------------------------------------


class BallGrid:
    """Uniform grid of spacing ``h = 2 / (m - 1)`` on ``[-1, 1]^n``.

    Nodes with ``|x| < 1`` are interior; nodes with ``|x| >= 1`` that neighbour
    an interior node are the Dirichlet boundary.  The Laplacian is the
    standard ``2n + 1`` point stencil.
    """

    def __init__(self, n: int = 2, m: int = 49):
        if n not in (1, 2, 3):
            raise ValueError("ball grids support n = 1, 2, 3")
        if m < 9 or m % 2 == 0:
            raise ValueError("m must be odd and at least 9")
        self.n = n
        self.m = m
        self.h = 2.0 / (m - 1)
        self.axis = np.linspace(-1.0, 1.0, m)

    @property
    def shape(self) -> tuple:
        return (self.m,) * self.n

    @cached_property
    def coords(self) -> tuple:
        return tuple(np.meshgrid(*([self.axis] * self.n), indexing="ij"))

    @cached_property
    def r(self) -> np.ndarray:
        return np.sqrt(sum(c**2 for c in self.coords))

    @cached_property
    def interior(self) -> np.ndarray:
        return self.r < 1.0 - 1e-12

    @cached_property
    def boundary(self) -> np.ndarray:
        near = np.zeros(self.shape, dtype=bool)
        for k in range(self.n):
            for s in (1, -1):
                near |= np.roll(self.interior, s, axis=k)
        return near & ~self.interior

    @cached_property
    def active(self) -> np.ndarray:
        return self.interior | self.boundary

    def laplacian(self, v: np.ndarray) -> np.ndarray:
        """``Delta_h v`` at interior nodes (NaN elsewhere)."""
        v = np.asarray(v, dtype=float)
        out = -2.0 * self.n * v
        for k in range(self.n):
            out = out + np.roll(v, 1, axis=k) + np.roll(v, -1, axis=k)
        out = out / self.h**2
        return np.where(self.interior, out, np.nan)

    @cached_property
    def _system(self):
        idx = -np.ones(self.shape, dtype=int)
        inner = np.flatnonzero(self.interior.ravel())
        idx.ravel()[inner] = np.arange(inner.size)
        rows, cols, vals = [], [], []
        bd_rows, bd_cols = [], []
        flat = np.arange(np.prod(self.shape)).reshape(self.shape)
        for k in range(self.n):
            for s in (1, -1):
                nb = np.roll(flat, -s, axis=k)  # neighbour index in direction s
                src = flat[self.interior]
                dst = nb[self.interior]
                inside = self.interior.ravel()[dst]
                rows.append(idx.ravel()[src[inside]])
                cols.append(idx.ravel()[dst[inside]])
                bd_rows.append(idx.ravel()[src[~inside]])
                bd_cols.append(dst[~inside])
        N = inner.size
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        adj = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(N, N))
        L = (2.0 * self.n * sp.identity(N, format="csr") - adj) / self.h**2  # = -Delta_h
        br = np.concatenate(bd_rows)
        bc = np.concatenate(bd_cols)
        B = sp.csr_matrix((np.ones(br.size) / self.h**2, (br, bc)), shape=(N, int(np.prod(self.shape))))
        return inner, L.tocsc(), B

    @cached_property
    def _lu(self):
        return spla.splu(self._system[1])

    def harmonic(self, boundary_values: np.ndarray) -> np.ndarray:
        """Discrete harmonic function with the given values on the Dirichlet nodes."""
        inner, L, B = self._system
        g = np.where(self.boundary, boundary_values, 0.0)
        sol = self._lu.solve(B @ g.ravel())
        out = np.where(self.boundary, g, 0.0).ravel()
        out[inner] = sol
        return out.reshape(self.shape)

    def unit_directions(self) -> np.ndarray:
        r = np.where(self.r > 0, self.r, 1.0)
        return np.stack([c / r for c in self.coords], axis=-1)

    def boundary_average(self, values: np.ndarray) -> float:
        return float(np.mean(np.asarray(values)[self.boundary]))


def _boundary_values(grid: BallGrid, data) -> np.ndarray:
    """Data on the Dirichlet nodes: scalar, array over the grid, or callable of the unit direction."""
    if callable(data):
        vals = np.asarray(data(grid.unit_directions()), dtype=float)
    else:
        vals = np.broadcast_to(np.asarray(data, dtype=float), grid.shape)
    return np.where(grid.boundary, vals, 0.0)


def smoothstep(t):
    """Quintic ``6t^5 - 15t^4 + 10t^3`` clipped to [0, 1]; C^2 with zero first and second derivatives at the ends."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def eta_profile(r):
    """Radial cutoff: 0 for ``r < 1/2``, 1 for ``r > 3/4``."""
    return smoothstep((np.asarray(r, dtype=float) - 0.5) / 0.25)


# -- second-order barrier ---------------------------------------------------------------


@dataclass
class BarrierBundle2nd:
    grid: BallGrid
    gamma: float
    lam: float
    mu: float
    eta: np.ndarray
    eta_bound: float
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    boundary_avg: float
    cleared: bool
    conditions: dict = field(default_factory=dict)

    @property
    def w(self) -> np.ndarray:
        return self.w1 + self.w2 + self.w3

    def report(self) -> dict:
        return {"lambda": self.lam, "mu": self.mu, "eta_bound": self.eta_bound,
                "boundary_avg": self.boundary_avg, "cleared": self.cleared, **self.conditions}


def _smallest_verified(pred: Callable[[float], bool], start: float = 1.0, rel: float = 1e-3,
                       max_doublings: int = 80) -> float:
    """Smallest value (to relative accuracy ``rel``) with ``pred`` true, for monotone ``pred``."""
    hi = start
    for _ in range(max_doublings):
        if pred(hi):
            break
        hi *= 2.0
    else:
        raise ComponentSolveError(f"no verified value found up to {hi:.3e}")
    lo = hi / 2.0
    if pred(lo):
        while pred(lo / 2.0) and lo > 1e-300:
            lo /= 2.0
        hi, lo = lo, lo / 2.0
    while hi - lo > rel * hi:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def build_barrier_2nd(boundary_data, gamma: float, grid: BallGrid | None = None,
                      lam: float | None = None, mu: float | None = None) -> BarrierBundle2nd:
    """Second-order barrier ``w = w1 + w2 + w3`` on the unit ball.

    ``w1 = lam (eta (1 - r)^beta2 + 1 - eta)`` with ``beta2 = 2 / (2 - gamma)``
    and ``lam`` the smallest grid-verified value giving
    ``Delta_h w1 >= 2 w1^(gamma-1)`` on ``{r > 7/8}``.  ``w2`` is
    ``mu (r^2 - 1)`` minus its discrete harmonic part, so it vanishes on the
    Dirichlet nodes and ``Delta_h w2 = 2 n mu`` exactly; ``mu`` is the smallest
    value with ``Delta_h w2 > -Delta_h w1 + 1`` on ``B_{7/8}``.  ``w3`` is the
    discrete harmonic extension of the data.  ``lam`` and ``mu`` may be
    overridden (for perturbation tests).
    """
    if not 0.0 < gamma < 1.0:
        raise ParameterDomainError(f"gamma must lie in (0, 1), got {gamma}")
    grid = grid or BallGrid()
    g = _boundary_values(grid, boundary_data)
    if np.any(g[grid.boundary] < 0):
        raise ValueError("boundary data must be non-negative")
    A = grid.boundary_average(g)
    b2 = 2.0 / (2.0 - gamma)
    r = grid.r
    eta = np.where(grid.interior, eta_profile(r), 0.0)
    base = np.where(grid.interior, eta * np.clip(1.0 - r, 0.0, None) ** b2 + (1.0 - eta), 0.0)
    lap_base = grid.laplacian(base)
    annulus = grid.interior & (r > 7.0 / 8.0)
    inner = grid.interior & (r <= 7.0 / 8.0)

    def lam_ok(L):
        with np.errstate(divide="ignore"):
            return bool(np.all(L * lap_base[annulus] >= 2.0 * (L * base[annulus]) ** (gamma - 1.0)))

    if lam is None:
        if np.any(lap_base[annulus] <= 0):
            raise ComponentSolveError("Delta_h of the boundary layer is not positive on the annulus")
        lam = _smallest_verified(lam_ok)
    w1 = lam * base
    lap_w1 = lam * lap_base
    need = float(np.max(1.0 - lap_w1[inner]))
    if mu is None:
        mu = _smallest_verified(lambda M: 2.0 * grid.n * M > need + 1e-12 * abs(need) and M > 0)
    quad = r**2 - 1.0
    w2 = mu * (quad - grid.harmonic(np.where(grid.boundary, quad, 0.0)))
    w2 = np.where(grid.active, w2, 0.0)
    w3 = grid.harmonic(g)
    w = w1 + w2 + w3
    # eta derivatives, measured on the grid
    grads = np.gradient(eta, grid.h)
    grads = grads if isinstance(grads, (list, tuple)) else [grads]
    gnorm = np.sqrt(sum(gk**2 for gk in grads))
    eta_bound = float(max(np.nanmax(np.abs(grid.laplacian(eta))[grid.interior]),
                          np.max(gnorm[grid.interior])))
    act = grid.active
    pos_inner = inner & (w > 0)
    cond1 = bool(np.all(w[inner] > 0)) and bool(np.all(1.0 >= 2.0 * w[pos_inner] ** (gamma - 1.0)))
    cond2 = bool(np.all(w[act] >= 0))
    conditions = {
        "inner_bound": cond1,
        "nonnegative": cond2,
        "min_w": float(np.min(w[act])),
        "w_center": float(w[tuple(s // 2 for s in grid.shape)]),
        "inner_min_w": float(np.min(w[inner])),
    }
    if not 0.0 <= float(np.min(eta)) and float(np.max(eta)) <= 1.0:
        raise ComponentSolveError("cutoff left [0, 1]")
    return BarrierBundle2nd(grid, gamma, float(lam), float(mu), eta, eta_bound, w1, w2, w3, A,
                            cond1 and cond2, conditions)


def clearing_threshold(shape, gamma: float, grid: BallGrid | None = None, rel: float = 1e-2) -> float:
    """Smallest amplitude ``A`` (to relative accuracy ``rel``) for which data ``A * shape`` clears the bundle.

    ``shape`` is a callable of the unit direction (or a scalar).  Clearing is
    monotone in ``A`` because only ``w3`` depends on the data, linearly.
    """
    grid = grid or BallGrid()
    f = shape if callable(shape) else (lambda d: np.full(d.shape[:-1], float(shape)))
    return _smallest_verified(lambda A: build_barrier_2nd(lambda d: A * f(d), gamma, grid).cleared,
                              1.0, rel=rel)


@dataclass
class CheckResult:
    name: str
    passed: bool
    margin: float
    vacuous: bool = False
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "margin": self.margin,
                "vacuous": self.vacuous, **self.details}


@dataclass
class SubsolutionReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def first_failure(self) -> str | None:
        for c in self.checks:
            if not c.passed:
                return c.name
        return None

    def as_dict(self) -> dict:
        return {"passed": self.passed, "first_failure": self.first_failure,
                "checks": [c.as_dict() for c in self.checks]}


def _min_or(a: np.ndarray, default: float) -> float:
    return float(np.min(a)) if a.size else default


def verify_subsolution_2nd(bundle, gamma: float, theta: float = 0.0, grid: BallGrid | None = None) -> SubsolutionReport:
    """Grid checks of the second-order subsolution.

    (i) ``Delta_h w >= 2 w^(gamma-1)`` where ``w > theta``: directly, and
    through the split ``Delta_h w >= 1 >= 2 w^(gamma-1)`` on ``B_{7/8}`` and
    ``Delta_h w >= Delta_h w1 >= 2 w1^(gamma-1) >= 2 w^(gamma-1)`` on the
    annulus; (ii) ``w >= 0``.  ``bundle`` may also be a bare array; then only
    the direct form of (i) is checked.
    """
    if isinstance(bundle, BarrierBundle2nd):
        grid = bundle.grid
        w = bundle.w
    else:
        if grid is None:
            raise ValueError("a bare field needs its grid")
        w = np.asarray(bundle, dtype=float)
    lap = grid.laplacian(w)
    pos = grid.interior & (w > theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs = 2.0 * np.where(pos, w, 1.0) ** (gamma - 1.0)
    direct = lap[pos] - rhs[pos]
    details = {"direct_margin": _min_or(direct, math.inf), "nodes": int(pos.sum())}
    passed_i = bool(np.all(direct >= 0))
    if isinstance(bundle, BarrierBundle2nd):
        r = grid.r
        inner = pos & (r <= 7.0 / 8.0)
        ann = grid.interior & (r > 7.0 / 8.0)
        w1 = bundle.w1
        lap1 = grid.laplacian(w1)
        with np.errstate(divide="ignore", invalid="ignore"):
            m_inner_a = lap[inner] - 1.0
            m_inner_b = 1.0 - 2.0 * w[inner] ** (gamma - 1.0)
            m_ann_a = lap[ann] - lap1[ann]
            m_ann_b = lap1[ann] - 2.0 * w1[ann] ** (gamma - 1.0)
            ann_pos = ann & (w > theta)
            m_ann_c = w[ann_pos] - w1[ann_pos]
        tol = 1e-9 * max(1.0, float(np.nanmax(np.abs(lap[grid.interior]))))
        split = {
            "inner_laplacian": _min_or(m_inner_a, math.inf),
            "inner_power": _min_or(m_inner_b, math.inf),
            "annulus_laplacian": _min_or(m_ann_a, math.inf),
            "annulus_layer": _min_or(m_ann_b, math.inf),
            "annulus_order": _min_or(m_ann_c, math.inf),
        }
        details.update(split)
        bad_split = [k for k, v in split.items() if v < -tol]
        worst = [np.argmin(m_ann_b)] if m_ann_b.size else []
        if worst:
            details["annulus_layer_worst_r"] = float(r[ann][worst[0]])
        passed_i = passed_i and not bad_split
        details["split_failures"] = bad_split
        margin_i = min(details["direct_margin"], *split.values())
    else:
        margin_i = details["direct_margin"]
    vac = int(pos.sum()) == 0
    c1 = CheckResult("differential_inequality", passed_i or vac, margin_i if not vac else 0.0, vac, details)
    act = grid.active
    mn = float(np.min(w[act]))
    c2 = CheckResult("nonnegative", mn >= -theta, mn)
    return SubsolutionReport([c1, c2])


@dataclass
class FundamentalSolutionCheck:
    passed: bool
    margin: float
    harnack_constant: float
    scale: float

    def as_dict(self) -> dict:
        return {"passed": self.passed, "margin": self.margin,
                "harnack_constant": self.harnack_constant, "scale": self.scale}


def fundamental_solution_check(bundle: BarrierBundle2nd) -> FundamentalSolutionCheck:
    """``w3 >= C A / ((8/7)^(n-2) - 1) (|x|^(2-n) - 1)`` on the annulus ``7/8 <= |x| < 1``.

    ``C = min_{B_{7/8}} w3 / A`` is the measured Harnack constant.  On
    ``B_{7/8}`` itself the right side is unbounded at the origin, so only the
    annulus, where both sides are harmonic, is compared (n >= 3).
    """
    grid = bundle.grid
    n = grid.n
    if n < 3:
        raise ValueError("the truncated fundamental solution comparison needs n >= 3")
    A = bundle.boundary_avg
    r = grid.r
    inner = grid.interior & (r <= 7.0 / 8.0)
    C = float(np.min(bundle.w3[inner]) / A) if A > 0 else 0.0
    K = C * A / ((8.0 / 7.0) ** (n - 2) - 1.0)
    ann = grid.interior & (r >= 7.0 / 8.0)
    comp = K * (r[ann] ** (2 - n) - 1.0)
    margin = float(np.min(bundle.w3[ann] - comp)) if ann.any() else math.inf
    return FundamentalSolutionCheck(margin >= -1e-10 * max(A, 1.0), margin, C, K)


# -- second-order minimizer ---------------------------------------------------------------


class BulkProblem:
    """``1/2 int |grad u|^2 + int u^gamma`` on the ball grid as a function of interior values."""

    def __init__(self, grid: BallGrid, data: np.ndarray, gamma: float):
        self.grid = grid
        self.params = EnergyParams(0.5, gamma, grid.n)  # only gamma is read
        inner, L, B = grid._system
        vol = grid.h**grid.n
        self.inner = inner
        self.data = np.where(grid.boundary, data, 0.0)
        self.S = (vol * L).toarray()
        self.b = -vol * np.asarray(B @ self.data.ravel())
        self.w = np.full(inner.size, vol)
        # energy of the boundary-boundary couplings is a constant and omitted
        self.c = 0.0

    def energy(self, t, eps):
        gam = self.params.gamma
        return 0.5 * float(t @ (self.S @ t)) + float(self.b @ t) + float(
            np.sum(self.w * ((t + eps) ** gam - eps**gam)))

    def true_energy(self, t):
        return 0.5 * float(t @ (self.S @ t)) + float(self.b @ t) + float(
            np.sum(self.w * np.maximum(t, 0.0) ** self.params.gamma))

    def grad(self, t, eps):
        gam = self.params.gamma
        return self.S @ t + self.b + self.w * gam * (t + eps) ** (gam - 1.0)

    def field(self, t) -> np.ndarray:
        out = self.data.copy().ravel()
        out[self.inner] = t
        return out.reshape(self.grid.shape)


@dataclass
class BulkMinimizer:
    u: np.ndarray
    energy: float
    theta: float
    el_residual: float
    candidates: dict


def minimize_bulk(grid: BallGrid, boundary_data, gamma: float, opts: MinimizeOpts | None = None) -> BulkMinimizer:
    """Non-negative minimizer of the second-order energy with Dirichlet data on the ball.

    Starts from zero and from the harmonic extension; the lower energy wins.
    """
    opts = opts or MinimizeOpts()
    g = _boundary_values(grid, boundary_data)
    if np.any(g[grid.boundary] < 0):
        raise ValueError("boundary data must be non-negative")
    prob = BulkProblem(grid, g, gamma)
    scale = float(np.max(g)) if g.size else 0.0
    theta = max(opts.theta_factor * opts.eps_schedule[-1], opts.theta_floor) * max(scale, 1e-300)
    harm = grid.harmonic(g).ravel()[prob.inner]
    best, cands = None, {}
    for name, t0 in (("zero", np.zeros(prob.inner.size)), ("harmonic", np.maximum(harm, 0.0))):
        t, _, _ = _continuation(prob, t0, opts)
        t = _newton_positive(prob, t, opts.eps_schedule[-1], opts.tol)
        e = prob.true_energy(t)
        cands[name] = e
        if best is None or e < best[1]:
            best = (t, e)
    t, e = best
    u = prob.field(np.maximum(t, 0.0))
    lap = grid.laplacian(u)
    pos = grid.interior & (u > theta)
    res = lap[pos] - gamma * u[pos] ** (gamma - 1.0)
    scale_r = max(1.0, float(np.max(np.abs(lap[pos])))) if pos.any() else 1.0
    el = float(np.max(np.abs(res)) / scale_r) if pos.any() else 0.0
    return BulkMinimizer(u, e, theta, el, cands)


# -- fractional barrier -----------------------------------------------------------------------


@dataclass
class FracBase:
    """The parts of the fractional barrier that do not depend on ``c0``."""

    params: EnergyParams
    grid: object
    psi: riesz.RadialProfile
    I2s_psi: riesz.RadialProfile
    b: riesz.RadialProfile
    w_tilde: riesz.RadialProfile
    w1: Field
    q: riesz.RadialProfile
    Q: Field
    q0: float
    delta: float
    hopf_c: float
    d_sigma: float
    meta: dict = field(default_factory=dict)


@dataclass
class BarrierBundleFrac:
    base: FracBase
    c0: float
    w2: Field
    lam: float
    boundary_ratio: float
    invariants: dict

    @property
    def w(self) -> Field:
        return Field(self.base.grid, self.base.w1.values + self.w2.values)

    @property
    def w1(self) -> Field:
        return self.base.w1

    @property
    def Q(self) -> Field:
        return self.base.Q

    def report(self) -> dict:
        b = self.base
        return {"lambda": self.lam, "c0": self.c0, "q0": b.q0, "delta": b.delta, "hopf_c": b.hopf_c,
                "d_sigma": b.d_sigma, "boundary_ratio": self.boundary_ratio, **self.invariants, **b.meta}

    def save(self, directory) -> list[Path]:
        from fracfb.grid import save_field

        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        out = []
        for name, prof in (("psi", self.base.psi), ("I2s_psi", self.base.I2s_psi), ("b", self.base.b),
                           ("w_tilde", self.base.w_tilde), ("q", self.base.q)):
            out += prof.save(d / name)
        for name, f in (("w1", self.base.w1), ("Q", self.base.Q), ("w2", self.w2), ("w", self.w)):
            out += save_field(f, d / name)
        rep = d / "report.json"
        rep.write_text(json.dumps(self.report(), indent=1, sort_keys=True, default=float))
        return out + [rep]


def _cell_flux_average(x: np.ndarray, R: float, p: float, d_sigma: float) -> np.ndarray:
    """Dual-cell averages of ``d_sigma (1 - |x|/R)^p`` on ``|x| < R`` (zero outside)."""
    mid = 0.5 * (x[1:] + x[:-1])
    lo = np.concatenate([[x[0]], mid])
    hi = np.concatenate([mid, [x[-1]]])

    def prim(t):  # int_0^t (1 - s/R)^p ds for t in [0, R], odd in t
        a = np.clip(np.abs(t), 0.0, R)
        return np.sign(t) * R * (1.0 - (1.0 - a / R) ** (p + 1.0)) / (p + 1.0)

    return d_sigma * (prim(hi) - prim(lo)) / (hi - lo)


def _big_box(nx_unit: int, ny_unit: int, a: float, L: float):
    h = 2.0 / (nx_unit - 1)
    nx = int(round(2 * L / h)) + 1
    ny = int(math.ceil((ny_unit - 1) * math.sqrt(L))) + 1
    return build_grid(GridConfig(a=a, n=1, nx=nx, ny=ny, halfwidth=L, height=L))


def choose_delta(params: EnergyParams, I2s: Callable, candidates=(0.02, 0.04, 0.08), rsq_min: float = 0.99):
    """Largest ring width whose Hoelder fit of ``I_{2 sigma} psi`` near ``1/3`` has R^2 above ``rsq_min``."""
    g0 = float(I2s(np.array([1.0 / 3.0]))[0])
    fits = {}
    for delta in sorted(candidates, reverse=True):
        d = np.logspace(math.log10(3 * delta) - 3, math.log10(3 * delta), 16)
        r = (1.0 - d) / 3.0
        fit = riesz.holder_modulus_fit((r, I2s(r)), 1.0 / 3.0, g0=g0)
        fits[delta] = fit.as_dict()
        if not fit.degenerate and fit.rsq > rsq_min:
            return delta, fits
    raise ComponentSolveError(f"no ring width in {candidates} gives a Hoelder fit with R^2 > {rsq_min}")


def build_frac_base(params: EnergyParams, nx: int = 129, ny: int = 65, far: float = 8.0) -> FracBase:
    """Assemble ``psi, I_{2 sigma} psi, b, w_tilde, w1, q, Q`` on the unit half ball (n = 1).

    ``w_tilde`` solves ``(-Delta)^sigma w_tilde = psi`` in ``B_{1/3}`` with zero
    exterior values, through the extension on ``[-far, far] x [0, far]`` with
    zero data on the far boundary: Dirichlet zero on ``Gamma \\ B_{1/3}`` and
    flux ``-d_sigma psi`` (dual-cell averaged) on ``Gamma cap B_{1/3}``.  Then
    ``b = I_{2 sigma} psi - w_tilde`` is the sigma-harmonic fill-in.  ``q``
    comes from the same extension solve with Dirichlet ``q0`` on
    ``B_{1/3 - delta}``, zero outside ``B_{1/3}`` and no flux in the ring.
    """
    if params.n != 1:
        raise ParameterDomainError("the fractional barrier is implemented for n = 1")
    sigma, a = params.sigma, params.a
    R = 1.0 / 3.0
    p = params.beta - 2.0 * sigma
    d_sigma = extension_constant(sigma)
    psi = riesz.psi_barrier(params)
    I2s = riesz.riesz_interpolant(psi, sigma, L=2.0)
    delta, fits = choose_delta(params, I2s)
    big = _big_box(nx, ny, a, far)
    xb = big.x_nodes[0]
    gm = big.gamma_mask[big.gamma_index]
    inside = np.abs(xb) < R
    flux = _cell_flux_average(xb, R, p, d_sigma)
    bc = BoundaryData.mixed(0.0, gamma_dirichlet=~inside, gamma_values=0.0,
                            gamma_flux=np.where(inside, flux, 0.0))
    try:
        mask, vals, fl = bc.resolve(big)
        W, _ = DegenerateSolver(big, mask).solve_values(vals, fl)
    except Exception as exc:  # pragma: no cover - solver failures are rare
        raise ComponentSolveError(f"w_tilde solve failed: {exc}") from exc
    wt_big = np.where(inside, W[:, 0], 0.0)
    keep = np.abs(xb) <= 2.0
    z = xb[keep]
    wt = wt_big[keep]
    if np.any(wt > 1e-12 * max(1.0, float(np.max(np.abs(wt))))):
        raise ComponentSolveError("w_tilde is positive somewhere in B_{1/3}")
    wt = np.minimum(wt, 0.0)
    pos = z >= 0
    I_vals = I2s(z[pos])
    w_tilde = riesz.RadialProfile(z[pos], wt[pos], n=1, support=R, meta={"kind": "w_tilde"})
    b_prof = riesz.RadialProfile(z[pos], I_vals - wt[pos], n=1, meta={"kind": "b"})
    I_prof = riesz.RadialProfile(z[pos], I_vals, n=1, meta={"kind": "I2s_psi"})

    grid = build_grid(GridConfig(a=a, n=1, nx=nx, ny=ny, halfwidth=1.0, shape="half_ball"))
    wt_fun = lambda x: np.interp(np.asarray(x, float), z, wt, left=0.0, right=0.0)
    w1 = poisson_extend(wt_fun, sigma, grid)
    q0 = 2.0 * float(np.max(-w1.values))
    # q: Dirichlet q0 inside B_{1/3 - delta}, zero outside B_{1/3}, sigma-harmonic in the ring
    core = np.abs(xb) < R - delta
    ring = (~core) & inside
    bcq = BoundaryData.mixed(0.0, gamma_dirichlet=~ring, gamma_values=np.where(core, q0, 0.0), gamma_flux=0.0)
    maskq, valsq, flq = bcq.resolve(big)
    Qbig, _ = DegenerateSolver(big, maskq).solve_values(valsq, flq)
    qv = Qbig[:, 0][keep]
    q_prof = riesz.RadialProfile(z[pos], qv[pos], n=1, meta={"kind": "q", "q0": q0})
    q_fun = lambda x: np.interp(np.asarray(x, float), z, qv, left=0.0, right=0.0)
    Q = poisson_extend(q_fun, sigma, grid)
    # Hopf constant: largest c with q >= c (1 - 3|x|)^sigma on the ring
    rz = np.abs(z)
    in_ring = (rz > R - delta) & (rz < R)
    hopf_c = float(np.min(qv[in_ring] / (1.0 - 3.0 * rz[in_ring]) ** sigma)) if in_ring.any() else math.nan
    meta = {"delta_fits": {str(k): v for k, v in fits.items()}, "far": far, "grid": [nx, ny],
            "big_grid": list(big.shape)}
    return FracBase(params, grid, psi, I_prof, b_prof, w_tilde, w1, q_prof, Q, q0, delta, hopf_c,
                    d_sigma, meta)


def default_boundary_shape(X, Y):
    """``min(1, 2y)``: equal to one on ``{y >= 1/2}``, vanishing on Gamma."""
    return np.minimum(1.0, 2.0 * Y)


def _y_power_coefficient(values: np.ndarray, y: np.ndarray, sigma: float) -> float:
    """Least-squares ``c`` in ``values ~ c y^(2 sigma)`` over the given samples."""
    basis = y ** (2.0 * sigma)
    den = float(basis @ basis)
    return float(values @ basis) / den if den > 0 else math.nan


def build_barrier_frac(params: EnergyParams, c0: float, u_boundary: Callable | None = None,
                       base: FracBase | None = None, **base_kw) -> BarrierBundleFrac:
    """Fractional barrier for boundary data ``u`` with ``u >= c0`` on ``{y > 1/2}``.

    ``u_boundary`` is a callable of the node coordinates; the default is
    ``c0 min(1, 2y)``.  ``w2`` solves the extension problem with data
    ``u - w1`` on the arc, zero on ``Gamma \\ B_{1/3}`` and zero flux on
    ``Gamma cap B_{1/3}``.  ``lam`` is the grid-verified ratio
    ``min w2 / Q`` over nodes where ``Q`` is not negligible.
    """
    if c0 <= 0:
        raise ParameterDomainError(f"c0 must be positive, got {c0}")
    base = base or build_frac_base(params, **base_kw)
    grid = base.grid
    X, Y = grid.coords
    ub = (lambda X, Y: c0 * default_boundary_shape(X, Y)) if u_boundary is None else u_boundary
    uvals = np.broadcast_to(ub(X, Y), grid.shape).astype(float)
    upper = grid.outer_mask & (Y > 0.5)
    if np.any(uvals[upper] < c0 * (1 - 1e-12)):
        raise ValueError("boundary data must be at least c0 on {y > 1/2}")
    x = grid.x_nodes[0]
    out_R = np.abs(x) >= 1.0 / 3.0
    bc = BoundaryData.mixed(uvals - base.w1.values, gamma_dirichlet=out_R, gamma_values=0.0, gamma_flux=0.0)
    try:
        mask, vals, fl = bc.resolve(grid)
        w2v, _ = DegenerateSolver(grid, mask).solve_values(vals, fl)
    except Exception as exc:  # pragma: no cover
        raise ComponentSolveError(f"w2 solve failed: {exc}") from exc
    w2 = Field(grid, w2v)
    Qv = base.Q.values
    act = grid.interior_mask | grid.gamma_mask | (grid.outer_mask & (grid.radius_from_origin <= 1.0 + 1e-9))
    sel = act & (Qv > 1e-8 * base.q0)
    lam = float(np.min(w2v[sel] / Qv[sel])) if sel.any() else math.nan
    # boundary comparison near Gamma on the arc: coefficients of y^(2 sigma)
    arc = grid.outer_mask & (grid.radius_from_origin >= 1.0 - 1e-9) & (Y > 0) & (Y < 0.25)
    arc &= grid.radius_from_origin <= 1.0 + 2.0 / (grid.shape[0] - 1)
    cu = _y_power_coefficient(uvals[arc], Y[arc], params.sigma) if arc.any() else math.nan
    cq = _y_power_coefficient(Qv[arc], Y[arc], params.sigma) if arc.any() else math.nan
    ratio = cu / cq if cq and cq > 0 else math.nan
    w1v = base.w1.values
    inv = {
        "w_tilde_nonpositive": bool(np.all(base.w_tilde.values <= 0)),
        "Q_dominates_w1": bool(np.all(Qv[act] >= np.abs(w1v[act]) - 1e-10 * base.q0)),
        "Q_margin": float(np.min(Qv[act] - np.abs(w1v[act]))),
        "w_nonnegative": bool(np.all((w1v + w2v)[act] >= -1e-10 * max(base.q0, c0))),
        "w_min": float(np.min((w1v + w2v)[act])),
    }
    return BarrierBundleFrac(base, float(c0), w2, lam, ratio, inv)


def flux_of_w1_error(base: FracBase, window: float = 0.25) -> float:
    """Max relative error of ``dtn_flux(w1)`` against ``d_sigma (1 - 3|x|)^(beta - 2 sigma)`` on ``|x| <= window``."""
    pos, fl = dtn_flux(base.w1)
    sel = np.abs(pos) <= window
    p = base.params.beta - 2.0 * base.params.sigma
    ref = base.d_sigma * (1.0 - 3.0 * np.abs(pos[sel])) ** p
    return float(np.max(np.abs(fl[sel] - ref) / ref))


def verify_subsolution_frac(bundle: BarrierBundleFrac, params: EnergyParams | None = None,
                            theta: float | None = None) -> SubsolutionReport:
    """The four grid checks of the fractional barrier.

    (i) ``w >= 0``.  (ii) On ``Gamma cap B_{1/3 - delta}``: the flux of ``w``
    is at least ``2 w^(gamma-1)`` pointwise, and the chain
    ``min flux >= 2 ((lam - 1) q0)^(gamma-1)`` holds; since
    ``beta - 2 sigma < 0`` the flux is bounded below by its value
    ``d_sigma`` at the origin.  (iii) On the ring: flux at least
    ``2 ((lam - 1) c (1 - 3|x|)^sigma)^(gamma-1)`` with the Hopf constant ``c``,
    and at least ``2 w^(gamma-1)`` pointwise.  (iv) ``w >= (lam - 1) min Q > 0``
    on ``B_{1/6}``.
    """
    base = bundle.base
    params = params or base.params
    gam = params.gamma
    grid = base.grid
    w = bundle.w.values
    scale = max(base.q0, bundle.c0)
    theta = 1e-10 * scale if theta is None else theta
    act = grid.interior_mask | grid.gamma_mask
    mn = float(np.min(w[act]))
    c1 = CheckResult("nonnegative", mn >= -theta, mn)
    pos, fl = dtn_flux(bundle.w)
    gm = grid.gamma_mask[grid.gamma_index]
    wg = w[grid.gamma_index][gm]
    ax = np.abs(pos)
    R, delta, lam = 1.0 / 3.0, base.delta, bundle.lam
    core = ax < R - delta
    ring = (ax >= R - delta) & (ax < R)

    def pointwise(sel):
        p_ = sel & (wg > theta)
        if not p_.any():
            return math.inf, True
        m = fl[p_] - 2.0 * wg[p_] ** (gam - 1.0)
        return float(np.min(m)), bool(np.all(m >= 0))

    m2, ok2 = pointwise(core)
    excess = lam - 1.0
    chain = 2.0 * (excess * base.q0) ** (gam - 1.0) if excess > 0 else math.inf
    fmin = float(np.min(fl[core])) if core.any() else math.nan
    c2 = CheckResult("core_flux", ok2 and fmin >= chain, min(m2, fmin - chain),
                     details={"pointwise_margin": m2, "flux_min": fmin, "chain_bound": chain})
    m3, ok3 = pointwise(ring)
    if excess > 0 and ring.any():
        bound = 2.0 * (excess * base.hopf_c * (1.0 - 3.0 * ax[ring]) ** params.sigma) ** (gam - 1.0)
        mh = float(np.min(fl[ring] - bound))
    else:
        mh = -math.inf
    c3 = CheckResult("ring_flux", ok3 and mh >= 0, min(m3, mh),
                     details={"pointwise_margin": m3, "hopf_margin": mh, "hopf_c": base.hopf_c})
    X, Y = grid.coords
    small = (grid.radius_from_origin <= 1.0 / 6.0) & act
    wmin = float(np.min(w[small]))
    qmin = float(np.min(base.Q.values[small]))
    target = excess * qmin
    c4 = CheckResult("inner_positive", excess > 0 and wmin >= target > 0, wmin - target,
                     details={"w_min": wmin, "Q_min": qmin, "lower": target})
    return SubsolutionReport([c1, c2, c3, c4])


@dataclass
class ThresholdSearch:
    c0_hat: float
    path: list
    monotone: bool
    fails_below: bool

    def as_dict(self) -> dict:
        return {"c0_hat": self.c0_hat, "monotone": self.monotone, "fails_below": self.fails_below,
                "path": self.path}


def find_c0_threshold(params: EnergyParams, base: FracBase | None = None, start: float = 1.0,
                      rel: float = 0.05, **base_kw) -> ThresholdSearch:
    """Bisection (in log c0) for the smallest ``c0`` passing all four checks.

    Records every probe; asserts along the path that passing is monotone in
    ``c0`` and confirms failure at ``c0_hat / 4``.
    """
    base = base or build_frac_base(params, **base_kw)
    path = []

    def passes(c):
        rep = verify_subsolution_frac(build_barrier_frac(params, c, base=base), params)
        path.append({"c0": c, "passed": rep.passed, "first_failure": rep.first_failure})
        return rep.passed

    hi = start
    while not passes(hi):
        hi *= 4.0
        if hi > 1e12:
            raise ComponentSolveError("no passing c0 found")
    lo = hi / 4.0
    while passes(lo):
        hi, lo = lo, lo / 4.0
        if lo < 1e-12:
            raise ComponentSolveError("checks pass for arbitrarily small c0")
    while hi / lo > 1.0 + rel:
        mid = math.sqrt(hi * lo)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    fails_below = not passes(hi / 4.0)
    ordered = sorted(path, key=lambda e: e["c0"])
    seen_pass = False
    monotone = True
    for e in ordered:
        if e["passed"]:
            seen_pass = True
        elif seen_pass:
            monotone = False
    return ThresholdSearch(hi, path, monotone, fails_below)


# -- comparison --------------------------------------------------------------------------------


@dataclass
class ComparisonReport:
    min_gap: float
    violation_measure: float
    passed: bool
    energy_u: float | None = None
    energy_max: float | None = None

    def as_dict(self) -> dict:
        return {"min_gap": self.min_gap, "violation_measure": self.violation_measure,
                "passed": self.passed, "energy_u": self.energy_u, "energy_max": self.energy_max}


def verify_comparison(u, w, theta: float, params: EnergyParams | None = None,
                      grid: BallGrid | None = None) -> ComparisonReport:
    """``min (u - w)``, the measure of ``{w > u + theta}``, and ``u >= w - theta``.

    ``u, w`` are :class:`Field` objects on the same grid, or arrays on a
    :class:`BallGrid` given as ``grid``.  With ``params`` and Fields, also
    evaluates ``J(u)`` and ``J(max(u, w))``.
    """
    if isinstance(u, Field) or isinstance(w, Field):
        if not (isinstance(u, Field) and isinstance(w, Field)):
            raise GridMismatchError("u and w must both be Fields")
        if u.grid is not w.grid and not u.grid.same_as(w.grid):
            raise GridMismatchError("u and w live on different grids")
        g = u.grid
        act = g.interior_mask | g.gamma_mask | g.outer_mask
        gap = u.values - w.values
        bad = Field(g, (w.values > u.values + theta).astype(float))
        measure = weighted_integral(bad)
        eu = em = None
        if params is not None:
            eu = eval_energy(u, params).total
            em = eval_energy(Field(g, np.maximum(u.values, w.values)), params).total
        mn = float(np.min(gap[act]))
        return ComparisonReport(mn, measure, mn >= -theta, eu, em)
    if grid is None:
        raise ValueError("array inputs need their BallGrid")
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.shape != grid.shape or w.shape != grid.shape:
        raise GridMismatchError("array shapes do not match the grid")
    act = grid.active
    gap = u - w
    measure = float(np.sum((w > u + theta) & act) * grid.h**grid.n)
    mn = float(np.min(gap[act]))
    return ComparisonReport(mn, measure, mn >= -theta)
