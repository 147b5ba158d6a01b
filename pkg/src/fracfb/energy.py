"""Energy evaluation and constrained minimization of the thin-penalty energy.

The interior unknowns enter the energy quadratically, so they are eliminated
exactly: for a trace ``t`` on Gamma the energy-minimizing interior is the
discrete weighted-harmonic extension, and the energy reduces to

    E(t) = 1/2 t' S t + b' t + c + sum_p w_p phi(t_p)

with ``S`` the Schur complement of the stiffness matrix on the Gamma nodes.
The nonconvex reduced problem is minimized over ``t >= 0`` by a projected
Barzilai-Borwein method with a nonmonotone Armijo safeguard, refined by a
Newton step on the positive set and a local search over free-boundary nodes.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from fracfb.grid import Field, Grid
from fracfb.params import EnergyParams, ParameterDomainError
from fracfb.solver import DegenerateSolver


@dataclass(frozen=True)
class Energy:
    dirichlet: float
    penalty: float
    total: float

    def as_dict(self) -> dict:
        return {"dirichlet": self.dirichlet, "penalty": self.penalty, "total": self.total}


@dataclass
class ELReport:
    interior_residual: float
    gamma_residual: float
    active_set_size: int
    vacuous: bool = False
    # residual of the opposite sign convention, flux = -gamma u^(gamma-1)
    gamma_residual_opposite: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "interior_residual": self.interior_residual,
            "gamma_residual": self.gamma_residual,
            "gamma_residual_opposite": self.gamma_residual_opposite,
            "active_set_size": self.active_set_size,
            "vacuous": self.vacuous,
        }


@dataclass
class MinimizeOpts:
    eps_schedule: tuple = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
    tol: float = 1e-8
    gamma_tol: float = 1e-2
    maxiter: int = 20000
    memory: int = 10
    polish: bool = True
    polish_rounds: int = 200
    theta_factor: float = 10.0
    theta_floor: float = 1e-6


@dataclass
class MinimizerResult:
    u: Field
    energy: Energy
    el_report: ELReport
    continuation_path: list = field(default_factory=list)
    theta: float = 0.0
    basin: str = ""
    candidates: dict = field(default_factory=dict)
    iterations: int = 0


def _check_grid(grid: Grid, params: EnergyParams) -> None:
    if abs(grid.a - params.a) > 1e-12:
        raise ParameterDomainError(
            f"grid weight exponent a={grid.a} does not match params a={params.a}")
    if grid.n != params.n:
        raise ParameterDomainError(f"grid dimension {grid.n} does not match params n={params.n}")


def _line_weights(grid: Grid) -> np.ndarray:
    return np.asarray(grid.gamma_weights, dtype=float)


def eval_energy(u: Field, params: EnergyParams) -> Energy:
    """Discrete energy: ``1/2 u' A u`` plus the Gamma quadrature of ``(u+)^gamma``.

    The penalty runs over the whole y = 0 line with dual-cell weights, so a
    constant ``c`` on ``[-1, 1]`` gives exactly ``2 c^gamma``.
    """
    g = u.grid
    _check_grid(g, params)
    v = u.values.ravel()
    dirichlet = 0.5 * float(v @ (g.stiffness @ v))
    tr = np.maximum(u.values[g.gamma_index], 0.0)
    penalty = float(np.sum(_line_weights(g) * tr**params.gamma))
    return Energy(dirichlet, penalty, dirichlet + penalty)


# -- reduced problem --------------------------------------------------------------------


# factorizations and Schur complements depend on the grid only; keyed weakly
_GRID_CACHE: "weakref.WeakKeyDictionary[Grid, dict]" = weakref.WeakKeyDictionary()


def _free_solver(grid: Grid) -> DegenerateSolver:
    cache = _GRID_CACHE.setdefault(grid, {})
    if "free" not in cache:
        cache["free"] = DegenerateSolver(grid, grid.outer_mask)
    return cache["free"]


class TraceProblem:
    """The energy as a function of the Gamma trace (outer data fixed)."""

    def __init__(self, grid: Grid, outer: np.ndarray, params: EnergyParams):
        self.grid = grid
        self.params = params
        shape = grid.shape
        gi = grid.gamma_index
        line = np.zeros(shape, dtype=bool)
        line[gi] = True
        self.gamma_nodes = line & grid.gamma_mask
        self.mask = grid.outer_mask | self.gamma_nodes
        cache = _GRID_CACHE.setdefault(grid, {})
        if "trace" not in cache:
            cache["trace"] = DegenerateSolver(grid, self.mask)
        self.solver = cache["trace"]
        self.outer = np.where(grid.outer_mask, outer, 0.0)
        self.gidx = np.flatnonzero(self.gamma_nodes.ravel())
        self.w = grid.gamma_weights[grid.gamma_mask[gi]].ravel()
        # u0: extension of the outer data with zero trace
        self.u0, _ = self.solver.solve_values(self.outer, np.zeros(shape))
        A = grid.stiffness
        u0 = self.u0.ravel()
        self.b = np.asarray(A @ u0)[self.gidx]
        self.c = 0.5 * float(u0 @ (A @ u0))
        if "S" not in cache:
            cache["S"] = self._schur()
        self.S = cache["S"]
        self.line_w = _line_weights(grid)
        # penalty of the fixed (Dirichlet) part of the y = 0 line
        fixed_line = line & grid.outer_mask
        self.c_line = float(np.sum(
            (self.line_w.ravel() * np.maximum(self.outer[gi].ravel(), 0.0) ** params.gamma)
            [fixed_line[gi].ravel()]))

    def _schur(self) -> np.ndarray:
        A = self.grid.stiffness.tocsr()
        free = self.solver.free
        g = self.gidx
        A_gg = A[g][:, g].toarray()
        A_fg = A[free][:, g].toarray()
        X = self.solver.lu.solve(A_fg)
        A_gf = A[g][:, free]
        S = A_gg - np.asarray(A_gf @ X)
        return 0.5 * (S + S.T)

    def extend(self, t: np.ndarray) -> np.ndarray:
        vals = self.outer.copy().ravel()
        vals[self.gidx] = t
        u, _ = self.solver.solve_values(vals.reshape(self.grid.shape), np.zeros(self.grid.shape))
        return u

    def dirichlet(self, t: np.ndarray) -> float:
        return 0.5 * float(t @ (self.S @ t)) + float(self.b @ t) + self.c

    def energy(self, t: np.ndarray, eps: float) -> float:
        gam = self.params.gamma
        pen = np.sum(self.w * ((t + eps) ** gam - eps**gam))
        return self.dirichlet(t) + float(pen) + self.c_line

    def true_energy(self, t: np.ndarray) -> float:
        return self.dirichlet(t) + float(np.sum(self.w * np.maximum(t, 0.0) ** self.params.gamma)) \
            + self.c_line

    def grad(self, t: np.ndarray, eps: float) -> np.ndarray:
        gam = self.params.gamma
        return self.S @ t + self.b + self.w * gam * (t + eps) ** (gam - 1.0)


def _spg(prob: TraceProblem, t: np.ndarray, eps: float, opts: MinimizeOpts,
         free: np.ndarray | None = None) -> tuple[np.ndarray, int, float]:
    """Projected Barzilai-Borwein descent in the metric ``diag(w)``.

    ``free`` (boolean) restricts the iteration to a subset; other entries stay
    fixed.  Returns (t, iterations, final projected-gradient norm).
    """
    w = prob.w
    if free is None:
        free = np.ones(t.shape, dtype=bool)
    t = np.maximum(t, 0.0)
    f = prob.energy(t, eps)
    g = prob.grad(t, eps) / w
    g[~free] = 0.0
    hist = [f]
    scale = 1.0 + float(np.max(np.abs(t))) if t.size else 1.0
    pg = np.max(np.abs(np.maximum(t - g, 0.0) - t), initial=0.0)
    alpha = 1.0 / max(pg, 1e-12) * scale * 1e-2
    amin, amax = 1e-14, 1e14
    it = 0
    while it < opts.maxiter:
        pg = float(np.max(np.abs(np.maximum(t - g, 0.0) - t), initial=0.0))
        if pg <= opts.tol * scale:
            break
        d = np.maximum(t - alpha * g, 0.0) - t
        gd = float(np.dot(g * w, d))
        if gd >= 0:
            alpha = max(alpha * 0.1, amin)
            it += 1
            continue
        fmax = max(hist[-opts.memory:])
        lam = 1.0
        while True:
            tn = t + lam * d
            fn = prob.energy(tn, eps)
            if fn <= fmax + 1e-4 * lam * gd or lam < 1e-12:
                break
            lam *= 0.5
        gn = prob.grad(tn, eps) / w
        gn[~free] = 0.0
        s = tn - t
        yv = gn - g
        sy = float(np.dot(s * w, yv))
        ss = float(np.dot(s * w, s))
        alpha = min(amax, max(amin, ss / sy)) if sy > 0 else amax ** 0.5
        t, f, g = tn, fn, gn
        hist.append(f)
        it += 1
    return t, it, pg


def _newton_positive(prob: TraceProblem, t: np.ndarray, eps: float, tol: float,
                     maxiter: int = 50) -> np.ndarray:
    """Damped Newton on the positive set with the zero set frozen.

    Steps that would leave the positive set or fail to decrease the energy
    are shortened; a non-positive-definite Hessian ends the refinement.
    """
    gam = prob.params.gamma
    P = t > 0
    if not np.any(P):
        return t
    idx = np.flatnonzero(P)
    S_pp = prob.S[np.ix_(idx, idx)]
    for _ in range(maxiter):
        tp = t[idx]
        g = prob.grad(t, eps)[idx]
        if np.max(np.abs(g / prob.w[idx])) <= tol * (1.0 + np.max(tp)):
            break
        H = S_pp + np.diag(prob.w[idx] * gam * (gam - 1.0) * (tp + eps) ** (gam - 2.0))
        try:
            c = sla.cho_factor(H, check_finite=False)
        except np.linalg.LinAlgError:
            break
        step = -sla.cho_solve(c, g, check_finite=False)
        lam = 1.0
        neg = step < 0
        if np.any(neg):
            lam = min(1.0, 0.95 * float(np.min(-tp[neg] / step[neg])))
        f0 = prob.energy(t, eps)
        while lam > 1e-10:
            tn = t.copy()
            tn[idx] = tp + lam * step
            if prob.energy(tn, eps) <= f0 + 1e-4 * lam * float(g @ step):
                break
            lam *= 0.5
        else:
            break
        t = tn
    return t


def _solve_stage(prob, t, eps, opts):
    t, it, _ = _spg(prob, t, eps, opts)
    t = _newton_positive(prob, t, eps, opts.tol)
    return t, it


def _neighbours(grid: Grid, gm: np.ndarray) -> list[np.ndarray]:
    """For each Gamma unknown, the indices of Gamma unknowns adjacent along an x axis."""
    shape = grid.shape[:-1]
    ids = -np.ones(shape, dtype=int)
    ids[gm] = np.arange(int(gm.sum()))
    out = []
    for pos in zip(*np.nonzero(gm)):
        nb = []
        for k in range(len(shape)):
            for s in (-1, 1):
                q = list(pos)
                q[k] += s
                if 0 <= q[k] < shape[k] and ids[tuple(q)] >= 0:
                    nb.append(ids[tuple(q)])
        out.append(np.array(nb, dtype=int))
    return out


def _polish(prob: TraceProblem, t: np.ndarray, eps: float, opts: MinimizeOpts) -> tuple[np.ndarray, int]:
    """Local search over free-boundary nodes: flip a node between zero and
    positive and keep the flip when the unregularized energy drops."""
    gm = prob.grid.gamma_mask[prob.grid.gamma_index]
    nbrs = _neighbours(prob.grid, gm)
    best = prob.true_energy(t)
    flips = 0
    for _ in range(opts.polish_rounds):
        pos = t > 0
        frontier = [i for i in range(t.size)
                    if nbrs[i].size and np.any(pos[nbrs[i]] != pos[i])]
        improved = False
        for i in frontier:
            trial = t.copy()
            if pos[i]:
                trial[i] = 0.0
            else:
                trial[i] = float(np.max(t[nbrs[i]]))
            trial = _newton_positive(prob, trial, eps, opts.tol)
            trial, _, _ = _spg(prob, trial, eps, opts)
            trial = _newton_positive(prob, trial, eps, opts.tol)
            e = prob.true_energy(trial)
            if e < best - 1e-14 * max(1.0, abs(best)):
                t, best = trial, e
                flips += 1
                improved = True
                break
        if not improved:
            break
    return t, flips


def _continuation(prob, t, opts):
    path = []
    iters = 0
    for eps in opts.eps_schedule:
        t, it = _solve_stage(prob, t, eps, opts)
        iters += it
        path.append((float(eps), float(prob.energy(t, eps))))
    return t, path, iters


def minimize(grid: Grid, outer_bc, params: EnergyParams, opts: MinimizeOpts | None = None) -> MinimizerResult:
    """Non-negative discrete minimizer of the energy with Dirichlet data on the outer boundary.

    ``outer_bc`` is an array over the grid (outer-boundary entries are read),
    a scalar, or a callable of the node coordinates.
    """
    opts = opts or MinimizeOpts()
    _check_grid(grid, params)
    if callable(outer_bc):
        outer = np.broadcast_to(outer_bc(*grid.coords), grid.shape).astype(float)
    else:
        outer = np.broadcast_to(np.asarray(outer_bc, dtype=float), grid.shape).astype(float)
    data = outer[grid.outer_mask]
    if np.any(data < 0) or not np.all(np.isfinite(data)):
        raise ValueError("outer boundary data must be finite and non-negative")
    scale = float(np.max(data)) if data.size else 0.0
    eps_final = float(opts.eps_schedule[-1])
    theta = max(opts.theta_factor * eps_final, opts.theta_floor) * max(scale, 1e-300)

    prob = TraceProblem(grid, outer, params)
    m = prob.gidx.size
    candidates = {}
    if scale == 0.0:
        t = np.zeros(m)
        path = [(float(e), 0.0) for e in opts.eps_schedule]
        best = ("zero", t, path, 0)
    else:
        starts = {"zero": np.zeros(m)}
        # the flux-free extension of the data (the u^gamma term switched off)
        u_free = _free_solver(grid).solve_values(outer, np.zeros(grid.shape))[0]
        starts["degenerate"] = np.maximum(u_free.ravel()[prob.gidx], 0.0)
        best = None
        for name, t0 in starts.items():
            t, path, iters = _continuation(prob, t0, opts)
            if opts.polish:
                t, flips = _polish(prob, t, eps_final, opts)
            e = prob.true_energy(t)
            candidates[name] = e
            if best is None or e < candidates[best[0]] - 1e-14 * max(1.0, abs(e)):
                best = (name, t, path, iters)
    name, t, path, iters = best
    u = Field(grid, np.maximum(prob.extend(t), 0.0), nonnegative=True)
    energy = eval_energy(u, params)
    report = el_residual(u, params, theta=theta)
    return MinimizerResult(u, energy, report, path, theta, name, candidates, iters)


def continuation_bound_holds(result: MinimizerResult, gamma_measure: float, gamma: float) -> bool:
    """``E_{k+1} <= E_k + eps_k^gamma |Gamma|`` along the continuation path."""
    path = result.continuation_path
    for (e0, f0), (_, f1) in zip(path, path[1:]):
        if f1 > f0 + e0**gamma * gamma_measure + 1e-12 * max(1.0, abs(f0)):
            return False
    return True


def el_residual(u: Field, params: EnergyParams, theta: float | None = None) -> ELReport:
    """Discrete Euler-Lagrange residuals of ``u``.

    ``interior_residual`` is the weighted divergence residual relative to the
    size of the stencil terms; ``gamma_residual`` is the weighted L2 misfit of
    ``flux - gamma u^(gamma-1)`` over ``{trace > theta}`` relative to the L2
    size of ``gamma u^(gamma-1)`` there.
    """
    g = u.grid
    _check_grid(g, params)
    if theta is None:
        theta = 1e-6 * max(float(np.max(np.abs(u.values))), 1e-300)
    v = u.values.ravel()
    A = g.stiffness
    Av = A @ v
    inner = g.interior_mask.ravel()
    diag_term = np.abs(A.diagonal() * v)
    denom = float(np.linalg.norm(diag_term[inner]))
    num = float(np.linalg.norm(Av[inner]))
    interior = num / denom if denom > 0 else num
    gm = g.gamma_mask[g.gamma_index]
    tr = u.values[g.gamma_index][gm]
    w = g.gamma_weights[gm]
    flux = -Av.reshape(g.shape)[g.gamma_index][gm] / w
    pos = tr > theta
    active = int(np.sum(~pos))
    if not np.any(pos):
        return ELReport(interior, 0.0, active, vacuous=True, gamma_residual_opposite=0.0)
    target = params.gamma * tr[pos] ** (params.gamma - 1.0)
    norm = math.sqrt(float(np.sum(w[pos] * target**2)))
    res = math.sqrt(float(np.sum(w[pos] * (flux[pos] - target) ** 2))) / norm
    opp = math.sqrt(float(np.sum(w[pos] * (flux[pos] + target) ** 2))) / norm
    return ELReport(interior, res, active, False, opp)
