"""Weighted elliptic solves, the fractional Poisson extension and the boundary flux.

The discrete operator is the finite-volume form of ``div(y^a grad u)`` on the
tensor grid (see :attr:`fracfb.grid.Grid.stiffness`).  At a node of Gamma the
cell balance reads ``(A u)_p = -w_p * lim y^a du/dy``, which is used both to
impose flux data and to read the flux back off a solution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import integrate, interpolate, signal, special

from fracfb.grid import Field, Grid


class SolverStallError(RuntimeError):
    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


class ResolutionError(RuntimeError):
    pass


class TruncationWarning(UserWarning):
    pass


# -- boundary data ------------------------------------------------------------------


@dataclass
class BoundaryData:
    """Dirichlet data on the outer boundary plus a condition on Gamma.

    ``outer`` is an array over the whole grid (only outer-boundary entries are
    read) or a callable of the node coordinates.  On Gamma, nodes flagged in
    ``gamma_dirichlet`` take ``gamma_values``; all other Gamma nodes take the
    flux ``lim y^a du/dy = gamma_flux``.
    """

    outer: np.ndarray | Callable | float
    kind: str = "even_reflection"
    gamma_values: np.ndarray | None = None
    gamma_flux: np.ndarray | None = None
    gamma_dirichlet: np.ndarray | None = None

    @classmethod
    def dirichlet(cls, outer, gamma_values) -> "BoundaryData":
        return cls(outer, "dirichlet", gamma_values=gamma_values)

    @classmethod
    def neumann(cls, outer, gamma_flux) -> "BoundaryData":
        return cls(outer, "neumann_flux", gamma_flux=gamma_flux)

    @classmethod
    def even_reflection(cls, outer) -> "BoundaryData":
        return cls(outer, "even_reflection")

    @classmethod
    def mixed(cls, outer, gamma_dirichlet, gamma_values, gamma_flux=0.0) -> "BoundaryData":
        return cls(outer, "mixed", gamma_values=gamma_values, gamma_flux=gamma_flux,
                   gamma_dirichlet=gamma_dirichlet)

    def resolve(self, grid: Grid):
        """Return (dirichlet mask, dirichlet values, flux values) over the full node set."""
        shape = grid.shape
        gi = grid.gamma_index
        if callable(self.outer):
            outer = np.broadcast_to(self.outer(*grid.coords), shape).astype(float)
        else:
            outer = np.broadcast_to(np.asarray(self.outer, dtype=float), shape).astype(float)
        mask = grid.outer_mask.copy()
        values = np.where(mask, outer, 0.0)
        flux = np.zeros(shape)
        slice_shape = shape[:-1]
        gmask = grid.gamma_mask[gi]

        def _slice(v, default=0.0):
            if v is None:
                v = default
            if callable(v):
                pos = np.meshgrid(*grid.x_nodes, indexing="ij")
                v = v(*pos)
            return np.broadcast_to(np.asarray(v, dtype=float), slice_shape)

        if self.kind == "dirichlet":
            dmask = gmask
        elif self.kind in ("neumann_flux", "even_reflection"):
            dmask = np.zeros(slice_shape, dtype=bool)
        elif self.kind == "mixed":
            dmask = np.broadcast_to(np.asarray(self.gamma_dirichlet, dtype=bool), slice_shape) & gmask
        else:
            raise ValueError(f"unknown Gamma condition {self.kind!r}")

        if self.kind == "even_reflection":
            if self.gamma_flux is not None and np.any(_slice(self.gamma_flux) != 0):
                raise ValueError("even reflection requires zero flux on Gamma")
            gflux = np.zeros(slice_shape)
        else:
            gflux = _slice(self.gamma_flux)
        if np.any(dmask):
            gvals = _slice(self.gamma_values)
            sub = values[gi]
            sub[dmask] = gvals[dmask]
            values[gi] = sub
            msub = mask[gi]
            msub[dmask] = True
            mask[gi] = msub
        fsub = np.where(gmask & ~dmask, gflux, 0.0)
        flux[gi] = fsub
        if not (np.all(np.isfinite(values[mask])) and np.all(np.isfinite(flux))):
            raise ValueError("boundary data must be finite")
        return mask, values, flux


@dataclass
class SolveReport:
    iterations: int
    residual: float
    flux_residual: float = 0.0
    history: list = field(default_factory=list)


# -- linear solves -------------------------------------------------------------------------


class DegenerateSolver:
    """Factorized solver for a fixed grid and a fixed set of Dirichlet nodes.

    Reusing one instance across right-hand sides (probe ensembles, Schur
    complements) avoids refactorizing the matrix.
    """

    def __init__(self, grid: Grid, dirichlet_mask: np.ndarray):
        self.grid = grid
        self.dirichlet_mask = np.asarray(dirichlet_mask, dtype=bool).ravel()
        self.free = np.flatnonzero(~self.dirichlet_mask)
        self.fixed = np.flatnonzero(self.dirichlet_mask)
        a = grid.stiffness
        self.A = a
        self.A_ff = a[self.free][:, self.free].tocsc()
        self.A_fd = a[self.free][:, self.fixed].tocsr()
        self._lu = None

    @property
    def lu(self):
        if self._lu is None:
            self._lu = spla.splu(self.A_ff, permc_spec="COLAMD")
        return self._lu

    def flux_weights(self) -> np.ndarray:
        w = np.zeros(self.grid.shape)
        w[self.grid.gamma_index] = self.grid.gamma_weights
        return w.ravel()

    def rhs(self, values: np.ndarray, flux: np.ndarray) -> np.ndarray:
        b = -(self.flux_weights() * np.asarray(flux).ravel())[self.free]
        if self.fixed.size:
            b = b - self.A_fd @ np.asarray(values).ravel()[self.fixed]
        return b

    def solve_values(self, values: np.ndarray, flux: np.ndarray, tol: float = 1e-10,
                     method: str = "direct", maxiter: int = 20000):
        values = np.asarray(values, dtype=float)
        b = self.rhs(values, flux)
        history: list[float] = []
        if method == "direct":
            x = self.lu.solve(b)
            iterations = 1
        elif method == "cg":
            bnorm = max(np.linalg.norm(b), 1e-300)
            d = self.A_ff.diagonal()
            prec = spla.LinearOperator(self.A_ff.shape, matvec=lambda v: v / d)

            def cb(xk):
                history.append(float(np.linalg.norm(self.A_ff @ xk - b) / bnorm))

            x, info = spla.cg(self.A_ff, b, rtol=tol, maxiter=maxiter, M=prec, callback=cb)
            iterations = len(history)
            if info != 0:
                raise SolverStallError(
                    f"conjugate gradients did not reach tol={tol} in {maxiter} iterations", history
                )
        else:
            raise ValueError(f"unknown method {method!r}")
        u = values.ravel().copy()
        u[self.free] = x
        res = self.A_ff @ x - b
        scale = max(np.linalg.norm(b), np.linalg.norm(self.A_ff @ x), 1e-300)
        rel = float(np.linalg.norm(res) / scale)
        if rel > max(tol, 1e-8) and method == "direct":
            raise SolverStallError(f"direct solve residual {rel:.3e} above tolerance", [rel])
        return u.reshape(self.grid.shape), SolveReport(iterations, rel, 0.0, history)


def solve_degenerate(grid: Grid, bc: BoundaryData, tol: float = 1e-10, method: str = "direct"):
    """Solve ``div(y^a grad u) = 0`` with the given boundary data; returns (Field, SolveReport)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    mask, values, flux = bc.resolve(grid)
    solver = DegenerateSolver(grid, mask)
    u, report = solver.solve_values(values, flux, tol=tol, method=method)
    field_ = Field(grid, u)
    neumann = grid.gamma_mask & ~mask
    if np.any(neumann):
        got = _flux_all(field_)
        report.flux_residual = float(np.max(np.abs(got[neumann] - flux[neumann])))
    return field_, report


def _flux_all(u: Field) -> np.ndarray:
    g = u.grid
    w = np.ones(g.shape)
    w[g.gamma_index] = g.gamma_weights
    return -(g.stiffness @ u.values.ravel()).reshape(g.shape) / w


def dtn_flux(u: Field, tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Discrete ``lim_{y->0} y^a du/dy`` at the Gamma nodes.

    The value is the finite-volume balance of the bottom dual cell: the
    one-sided derivative in ``s = y^(2 sigma) / (2 sigma)`` between the first
    two y levels plus the tangential fluxes of that cell.  With ``tol`` set,
    the spread against the coarser two-level estimate (levels 0 and 2) is used
    as an extrapolation error indicator and :class:`ResolutionError` raised if
    it exceeds ``tol`` relative to the flux scale.
    """
    g = u.grid
    full = _flux_all(u)
    gm = g.gamma_mask[g.gamma_index]
    flux = full[g.gamma_index][gm]
    if g.n == 1:
        pos = g.x_nodes[0][gm]
    else:
        pos = np.stack(np.meshgrid(*g.x_nodes, indexing="ij"), axis=-1)[gm]
    if tol is not None:
        s = g.s_nodes
        v = u.values
        lvl = (slice(None),) * g.n
        coarse = ((v[lvl + (2,)] - v[lvl + (0,)]) / (s[2] - s[0]))[gm]
        fine = ((v[lvl + (1,)] - v[lvl + (0,)]) / (s[1] - s[0]))[gm]
        scale = max(np.max(np.abs(flux)), 1e-300)
        err = float(np.max(np.abs(coarse - fine)) / scale)
        if err > tol:
            raise ResolutionError(f"estimated flux extrapolation error {err:.3e} exceeds {tol:.3e}")
    return pos, flux


# -- fractional Laplacian constants ----------------------------------------------------------


def extension_constant(sigma: float) -> float:
    """``d`` in ``lim y^a du/dy = -d (-Delta)^sigma u(., 0)`` (symbol ``|xi|^(2 sigma)``)."""
    return 2.0 ** (1.0 - 2.0 * sigma) * math.gamma(1.0 - sigma) / math.gamma(sigma)


@lru_cache(maxsize=None)
def poisson_kernel_mass(sigma: float) -> float:
    """``int_R (1 + t^2)^(-(1 + 2 sigma)/2) dt`` by quadrature."""
    val, _ = integrate.quad(lambda t: (1.0 + t * t) ** (-(1.0 + 2.0 * sigma) / 2.0), 0, np.inf,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return 2.0 * val


def _phi(t: np.ndarray, y: float, sigma: float, beta_const: float) -> np.ndarray:
    """Normalized Poisson-kernel mass on (0, t) (odd in t)."""
    r = (y * y) / (t * t + y * y)
    # complementary regularized incomplete beta keeps far tails accurate
    core = 0.5 * beta_const * (1.0 - special.betainc(sigma, 0.5, r))
    return np.sign(t) * core


def _psi(t: np.ndarray, y: float, sigma: float, p: float) -> np.ndarray:
    """Antiderivative of ``t * P(t, y)``."""
    if abs(sigma - 0.5) < 1e-12:
        return p * y * 0.5 * np.log(t * t + y * y)
    q = 0.5 - sigma
    return p * y ** (2 * sigma) * (t * t + y * y) ** q / (2 * q)


def _xi(t: np.ndarray, y: float, sigma: float, p: float, phi: np.ndarray) -> np.ndarray:
    """Antiderivative of ``t^2 * P(t, y)`` (``phi`` is the matching mass)."""
    q = 0.5 - sigma
    return (p * y ** (2 * sigma) * t * (t * t + y * y) ** q - y * y * phi) / (2.0 - 2.0 * sigma)


def _theta(t: np.ndarray, y: float, sigma: float, p: float, psi: np.ndarray) -> np.ndarray:
    """Antiderivative of ``t^3 * P(t, y)``."""
    return p * y ** (2 * sigma) * (t * t + y * y) ** (1.5 - sigma) / (3.0 - 2.0 * sigma) - y * y * psi


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def _near_moments(d: np.ndarray, h: float, y: float, sigma: float, p: float,
                  beta_const: float) -> list[np.ndarray]:
    """``int_{dh}^{(d+1)h} (t - dh)^m P(t, y) dt`` for m = 0..3, exactly."""
    tl, th = d * h, (d + 1) * h
    fl, fh = _phi(tl, y, sigma, beta_const), _phi(th, y, sigma, beta_const)
    sl, sh = _psi(tl, y, sigma, p), _psi(th, y, sigma, p)
    m0 = fh - fl
    m1 = sh - sl
    m2 = _xi(th, y, sigma, p, fh) - _xi(tl, y, sigma, p, fl)
    m3 = _theta(th, y, sigma, p, sh) - _theta(tl, y, sigma, p, sl)
    s = -tl
    return [m0, m1 + s * m0, m2 + 2 * s * m1 + s * s * m0,
            m3 + 3 * s * m2 + 3 * s * s * m1 + s**3 * m0]


def poisson_extend(
    f: Callable | tuple[np.ndarray, np.ndarray],
    sigma: float,
    grid: Grid,
    window: tuple[float, float] | None = None,
    refine: int = 2,
    trunc_tol: float = 1e-6,
    near: int = 32,
) -> Field:
    """Fractional Poisson extension of Gamma data onto ``grid`` (n = 1).

    ``u(x, y) = p * int f(z) y^(2 sigma) / ((x - z)^2 + y^2)^((1 + 2 sigma)/2) dz``
    with ``p`` the reciprocal of the numerically computed kernel mass.  ``f``
    is either a callable, sampled on a lattice ``refine`` times finer than the
    grid over ``window`` (default: four grid spans either side), or a pair
    ``(z, values)`` of lattice samples.

    Between samples ``f`` is the monotone C^1 cubic (PCHIP) interpolant.  A
    piecewise linear interpolant is not enough once ``sigma > 1/2``: its kinks
    have unbounded fractional Laplacian and spoil the flux at the bottom
    levels.  Segments within ``near`` lattice steps of the target are integrated
    exactly against the kernel while ``y`` is small; everything else uses
    four-point Gauss rules.  Outside the window ``f`` is continued by its end
    values.
    """
    if grid.n != 1:
        raise NotImplementedError("poisson_extend supports n = 1 only")
    x = grid.x_nodes[0]
    hx = np.diff(x)
    if not np.allclose(hx, hx[0], rtol=1e-10, atol=0):
        raise ValueError("poisson_extend needs a uniform x grid")
    h = hx[0] / refine
    mass = poisson_kernel_mass(sigma)
    p = 1.0 / mass
    beta_const = special.beta(0.5, sigma) * p

    if callable(f):
        if window is None:
            span = x[-1] - x[0]
            window = (x[0] - 4 * span, x[-1] + 4 * span)
        kl = int(math.ceil((x[0] - window[0]) / h))
        kr = int(math.ceil((window[1] - x[-1]) / h))
        z = x[0] + h * np.arange(-kl, (len(x) - 1) * refine + kr + 1)
        fz = np.asarray(f(z), dtype=float)
        ends = np.asarray(f(np.array([2 * z[0] - x[0], 2 * z[-1] - x[-1]])), dtype=float)
        drift = float(np.max(np.abs(ends - fz[[0, -1]])))
        if drift > trunc_tol:
            warnings.warn(f"window truncation: data drifts by {drift:.3e} beyond the window",
                          TruncationWarning, stacklevel=2)
    else:
        z, fz = (np.asarray(v, dtype=float) for v in f)
        kl = int(round((x[0] - z[0]) / h))
        if not np.allclose(z, z[0] + h * np.arange(len(z)), atol=1e-9 * h):
            raise ValueError("sample points must form a lattice refine times finer than the grid")
        if not np.allclose(z[kl], x[0], atol=1e-9 * h):
            raise ValueError("sample lattice is not aligned with the grid")
    K = len(z)
    targets = kl + refine * np.arange(len(x))
    spline = interpolate.PchipInterpolator(z, fz)
    coef = spline.c[::-1]  # coef[m, k]: coefficient of (z - z_k)^m on segment k
    gauss_vals = [spline(z[:-1] + h * xi) for xi in _GL_NODES]
    values = np.empty(grid.shape)
    values[:, 0] = fz[targets]
    d = np.arange(-(K - 1), K).astype(float)  # offset k - i of segment start k from target i
    sel = K - 1 + targets

    def corr(a: np.ndarray, w: np.ndarray) -> np.ndarray:
        return signal.fftconvolve(a, w[::-1], mode="full")[sel]

    for j, y in enumerate(grid.y_nodes[1:], start=1):
        exact = y < 16 * h
        close = np.abs(d + 0.5) <= near if exact else np.zeros(d.shape, dtype=bool)
        row = np.zeros(len(x))
        for xi, wq, fq in zip(_GL_NODES, _GL_WEIGHTS, gauss_vals):
            t = (d + xi) * h
            kern = h * wq * p * y ** (2 * sigma) * (t * t + y * y) ** (-(0.5 + sigma))
            kern[close] = 0.0
            row += corr(fq, kern)
        if exact:
            idx = np.nonzero(close)[0]
            moments = _near_moments(d[idx], h, y, sigma, p, beta_const)
            for m in range(4):
                w = np.zeros(d.shape)
                w[idx] = moments[m]
                row += corr(coef[m], w)
        left = fz[0] * (_phi(z[0] - x, y, sigma, beta_const) + 0.5 * beta_const)
        right = fz[-1] * (0.5 * beta_const - _phi(z[-1] - x, y, sigma, beta_const))
        values[:, j] = row + left + right
    return Field(grid, values)


def calibrate_extension_constant(sigma: float, grid: Grid) -> float:
    """Fit ``d`` in ``flux = -d (-Delta)^sigma f`` from the extension of a Gaussian.

    Least squares over Gamma nodes with ``|x| <= 1/2``, against the closed-form
    fractional Laplacian of ``exp(-x^2)``.
    """
    u = poisson_extend(lambda z: np.exp(-z * z), sigma, grid)
    x, flux = dtn_flux(u)
    lap = gaussian_frac_laplacian(x, sigma)
    sel = np.abs(x) <= 0.5
    return float(-np.dot(flux[sel], lap[sel]) / np.dot(lap[sel], lap[sel]))


def gaussian_frac_laplacian(x, sigma: float) -> np.ndarray:
    """``(-Delta)^sigma exp(-x^2)`` in one dimension via Kummer's function."""
    x = np.asarray(x, dtype=float)
    c = 4.0**sigma * math.gamma(sigma + 0.5) / math.sqrt(math.pi)
    return c * special.hyp1f1(sigma + 0.5, 0.5, -x * x)
