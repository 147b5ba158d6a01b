"""Singular integrals: Riesz potentials, the direct fractional Laplacian, the
fractional maximal function, and the barrier density psi.

Constants follow the convention that ``(-Delta)^sigma`` has Fourier symbol
``|xi|^(2 sigma)``:

    (-Delta)^sigma f(x) = C_{n,sigma} p.v. int (f(x) - f(z)) / |x - z|^(n + 2 sigma) dz
    I_{2 sigma} f(x)    = c_{n,sigma} int f(z) |x - z|^(2 sigma - n) dz

so that ``(-Delta)^sigma I_{2 sigma} f = f``.  For ``2 sigma > n`` the Riesz
constant is negative and the kernel grows; for ``2 sigma = n`` (n = 1,
sigma = 1/2) the kernel is ``-log|x| / pi``.  Both are returned as the
"growth-normalized" variant and flagged.

Endpoint singularities ``(R - r)^p`` of a profile and the kernel singularity
at ``z = x`` are handled with algebraic-weight quadrature (QUADPACK QAWS)
on segments split at every singular point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate, special

from fracfb.analysis import InsufficientDataError
from fracfb.params import EnergyParams

_QUAD = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


class AnalyticDomainError(ValueError):
    pass


class WindowError(ValueError):
    pass


def frac_laplacian_constant(n: int, sigma: float) -> float:
    """``C_{n,sigma} = 4^sigma Gamma(n/2 + sigma) / (pi^(n/2) |Gamma(-sigma)|)``."""
    return 4.0**sigma * math.gamma(n / 2 + sigma) / (math.pi ** (n / 2) * abs(math.gamma(-sigma)))


def riesz_constant(n: int, sigma: float) -> float:
    """``c_{n,sigma} = Gamma(n/2 - sigma) / (4^sigma pi^(n/2) Gamma(sigma))`` (2 sigma != n)."""
    if abs(n - 2 * sigma) < 1e-14:
        raise AnalyticDomainError("2 sigma = n: the Riesz kernel is logarithmic")
    return math.gamma(n / 2 - sigma) / (4.0**sigma * math.pi ** (n / 2) * math.gamma(sigma))


# -- radial profiles ---------------------------------------------------------------------


@dataclass
class RadialProfile:
    """A radial function on R^n: samples ``(r, value)`` plus, when known, an exact evaluator.

    ``support`` bounds the support (``inf`` if none); near it the function may
    behave like ``(support - r)^exponent`` with ``exponent > -1``, and
    ``smooth_part(r) = f(r) / (support - r)^exponent`` is then bounded.
    """

    r: np.ndarray
    values: np.ndarray
    n: int = 1
    support: float = math.inf
    exponent: float = 0.0
    func: Callable | None = None
    smooth_part: Callable | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.r.ndim != 1 or self.r.shape != self.values.shape:
            raise ValueError("r and values must be matching 1D arrays")
        if self.r.size and (self.r[0] < 0 or np.any(np.diff(self.r) <= 0)):
            raise ValueError("r must be non-negative and strictly increasing")

    def __call__(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        if self.func is not None:
            return self.func(r)
        out = np.interp(r, self.r, self.values, right=0.0)
        return np.where(r > self.support, 0.0, out)

    def save(self, path) -> list[Path]:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        csv = path.with_suffix(".csv")
        with open(csv, "w") as fh:
            fh.write("r,value\n")
            for a, b in zip(self.r, self.values):
                fh.write(f"{a!r},{b!r}\n")
        meta = {"n": self.n, "support": self.support if math.isfinite(self.support) else None,
                "exponent": self.exponent, **self.meta}
        side = path.with_suffix(".json")
        side.write_text(json.dumps(meta, indent=1, sort_keys=True, default=float))
        return [csv, side]


def graded_mesh(R: float, m: int = 400, grading: float = 4.0) -> np.ndarray:
    """``m + 1`` radii on ``[0, R]`` clustering at ``R`` like ``R (1 - (1 - j/m)^grading)``."""
    j = np.arange(m + 1) / m
    return R * (1.0 - (1.0 - j) ** grading)


def psi_barrier(params: EnergyParams, n: int | None = None, m: int = 400) -> RadialProfile:
    """``psi(r) = -(1 - 3 r)^(beta - 2 sigma)`` on ``r < 1/3``, zero beyond."""
    p = params.beta - 2.0 * params.sigma
    if not p > -1.0:
        raise AnalyticDomainError(f"exponent beta - 2 sigma = {p} is not > -1")
    n = params.n if n is None else n
    R = 1.0 / 3.0

    def func(r):
        r = np.abs(np.asarray(r, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -np.power(np.clip(1.0 - 3.0 * r, 0.0, None), p)
        return np.where(r < R, out, 0.0)

    scale = -(3.0**p)
    r = graded_mesh(R, m)[:-1]
    return RadialProfile(r, func(r), n=n, support=R, exponent=p, func=func,
                         smooth_part=lambda r: np.full(np.shape(r), scale),
                         meta={"kind": "psi", "sigma": params.sigma, "gamma": params.gamma})


def indicator_profile(R: float, n: int, m: int = 64) -> RadialProfile:
    r = np.linspace(0, R, m + 1)[:-1]
    func = (lambda s: np.where(np.abs(np.asarray(s, float)) < R, 1.0, 0.0))
    return RadialProfile(r, np.ones_like(r), n=n, support=R, exponent=0.0, func=func,
                         smooth_part=lambda s: np.ones(np.shape(s)), meta={"kind": "indicator"})


def smooth_profile(func: Callable, support: float, n: int = 1, m: int = 200) -> RadialProfile:
    r = np.linspace(0, support, m + 1)
    return RadialProfile(r, func(r), n=n, support=support, func=lambda s: np.where(
        np.abs(np.asarray(s, float)) < support, func(np.abs(np.asarray(s, float))), 0.0),
        smooth_part=None, meta={"kind": "smooth"})


def _sphere_area(n: int) -> float:
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def _segment(fn: Callable, a: float, b: float, alpha: float = 0.0, beta_: float = 0.0) -> float:
    """``int_a^b fn(z) (z - a)^alpha (b - z)^beta_ dz`` by QAWS when any exponent is nonzero."""
    if b <= a:
        return 0.0
    if alpha == 0.0 and beta_ == 0.0:
        return integrate.quad(fn, a, b, **_QUAD)[0]
    return integrate.quad(fn, a, b, weight="alg", wvar=(alpha, beta_), **_QUAD)[0]


def _radial_integral(f: RadialProfile, kernel: Callable, breaks, kernel_exp: dict) -> float:
    """``int_0^R f(s) kernel(s) ds`` for a radial profile: split at ``breaks``; a
    kernel singularity ``|s - b|^e`` at a break ``b`` is given in ``kernel_exp``."""
    R = f.support
    pts = sorted({0.0, R, *[b for b in breaks if 0.0 < b < R]})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        ea = kernel_exp.get(a, 0.0)
        eb = kernel_exp.get(b, 0.0)
        fn_f = f.func
        if b == R and f.exponent != 0.0 and f.smooth_part is not None:
            eb_f = f.exponent

            def fn(s, fn_k=kernel, ea=ea, eb=eb, a=a, b=b):
                val = f.smooth_part(s) * fn_k(s)
                if ea:
                    val /= abs(s - a) ** ea
                if eb:
                    val /= abs(b - s) ** eb
                return val

            total += _segment(fn, a, b, ea, eb + eb_f)
        else:

            def fn(s, fn_k=kernel, ea=ea, eb=eb, a=a, b=b):
                val = fn_f(s) * fn_k(s)
                if ea:
                    val /= abs(s - a) ** ea
                if eb:
                    val /= abs(b - s) ** eb
                return val

            total += _segment(fn, a, b, ea, eb)
    return total


@dataclass
class RieszValue:
    value: float
    flagged: bool
    variant: str


def riesz_potential(f: RadialProfile, sigma: float, x, detail: bool = False):
    """``I_{2 sigma} f`` at the point ``x`` (scalar: its distance from the origin is used).

    n = 1 and n = 3 are supported; ``f`` must have finite support.  With
    ``2 sigma >= n`` the growth-normalized kernel is used (see module notes)
    and the result is flagged; ``detail=True`` returns a :class:`RieszValue`.
    """
    n = f.n
    if n not in (1, 3):
        raise AnalyticDomainError(f"riesz_potential supports n = 1 and n = 3, got n = {n}")
    if not math.isfinite(f.support):
        raise AnalyticDomainError("riesz_potential needs a compactly supported profile")
    if not 0.0 < sigma < 1.0:
        raise AnalyticDomainError(f"sigma must lie in (0, 1), got {sigma}")
    rho = float(np.linalg.norm(np.atleast_1d(x)))
    log_kernel = n == 1 and abs(sigma - 0.5) < 1e-14
    flagged = 2 * sigma >= n
    q = 2.0 * sigma - n  # kernel exponent
    if n == 1:
        if log_kernel:
            c = -1.0 / math.pi
            kern1 = lambda d: np.log(np.abs(d))
            sing = 0.0  # log singularity: integrable, handled adaptively
        else:
            c = riesz_constant(1, sigma)
            kern1 = lambda d: np.abs(d) ** q
            sing = q if q < 0 else 0.0
        # int over z in (-R, R) of f(|z|) k(x - z): fold onto s = |z|
        kernel = lambda s: kern1(rho - s) + kern1(rho + s)
        # only the (rho - s) part is singular at s = rho; isolate it when it is algebraic
        if log_kernel and 0.0 < rho <= f.support:
            part_sing = _split_log(f, rho)
            part_reg = _radial_integral(f, lambda s: kern1(rho + s), [], {})
            val = c * (part_sing + part_reg)
        elif sing and rho == 0.0:
            val = c * 2.0 * _segment_power(f, q)
        elif sing and 0.0 < rho <= f.support:
            part_sing = _split_singular(f, rho, q)
            part_reg = _radial_integral(f, lambda s: kern1(rho + s), [], {})
            val = c * (part_sing + part_reg)
        else:
            breaks = [rho] if 0.0 < rho < f.support else []
            val = c * _radial_integral(f, kernel, breaks, {})
        variant = "log" if log_kernel else ("growth" if flagged else "standard")
    else:
        c = riesz_constant(3, sigma)
        e = 2.0 * sigma - 1.0
        if rho == 0.0:
            val = c * 4.0 * math.pi * _radial_integral(f, lambda s: s**e if e != 0 else 1.0, [], {}) \
                if e >= 0 else c * 4.0 * math.pi * _segment_power(f, e)
        elif abs(e) < 1e-14:
            kern = lambda s: 2.0 * math.pi * s * (np.log(rho + s) - np.log(np.abs(rho - s))) / rho
            val = c * _radial_integral(f, kern, [rho], {})
        else:
            def kern(s):
                return 2.0 * math.pi * s * ((rho + s) ** e - np.abs(rho - s) ** e) / (e * rho)
            if e < 0 and 0.0 < rho < f.support:
                val = c * _split_singular_3d(f, rho, e)
            else:
                val = c * _radial_integral(f, kern, [rho] if rho < f.support else [], {})
        variant = "standard"
    if detail:
        return RieszValue(float(val), bool(flagged), variant)
    return float(val)


def _split_singular(f: RadialProfile, rho: float, q: float) -> float:
    """``int_0^R f(s) |rho - s|^q ds`` with the algebraic singularity at ``s = rho``."""
    R = f.support
    if rho == R and f.exponent != 0.0 and f.smooth_part is not None:
        return _segment(lambda s: f.smooth_part(s), 0.0, R, 0.0, q + f.exponent)
    total = 0.0
    total += _segment(lambda s: f.func(s), 0.0, rho, 0.0, q)
    if f.exponent != 0.0 and f.smooth_part is not None:
        total += _segment(lambda s: f.smooth_part(s), rho, R, q, f.exponent)
    else:
        total += _segment(lambda s: f.func(s), rho, R, q, 0.0)
    return total


def _split_log(f: RadialProfile, rho: float) -> float:
    """``int_0^R f(s) log|rho - s| ds`` with QAWS log weights at ``s = rho``."""
    R = f.support
    p = f.exponent if f.smooth_part is not None else 0.0
    tail = f.smooth_part if p != 0.0 else f.func
    total = integrate.quad(lambda s: f.func(s), 0.0, rho, weight="alg-logb", wvar=(0.0, 0.0), **_QUAD)[0]
    if rho < R:
        total += integrate.quad(lambda s: tail(s), rho, R, weight="alg-loga", wvar=(0.0, p), **_QUAD)[0]
    elif p != 0.0:
        total = integrate.quad(lambda s: tail(s), 0.0, R, weight="alg-logb", wvar=(0.0, p), **_QUAD)[0]
    return total


def _segment_power(f: RadialProfile, e: float) -> float:
    """``int_0^R f(s) s^e ds`` with a possible singular weight at both ends."""
    R = f.support
    if f.exponent != 0.0 and f.smooth_part is not None:
        return _segment(lambda s: f.smooth_part(s), 0.0, R, e, f.exponent)
    return _segment(lambda s: f.func(s), 0.0, R, e, 0.0)


def _split_singular_3d(f: RadialProfile, rho: float, e: float) -> float:
    """n = 3 radial kernel with ``e = 2 sigma - 1 < 0``: the ``|rho - s|^e`` part on its own."""
    R = f.support
    reg = lambda s: 2.0 * math.pi * s * (rho + s) ** e / (e * rho)
    sing = lambda s: -2.0 * math.pi * s / (e * rho)
    total = _radial_integral(f, reg, [rho], {})
    total += _segment(lambda s: f.func(s) * sing(s), 0.0, rho, 0.0, e)
    if f.exponent != 0.0 and f.smooth_part is not None:
        total += _segment(lambda s: f.smooth_part(s) * sing(s), rho, R, e, f.exponent)
    else:
        total += _segment(lambda s: f.func(s) * sing(s), rho, R, e, 0.0)
    return total


def riesz_profile(f: RadialProfile, sigma: float, r) -> RadialProfile:
    r = np.asarray(r, dtype=float)
    vals = np.array([riesz_potential(f, sigma, ri) for ri in r])
    return RadialProfile(r, vals, n=f.n, meta={"kind": "riesz", "sigma": sigma,
                                               "variant_flagged": 2 * sigma >= f.n})


def _moments(f: RadialProfile, kmax: int) -> np.ndarray:
    """Even moments ``int_R f(z) z^k dz`` (n = 1), odd ones vanish."""
    out = np.zeros(kmax + 1)
    for k in range(0, kmax + 1, 2):
        out[k] = 2.0 * _radial_integral(f, lambda s, k=k: s**k, [], {})
    return out


def riesz_interpolant(f: RadialProfile, sigma: float, L: float = 1.0, m: int = 400,
                      terms: int = 40) -> Callable:
    """Fast evaluator ``x -> I_{2 sigma} f(x)`` for n = 1.

    Inside ``|x| <= L`` the potential is tabulated at nodes clustered on both
    sides of the support edge and interpolated by a cubic spline on each side
    of it.  Beyond ``L`` it uses the multipole series of the kernel, which
    converges for ``|x| > support``.
    """
    from scipy.interpolate import CubicSpline

    if f.n != 1:
        raise AnalyticDomainError("riesz_interpolant is for n = 1")
    R = f.support
    if not R < L:
        raise ValueError("L must exceed the support radius")
    j = np.arange(m + 1) / m
    inner = R * (1.0 - (1.0 - j) ** 3)
    outer = R + (L - R) * j**3
    vin = np.array([riesz_potential(f, sigma, x) for x in inner])
    vout = np.array([riesz_potential(f, sigma, x) for x in outer])
    s_in = CubicSpline(np.concatenate([-inner[:0:-1], inner]), np.concatenate([vin[:0:-1], vin]))
    s_out = CubicSpline(outer, vout)
    mom = _moments(f, terms)
    log_kernel = abs(sigma - 0.5) < 1e-14
    c = -1.0 / math.pi if log_kernel else riesz_constant(1, sigma)
    q = 2.0 * sigma - 1.0
    ks = np.arange(2, terms + 1, 2)
    if log_kernel:
        coef = -mom[ks] / ks
    else:
        coef = special.binom(q, ks) * mom[ks]

    def far(x):
        ax = np.abs(x)
        ser = np.sum(coef[None, :] * ax[:, None] ** (-ks[None, :].astype(float)), axis=1)
        if log_kernel:
            return c * (mom[0] * np.log(ax) + ser)
        return c * ax**q * (mom[0] + ser)

    def ev(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x).ravel()
        out = np.empty_like(ax)
        a = ax <= R
        b = (ax > R) & (ax <= L)
        cfar = ax > L
        out[a] = s_in(ax[a])
        out[b] = s_out(ax[b])
        out[cfar] = far(ax[cfar])
        return out.reshape(x.shape)

    return ev


def l1_norm(f: RadialProfile) -> float:
    """``int_{R^n} |f|`` for a radial profile."""
    area = _sphere_area(f.n) if f.n > 1 else 2.0
    weight = (lambda s: np.abs(s) ** (f.n - 1)) if f.n > 1 else (lambda s: 1.0)
    absf = RadialProfile(f.r, np.abs(f.values), f.n, f.support, f.exponent,
                         func=lambda s: np.abs(f(s)),
                         smooth_part=(lambda s: np.abs(f.smooth_part(s))) if f.smooth_part else None)
    return area * _radial_integral(absf, weight, [], {})


def psi_l1_closed_form(params: EnergyParams) -> float:
    """``int_R |psi| = 2 / (3 (p + 1))`` with ``p = beta - 2 sigma`` (n = 1)."""
    p = params.beta - 2.0 * params.sigma
    return 2.0 / (3.0 * (p + 1.0))


# -- direct fractional Laplacian -----------------------------------------------------


def frac_laplacian(f: Callable, sigma: float, x: float, breakpoints=(), delta: float | None = None,
                   T: float = 50.0, tail: str = "quad", tol: float = 1e-9) -> float:
    """``C_{1,sigma} int_0^inf (2 f(x) - f(x+t) - f(x-t)) / t^(1 + 2 sigma) dt`` for n = 1.

    On ``(0, delta)`` the second difference is divided by ``t^2`` and the
    remaining ``t^(1 - 2 sigma)`` is an algebraic quadrature weight (the
    second-order Taylor subtraction).  ``breakpoints`` are points of reduced
    smoothness of ``f``; the distances to them split the outer quadrature.
    Beyond ``T`` the integral is either continued by adaptive quadrature
    (``tail="quad"``) or, for ``tail="zero"`` (data vanishing beyond ``T``
    from ``x``), added in closed form ``2 f(x) T^(-2 sigma) / (2 sigma)``.
    """
    x = float(x)
    fx = float(np.asarray(f(np.array([x])))[0])
    dists = sorted({abs(x - b) for b in breakpoints if abs(x - b) > 0})
    if delta is None:
        delta = 0.1
        if dists:
            delta = min(delta, 0.5 * dists[0])
    C = frac_laplacian_constant(1, sigma)

    def second_diff(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        pts = np.concatenate([x + t, x - t])
        vals = np.asarray(f(pts), dtype=float)
        m = t.size
        return 2.0 * fx - vals[:m] - vals[m:]

    def taylor_ratio(t):
        t = max(t, 1e-6 * delta)  # QAWS may sample the endpoint itself
        return second_diff(t)[0] / (t * t)

    near = integrate.quad(taylor_ratio, 0.0, delta, weight="alg",
                          wvar=(1.0 - 2.0 * sigma, 0.0), epsabs=tol, epsrel=tol, limit=200)[0]
    pts = [delta] + [d for d in dists if delta < d < T] + [T]
    pts = sorted(set(pts))
    mid = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        # integrable endpoint kinks are handled by the adaptive rule
        mid += integrate.quad(lambda t: second_diff(t)[0] / t ** (1.0 + 2.0 * sigma), a, b,
                              epsabs=tol, epsrel=tol, limit=200)[0]
    if tail == "zero":
        far = 2.0 * fx * T ** (-2.0 * sigma) / (2.0 * sigma)
    elif tail == "quad":
        far = integrate.quad(lambda t: second_diff(t)[0] / t ** (1.0 + 2.0 * sigma), T, np.inf,
                             epsabs=tol, epsrel=tol, limit=200)[0]
    else:
        raise ValueError(f"unknown tail mode {tail!r}")
    return C * (near + mid + far)


def spectral_frac_laplacian_gaussian(x: float, sigma: float) -> float:
    """``(1/pi) int_0^inf xi^(2 sigma) sqrt(pi) exp(-xi^2/4) cos(xi x) d xi`` for ``f = exp(-x^2)``."""
    val = integrate.quad(lambda k: k ** (2 * sigma) * math.sqrt(math.pi) * math.exp(-k * k / 4)
                         * math.cos(k * x), 0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    return val / math.pi


# -- fractional maximal function ---------------------------------------------------------


def ball_integral(f: RadialProfile, x: float, r: float) -> float:
    """``int_{B_r(x)} |f|`` for a radial profile, ``x`` a point at distance ``|x|`` from 0."""
    rho = abs(float(x))
    R = f.support
    absf = lambda s: np.abs(f(s))
    abs_smooth = (lambda s: np.abs(f.smooth_part(s))) if f.smooth_part is not None else None
    if f.n == 1:
        total = 0.0
        for lo, hi in ((rho - r, rho + r),):
            # fold onto s = |z|: contributions from z in [lo, hi] on each side of 0
            for sgn in (1.0, -1.0):
                a, b = (lo, hi) if sgn > 0 else (-hi, -lo)
                a, b = max(a, 0.0), min(b, R)
                if b <= a:
                    continue
                if b == R and f.exponent != 0.0 and abs_smooth is not None:
                    total += _segment(abs_smooth, a, b, 0.0, f.exponent)
                else:
                    total += _segment(absf, a, b)
        return total
    if f.n == 3:
        def cap(s):
            s = float(s)
            if rho == 0.0:
                return 4 * math.pi * s * s if s <= r else 0.0
            if s <= r - rho:
                return 4 * math.pi * s * s
            if s >= rho + r or s <= rho - r:
                return 0.0
            return math.pi * s * (r * r - (rho - s) ** 2) / rho
        a = max(0.0, rho - r)
        b = min(R, rho + r)
        if b <= a:
            return 0.0
        brk = sorted({a, b, *[v for v in (r - rho,) if a < v < b]})
        total = 0.0
        for lo, hi in zip(brk[:-1], brk[1:]):
            if hi == R and f.exponent != 0.0 and abs_smooth is not None:
                total += _segment(lambda s: abs_smooth(s) * cap(s), lo, hi, 0.0, f.exponent)
            else:
                total += _segment(lambda s: absf(s) * cap(s), lo, hi)
        return total
    raise AnalyticDomainError(f"ball integrals for n = {f.n} are not supported")


def maximal_radii(r_max: float = 1.0, decades: int = 6, per_decade: int = 64) -> np.ndarray:
    return r_max * np.logspace(-decades, 0, decades * per_decade + 1)


def frac_maximal(f: RadialProfile, alpha: float, points=None, radii=None) -> RadialProfile:
    """``M_alpha f(x) = sup_r r^(alpha - n) int_{B_r(x)} |f|`` over a logarithmic radius mesh.

    The mesh sup is a lower bound of the true sup.  ``points`` default to the
    profile's sample radii; each sample of the result carries its argmax
    radius in ``meta["argmax_r"]``.
    """
    if not 0.0 < alpha <= f.n:
        raise ValueError(f"alpha must lie in (0, n], got {alpha}")
    pts = f.r if points is None else np.asarray(points, dtype=float)
    radii = maximal_radii() if radii is None else np.asarray(radii, dtype=float)
    vals, arg = [], []
    for x in pts:
        best, best_r = 0.0, float(radii[0])
        for r in radii:
            v = r ** (alpha - f.n) * ball_integral(f, x, r)
            if v > best:
                best, best_r = v, float(r)
        vals.append(best)
        arg.append(best_r)
    order = np.argsort(pts)
    return RadialProfile(np.asarray(pts)[order], np.asarray(vals)[order], n=f.n,
                         meta={"kind": "frac_maximal", "alpha": alpha,
                               "argmax_r": list(np.asarray(arg)[order])})


def maximal_at_ring(f: RadialProfile, alpha: float, r0: float, radii=None) -> tuple[float, float, np.ndarray]:
    """``r^(alpha - n) int_{B_r(r0)} |f|`` over the radius mesh: (sup, argmax r, values)."""
    radii = maximal_radii() if radii is None else np.asarray(radii, dtype=float)
    vals = np.array([r ** (alpha - f.n) * ball_integral(f, r0, r) for r in radii])
    k = int(np.argmax(vals))
    return float(vals[k]), float(radii[k]), vals


# -- Hoelder modulus near the ring -------------------------------------------------------


@dataclass
class HolderFit:
    alpha_hat: float
    C_hat: float
    rsq: float
    degenerate: bool = False
    samples: int = 0

    def as_dict(self) -> dict:
        return {"alpha_hat": self.alpha_hat, "C_hat": self.C_hat, "rsq": self.rsq,
                "degenerate": self.degenerate, "samples": self.samples}


def holder_modulus_fit(g, r0: float, g0: float | None = None, min_samples: int = 8) -> HolderFit:
    """Fit ``|g(r) - g(r0)| ~ C (1 - r / r0)^alpha`` from samples below ``r0``.

    ``g`` is a :class:`RadialProfile` or a pair ``(r, values)``.  For
    ``r0 = 1/3`` the variable ``1 - r/r0`` is ``1 - 3 r``.  ``g0`` defaults
    to the sample at ``r0``.
    """
    if isinstance(g, RadialProfile):
        r, v = g.r, g.values
    else:
        r, v = (np.asarray(a, dtype=float) for a in g)
    if g0 is None:
        at = np.flatnonzero(np.isclose(r, r0, rtol=0, atol=1e-14))
        if not at.size:
            raise InsufficientDataError("no sample at r0 and no g0 given")
        g0 = float(v[at[0]])
    below = r < r0
    d = 1.0 - r[below] / r0
    inc = np.abs(v[below] - g0)
    if below.sum() < min_samples:
        raise InsufficientDataError(f"only {int(below.sum())} samples below r0; need {min_samples}")
    ok = inc > 1e-14 * max(1.0, abs(g0))
    if ok.sum() < min_samples:
        return HolderFit(math.nan, math.nan, 0.0, degenerate=True, samples=int(ok.sum()))
    from fracfb.analysis import fit_power_law

    a, c, rsq = fit_power_law(d[ok], inc[ok])
    return HolderFit(a, c, rsq, False, int(ok.sum()))
