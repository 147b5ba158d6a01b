"""The scaling ``w(X) = lambda^-beta u(lambda X)`` and how the energy transforms under it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fracfb.energy import eval_energy
from fracfb.grid import Field, weight_integral
from fracfb.params import EnergyParams, ParameterDomainError


def rescale_field(u: Field, lam: float, beta: float, center=None) -> Field:
    """``v(X) = lam^-beta u(c + lam (X - c))`` on the grid of ``u``.

    ``center`` is a point of Gamma (its x coordinates; default the origin).
    Off-node values come from the grid interpolation rule; mapped points
    outside the domain raise :class:`fracfb.grid.DomainCoverageError`.
    """
    lam = float(lam)
    if not lam > 0:
        raise ParameterDomainError(f"lambda must be positive, got {lam!r}")
    g = u.grid
    c = np.zeros(g.n) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    if c.shape != (g.n,):
        raise ValueError(f"center must have {g.n} coordinates")
    coords = [axis.ravel() for axis in g.coords]
    pts = [c[k] + lam * (coords[k] - c[k]) for k in range(g.n)] + [lam * coords[-1]]
    pts = np.stack(pts, axis=-1)
    if lam == 1.0:
        vals = u.values.ravel().copy()
    else:
        vals = u.evaluate(pts)
    return Field(g, lam ** (-beta) * vals.reshape(g.shape))


def _clip_len(lo, hi, a, b):
    return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)


def restricted_energy(u: Field, params: EnergyParams, lam: float, center=None) -> tuple[float, float]:
    """Dirichlet and penalty parts of the energy of ``u`` over the sub-box ``c + lam (Omega - c)``.

    Each edge's share of the discrete Dirichlet energy is split in proportion
    to the weight carried inside the sub-box: ``int y^a`` across the dual
    extent for x edges and ``int y^-a`` along the edge for y edges (the flux
    is constant along a y edge, so its energy density goes like ``y^-a``).
    Box domains with n = 1 only.
    """
    g = u.grid
    if g.n != 1 or g.domain_shape != "box":
        raise NotImplementedError("restricted_energy supports the n = 1 box")
    x, y, a = g.x_nodes[0], g.y_nodes, g.a
    c = 0.0 if center is None else float(np.atleast_1d(center)[0])
    (x0, x1), = g.x_bounds
    xa, xb = c + lam * (x0 - c), c + lam * (x1 - c)
    ytop = lam * g.height
    v = u.values
    # x edges: (i, j) -- (i+1, j); energy (dv)^2 / dx * Dy_j
    dx = np.diff(x)
    fx = _clip_len(x[:-1], x[1:], xa, xb) / dx
    ylo, yhi = g.y_dual
    dy_in = weight_integral(np.minimum(ylo, ytop), np.minimum(yhi, ytop), a)
    ex = (np.diff(v, axis=0) ** 2 / dx[:, None]) * dy_in[None, :] * fx[:, None]
    # y edges: (i, j) -- (i, j+1); energy Dx_i (dv)^2 / R_j
    xlo = np.concatenate([[x[0]], 0.5 * (x[1:] + x[:-1])])
    xhi = np.concatenate([0.5 * (x[1:] + x[:-1]), [x[-1]]])
    dx_in = _clip_len(xlo, xhi, xa, xb)
    R = g.y_resistance
    r_in = weight_integral(y[:-1], np.clip(y[1:], None, ytop).clip(min=y[:-1]), -a)
    ey = dx_in[:, None] * np.diff(v, axis=1) ** 2 * (r_in / R**2)[None, :]
    dirichlet = 0.5 * float(np.sum(ex) + np.sum(ey))
    tr = np.maximum(v[:, 0], 0.0)
    penalty = float(np.sum(dx_in * tr**params.gamma))
    return dirichlet, penalty


@dataclass
class ScalingCheck:
    dirichlet_factor: float
    penalty_factor: float
    predicted: tuple
    exponents: tuple
    paper_predicted: tuple

    def as_dict(self) -> dict:
        return {
            "dirichlet_factor": self.dirichlet_factor,
            "penalty_factor": self.penalty_factor,
            "predicted": list(self.predicted),
            "exponents": list(self.exponents),
            "paper_predicted": list(self.paper_predicted),
        }


def energy_scaling_check(u: Field, lam: float, params: EnergyParams, center=None) -> ScalingCheck:
    """Energy parts of the rescaled field over Omega against those of ``u`` over ``lam Omega``.

    ``predicted`` uses the exact change-of-variables exponents
    (:meth:`EnergyParams.jacobian_exponents`); ``paper_predicted`` uses
    :meth:`EnergyParams.energy_exponents`, which differ by one power of lambda.
    """
    lam = float(lam)
    if not 0.0 < lam <= 1.0:
        raise ParameterDomainError(f"lambda must lie in (0, 1], got {lam!r}")
    v = rescale_field(u, lam, params.beta, center)
    ev = eval_energy(v, params)
    du, pu = restricted_energy(u, params, lam, center)
    dfac = ev.dirichlet / du if du > 0 else float("nan")
    pfac = ev.penalty / pu if pu > 0 else float("nan")
    ex = params.jacobian_exponents()
    px = params.energy_exponents()
    return ScalingCheck(dfac, pfac, (lam ** ex[0], lam ** ex[1]), ex, (lam ** px[0], lam ** px[1]))
