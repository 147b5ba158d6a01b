"""Tensor grids on the half box / half ball graded toward {y = 0}, and fields on them.

Node values are stored with the x axes first and y last, so for ``n = 1`` a
field has shape ``(nx, ny)`` and ``values[i, j]`` sits at ``(x_i, y_j)``.
The weight ``y^a`` is never evaluated at a node: every weight is an exact
integral of ``y^a`` (x fluxes) or of ``y^-a`` (y fluxes) over a y interval.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator


class GridConfigError(ValueError):
    pass


class DomainCoverageError(ValueError):
    """Sample points fall outside the grid the field lives on."""


class EmptyRegionWarning(UserWarning):
    pass


def default_grading(a: float) -> float:
    """y-grading exponent 2 / min(1, 2 sigma), capped at 4."""
    sigma = (1.0 - a) / 2.0
    return min(4.0, 2.0 / min(1.0, 2.0 * sigma))


def weight_integral(y1, y2, a: float):
    """Exact ``int_{y1}^{y2} y^a dy`` for a > -1."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    return (y2 ** (a + 1.0) - y1 ** (a + 1.0)) / (a + 1.0)


def face_weight(y1, y2, a: float):
    """Mean of ``y^a`` over ``[y1, y2]``."""
    return weight_integral(y1, y2, a) / (np.asarray(y2, float) - np.asarray(y1, float))


@dataclass(frozen=True)
class GridConfig:
    a: float = 0.0
    n: int = 1
    nx: int = 65
    ny: int = 33
    halfwidth: float = 1.0
    height: float = 1.0
    grading: float | None = None
    shape: str = "box"

    def validate(self) -> None:
        if not -1.0 < self.a < 1.0:
            raise GridConfigError(f"weight exponent a must lie in (-1, 1), got {self.a}")
        if self.n not in (1, 2):
            raise GridConfigError(f"only n = 1 or n = 2 supported, got {self.n}")
        if self.nx < 8 or self.ny < 8:
            raise GridConfigError(f"need at least 8 nodes per axis, got nx={self.nx}, ny={self.ny}")
        if self.halfwidth <= 0 or self.height <= 0:
            raise GridConfigError("halfwidth and height must be positive")
        if self.grading is not None and self.grading < 1.0:
            raise GridConfigError(f"grading exponent must be >= 1, got {self.grading}")
        if self.shape not in ("box", "half_ball"):
            raise GridConfigError(f"unknown domain shape {self.shape!r}")


class Grid:
    """Tensor-product grid on ``[-L, L]^n x [0, H]`` (or the half ball of radius L)."""

    def __init__(
        self,
        x_nodes: Sequence[np.ndarray],
        y_nodes: np.ndarray,
        a: float,
        grading: float,
        shape: str = "box",
    ):
        self.x_nodes = tuple(np.asarray(x, dtype=float) for x in x_nodes)
        self.y_nodes = np.asarray(y_nodes, dtype=float)
        self.a = float(a)
        self.grading = float(grading)
        self.domain_shape = shape
        for x in self.x_nodes:
            if np.any(np.diff(x) <= 0):
                raise GridConfigError("x nodes must be strictly increasing")
        if self.y_nodes[0] != 0.0 or np.any(np.diff(self.y_nodes) <= 0):
            raise GridConfigError("y nodes must start at 0 and increase strictly")
        if shape == "half_ball":
            self.radius = float(self.y_nodes[-1])
        else:
            self.radius = None

    # -- geometry -----------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.x_nodes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(x) for x in self.x_nodes) + (len(self.y_nodes),)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def height(self) -> float:
        return float(self.y_nodes[-1])

    @property
    def x_bounds(self) -> tuple[tuple[float, float], ...]:
        return tuple((float(x[0]), float(x[-1])) for x in self.x_nodes)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.x_nodes, self.y_nodes, indexing="ij"))

    @cached_property
    def radius_from_origin(self) -> np.ndarray:
        return np.sqrt(sum(c**2 for c in self.coords))

    @cached_property
    def y_dual(self) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper ends of the dual y interval of each y node."""
        y = self.y_nodes
        mid = 0.5 * (y[1:] + y[:-1])
        lo = np.concatenate([[0.0], mid])
        hi = np.concatenate([mid, [y[-1]]])
        return lo, hi

    @cached_property
    def x_dual(self) -> tuple[np.ndarray, ...]:
        out = []
        for x in self.x_nodes:
            mid = 0.5 * (x[1:] + x[:-1])
            lo = np.concatenate([[x[0]], mid])
            hi = np.concatenate([mid, [x[-1]]])
            out.append(hi - lo)
        return tuple(out)

    @cached_property
    def y_dual_weight(self) -> np.ndarray:
        """``int y^a`` over the dual interval of each y node."""
        lo, hi = self.y_dual
        return weight_integral(lo, hi, self.a)

    @cached_property
    def face_weights(self) -> np.ndarray:
        """Mean of ``y^a`` across the y extent of the x-flux face of each y node."""
        lo, hi = self.y_dual
        return self.y_dual_weight / (hi - lo)

    @cached_property
    def y_resistance(self) -> np.ndarray:
        """``int_{y_j}^{y_j+1} y^-a dy``: the 1D resistance of each y edge."""
        y = self.y_nodes
        return weight_integral(y[:-1], y[1:], -self.a)

    @cached_property
    def s_nodes(self) -> np.ndarray:
        """The flux variable ``s = y^(2 sigma) / (2 sigma) = y^(1-a) / (1-a)`` at y nodes."""
        return self.y_nodes ** (1.0 - self.a) / (1.0 - self.a)

    # -- node classes ---------------------------------------------------------------

    @cached_property
    def gamma_mask(self) -> np.ndarray:
        """Nodes on Gamma: y = 0 and strictly inside the domain."""
        m = np.zeros(self.shape, dtype=bool)
        on_gamma = self.coords[-1] == 0.0
        if self.domain_shape == "half_ball":
            m = on_gamma & (self.radius_from_origin < self.radius * (1 - 1e-12))
        else:
            m = on_gamma.copy()
            for k in range(self.n):
                xk = self.coords[k]
                lo, hi = self.x_bounds[k]
                m &= (xk > lo) & (xk < hi)
        return m

    @cached_property
    def interior_mask(self) -> np.ndarray:
        y = self.coords[-1]
        if self.domain_shape == "half_ball":
            return (y > 0) & (self.radius_from_origin < self.radius * (1 - 1e-12))
        m = (y > 0) & (y < self.height)
        for k in range(self.n):
            xk = self.coords[k]
            lo, hi = self.x_bounds[k]
            m &= (xk > lo) & (xk < hi)
        return m

    @cached_property
    def outer_mask(self) -> np.ndarray:
        """Dirichlet nodes: everything not interior and not on Gamma."""
        return ~(self.interior_mask | self.gamma_mask)

    @cached_property
    def gamma_index(self) -> tuple:
        """Index tuple selecting the full y = 0 slice."""
        return (slice(None),) * self.n + (0,)

    @cached_property
    def gamma_weights(self) -> np.ndarray:
        """Quadrature weight (dual x measure) of every node of the y = 0 slice."""
        w = self.x_dual[0]
        for d in self.x_dual[1:]:
            w = np.multiply.outer(w, d)
        return w

    # -- operators --------------------------------------------------------------------

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """Symmetric matrix of the discrete energy ``sum_e T_e (u_p - u_q)^2``.

        ``(A u)_p`` is the net weighted flux out of the dual cell of node p;
        at a Gamma node it equals ``-w_p * lim y^a du/dy``.
        """
        mats_x = [_stiffness_1d(1.0 / np.diff(x)) for x in self.x_nodes]
        diag_x = [sp.diags(d) for d in self.x_dual]
        k_y = _stiffness_1d(1.0 / self.y_resistance)
        d_y = sp.diags(self.y_dual_weight)
        terms = []
        for k in range(self.n):
            factors = [mats_x[k] if m == k else diag_x[m] for m in range(self.n)] + [d_y]
            terms.append(_kron_all(factors))
        terms.append(_kron_all(list(diag_x) + [k_y]))
        return sum(terms[1:], terms[0]).tocsr()

    @cached_property
    def cell_weights(self) -> np.ndarray:
        """``int y^a`` over each primal cell; shape = shape - 1 per axis."""
        w = np.diff(self.x_nodes[0])
        for x in self.x_nodes[1:]:
            w = np.multiply.outer(w, np.diff(x))
        wy = weight_integral(self.y_nodes[:-1], self.y_nodes[1:], self.a)
        return np.multiply.outer(w, wy)

    @cached_property
    def cell_centers(self) -> tuple[np.ndarray, ...]:
        mids = [0.5 * (x[1:] + x[:-1]) for x in self.x_nodes]
        mids.append(0.5 * (self.y_nodes[1:] + self.y_nodes[:-1]))
        return tuple(np.meshgrid(*mids, indexing="ij"))

    def metadata(self) -> dict:
        return {
            "n": self.n,
            "a": self.a,
            "grading": self.grading,
            "domain": self.domain_shape,
            "x_nodes": [x.tolist() for x in self.x_nodes],
            "y_nodes": self.y_nodes.tolist(),
        }

    @classmethod
    def from_metadata(cls, meta: dict) -> "Grid":
        return cls(
            [np.array(x) for x in meta["x_nodes"]],
            np.array(meta["y_nodes"]),
            meta["a"],
            meta["grading"],
            meta.get("domain", "box"),
        )

    def same_as(self, other: "Grid") -> bool:
        return (
            self.a == other.a
            and self.domain_shape == other.domain_shape
            and self.shape == other.shape
            and all(np.array_equal(p, q) for p, q in zip(self.x_nodes, other.x_nodes))
            and np.array_equal(self.y_nodes, other.y_nodes)
        )


def _stiffness_1d(cond: np.ndarray) -> sp.csr_matrix:
    m = len(cond) + 1
    diag = np.zeros(m)
    diag[:-1] += cond
    diag[1:] += cond
    return sp.diags([-cond, diag, -cond], [-1, 0, 1], shape=(m, m), format="csr")


def _kron_all(factors):
    out = factors[0]
    for f in factors[1:]:
        out = sp.kron(out, f, format="csr")
    return out


def build_grid(config: GridConfig) -> Grid:
    config.validate()
    g = default_grading(config.a) if config.grading is None else float(config.grading)
    x = np.linspace(-config.halfwidth, config.halfwidth, config.nx)
    if config.shape == "half_ball":
        height = config.halfwidth
    else:
        height = config.height
    j = np.arange(config.ny)
    y = height * (j / (config.ny - 1)) ** g
    y[0] = 0.0
    return Grid([x] * config.n, y, config.a, g, config.shape)


class Field:
    """Node values on a grid."""

    def __init__(self, grid: Grid, values, nonnegative: bool = False):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if nonnegative and np.any(values < 0):
            raise ValueError("nonnegative field has negative entries")
        self.grid = grid
        self.values = values
        self.nonnegative = nonnegative

    @classmethod
    def from_function(cls, grid: Grid, func: Callable, **kw) -> "Field":
        return cls(grid, np.broadcast_to(func(*grid.coords), grid.shape).astype(float), **kw)

    @property
    def mask(self) -> np.ndarray:
        """0 = interior, 1 = Gamma, 2 = outer Dirichlet boundary."""
        m = np.full(self.grid.shape, 2, dtype=np.int8)
        m[self.grid.interior_mask] = 0
        m[self.grid.gamma_mask] = 1
        return m

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.nonnegative)

    @cached_property
    def _interpolator(self):
        return RegularGridInterpolator(
            self.grid.x_nodes + (self.grid.y_nodes,),
            self.values,
            method="linear",
            bounds_error=False,
            fill_value=np.nan,
        )

    def evaluate(self, points) -> np.ndarray:
        """Multilinear interpolation at ``points`` of shape (..., n + 1).

        Raises :class:`DomainCoverageError` if any point lies outside the grid box.
        """
        pts = np.asarray(points, dtype=float)
        out = self._interpolator(pts)
        bad = ~np.isfinite(out)
        if np.any(bad):
            raise DomainCoverageError(_describe_uncovered(pts[bad]))
        return out


def _describe_uncovered(pts: np.ndarray) -> str:
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    box = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in zip(lo, hi))
    return f"{len(pts)} sample points outside the grid; uncovered region within {box}"


def trace(u: Field) -> tuple[np.ndarray, np.ndarray]:
    """Positions and values of ``u`` on the y = 0 slice, in x order.

    For n = 1 the positions are a 1D array; for n = 2 an array of shape
    (nx1, nx2, 2).
    """
    g = u.grid
    vals = u.values[g.gamma_index]
    if g.n == 1:
        return g.x_nodes[0], vals
    pos = np.stack(np.meshgrid(*g.x_nodes, indexing="ij"), axis=-1)
    return pos, vals


def weighted_integral(u: Field, region: Callable | None = None) -> float:
    """``sum_cells avg(u) * int_cell y^a``, optionally restricted to cells whose centre satisfies ``region``."""
    g = u.grid
    v = u.values
    avg = np.zeros(g.cell_weights.shape)
    corners = 0
    for offs in np.ndindex(*(2,) * (g.n + 1)):
        sl = tuple(slice(o, o + s - 1) for o, s in zip(offs, g.shape))
        avg += v[sl]
        corners += 1
    avg /= corners
    w = g.cell_weights
    if region is not None:
        keep = np.asarray(region(*g.cell_centers), dtype=bool)
        if not np.any(keep):
            warnings.warn("empty integration region", EmptyRegionWarning, stacklevel=2)
            return 0.0
        return float(np.sum(avg[keep] * w[keep]))
    return float(np.sum(avg * w))


# -- serialization ---------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x)) if np.isfinite(x) else "nan"


def save_field(u: Field, path, extra: dict | None = None) -> list[Path]:
    """Write ``<path>.csv`` (``x,y,value`` columns) and a ``<path>.json`` grid sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    csv_path = path.with_suffix(".csv")
    json_path = path.with_suffix(".json")
    g = u.grid
    names = ["x"] if g.n == 1 else [f"x{k + 1}" for k in range(g.n)]
    cols = [c.ravel() for c in g.coords] + [u.values.ravel()]
    with open(csv_path, "w") as fh:
        fh.write(",".join(names + ["y", "value"]) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    meta = g.metadata()
    meta["nonnegative"] = u.nonnegative
    if extra:
        meta["extra"] = extra
    json_path.write_text(json.dumps(meta, indent=1, sort_keys=True))
    return [csv_path, json_path]


def load_field(path) -> Field:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    grid = Grid.from_metadata(meta)
    data = np.loadtxt(path.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    return Field(grid, data[:, -1].reshape(grid.shape), meta.get("nonnegative", False))
