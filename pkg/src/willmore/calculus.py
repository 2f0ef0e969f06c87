"""Discrete exterior calculus on structured conformal coordinate charts.

Fields are numpy arrays with leading grid axes ``(nx, ny)`` followed by the
value block (``()`` for reals, ``(4,)`` quaternions, ``(2, 4)`` vectors,
``(2, 2, 4)`` endomorphisms).  A one-form is stored by its values on the
coordinate fields, ``omega(d/dx)`` and ``omega(d/dy)``.

Differentiation is node-centred: second-order central differences in the
interior and across periodic seams, second-order one-sided stencils on open
edges.  Reported maxima skip ``margin`` nodes along each open edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import quaternion as qt


@dataclass(frozen=True)
class GridChart:
    """A rectangular conformal coordinate patch ``z = x + i y``.

    ``kind`` is ``"torus"`` (periodic in both axes) or ``"disk"``; a disk
    chart may still be periodic along one axis (a cylinder patch).
    """

    kind: str
    nx: int
    ny: int
    hx: float
    hy: float
    x0: float = 0.0
    y0: float = 0.0
    periodic: tuple = (False, False)
    margin: int = 1

    def __post_init__(self):
        if self.kind not in ("torus", "disk"):
            raise ValueError(f"unknown chart kind {self.kind!r}")
        if self.nx < 8 or self.ny < 8:
            raise ValueError("charts need at least 8 nodes per axis")
        if not (self.hx > 0 and self.hy > 0):
            raise ValueError("grid spacings must be positive")
        if self.kind == "torus":
            object.__setattr__(self, "periodic", (True, True))
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))

    @classmethod
    def torus(cls, n: int, period_x: float = 2 * math.pi, period_y: float | None = None, ny: int | None = None):
        ny = n if ny is None else ny
        period_y = period_x if period_y is None else period_y
        return cls("torus", n, ny, period_x / n, period_y / ny, margin=0)

    @classmethod
    def disk(cls, n: int, x_range, y_range, margin: int = 1, ny: int | None = None, periodic_y: bool = False):
        """Chart with nodes on ``[x_range]`` x ``[y_range]`` (endpoints included).

        A periodic axis excludes its upper endpoint.
        """
        ny = n if ny is None else ny
        hx = (x_range[1] - x_range[0]) / (n - 1)
        hy = (y_range[1] - y_range[0]) / (ny if periodic_y else ny - 1)
        return cls("disk", n, ny, hx, hy, x_range[0], y_range[0], (False, periodic_y), margin)

    @classmethod
    def padded(cls, n: int, x_range, y_range, pad: int | None = None, periodic_y: bool = False):
        """Disk chart whose nominal domain keeps ``n`` nodes per open axis and
        is surrounded by ``pad`` extra nodes (excluded from norms and quadrature).

        Residual maxima are then taken over a fixed physical region, so their
        refinement ratios are not biased by the excluded band shrinking.
        """
        pad = max(10, n // 8) if pad is None else pad
        hx = (x_range[1] - x_range[0]) / (n - 1)
        if periodic_y:
            hy = (y_range[1] - y_range[0]) / n
            ny, y0 = n, y_range[0]
        else:
            hy = (y_range[1] - y_range[0]) / (n - 1)
            ny, y0 = n + 2 * pad, y_range[0] - pad * hy
        return cls("disk", n + 2 * pad, ny, hx, hy, x_range[0] - pad * hx, y0, (False, periodic_y), pad)

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def closed(self) -> bool:
        return all(self.periodic)

    def coords(self):
        x = self.x0 + self.hx * np.arange(self.nx)
        y = self.y0 + self.hy * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="ij")

    def z(self) -> np.ndarray:
        x, y = self.coords()
        return x + 1j * y

    def with_margin(self, margin: int) -> "GridChart":
        return GridChart(self.kind, self.nx, self.ny, self.hx, self.hy, self.x0, self.y0, self.periodic, margin)

    def interior(self, extra: int = 0):
        """Index slices of the nodes that enter reported norms."""
        out = []
        for n, per in ((self.nx, self.periodic[0]), (self.ny, self.periodic[1])):
            m = 0 if per else self.margin + extra
            out.append(slice(m, n - m))
        return tuple(out)

    def interior_mask(self, extra: int = 0) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.interior(extra)] = True
        return mask


class OneForm(NamedTuple):
    """Values of a one-form on ``d/dx`` and ``d/dy``."""

    x: np.ndarray
    y: np.ndarray

    def __add__(self, other):
        return OneForm(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return OneForm(self.x - other.x, self.y - other.y)

    def __neg__(self):
        return OneForm(-self.x, -self.y)

    def scale(self, c) -> "OneForm":
        return OneForm(c * self.x, c * self.y)

    def map(self, fn: Callable) -> "OneForm":
        return OneForm(fn(self.x), fn(self.y))

    def left(self, fn: Callable, a) -> "OneForm":
        """``fn(a, omega)`` componentwise, e.g. ``S * omega`` with ``fn=mat_mul``."""
        return OneForm(fn(a, self.x), fn(a, self.y))

    def right(self, fn: Callable, a) -> "OneForm":
        return OneForm(fn(self.x, a), fn(self.y, a))


# --------------------------------------------------------------------------
# stencils


def _diff_axis(f: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * h)
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def d_dx(chart: GridChart, f) -> np.ndarray:
    return _diff_axis(np.asarray(f, dtype=float), chart.hx, 0, chart.periodic[0])


def d_dy(chart: GridChart, f) -> np.ndarray:
    return _diff_axis(np.asarray(f, dtype=float), chart.hy, 1, chart.periodic[1])


def differential(chart: GridChart, f) -> OneForm:
    return OneForm(d_dx(chart, f), d_dy(chart, f))


def star(omega: OneForm) -> OneForm:
    """Complex structure on one-forms: ``(*omega)(X) = omega(J X)``, ``J d/dx = d/dy``."""
    return OneForm(omega.y, -omega.x)


def _product_for(a: np.ndarray) -> Callable:
    tail = a.shape[-3:]
    if a.ndim >= 5 and tail == (2, 2, 4):
        return qt.mat_mul
    if a.ndim >= 3 and a.shape[-1] == 4:
        return qt.qmul
    return np.multiply


def wedge(alpha: OneForm, beta: OneForm, product: Callable | None = None) -> np.ndarray:
    """``dx ^ dy`` coefficient of ``alpha ^ beta``: ``a_x b_y - a_y b_x``.

    The product of values defaults to composition of endomorphisms, the
    quaternion product, or real multiplication according to the value shape.
    """
    mul = product or _product_for(np.asarray(alpha.x))
    return mul(alpha.x, beta.y) - mul(alpha.y, beta.x)


def exterior_d(chart: GridChart, omega: OneForm) -> np.ndarray:
    """``d omega = (d_x omega_y - d_y omega_x) dx ^ dy``."""
    return d_dx(chart, omega.y) - d_dy(chart, omega.x)


def connection_curvature(chart: GridChart, omega: OneForm) -> np.ndarray:
    """Curvature ``d omega + omega ^ omega`` of the connection ``d + omega``."""
    return exterior_d(chart, omega) + wedge(omega, omega, qt.mat_mul)


# --------------------------------------------------------------------------
# quadrature and integration of closed forms


def _weights_1d(n: int, periodic: bool, margin: int) -> np.ndarray:
    w = np.ones(n)
    if periodic:
        return w
    w[:margin] = 0.0
    w[n - margin:] = 0.0
    w[margin] = 0.5
    w[n - margin - 1] = 0.5
    return w


def quadrature_weights(chart: GridChart) -> np.ndarray:
    """Node weights: plain sums on periodic axes, trapezoid over the interior box otherwise."""
    wx = _weights_1d(chart.nx, chart.periodic[0], chart.margin) * chart.hx
    wy = _weights_1d(chart.ny, chart.periodic[1], chart.margin) * chart.hy
    return np.outer(wx, wy)


def integrate(chart: GridChart, rho) -> float:
    """Quadrature of a real density against ``dx dy``.

    Uses ``math.fsum`` so the result does not depend on summation order.
    """
    rho = np.asarray(rho, dtype=float)
    return math.fsum((rho * quadrature_weights(chart)).ravel().tolist())


@dataclass
class PathIntegral:
    values: np.ndarray
    closedness_defect: float
    periods: list = field(default_factory=list)


def path_integrate(chart: GridChart, omega: OneForm, base=(0, 0)) -> PathIntegral:
    """Integrate a (nearly) closed quaternion-valued form along a comb.

    The comb runs along the row ``y = y[base]`` and then up each column.
    Each edge uses the trapezoid rule.  ``closedness_defect`` is the largest
    cell circulation divided by the cell area (comparable to ``|d omega|``),
    taken over interior cells.  On periodic axes ``periods`` holds the
    integrals around the closed lattice loops through ``base``.
    """
    ox = np.asarray(omega.x, dtype=float)
    oy = np.asarray(omega.y, dtype=float)
    nx, ny = chart.shape
    i0, j0 = base
    hx, hy = chart.hx, chart.hy

    # edge integrals along x between (i, j) and (i+1, j); along y between (i, j) and (i, j+1)
    ex = 0.5 * hx * (ox + np.roll(ox, -1, axis=0))
    ey = 0.5 * hy * (oy + np.roll(oy, -1, axis=1))

    vals = np.zeros_like(ox)
    row = np.zeros((nx,) + ox.shape[2:])
    fwd = np.cumsum(ex[i0:nx - 1, j0], axis=0)
    row[i0 + 1:] = fwd
    if i0 > 0:
        back = np.cumsum(ex[i0 - 1::-1, j0], axis=0)
        row[i0 - 1::-1] = -back
    vals[:, j0] = row
    if j0 < ny - 1:
        vals[:, j0 + 1:] = row[:, None] + np.cumsum(ey[:, j0:ny - 1], axis=1)
    if j0 > 0:
        vals[:, j0 - 1::-1] = row[:, None] - np.cumsum(ey[:, j0 - 1::-1], axis=1)

    circ = ex + np.roll(ey, -1, axis=0) - np.roll(ex, -1, axis=1) - ey
    cell = np.ones((nx, ny), dtype=bool)
    if not chart.periodic[0]:
        cell[nx - 1, :] = False
    if not chart.periodic[1]:
        cell[:, ny - 1] = False
    cell &= chart.interior_mask()
    mag = np.sqrt(np.sum(circ.reshape(nx, ny, -1) ** 2, axis=-1)) / (hx * hy)
    defect = float(mag[cell].max()) if cell.any() else 0.0

    periods = []
    if chart.periodic[0]:
        periods.append(ex[:, j0].sum(axis=0))
    if chart.periodic[1]:
        periods.append(ey[i0, :].sum(axis=0))
    return PathIntegral(vals, defect, periods)


# --------------------------------------------------------------------------
# norms


def magnitude(f) -> np.ndarray:
    """Pointwise root-sum-square over the value block of a field."""
    f = np.asarray(f, dtype=float)
    if f.ndim <= 2:
        return np.abs(f)
    return np.sqrt(np.sum(f.reshape(f.shape[:2] + (-1,)) ** 2, axis=-1))


def form_magnitude(omega: OneForm) -> np.ndarray:
    return np.sqrt(magnitude(omega.x) ** 2 + magnitude(omega.y) ** 2)


def max_norm(chart: GridChart, f, extra: int = 0, mask=None) -> float:
    """Maximum pointwise magnitude over interior nodes (optionally restricted by ``mask``)."""
    m = magnitude(f)
    keep = chart.interior_mask(extra)
    if mask is not None:
        keep &= mask
    if not keep.any():
        return 0.0
    return float(m[keep].max())
