"""Closed-form test surfaces sampled onto charts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quaternion as qt
from .calculus import GridChart
from .mcs import SurfaceChart

# orientation of C^2 -> H used by the twistor chart; "left" is h1 + j h2,
# which is complex linear for the right C-structure and makes A vanish
TWISTOR_CONVENTION = "left"


def _cplx(z) -> np.ndarray:
    return qt.from_complex(z)


def _poly(coeffs, z):
    """Evaluate ``sum c_k z^k`` (ascending coefficients)."""
    out = np.zeros_like(z, dtype=complex)
    for c in reversed(list(coeffs)):
        out = out * z + c
    return out


def round_sphere(res: int = 64, half_width: float = 1.0) -> SurfaceChart:
    """Stereographic chart ``g(z) = z`` of a round 2-sphere in S^4."""
    ch = GridChart.padded(res, (-half_width, half_width), (-half_width, half_width))
    return SurfaceChart(ch, _cplx(ch.z()), name="round-sphere")


def unit_sphere(res: int = 64, half_width: float = 0.8) -> SurfaceChart:
    """Unit sphere in Im H via inverse stereographic projection (not a plane)."""
    ch = GridChart.padded(res, (-half_width, half_width), (-half_width, half_width))
    x, y = ch.coords()
    d = 1.0 + x * x + y * y
    g = np.stack([np.zeros_like(x), 2 * x / d, 2 * y / d, (x * x + y * y - 1.0) / d], axis=-1)
    return SurfaceChart(ch, g, name="unit-sphere")


def clifford_torus(res: int = 128) -> SurfaceChart:
    """``g = (e^{iu} + j e^{iv}) / sqrt 2`` on the square torus of period 2 pi."""
    ch = GridChart.torus(res)
    u, v = ch.coords()
    g = (_cplx(np.exp(1j * u)) + qt.qmul(qt.J, _cplx(np.exp(1j * v)))) / math.sqrt(2.0)
    return SurfaceChart(ch, g, name="clifford-torus")


def catenoid_patch(res: int = 128, umax: float = 1.5) -> SurfaceChart:
    """``g = cosh u cos v i + cosh u sin v j + u k`` on ``[-umax, umax] x [0, 2 pi)``."""
    ch = GridChart.padded(res, (-umax, umax), (0.0, 2 * math.pi), periodic_y=True)
    u, v = ch.coords()
    g = np.stack([np.zeros_like(u), np.cosh(u) * np.cos(v), np.cosh(u) * np.sin(v), u], axis=-1)
    return SurfaceChart(ch, g, name="catenoid")


def holo_curve_c2(coeffs=(0.0, 0.0, 1.0), res: int = 64, half_width: float = 0.5) -> SurfaceChart:
    """Complex curve ``g(z) = z + j p(z)`` in C^2 = H (a minimal surface in R^4)."""
    ch = GridChart.padded(res, (-half_width, half_width), (-half_width, half_width))
    z = ch.z()
    g = _cplx(z) + qt.qmul(qt.J, _cplx(_poly(coeffs, z)))
    return SurfaceChart(ch, g, name="holo-curve")


def _c2_to_h(z1, z2, convention: str) -> np.ndarray:
    if convention == "left":
        return _cplx(z1) + qt.qmul(qt.J, _cplx(z2))
    if convention == "right":
        return _cplx(z1) + qt.qmul(_cplx(z2), qt.J)
    raise ValueError(f"unknown twistor convention {convention!r}")


DEFAULT_TWISTOR = ((1.0,), (0.0, 1.0), (0.0, 0.0, 1.0), (0.0, 0.0, 0.0, 1.0))


def twistor_projection(
    h_coeffs=DEFAULT_TWISTOR,
    res: int = 64,
    center: complex = 1.0,
    half_width: float = 0.25,
    convention: str | None = None,
) -> SurfaceChart:
    """Twistor projection of the curve ``(h1, h2, h3, h4)`` in CP^3.

    The line ``(h1 + j h2, h3 + j h4) H`` is read in the affine chart
    ``g = (h1 + j h2)(h3 + j h4)^-1``; the default curve is ``(1, z, z^2, z^3)``
    on a square around ``z = 1`` (the chart avoids ``z = 0`` where the second
    component vanishes).
    """
    convention = convention or TWISTOR_CONVENTION
    c = complex(center)
    ch = GridChart.padded(res, (c.real - half_width, c.real + half_width), (c.imag - half_width, c.imag + half_width))
    z = ch.z()
    h = [_poly(cf, z) for cf in h_coeffs]
    a = _c2_to_h(h[0], h[1], convention)
    b = _c2_to_h(h[2], h[3], convention)
    g = qt.qmul(a, qt.qinv(b, eps=1e-12))
    return SurfaceChart(ch, g, name="twistor-cubic")


def torus_of_revolution(res: int = 128, a: float = math.sqrt(2.0), b: float = 1.0, name: str = "torus-of-revolution") -> SurfaceChart:
    """Torus of revolution in Im H with radii ``a > b``, conformally parametrised.

    With ``dw = b dv / (a + b cos v)`` the metric is ``(a + b cos v)^2 (du^2 +
    dw^2)``; ``w`` has period ``2 pi b / sqrt(a^2 - b^2)``.  Willmore exactly
    for ``a / b = sqrt 2``.
    """
    if not a > b > 0:
        raise ValueError(f"need a > b > 0, got a={a}, b={b}")
    c = math.sqrt(a * a - b * b)
    ch = GridChart.torus(res, 2 * math.pi, 2 * math.pi * b / c)
    u, w = ch.coords()
    v = 2.0 * np.arctan2(math.sqrt(a + b) * np.sin(0.5 * c * w / b), math.sqrt(a - b) * np.cos(0.5 * c * w / b))
    r = a + b * np.cos(v)
    g = np.stack([np.zeros_like(u), r * np.cos(u), r * np.sin(u), b * np.sin(v)], axis=-1)
    return SurfaceChart(ch, g, name=name)


def nonwillmore_control(res: int = 64, a: float = 2.0, b: float = 1.0) -> SurfaceChart:
    """Conformal torus of revolution with ``a / b != sqrt 2``: closed, conformal, not Willmore."""
    if math.isclose(a / b, math.sqrt(2.0)):
        raise ValueError("a / b = sqrt 2 is the Willmore torus, not a control")
    return torus_of_revolution(res, a, b, name="nonwillmore-control")


GENERATORS = {
    "round-sphere": round_sphere,
    "unit-sphere": unit_sphere,
    "clifford-torus": clifford_torus,
    "catenoid": catenoid_patch,
    "holo-curve": holo_curve_c2,
    "twistor-cubic": twistor_projection,
    "nonwillmore-control": nonwillmore_control,
    "torus-of-revolution": torus_of_revolution,
}


@dataclass(frozen=True)
class SurfaceSpec:
    """A named gallery surface plus generator parameters; ``build`` is deterministic."""

    name: str
    res: int = 64
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in GENERATORS:
            raise ValueError(f"unknown surface {self.name!r}; choose from {sorted(GENERATORS)}")
        if int(self.res) < 8:
            raise ValueError(f"res must be at least 8, got {self.res}")

    def build(self) -> SurfaceChart:
        return GENERATORS[self.name](res=int(self.res), **self.params)
