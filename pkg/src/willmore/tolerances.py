"""Resolution-aware tolerances.

Each discretisation error in the library behaves like ``C h^2``.  The
constants ``C`` below were measured once on the gallery surfaces at
16..128 nodes (see ``tests/test_tolerances.py``) and are stored in
nominal-node units: with ``n`` nodes across the nominal chart the threshold is
``safety * C * scale / n^2``, where ``scale`` is the surface's curvature scale
raised to the power matching the quantity.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .calculus import GridChart

TABLE_VERSION = "1"

# measured maxima over the gallery, in units of curvature_scale^p / n^2
CALIBRATED = {
    # |A| or |Q| of a vanishing Hopf field; the transform of the twistor cubic
    # (38) dominates the gallery inputs (3.3)
    "hopf_zero": 40.0,
    # max(|d*A|, |d*Q|) of a Willmore surface (unit sphere: 2.07; the conformal
    # a = 2 torus, which is not Willmore, sits at 49 (n = 16) to 1430 (n = 128))
    "harmonicity": 2.1,
    # chordal diameter of a constant transform (Moebius image of the catenoid: 1.6e1 at n = 32)
    "constant_line": 16.0,
}

# below this everything is round-off
ROUNDOFF = 1e-9
EPS = 2.220446049250313e-16


def roundoff_floor(n: int, derivatives: int = 0) -> float:
    """Round-off level of a quantity built from ``derivatives`` chained differences on ``n`` nodes.

    Each difference quotient divides by ``h ~ 1/n``, so round-off in the
    samples grows like ``eps * n^derivatives``.  Transformed surfaces are
    re-derived from samples (4 differences from ``g`` to ``d*A``), which is why
    exact identities on them sit above the fixed ``ROUNDOFF``.
    """
    return max(ROUNDOFF, EPS * float(n) ** derivatives)


def nominal_resolution(chart: GridChart) -> int:
    """Nodes across the nominal domain along the coarser axis (margins excluded)."""
    counts = []
    for n, per in ((chart.nx, chart.periodic[0]), (chart.ny, chart.periodic[1])):
        counts.append(n if per else n - 2 * chart.margin)
    return min(counts)


@dataclass(frozen=True)
class Tolerances:
    """Threshold factory; ``scale`` multiplies every gate (``--tol-scale``)."""

    scale: float = 1.0
    safety: float = 10.0
    constants: dict = field(default_factory=lambda: dict(CALIBRATED))
    constant_floor: float = 1e-3

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"tol-scale must be positive, got {self.scale}")
        unknown = set(self.constants) - set(CALIBRATED)
        if unknown:
            raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")

    def _factor(self, key: str, chart: GridChart, safety: float | None = None) -> float:
        n = nominal_resolution(chart)
        safety = self.safety if safety is None else safety
        return self.scale * safety * self.constants[key] / n**2

    def hopf_zero(self, chart: GridChart, kappa: float) -> float:
        """A Hopf field with max norm below this is treated as zero."""
        # non-vanishing fields sit at >= 360 in these units from n = 32 on
        return max(ROUNDOFF, self._factor("hopf_zero", chart, safety=3.0) * kappa)

    def harmonicity(self, chart: GridChart, kappa: float) -> float:
        """Gate on ``max(|d*A|, |d*Q|)`` for Willmore inputs."""
        return max(ROUNDOFF, self._factor("harmonicity", chart) * kappa**2)

    def constant_diameter(self, chart: GridChart) -> float:
        """Chordal diameter below which a transform counts as a constant map."""
        # genuine transforms have O(1) diameter, so a small safety factor suffices
        return max(self.constant_floor * self.scale, self._factor("constant_line", chart, safety=2.0))

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["version"] = TABLE_VERSION
        return out
