"""Mean curvature sphere congruence, Hopf fields and Willmore energy of a
conformal map ``g: M -> H`` (the affine chart of ``f = (g, 1) H`` in HP^1).

Frame conventions: ``psi = (g, 1)``, ``e = (1, 0)`` and ``alpha`` reads the
second component.  The left and right normals satisfy ``*dg = N dg = -dg R``
and the congruence is determined by ``S psi = -psi R``, ``S e = e N - psi H``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage

from . import quaternion as qt
from .calculus import (
    GridChart,
    OneForm,
    connection_curvature,
    d_dx,
    d_dy,
    differential,
    exterior_d,
    form_magnitude,
    integrate,
    magnitude,
    star,
    wedge,
)


class ChartDegenerateError(ValueError):
    """Too many branch (or constant) nodes to read normals off the chart."""


class DegreeWarning(UserWarning):
    pass


def _unit_imaginary(q: np.ndarray) -> np.ndarray:
    # nearest square root of -1: the normalised imaginary part
    im = np.array(q, dtype=float)
    im[..., 0] = 0.0
    n = qt.qabs(im)
    return im / np.where(n > 0, n, 1.0)[..., None]


def _fill_nearest(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    if not mask.any():
        return values
    _, (ix, iy) = ndimage.distance_transform_edt(mask, return_indices=True)
    return values[ix, iy]


@dataclass(eq=False)
class SurfaceChart:
    """Samples of a conformal map on a chart, with lazily cached sphere data.

    ``moebius`` records the normalisation used for the affine read-out: the
    sampled lines are ``moebius @ L`` where ``L`` is the surface in the
    coordinates of the original problem.  Endomorphism fields computed on this
    chart are carried back with :meth:`transport`.
    """

    chart: GridChart
    g: np.ndarray
    name: str = ""
    moebius: np.ndarray = field(default_factory=qt.identity)
    eps_branch: float = 1e-6

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        if self.g.shape != self.chart.shape + (4,):
            raise ValueError(f"g has shape {self.g.shape}, chart expects {self.chart.shape + (4,)}")
        if not np.all(np.isfinite(self.g)):
            raise ValueError("g contains non-finite samples")

    # -- frame -------------------------------------------------------------
    @cached_property
    def psi(self) -> np.ndarray:
        return qt.hvec(self.g, np.broadcast_to(qt.ONE, self.g.shape))

    @cached_property
    def dg(self) -> OneForm:
        return differential(self.chart, self.g)

    @cached_property
    def _normals(self):
        return normals(self)

    @property
    def N(self):
        return self._normals[0]

    @property
    def R(self):
        return self._normals[1]

    @property
    def branch_mask(self):
        return self._normals[2]

    @cached_property
    def _mean(self):
        return _mean_curvature(self)

    @property
    def H(self):
        return self._mean[0]

    @cached_property
    def S(self) -> np.ndarray:
        return sphere_congruence(self)

    @cached_property
    def hopf(self) -> "HopfData":
        return hopf_fields(self.chart, self.S)

    @property
    def A(self) -> OneForm:
        return self.hopf.A

    @property
    def Q(self) -> OneForm:
        return self.hopf.Q

    @cached_property
    def valid_mask(self) -> np.ndarray:
        """Interior nodes away from (a one-node halo of) the branch mask."""
        halo = ndimage.binary_dilation(self.branch_mask, iterations=1) if self.branch_mask.any() else self.branch_mask
        return self.chart.interior_mask() & ~halo

    def transport(self, b: np.ndarray) -> np.ndarray:
        """Carry an endomorphism field from chart coordinates back: ``M^-1 B M``."""
        if np.allclose(self.moebius, qt.identity()):
            return b
        m = self.moebius
        return qt.mat_mul(qt.mat_mul(qt.mat_inv(m), b), m)

    def transport_form(self, omega: OneForm) -> OneForm:
        return omega.map(self.transport)

    def lines(self) -> np.ndarray:
        """Unit representatives of ``L`` in the original coordinates."""
        v = self.psi
        if not np.allclose(self.moebius, qt.identity()):
            v = qt.mat_vec(qt.mat_inv(self.moebius), v)
        return qt.normalize_lines(v)

    def norm(self, f, extra: int = 0) -> float:
        """Max magnitude of a field over the valid (interior, unbranched) nodes."""
        keep = self.valid_mask & self.chart.interior_mask(extra)
        m = magnitude(f)
        return float(m[keep].max()) if keep.any() else 0.0

    def form_norm(self, omega: OneForm, extra: int = 0) -> float:
        keep = self.valid_mask & self.chart.interior_mask(extra)
        m = form_magnitude(omega)
        return float(m[keep].max()) if keep.any() else 0.0


@dataclass
class HopfData:
    """Type decomposition ``1/2 S dS = A + Q`` and the complex connection form."""

    A: OneForm
    Q: OneForm
    dS: OneForm

    @property
    def nablahat_form(self) -> OneForm:
        # d = nablahat + A + Q, so nablahat = d - (A + Q)
        return -(self.A + self.Q)


# --------------------------------------------------------------------------
# normals, mean curvature, congruence


def normals(s: SurfaceChart, max_masked: float = 0.2):
    """Left/right normals ``N = g_y g_x^-1`` and ``R = -g_x^-1 g_y``.

    Both are projected to the nearest unit imaginary quaternion, so ``N^2 =
    R^2 = -1`` holds exactly and non-conformality shows up in
    :func:`conformality_residual`.  Nodes with ``|g_x|`` below ``eps_branch``
    times the median are masked and filled from the nearest unmasked node.
    """
    gx, gy = s.dg
    mag = qt.qabs(gx)
    scale = float(np.median(mag))
    mask = mag <= s.eps_branch * max(scale, 1e-300)
    if scale == 0.0 or mask.mean() > max_masked:
        raise ChartDegenerateError(f"{mask.mean():.0%} of nodes are branch/degenerate (limit {max_masked:.0%})")
    safe = np.where(mask[..., None], qt.ONE, gx)
    gxi = qt.qinv_unchecked(safe)
    n = _unit_imaginary(qt.qmul(gy, gxi))
    r = _unit_imaginary(-qt.qmul(gxi, gy))
    return _fill_nearest(n, mask), _fill_nearest(r, mask), mask


def conformality_residual(s: SurfaceChart) -> float:
    """Departure from ``*dg = N dg = -dg R`` relative to ``|g_x| + |g_y|``."""
    gx, gy = s.dg
    denom = qt.qabs(gx) + qt.qabs(gy)
    denom = np.where(denom > 0, denom, 1.0)
    res = np.maximum.reduce(
        [
            qt.qabs(gy - qt.qmul(s.N, gx)),
            qt.qabs(gx + qt.qmul(s.N, gy)),
            qt.qabs(gy + qt.qmul(gx, s.R)),
            qt.qabs(gx - qt.qmul(gy, s.R)),
        ]
    ) / denom
    return s.norm(res)


def _mean_curvature(s: SurfaceChart):
    ch = s.chart
    gx, gy = s.dg
    n = s.N
    nx, ny = d_dx(ch, n), d_dy(ch, n)
    safe = np.where(s.branch_mask[..., None], qt.ONE, gx)
    raw = 0.5 * qt.qmul(qt.qinv_unchecked(safe), nx - qt.qmul(n, ny))
    raw = _fill_nearest(raw, s.branch_mask)
    # keep the component compatible with S^2 = -1, i.e. R H = H N
    h = 0.5 * (raw - qt.qmul(qt.qmul(s.R, raw), n))
    y_res = qt.qabs(2.0 * qt.qmul(gy, h) - (ny + qt.qmul(n, nx)))
    rel_res = qt.qabs(qt.qmul(s.R, raw) - qt.qmul(raw, n))
    return h, y_res, rel_res


def mean_curvature(s: SurfaceChart) -> np.ndarray:
    """Quaternionic mean curvature from the d/dx evaluation of ``2 dg H = dN - N *dN``."""
    return s.H


def mean_curvature_residuals(s: SurfaceChart) -> dict:
    """Discretisation residuals of the mean curvature extraction.

    ``dy_consistency`` is ``|2 g_y H - (N_y + N N_x)|``; ``frame_relation`` is
    ``|R H - H N|`` before ``H`` is projected onto that relation.
    ``literal_RH_NR`` is ``|R H - N R|`` read verbatim; it is reported, not
    expected to vanish.
    """
    _, y_res, rel_res = s._mean
    literal = qt.qmul(s.R, s.H) - qt.qmul(s.N, s.R)
    return {"dy_consistency": s.norm(y_res), "frame_relation": s.norm(rel_res), "literal_RH_NR": s.norm(literal)}


def sphere_congruence(s: SurfaceChart) -> np.ndarray:
    """``S`` on the standard basis: columns ``(N - gH, -H)`` and ``(-gR - Ng + gHg, -R + Hg)``."""
    g, n, r, h = s.g, s.N, s.R, s.H
    gh = qt.qmul(g, h)
    return qt.hmat(
        n - gh,
        -qt.qmul(g, r) - qt.qmul(n, g) + qt.qmul(gh, g),
        -h,
        -r + qt.qmul(h, g),
    )


def hopf_fields(chart: GridChart, S: np.ndarray) -> HopfData:
    """``A = (S dS + *dS)/4`` and ``Q = (S dS - *dS)/4``."""
    ds = differential(chart, S)
    sds = ds.left(qt.mat_mul, S)
    sd = star(ds)
    return HopfData(A=(sds + sd).scale(0.25), Q=(sds - sd).scale(0.25), dS=ds)


# --------------------------------------------------------------------------
# residuals


def _form_vec(omega: OneForm, v) -> OneForm:
    return OneForm(qt.mat_vec(omega.x, v), qt.mat_vec(omega.y, v))


def _distance_from_line(w: np.ndarray, line: np.ndarray) -> np.ndarray:
    """``|w - u <u, w>|`` for the unit representative ``u`` of ``line``."""
    u = qt.normalize_lines(line)
    proj = qt.vec_scale(u, qt.hermitian(u, w))
    return qt.vec_norm(w - proj)


def structure_residuals(s: SurfaceChart, hd: HopfData | None = None) -> dict:
    """Max residuals of the congruence and type conditions.

    Keys: ``S2`` (``S^2 + 1``), ``extraction`` (``1/2 S dS - A - Q``),
    ``dS_split`` (``dS - 2*(Q - A)``), ``ker_Q`` (``|Q psi|`` on unit
    ``psi``), ``im_A`` (distance of ``A`` images from ``L``), and the four type
    conditions.
    """
    hd = hd or s.hopf
    S, A, Q = s.S, hd.A, hd.Q
    one = qt.identity(s.chart.shape)
    mm = qt.mat_mul
    sa, sq = star(A), star(Q)
    u = qt.normalize_lines(s.psi)
    qpsi = _form_vec(Q, u)
    # images of A: apply to both basis vectors, measure distance from L
    im_a = np.zeros(s.chart.shape)
    for col in range(2):
        for comp in (A.x, A.y):
            w = comp[..., :, col, :]
            im_a = np.maximum(im_a, _distance_from_line(w, s.psi))
    half_sds = hd.dS.left(mm, S).scale(0.5)
    two_star = star(Q - A).scale(2.0)
    return {
        "S2": s.norm(mm(S, S) + one),
        "extraction": s.form_norm(half_sds - (A + Q)),
        "dS_split": s.form_norm(hd.dS - two_star),
        "ker_Q": s.form_norm(qpsi),
        "im_A": s.norm(im_a),
        "starA_SA": s.form_norm(sa - A.left(mm, S)),
        "starA_minus_AS": s.form_norm(sa + A.right(mm, S)),
        "starQ_minus_SQ": s.form_norm(sq + Q.left(mm, S)),
        "starQ_QS": s.form_norm(sq - Q.right(mm, S)),
    }


def graded_commutator(omega: OneForm, a: OneForm) -> np.ndarray:
    """``[omega ^ a] = omega ^ a + a ^ omega`` for endomorphism valued forms."""
    return wedge(omega, a, qt.mat_mul) + wedge(a, omega, qt.mat_mul)


def harmonicity_residual(chart: GridChart, hd: HopfData, s: SurfaceChart | None = None) -> dict:
    """Max norms of ``d*A``, ``d*Q`` and ``d^nablahat A``.

    With a surface given, ``relative`` is ``max(d*A, d*Q)`` over the squared
    :func:`curvature_scale`, comparable across surfaces and charts.
    """
    dsa = exterior_d(chart, star(hd.A))
    dsq = exterior_d(chart, star(hd.Q))
    dna = exterior_d(chart, hd.A) + graded_commutator(hd.nablahat_form, hd.A)
    if s is not None:
        nrm, fnrm = s.norm, s.form_norm
    else:
        from .calculus import max_norm

        nrm = lambda f: max_norm(chart, f)  # noqa: E731
        fnrm = lambda w: float(form_magnitude(w)[chart.interior()].max())  # noqa: E731
    out = {"dstarA": nrm(dsa), "dstarQ": nrm(dsq), "dnablaA": nrm(dna)}
    if s is not None:
        k = curvature_scale(s)
        out["relative"] = max(out["dstarA"], out["dstarQ"]) / k**2 if k > 0 else 0.0
    return out


def curvature_scale(s: SurfaceChart) -> float:
    """``max(|dN|, |dR|)``: an inverse length attached to the surface.

    Hopf fields scale like it and their exterior derivatives like its square,
    so thresholds divided by it are independent of the chart's units.  It is
    0 exactly for planes.
    """
    return max(s.form_norm(differential(s.chart, s.N)), s.form_norm(differential(s.chart, s.R)))


def trace_form(b: np.ndarray) -> np.ndarray:
    """``<B> = Re(B_11 + B_22)``."""
    return b[..., 0, 0, 0] + b[..., 1, 1, 0]


def energy_density(omega: OneForm) -> np.ndarray:
    """``<omega ^ *omega>`` as a ``dx dy`` density; equals ``-<omega_x^2 + omega_y^2>``."""
    return trace_form(wedge(omega, star(omega), qt.mat_mul))


def willmore_energy(chart: GridChart, hd: HopfData) -> float:
    """``W = 2 int <A ^ *A>`` (chart-restricted on open charts)."""
    return 2.0 * integrate(chart, energy_density(hd.A))


def backward_energy(chart: GridChart, hd: HopfData) -> float:
    """``2 int <Q ^ *Q>``, the energy of the backward transform."""
    return 2.0 * integrate(chart, energy_density(hd.Q))


@dataclass
class DegreeResult:
    deg: float
    rounded: int | None
    defect: float
    chart_restricted: bool


def degree(chart: GridChart, S: np.ndarray, hd: HopfData, warn_at: float = 0.05) -> DegreeResult:
    """``deg(V, S) = (1/2pi) int <S R>`` with ``R`` the curvature of ``d - (A + Q)``.

    Only closed (torus) charts yield an integer; elsewhere the number is
    returned without rounding and flagged as chart-restricted.
    """
    curv = connection_curvature(chart, hd.nablahat_form)
    val = integrate(chart, trace_form(qt.mat_mul(S, curv))) / (2.0 * math.pi)
    if not chart.closed:
        return DegreeResult(val, None, float("nan"), True)
    r = int(round(val))
    defect = abs(val - r)
    if defect > warn_at:
        warnings.warn(f"degree {val:.4f} is {defect:.3f} from an integer", DegreeWarning, stacklevel=2)
    return DegreeResult(val, r, defect, False)


def normal_identity_check(s: SurfaceChart, hd: HopfData | None = None) -> float:
    """Residual of ``dR + R *dR = 4 <alpha, *A psi>``."""
    hd = hd or s.hopf
    r = s.R
    dr = differential(s.chart, r)
    sdr = star(dr)
    lhs = dr + OneForm(qt.qmul(r, sdr.x), qt.qmul(r, sdr.y))
    sa = star(hd.A)
    rhs = OneForm(qt.mat_vec(sa.x, s.psi)[..., 1, :], qt.mat_vec(sa.y, s.psi)[..., 1, :]).scale(4.0)
    return s.form_norm(lhs - rhs)


def frame_relation_residual(s: SurfaceChart) -> float:
    """``|R H - H N|`` of the unprojected mean curvature."""
    return mean_curvature_residuals(s)["frame_relation"]


def analyze(s: SurfaceChart) -> dict:
    """All scalar diagnostics of a surface in one dictionary."""
    hd = s.hopf
    out = {
        "conformality": conformality_residual(s),
        "structure": structure_residuals(s, hd),
        "harmonicity": harmonicity_residual(s.chart, hd, s),
        "normal_identity": normal_identity_check(s, hd),
        "mean_curvature": mean_curvature_residuals(s),
        "W": willmore_energy(s.chart, hd),
        "W_backward": backward_energy(s.chart, hd),
        "A_norm": s.form_norm(hd.A),
        "Q_norm": s.form_norm(hd.Q),
        "H_max": s.norm(s.H),
        "branch_fraction": float(s.branch_mask.mean()),
    }
    if s.chart.closed:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegreeWarning)
            d = degree(s.chart, s.S, hd)
        out["degree"] = {"value": d.deg, "rounded": d.rounded, "defect": d.defect}
    return out
