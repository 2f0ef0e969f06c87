"""Backlund transforms of a Willmore surface.

* :func:`one_step` integrates ``dg# = <alpha, *A e>``;
* :func:`backlund_forward` / :func:`backlund_backward` read ``ker A`` and
  ``im Q`` as line fields and re-sample them as new surfaces;
* :func:`dual_surface` and :func:`moebius_apply` implement point-point
  duality and Moebius maps of HP^1.

Every returned surface lives on the parameter chart of its input, so forms of
``f`` and of its transforms can be compared node by node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import quaternion as qt
from .calculus import OneForm, differential, form_magnitude, path_integrate, star
from .mcs import SurfaceChart, curvature_scale, harmonicity_residual, normals
from .tolerances import Tolerances

CHART_MARGIN = 0.05
MAX_CHART_ATTEMPTS = 16


class TransformError(RuntimeError):
    pass


class HopfFieldVanishes(TransformError):
    """The Hopf field is identically zero: the sequence stops (twistor case)."""

    def __init__(self, which: str, norm: float):
        super().__init__(f"Hopf field {which} vanishes (max norm {norm:.3g})")
        self.which = which
        self.norm = norm


class NotClosedError(TransformError):
    pass


class FrameCollisionError(TransformError):
    pass


class NoAffineChartError(TransformError):
    pass


class BetaSingularError(TransformError):
    pass


@dataclass(frozen=True)
class AffineFrame:
    """Point at infinity ``e H`` and the normalising Moebius map.

    ``moebius`` sends ``e`` to ``(1, 0)``; ``alpha`` then reads the second
    component.
    """

    moebius: np.ndarray = None

    def __post_init__(self):
        if self.moebius is None:
            object.__setattr__(self, "moebius", qt.identity())

    @property
    def e(self) -> np.ndarray:
        return qt.mat_vec(qt.mat_inv(self.moebius), qt.hvec(qt.ONE, qt.ZERO))

    @classmethod
    def at(cls, e) -> "AffineFrame":
        """Frame with infinity at ``e H`` (completed by the orthogonal line)."""
        e = qt.normalize_lines(np.asarray(e, dtype=float))
        w = qt.annihilator(e)
        b = qt.hmat(e[..., 0, :], w[..., 0, :], e[..., 1, :], w[..., 1, :])
        return cls(qt.mat_inv(b))


@dataclass
class LineField:
    """Unit representatives of a line sub-bundle plus per-node confidence.

    ``confidence`` is the second-to-first pivot ratio of the rank-one
    extraction (0 for an exact rank-one block).  ``holes`` marks nodes that
    were filled from their nearest resolved neighbour.
    """

    lines: np.ndarray
    confidence: np.ndarray
    holes: np.ndarray

    def continuity(self, chart) -> float:
        """Largest chordal distance between adjacent nodes."""
        v = self.lines
        dists = []
        for axis in (0, 1):
            nxt = np.roll(v, -1, axis=axis)
            d = qt.chordal_distance(v, nxt)
            if not chart.periodic[axis]:
                d = np.delete(d, -1, axis=axis)
            dists.append(float(d.max()))
        return max(dists)

    def diameter(self, mask=None) -> float:
        """Chordal diameter proxy: max distance to the central line."""
        v = self.lines
        c = v[v.shape[0] // 2, v.shape[1] // 2]
        d = qt.chordal_distance(v, c)
        if mask is not None:
            d = d[mask]
        return float(d.max())


# --------------------------------------------------------------------------
# line fields


def _gram(omega: OneForm, which: str) -> np.ndarray:
    # B B* sums for images, B* B sums for kernels; both x and y parts enter
    if which == "image":
        return qt.mat_mul(omega.x, qt.adjoint(omega.x)) + qt.mat_mul(omega.y, qt.adjoint(omega.y))
    return qt.mat_mul(qt.adjoint(omega.x), omega.x) + qt.mat_mul(qt.adjoint(omega.y), omega.y)


def _line_field(omega: OneForm, which: str, eps_zero: float, eps_global: float) -> LineField:
    mag = form_magnitude(omega)
    peak = float(mag.max())
    if peak <= eps_global:
        raise HopfFieldVanishes("A" if which == "kernel" else "Q", peak)
    lo, v_lo, hi, v_hi = qt.hermitian_eigenlines(_gram(omega, which))
    lines = v_lo if which == "kernel" else v_hi
    ratio = np.sqrt(np.clip(lo, 0.0, None) / np.where(hi > 0, hi, 1.0))
    holes = mag < eps_zero * peak
    if holes.any():
        if holes.all():
            raise HopfFieldVanishes("A" if which == "kernel" else "Q", peak)
        _, (ix, iy) = ndimage.distance_transform_edt(holes, return_indices=True)
        lines = lines[ix, iy]
    return LineField(lines, ratio, holes)


def kernel_line_field(A: OneForm, eps_zero: float = 1e-5, eps_global: float = 1e-12) -> LineField:
    """``ker A`` node by node; zeros are filled from the nearest resolved node.

    The line is the low eigenline of ``A_x* A_x + A_y* A_y``, which equals the
    common kernel for an exact rank-one form and varies smoothly with ``A``.
    """
    return _line_field(A, "kernel", eps_zero, eps_global)


def image_line_field(Q: OneForm, eps_zero: float = 1e-5, eps_global: float = 1e-12) -> LineField:
    """Image of ``Q`` node by node (mirror of :func:`kernel_line_field`)."""
    return _line_field(Q, "image", eps_zero, eps_global)


# --------------------------------------------------------------------------
# affine charts


_INF = qt.hvec(qt.ONE, qt.ZERO)


def _candidate_charts(seed: int):
    yield qt.identity()
    yield qt.hmat(qt.ZERO, qt.ONE, qt.ONE, qt.ZERO)
    rng = np.random.default_rng(seed)
    while True:
        m = rng.normal(size=(2, 2, 4))
        if abs(np.linalg.det(qt_to_complex(m))) > 1e-3:
            yield m


def qt_to_complex(b: np.ndarray) -> np.ndarray:
    """Complex 4x4 matrix of a quaternionic 2x2 block (q = z1 + z2 j)."""
    b = np.asarray(b, dtype=float)
    out = np.zeros(b.shape[:-3] + (4, 4), dtype=complex)
    for i in range(2):
        for k in range(2):
            q = b[..., i, k, :]
            z1 = q[..., 0] + 1j * q[..., 1]
            z2 = q[..., 2] + 1j * q[..., 3]
            out[..., 2 * i, 2 * k] = z1
            out[..., 2 * i, 2 * k + 1] = -z2
            out[..., 2 * i + 1, 2 * k] = np.conj(z2)
            out[..., 2 * i + 1, 2 * k + 1] = np.conj(z1)
    return out


def affine_surface(chart, lines: np.ndarray, name: str = "", margin: float = CHART_MARGIN, seed: int = 0) -> SurfaceChart:
    """Sample a line field as a surface, choosing a chart with infinity off the image.

    ``lines`` are representatives in the original coordinates.  Candidates
    are the identity, the coordinate swap and then seeded random Moebius
    normalisations; the first one keeping every line at chordal distance at
    least ``margin`` from infinity wins.
    """
    keep = chart.interior_mask()
    for attempt, m in enumerate(_candidate_charts(seed)):
        if attempt >= MAX_CHART_ATTEMPTS:
            break
        v = qt.normalize_lines(qt.mat_vec(m, lines))
        dist = qt.chordal_distance(v, _INF)
        if dist[keep].min() < margin or dist.min() < 1e-6:
            continue
        g = qt.qmul(v[..., 0, :], qt.qinv_unchecked(v[..., 1, :]))
        return SurfaceChart(chart, g, name=name, moebius=m)
    raise NoAffineChartError(f"no affine chart with margin {margin} after {MAX_CHART_ATTEMPTS} attempts")


@dataclass
class TransformResult:
    """A Backlund transform: its line field and, unless constant, the resampled surface."""

    lines: LineField
    surface: SurfaceChart | None
    constant: bool
    diameter: float


def _transform(s: SurfaceChart, which: str, eps_zero, eps_global, constant_diameter, seed, tol):
    tol = tol or Tolerances()
    if eps_global is None:
        eps_global = tol.hopf_zero(s.chart, curvature_scale(s))
    if constant_diameter is None:
        constant_diameter = tol.constant_diameter(s.chart)
    hd = s.hopf
    form, label = (hd.A, "A") if which == "forward" else (hd.Q, "Q")
    # the zero test reads the nominal domain only: padding carries edge stencils
    interior = s.form_norm(form)
    if interior <= eps_global:
        raise HopfFieldVanishes(label, interior)
    if which == "forward":
        lf = kernel_line_field(hd.A, eps_zero, eps_global)
    else:
        lf = image_line_field(hd.Q, eps_zero, eps_global)
    lines = lf.lines
    if not np.allclose(s.moebius, qt.identity()):
        lines = qt.normalize_lines(qt.mat_vec(qt.mat_inv(s.moebius), lines))
    lf = LineField(lines, lf.confidence, lf.holes)
    diam = lf.diameter(s.valid_mask)
    if diam < constant_diameter:
        return TransformResult(lf, None, True, diam)
    suffix = "~" if which == "forward" else "^"
    surf = affine_surface(s.chart, lines, name=f"{s.name}{suffix}", seed=seed)
    return TransformResult(lf, surf, False, diam)


def backlund_forward(s, eps_zero=1e-5, eps_global=None, constant_diameter=None, seed=0, tol=None) -> TransformResult:
    """Forward transform from ``ker A``; raises :class:`HopfFieldVanishes` if ``A = 0``.

    ``eps_global`` (zero test for ``A``) and ``constant_diameter`` default to
    the resolution-aware values of :class:`~willmore.tolerances.Tolerances`.
    """
    return _transform(s, "forward", eps_zero, eps_global, constant_diameter, seed, tol)


def backlund_backward(s, eps_zero=1e-5, eps_global=None, constant_diameter=None, seed=0, tol=None) -> TransformResult:
    """Backward transform from ``im Q``; raises :class:`HopfFieldVanishes` if ``Q = 0``."""
    return _transform(s, "backward", eps_zero, eps_global, constant_diameter, seed, tol)


# --------------------------------------------------------------------------
# Theorem-1 style relations between a surface and its transforms


def hopf_identity_residual(s: SurfaceChart, t: SurfaceChart, which: str) -> float:
    """``|Q~ - A|`` (forward) or ``|A^ - Q|`` (backward) on the shared chart."""
    hd, ht = s.hopf, t.hopf
    if which == "forward":
        diff = t.transport_form(ht.Q) - s.transport_form(hd.A)
    else:
        diff = t.transport_form(ht.A) - s.transport_form(hd.Q)
    keep = s.valid_mask & t.valid_mask
    m = form_magnitude(diff)
    return float(m[keep].max())


def sphere_relation_residual(s: SurfaceChart, t: SurfaceChart, lines: np.ndarray, which: str, full: bool = False) -> float:
    """Residual of ``S~ = -S`` on ``V / L~`` (forward) or ``S^ = -S`` on ``L^`` (backward).

    With ``full=True`` the whole matrix ``S^ + S`` is measured instead.
    """
    total = t.transport(t.S) + s.transport(s.S)
    u = qt.normalize_lines(lines)
    keep = s.valid_mask & t.valid_mask
    if full:
        return float(qt.mat_norm(total)[keep].max())
    if which == "backward":
        return float(qt.vec_norm(qt.mat_vec(total, u))[keep].max())
    res = np.zeros(s.chart.shape)
    for col in range(2):
        w = total[..., :, col, :]
        proj = qt.vec_scale(u, qt.hermitian(u, w))
        res = np.maximum(res, qt.vec_norm(w - proj))
    return float(res[keep].max())


def involution_residual(s: SurfaceChart, t: SurfaceChart, which: str, **kw) -> float:
    """Chordal distance between ``f`` and the opposite transform of ``t``."""
    back = backlund_backward(t, **kw) if which == "forward" else backlund_forward(t, **kw)
    d = qt.chordal_distance(back.lines.lines, s.lines())
    return float(d[s.valid_mask & t.valid_mask].max())


# --------------------------------------------------------------------------
# 1-step transform


@dataclass
class OneStepResult:
    gsharp: SurfaceChart
    closedness_defect: float
    periods: list
    harmonicity: float
    surface: SurfaceChart  # the input read in the frame's affine chart


def _open_multivalued(chart, pi, rel_tol: float = 1e-6):
    """Cut periodic axes along which ``g#`` has a period: it is multivalued there.

    The cut sits at the wrap-around seam (the comb starts at the chart centre);
    the opened axis gets one-sided stencils and the usual excluded margin.
    """
    scale = 1.0 + float(qt.qabs(pi.values).max())
    periodic = list(chart.periodic)
    axes = [a for a in (0, 1) if chart.periodic[a]]
    for axis, per in zip(axes, pi.periods):
        if float(qt.qabs(per)) > rel_tol * scale:
            periodic[axis] = False
    if tuple(periodic) == tuple(chart.periodic):
        return chart
    margin = max(chart.margin, 3)
    return type(chart)("disk", chart.nx, chart.ny, chart.hx, chart.hy, chart.x0, chart.y0, tuple(periodic), margin)


def one_step(s: SurfaceChart, frame: AffineFrame | None = None, margin: float = CHART_MARGIN, defect_factor: float = 10.0) -> OneStepResult:
    """1-step Backlund transform ``g#`` with ``dg# = <alpha, *A e>``, ``g#(base) = 0``.

    The base node is the chart centre.  On torus charts the lattice periods of
    ``dg#`` are returned instead of failing.
    """
    if frame is not None and not np.allclose(frame.moebius, qt.identity()):
        s = renormalize(s, frame.moebius)
    dist = qt.chordal_distance(s.psi, _INF)
    if float(dist[s.chart.interior_mask()].min()) < margin:
        raise FrameCollisionError("infinity is within the chart margin of the surface")
    hd = s.hopf
    sa = star(hd.A)
    omega = OneForm(sa.x[..., 1, 0, :], sa.y[..., 1, 0, :])
    base = (s.chart.nx // 2, s.chart.ny // 2)
    pi = path_integrate(s.chart, omega, base=base)
    harm = harmonicity_residual(s.chart, hd, s)["dstarA"]
    floor = 1e-9 * max(1.0, s.form_norm(hd.A))
    if pi.closedness_defect > defect_factor * max(harm, floor):
        raise NotClosedError(f"closedness defect {pi.closedness_defect:.3g} exceeds {defect_factor} x harmonicity {harm:.3g}")
    chart = _open_multivalued(s.chart, pi)
    gs = SurfaceChart(chart, pi.values, name=f"{s.name}#")
    return OneStepResult(gs, pi.closedness_defect, pi.periods, harm, s)


@dataclass
class SharpData:
    N: np.ndarray
    R: np.ndarray
    H: np.ndarray
    gtilde: np.ndarray


def sharp_sphere_data(s: SurfaceChart, ltilde: LineField | np.ndarray | None = None, margin: float = CHART_MARGIN) -> SharpData:
    """``N# = -R``, ``R# = <beta, S e>`` and ``H# = -2 <beta, psi>``.

    ``beta`` is the covector with ``<beta, e> = 1`` vanishing on ``L~ = ker A``,
    i.e. ``beta = (1, -g~)`` for the affine coordinate ``g~`` of ``L~``.
    """
    if ltilde is None:
        ltilde = kernel_line_field(s.hopf.A)
    v = ltilde.lines if isinstance(ltilde, LineField) else np.asarray(ltilde, dtype=float)
    v = qt.normalize_lines(v)
    if float(qt.chordal_distance(v, _INF)[s.chart.interior_mask()].min()) < margin:
        raise BetaSingularError("ker A comes within the chart margin of infinity; restrict the chart")
    gt = qt.qmul(v[..., 0, :], qt.qinv_unchecked(v[..., 1, :]))
    S = s.S
    r_sharp = S[..., 0, 0, :] - qt.qmul(gt, S[..., 1, 0, :])
    h_sharp = -2.0 * (s.g - gt)
    return SharpData(-s.R, r_sharp, h_sharp, gt)


def sharp_residuals(s: SurfaceChart, res: OneStepResult, sharp: SharpData) -> dict:
    """Cross-checks of the 1-step transform against independently computed data."""
    gs = res.gsharp
    n2, r2, _ = normals(gs)
    keep = s.valid_mask & gs.valid_mask
    m = lambda f: float(qt.qabs(f)[keep].max())  # noqa: E731
    dgs = differential(gs.chart, gs.g)
    dn = differential(gs.chart, sharp.N)
    sdn = star(dn)
    mean = OneForm(
        2.0 * qt.qmul(dgs.x, sharp.H) - (dn.x - qt.qmul(sharp.N, sdn.x)),
        2.0 * qt.qmul(dgs.y, sharp.H) - (dn.y - qt.qmul(sharp.N, sdn.y)),
    )
    sdg = star(dgs)
    right_normal = OneForm(sdg.x + qt.qmul(dgs.x, sharp.R), sdg.y + qt.qmul(dgs.y, sharp.R))
    one = np.broadcast_to(qt.ONE, sharp.N.shape)
    return {
        "N_match": m(n2 - sharp.N),
        "R_match": m(r2 - sharp.R),
        "N_square": m(qt.qmul(sharp.N, sharp.N) + one),
        "R_square": m(qt.qmul(sharp.R, sharp.R) + one),
        "RH_HN": m(qt.qmul(sharp.R, sharp.H) - qt.qmul(sharp.H, sharp.N)),
        "mean_sharp": float(form_magnitude(mean)[keep].max()),
        "right_normal": float(form_magnitude(right_normal)[keep].max()),
    }


# --------------------------------------------------------------------------
# Moebius maps and duality


def renormalize(s: SurfaceChart, m: np.ndarray) -> SurfaceChart:
    """Same surface, read in the affine chart after the normalisation ``m``."""
    v = qt.mat_vec(m, s.psi)
    try:
        g = qt.qmul(v[..., 0, :], qt.qinv(v[..., 1, :], eps=1e-12))
    except qt.ZeroDivisorError:
        raise FrameCollisionError("the new point at infinity lies on the surface") from None
    return SurfaceChart(s.chart, g, name=s.name, moebius=qt.mat_mul(m, s.moebius))


def moebius_apply(G: np.ndarray, s: SurfaceChart, name: str | None = None) -> SurfaceChart:
    """The image surface ``G f``: ``psi -> G psi`` re-read in the affine chart."""
    G = np.asarray(G, dtype=float)
    if abs(np.linalg.det(qt_to_complex(G))) < 1e-14:
        raise ValueError("Moebius matrix is not invertible")
    v = qt.mat_vec(G, s.psi)
    b = v[..., 1, :]
    if float(qt.qabs(b).min()) <= 1e-12 * float(qt.qabs(v[..., 0, :]).max() + 1.0):
        raise FrameCollisionError("the image surface passes through infinity")
    g = qt.qmul(v[..., 0, :], qt.qinv_unchecked(b))
    return SurfaceChart(s.chart, g, name=name or f"G({s.name})")


def inversion_at(point: np.ndarray) -> np.ndarray:
    """A Moebius matrix sending the line ``point H`` to infinity ``(1, 0) H``."""
    return AffineFrame.at(point).moebius


def dual_surface(s: SurfaceChart, seed: int = 0) -> SurfaceChart:
    """The dual surface ``L^perp`` (annihilator under the standard form)."""
    perp = qt.annihilator(s.lines())
    return affine_surface(s.chart, perp, name=f"{s.name}^perp", seed=seed)


def dual_residuals(s: SurfaceChart, d: SurfaceChart) -> dict:
    """Compare the congruence of the dual with ``S*`` and ``ker A^perp`` with ``(im Q)^perp``.

    ``orientation`` is ``+1`` if the dual's own congruence equals ``S*`` and
    ``-1`` if it equals ``-S*``.
    """
    keep = s.valid_mask & d.valid_mask
    sd = d.transport(d.S)
    star_s = qt.adjoint(s.transport(s.S))
    plus = float(qt.mat_norm(sd - star_s)[keep].max())
    minus = float(qt.mat_norm(sd + star_s)[keep].max())
    ker_dual = kernel_line_field(d.transport_form(d.A) if plus <= minus else d.transport_form(d.Q))
    im_q = image_line_field(s.transport_form(s.Q) if plus <= minus else s.transport_form(s.A))
    rel = qt.chordal_distance(ker_dual.lines, qt.annihilator(im_q.lines))
    return {
        "congruence": min(plus, minus),
        "orientation": 1 if plus <= minus else -1,
        "ker_im_relation": float(rel[keep].max()),
    }
