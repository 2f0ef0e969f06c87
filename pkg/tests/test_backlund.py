import numpy as np
import pytest

from willmore import backlund as bl
from willmore import mcs
from willmore import quaternion as qt
from willmore.calculus import GridChart, OneForm
from willmore.mcs import SurfaceChart

from conftest import FLOOR, second_order, surface

G0 = qt.hmat(qt.ONE, qt.ZERO, qt.quat(0.3, 0.0, 0.2, 0.0), qt.ONE)
CATENOID_FRAME = bl.AffineFrame.at(qt.hvec(qt.ONE, qt.quat(0.3, 0.0, 0.2, 0.0)))


# -- frames and line fields ---------------------------------------------------------------


def test_affine_frame_default_and_at():
    f = bl.AffineFrame()
    np.testing.assert_allclose(f.e, bl._INF)
    e = qt.hvec(qt.quat(0.2, 1.0), qt.quat(0, 0, 1.0, -0.5))
    g = bl.AffineFrame.at(e)
    assert qt.chordal_distance(g.e, e) < 1e-12
    np.testing.assert_allclose(qt.mat_vec(g.moebius, qt.normalize_lines(e)), bl._INF, atol=1e-12)


def test_planted_rank_one_form_with_zero():
    ch = GridChart.disk(33, (-1, 1), (-1, 1))
    x, y = ch.coords()
    u = qt.hvec(qt.ONE, qt.J)
    a = qt.hvec(qt.K, qt.ONE)  # row covector (k, 1)
    M = np.empty((2, 2, 4))
    for r in range(2):
        for c in range(2):
            M[r, c] = qt.qmul(u[r], a[c])
    A = OneForm(x[..., None, None, None] * M, y[..., None, None, None] * M)
    lf = bl.kernel_line_field(A, eps_zero=0.05)
    assert lf.holes.any() and lf.holes[16, 16]
    # ker M: k a + b = 0, spanned by (1, -k)
    expect = qt.hvec(qt.ONE, -qt.K)
    assert qt.chordal_distance(lf.lines, expect).max() < 1e-2
    np.testing.assert_allclose(qt.mat_vec(M, lf.lines), 0.0, atol=1e-10)


def test_kernel_field_of_zero_form_raises():
    ch = GridChart.torus(16)
    z = np.zeros((16, 16, 2, 2, 4))
    with pytest.raises(bl.HopfFieldVanishes):
        bl.kernel_line_field(OneForm(z, z))


def test_round_sphere_has_no_transforms():
    s = surface("round-sphere", 32)
    with pytest.raises(bl.HopfFieldVanishes):
        bl.image_line_field(s.Q)
    with pytest.raises(bl.HopfFieldVanishes):
        bl.backlund_forward(s)
    with pytest.raises(bl.HopfFieldVanishes):
        bl.backlund_backward(s)


def test_twistor_forward_signals_zero():
    with pytest.raises(bl.HopfFieldVanishes) as info:
        bl.backlund_forward(surface("twistor-cubic", 64))
    assert info.value.which == "A"


def test_clifford_line_fields_are_continuous():
    s = surface("clifford-torus", 64)
    for lf in (bl.kernel_line_field(s.A), bl.image_line_field(s.Q)):
        assert lf.continuity(s.chart) < 0.5


# -- forward and backward transforms -------------------------------------------------------


@pytest.fixture(scope="module")
def clifford_pair():
    out = {}
    for n in (32, 64):
        s = surface("clifford-torus", n)
        out[n] = (s, bl.backlund_forward(s), bl.backlund_backward(s))
    return out


def test_clifford_forward_is_antipodal(clifford_pair):
    s, fw, _ = clifford_pair[32]
    assert not fw.constant
    # ker A is the antipodal point: g~ = -g
    np.testing.assert_allclose(qt.chordal_distance(fw.lines.lines, qt.normalize_lines(qt.hvec(-s.g, np.broadcast_to(qt.ONE, s.g.shape)))), 0.0, atol=1e-12)


def test_theorem_one_identities_on_clifford(clifford_pair):
    for n, (s, fw, bw) in clifford_pair.items():
        t, u = fw.surface, bw.surface
        assert bl.hopf_identity_residual(s, t, "forward") < FLOOR
        assert bl.hopf_identity_residual(s, u, "backward") < FLOOR
        assert bl.sphere_relation_residual(s, t, fw.lines.lines, "forward") < FLOOR
        assert bl.sphere_relation_residual(s, u, bw.lines.lines, "backward") < FLOOR
        h = mcs.harmonicity_residual(t.chart, t.hopf, t)
        assert max(h["dstarA"], h["dstarQ"]) < FLOOR


def test_involution(clifford_pair):
    s, fw, _ = clifford_pair[32]
    bound = 5 * s.chart.h**2 * mcs.curvature_scale(s)
    assert bl.involution_residual(s, fw.surface, "forward") < bound


def test_catenoid_forward_is_constant():
    s = surface("catenoid", 128)
    fw = bl.backlund_forward(s)
    bw = bl.backlund_backward(s)
    assert fw.constant and bw.constant and fw.surface is None
    assert fw.diameter < 1e-3 and bw.diameter < 1e-3
    c = fw.lines.lines[64, 64]
    assert qt.chordal_distance(c, bl._INF) < 1e-4


def test_twistor_backward_full_sphere_relation():
    vals = []
    for n in (32, 64, 128):
        s = surface("twistor-cubic", n)
        bw = bl.backlund_backward(s)
        vals.append(bl.sphere_relation_residual(s, bw.surface, bw.lines.lines, "backward", full=True))
        # and on L^ alone
        assert bl.sphere_relation_residual(s, bw.surface, bw.lines.lines, "backward") <= vals[-1] + 1e-12
    assert second_order(vals)


def test_transform_honours_explicit_thresholds():
    s = surface("clifford-torus", 32)
    # an absurd constant-map threshold turns every transform into a constant one
    assert bl.backlund_forward(s, constant_diameter=10.0).constant
    with pytest.raises(bl.HopfFieldVanishes):
        bl.backlund_forward(s, eps_global=1e3)


def test_no_affine_chart(monkeypatch):
    s = surface("clifford-torus", 16)
    monkeypatch.setattr(bl, "MAX_CHART_ATTEMPTS", 1)
    # a margin above the largest possible chordal distance rejects every chart
    with pytest.raises(bl.NoAffineChartError):
        bl.affine_surface(s.chart, s.lines(), margin=1.5)


# -- 1-step transform ------------------------------------------------------------------------


def test_one_step_round_sphere_is_constant():
    r = bl.one_step(surface("round-sphere", 32))
    assert np.abs(r.gsharp.g).max() == 0.0


def test_one_step_clifford():
    rows = []
    for n in (32, 64, 128):
        s = surface("clifford-torus", n)
        r = bl.one_step(s)
        assert r.closedness_defect <= 10 * max(r.harmonicity, 1e-9)
        assert len(r.periods) == 2
        rows.append(bl.sharp_residuals(r.surface, r, bl.sharp_sphere_data(r.surface)))
    for key in ("N_match", "R_match", "N_square", "R_square", "RH_HN", "right_normal"):
        assert max(row[key] for row in rows) < FLOOR, key
    assert second_order([row["mean_sharp"] for row in rows])


def test_one_step_catenoid_is_conformal():
    conf, gs = [], None
    for n in (64, 128):
        r = bl.one_step(surface("catenoid", n), frame=CATENOID_FRAME)
        conf.append(mcs.conformality_residual(r.gsharp))
        gs = r.gsharp
    assert float(np.ptp(gs.g[gs.valid_mask], axis=0).max()) > 0.1  # not constant
    assert second_order(conf)


def test_one_step_catenoid_standard_frame_beta_singular():
    # with infinity at ker A = (1, 0) H the covector beta does not exist
    r = bl.one_step(surface("catenoid", 32))
    with pytest.raises(bl.BetaSingularError):
        bl.sharp_sphere_data(r.surface)


def test_one_step_frame_collision():
    s = surface("clifford-torus", 16)
    p = s.lines()[3, 5]
    with pytest.raises(bl.FrameCollisionError):
        bl.one_step(s, frame=bl.AffineFrame.at(p))


def test_one_step_not_closed():
    s = surface("nonwillmore-control", 32)
    with pytest.raises(bl.NotClosedError):
        bl.one_step(s, defect_factor=1e-6)


# -- Moebius maps and duality --------------------------------------------------------------------


def test_moebius_identity_and_inverse():
    s = surface("catenoid", 32)
    same = bl.moebius_apply(qt.identity(), s)
    np.testing.assert_allclose(same.g, s.g, atol=1e-14)
    back = bl.moebius_apply(qt.mat_inv(G0), bl.moebius_apply(G0, s))
    np.testing.assert_allclose(back.g, s.g, atol=1e-10)
    with pytest.raises(ValueError):
        bl.moebius_apply(np.zeros((2, 2, 4)), s)


def test_inversion_at_constant_point_is_minimal():
    hs = []
    for n in (32, 64, 128):
        s = bl.moebius_apply(G0, surface("catenoid", n))
        fw = bl.backlund_forward(s)
        assert fw.constant
        c = fw.lines.lines[s.chart.nx // 2, s.chart.ny // 2]
        inv = bl.moebius_apply(bl.inversion_at(c), s)
        hs.append(inv.norm(inv.H))
    assert second_order(hs)


def test_dual_surface():
    s = surface("clifford-torus", 32)
    d = bl.dual_surface(s)
    sd = qt.adjoint(s.S)
    one = qt.identity(s.chart.shape)
    assert float(qt.mat_norm(qt.mat_mul(sd, sd) + one).max()) < 1e-10
    assert float(qt.chordal_distance(bl.dual_surface(d).lines(), s.lines()).max()) < 1e-10
    r = bl.dual_residuals(s, d)
    assert r["congruence"] < FLOOR and r["ker_im_relation"] < FLOOR
    assert r["orientation"] in (1, -1)
