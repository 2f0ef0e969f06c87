import pytest

from willmore import backlund as bl
from willmore import mcs
from willmore.tolerances import CALIBRATED, ROUNDOFF, Tolerances, nominal_resolution

from conftest import surface

WILLMORE = ("unit-sphere", "clifford-torus", "catenoid", "holo-curve", "twistor-cubic")
RESOLUTIONS = (16, 32, 64, 128)


def _harm(s):
    h = mcs.harmonicity_residual(s.chart, s.hopf, s)
    return max(h["dstarA"], h["dstarQ"])


@pytest.mark.parametrize("name", WILLMORE)
def test_harmonicity_calibration_covers_gallery(name):
    for n in RESOLUTIONS:
        s = surface(name, n)
        unscaled = CALIBRATED["harmonicity"] * mcs.curvature_scale(s) ** 2 / nominal_resolution(s.chart) ** 2
        assert _harm(s) <= max(unscaled, ROUNDOFF), (name, n)


def test_control_is_above_the_gate():
    tol = Tolerances()
    for n in RESOLUTIONS:
        s = surface("nonwillmore-control", n)
        assert _harm(s) > 2 * tol.harmonicity(s.chart, mcs.curvature_scale(s))


def test_hopf_zero_separates_vanishing_fields():
    tol = Tolerances()
    for n in (32, 64, 128):
        tw = surface("twistor-cubic", n)
        f1 = bl.backlund_backward(tw).surface
        assert f1.form_norm(f1.hopf.Q) < tol.hopf_zero(f1.chart, mcs.curvature_scale(f1))
        assert tw.form_norm(tw.hopf.A) < tol.hopf_zero(tw.chart, mcs.curvature_scale(tw))
        for name in ("clifford-torus", "catenoid"):
            s = surface(name, n)
            thr = tol.hopf_zero(s.chart, mcs.curvature_scale(s))
            assert min(s.form_norm(s.hopf.A), s.form_norm(s.hopf.Q)) > 2 * thr


def test_thresholds_scale_and_shrink():
    a, b = surface("clifford-torus", 32).chart, surface("clifford-torus", 64).chart
    t1, t2 = Tolerances(), Tolerances(3.0)
    assert t2.harmonicity(a, 1.0) == pytest.approx(3 * t1.harmonicity(a, 1.0))
    assert t1.harmonicity(a, 1.0) == pytest.approx(4 * t1.harmonicity(b, 1.0))
    assert t1.constant_diameter(b) >= 1e-3


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_invalid_scale(bad):
    with pytest.raises(ValueError, match="tol-scale"):
        Tolerances(bad)


def test_unknown_constant_rejected():
    with pytest.raises(ValueError, match="unknown"):
        Tolerances(constants={"nope": 1.0})


def test_as_dict_carries_version():
    d = Tolerances().as_dict()
    assert d["version"] == "1" and d["constants"] == CALIBRATED


def test_roundoff_floor_grows_with_derivatives():
    from willmore.tolerances import roundoff_floor

    assert roundoff_floor(32) == ROUNDOFF
    assert roundoff_floor(128, 4) == pytest.approx(2.220446049250313e-16 * 128**4)
    assert roundoff_floor(256, 4) == pytest.approx(16 * roundoff_floor(128, 4))
