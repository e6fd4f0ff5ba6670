import math

import numpy as np
import pytest

import singularflow as sf

ALPHA = 1.0 / 3.0


def saddle():
    return sf.builtin_field("saddle2d", ALPHA)


def test_fixed_point_run_closed_forms():
    # from the collapsing direction: y stays put, z(s) = -s,
    # t(s) = 1.5 (1 - exp(-2s/3)); dense queries need small steps
    opts = sf.IntegrationOptions(rtol=1e-12, atol=1e-15, max_step=0.25, r_floor=0.0)
    rt = sf.renorm_integrate(saddle(), [-1.0, 0.0], 0.0, 20.0, opts)
    assert np.abs(rt.y - np.array([-1.0, 0.0])).max() < 1e-9
    assert np.abs(rt.z + rt.s).max() < 1e-8
    for s in (0.5, 3.0, 11.0):
        t_closed = 1.5 * (1.0 - math.exp(-2.0 * s / 3.0))
        assert sf.physical_time(rt, s) == pytest.approx(t_closed, abs=1e-8)
    assert sf.physical_time(rt, 0.0) == 0.0
    # approach to t_b from below
    assert sf.physical_time(rt, 20.0) < 1.5
    assert 1.5 - sf.physical_time(rt, 20.0) < 1e-5


def test_physical_time_out_of_range():
    rt = sf.renorm_integrate(saddle(), [-1.0, 0.0], 0.0, 5.0)
    with pytest.raises(sf.OutOfRange):
        sf.physical_time(rt, 6.0)
    with pytest.raises(sf.NotUnitVector):
        sf.renorm_integrate(saddle(), [-1.2, 0.0], 0.0, 5.0)


def test_sphere_projection_invariant():
    rt = sf.renorm_integrate(saddle(), [-0.6, 0.8], 0.0, 40.0)
    assert np.abs(np.linalg.norm(rt.y, axis=1) - 1.0).max() <= 1e-9
    # s and t strictly increase
    assert np.all(np.diff(rt.s) > 0)
    assert np.all(np.diff(rt.t) > 0)


def test_radial_integral_cross_check():
    # z(s_max) - z0 equals the quadrature of F_r(y(s)) along the run;
    # the independent quadrature samples the dense output, so steps are
    # kept small enough for the interpolation to carry 1e-8
    from scipy.integrate import simpson

    field = saddle()
    opts = sf.IntegrationOptions(rtol=1e-11, atol=1e-14, r_floor=0.0)
    rt = sf.renorm_integrate(field, [-0.6, 0.8], 0.0, 30.0, opts)
    s = np.linspace(0.0, 30.0, 8193)
    y = rt.y_at(s)
    y /= np.linalg.norm(y, axis=1)[:, None]
    fr = np.array([sf.decompose(field, yi).radial for yi in y])
    quad = simpson(fr, x=s)
    assert abs((rt.z[-1] - rt.z[0]) - quad) < 1e-8


def test_radial_averages_values():
    rt = sf.renorm_integrate(saddle(), [-1.0, 0.0], 0.0, 40.0)
    av = sf.radial_averages(rt, 20.0)
    assert av.lower == pytest.approx(-1.0, abs=1e-9)
    assert av.upper == pytest.approx(-1.0, abs=1e-9)

    spiral = sf.builtin_field("spiral2d", ALPHA)
    rt = sf.renorm_integrate(spiral, [1.0, 0.0], 0.0, 40.0)
    av = sf.radial_averages(rt, 20.0)
    assert av.lower == pytest.approx(1.0, abs=1e-10)
    assert av.upper == pytest.approx(1.0, abs=1e-10)

    s3 = sf.builtin_field("sphere3d")
    y0 = np.array([math.sqrt(3) / 2, 0.0, 0.5])
    rt = sf.renorm_integrate(s3, y0, 0.0, 60.0)
    av = sf.radial_averages(rt, 20.0)
    assert av.lower == pytest.approx(0.25, abs=1e-3)
    assert av.upper == pytest.approx(0.25, abs=1e-3)
    assert av.lower <= av.upper


def test_radial_averages_window_precondition():
    rt = sf.renorm_integrate(saddle(), [-1.0, 0.0], 0.0, 10.0)
    with pytest.raises(ValueError):
        sf.radial_averages(rt, 8.0)


def test_classify_saddle_basins():
    v = sf.classify_blowup(saddle(), [-1.0, 0.0])
    assert v.verdict == "blowup"
    assert v.t_b == pytest.approx(1.5, abs=1e-6)
    v = sf.classify_blowup(saddle(), [1.0, 0.0])
    assert v.verdict == "escape_to_infinity"
    assert v.t_b is None
    y = np.array([-0.3, -0.9])
    y /= np.linalg.norm(y)
    assert sf.classify_blowup(saddle(), y).verdict == "blowup"


def test_classify_degenerate_rotation():
    # pure rotation: F_r = 0 identically, no verdict possible
    field = sf.SingularField(2, ALPHA, lambda y: np.array([-y[1], y[0]]))
    v = sf.classify_blowup(field, [1.0, 0.0])
    assert v.verdict == "undetermined"
    assert v.reason == "degenerate"


def test_classify_blowup_time_matches_tail_fit():
    field = saddle()
    y0 = np.array([-0.6, 0.8])
    y0 /= np.linalg.norm(y0)
    v = sf.classify_blowup(field, y0)
    assert v.verdict == "blowup"
    rhs = lambda t, x: sf.eval_field(field, x)
    traj = sf.integrate(rhs, y0, 0.0, v.t_b + 1.0)
    t_fit, _, _ = sf.estimate_blowup_time(traj, ALPHA)
    assert abs(t_fit - v.t_b) <= 1e-5 * abs(v.t_b)


def test_reconstruct_fixed_point_run():
    # closed-form collapse: r(t) = ((2/3)(1.5 - t))^{3/2} along (-1, 0)
    rt = sf.renorm_integrate(saddle(), [-1.0, 0.0], 0.0, 25.0)
    traj = sf.reconstruct(rt)
    r = traj.radii()
    expected = ((2.0 / 3.0) * (1.5 - traj.times)) ** 1.5
    assert np.abs(r - expected).max() < 1e-8
    assert np.abs(traj.states[:, 1]).max() < 1e-12


def test_reconstruct_constant_when_degenerate():
    field = sf.SingularField(2, ALPHA, lambda y: np.array([-y[1], y[0]]))
    rt = sf.renorm_integrate(field, [1.0, 0.0], 0.0, 3.0)
    traj = sf.reconstruct(rt)
    assert np.abs(traj.radii() - 1.0).max() < 1e-9


@pytest.mark.parametrize("name", ["power1d", "saddle2d", "spiral2d", "sphere3d"])
def test_cross_oracle_reconstruct_vs_direct(name):
    # renormalized integration mapped back to x(t) agrees with direct
    # integration of the ideal field on the overlap r in [1e-6, r_b]
    field = sf.builtin_field(name) if name == "sphere3d" else sf.builtin_field(name, ALPHA)
    rng = np.random.default_rng(hash(name) % 2**32)
    opts = sf.IntegrationOptions(rtol=1e-11, atol=1e-14, r_floor=0.0)
    for _ in range(10):
        y0 = rng.standard_normal(field.dimension)
        y0 /= np.linalg.norm(y0)
        rt = sf.renorm_integrate(field, y0, 0.0, 14.0 / (1 - field.alpha), opts)
        rec = sf.reconstruct(rt)
        keep = (rec.radii() >= 1e-6) & (np.exp(rt.z) <= math.e)
        if keep.sum() < 2:
            continue
        t_end = rec.times[keep].max()
        rhs = lambda t, x: sf.eval_field(field, x)
        direct = sf.integrate(rhs, y0, 0.0, t_end * (1 + 1e-12), opts)
        diff = rec.states[keep] - direct.sample(rec.times[keep])
        assert np.abs(diff).max() < 1e-6


def test_renorm_csv(tmp_path):
    rt = sf.renorm_integrate(saddle(), [-1.0, 0.0], 0.0, 2.0)
    path = tmp_path / "renorm.csv"
    rt.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "s,y1,y2,z,t"
    assert len(lines) == len(rt.s) + 1


def test_verdict_record_round_trip():
    v = sf.classify_blowup(saddle(), [-1.0, 0.0])
    d = v.to_dict()
    assert d["verdict"] == "blowup"
    assert d["t_b"] == pytest.approx(1.5, abs=1e-6)
    assert set(d["averages"]) == {"lower", "upper", "horizon"}
    assert d["s_budget"] > 0
