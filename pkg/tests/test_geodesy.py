import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tgfol import atlas as A
from tgfol import expr as E
from tgfol import foliation as Fo
from tgfol import gallery as Ga
from tgfol import geodesy as Gd
from tgfol import metric as Mt
from tgfol.errors import DegenerateMetric, LeftAtlas, LoopNotClosed

GOLDEN = (3 + math.sqrt(5)) / 2
ANNULUS = A.t2_interval(0.5, 2.0)


def test_polar_christoffels(rng):
    g = Mt.cylindrical_metric(ANNULUS)
    pts = ANNULUS.charts[0].domain.random(200, rng)
    Gam = Gd.christoffel(g, "T", pts)
    r = pts[:, 0]
    assert np.max(np.abs(Gam[:, 0, 1, 1] + r)) < 1e-9
    assert np.max(np.abs(Gam[:, 1, 0, 1] - 1 / r)) < 1e-9
    assert np.max(np.abs(Gam[:, 1, 1, 0] - 1 / r)) < 1e-9
    Gam[:, 0, 1, 1] = 0
    Gam[:, 1, 0, 1] = Gam[:, 1, 1, 0] = 0
    assert np.max(np.abs(Gam)) < 1e-12


@pytest.mark.parametrize("name", ["s3_two_reeb_spacelike", "t3a_mixed"])
def test_christoffels_match_finite_differences(name, rng):
    e = Ga.build_entry(name, 500)
    for cid in e.metric.charts:
        pts = e.atlas.chart(cid).domain.random(30, rng, inset=1e-3)
        exact = Gd.christoffel(e.metric, cid, pts)
        fd = Gd.christoffel_fd(e.metric, cid, pts, h=1e-6)
        scale = max(1.0, float(np.max(np.abs(exact))))
        assert np.max(np.abs(exact - fd)) / scale < 1e-5
        single = Gd.christoffel(e.metric, cid, pts[0])
        assert np.allclose(single, exact[0], rtol=1e-12, atol=1e-12)


def test_degenerate_metric_is_rejected():
    T = A.t3_flat()
    g = Mt.MetricField({"T": [1, 0, 0, 1, 0, 0]}, "lorentzian")
    with pytest.raises(DegenerateMetric):
        Gd.christoffel(g, "T", [0.1, 0.2, 0.3])


def test_second_fundamental_form_examples(rng):
    T = A.t3_flat()
    II = Gd.second_fundamental_form(Mt.flat_metric(T, (1, 1, -1)), Fo.product_foliation(T, 2), "T",
                                    T.charts[0].domain.random(100, rng))
    assert np.max(np.abs(II)) == 0.0
    R = Fo.reeb_solid_torus()
    eucl = Mt.MetricField({"D": [1, 0, 0, E.var(0) ** 2 + 1e-3, 0, 1]}, "riemannian")
    assert Gd.max_second_fundamental_form(eucl, R, 2000)["max_II"] > 0.1


def test_flat_geodesic_is_a_straight_line():
    m = Ga.flat_model()
    v = np.array([0.3, -0.2, 0.1])
    s0 = Gd.GeodesicState("T", [0.5, 0.5, 0.5], v)
    tr = Gd.integrate_geodesic(m.metric, s0, 2.0, 1e-10, m.atlas)
    assert np.allclose(tr.final.position, 0.5 + 2.0 * v, atol=1e-12)
    assert tr.norm_drift() < 1e-14


def test_polar_circle_data_is_a_cartesian_straight_line():
    g = Mt.cylindrical_metric(ANNULUS)
    tr = Gd.integrate_geodesic(g, Gd.GeodesicState("T", [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), 0.5, 1e-12, ANNULUS)
    r, th, _ = tr.final.position
    assert r == pytest.approx(math.hypot(1.0, 0.5), abs=1e-9)
    assert th == pytest.approx(math.atan(0.5), abs=1e-9)


def test_leaving_a_chart_is_reported():
    g = Mt.flat_metric(ANNULUS, (1, 1, 1))
    with pytest.raises(LeftAtlas):
        Gd.integrate_geodesic(g, Gd.GeodesicState("T", [1.9, 0.0, 0.0], [1.0, 0.0, 0.0]), 1.0, 1e-10, ANNULUS)


def test_round_trip_in_flat_model():
    m = Ga.flat_model()
    s0 = Gd.GeodesicState("T", m.start, m.velocity + np.array([0, 0.4, 0.2]))
    assert Gd.round_trip_error(m.metric, s0, 10.0, 1e-10, m.atlas) < 1e-12


def test_linear_holonomy_examples():
    m = Ga.hyperbolic_leaf_model()
    assert Gd.linear_holonomy(m.foliation, m.loop) == pytest.approx(GOLDEN, rel=1e-12)
    assert Gd.linear_holonomy(None, Gd.HolonomyLoop([], 2, np.zeros(3), "T")) == 1.0
    fwd, p = m.loop.traversals[0]
    with pytest.raises(LoopNotClosed):
        Gd.linear_holonomy(m.foliation, Gd.HolonomyLoop([(fwd, p + [0.01, 0, 0])], 0, p, "E"))


def test_hyperbolic_leaf_is_incomplete_with_exact_affine_length():
    """Along u = v = 0 the geodesic equation is s'' = -ln(lam) s'^2, solvable in closed form."""
    m = Ga.hyperbolic_leaf_model()
    v = Gd.null_completeness(m.metric, m.foliation, m.leaf, m.loop, x0=m.start, v0=m.velocity, loops=3)
    L = math.log(GOLDEN)
    assert not v.complete and v.incomplete_direction == "backward"
    assert v.linear_holonomy == pytest.approx(GOLDEN, rel=1e-12)
    assert v.loop_times[0] == pytest.approx(Ga.hyperbolic_loop_time(GOLDEN) / GOLDEN, rel=1e-8)
    for a, b in zip(v.loop_times, v.loop_times[1:]):
        assert a / b == pytest.approx(GOLDEN, rel=1e-6)
    assert v.total_affine_length == pytest.approx(1 / L, rel=1e-8)
    assert v.c_drift < 1e-8


def test_t3a_tangency_fibre_is_complete():
    e = Ga.build_entry("t3a_mixed", 500)
    p = e.completeness[0]
    v = Gd.null_completeness(e.metric, e.foliation, e.leaves[p.leaf], p.loop, loops=1, t_max=p.t_max,
                             flow=e.flow)
    assert v.complete and v.linear_holonomy == 1.0 and v.c_drift < 1e-8


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_flat_geodesics_conserve_norm(a, b, c):
    m = Ga.flat_model()
    s0 = Gd.GeodesicState("T", [1.0, 2.0, 3.0], [a, b, c])
    tr = Gd.integrate_geodesic(m.metric, s0, 1.0, 1e-10, m.atlas)
    assert tr.norm_drift() < 1e-12
    assert np.max(np.abs(m.atlas.charts[0].difference(tr.final.position[None],
                                                      np.array([[1 + a, 2 + b, 3 + c]])))) < 1e-12
