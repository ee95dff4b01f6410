import numpy as np
import pytest
from hypothesis import given, strategies as st

from tgfol import atlas as A
from tgfol import expr as E
from tgfol import foliation as Fo
from tgfol import gallery as Ga
from tgfol import metric as Mt
from tgfol.errors import (AdaptednessFailed, AttractiveLeafOutsideU, ClassificationMargin,
                          NoInvariantDirection, OddAttractiveCount)

s, th, zz = E.coords()
STRIP = A.AtlasManifold("strip", (A.Chart("C", A.Box((-1, 0, 0), (1, 1, 1))),))
LEAF = Fo.TangencyLeaf("C", s, 0.0, name="C")


def strip_setup():
    """w = ds + s dtheta with X = d_theta, Z = d_s: b = -s / sqrt(s^2 + 1)."""
    F = Fo.FoliationSpec(STRIP, {"C": A.OneForm.of("C", (1.0, s, 0.0))}, (LEAF,))
    phi = Fo.FlowSpec(STRIP, {"C": A.VectorField.of("C", (0.0, 1.0, 0.0))})
    fr = Fo.frame_fields(F, phi, A.VectorField.of("C", (1.0, 0.0, 0.0)))
    P = A.VectorField.of("C", (0.0, 0.0, 1.0))
    return F, phi, fr, P


def quad(G, u, v):
    return np.einsum("ni,nij,nj->n", u, G, v)


def test_tangency_metric_makes_the_locus_lightlike(rng):
    F, phi, fr, P = strip_setup()
    g = Mt.build_tangency_metric(fr, fr.b, 1.0, P, leaf=LEAF, atlas=STRIP)
    assert Mt.check_signature(g, STRIP, 2000).passed
    on = LEAF.project(STRIP.charts[0].domain.random(50, rng))
    assert set(Mt.leaf_type(g, F, on, "C").types) == {"light"}
    assert set(Mt.leaf_type(g, F, [[-0.5, 0.3, 0.3]], "C").types) == {"space"}
    assert set(Mt.leaf_type(g, F, [[0.5, 0.3, 0.3]], "C").types) == {"time"}


def test_tangency_metric_identity_g_YY(rng):
    """g(Y, Y) = b^2 / beta, checked here with beta = b and with beta = s."""
    F, phi, fr, P = strip_setup()
    pts = STRIP.charts[0].domain.random(500, rng)
    v = fr.values(pts)
    g = Mt.build_tangency_metric(fr, fr.b, 1.0, P)
    assert np.max(np.abs(quad(g.values("C", pts), v["Y"], v["Y"]) - v["b"])) < 1e-12
    q = -1 / E.sqrt(s * s + 1)
    g2 = Mt.build_tangency_metric(fr, s, 1.0, P, quotient=q, leaf=LEAF, atlas=STRIP)
    want = v["b"] ** 2 / pts[:, 0]
    assert np.allclose(quad(g2.values("C", pts), v["Y"], v["Y"]), want, rtol=1e-10, atol=1e-14)


def test_tangency_metric_requires_adaptedness():
    F, phi, fr, P = strip_setup()
    with pytest.raises(AdaptednessFailed):
        Mt.build_tangency_metric(fr, s * (2 + E.sin(th)), 1.0, P, quotient=E.ONE, leaf=LEAF, atlas=STRIP)
    with pytest.raises(AdaptednessFailed):
        Mt.build_tangency_metric(fr, s, 1.0, P)


def test_flat_transverse_metric_on_torus(rng):
    T = A.t3_flat()
    F = Fo.product_foliation(T, 2)
    phi = Fo.FlowSpec(T, {"T": A.VectorField.of("T", (0, 0, 1))})
    pts = T.charts[0].domain.random(20, rng)
    g = Mt.build_transverse_metric(F, phi)
    assert np.allclose(g.values("T", pts), np.diag([1.0, 1.0, -1.0]), atol=0)
    assert set(Mt.leaf_type(g, F, pts, "T").types) == {"space"}
    gt = Mt.build_transverse_metric(F, phi, "timelike_leaves")
    assert np.allclose(gt.values("T", pts), np.diag([-1.0, 1.0, 1.0]), atol=0)
    assert set(Mt.leaf_type(gt, F, pts, "T").types) == {"time"}
    assert Mt.check_signature(gt, T, 1000).passed


def test_quasi_fibered_examples():
    T = A.t3_flat()
    phi = Fo.FlowSpec(T, {"T": A.VectorField.of("T", (0, 0, 1))})
    assert Mt.check_quasi_fibered(Mt.flat_metric(T), phi).passed
    warped = Mt.MetricField({"T": [1, 0, 0, E.exp(zz), 0, 1]}, "riemannian")
    rep = Mt.check_quasi_fibered(warped, phi)
    assert not rep.passed and rep.residual > 0.5
    D = A.solid_torus(1.0)
    rot = Fo.FlowSpec(D, {"D": A.VectorField.of("D", (0, 1, 0))})
    assert Mt.check_quasi_fibered(Mt.cylindrical_metric(D), rot).passed


def test_signature_check_rejects_wrong_signature():
    T = A.t3_flat()
    assert Mt.check_signature(Mt.flat_metric(T, (1, 1, -1)), T, 100).passed
    bad = Mt.MetricField(Mt.flat_metric(T).entries, "lorentzian")
    rep = Mt.check_signature(bad, T, 100)
    assert not rep.passed and rep.bad == 100


def test_classify_gram_margins():
    G = np.array([[[1.0, 0], [0, 1e-8]]])
    with pytest.raises(ClassificationMargin):
        Mt.classify_gram(G)
    assert Mt.classify_gram(G, strict=False)[0] == ["ambiguous"]
    assert Mt.classify_gram(np.array([[[0.0, 1], [1, 0]]]))[0] == ["time"]
    assert Mt.classify_gram(np.array([[[1.0, 0], [0, 0]]]))[0] == ["light"]


def test_compatibility_examples():
    t3a = Ga.build_entry("t3a_mixed", 500)
    frames = {l.name: t3a.frames[l.name] for l in t3a.foliation.tangency_leaves}
    rep = Mt.check_globally_compatible(t3a.foliation, t3a.flow, frames, t3a.U, t3a.invariant_direction)
    assert rep.compatible and sorted(rep.attractive.values()).count("attractive") == 2
    assert set(rep.crossings) == {2}
    with pytest.raises(AttractiveLeafOutsideU):
        Mt.check_globally_compatible(t3a.foliation, t3a.flow, frames, ())
    with pytest.raises(NoInvariantDirection):
        Mt.check_globally_compatible(t3a.foliation, t3a.flow, frames, t3a.U, {})
    obs = Ga.build_entry("s3_reeb_attractive_obstructed", 500)
    fr = {l.name: obs.frames[l.chart] for l in obs.foliation.tangency_leaves}
    with pytest.raises(OddAttractiveCount):
        Mt.check_globally_compatible(obs.foliation, obs.flow, fr)
    soft = Mt.check_globally_compatible(obs.foliation, obs.flow, fr, strict=False)
    assert not soft.compatible
    ok = Ga.build_entry("s3_two_reeb_spacelike", 500)
    fr = {l.name: ok.frames[l.chart] for l in ok.foliation.tangency_leaves}
    assert Mt.check_globally_compatible(ok.foliation, ok.flow, fr).verdict == "compatible (no attractive leaves)"


@pytest.mark.parametrize("name", Ga.ENTRY_NAMES)
def test_gallery_metrics_agree_across_charts(name):
    e = Ga.build_entry(name, 500)
    if e.metric is None:
        pytest.skip("obstructed entry carries no metric")
    assert Mt.check_transitions(e.metric, e.atlas) < 1e-9


@given(st.floats(-0.9, 0.9).filter(lambda v: abs(v) > 1e-3), st.floats(0, 1), st.floats(0, 1))
def test_tangency_leaf_type_follows_sign_of_b(sv, t, z):
    F, phi, fr, P = strip_setup()
    g = Mt.build_tangency_metric(fr, fr.b, 1.0, P)
    kind = Mt.leaf_type(g, F, [[sv, t, z]], "C").types[0]
    assert kind == ("space" if sv < 0 else "time")
