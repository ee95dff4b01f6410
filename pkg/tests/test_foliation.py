import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tgfol import atlas as A
from tgfol import expr as E
from tgfol import foliation as Fo
from tgfol import gallery as Ga
from tgfol import metric as Mt
from tgfol.errors import MixedLeaf, OrientationMismatch, QuotientUndefined

s, th, zz = E.coords()


def flow(M, comps):
    return Fo.FlowSpec(M, {c.id: A.VectorField.of(c.id, comps) for c in M.charts})


def polar_frame(b):
    """Frame data with a prescribed b on a chart where the leaf is s = 0."""
    one = A.VectorField.of("C", (0.0, 1.0, 0.0))
    Z = A.VectorField.of("C", (1.0, 0.0, 0.0))
    return Fo.FrameData("C", one, Z, one, E.ONE, b)


LEAF = Fo.TangencyLeaf("C", s, 0.0, name="C")


def test_reeb_form_kills_rotation_and_is_integrable(rng):
    F = Fo.reeb_solid_torus()
    pts = F.atlas.charts[0].domain.random(1000, rng)
    assert np.all(E.evaluate(F.omega_of("D", (0, 1, 0)), pts) == 0.0)
    assert np.max(F.frobenius_residual("D", pts)) < 1e-12
    assert F.forms["D"]((0.0, 1.0, 2.0))[0] == pytest.approx([0.0, 0.0, 1.0])
    assert F.check()["passed"]


def test_leafwise_product_examples():
    T = A.t3_flat()
    F = Fo.product_foliation(T, 2)
    assert Fo.check_leafwise_position(F, flow(T, (0, 0, 1))).classification == "all-transverse"
    rep = Fo.check_leafwise_position(F, flow(T, (1, 0, 0)))
    assert rep.passed and rep.classification == "all-tangent"


def test_leafwise_reeb_with_core_parallel_flow():
    F = Fo.reeb_solid_torus()
    rep = Fo.check_leafwise_position(F, flow(F.atlas, (0, 0, 1)))
    assert rep.passed, rep.to_json()
    assert rep.classification == "transverse-with-tangency-leaves"
    assert rep.max_on_locus == 0.0


def test_mixed_leaf_is_reported():
    T = A.t3_flat()
    F = Fo.product_foliation(T, 2)
    X = A.VectorField.of("T", (1.0, 0.0, E.bump(s - 0.5)))
    with pytest.raises(MixedLeaf):
        Fo.check_leafwise_position(F, Fo.FlowSpec(T, {"T": X}))


def test_basic_transverse_examples():
    T = A.t3_flat()
    leaf = Fo.TangencyLeaf("T", zz, 0.5)
    Z = Fo.make_basic_transverse(leaf, flow(T, (1, 0, 0)), Mt.flat_metric(T))
    assert Z((0.3, 0.2, 0.5))[0] == pytest.approx([0, 0, 1])
    D = A.solid_torus(1.25)
    R = Fo.reeb_solid_torus(atlas=D)
    Z = Fo.make_basic_transverse(R.tangency_leaves[0], flow(D, (0, 1, 0)), Mt.cylindrical_metric(D))
    assert Z((1.0, 0.4, 2.0))[0] == pytest.approx([1, 0, 0])


def test_frame_fields_examples():
    T = A.t3_flat()
    fr = Fo.frame_fields(Fo.product_foliation(T, 2), flow(T, (1, 0, 0)), A.VectorField.of("T", (0, 0, 1)))
    v = fr.values(np.array([[0.1, 0.2, 0.3]]))
    assert v["a"][0] == 1.0 and v["b"][0] == 0.0
    M = A.AtlasManifold("strip", (A.Chart("C", A.Box((-1, 0, 0), (1, 1, 1))),))
    F = Fo.FoliationSpec(M, {"C": A.OneForm.of("C", (1.0, s, 0.0))})
    fr = Fo.frame_fields(F, flow(M, (0, 1, 0)), A.VectorField.of("C", (1, 0, 0)))
    for sv in (-0.7, 0.0, 0.4):
        b = E.evaluate(fr.b, np.array([[sv, 0.5, 0.5]]))[0]
        assert b == pytest.approx(-sv / math.sqrt(sv * sv + 1), abs=1e-15)
    chk = fr.check(F, M.charts[0].domain.random(100, np.random.default_rng(1)))
    assert max(chk.values()) < 1e-14


def test_attractiveness_from_sign_of_b():
    assert Fo.attractiveness(LEAF, polar_frame(s)) == "attractive"
    assert Fo.attractiveness(LEAF, polar_frame(s * s)) == "not_attractive"


@pytest.mark.parametrize("entry,expected", [("s3_two_reeb_spacelike", "not_attractive"),
                                            ("s3_reeb_attractive_obstructed", "attractive")])
def test_reeb_gluings_attractiveness(entry, expected):
    assert Ga.build_entry(entry, 500).compatibility["attractive"]["torus"] == expected


def test_check_adapted_examples():
    assert Fo.check_adapted(LEAF, polar_frame(s), s, E.ONE).passed
    b = s * (2 + E.sin(th))
    rep = Fo.check_adapted(LEAF, polar_frame(b), s, 2 + E.sin(th))
    assert rep.passed and 1.0 <= rep.quotient_min and rep.quotient_max <= 3.0
    bad = Fo.check_adapted(LEAF, polar_frame(s * E.sin(th) ** 2 + s ** 3), s ** 3,
                           E.sin(th) ** 2 / (s * s) + 1)
    assert not bad.passed
    nonbasic = Fo.check_adapted(LEAF, polar_frame(s), s * (2 + E.sin(th)), 1 / (2 + E.sin(th)))
    assert not nonbasic.passed and nonbasic.reason == "X.beta != 0"
    with pytest.raises(QuotientUndefined):
        Fo.check_adapted(LEAF, polar_frame(s), s, None)


def _turbulized_attractiveness(orientation):
    D = A.solid_torus(1.0)
    F = Fo.turbulize(Fo.product_foliation(D, 2), "D", 0.4, orientation)
    assert F.check()["passed"]
    leaf = F.tangency_leaves[-1]
    fr = Fo.frame_fields(F, flow(D, (0, 0, 1)), A.VectorField.of("D", (1, 0, 0)))
    return Fo.attractiveness(leaf, fr, atlas=D)


def test_turbulization_orientation_flips_attractiveness():
    assert {_turbulized_attractiveness(1), _turbulized_attractiveness(-1)} == {"attractive", "not_attractive"}


def test_spin_is_idempotent_and_has_trivial_holonomy():
    from tgfol import geodesy as Ge
    D = A.solid_torus(1.0)
    once = Fo.spin_to_boundary(Fo.product_foliation(D, 2), "D", 0.75, side="inner")
    assert once.check()["passed"]
    twice = Fo.spin_to_boundary(once, "D", 0.75, side="inner")
    assert twice is once
    assert Ge.linear_holonomy(once, Ge.HolonomyLoop([], 0, np.array([0.75, 0.0, 0.0]), "D")) == 1.0
    spun = Ga.build_entry("circle_bundle_spun", 500)
    for probe in spun.completeness:
        assert Ge.linear_holonomy(spun.foliation, probe.loop) == 1.0


def test_glue_rejects_mismatched_coorientations():
    M = A.s3_hopf()
    R = Fo.reeb_solid_torus(atlas=M, chart="A")
    S = Fo.reeb_solid_torus(atlas=M, chart="B")
    with pytest.raises(OrientationMismatch):
        Fo.glue_foliations(M, [Fo.Piece.single(R, "A", s, 1.0), Fo.Piece.single(S, "B", s, 1.0)])


def test_glued_reeb_pair_is_a_foliation():
    M, G = Ga._s3_foliation(1, 1)
    assert G.check()["passed"]
    assert len(G.tangency_leaves) == 2


@given(st.floats(0.0, 0.999), st.floats(0.05, 0.95))
def test_reeb_profiles_are_a_unit_pair(r, r0):
    lam, mu = Fo.reeb_profiles(E.var(0), r0 * 0.999, 1.0)
    p = np.array([[r, 0.0, 0.0]])
    assert E.evaluate(lam, p)[0] ** 2 + E.evaluate(mu, p)[0] ** 2 == pytest.approx(1.0, abs=1e-14)
