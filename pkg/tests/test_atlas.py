import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tgfol import atlas as A
from tgfol import expr as E
from tgfol.errors import InvalidParameter, OutOfDomain

x, y, z = E.coords()


def test_eval_field_examples():
    assert A.eval_field(A.ScalarField("C", x * x + y), (2.0, 1.0, 0.0)) == 5.0
    assert A.eval_field(A.ScalarField("C", E.bump(x)), (0.0, 0.0, 0.0)) == 0.0
    assert A.eval_field(A.ScalarField("C", E.sin(y) * x), (0.5, math.pi / 2, 0.0)) == pytest.approx(0.5, abs=1e-15)


def test_eval_derivative_examples():
    assert A.eval_derivative(A.ScalarField("C", x * x), (3.0, 0.0, 0.0), 0) == 6.0
    for d in (0, 1, 2, (1.0, 2.0, 3.0)):
        assert A.eval_derivative(A.ScalarField("C", E.bump(x)), (0.0, 0.0, 0.0), d) == 0.0
    f = A.ScalarField("C", E.exp(y) * x)
    got = A.eval_derivative(f, (1.0, 0.0, 0.0), (1.0, 1.0, 0.0))
    h = 1e-6
    fd = (f((1 + h, h, 0)) - f((1 - h, -h, 0)))[0] / (2 * h)
    assert got == pytest.approx(2.0, rel=1e-14)
    assert got == pytest.approx(fd, rel=1e-8)


def test_eval_rejects_points_outside_chart():
    ch = A.Chart("C", A.Box((0, 0, 0), (1, 1, 1)))
    with pytest.raises(OutOfDomain):
        A.eval_field(A.ScalarField("C", x), (2.0, 0.5, 0.5), ch)


def test_transition_jacobian_examples(rng):
    box = A.Box((-1, -1, -1), (1, 1, 1))
    ident = A.SmoothMap("C", "C", (x, y, z), box, box)
    assert np.array_equal(A.transition_jacobian(ident, (0.1, 0.2, 0.3)), np.eye(3))
    M = np.array([[2, 1, 0], [1, 1, 0], [0, 0, 1]], float)
    lin = A.SmoothMap("C", "D", (2 * x + y, x + y, z), box, A.Box((-3, -2, -1), (3, 2, 1)))
    for p in rng.uniform(-1, 1, (5, 3)):
        assert np.array_equal(A.transition_jacobian(lin, p), M)
    S3 = A.s3_hopf()
    m = next(t for t in S3.transitions if t.source == "A" and t.target == "B")
    p = np.array([1.05, 0.7, 2.1])
    J = A.transition_jacobian(m, p, S3)
    fd = np.column_stack([(m(p + h) - m(p - h))[0] / 2e-6 for h in np.eye(3) * 1e-6])
    assert np.allclose(J, fd, atol=1e-8)
    assert abs(np.linalg.det(J)) > 0.5


def test_single_chart_and_flat_torus_pass():
    rep = A.check_atlas(A.solid_torus())
    assert rep.passed and rep.inverse_residual == 0 and rep.cocycle_residual == 0
    T = A.builtin_atlas("t3_flat")
    assert len(T.charts) == 1 and all(T.charts[0].periodic)
    assert A.check_atlas(T).passed


def test_corrupted_transition_fails_with_residual_near_perturbation():
    M = A.s3_hopf(core=False)
    ts = list(M.transitions)
    k = next(i for i, t in enumerate(ts) if t.source == "A")
    c = ts[k].components
    ts[k] = A.SmoothMap(ts[k].source, ts[k].target, (c[0] + 1e-3, c[1], c[2]),
                        ts[k].overlap_source, ts[k].overlap_target)
    bad = A.AtlasManifold("bad", M.charts, tuple(ts))
    rep = A.check_atlas(bad)
    assert not rep.passed
    assert rep.inverse_residual == pytest.approx(1e-3, rel=1e-6)


def test_cat_map_eigenvalues():
    M = A.builtin_atlas("t3_hyperbolic", A=((2, 1), (1, 1)))
    fwd = M.transitions[0]
    J = A.transition_jacobian(fwd, (0.3, 0.4, 1.1), M)
    ev = np.sort(np.linalg.eigvals(J[:2, :2]).real)
    assert ev == pytest.approx([(3 - math.sqrt(5)) / 2, (3 + math.sqrt(5)) / 2], abs=1e-12)
    assert A.check_atlas(M).passed


@pytest.mark.parametrize("name", ["solid_torus", "t2_interval", "s3_hopf", "t3_hyperbolic", "t3_flat",
                                  "s2_times_s1"])
def test_builtin_atlases_pass(name):
    rep = A.check_atlas(A.builtin_atlas(name))
    assert rep.passed, rep.details
    assert rep.inverse_residual < 1e-9 and rep.cocycle_residual < 1e-9


def test_eigen_atlas_passes():
    assert A.check_atlas(A.t3_hyperbolic(eigen=True)).passed


def test_atlas_json_roundtrip(rng):
    M = A.s3_hopf()
    back = A.AtlasManifold.from_json(json.loads(json.dumps(M.to_json())))
    assert back.to_json() == M.to_json()
    for m, b in zip(M.transitions, back.transitions):
        p = m.overlap_source.random(20, rng)
        assert np.array_equal(m(p), b(p))


def test_core_overlap_covers_square_corners():
    M = A.s3_hopf()
    core = M.chart("A0")
    corner = np.array([[0.069, 0.069, 1.0]])
    assert core.contains(corner)[0]
    out = [t for t in M.transitions_from("A0") if t.overlap_source.contains(corner)[0]]
    assert out and out[0].target == "A"


def test_bad_parameters():
    with pytest.raises(InvalidParameter):
        A.builtin_atlas("nope")
    with pytest.raises(InvalidParameter):
        A.Chart("C", A.Box((0, 0, 0), (1, 1, 1)), dim=2)
    with pytest.raises(InvalidParameter):
        A.core_charts("A", 0.1, 0.05)


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50))
def test_reduce_is_idempotent_and_difference_wraps(a, b, c):
    ch = A.Chart("T", A.Box((0, 0, 0), (1, 2, 3)), (True, True, False))
    p = np.array([a, b, c])
    r = ch.reduce(p)
    assert np.array_equal(ch.reduce(r), r)
    d = ch.difference(p, r)
    assert np.all(np.abs(d[:2]) < 1e-9)
    assert d[2] == 0.0


@given(st.floats(0.031, 1.2), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_hopf_gluing_inverse_property(r, th, zz):
    M = A.s3_hopf()
    m = next(t for t in M.transitions if t.source == "A" and t.target == "B")
    p = np.array([[r, th, zz]])
    if not m.overlap_source.contains(p, (False, True, True))[0]:
        return
    inv = M.inverse_of(m)
    back = inv(M.chart("B").reduce(m(p)))
    assert np.max(np.abs(M.chart("A").difference(back, p))) < 1e-12
