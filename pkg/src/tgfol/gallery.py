"""Curated end-to-end examples: atlas, foliation, flow, metric and the
verification records each one is expected to reproduce."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import expr as E
from . import foliation as Fo
from . import metric as Mt
from . import geodesy as Gd
from .atlas import (DEFAULT_SEED, TWO_PI, AtlasManifold, Box, VectorField, check_atlas, hyperbolic_eigen,
                    s2_times_s1, s3_hopf, t3_flat, t3_hyperbolic)
from .errors import (ConstructionFailed, InvalidParameter, OddAttractiveCount, TGFolError)
from .foliation import FlowSpec, FoliationSpec, FrameData, TangencyLeaf
from .metric import MetricField, Region
from .topology import classify_tg_foliations

ENTRY_NAMES = ("s3_two_reeb_spacelike", "s3_turbulized_mixed", "s3_reeb_attractive_obstructed",
               "t3a_mixed", "circle_bundle_spun")
MODEL_NAMES = ("flat", "hyperbolic_leaf")
GOLDEN_DIR = Path(__file__).resolve().parent / "golden" / "v1"
OBSTRUCTED = "obstructed (odd attractive count)"

TOLERANCES = {"max_II": 1e-6, "leaf_type_law": 1e-9, "metric_transitions": 1e-9, "quasi_fibered": 1e-7,
              "lambda": 1e-9, "c_drift": 1e-8}


@dataclass(frozen=True)
class TypeRegion:
    """Box whose leaves should all have one causal type."""

    label: str
    chart: str
    box: Box


@dataclass(frozen=True)
class CompletenessProbe:
    leaf: str
    loop: Gd.HolonomyLoop
    t_max: float = 20.0


@dataclass
class GalleryEntry:
    name: str
    atlas: AtlasManifold
    foliation: FoliationSpec
    flow: FlowSpec
    metric: MetricField | None
    frames: dict[str, FrameData]
    recipe: dict
    regions: tuple[TypeRegion, ...] = ()
    blends: tuple[Mt.BlendPiece, ...] = ()
    U: tuple[Region, ...] = ()
    invariant_direction: dict[str, VectorField] = field(default_factory=dict)
    completeness: tuple[CompletenessProbe, ...] = ()
    classification: tuple[int, int] | None = None
    compatibility: dict = field(default_factory=dict)

    @property
    def leaves(self) -> dict[str, TangencyLeaf]:
        return {l.name: l for l in self.foliation.tangency_leaves}


# shared ingredients --------------------------------------------------------------------------
def gamma_P_profile() -> E.Expr:
    """g(P, P) = u = r^2 near the core (so the metric closes up smoothly) and 1 from r = 0.5 on."""
    r = E.var(0)
    u = r * r
    h, one_minus = Fo.step_between(u, 0.01, 0.25)
    return one_minus * u + h


def _step(x: E.Expr, lo: float, hi: float) -> E.Expr:
    return Fo.step_between(x, lo, hi)[0]


def _leaf_projection(F: FoliationSpec, chart: str, e) -> VectorField:
    """Euclidean projection of the constant field e onto ker w."""
    w = F.forms[chart].components
    e = [E.as_expr(c) for c in e]
    we = sum((a * b for a, b in zip(w, e)), E.ZERO)
    n2 = sum((a * a for a in w), E.ZERO)
    return VectorField.of(chart, [ei - we * wi / n2 for ei, wi in zip(e, w)])


def _radial(chart: str) -> VectorField:
    return VectorField.of(chart, (1.0, 0.0, 0.0))


def _stage(name: str, fn: Callable):
    try:
        return fn()
    except ConstructionFailed:
        raise
    except TGFolError as exc:
        raise ConstructionFailed(f"{type(exc).__name__}: {exc}", stage=name) from exc


def _blended_metric(F: FoliationSpec, phi: FlowSpec, frames: dict[str, FrameData], P: dict[str, VectorField],
                    gamma: dict, design: dict, blends: list[tuple[TangencyLeaf, float, float]],
                    samples: int) -> tuple[MetricField, tuple[Mt.BlendPiece, ...]]:
    """Tangency metric (beta = b) near the leaves, design-field transverse metric elsewhere."""
    local, glob = {}, {}
    for cid, fr in frames.items():
        local.update(Mt.build_tangency_metric(fr, fr.b, gamma[cid], P[cid]).entries)
        glob.update(Mt.build_frame_transverse_metric(fr, gamma[cid], P[cid], design[cid]).entries)
    g_loc = MetricField(local, "lorentzian", "tangency")
    g_glob = MetricField(glob, "lorentzian", "transverse")
    pieces = tuple(Mt.BlendPiece(g_loc, leaf, inner, outer) for leaf, inner, outer in blends)
    return Mt.glue_metrics(pieces, g_glob, phi, F, samples=samples), pieces


def _check_adapted(leaves, frames, atlas):
    for leaf in leaves:
        fr = frames[leaf.chart]
        rep = Fo.check_adapted(leaf, fr, fr.b, E.ONE, atlas=atlas)
        if not rep.passed:
            raise ConstructionFailed(f"leaf {leaf.name} is not adapted: {rep.reason}", stage="adapted")


# S^3 --------------------------------------------------------------------------------------------
def _s3_foliation(sigma_A: int, sigma_B: int) -> tuple[AtlasManifold, FoliationSpec]:
    M = s3_hopf()
    A = Fo.reeb_solid_torus(orientation=sigma_A, atlas=M, chart="A")
    B = Fo.reeb_solid_torus(orientation=sigma_B, atlas=M, chart="B", coorientation=-1)
    G = Fo.glue_foliations(M, [Fo.Piece.single(A, "A", E.var(0), 1.0), Fo.Piece.single(B, "B", E.var(0), 1.0)])
    return M, G


def _hopf_flow(M: AtlasManifold) -> FlowSpec:
    return Fo.attach_core_flow(FlowSpec(M, {c: VectorField.of(c, (0.0, 1.0, 1.0)) for c in "AB"}))


def _s3_frames(F, phi):
    return {c: Fo.frame_fields(F, phi, _radial(c), c) for c in "AB"}


def _s3_P(F):
    return {c: _leaf_projection(F, c, (0.0, 1.0, -1.0)) for c in "AB"}


def _torus(chart: str = "A", name: str = "torus") -> TangencyLeaf:
    return TangencyLeaf(chart, E.var(0), 1.0, True, None, name)


def _s3_regions(extra=()) -> tuple[TypeRegion, ...]:
    base = (TypeRegion("reeb_B_interior", "B", Box((0.05, 0.0, 0.0), (0.85, TWO_PI, TWO_PI))),)
    return tuple(extra) + base


def _finish_s3(name, M, F, phi, frames, metric, recipe, **kw) -> GalleryEntry:
    return GalleryEntry(name, M, F, phi, metric, frames, recipe, classification=(0, 1), **kw)


def build_s3_two_reeb_spacelike(samples: int = 10_000) -> GalleryEntry:
    """Two Reeb components turned against each other: the torus is a
    non-attractive tangency leaf and every other leaf is spacelike."""
    M, G = _stage("foliation", lambda: _s3_foliation(-1, 1))
    F = Fo.attach_core_forms(replace(G, tangency_leaves=(_torus(),)))
    phi = _hopf_flow(M)
    frames = _stage("frames", lambda: _s3_frames(F, phi))
    _stage("adapted", lambda: _check_adapted([_torus("A"), _torus("B", "torus_B")], frames, M))
    gam = gamma_P_profile()
    blends = [(_torus("A"), 0.05, 0.12), (_torus("B", "torus_B"), 0.05, 0.12)]
    g, pieces = _stage("metric", lambda: _blended_metric(F, phi, frames, _s3_P(F), {"A": gam, "B": gam},
                                                        {"A": "space", "B": "space"}, blends, samples))
    g = _stage("core", lambda: Mt.attach_core_metric(g, M))
    recipe = {"pieces": [{"reeb": "A", "orientation": -1}, {"reeb": "B", "orientation": 1, "coorientation": -1}],
              "flow": "d_theta + d_z", "local": {"beta": "b", "quotient": 1, "gamma_P": "phi(r^2)"},
              "global": {"design": "space"}, "zeta": {"inner": 0.05, "outer": 0.12}}
    frames_by_leaf = {"torus": frames["A"]}
    compat = _compatibility(F, phi, frames_by_leaf, (), {})
    regions = _s3_regions([TypeRegion("reeb_A_interior", "A", Box((0.05, 0.0, 0.0), (0.85, TWO_PI, TWO_PI)))])
    probe = CompletenessProbe("torus", Gd.HolonomyLoop([], 0, np.array([1.0, 0.5, 0.5]), "A"))
    return _finish_s3("s3_two_reeb_spacelike", M, F, phi, {"A": frames["A"], "B": frames["B"], **frames_by_leaf},
                      g, recipe, regions=regions, blends=pieces, completeness=(probe,), compatibility=compat)


def _turbulized_design():
    r = E.var(0)
    dA = 1.0 - 2.0 * _step(r, 0.17, 0.23) + 2.0 * _step(r, 0.96, 1.04)
    dB = 1.0 - 2.0 * _step(r, 0.96, 1.04)
    return {"A": dA, "B": dB}


def build_s3_turbulized_mixed(samples: int = 10_000) -> GalleryEntry:
    """Reeb components with equal orientation plus a turned-over Reeb tube
    around the core of A: the leaves between the tube and the torus form a
    timelike T^2 x I band bounded by two attractive lightlike leaves."""
    M, G = _stage("foliation", lambda: _s3_foliation(1, 1))
    G = _stage("turbulize", lambda: Fo.turbulize(G, "A", 0.2, orientation=-1))
    tube = TangencyLeaf("A", E.var(0), 0.2, True, None, "tube")
    F = Fo.attach_core_forms(replace(G, tangency_leaves=(tube, _torus())))
    phi = _hopf_flow(M)
    frames = _stage("frames", lambda: _s3_frames(F, phi))
    _stage("adapted", lambda: _check_adapted([tube, _torus("A"), _torus("B", "torus_B")], frames, M))
    frames_by_leaf = {"tube": frames["A"], "torus": frames["A"]}
    U = (Region("A", Box((0.15, 0.0, 0.0), (1.05, TWO_PI, TWO_PI)), 0, "band"),)
    W = {"A": VectorField.of("A", (0.0, 1.0, -1.0))}
    compat = _compatibility(F, phi, frames_by_leaf, U, W)
    gam = gamma_P_profile()
    blends = [(tube, 0.04, 0.09), (_torus("A"), 0.05, 0.12), (_torus("B", "torus_B"), 0.05, 0.12)]
    g, pieces = _stage("metric", lambda: _blended_metric(F, phi, frames, _s3_P(F), {"A": gam, "B": gam},
                                                        _turbulized_design(), blends, samples))
    g = _stage("core", lambda: Mt.attach_core_metric(g, M))
    recipe = {"pieces": [{"reeb": "A", "orientation": 1}, {"reeb": "B", "orientation": 1, "coorientation": -1}],
              "turbulize": {"chart": "A", "radius": 0.2, "orientation": -1},
              "flow": "d_theta + d_z", "local": {"beta": "b", "quotient": 1, "gamma_P": "phi(r^2)"},
              "global": {"design": {"A": "+1 | -1 on (0.2, 1) | +1", "B": "+1 | -1 beyond r = 1"}},
              "zeta": {"tube": [0.04, 0.09], "torus": [0.05, 0.12]}, "U": "0.15 < r < 1.05 in A"}
    regions = _s3_regions([TypeRegion("inner_tube", "A", Box((0.05, 0.0, 0.0), (0.14, TWO_PI, TWO_PI))),
                           TypeRegion("band", "A", Box((0.3, 0.0, 0.0), (0.88, TWO_PI, TWO_PI)))])
    return _finish_s3("s3_turbulized_mixed", M, F, phi, {"A": frames["A"], "B": frames["B"], **frames_by_leaf},
                      g, recipe, regions=regions, blends=pieces, U=U, invariant_direction=W, compatibility=compat)


def build_s3_reeb_attractive_obstructed(samples: int = 10_000) -> GalleryEntry:
    """Turning one component over makes the torus attractive; alone it has
    no partner, so no compatible U exists and no metric is attempted."""
    M, G = _stage("foliation", lambda: _s3_foliation(1, 1))
    F = Fo.attach_core_forms(replace(G, tangency_leaves=(_torus(),)))
    phi = _hopf_flow(M)
    frames = _stage("frames", lambda: _s3_frames(F, phi))
    compat = _compatibility(F, phi, {"torus": frames["A"]}, (), {})
    recipe = {"pieces": [{"reeb": "A", "orientation": 1}, {"reeb": "B", "orientation": 1, "coorientation": -1}],
              "flow": "d_theta + d_z", "metric": None}
    return _finish_s3("s3_reeb_attractive_obstructed", M, F, phi,
                      {"A": frames["A"], "B": frames["B"], "torus": frames["A"]}, None, recipe,
                      compatibility=compat)


def _compatibility(F, phi, frames_by_leaf, U, W) -> dict:
    try:
        rep = Mt.check_globally_compatible(F, phi, frames_by_leaf, U, W)
        return rep.to_json()
    except OddAttractiveCount as exc:
        kinds = {l.name: Fo.attractiveness(l, frames_by_leaf[l.name], atlas=F.atlas) for l in F.tangency_leaves}
        return {"compatible": False, "attractive": dict(sorted(kinds.items())), "crossings": [],
                "verdict": OBSTRUCTED, "error": type(exc).__name__}


# T^3_A ----------------------------------------------------------------------------------------------
T3A_FIBERS = {"fiber_0.31": (0.31, 0.025, 0.05), "fiber_0.45": (0.45, 0.04, 0.08), "fiber_0.8": (0.8, 0.04, 0.08)}


def t3a_profiles():
    """(C(s), m(s)) for w = C lam^s w_u + m ds.

    C has a double zero at s = 0.31 and simple zeros at 0.45 and 0.8, with
    C = 1 and m = 0 outside [0.27, 0.9]; m = 1 wherever C = 0.
    """
    s = E.var(2)
    H5, H6 = _step(s, 0.27, 0.31), _step(s, 0.31, 0.35)
    H1, H2 = _step(s, 0.36, 0.45), _step(s, 0.45, 0.54)
    H3, H4 = _step(s, 0.7, 0.8), _step(s, 0.8, 0.9)
    hp = Fo.HALF_PI
    G0 = E.sin(hp * (1.0 - H5)) + E.sin(hp * H6) - 1.0
    G1 = E.sin(hp * (1.0 - H1)) - E.sin(hp * H2)
    G2 = -E.sin(hp * (1.0 - H3)) + E.sin(hp * H4)
    C = G0 + G1 + G2 + 1.0
    m = E.sin(hp * (H5 - H6)) + E.sin(hp * (H1 - H2)) + E.sin(hp * (H3 - H4))
    return C, m


def build_t3a_mixed(samples: int = 10_000, A=((2, 1), (1, 1))) -> GalleryEntry:
    """Torus bundle with a fibre-tangent flow X = lam^-s e_u and compact
    tangency fibres: one non-attractive, two attractive paired inside U."""
    M = _stage("atlas", lambda: t3_hyperbolic(A))
    lam, _, eu, es = hyperbolic_eigen(A)
    Einv = np.linalg.inv(np.column_stack([eu, es]))
    s = E.var(2)
    L = E.exp(math.log(lam) * s)
    Li = E.exp(-math.log(lam) * s)
    C, m = t3a_profiles()
    w = VectorField.of("C", (C * L * float(Einv[0, 0]), C * L * float(Einv[0, 1]), m))
    leaves = tuple(TangencyLeaf("C", E.var(2), lvl, True, None, name) for name, (lvl, _, _) in T3A_FIBERS.items())
    F = FoliationSpec(M, {"C": w}, leaves, 1, "t3a_mixed", {"A": [list(r) for r in A]})
    phi = FlowSpec(M, {"C": VectorField.of("C", (Li * float(eu[0]), Li * float(eu[1]), 0.0), nonvanishing=True)})
    fr = _stage("frames", lambda: Fo.frame_fields(F, phi, VectorField.of("C", (0.0, 0.0, 1.0)), "C"))
    _stage("adapted", lambda: _check_adapted(leaves, {"C": fr}, M))
    P = VectorField.of("C", (L * float(es[0]), L * float(es[1]), 0.0))
    frames_by_leaf = {name: fr for name in T3A_FIBERS}
    U = (Region("C", Box((0.0, 0.0, 0.4), (1.0, 1.0, 0.85)), 2, "paired fibres"),)
    W = {"C": P}
    compat = _compatibility(F, phi, frames_by_leaf, U, W)
    design = -1.0 + 2.0 * _step(s, 0.42, 0.48) - 2.0 * _step(s, 0.77, 0.83)
    blends = [(leaf, T3A_FIBERS[leaf.name][1], T3A_FIBERS[leaf.name][2]) for leaf in leaves]
    g, pieces = _stage("metric", lambda: _blended_metric(F, phi, {"C": fr}, {"C": P}, {"C": 1.0}, {"C": design},
                                                        blends, samples))
    recipe = {"A": [list(r) for r in A], "flow": "lam^-s e_u", "P": "lam^s e_s",
              "local": {"beta": "b", "quotient": 1, "gamma_P": 1},
              "global": {"design": "-1 outside [0.45, 0.8], +1 inside"},
              "zeta": {k: [v[1], v[2]] for k, v in T3A_FIBERS.items()}, "U": "0.4 < s < 0.85"}
    regions = (TypeRegion("timelike_region", "C", Box((0.0, 0.0, 0.05), (1.0, 1.0, 0.25))),
               TypeRegion("spacelike_region", "C", Box((0.0, 0.0, 0.55), (1.0, 1.0, 0.72))))
    probe = CompletenessProbe("fiber_0.31", Gd.HolonomyLoop([], 2, np.array([0.3, 0.6, 0.31]), "C"), t_max=10.0)
    return GalleryEntry("t3a_mixed", M, F, phi, g, {"C": fr, **frames_by_leaf}, recipe, regions=regions,
                        blends=pieces, U=U, invariant_direction=W, completeness=(probe,), classification=None,
                        compatibility=compat)


# circle bundle -------------------------------------------------------------------------------------
def build_circle_bundle_spun(samples: int = 10_000) -> GalleryEntry:
    """S^2 x S^1 as a circle bundle: the horizontal foliation of the piece over
    an annulus, spun at both boundary tori and capped by two Reeb fillings."""
    M = _stage("atlas", lambda: s2_times_s1())
    T0 = FoliationSpec(M, {"T": Fo.OneForm.of("T", (0.0, 0.0, 1.0))}, (), 1, "horizontal")
    T1 = _stage("spin", lambda: Fo.spin_to_boundary(Fo.spin_to_boundary(T0, "T", 1.0, side="outer"),
                                                    "T", 2.0, side="inner"))
    D = Fo.reeb_solid_torus(orientation=1, atlas=M, chart="D")
    Efill = Fo.reeb_solid_torus(orientation=-1, atlas=M, chart="E", coorientation=-1)
    r = E.var(0)
    pieces = [Fo.Piece.single(D, "D", r, 1.0), Fo.Piece.single(Efill, "E", r, 1.0),
              Fo.Piece(T1, "T", ((r, 1.0, 1), (r, 2.0, -1)))]
    G = _stage("glue", lambda: Fo.glue_foliations(M, pieces))
    leaves = (TangencyLeaf("T", r, 1.0, True, None, "torus_1"), TangencyLeaf("T", r, 2.0, True, None, "torus_2"))
    F = Fo.attach_core_forms(replace(G, tangency_leaves=leaves))
    phi = Fo.attach_core_flow(FlowSpec(M, {c: VectorField.of(c, (0.0, 0.0, -1.0)) for c in "DTE"}))
    frames = _stage("frames", lambda: {c: Fo.frame_fields(F, phi, _radial(c), c) for c in "DTE"})
    _stage("adapted", lambda: _check_adapted(leaves + (TangencyLeaf("D", r, 1.0, True, None, "torus_D"),
                                                       TangencyLeaf("E", r, 1.0, True, None, "torus_E")), frames, M))
    gam = gamma_P_profile()
    P = {c: VectorField.of(c, (0.0, 1.0, 0.0)) for c in "DTE"}

    def metric():
        ent = {}
        for c in "DTE":
            ent.update(Mt.build_tangency_metric(frames[c], frames[c].b, gam, P[c]).entries)
        return Mt.attach_core_metric(MetricField(ent, "lorentzian", "tangency"), M)

    g = _stage("metric", metric)
    frames_by_leaf = {"torus_1": frames["T"], "torus_2": frames["T"]}
    compat = _compatibility(F, phi, frames_by_leaf, (), {})
    recipe = {"pieces": [{"reeb": "D", "orientation": 1}, {"reeb": "E", "orientation": -1, "coorientation": -1},
                         {"horizontal": "T", "spun": [[1.0, "outer"], [2.0, "inner"]]}],
              "flow": "-d_z (the fibre)", "metric": {"beta": "b", "quotient": 1, "gamma_P": "phi(r^2)",
                                                    "blend": "none: b >= 0 everywhere"}}
    regions = (TypeRegion("filling_D", "D", Box((0.05, 0.0, 0.0), (0.85, TWO_PI, TWO_PI))),
               TypeRegion("annulus_piece", "T", Box((1.15, 0.0, 0.0), (1.85, TWO_PI, TWO_PI))),
               TypeRegion("filling_E", "E", Box((0.05, 0.0, 0.0), (0.85, TWO_PI, TWO_PI))))
    probe = CompletenessProbe("torus_1", Gd.HolonomyLoop([], 0, np.array([1.0, 0.5, 0.5]), "T"))
    return GalleryEntry("circle_bundle_spun", M, F, phi, g, {**frames, **frames_by_leaf}, recipe, regions=regions,
                        completeness=(probe,), classification=(0, 0), compatibility=compat)


_BUILDERS = {
    "s3_two_reeb_spacelike": build_s3_two_reeb_spacelike,
    "s3_turbulized_mixed": build_s3_turbulized_mixed,
    "s3_reeb_attractive_obstructed": build_s3_reeb_attractive_obstructed,
    "t3a_mixed": build_t3a_mixed,
    "circle_bundle_spun": build_circle_bundle_spun,
}


def build_entry(name: str, samples: int = 10_000) -> GalleryEntry:
    if name not in _BUILDERS:
        raise InvalidParameter(f"unknown entry {name!r}", known=list(ENTRY_NAMES))
    entry = _BUILDERS[name](samples=samples)
    rep = check_atlas(entry.atlas)
    if not rep.passed:
        raise ConstructionFailed("atlas check failed", stage="atlas")
    fcheck = entry.foliation.check()
    if not fcheck["passed"]:
        raise ConstructionFailed(f"foliation check failed: {fcheck}", stage="foliation")
    if entry.metric is not None:
        sig = Mt.check_signature(entry.metric, entry.atlas, samples)
        if not sig.passed:
            raise ConstructionFailed(f"signature check failed: {sig.to_json()}", stage="signature")
    return entry


# models outside the gallery ----------------------------------------------------------------------------
@dataclass
class LeafModel:
    """A single lightlike leaf with a metric, used for geodesic and completeness runs."""

    name: str
    atlas: AtlasManifold
    foliation: FoliationSpec
    metric: MetricField
    leaf: TangencyLeaf
    loop: Gd.HolonomyLoop
    start: np.ndarray
    velocity: np.ndarray
    flow: FlowSpec | None = None


def hyperbolic_leaf_model(A=((2, 1), (1, 1)), eps: float = 1.0, half_width: float = 1.0) -> LeafModel:
    """g = 2 lam^s du ds + lam^-2s dv^2 + eps lam^2s u^2 ds^2 on the eigen chart of T^3_A.

    The leaves are u = const; u = 0 is lightlike with neighbours of type
    sign(eps), and the closed null geodesic (0, 0, s(t)) has linear holonomy
    lam (the expanding eigenvalue of A).
    """
    M = t3_hyperbolic(A, eigen=True, half_width=half_width)
    lam = M.metadata["lambda_u"]
    u, v, s = E.coords()
    L = E.exp(math.log(lam) * s)
    L2i = E.exp(-2.0 * math.log(lam) * s)
    g = MetricField({"E": (0.0, 0.0, L, L2i, 0.0, float(eps) * L * L * u * u)}, "lorentzian", "hyperbolic_leaf")
    leaf = TangencyLeaf("E", u, 0.0, True, None, "stable_leaf")
    F = FoliationSpec(M, {"E": Fo.OneForm.of("E", (1.0, 0.0, 0.0))}, (leaf,), 1, "u_levels")
    fwd = next(m for m in M.transitions if m.jacobian(np.array([[0.0, 0.0, 1.1]]))[0][2, 2] == 1.0
               and m.overlap_source.lower[2] >= 1.0)
    loop = Gd.HolonomyLoop([(fwd, np.array([0.0, 0.0, 1.1]))], 0, np.array([0.0, 0.0, 1.1]), "E")
    return LeafModel("hyperbolic_leaf", M, F, g, leaf, loop, np.array([0.0, 0.0, 0.5]), np.array([0.0, 0.0, 1.0]))


def hyperbolic_loop_time(lam: float, sdot0: float = 1.0) -> float:
    """Affine time of the first loop of s'' = -ln(lam) s'^2 from s'(0) = sdot0 > 0."""
    return (lam - 1.0) / (math.log(lam) * sdot0)


def flat_model(period: float = 4.0) -> LeafModel:
    """Flat T^3 with g = dx^2 + dy^2 - dz^2 and the leaves z = const."""
    M = t3_flat(period)
    g = MetricField({"T": (1.0, 0.0, 0.0, 1.0, 0.0, -1.0)}, "lorentzian", "flat")
    F = Fo.product_foliation(M, 2)
    leaf = TangencyLeaf("T", E.var(2), 0.0, True, None, "z0")
    return LeafModel("flat", M, F, g, leaf, Gd.HolonomyLoop([], 2, np.zeros(3), "T"), np.zeros(3),
                     np.array([1.0, 0.0, 0.0]))


def build_model(name: str) -> LeafModel:
    if name == "flat":
        return flat_model()
    if name == "hyperbolic_leaf":
        return hyperbolic_leaf_model()
    raise InvalidParameter(f"unknown model {name!r}", known=list(MODEL_NAMES))


# verification ---------------------------------------------------------------------------------------------
def _region_types(entry: GalleryEntry, samples: int, rng) -> dict[str, str]:
    out = {}
    for reg in entry.regions:
        pts = reg.box.random(samples, rng)
        rep = Mt.leaf_type(entry.metric, entry.foliation, pts, reg.chart, strict=False)
        kinds = sorted(set(rep.types))
        out[reg.label] = kinds[0] if len(kinds) == 1 else "mixed:" + ",".join(kinds)
    for name, leaf in entry.leaves.items():
        pts = leaf.project(entry.atlas.chart(leaf.chart).domain.random(samples, rng, inset=1e-6))
        rep = Mt.leaf_type(entry.metric, entry.foliation, pts, leaf.chart, strict=False)
        kinds = sorted(set(rep.types))
        out[name] = kinds[0] if len(kinds) == 1 else "mixed:" + ",".join(kinds)
    return out


def leaf_type_law(entry: GalleryEntry, samples: int = 10_000, seed: int = DEFAULT_SEED) -> float:
    """max |g(Y, Y) beta - b^2| over the plateaus where the tangency metric is used (beta = b)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    pieces = entry.blends or tuple(Mt.BlendPiece(entry.metric, leaf, 0.1, 0.2) for leaf in entry.leaves.values())
    for p in pieces:
        chart = entry.atlas.chart(p.leaf.chart)
        base = p.leaf.project(chart.domain.random(samples, rng, inset=1e-6))
        pts = Mt._offset_many(p.leaf, base, p.inner * (2.0 * rng.random(len(base)) - 1.0))
        pts = pts[chart.contains(pts)]
        fr = entry.frames[p.leaf.chart]
        v = fr.values(pts)
        G = entry.metric.values(p.leaf.chart, pts)
        gyy = np.einsum("ni,nij,nj->n", v["Y"], G, v["Y"])
        worst = max(worst, float(np.max(np.abs(gyy * v["b"] - v["b"] ** 2))))
    return worst


def _completeness(entry: GalleryEntry) -> dict:
    out = {}
    for probe in entry.completeness:
        leaf = entry.leaves[probe.leaf]
        verdict = Gd.null_completeness(entry.metric, entry.foliation, leaf, probe.loop, loops=1,
                                       t_max=probe.t_max, flow=entry.flow)
        out[probe.leaf] = verdict.to_json()
    return out


def verify(entry: GalleryEntry, samples: int = 10_000, seed: int = DEFAULT_SEED) -> dict:
    """Run the verification suite and return the observed record (no comparison)."""
    rng = np.random.default_rng(seed)
    obs: dict = {"entry": entry.name}
    obs["atlas_passed"] = bool(check_atlas(entry.atlas, seed=seed).passed)
    fcheck = entry.foliation.check()
    obs["frobenius"] = float(fcheck["frobenius"])
    obs["attractiveness"] = dict(sorted(entry.compatibility.get("attractive", {}).items()))
    obs["compatibility"] = entry.compatibility.get("verdict")
    if entry.classification is not None:
        g_, e_ = entry.classification
        obs["classification"] = {"genus": g_, "euler": e_,
                                 **{k: v.status for k, v in classify_tg_foliations(g_, e_).items()}}
    else:
        obs["classification"] = None
    if entry.metric is None:
        return obs
    g = entry.metric
    sig = Mt.check_signature(g, entry.atlas, samples, seed)
    obs["signature_passed"] = bool(sig.passed)
    obs["metric_transitions"] = Mt.check_transitions(g, entry.atlas, seed=seed)
    obs["quasi_fibered"] = Mt.check_quasi_fibered(g, entry.flow, seed=seed).residual
    obs["max_II"] = Gd.max_second_fundamental_form(g, entry.foliation, samples, seed)["max_II"]
    obs["leaf_type_law"] = leaf_type_law(entry, samples, seed)
    obs["leaf_types"] = _region_types(entry, min(samples, 2000), rng)
    obs["completeness"] = _completeness(entry)
    return obs


def expected_from(obs: dict) -> dict:
    """The golden record derived from an observed one: enums verbatim, numerics as bounds."""
    exp = {k: obs[k] for k in ("entry", "attractiveness", "compatibility", "classification") if k in obs}
    if "leaf_types" in obs:
        exp["leaf_types"] = obs["leaf_types"]
        exp["completeness"] = {k: {"complete": v["complete"], "lambda": v["lambda"]}
                               for k, v in obs["completeness"].items()}
        exp["tolerances"] = dict(TOLERANCES)
    return exp


def compare(obs: dict, exp: dict) -> list[str]:
    """Mismatches between an observed record and the expected one."""
    bad = []
    for key in ("attractiveness", "compatibility", "classification", "leaf_types"):
        if key in exp and obs.get(key) != exp[key]:
            bad.append(f"{key}: expected {exp[key]!r}, got {obs.get(key)!r}")
    if not obs.get("atlas_passed", False):
        bad.append("atlas check failed")
    if obs.get("frobenius", 1.0) > 1e-9:
        bad.append(f"frobenius residual {obs.get('frobenius')}")
    tol = exp.get("tolerances")
    if tol:
        if not obs.get("signature_passed"):
            bad.append("signature check failed")
        for key in ("max_II", "leaf_type_law", "metric_transitions", "quasi_fibered"):
            if not obs.get(key, math.inf) < tol[key]:
                bad.append(f"{key} = {obs.get(key)} exceeds {tol[key]}")
        for leaf, want in exp.get("completeness", {}).items():
            got = obs.get("completeness", {}).get(leaf)
            if got is None:
                bad.append(f"completeness of {leaf} missing")
                continue
            if got["complete"] != want["complete"] or abs(got["lambda"] - want["lambda"]) > tol["lambda"]:
                bad.append(f"completeness of {leaf}: expected {want}, got complete={got['complete']} "
                           f"lambda={got['lambda']}")
            if got["c_drift"] > tol["c_drift"]:
                bad.append(f"conserved quantity drift {got['c_drift']} on {leaf}")
    return bad


def golden_path(name: str, root: Path | None = None) -> Path:
    return (root or GOLDEN_DIR) / f"{name}.json"


def load_golden(name: str, root: Path | None = None) -> dict:
    path = golden_path(name, root)
    if not path.exists():
        raise InvalidParameter(f"no golden record for {name!r} at {path}")
    return json.loads(path.read_text())


def verify_entry(name: str, samples: int = 10_000, seed: int = DEFAULT_SEED, regenerate: bool = False,
                 root: Path | None = None, tolerances: dict | None = None) -> dict:
    """Build, verify and compare against the golden record (rewritten only with ``regenerate``)."""
    entry = build_entry(name, samples)
    obs = verify(entry, samples, seed)
    if regenerate:
        from .io import write_json
        write_json(golden_path(name, root), expected_from(obs))
    exp = load_golden(name, root)
    if tolerances and "tolerances" in exp:
        exp["tolerances"] = {**exp["tolerances"], **tolerances}
    bad = compare(obs, exp)
    return {"entry": name, "passed": not bad, "mismatches": bad, "observed": obs}
