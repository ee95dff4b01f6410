"""Codimension-1 foliations, flows, and the frame data near tangency leaves.

Foliations are stored as per-chart defining 1-forms; Reeb components have no
global first integral, so tangency leaves carry an explicit locus
``{f = c}`` on top of the form.

Profile functions use the flat primitive ``bump``; every construction here
(Reeb component, spinning, turbulization) is rotationally symmetric in a
polar chart ``(r, theta, z)`` whose first coordinate is the radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import expr as E
from .atlas import AtlasManifold, Chart, OneForm, SmoothMap, VectorField, DEFAULT_SEED
from .errors import (AmbiguousSign, DegenerateFrame, FormMismatch, InvalidParameter, MixedLeaf,
                     NoCollar, NotQuasiFibered, NotTransverseInTube, OrientationMismatch,
                     QuotientUndefined, TGFolError)

DEFAULT_FLATNESS = 0.2
HALF_PI = 0.5 * math.pi
# flat profiles underflow to exact zero this close to a tangency locus
LOCUS_BAND = 1e-3


@dataclass(frozen=True, eq=False)
class TangencyLeaf:
    chart: str
    locus: E.Expr
    level: float
    compact: bool = True
    transverse_field: VectorField | None = None
    name: str = ""

    def value(self, pts) -> np.ndarray:
        return E.evaluate(self.locus, pts) - self.level

    def project(self, pts, iters: int = 8) -> np.ndarray:
        """Newton-project points onto ``{f = c}`` along the coordinate gradient."""
        p = np.array(np.atleast_2d(pts), dtype=float)
        fd = E.compile_dual([self.locus])
        for _ in range(iters):
            V, G = fd(p[:, 0], p[:, 1], p[:, 2])
            g = G[0].T
            n2 = np.sum(g * g, axis=1)
            if np.any(n2 < 1e-24):
                raise TGFolError("df = 0 on the tangency locus", witness=p[n2 < 1e-24][0])
            p -= ((V[0] - self.level) / n2)[:, None] * g
        return p

    def offset(self, pts, delta: float, iters: int = 8) -> np.ndarray:
        """Move locus points to the level set ``f = c + delta``."""
        shifted = replace(self, level=self.level + delta)
        return shifted.project(pts, iters)

    def to_json(self) -> dict:
        d = {"chart": self.chart, "locus": E.to_sexpr(self.locus), "level": self.level,
             "compact": self.compact, "name": self.name}
        if self.transverse_field is not None:
            d["transverse_field"] = self.transverse_field.to_json()
        return d

    @classmethod
    def from_json(cls, d) -> "TangencyLeaf":
        Z = d.get("transverse_field")
        return cls(d["chart"], E.parse_sexpr(d["locus"]), float(d["level"]), bool(d["compact"]),
                   VectorField.from_json(Z) if Z else None, d.get("name", ""))


@dataclass(frozen=True, eq=False)
class FlowSpec:
    atlas: AtlasManifold
    fields: dict[str, VectorField]
    orientation: int = 1

    def X(self, chart: str) -> VectorField:
        return self.fields[chart]

    def check(self, samples: int = 200, seed: int = DEFAULT_SEED) -> dict:
        rng = np.random.default_rng(seed)
        min_norm = np.inf
        angle = 0.0
        for cid, X in self.fields.items():
            pts = self.atlas.chart(cid).domain.random(samples, rng)
            v = X(pts)
            min_norm = min(min_norm, float(np.min(np.sum(v * v, axis=1))))
        for m in self.atlas.transitions:
            if m.source not in self.fields or m.target not in self.fields:
                continue
            pts = m.overlap_source.random(samples, rng)
            J = m.jacobian(pts)
            push = np.einsum("nij,nj->ni", J, self.fields[m.source](pts))
            tgt = self.fields[m.target](self.atlas.chart(m.target).reduce(m(pts)))
            pn = push / np.linalg.norm(push, axis=1)[:, None]
            tn = tgt / np.linalg.norm(tgt, axis=1)[:, None]
            sin = np.linalg.norm(np.cross(pn, tn), axis=1)
            ang = np.where(np.sum(pn * tn, axis=1) > 0, np.arcsin(np.clip(sin, 0.0, 1.0)), np.pi)
            angle = max(angle, float(np.max(ang)))
        return {"min_norm_sq": min_norm, "max_angle": angle,
                "passed": min_norm > 1e-12 and angle < 1e-9}

    def to_json(self) -> dict:
        return {"orientation": self.orientation, "fields": {k: v.to_json() for k, v in self.fields.items()}}


@dataclass(frozen=True, eq=False)
class FoliationSpec:
    atlas: AtlasManifold
    forms: dict[str, OneForm]
    tangency_leaves: tuple[TangencyLeaf, ...] = ()
    orientation: int = 1
    name: str = ""
    metadata: dict = field(default_factory=dict)

    def form(self, chart: str) -> OneForm:
        return self.forms[chart]

    def omega_of(self, chart: str, V: VectorField | Sequence) -> E.Expr:
        comps = V.components if isinstance(V, VectorField) else tuple(E.as_expr(c) for c in V)
        return sum((a * b for a, b in zip(self.forms[chart].components, comps)), E.ZERO)

    def frobenius_residual(self, chart: str, pts) -> np.ndarray:
        """|w . curl w| / |w|^2, the scale-free size of w ^ dw in three dimensions."""
        w, J = self.forms[chart].with_dual(pts)
        curl = np.stack([J[:, 2, 1] - J[:, 1, 2], J[:, 0, 2] - J[:, 2, 0], J[:, 1, 0] - J[:, 0, 1]], axis=1)
        return np.abs(np.sum(w * curl, axis=1)) / np.sum(w * w, axis=1)

    def check(self, samples: int = 1000, seed: int = DEFAULT_SEED) -> dict:
        rng = np.random.default_rng(seed)
        frob, min_norm, pull = 0.0, np.inf, 0.0
        for cid, w in self.forms.items():
            pts = self.atlas.chart(cid).domain.random(samples, rng)
            vals = w(pts)
            min_norm = min(min_norm, float(np.min(np.sum(vals * vals, axis=1))))
            frob = max(frob, float(np.max(self.frobenius_residual(cid, pts))))
        for m in self.atlas.transitions:
            if m.source in self.forms and m.target in self.forms:
                pull = max(pull, form_agreement(self, m, samples, rng)[0])
        return {"frobenius": frob, "min_norm_sq": min_norm, "transition_residual": pull,
                "passed": frob < 1e-9 and min_norm > 1e-12 and pull < 1e-9}

    def to_json(self) -> dict:
        return {"name": self.name, "orientation": self.orientation,
                "forms": {k: v.to_json() for k, v in self.forms.items()},
                "tangency_leaves": [t.to_json() for t in self.tangency_leaves],
                "metadata": dict(self.metadata)}

    @classmethod
    def from_json(cls, atlas: AtlasManifold, d) -> "FoliationSpec":
        return cls(atlas, {k: VectorField.from_json(v) for k, v in d["forms"].items()},
                   tuple(TangencyLeaf.from_json(t) for t in d["tangency_leaves"]),
                   int(d.get("orientation", 1)), d.get("name", ""), dict(d.get("metadata", {})))


def flow_from_json(atlas: AtlasManifold, d) -> FlowSpec:
    return FlowSpec(atlas, {k: VectorField.from_json(v) for k, v in d["fields"].items()},
                    int(d.get("orientation", 1)))


def pullback(form: OneForm, m: SmoothMap) -> OneForm:
    """(psi^* w)_i = sum_j w_j(psi(x)) d_i psi_j(x), as expressions in source coordinates."""
    moved = [E.substitute(c, m.components) for c in form.components]
    comps = []
    for i in range(3):
        comps.append(sum((moved[j] * E.diff(m.components[j], i) for j in range(3)), E.ZERO))
    return OneForm(m.source, tuple(comps))


def form_agreement(F: FoliationSpec, m: SmoothMap, samples: int, rng) -> tuple[float, float, np.ndarray]:
    """Max angle-residual between w_source and psi^* w_target on the overlap and
    the minimal co-orientation cosine; returns (residual, min_cos, worst point)."""
    pts = m.overlap_source.random(samples, rng)
    a = F.forms[m.source](pts)
    J = m.jacobian(pts)
    tgt = F.forms[m.target](F.atlas.chart(m.target).reduce(m(pts)))
    b = np.einsum("nji,nj->ni", J, tgt)
    na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
    cos = np.sum(a * b, axis=1) / (na * nb)
    cross = np.linalg.norm(np.cross(a / na[:, None], b / nb[:, None]), axis=1)
    k = int(np.argmax(cross))
    return float(cross[k]), float(np.min(cos)), pts[k]


# profiles -------------------------------------------------------------------
def step_between(r: E.Expr, start: float, end: float, flatness: float = DEFAULT_FLATNESS):
    """(h, 1 - h) for a flat smooth step from 0 at ``start`` to 1 at ``end``.

    Written as u/(u+v) and v/(u+v) so both saturate to exact 0 and 1.
    """
    span = end - start
    u = E.bump((r - start) / (flatness * span)) if span > 0 else E.bump((start - r) / (-flatness * span))
    v = E.bump((end - r) / (flatness * span)) if span > 0 else E.bump((r - end) / (-flatness * span))
    return u / (u + v), v / (u + v)


def reeb_profiles(r: E.Expr, r0: float = 0.5, r1: float = 1.0, flatness: float = DEFAULT_FLATNESS):
    """(lam, mu) with lam = 1, mu = 0 for r <= r0 and lam = 0, mu = 1 for r >= r1.

    lam^2 + mu^2 = 1; lam is flat at r1, which is what makes the holonomy of
    the boundary leaf infinitesimally trivial.
    """
    h, one_minus_h = step_between(r, r0, r1, flatness)
    return E.sin(HALF_PI * one_minus_h), E.sin(HALF_PI * h)


# constructions ----------------------------------------------------------------
def _polar_leaf(chart: str, level: float, name: str) -> TangencyLeaf:
    return TangencyLeaf(chart, E.var(0), level, True, None, name)


def reeb_solid_torus(flatness: float = DEFAULT_FLATNESS, orientation: int = 1, *, atlas=None,
                     chart: str | None = None, radius: float = 1.0, r0: float | None = None,
                     coorientation: int = 1) -> FoliationSpec:
    """Reeb component on a polar solid-torus chart.

    w = c (sigma lam(r) dz + mu(r) dr); ``orientation`` (sigma) reverses the
    spiralling of the plane leaves (the component is turned over), while
    ``coorientation`` (c) only flips the transverse orientation.
    """
    from .atlas import solid_torus
    if flatness <= 0 or radius <= 0 or orientation not in (1, -1) or coorientation not in (1, -1):
        raise InvalidParameter("flatness, radius > 0 and signs in {+1, -1} required")
    atlas = atlas or solid_torus(radius)
    chart = chart or atlas.charts[0].id
    r = E.var(0)
    lam, mu = reeb_profiles(r, (0.5 if r0 is None else r0) * radius, radius, flatness)
    c = float(coorientation)
    w = OneForm.of(chart, (c * mu, E.ZERO, c * orientation * lam))
    return FoliationSpec(atlas, {chart: w}, (_polar_leaf(chart, radius, "reeb_boundary"),), coorientation,
                         "reeb_solid_torus",
                         {"flatness": flatness, "reeb_orientation": orientation, "radius": radius})


def product_foliation(atlas: AtlasManifold, axis: int = 2) -> FoliationSpec:
    forms = {c.id: OneForm.of(c.id, [1.0 if k == axis else 0.0 for k in range(3)]) for c in atlas.charts}
    return FoliationSpec(atlas, forms, (), 1, f"product_d{atlas.charts[0].coordinate_names[axis]}")


def _modify_radially(w: OneForm, s: E.Expr, M: E.Expr) -> OneForm:
    comps = list(E.mul(s, c) for c in w.components)
    comps[0] = comps[0] + M
    return OneForm(w.chart, tuple(comps))


def _torus_components_vanish(F: FoliationSpec, chart: Chart, cid: str, lo: float, hi: float, rng) -> bool:
    pts = chart.domain.random(300, rng)
    pts[:, 0] = lo + (hi - lo) * rng.random(len(pts))
    v = F.forms[cid](pts)
    return bool(np.all(np.abs(v[:, 1:]) < 1e-12))


def spin_to_boundary(F: FoliationSpec, chart: str, level: float, width: float = 0.25,
                     side: str = "outer", flatness: float = DEFAULT_FLATNESS) -> FoliationSpec:
    """Make the torus ``{r = level}`` a leaf by modifying the form in a collar.

    ``side`` says where the piece lies: ``"outer"`` for r >= level (collar
    [level, level + width]), ``"inner"`` for r <= level. Outside the collar on
    the piece side the form is unchanged; beyond the boundary it becomes dr,
    the normal form expected by :func:`glue_foliations`.
    """
    c = F.atlas.chart(chart)
    lo, hi = (level, level + width) if side == "outer" else (level - width, level)
    if side not in ("outer", "inner") or lo < c.domain.lower[0] - 1e-12 or hi > c.domain.upper[0] + 1e-12:
        raise NoCollar(f"chart {chart} has no collar [{lo}, {hi}]")
    already = any(t.chart == chart and t.locus.op == "var" and t.locus.value == 0 and abs(t.level - level) < 1e-12
                  for t in F.tangency_leaves)
    rng = np.random.default_rng(DEFAULT_SEED)
    if already or _torus_components_vanish(F, c, chart, lo, hi, rng):
        return F
    r = E.var(0)
    if side == "outer":
        h, one_minus_h = step_between(r, level, level + width, flatness)
    else:
        h, one_minus_h = step_between(r, level, level - width, flatness)
    s = E.sin(HALF_PI * h)
    M = E.sin(HALF_PI * one_minus_h)
    forms = dict(F.forms)
    forms[chart] = _modify_radially(F.forms[chart], s, M)
    leaves = F.tangency_leaves + (_polar_leaf(chart, level, f"spun_{chart}_{level:g}"),)
    meta = dict(F.metadata)
    meta.setdefault("spun", []).append({"chart": chart, "level": level, "width": width, "side": side})
    return FoliationSpec(F.atlas, forms, leaves, F.orientation, F.name + "+spun", meta)


def turbulize(F: FoliationSpec, chart: str, radius: float, orientation: int = 1, collar: float | None = None,
              r0: float = 0.5, flatness: float = DEFAULT_FLATNESS) -> FoliationSpec:
    """Reeb surgery along the core ``r = 0`` of a polar chart.

    Inside ``r < radius`` the leaves become the planes of a new Reeb
    component (turned over when ``orientation = -1``); in the collar
    ``[radius, radius + collar]`` the old leaves are spun onto the new torus
    leaf ``r = radius``. Beyond the collar the form is left untouched.
    """
    c = F.atlas.chart(chart)
    collar = 0.75 * radius if collar is None else collar
    outer = radius + collar
    if orientation not in (1, -1) or radius <= 0 or outer > c.domain.upper[0]:
        raise InvalidParameter("tube does not fit in the chart")
    rng = np.random.default_rng(DEFAULT_SEED)
    pts = c.domain.random(400, rng)
    pts[:, 0] = outer * rng.random(len(pts))
    w = F.forms[chart](pts)
    if np.any(np.abs(w[:, 2]) < 1e-9):
        raise NotTransverseInTube("form does not see the core direction inside the tube",
                                  witness=pts[np.argmin(np.abs(w[:, 2]))])
    r = E.var(0)
    h_in, one_minus_h_in = step_between(r, r0 * radius, radius, flatness)
    h_out, _ = step_between(r, radius, outer, flatness)
    s = float(orientation) * E.sin(HALF_PI * one_minus_h_in) + E.sin(HALF_PI * h_out)
    M = E.sin(HALF_PI * (h_in - h_out))
    forms = dict(F.forms)
    forms[chart] = _modify_radially(F.forms[chart], s, M)
    leaves = F.tangency_leaves + (_polar_leaf(chart, radius, f"turbulized_{chart}_{radius:g}"),)
    meta = dict(F.metadata)
    meta.setdefault("turbulized", []).append({"chart": chart, "radius": radius, "collar": collar,
                                              "orientation": orientation})
    return FoliationSpec(F.atlas, forms, leaves, F.orientation, F.name + "+turbulized", meta)


@dataclass(frozen=True, eq=False)
class Piece:
    """A foliated piece living on one chart of the glued atlas.

    Each boundary torus is ``(f, level, side)``: the piece lies where
    ``side * (f - level) >= 0`` is false, i.e. ``side=-1`` means the piece is
    ``f <= level``.
    """

    foliation: FoliationSpec
    chart: str
    boundaries: tuple

    @classmethod
    def single(cls, foliation: FoliationSpec, chart: str, boundary: E.Expr, level: float, side: int = -1):
        return cls(foliation, chart, ((E.as_expr(boundary), float(level), int(side)),))


def _collar_sign(p: Piece, bd, chart: Chart, rng, beyond: float = 0.05) -> float:
    """Sign eps with w = eps * df just beyond one boundary of the piece."""
    f, level, side = bd
    fake = TangencyLeaf(p.chart, f, level - side * beyond)
    pts = fake.project(chart.domain.random(200, rng, inset=1e-6))
    w = p.foliation.forms[p.chart](pts)
    df = VectorField.of(p.chart, [E.diff(f, i) for i in range(3)])(pts)
    ratio = np.sum(w * df, axis=1) / np.sum(df * df, axis=1)
    resid = np.linalg.norm(w - ratio[:, None] * df, axis=1)
    if np.max(resid) > 1e-9 or np.ptp(ratio) > 1e-9:
        raise FormMismatch(f"piece on {p.chart} is not in collar normal form beyond its boundary",
                           witness=pts[int(np.argmax(resid))])
    return float(np.sign(ratio[0]))


def _facing(p: Piece, box, chart: Chart, rng):
    """The boundary of ``p`` whose level set runs through the overlap ``box``."""
    pts = box.random(200, rng)
    for bd in p.boundaries:
        v = E.evaluate(bd[0], pts)
        if v.min() <= bd[1] <= v.max():
            return bd
    raise FormMismatch(f"no boundary of the piece on {p.chart} meets the overlap")


def glue_foliations(atlas: AtlasManifold, pieces: Sequence[Piece], samples: int = 500) -> FoliationSpec:
    """Glue pieces whose boundaries are leaves into one foliation of ``atlas``.

    Each piece must be in collar normal form beyond its boundaries
    (w = eps df there, as produced by Reeb components and spinning). On the
    chart of piece P the glued form is ``w_P + sum_Q (psi^* w_Q - psi^* nu_Q)``
    with nu_Q the collar normal form of the neighbour Q; inside P every
    correction cancels exactly, beyond P's boundary the neighbour takes over.
    """
    rng = np.random.default_rng(DEFAULT_SEED)
    by_chart = {p.chart: p for p in pieces}
    forms: dict[str, OneForm] = {}
    leaves: list[TangencyLeaf] = []
    for p in pieces:
        chart = atlas.chart(p.chart)
        total = list(p.foliation.forms[p.chart].components)
        for m in atlas.transitions_from(p.chart):
            q = by_chart.get(m.target)
            if q is None or m.target == p.chart:
                continue
            qchart = atlas.chart(q.chart)
            own = _facing(p, m.overlap_source, chart, rng)
            other = _facing(q, m.overlap_target, qchart, rng)
            eps_p = _collar_sign(p, own, chart, rng)
            eps_q = _collar_sign(q, other, qchart, rng)
            pulled = pullback(q.foliation.forms[q.chart], m)
            f_q = E.substitute(other[0], m.components)
            nu = [eps_q * E.diff(f_q, i) for i in range(3)]
            probe = m.overlap_source.random(50, rng)
            a = VectorField.of(p.chart, [eps_p * E.diff(own[0], i) for i in range(3)])(probe)
            b = VectorField.of(p.chart, nu)(probe)
            if np.min(np.sum(a * b, axis=1)) <= 0:
                raise OrientationMismatch(f"co-orientations disagree across {m.source}->{m.target}",
                                          witness=probe[0])
            total = [t + c - n for t, c, n in zip(total, pulled.components, nu)]
        forms[p.chart] = OneForm(p.chart, tuple(total))
        for leaf in p.foliation.tangency_leaves:
            leaves.append(replace(leaf, chart=p.chart))
    uniq = {}
    for leaf in leaves:
        uniq.setdefault((leaf.chart, E.to_sexpr(leaf.locus), round(leaf.level, 12)), leaf)
    meta = {"pieces": [{"chart": p.chart, "name": p.foliation.name, "metadata": p.foliation.metadata}
                       for p in pieces]}
    G = FoliationSpec(atlas, forms, tuple(uniq.values()), 1, "+".join(p.foliation.name for p in pieces), meta)
    for m in atlas.transitions:
        if m.source in forms and m.target in forms:
            res, min_cos, worst = form_agreement(G, m, samples, rng)
            if min_cos <= 0:
                raise OrientationMismatch(f"glued forms disagree in sign across {m.source}->{m.target}",
                                          witness=worst)
            if res > 1e-9:
                raise FormMismatch(f"glued forms differ across {m.source}->{m.target} (residual {res:.2e})",
                                   witness=worst)
    return G


# leafwise position ----------------------------------------------------------------
@dataclass
class LeafwiseReport:
    passed: bool
    classification: str
    max_on_locus: float
    min_off_locus: float
    witness: list | None = None

    def to_json(self) -> dict:
        return {"passed": self.passed, "classification": self.classification,
                "max_on_locus": self.max_on_locus, "min_off_locus": self.min_off_locus,
                "witness": self.witness}


def _flow_segment(X: VectorField, pts, length: float, steps: int) -> np.ndarray:
    """RK4 orbit samples of X starting at each point: shape (steps + 1, N, 3)."""
    h = length / steps
    out = [np.array(pts, dtype=float)]
    p = out[0]
    for _ in range(steps):
        k1 = X(p)
        k2 = X(p + 0.5 * h * k1)
        k3 = X(p + 0.5 * h * k2)
        k4 = X(p + h * k3)
        p = p + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(p)
    return np.stack(out)


def check_leafwise_position(F: FoliationSpec, phi: FlowSpec, samples: int = 2000, seed: int = DEFAULT_SEED,
                            orbit_length: float = 1.0, orbit_steps: int = 8) -> LeafwiseReport:
    """Sampled check that each leaf is everywhere tangent or everywhere transverse to the flow."""
    rng = np.random.default_rng(seed)
    max_on, min_off = 0.0, np.inf
    witness = None
    n_tan = n_tr = 0
    for cid, w in F.forms.items():
        chart = F.atlas.chart(cid)
        X = phi.fields[cid]
        pts = chart.domain.random(samples, rng, inset=1e-6)
        leaves = [t for t in F.tangency_leaves if t.chart == cid]
        near = np.zeros(len(pts), dtype=bool)
        for t in leaves:
            near |= np.abs(t.value(pts)) < LOCUS_BAND
            on = t.project(chart.domain.random(200, rng, inset=1e-6))
            on = on[chart.contains(on)]
            if len(on):
                v = np.abs(np.sum(w(on) * X(on), axis=1))
                max_on = max(max_on, float(np.max(v)))
        far = pts[~near]
        wx = np.sum(w(far) * X(far), axis=1)
        zero = wx == 0.0
        n_tan += int(np.sum(zero))
        n_tr += int(np.sum(~zero))
        if np.any(~zero):
            min_off = min(min_off, float(np.min(np.abs(wx[~zero]))))
        # mixed behaviour along orbit segments that avoid declared loci
        seg = _flow_segment(X, far[: min(len(far), 200)], orbit_length, orbit_steps)
        flat = seg.reshape(-1, 3)
        vals = np.abs(np.sum(w(flat) * X(flat), axis=1)).reshape(seg.shape[:2])
        crosses = np.zeros(seg.shape[1], dtype=bool)
        for t in leaves:
            f = t.value(flat).reshape(seg.shape[:2])
            crosses |= (np.min(np.abs(f), axis=0) < LOCUS_BAND) | (np.min(f, axis=0) * np.max(f, axis=0) < 0)
        mixed = (np.min(vals, axis=0) == 0.0) & (np.max(vals, axis=0) > 0.0) & ~crosses
        if np.any(mixed):
            k = int(np.argmax(mixed))
            raise MixedLeaf("flow orbit meets a leaf both tangentially and transversally",
                            witness=seg[0, k].tolist())
    passed = max_on < 1e-9
    if witness is None and not passed:
        witness = None
    if n_tan and not n_tr:
        cls = "all-tangent"
    elif n_tr and not n_tan and not F.tangency_leaves:
        cls = "all-transverse"
    elif n_tan and n_tr:
        passed = False
        cls = "undeclared-tangency"
    else:
        cls = "transverse-with-tangency-leaves"
    return LeafwiseReport(passed, cls, max_on, float(min_off), witness)


# frame data ---------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class FrameData:
    chart: str
    X: VectorField
    Z: VectorField
    Y: VectorField
    a: E.Expr
    b: E.Expr

    def values(self, pts) -> dict:
        p = np.atleast_2d(pts)
        a, b = E.compile_exprs([self.a, self.b])(p[:, 0], p[:, 1], p[:, 2])
        return {"a": a, "b": b, "X": self.X(p), "Z": self.Z(p), "Y": self.Y(p)}

    def check(self, F: FoliationSpec, pts) -> dict:
        v = self.values(pts)
        w = F.forms[self.chart](pts)
        return {"omega_Y": float(np.max(np.abs(np.sum(w * v["Y"], axis=1)))),
                "unit": float(np.max(np.abs(v["a"] ** 2 + v["b"] ** 2 - 1.0))),
                "decomposition": float(np.max(np.abs(v["Y"] - v["a"][:, None] * v["X"]
                                                     - v["b"][:, None] * v["Z"])))}


def frame_fields(F: FoliationSpec, phi: FlowSpec, Z: VectorField, chart: str | None = None,
                 neighborhood=None, samples: int = 500, seed: int = DEFAULT_SEED) -> FrameData:
    """Y = aX + bZ tangent to F with a^2 + b^2 = 1 and a > 0 where w(X) = 0."""
    chart = chart or Z.chart
    X = phi.fields[chart]
    wX = F.omega_of(chart, X)
    wZ = F.omega_of(chart, Z)
    n = E.sqrt(wX * wX + wZ * wZ)
    a = wZ / n
    b = -wX / n
    Y = VectorField.of(chart, [a * x + b * z for x, z in zip(X.components, Z.components)])
    rng = np.random.default_rng(seed)
    box = neighborhood if neighborhood is not None else F.atlas.chart(chart).domain
    pts = box.random(samples, rng)
    vals = E.compile_exprs([wX, wZ])(pts[:, 0], pts[:, 1], pts[:, 2])
    deg = (np.abs(vals[0]) < 1e-12) & (np.abs(vals[1]) < 1e-12)
    if np.any(deg):
        raise DegenerateFrame("Z is tangent to F where X is", witness=pts[deg][0])
    return FrameData(chart, X, Z, Y, a, b)


def make_basic_transverse(F0: TangencyLeaf, phi: FlowSpec, gamma, samples: int = 300,
                          seed: int = DEFAULT_SEED, band: float = 0.1) -> VectorField:
    """Unit gamma-gradient of the locus function: transverse to F0 and, for a
    quasi-fibered gamma in the symmetric model charts, basic for the flow."""
    from . import metric as Mt
    rng = np.random.default_rng(seed)
    chart = phi.atlas.chart(F0.chart)
    near = F0.project(chart.domain.random(samples, rng, inset=1e-6))
    near = near[chart.contains(near)]
    region = _band_box(chart, F0, band)
    rep = Mt.check_quasi_fibered(gamma, phi, region=region, chart=F0.chart, samples=samples, seed=seed)
    if not rep.passed:
        raise NotQuasiFibered(f"auxiliary metric is not quasi-fibered near the leaf (residual {rep.residual:.2e})")
    ginv = Mt.inverse_exprs(gamma.matrix(F0.chart))
    df = [E.diff(F0.locus, i) for i in range(3)]
    grad = [sum((ginv[i][j] * df[j] for j in range(3)), E.ZERO) for i in range(3)]
    norm = E.sqrt(sum((grad[i] * df[i] for i in range(3)), E.ZERO))
    Z = VectorField.of(F0.chart, [g / norm for g in grad], nonvanishing=True)
    X = phi.fields[F0.chart]
    if lie_bracket_residual(X, Z, near) > 1e-7:
        raise NotQuasiFibered("gradient field is not basic for the flow")
    return Z


def _band_box(chart: Chart, leaf: TangencyLeaf, band: float):
    from .atlas import Box
    lo, hi = list(chart.domain.lower), list(chart.domain.upper)
    if leaf.locus.op == "var":
        k = leaf.locus.value
        lo[k] = max(lo[k], leaf.level - band)
        hi[k] = min(hi[k], leaf.level + band)
    return Box(tuple(lo), tuple(hi))


def lie_bracket_residual(X: VectorField, Z: VectorField, pts) -> float:
    """max |[X, Z] mod X| / (|X| |Z|): zero iff Z is basic (bracket along X)."""
    xv, JX = X.with_dual(pts)
    zv, JZ = Z.with_dual(pts)
    br = np.einsum("nij,nj->ni", JZ, xv) - np.einsum("nij,nj->ni", JX, zv)
    xn = xv / np.linalg.norm(xv, axis=1)[:, None]
    perp = br - np.sum(br * xn, axis=1)[:, None] * xn
    return float(np.max(np.linalg.norm(perp, axis=1) / (np.linalg.norm(xv, axis=1) * np.linalg.norm(zv, axis=1))))


# attractiveness and adaptedness -------------------------------------------------------
def attractiveness(F0: TangencyLeaf, frame: FrameData, offsets: Sequence[float] = (0.02, 0.05),
                   samples: int = 64, seed: int = DEFAULT_SEED, atlas: AtlasManifold | None = None) -> str:
    """'attractive' iff b takes opposite signs on the two sides of the leaf."""
    rng = np.random.default_rng(seed)
    if atlas is not None:
        chart = atlas.chart(F0.chart)
        base = chart.domain.random(samples, rng, inset=1e-6)
    else:
        chart = None
        base = rng.random((samples, 3))
    base = F0.project(base)
    signs = {}
    for side in (-1, 1):
        vals = []
        for d in offsets:
            pts = F0.offset(base, side * d)
            if chart is not None and not np.all(chart.contains(pts)):
                return "one_sided"
            vals.append(E.evaluate(frame.b, pts))
        v = np.concatenate(vals)
        if np.any(np.abs(v) < 1e-9):
            raise AmbiguousSign("|b| below 1e-9 off the locus", witness=None)
        if np.any(np.sign(v) != np.sign(v[0])):
            raise AmbiguousSign(f"b changes sign along one side of {F0.name or 'the leaf'}")
        signs[side] = np.sign(v[0])
    return "attractive" if signs[-1] != signs[1] else "not_attractive"


@dataclass
class AdaptedReport:
    passed: bool
    basic_residual: float
    quotient_min: float
    quotient_max: float
    factor_residual: float
    reason: str = ""

    def to_json(self) -> dict:
        return dict(self.__dict__)


def check_adapted(F0: TangencyLeaf, frame: FrameData, beta: E.Expr, quotient: E.Expr | None,
                  samples: int = 1000, seed: int = DEFAULT_SEED, band: float = 0.1,
                  atlas: AtlasManifold | None = None) -> AdaptedReport:
    """X.beta = 0 and b/beta (supplied as an explicit field) bounded away from
    0 and infinity, including on the locus."""
    if quotient is None:
        raise QuotientUndefined("b/beta must be supplied as an evaluable field")
    rng = np.random.default_rng(seed)
    if atlas is not None:
        chart = atlas.chart(F0.chart)
        box = _band_box(chart, F0, band)
        pts = box.random(samples, rng, inset=1e-9)
        on = F0.project(chart.domain.random(samples // 4 + 1, rng, inset=1e-6))
    else:
        pts = rng.random((samples, 3))
        on = F0.project(rng.random((samples // 4 + 1, 3)))
    allp = np.vstack([pts, on])
    xv = frame.X(allp)
    bv, gb = E.compile_dual([beta])(allp[:, 0], allp[:, 1], allp[:, 2])
    xbeta = float(np.max(np.abs(np.einsum("nj,jn->n", xv, gb[0]))))
    try:
        q = E.evaluate(quotient, allp)
    except TGFolError as e:
        return AdaptedReport(False, xbeta, float("nan"), float("nan"), float("nan"),
                             f"quotient not evaluable: {e}")
    b = E.evaluate(frame.b, allp)
    factor = float(np.max(np.abs(b - bv[0] * q)))
    qa = np.abs(q)
    ok = xbeta < 1e-7 and qa.min() >= 1e-6 and qa.max() <= 1e6 and factor < 1e-9
    reason = "" if ok else ("X.beta != 0" if xbeta >= 1e-7 else
                            "b/beta vanishes or blows up" if not (qa.min() >= 1e-6 and qa.max() <= 1e6)
                            else "quotient is not b/beta")
    return AdaptedReport(bool(ok), xbeta, float(qa.min()), float(qa.max()), factor, reason)


def orbit_average(b: E.Expr, X: VectorField, pts, period: float, n: int = 64) -> np.ndarray:
    """Average of b over closed orbits of a constant-coefficient flow."""
    if any(not c.is_const for c in X.components):
        raise InvalidParameter("orbit averaging is implemented for constant-coefficient flows")
    v = np.array([c.value for c in X.components])
    pts = np.atleast_2d(pts)
    ts = np.arange(n) * (period / n)
    samples = pts[None, :, :] + ts[:, None, None] * v[None, None, :]
    return E.evaluate(b, samples.reshape(-1, 3)).reshape(n, -1).mean(axis=0)


# Cartesian core charts ---------------------------------------------------------------
def _core_pairs(atlas: AtlasManifold):
    """(polar chart id, core chart id, polar->core map) for each core chart."""
    out = []
    for m in atlas.transitions:
        if m.target == m.source + "0":
            out.append((m.source, m.target, m))
    return out


def _annulus_samples(m: SmoothMap, n: int = 64) -> np.ndarray:
    return m.overlap_source.random(n, np.random.default_rng(DEFAULT_SEED))


def attach_core_forms(F: FoliationSpec) -> FoliationSpec:
    """Extend a foliation into the Cartesian core charts, where the polar form
    must be a constant multiple of dz on the overlap annulus."""
    forms = dict(F.forms)
    for polar, core, m in _core_pairs(F.atlas):
        if polar not in forms:
            continue
        v = forms[polar](_annulus_samples(m))
        c = v[0, 2]
        if np.max(np.abs(v[:, :2])) > 0 or np.max(np.abs(v[:, 2] - c)) > 0 or c == 0:
            raise FormMismatch(f"form on {polar} is not constant * dz near the core")
        forms[core] = OneForm.of(core, (0.0, 0.0, float(c)))
    return replace(F, forms=forms)


def attach_core_flow(phi: FlowSpec) -> FlowSpec:
    """Extend a flow a d_theta + b d_z (constant a, b) into the core charts."""
    fields = dict(phi.fields)
    for polar, core, m in _core_pairs(phi.atlas):
        if polar not in fields:
            continue
        v = fields[polar](_annulus_samples(m))
        al, be = v[0, 1], v[0, 2]
        if np.max(np.abs(v[:, 0])) > 0 or np.ptp(v[:, 1]) > 0 or np.ptp(v[:, 2]) > 0:
            raise InvalidParameter(f"flow on {polar} is not a constant rotation near the core")
        x, y, _ = E.coords()
        fields[core] = VectorField.of(core, (-al * y, al * x, float(be)), nonvanishing=True)
    return replace(phi, fields=fields)
