"""Lorentzian metrics adapted to a foliation and a flow.

A :class:`MetricField` stores the upper triangle of a symmetric 3x3 matrix of
expressions per chart. Most metrics here are authored in a moving frame
(X, Z, P) and converted to coordinates with ``F^-T G F^-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as E
from .atlas import AtlasManifold, Box, VectorField, DEFAULT_SEED
from .errors import (AdaptednessFailed, AttractiveLeafOutsideU, ClassificationMargin, DegenerateMetric,
                     IncompatibleNormalMetrics, InvalidParameter, NoInvariantDirection, NotTransverse,
                     OddAttractiveCount, SignChangeInBeta, SignatureLossInBlend, TGFolError)
from .foliation import (FlowSpec, FoliationSpec, FrameData, TangencyLeaf, attractiveness, check_adapted,
                        lie_bracket_residual, step_between)

UPPER = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
DET_FLOOR = 1e-10
INVARIANCE_TOL = 1e-7
IDENTITY_TOL = 1e-9
SIGNATURES = {"lorentzian": (1, 2), "riemannian": (0, 3)}


class MetricField:
    """Per-chart symmetric matrix of expressions with a declared signature."""

    def __init__(self, entries: dict[str, Sequence], signature: str = "lorentzian", name: str = ""):
        if signature not in SIGNATURES:
            raise InvalidParameter(f"unknown signature {signature!r}")
        self.entries = {c: tuple(E.as_expr(x) for x in v) for c, v in entries.items()}
        for c, v in self.entries.items():
            if len(v) != 6:
                raise InvalidParameter(f"chart {c}: need 6 upper-triangle entries")
        self.signature = signature
        self.name = name
        self._compiled: dict = {}

    @classmethod
    def from_matrix(cls, mats: dict[str, Sequence[Sequence]], signature="lorentzian", name="") -> "MetricField":
        return cls({c: [m[i][j] for i, j in UPPER] for c, m in mats.items()}, signature, name)

    @property
    def charts(self) -> list[str]:
        return list(self.entries)

    def matrix(self, chart: str) -> list[list[E.Expr]]:
        v = self.entries[chart]
        out = [[E.ZERO] * 3 for _ in range(3)]
        for k, (i, j) in enumerate(UPPER):
            out[i][j] = out[j][i] = v[k]
        return out

    @staticmethod
    def _square(flat: np.ndarray) -> np.ndarray:
        # flat: (6, ...) -> (..., 3, 3)
        idx = [0, 1, 2, 1, 3, 4, 2, 4, 5]
        sq = flat[idx]
        return np.moveaxis(sq.reshape((3, 3) + sq.shape[1:]), (0, 1), (-2, -1))

    def values(self, chart: str, pts) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        vals = np.array(self._get(chart, "vec")(p[:, 0], p[:, 1], p[:, 2]))
        return self._square(vals)

    def with_dual(self, chart: str, pts):
        """(G, dG) with G (N,3,3) and dG[n, i, j, k] = d_k g_ij."""
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        V, Gr = self._get(chart, "dual")(p[:, 0], p[:, 1], p[:, 2])
        return self._square(V), np.moveaxis(self._square(Gr), 0, -1)

    def point_dual(self, chart: str, x):
        """Scalar-path evaluation at one point: (G 3x3, dG 3x3x3)."""
        vals, grads = self._get(chart, "scalar")(float(x[0]), float(x[1]), float(x[2]))
        G = np.empty((3, 3))
        dG = np.empty((3, 3, 3))
        for k, (i, j) in enumerate(UPPER):
            G[i, j] = G[j, i] = vals[k]
            dG[i, j] = dG[j, i] = grads[k]
        return G, dG

    def _get(self, chart: str, kind: str):
        key = (chart, kind)
        if key not in self._compiled:
            ex = list(self.entries[chart])
            self._compiled[key] = {"vec": E.compile_exprs, "dual": E.compile_dual,
                                   "scalar": E.compile_dual_scalar}[kind](ex)
        return self._compiled[key]

    def to_json(self) -> dict:
        return {"name": self.name, "signature": self.signature,
                "entries": {c: [E.to_sexpr(x) for x in v] for c, v in self.entries.items()}}

    @classmethod
    def from_json(cls, d) -> "MetricField":
        return cls({c: [E.parse_sexpr(s) for s in v] for c, v in d["entries"].items()},
                   d["signature"], d.get("name", ""))


# linear algebra on expressions ---------------------------------------------------
def det_exprs(m) -> E.Expr:
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def inverse_exprs(m) -> list[list[E.Expr]]:
    d = det_exprs(m)
    cof = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            r = [k for k in range(3) if k != i]
            c = [k for k in range(3) if k != j]
            minor = m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]]
            cof[i][j] = minor if (i + j) % 2 == 0 else -minor
    return [[cof[j][i] / d for j in range(3)] for i in range(3)]


def frame_to_coordinates(G_frame, frame: Sequence[VectorField]) -> list[list[E.Expr]]:
    """Coordinate matrix of the metric whose Gram matrix in ``frame`` is G_frame."""
    F = [[frame[j].components[i] for j in range(3)] for i in range(3)]  # columns are frame vectors
    Fi = inverse_exprs(F)
    out = [[E.ZERO] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(i, 3):
            acc = E.ZERO
            for k in range(3):
                for l in range(3):
                    if G_frame[k][l].is_const and G_frame[k][l].value == 0.0:
                        continue
                    acc = acc + Fi[k][i] * G_frame[k][l] * Fi[l][j]
            out[i][j] = out[j][i] = acc
    return out


# signature ------------------------------------------------------------------------
@dataclass
class SignatureReport:
    passed: bool
    samples: int
    min_abs_det: float
    bad: int
    witness: list | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def check_signature(g: MetricField, atlas: AtlasManifold, samples: int = 10_000, seed: int = DEFAULT_SEED,
                    regions: dict[str, Box] | None = None) -> SignatureReport:
    rng = np.random.default_rng(seed)
    neg_expected = SIGNATURES[g.signature][0]
    per = max(1, samples // len(g.charts))
    min_det, bad, witness = np.inf, 0, None
    for cid in g.charts:
        box = (regions or {}).get(cid, atlas.chart(cid).domain)
        pts = box.random(per, rng)
        G = g.values(cid, pts)
        ev = np.linalg.eigvalsh(G)
        det = np.abs(np.prod(ev, axis=1))
        wrong = (np.sum(ev < 0, axis=1) != neg_expected) | (det <= DET_FLOOR)
        min_det = min(min_det, float(det.min()))
        if np.any(wrong):
            bad += int(wrong.sum())
            if witness is None:
                witness = [cid] + pts[np.argmax(wrong)].tolist()
    return SignatureReport(bad == 0, per * len(g.charts), min_det, bad, witness)


def check_transitions(g: MetricField, atlas: AtlasManifold, samples: int = 200, seed: int = DEFAULT_SEED) -> float:
    """Max relative residual |g_src - J^T g_tgt J| / |g_src| over overlap samples."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for m in atlas.transitions:
        if m.source not in g.entries or m.target not in g.entries:
            continue
        pts = m.overlap_source.random(samples, rng)
        J = m.jacobian(pts)
        Gt = g.values(m.target, atlas.chart(m.target).reduce(m(pts)))
        pulled = np.einsum("nki,nkl,nlj->nij", J, Gt, J)
        Gs = g.values(m.source, pts)
        rel = np.linalg.norm(pulled - Gs, axis=(1, 2)) / np.linalg.norm(Gs, axis=(1, 2))
        worst = max(worst, float(rel.max()))
    return worst


# constructions ---------------------------------------------------------------------
def _const_or(x, default):
    return E.as_expr(default if x is None else x)


def tangency_frame_matrix(frame: FrameData, quotient: E.Expr, gamma_P) -> list[list[E.Expr]]:
    a, b, q = frame.a, frame.b, E.as_expr(quotient)
    return [[-(b * q), a * q, E.ZERO], [a * q, b * q, E.ZERO], [E.ZERO, E.ZERO, E.as_expr(gamma_P)]]


def build_tangency_metric(frame: FrameData, beta, gamma_P, P_frame: VectorField, quotient=None,
                          leaf: TangencyLeaf | None = None, atlas: AtlasManifold | None = None,
                          samples: int = 500, seed: int = DEFAULT_SEED) -> MetricField:
    """Lorentzian metric with Gram matrix [[-b^2/beta, ab/beta, 0], [ab/beta, b^2/beta, 0], [0, 0, gamma_P]]
    in the frame (X, Z, P), written as b q and a q with q = b/beta so that the
    entries evaluate on the locus.

    With ``leaf`` given, adaptedness is checked first and beta is required
    to keep one sign on each side of the locus.
    """
    beta = E.as_expr(beta)
    if quotient is None:
        if beta is not frame.b:
            raise AdaptednessFailed("b/beta must be supplied unless beta is the frame's b")
        quotient = E.ONE
    quotient = E.as_expr(quotient)
    if leaf is not None:
        rep = check_adapted(leaf, frame, beta, quotient, samples=samples, seed=seed, atlas=atlas)
        if not rep.passed:
            raise AdaptednessFailed(f"not adapted: {rep.reason}", report=rep.to_json())
        _beta_sign_per_side(leaf, beta, atlas, seed)
    Gf = tangency_frame_matrix(frame, quotient, gamma_P)
    Gc = frame_to_coordinates(Gf, (frame.X, frame.Z, P_frame))
    return MetricField.from_matrix({frame.chart: Gc}, "lorentzian", "tangency")


def _beta_sign_per_side(leaf: TangencyLeaf, beta: E.Expr, atlas, seed, offsets=(0.01, 0.03, 0.06)):
    rng = np.random.default_rng(seed)
    base = atlas.chart(leaf.chart).domain.random(64, rng, inset=1e-6) if atlas else rng.random((64, 3))
    base = leaf.project(base)
    for side in (-1, 1):
        vals = []
        for d in offsets:
            pts = leaf.offset(base, side * d)
            if atlas is not None:
                pts = pts[atlas.chart(leaf.chart).contains(pts)]
            if len(pts):
                vals.append(E.evaluate(beta, pts))
        if vals:
            v = np.concatenate(vals)
            if np.any(v > 0) and np.any(v < 0):
                raise SignChangeInBeta(f"beta changes sign on one side of {leaf.name or 'the leaf'}")


def _design_sign(design) -> E.Expr:
    if isinstance(design, str):
        if design not in ("space", "time"):
            raise InvalidParameter("design must be 'space', 'time' or a sign field")
        return E.const(1.0 if design == "space" else -1.0)
    return E.as_expr(design)


def transverse_frame_matrix(frame: FrameData, gamma_P, design) -> list[list[E.Expr]]:
    """Frame matrix [[-d b^2, d a b, 0], [d a b, d, 0], [0, 0, gamma_P]].

    X is g-orthogonal to the leaves and g(Y, Y) = d b^2 (1 + a^2), so
    ``design="space"`` (d = 1) gives spacelike leaves and a timelike flow,
    ``"time"`` (d = -1) timelike leaves and a spacelike flow. ``design`` may
    also be a field d taking the values +-1 away from its switching zones.
    The matrix degenerates where b or d vanishes, so it is meant for the
    transverse region only.
    """
    d = _design_sign(design)
    a, b = frame.a, frame.b
    return [[-(d * (b * b)), d * (a * b), E.ZERO], [d * (a * b), d, E.ZERO],
            [E.ZERO, E.ZERO, E.as_expr(gamma_P)]]


def build_frame_transverse_metric(frame: FrameData, gamma_P, P_frame: VectorField, design) -> MetricField:
    Gc = frame_to_coordinates(transverse_frame_matrix(frame, gamma_P, design), (frame.X, frame.Z, P_frame))
    label = design if isinstance(design, str) else "design_field"
    return MetricField.from_matrix({frame.chart: Gc}, "lorentzian", f"transverse_{label}")


def build_transverse_metric(F: FoliationSpec, phi: FlowSpec, transverse_signature: str = "spacelike_leaves",
                            region: dict[str, Box] | None = None, leaf_timelike: dict[str, VectorField] | None = None,
                            samples: int = 500, seed: int = DEFAULT_SEED) -> MetricField:
    """g = eps u (x) u + h with u = w / w(X) and h built on ker w from the
    coordinate metric of the projection along X.

    ``"spacelike_leaves"``: eps = -1 and h positive. ``"timelike_leaves"``:
    eps = +1 and h reversed along the projection of ``leaf_timelike`` (default
    the first coordinate axis).
    """
    if transverse_signature not in ("spacelike_leaves", "timelike_leaves"):
        raise InvalidParameter("transverse_signature must be spacelike_leaves or timelike_leaves")
    rng = np.random.default_rng(seed)
    mats = {}
    for cid, w in F.forms.items():
        X = phi.fields[cid]
        wX = F.omega_of(cid, X)
        box = (region or {}).get(cid, F.atlas.chart(cid).domain)
        pts = box.random(samples, rng)
        if np.any(np.abs(E.evaluate(wX, pts)) < 1e-9):
            raise NotTransverse(f"flow tangent to F in chart {cid}", witness=pts[np.argmin(np.abs(E.evaluate(wX, pts)))])
        u = [c / wX for c in w.components]
        # projection along X onto ker w: pi = I - X (x) u
        P = [[(E.ONE if i == j else E.ZERO) - X.components[i] * u[j] for j in range(3)] for i in range(3)]
        eps = -1.0 if transverse_signature == "spacelike_leaves" else 1.0
        if transverse_signature == "timelike_leaves":
            Wv = (leaf_timelike or {}).get(cid) or VectorField.of(cid, (1.0, 0.0, 0.0))
            pw = [sum((P[i][j] * Wv.components[j] for j in range(3)), E.ZERO) for i in range(3)]
            nw2 = sum((c * c for c in pw), E.ZERO)
        G = [[E.ZERO] * 3 for _ in range(3)]
        for i in range(3):
            for j in range(i, 3):
                h = sum((P[k][i] * P[k][j] for k in range(3)), E.ZERO)
                if transverse_signature == "timelike_leaves":
                    pi_w_i = sum((P[k][i] * pw[k] for k in range(3)), E.ZERO)
                    pi_w_j = sum((P[k][j] * pw[k] for k in range(3)), E.ZERO)
                    h = h - 2.0 * pi_w_i * pi_w_j / nw2
                G[i][j] = G[j][i] = eps * u[i] * u[j] + h
        mats[cid] = G
    return MetricField.from_matrix(mats, "lorentzian", f"transverse_{transverse_signature}")


def flat_metric(atlas: AtlasManifold, diag=(1.0, 1.0, 1.0), signature: str | None = None) -> MetricField:
    neg = sum(1 for d in diag if d < 0)
    sig = signature or ("riemannian" if neg == 0 else "lorentzian")
    return MetricField({c.id: [diag[0], 0, 0, diag[1], 0, diag[2]] for c in atlas.charts}, sig, "flat")


def cylindrical_metric(atlas: AtlasManifold) -> MetricField:
    """dr^2 + r^2 dtheta^2 + dz^2 on polar charts."""
    r = E.var(0)
    return MetricField({c.id: [1, 0, 0, r * r, 0, 1] for c in atlas.charts}, "riemannian", "cylindrical")


# blending ---------------------------------------------------------------------------
def collar_plateau(leaf: TangencyLeaf, inner: float, outer: float, flatness: float = 0.3) -> E.Expr:
    """zeta = 1 for |f - c| <= inner, 0 for |f - c| >= outer, smooth and flat in between.

    Written in (f - c)^2 so it is smooth across the leaf.
    """
    d = leaf.locus - leaf.level
    _, one_minus = step_between(d * d, inner * inner, outer * outer, flatness)
    return one_minus


@dataclass
class BlendPiece:
    metric: MetricField
    leaf: TangencyLeaf
    inner: float
    outer: float


def glue_metrics(g_local: Sequence[BlendPiece], g_global: MetricField, phi: FlowSpec, F: FoliationSpec,
                 gamma: MetricField | None = None, samples: int = 10_000, seed: int = DEFAULT_SEED,
                 check: bool = True) -> MetricField:
    """g = sum_i zeta_i g_i + (1 - sum_i zeta_i) g_global per chart.

    zeta_i is a plateau in the collar coordinate |f - c| of leaf i, hence
    flow-basic whenever the locus function is. Local and global metrics here
    are authored in the same frame (X, Z, P) with the P-block shared, so the
    coordinate convex combination is the frame-wise blend.
    """
    entries = {}
    blends = {}
    for cid, glob in g_global.entries.items():
        pieces = [p for p in g_local if p.leaf.chart == cid and cid in p.metric.entries]
        if not pieces:
            entries[cid] = glob
            continue
        total = E.ZERO
        acc = [E.ZERO] * 6
        for p in pieces:
            z = collar_plateau(p.leaf, p.inner, p.outer)
            total = total + z
            acc = [s + z * v for s, v in zip(acc, p.metric.entries[cid])]
            blends.setdefault(cid, []).append(p)
        rest = E.ONE - total
        entries[cid] = tuple(s + rest * v for s, v in zip(acc, glob))
    g = MetricField(entries, "lorentzian", "glued")
    if check:
        _check_blend(g, g_global, blends, F, samples, seed)
    return g


def _check_blend(g, g_global, blends, F, samples, seed):
    rng = np.random.default_rng(seed)
    for cid, pieces in blends.items():
        chart = F.atlas.chart(cid)
        for p in pieces:
            base = p.leaf.project(chart.domain.random(samples // 4, rng, inset=1e-6))
            d = p.inner + (p.outer - p.inner) * rng.random(len(base))
            side = np.where(rng.random(len(base)) < 0.5, -1.0, 1.0)
            pts = _offset_many(p.leaf, base, side * d)
            pts = pts[chart.contains(pts)]
            if not len(pts):
                continue
            G = g.values(cid, pts)
            ev = np.linalg.eigvalsh(G)
            bad = (np.sum(ev < 0, axis=1) != 1) | (np.abs(np.prod(ev, axis=1)) <= DET_FLOOR)
            if np.any(bad):
                raise SignatureLossInBlend("blend lost Lorentzian signature", witness=[cid] + pts[np.argmax(bad)].tolist())
            tl = _kernel_gram(p.metric.values(cid, pts), F.forms[cid](pts))
            tg = _kernel_gram(g_global.values(cid, pts), F.forms[cid](pts))
            sl, sg = np.sign(np.linalg.det(tl)), np.sign(np.linalg.det(tg))
            if np.any(sl != sg):
                k = int(np.argmax(sl != sg))
                raise IncompatibleNormalMetrics("local and global metrics give the leaves different causal types",
                                                witness=[cid] + pts[k].tolist())


def _offset_many(leaf: TangencyLeaf, base, deltas) -> np.ndarray:
    # Newton with per-point target levels
    p = np.array(base, dtype=float)
    target = leaf.level + np.asarray(deltas)
    fd = E.compile_dual([leaf.locus])
    for _ in range(10):
        V, G = fd(p[:, 0], p[:, 1], p[:, 2])
        g = G[0].T
        p -= ((V[0] - target) / np.sum(g * g, axis=1))[:, None] * g
    return p


def _kernel_basis(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two Euclidean-orthonormal vectors spanning ker w (row-wise)."""
    n = w / np.linalg.norm(w, axis=1)[:, None]
    eye = np.eye(3)
    k = np.argmin(np.abs(n), axis=1)
    e = eye[k]
    u1 = np.cross(n, e)
    u1 /= np.linalg.norm(u1, axis=1)[:, None]
    u2 = np.cross(n, u1)
    return u1, u2


def _kernel_gram(G: np.ndarray, w: np.ndarray) -> np.ndarray:
    u1, u2 = _kernel_basis(w)
    U = np.stack([u1, u2], axis=2)  # (N, 3, 2)
    return np.einsum("nia,nij,njb->nab", U, G, U)


# quasi-fibered ------------------------------------------------------------------------
@dataclass
class QuasiFiberedReport:
    passed: bool
    residual: float
    witness: list | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def lie_derivative(g: MetricField, X: VectorField, chart: str, pts) -> np.ndarray:
    """(L_X g)_ij = X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k, shape (N, 3, 3)."""
    G, dG = g.with_dual(chart, pts)
    xv, JX = X.with_dual(pts)
    return (np.einsum("nk,nijk->nij", xv, dG) + np.einsum("nkj,nki->nij", G, JX)
            + np.einsum("nik,nkj->nij", G, JX))


def check_quasi_fibered(g: MetricField, phi: FlowSpec, region: Box | None = None, chart: str | None = None,
                        samples: int = 500, seed: int = DEFAULT_SEED) -> QuasiFiberedReport:
    """Lie derivative of g along X on two vectors spanning the g-orthogonal
    complement of X (a model of the normal bundle). On that complement the
    result does not depend on rescaling X, so it tests invariance of the
    transverse metric under the flow lines rather than under one vector field.
    Where X is null the Euclidean complement is used instead.
    """
    rng = np.random.default_rng(seed)
    charts = [chart] if chart else g.charts
    worst, witness = 0.0, None
    for cid in charts:
        box = region if region is not None else phi.atlas.chart(cid).domain
        pts = box.random(samples, rng)
        L = lie_derivative(g, phi.fields[cid], cid, pts)
        G = g.values(cid, pts)
        xv = phi.fields[cid](pts)
        u1, u2 = _kernel_basis(xv)
        gxx = np.einsum("ni,nij,nj->n", xv, G, xv)
        ok = np.abs(gxx) > 1e-9 * np.einsum("ni,ni->n", xv, xv)
        safe = np.where(ok, gxx, 1.0)
        for u in (u1, u2):
            u -= (ok * np.einsum("ni,nij,nj->n", u, G, xv) / safe)[:, None] * xv
        U = np.stack([u1, u2], axis=2)
        R = np.abs(np.einsum("nia,nij,njb->nab", U, L, U)).reshape(len(pts), -1).max(axis=1)
        k = int(np.argmax(R))
        if R[k] > worst:
            worst, witness = float(R[k]), [cid] + pts[k].tolist()
    return QuasiFiberedReport(worst < INVARIANCE_TOL, worst, witness)


def attach_core_metric(g: MetricField, atlas: AtlasManifold) -> MetricField:
    """Extend a metric into the Cartesian core charts.

    Near the core the polar metric must have the form
    dr^2 + u dtheta^2 + 2 beta u dtheta dz + (c0 + c1 u) dz^2 with
    u = r^2 and constants beta, c0, c1 (fitted and checked on the overlap
    annulus); its Cartesian form is then polynomial. Any other coefficient of
    u dtheta^2 would leave a cone singularity on the axis.
    """
    from .foliation import _core_pairs
    entries = dict(g.entries)
    rng = np.random.default_rng(DEFAULT_SEED)
    for polar, core, m in _core_pairs(atlas):
        if polar not in entries:
            continue
        pts = m.overlap_source.random(64, rng)
        G = g.values(polar, pts)
        u = pts[:, 0] ** 2
        alpha = G[:, 1, 1] / u
        beta = G[:, 1, 2] / u
        c1, c0 = np.polyfit(u, G[:, 2, 2], 1)
        resid = max(float(np.max(np.abs(alpha - 1.0))), np.ptp(beta), float(np.max(np.abs(c0 + c1 * u - G[:, 2, 2]))),
                    float(np.max(np.abs(G[:, 0, 0] - 1.0))), float(np.max(np.abs(G[:, 0, 1:]))))
        if resid > 1e-9:
            raise InvalidParameter(f"metric on {polar} is not of core form near the axis (residual {resid:.2e})")
        b = float(beta[0])
        c0, c1 = float(round(c0, 12)), float(round(c1, 12))
        x, y, _ = E.coords()
        # dr^2 + u dtheta^2 = dx^2 + dy^2 and u dtheta = x dy - y dx
        entries[core] = (1.0, 0.0, -b * y, 1.0, b * x, c0 + c1 * (x * x + y * y))
    return MetricField(entries, g.signature, g.name)


# leaf types -------------------------------------------------------------------------------
@dataclass
class LeafTypeReport:
    types: list[str]
    per_leaf: dict[str, str] = field(default_factory=dict)
    margins: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"per_leaf": dict(sorted(self.per_leaf.items())), "counts": {
            t: self.types.count(t) for t in sorted(set(self.types))}}


def classify_gram(G2: np.ndarray, strict: bool = True) -> tuple[list[str], np.ndarray]:
    """Causal type of 2x2 Gram matrices, with relative determinant margin."""
    det = np.linalg.det(G2)
    scale = np.max(np.abs(G2), axis=(1, 2)) ** 2
    rel = det / np.maximum(scale, 1e-300)
    tr = np.trace(G2, axis1=1, axis2=2)
    out = []
    for k in range(len(G2)):
        if abs(rel[k]) <= 1e-10:
            out.append("light")
        elif abs(rel[k]) < 1e-6:
            if strict:
                raise ClassificationMargin("induced determinant too close to zero to classify",
                                           relative_det=float(rel[k]))
            out.append("ambiguous")
        elif rel[k] < 0:
            out.append("time")
        elif tr[k] > 0:
            out.append("space")
        else:
            raise DegenerateMetric("negative definite induced metric on a leaf")
    return out, rel


def leaf_type(g: MetricField, F: FoliationSpec, points, chart: str, leaf_ids: Sequence[str] | None = None,
              strict: bool = True) -> LeafTypeReport:
    pts = np.atleast_2d(points)
    G2 = _kernel_gram(g.values(chart, pts), F.forms[chart](pts))
    types, rel = classify_gram(G2, strict)
    per = {}
    if leaf_ids is not None:
        for lid, t in zip(leaf_ids, types):
            prev = per.get(lid)
            per[lid] = t if prev in (None, t) else "mixed-error"
    return LeafTypeReport(types, per, rel.tolist())


def frame_diagnostics(g: MetricField, frame: FrameData, pts) -> dict:
    """alpha = g(X, Z)/a and c = g(Z, Z)/alpha where a != 0."""
    G = g.values(frame.chart, pts)
    v = frame.values(pts)
    gXZ = np.einsum("ni,nij,nj->n", v["X"], G, v["Z"])
    gZZ = np.einsum("ni,nij,nj->n", v["Z"], G, v["Z"])
    ok = np.abs(v["a"]) > 1e-6
    alpha = np.where(ok, gXZ / np.where(ok, v["a"], 1.0), np.nan)
    c = np.where(ok & (np.abs(alpha) > 1e-12), gZZ / np.where(np.abs(alpha) > 1e-12, alpha, 1.0), np.nan)
    return {"alpha": alpha, "c": c}


# global compatibility -----------------------------------------------------------------------
@dataclass(frozen=True)
class Region:
    """A slab ``lo < x_axis < hi`` inside a chart box."""

    chart: str
    box: Box
    axis: int = 0
    label: str = ""

    def contains_leaf(self, leaf: TangencyLeaf) -> bool:
        if leaf.chart != self.chart or leaf.locus.op != "var" or leaf.locus.value != self.axis:
            return False
        return self.box.lower[self.axis] < leaf.level < self.box.upper[self.axis]


@dataclass
class CompatibilityReport:
    compatible: bool
    attractive: dict[str, str]
    crossings: list[int]
    verdict: str

    def to_json(self) -> dict:
        return {"compatible": self.compatible, "attractive": dict(sorted(self.attractive.items())),
                "crossings": sorted(set(self.crossings)), "verdict": self.verdict}


def check_globally_compatible(F: FoliationSpec, phi: FlowSpec, frames: dict[str, FrameData],
                              U: Sequence[Region] = (), invariant_direction: dict[str, VectorField] | None = None,
                              paths: int = 32, seed: int = DEFAULT_SEED, strict: bool = True) -> CompatibilityReport:
    """Combinatorial compatibility of attractive leaves with a caller-declared U.

    ``frames`` maps each tangency leaf name to its frame data. Raises the
    corresponding error on failure unless ``strict`` is False.
    """
    rng = np.random.default_rng(seed)
    kinds = {}
    for leaf in F.tangency_leaves:
        kinds[leaf.name] = attractiveness(leaf, frames[leaf.name], atlas=F.atlas)
    attractive = [l for l in F.tangency_leaves if kinds[l.name] == "attractive"]

    def fail(err, msg):
        if strict:
            raise err(msg)
        return CompatibilityReport(False, kinds, [], msg)

    if len(attractive) % 2:
        return fail(OddAttractiveCount, f"odd number ({len(attractive)}) of attractive tangency leaves")
    for l in attractive:
        if not any(reg.contains_leaf(l) for reg in U):
            return fail(AttractiveLeafOutsideU, f"attractive leaf {l.name} lies outside U")
    crossings = []
    for reg in U:
        lo, hi = reg.box.lower[reg.axis], reg.box.upper[reg.axis]
        starts = reg.box.random(paths, rng)
        for p in starts:
            a, b = p.copy(), p.copy()
            a[reg.axis], b[reg.axis] = lo, hi
            hits = sum(1 for l in attractive if l.chart == reg.chart
                       and np.sign(l.value(a)[0]) != np.sign(l.value(b)[0]))
            crossings.append(hits)
        if any(c != 2 for c in crossings):
            return fail(OddAttractiveCount, f"a transversal path across U meets {min(crossings, key=lambda c: abs(c - 2))} attractive leaves")
    if U:
        if not invariant_direction:
            return fail(NoInvariantDirection, "no basic transverse direction supplied on U")
        for reg in U:
            W = invariant_direction.get(reg.chart)
            if W is None:
                return fail(NoInvariantDirection, f"no direction field on chart {reg.chart}")
            pts = reg.box.random(200, rng)
            wv = W(pts)
            xv = phi.fields[reg.chart](pts)
            par = np.linalg.norm(np.cross(wv, xv), axis=1) / (np.linalg.norm(wv, axis=1) * np.linalg.norm(xv, axis=1))
            if np.min(par) < 1e-6 or lie_bracket_residual(phi.fields[reg.chart], W, pts) > INVARIANCE_TOL:
                return fail(NoInvariantDirection, f"direction field on {reg.chart} is not basic and transverse")
    verdict = "compatible" if attractive else "compatible (no attractive leaves)"
    return CompatibilityReport(True, kinds, crossings, verdict)
