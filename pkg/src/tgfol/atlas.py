"""Chart-based model 3-manifolds.

A manifold is a list of :class:`Chart` boxes glued by :class:`SmoothMap`
transitions whose components are expression DAGs, so Jacobians come out of
forward-mode evaluation exactly. Angular axes are kept unnormalized and
flagged periodic; point comparisons reduce differences modulo the period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as E
from .errors import InvalidParameter, OutOfDomain

DEFAULT_GRID = 12
DEFAULT_SEED = 42
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Box:
    lower: tuple[float, float, float]
    upper: tuple[float, float, float]

    def __post_init__(self):
        if len(self.lower) != 3 or len(self.upper) != 3:
            raise InvalidParameter("boxes are three-dimensional")
        for lo, hi in zip(self.lower, self.upper):
            if not lo < hi:
                raise InvalidParameter(f"degenerate box axis [{lo}, {hi}]")

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    def contains(self, pts, periodic=(False, False, False), tol=1e-12) -> np.ndarray:
        pts = np.atleast_2d(pts)
        ok = np.ones(len(pts), dtype=bool)
        for k in range(3):
            if periodic[k]:
                continue
            ok &= (pts[:, k] >= self.lower[k] - tol) & (pts[:, k] <= self.upper[k] + tol)
        return ok

    def grid(self, n: int = DEFAULT_GRID, inset: float = 0.0) -> np.ndarray:
        axes = []
        for lo, hi in zip(self.lower, self.upper):
            pad = inset * (hi - lo)
            axes.append(np.linspace(lo + pad, hi - pad, n))
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)

    def random(self, n: int, rng: np.random.Generator, inset: float = 0.0) -> np.ndarray:
        lo = np.asarray(self.lower) + inset * self.widths
        hi = np.asarray(self.upper) - inset * self.widths
        return lo + (hi - lo) * rng.random((n, 3))

    def to_json(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_json(cls, d) -> "Box":
        if "rmin" in d:
            return Annulus(tuple(map(float, d["lower"])), tuple(map(float, d["upper"])),
                           float(d["rmin"]), float(d["rmax"]))
        if "half" in d:
            return PolarSquare(tuple(map(float, d["lower"])), tuple(map(float, d["upper"])), float(d["half"]))
        return cls(tuple(map(float, d["lower"])), tuple(map(float, d["upper"])))


@dataclass(frozen=True)
class Annulus(Box):
    """Points of a box with rmin <= sqrt(x1^2 + x2^2) <= rmax.

    Overlaps of a Cartesian core chart with its polar chart have this shape.
    """

    rmin: float = 0.0
    rmax: float = float("inf")

    def _radial(self, pts, tol):
        pts = np.atleast_2d(pts)
        r = np.hypot(pts[:, 0], pts[:, 1])
        return (r >= self.rmin - tol) & (r <= self.rmax + tol)

    def contains(self, pts, periodic=(False, False, False), tol=1e-12) -> np.ndarray:
        return super().contains(pts, periodic, tol) & self._radial(pts, tol)

    def grid(self, n: int = DEFAULT_GRID, inset: float = 0.0) -> np.ndarray:
        g = super().grid(n, inset)
        return g[self._radial(g, 0.0)]

    def random(self, n: int, rng: np.random.Generator, inset: float = 0.0) -> np.ndarray:
        out = np.empty((0, 3))
        while len(out) < n:
            cand = super().random(2 * n + 8, rng, inset)
            out = np.vstack([out, cand[self.contains(cand)]])
        return out[:n]

    def to_json(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "rmin": self.rmin, "rmax": self.rmax}


@dataclass(frozen=True)
class PolarSquare(Box):
    """Points (r, theta, z) of a box whose Cartesian image lies in |x|, |y| <= half.

    The polar-side overlap of a Cartesian core chart.
    """

    half: float = float("inf")

    def _inside(self, pts, tol):
        pts = np.atleast_2d(pts)
        m = pts[:, 0] * np.maximum(np.abs(np.cos(pts[:, 1])), np.abs(np.sin(pts[:, 1])))
        return m <= self.half + tol

    def contains(self, pts, periodic=(False, False, False), tol=1e-12) -> np.ndarray:
        return super().contains(pts, periodic, tol) & self._inside(pts, tol)

    def grid(self, n: int = DEFAULT_GRID, inset: float = 0.0) -> np.ndarray:
        g = super().grid(n, inset)
        return g[self._inside(g, 0.0)]

    def random(self, n: int, rng: np.random.Generator, inset: float = 0.0) -> np.ndarray:
        out = np.empty((0, 3))
        while len(out) < n:
            cand = super().random(2 * n + 8, rng, inset)
            out = np.vstack([out, cand[self.contains(cand)]])
        return out[:n]

    def to_json(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "half": self.half}


@dataclass(frozen=True)
class Chart:
    id: str
    domain: Box
    periodic: tuple[bool, bool, bool] = (False, False, False)
    coordinate_names: tuple[str, str, str] = ("x1", "x2", "x3")
    dim: int = 3

    def __post_init__(self):
        if self.dim != 3:
            raise InvalidParameter("only dimension 3 is supported")

    @property
    def periods(self) -> np.ndarray:
        return np.where(self.periodic, self.domain.widths, 0.0)

    def contains(self, pts, tol=1e-12) -> np.ndarray:
        return self.domain.contains(pts, self.periodic, tol)

    def reduce(self, pts) -> np.ndarray:
        """Bring periodic coordinates back into the fundamental box."""
        pts = np.array(pts, dtype=float)
        for k in range(3):
            if self.periodic[k]:
                lo, w = self.domain.lower[k], self.domain.widths[k]
                m = np.mod(pts[..., k] - lo, w)
                pts[..., k] = lo + np.where(m >= w, 0.0, m)  # mod can round up to w
        return pts

    def difference(self, a, b) -> np.ndarray:
        """a - b with periodic axes wrapped into (-P/2, P/2]."""
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        for k in range(3):
            if self.periodic[k]:
                w = self.domain.widths[k]
                d[..., k] = d[..., k] - w * np.round(d[..., k] / w)
        return d

    def to_json(self) -> dict:
        return {"id": self.id, "dim": self.dim, "domain": self.domain.to_json(),
                "periodic": list(self.periodic), "coordinate_names": list(self.coordinate_names)}

    @classmethod
    def from_json(cls, d) -> "Chart":
        return cls(d["id"], Box.from_json(d["domain"]), tuple(bool(p) for p in d["periodic"]),
                   tuple(d["coordinate_names"]))


def _as_points(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class ScalarField:
    chart: str
    expr: E.Expr

    def __call__(self, pts) -> np.ndarray:
        return E.evaluate(self.expr, pts)

    def sexpr(self) -> str:
        return E.to_sexpr(self.expr)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Three component fields in the coordinate basis of one chart.

    Also used for 1-forms (components in the dual coordinate basis); the two
    are distinguished by context, not by type.
    """

    chart: str
    components: tuple[E.Expr, E.Expr, E.Expr]
    nonvanishing: bool = False

    @classmethod
    def of(cls, chart: str, comps: Sequence, nonvanishing=False) -> "VectorField":
        return cls(chart, tuple(E.as_expr(c) for c in comps), nonvanishing)

    def __call__(self, pts) -> np.ndarray:
        p = _as_points(pts)
        vals = E.compile_exprs(self.components)(p[:, 0], p[:, 1], p[:, 2])
        return np.stack(vals, axis=-1)

    def with_dual(self, pts):
        """Values ``(N, 3)`` and Jacobian ``(N, 3, 3)`` with ``J[n, i, j] = d_j V_i``."""
        p = _as_points(pts)
        V, G = E.compile_dual(self.components)(p[:, 0], p[:, 1], p[:, 2])
        return V.T, np.transpose(G, (2, 0, 1))

    def pairing(self, other: "VectorField") -> E.Expr:
        return sum((a * b for a, b in zip(self.components, other.components)), E.ZERO)

    def to_json(self) -> dict:
        return {"chart": self.chart, "components": [E.to_sexpr(c) for c in self.components],
                "nonvanishing": self.nonvanishing}

    @classmethod
    def from_json(cls, d) -> "VectorField":
        return cls(d["chart"], tuple(E.parse_sexpr(s) for s in d["components"]),
                   bool(d.get("nonvanishing", False)))


OneForm = VectorField


@dataclass(frozen=True, eq=False)
class SmoothMap:
    source: str
    target: str
    components: tuple[E.Expr, E.Expr, E.Expr]
    overlap_source: Box
    overlap_target: Box

    def __call__(self, pts) -> np.ndarray:
        p = _as_points(pts)
        vals = E.compile_exprs(self.components)(p[:, 0], p[:, 1], p[:, 2])
        return np.stack(vals, axis=-1)

    def jacobian(self, pts) -> np.ndarray:
        p = _as_points(pts)
        _, G = E.compile_dual(self.components)(p[:, 0], p[:, 1], p[:, 2])
        return np.transpose(G, (2, 0, 1))

    def to_json(self) -> dict:
        return {"source": self.source, "target": self.target,
                "components": [E.to_sexpr(c) for c in self.components],
                "overlap_source": self.overlap_source.to_json(),
                "overlap_target": self.overlap_target.to_json()}

    @classmethod
    def from_json(cls, d) -> "SmoothMap":
        return cls(d["source"], d["target"], tuple(E.parse_sexpr(s) for s in d["components"]),
                   Box.from_json(d["overlap_source"]), Box.from_json(d["overlap_target"]))


@dataclass(frozen=True, eq=False)
class AtlasManifold:
    name: str
    charts: tuple[Chart, ...]
    transitions: tuple[SmoothMap, ...] = ()
    metadata: dict = field(default_factory=dict)

    def chart(self, cid: str) -> Chart:
        for c in self.charts:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def transitions_from(self, cid: str) -> list[SmoothMap]:
        return [t for t in self.transitions if t.source == cid]

    def inverse_of(self, m: SmoothMap) -> SmoothMap | None:
        for t in self.transitions:
            if t.source == m.target and t.target == m.source and t is not m \
                    and t.overlap_source == m.overlap_target:
                return t
        if m.source == m.target:
            for t in self.transitions:
                if t is not m and t.overlap_source == m.overlap_target:
                    return t
        return None

    def to_json(self) -> dict:
        return {"name": self.name, "charts": [c.to_json() for c in self.charts],
                "transitions": [t.to_json() for t in self.transitions],
                "metadata": dict(self.metadata)}

    @classmethod
    def from_json(cls, d) -> "AtlasManifold":
        return cls(d["name"], tuple(Chart.from_json(c) for c in d["charts"]),
                   tuple(SmoothMap.from_json(t) for t in d["transitions"]),
                   dict(d.get("metadata", {})))


# operations -----------------------------------------------------------------
def _check_domain(chart: Chart | None, pts):
    if chart is None:
        return
    ok = chart.contains(pts)
    if not np.all(ok):
        bad = np.atleast_2d(pts)[~ok][0]
        raise OutOfDomain(f"point {bad.tolist()} outside chart {chart.id}", witness=bad)


def eval_field(f: ScalarField, x, chart: Chart | None = None):
    """Value of ``f`` at one point (float) or a batch (array)."""
    _check_domain(chart, x)
    out = E.evaluate(f.expr, x)
    return float(out[0]) if np.ndim(x) == 1 else out


def eval_derivative(f: ScalarField, x, direction, chart: Chart | None = None):
    """Forward-mode directional derivative; ``direction`` is an axis index
    (0-based) or a 3-vector."""
    _check_domain(chart, x)
    p = _as_points(x)
    _, G = E.compile_dual([f.expr])(p[:, 0], p[:, 1], p[:, 2])
    grad = G[0].T
    if isinstance(direction, (int, np.integer)):
        d = grad[:, int(direction)]
    else:
        d = grad @ np.asarray(direction, dtype=float)
    return float(d[0]) if np.ndim(x) == 1 else d


def transition_jacobian(m: SmoothMap, x, atlas: AtlasManifold | None = None) -> np.ndarray:
    p = _as_points(x)
    chart = atlas.chart(m.source) if atlas is not None else None
    ok = m.overlap_source.contains(p, chart.periodic if chart else (False,) * 3)
    if not np.all(ok):
        raise OutOfDomain(f"point outside overlap of {m.source}->{m.target}", witness=p[~ok][0])
    J = m.jacobian(p)
    return J[0] if np.ndim(x) == 1 else J


@dataclass
class AtlasReport:
    inverse_residual: float
    cocycle_residual: float
    landing_ok: bool
    tol: float = 1e-9
    details: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.inverse_residual < self.tol and self.cocycle_residual < self.tol and self.landing_ok

    def to_json(self) -> dict:
        return {"inverse_residual": self.inverse_residual, "cocycle_residual": self.cocycle_residual,
                "landing_ok": self.landing_ok, "passed": self.passed, "details": self.details}


def _overlap_samples(m: SmoothMap, samples: int, rng) -> np.ndarray:
    n = max(2, int(round(samples ** (1 / 3))))
    return np.vstack([m.overlap_source.grid(n), m.overlap_source.random(samples, rng)])


def check_atlas(M: AtlasManifold, samples: int = 200, seed: int = DEFAULT_SEED) -> AtlasReport:
    if samples < 1:
        raise InvalidParameter("samples must be >= 1")
    rng = np.random.default_rng(seed)
    inv_res = 0.0
    coc_res = 0.0
    landing = True
    details = []
    for m in M.transitions:
        src, tgt = M.chart(m.source), M.chart(m.target)
        pts = _overlap_samples(m, samples, rng)
        img = m(pts)
        if not np.all(m.overlap_target.contains(tgt.reduce(img), tgt.periodic, tol=1e-9)):
            landing = False
            details.append({"transition": f"{m.source}->{m.target}", "problem": "image leaves overlap"})
        inv = M.inverse_of(m)
        if inv is None:
            details.append({"transition": f"{m.source}->{m.target}", "problem": "no inverse"})
            inv_res = max(inv_res, np.inf)
            continue
        back = inv(tgt.reduce(img))
        r = float(np.max(np.abs(src.difference(back, pts))))
        inv_res = max(inv_res, r)
        details.append({"transition": f"{m.source}->{m.target}", "inverse_residual": r})
    # triple overlaps i -> j -> k against a direct i -> k (k != i)
    for m1 in M.transitions:
        for m2 in M.transitions_from(m1.target):
            if m2.target == m1.source or m2 is M.inverse_of(m1):
                continue
            for m3 in M.transitions_from(m1.source):
                if m3.target != m2.target or m3 is m1:
                    continue
                src, mid, tgt = M.chart(m1.source), M.chart(m1.target), M.chart(m2.target)
                pts = _overlap_samples(m1, samples, rng)
                pts = pts[m3.overlap_source.contains(pts, src.periodic)]
                y = mid.reduce(m1(pts)) if len(pts) else pts
                keep = m2.overlap_source.contains(y, mid.periodic) if len(pts) else []
                if not np.any(keep):
                    continue
                a = m2(y[keep])
                b = m3(pts[keep])
                coc_res = max(coc_res, float(np.max(np.abs(tgt.difference(a, b)))))
    return AtlasReport(inv_res, coc_res, landing, details=details)


# builtin atlases --------------------------------------------------------------
def _polar_chart(cid: str, r_lo: float, r_hi: float) -> Chart:
    return Chart(cid, Box((r_lo, 0.0, 0.0), (r_hi, TWO_PI, TWO_PI)), (False, True, True), ("r", "theta", "z"))


def core_charts(cid: str, r_in: float, half_width: float) -> tuple[Chart, SmoothMap, SmoothMap]:
    """Cartesian chart ``cid + "0"`` = (x, y, z) on the square |x|, |y| <= half_width
    around the core of a polar chart; the overlap is the square minus the disk r < r_in."""
    if not 0 < r_in < half_width:
        raise InvalidParameter("need 0 < r_in < half_width")
    c = half_width
    core = Chart(cid + "0", Box((-c, -c, 0.0), (c, c, TWO_PI)), (False, False, True), ("x", "y", "z"))
    r, th, z = E.coords()
    x, y, _ = E.coords()
    polar_ov = PolarSquare((r_in, 0.0, 0.0), (c * math.sqrt(2.0), TWO_PI, TWO_PI), c)
    cart_ov = Annulus((-c, -c, 0.0), (c, c, TWO_PI), r_in, c * math.sqrt(2.0))
    to_cart = SmoothMap(cid, core.id, (r * E.cos(th), r * E.sin(th), z), polar_ov, cart_ov)
    to_polar = SmoothMap(core.id, cid, (E.sqrt(x * x + y * y), E.atan2(y, x), z), cart_ov, polar_ov)
    return core, to_cart, to_polar


CORE_RADII = (0.03, 0.07)


def solid_torus(radius: float = 1.0, cid: str = "D", core: bool = False) -> AtlasManifold:
    """Polar chart (r, theta, z) on r <= radius; with ``core`` the axis is
    covered by a Cartesian chart and the polar chart starts at r = 0.03."""
    if not core:
        return AtlasManifold("solid_torus", (_polar_chart(cid, 0.0, radius),))
    r_in, c = CORE_RADII
    ch, a, b = core_charts(cid, r_in, c)
    return AtlasManifold("solid_torus", (_polar_chart(cid, r_in, radius), ch), (a, b), {"core": True})


def t2_interval(r_lo: float = 0.75, r_hi: float = 2.0, cid: str = "T") -> AtlasManifold:
    """T^2 x I as an annulus times a circle, with polar labels (r, theta, z)."""
    return AtlasManifold("t2_interval", (_polar_chart(cid, r_lo, r_hi),))


def s3_hopf(collar: float = 0.25, core: bool = True) -> AtlasManifold:
    """S^3 as two solid tori (r, theta, z) with r up to 1 + collar.

    The gluing (r, theta, z) -> (2 - r, z, theta) exchanges meridian and
    longitude; the Clifford torus sits at r = 1 in both charts. With ``core``
    each core circle gets a Cartesian chart ("A0", "B0") so geodesics can
    pass through it.
    """
    r_in = CORE_RADII[0] if core else 0.0
    A = _polar_chart("A", r_in, 1.0 + collar)
    B = _polar_chart("B", r_in, 1.0 + collar)
    r, th, z = E.coords()
    ov = Box((1.0 - collar, 0.0, 0.0), (1.0 + collar, TWO_PI, TWO_PI))
    comps = (2.0 - r, z, th)
    charts = [A, B]
    maps = [SmoothMap("A", "B", comps, ov, ov), SmoothMap("B", "A", comps, ov, ov)]
    if core:
        for cid in ("A", "B"):
            ch, a, b = core_charts(cid, *CORE_RADII)
            charts.append(ch)
            maps += [a, b]
    return AtlasManifold("s3_hopf", tuple(charts), tuple(maps),
                         {"leaf_radius": 1.0, "collar": collar, "core": core})


def s2_times_s1(collar: float = 0.25, core: bool = True) -> AtlasManifold:
    """S^2 x S^1 as the trivial circle bundle over an annulus (chart "T",
    r in [1 - collar, 2 + collar]) capped by two solid tori "D" and "E".

    The fibre is the z-circle. "D" is glued by the identity near r = 1 and
    "E" by (r, theta, z) -> (3 - r, -theta, z) near r = 2.
    """
    r_in = CORE_RADII[0] if core else 0.0
    D = _polar_chart("D", r_in, 1.0 + collar)
    E_ = _polar_chart("E", r_in, 1.0 + collar)
    T = _polar_chart("T", 1.0 - collar, 2.0 + collar)
    r, th, z = E.coords()
    ov1 = Box((1.0 - collar, 0.0, 0.0), (1.0 + collar, TWO_PI, TWO_PI))
    ov2 = Box((2.0 - collar, 0.0, 0.0), (2.0 + collar, TWO_PI, TWO_PI))
    ident = (r, th, z)
    flip = (3.0 - r, TWO_PI - th, z)
    charts = [D, T, E_]
    maps = [SmoothMap("D", "T", ident, ov1, ov1), SmoothMap("T", "D", ident, ov1, ov1),
            SmoothMap("T", "E", flip, ov2, ov1), SmoothMap("E", "T", flip, ov1, ov2)]
    if core:
        for cid in ("D", "E"):
            ch, a, b = core_charts(cid, *CORE_RADII)
            charts.append(ch)
            maps += [a, b]
    return AtlasManifold("s2_times_s1", tuple(charts), tuple(maps), {"collar": collar, "core": core})


def _check_hyperbolic(A) -> np.ndarray:
    A = np.asarray(A)
    if A.shape != (2, 2) or not np.all(np.equal(np.mod(A, 1), 0)):
        raise InvalidParameter("A must be a 2x2 integer matrix")
    A = A.astype(int)
    det = int(round(np.linalg.det(A)))
    tr = int(A[0, 0] + A[1, 1])
    if det != 1 or abs(tr) <= 2:
        raise InvalidParameter(f"A must be unimodular (det 1) and hyperbolic (|trace| > 2); got det={det}, trace={tr}")
    return A


def hyperbolic_eigen(A) -> tuple[float, float, np.ndarray, np.ndarray]:
    """(lambda_u, lambda_s, e_u, e_s) with |lambda_u| > 1, unit eigenvectors."""
    A = _check_hyperbolic(A)
    w, V = np.linalg.eig(A.astype(float))
    iu = int(np.argmax(np.abs(w)))
    eu, es = V[:, iu], V[:, 1 - iu]
    eu = eu / np.linalg.norm(eu) * (1 if eu[0] >= 0 else -1)
    es = es / np.linalg.norm(es) * (1 if es[1] >= 0 else -1)
    return float(w[iu]), float(w[1 - iu]), eu, es


def t3_hyperbolic(A=((2, 1), (1, 1)), collar: float = 0.25, eigen: bool = False,
                  half_width: float = 1.0) -> AtlasManifold:
    """T^3_A = T^2 x [0, 1] / (x, 1) ~ (Ax, 0) as one chart with s in [0, 1 + collar].

    With ``eigen=True`` the fibre coordinates are taken along the eigenvectors
    of A, (x, y) = u e_u + v e_s, over a non-periodic window of the fibre
    cover; the gluing is then diagonal, (u, v, 1 + t) -> (lambda_u u, lambda_s v, t).
    """
    A = _check_hyperbolic(A)
    s_box = (0.0, 1.0 + collar)
    x, y, s = E.coords()
    if not eigen:
        chart = Chart("C", Box((0.0, 0.0, s_box[0]), (1.0, 1.0, s_box[1])), (True, True, False), ("x", "y", "s"))
        Ai = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]])
        fwd = (float(A[0, 0]) * x + float(A[0, 1]) * y, float(A[1, 0]) * x + float(A[1, 1]) * y, s - 1.0)
        bwd = (float(Ai[0, 0]) * x + float(Ai[0, 1]) * y, float(Ai[1, 0]) * x + float(Ai[1, 1]) * y, s + 1.0)
        top = Box((0.0, 0.0, 1.0), (1.0, 1.0, 1.0 + collar))
        bot = Box((0.0, 0.0, 0.0), (1.0, 1.0, collar))
        return AtlasManifold(f"t3_hyperbolic", (chart,),
                             (SmoothMap("C", "C", fwd, top, bot), SmoothMap("C", "C", bwd, bot, top)),
                             {"A": A.tolist(), "collar": collar})
    lu, ls, _, _ = hyperbolic_eigen(A)
    L = half_width
    chart = Chart("E", Box((-L, -L, s_box[0]), (L, L, s_box[1])), (False, False, False), ("u", "v", "s"))
    au, as_ = abs(lu), abs(ls)
    top = Box((-L / au, -L, 1.0), (L / au, L, 1.0 + collar))
    bot = Box((-L, -L * as_, 0.0), (L, L * as_, collar))
    fwd = (lu * x, ls * y, s - 1.0)
    bwd = (x / lu, y / ls, s + 1.0)
    return AtlasManifold("t3_hyperbolic_eigen", (chart,),
                         (SmoothMap("E", "E", fwd, top, bot), SmoothMap("E", "E", bwd, bot, top)),
                         {"A": A.tolist(), "collar": collar, "lambda_u": lu, "lambda_s": ls})


def t3_flat(period: float = 1.0) -> AtlasManifold:
    chart = Chart("T", Box((0.0, 0.0, 0.0), (period, period, period)), (True, True, True), ("x", "y", "z"))
    return AtlasManifold("t3_flat", (chart,))


def glue_atlases(name: str, first: AtlasManifold, second: AtlasManifold,
                 maps: Sequence[SmoothMap]) -> AtlasManifold:
    return AtlasManifold(name, first.charts + second.charts,
                         first.transitions + second.transitions + tuple(maps))


def builtin_atlas(name: str, A=None, **kw) -> AtlasManifold:
    if name == "solid_torus":
        return solid_torus(**kw)
    if name == "t2_interval":
        return t2_interval(**kw)
    if name == "s3_hopf":
        return s3_hopf(**kw)
    if name == "t3_hyperbolic":
        return t3_hyperbolic(A if A is not None else ((2, 1), (1, 1)), **kw)
    if name == "t3_flat":
        return t3_flat(**kw)
    if name == "s2_times_s1":
        return s2_times_s1(**kw)
    raise InvalidParameter(f"unknown builtin atlas {name!r}")
