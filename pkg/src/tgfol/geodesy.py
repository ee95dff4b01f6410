"""Christoffel symbols, second fundamental forms, geodesics and linear holonomy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .atlas import Annulus, AtlasManifold, Chart, SmoothMap, DEFAULT_SEED
from .errors import (DegenerateMetric, InvalidParameter, LeftAtlas, LoopNotClosed, NeighborsMixedType,
                     NotOnLeaf, StepUnderflow)
from .foliation import FoliationSpec, TangencyLeaf
from .metric import DET_FLOOR, MetricField, _kernel_basis, _kernel_gram, classify_gram

SWITCH_PENETRATION = 0.6
MIN_STEP = 1e-14


# Christoffel symbols ---------------------------------------------------------------
def _christoffel_from(G: np.ndarray, dG: np.ndarray) -> np.ndarray:
    """Gamma[..., k, i, j] from G[..., i, j] and dG[..., i, j, l] = d_l g_ij."""
    det = np.linalg.det(G)
    if np.any(np.abs(det) <= DET_FLOOR):
        raise DegenerateMetric("metric determinant below 1e-10")
    Gi = np.linalg.inv(G)
    # lowered: Gamma_{l, i, j} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    t1 = np.einsum("...jli->...lij", dG)    # d_i g_jl
    t2 = np.einsum("...ilj->...lij", dG)    # d_j g_il
    t3 = np.einsum("...ijl->...lij", dG)    # d_l g_ij
    low = 0.5 * (t1 + t2 - t3)
    return np.einsum("...kl,...lij->...kij", Gi, low)


def christoffel(g: MetricField, chart: str, x) -> np.ndarray:
    """Gamma^k_ij at one point (3,3,3) or a batch (N,3,3,3)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        G, dG = g.point_dual(chart, x)
        return _christoffel_from(G, dG)
    G, dG = g.with_dual(chart, x)
    return _christoffel_from(G, dG)


def christoffel_fd(g: MetricField, chart: str, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference oracle for the metric derivatives."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    G = g.values(chart, x)
    dG = np.empty(G.shape + (3,))
    for l in range(3):
        e = np.zeros(3)
        e[l] = h
        dG[..., l] = (g.values(chart, x + e) - g.values(chart, x - e)) / (2 * h)
    return _christoffel_from(G, dG)


# second fundamental form ---------------------------------------------------------------
def second_fundamental_form(g: MetricField, F: FoliationSpec, chart: str, pts, normalize: bool = True) -> np.ndarray:
    """II_ab = w(nabla_{U_a} U_b) / |w| for the leaf frame U1 = w x e_k, U2 = w x U1.

    Returns (N, 2, 2). The vectors are rescaled to Euclidean unit length so
    values are comparable across samples.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    c = F.atlas.chart(chart)
    if not np.all(c.contains(pts)):
        raise NotOnLeaf("sample outside the chart domain", witness=pts[~c.contains(pts)][0])
    w, Jw = F.forms[chart].with_dual(pts)       # Jw[n, i, j] = d_j w_i
    wn = np.linalg.norm(w, axis=1)
    k = np.argmin(np.abs(w) / wn[:, None], axis=1)
    e = np.eye(3)[k]
    U1 = np.cross(w, e)
    U2 = np.cross(w, U1)
    # dU[n, :, j] = d_j U
    dU1 = np.stack([np.cross(Jw[:, :, j], e) for j in range(3)], axis=2)
    dU2 = np.stack([np.cross(Jw[:, :, j], U1) + np.cross(w, dU1[:, :, j]) for j in range(3)], axis=2)
    Gam = christoffel(g, chart, pts)
    U = (U1, U2)
    dU = (dU1, dU2)
    II = np.empty((len(pts), 2, 2))
    for a in range(2):
        for b in range(2):
            nab = np.einsum("nkj,nj->nk", dU[b], U[a]) + np.einsum("nkij,ni,nj->nk", Gam, U[a], U[b])
            II[:, a, b] = np.sum(w * nab, axis=1) / wn
    if normalize:
        n1, n2 = np.linalg.norm(U1, axis=1), np.linalg.norm(U2, axis=1)
        scale = np.stack([np.stack([n1 * n1, n1 * n2], 1), np.stack([n2 * n1, n2 * n2], 1)], 1)
        II = II / scale
    return II


def max_second_fundamental_form(g: MetricField, F: FoliationSpec, samples: int = 10_000, seed: int = DEFAULT_SEED,
                                regions: dict | None = None, batch: int = 5000) -> dict:
    rng = np.random.default_rng(seed)
    per = max(1, -(-samples // len(g.charts)))
    worst, witness = 0.0, None
    for cid in g.charts:
        box = (regions or {}).get(cid, F.atlas.chart(cid).domain)
        pts = box.random(per, rng)
        for s in range(0, per, batch):
            II = second_fundamental_form(g, F, cid, pts[s:s + batch])
            m = np.max(np.abs(II), axis=(1, 2))
            j = int(np.argmax(m))
            if m[j] > worst or witness is None:
                worst, witness = float(m[j]), [cid] + pts[s + j].tolist()
    return {"max_II": worst, "samples": per * len(g.charts), "witness": witness}


# geodesics -------------------------------------------------------------------------------
@dataclass
class GeodesicState:
    chart: str
    position: np.ndarray
    velocity: np.ndarray
    affine_parameter: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise InvalidParameter("non-finite geodesic state")


@dataclass
class Trajectory:
    t: list = field(default_factory=list)
    charts: list = field(default_factory=list)
    x: list = field(default_factory=list)
    v: list = field(default_factory=list)
    gnorm: list = field(default_factory=list)
    switches: list = field(default_factory=list)   # (t, from, to, index)

    def append(self, t, chart, x, v, gn):
        self.t.append(float(t))
        self.charts.append(chart)
        self.x.append(np.array(x))
        self.v.append(np.array(v))
        self.gnorm.append(float(gn))

    @property
    def final(self) -> GeodesicState:
        return GeodesicState(self.charts[-1], self.x[-1], self.v[-1], self.t[-1])

    def norm_drift(self) -> float:
        g = np.array(self.gnorm)
        scale = max(abs(g[0]), float(np.max(np.abs(self.v[0]))) ** 2, 1e-300)
        return float(np.max(np.abs(g - g[0])) / scale)

    def rows(self) -> list[list]:
        return [[t, c, *x.tolist(), *v.tolist(), gn]
                for t, c, x, v, gn in zip(self.t, self.charts, self.x, self.v, self.gnorm)]

    def summary(self) -> dict:
        return {"steps": len(self.t) - 1, "t_end": self.t[-1], "chart_switches": len(self.switches),
                "final_chart": self.charts[-1], "final_position": self.x[-1].tolist(),
                "final_velocity": self.v[-1].tolist(), "norm_drift": self.norm_drift()}


# Dormand-Prince 5(4)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = ((),
      (1 / 5,),
      (3 / 40, 9 / 40),
      (44 / 45, -56 / 15, 32 / 9),
      (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
      (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
      (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84))
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


class _Geodesic:
    def __init__(self, g: MetricField, chart: str):
        self.g = g
        self.chart = chart

    def rhs(self, y: np.ndarray) -> np.ndarray:
        G, dG = self.g.point_dual(self.chart, y[:3])
        Gam = _christoffel_from(G, dG)
        v = y[3:]
        return np.concatenate([v, -np.einsum("kij,i,j->k", Gam, v, v)])

    def step(self, y: np.ndarray, h: float, k1: np.ndarray):
        ks = [k1]
        for s in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[s], ks))
            ks.append(self.rhs(yi))
        y5 = y + h * sum(b * k for b, k in zip(_B, ks))
        err = h * sum(e * k for e, k in zip(_E, ks))
        return y5, err, ks[6]

    def norm(self, y: np.ndarray) -> float:
        G = self.g.values(self.chart, y[None, :3])[0]
        return float(y[3:] @ G @ y[3:])


def _inscribed(a: Annulus) -> float:
    return min(a.rmax, -a.lower[0], a.upper[0], -a.lower[1], a.upper[1])


def _penetration(m: SmoothMap, chart: Chart, x: np.ndarray) -> float:
    """How far (0..1) x has moved into the overlap box from its inner edge."""
    if not bool(m.overlap_source.contains(x[None, :], chart.periodic)[0]):
        return -1.0
    box = m.overlap_source
    # core overlaps: measure against the inscribed circle of the Cartesian square
    if isinstance(box, Annulus):
        top = _inscribed(box)
        return (math.hypot(x[0], x[1]) - box.rmin) / (top - box.rmin)
    if isinstance(m.overlap_target, Annulus):
        top = _inscribed(m.overlap_target)
        return (top - x[0]) / (top - m.overlap_target.rmin)
    pen = -1.0
    for i in range(3):
        if chart.periodic[i]:
            continue
        lo, hi = m.overlap_source.lower[i], m.overlap_source.upper[i]
        clo, chi = chart.domain.lower[i], chart.domain.upper[i]
        w = hi - lo
        if w <= 0:
            continue
        if lo > clo + 1e-12 and hi >= chi - 1e-12:
            pen = max(pen, (x[i] - lo) / w)
        elif hi < chi - 1e-12 and lo <= clo + 1e-12:
            pen = max(pen, (hi - x[i]) / w)
    return pen


def _maybe_switch(atlas: AtlasManifold, chart: str, y: np.ndarray):
    c = atlas.chart(chart)
    best, pen = None, SWITCH_PENETRATION
    for m in atlas.transitions_from(chart):
        p = _penetration(m, c, y[:3])
        if p > pen:
            best, pen = m, p
    if best is None:
        return chart, y
    x2 = best(y[None, :3])[0]
    J = best.jacobian(y[None, :3])[0]
    tgt = atlas.chart(best.target)
    return best.target, np.concatenate([tgt.reduce(x2[None, :])[0], J @ y[3:]])


def integrate_geodesic(g: MetricField, s0: GeodesicState, t_end: float, tol: float = 1e-10,
                       atlas: AtlasManifold | None = None, max_steps: int = 200_000, h0: float | None = None,
                       stop=None, max_step: float = math.inf) -> Trajectory:
    """Adaptive Dormand-Prince integration of x'' + Gamma(x', x') = 0 across charts.

    ``t_end`` may be negative (integrates backward). ``stop(t, chart, y)``
    may return True to end the run after an accepted step.
    """
    if tol <= 0:
        raise InvalidParameter("tol must be positive")
    direction = 1.0 if t_end >= s0.affine_parameter else -1.0
    chart = s0.chart
    ode = _Geodesic(g, chart)
    y = np.concatenate([s0.position, s0.velocity])
    if atlas is not None:
        if not bool(atlas.chart(chart).contains(y[None, :3])[0]):
            raise LeftAtlas("initial point outside its chart", witness=y[:3].tolist())
        y[:3] = atlas.chart(chart).reduce(y[None, :3])[0]
    t = s0.affine_parameter
    traj = Trajectory()
    traj.append(t, chart, y[:3], y[3:], ode.norm(y))
    k1 = ode.rhs(y)
    h = h0 or min(abs(t_end - t), 0.01 / max(1.0, float(np.linalg.norm(y[3:])))) or 1e-3
    err_prev = 1.0
    for _ in range(max_steps):
        if direction * (t_end - t) <= 1e-15:
            break
        h = min(h, abs(t_end - t), max_step)
        y_new, err_vec, k7 = ode.step(y, direction * h, k1)
        scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2))) or 1e-16
        if atlas is not None and not bool(atlas.chart(chart).contains(y_new[None, :3], tol=1e-9)[0]):
            err = max(err, 2.0)
        if err <= 1.0:
            t += direction * h
            y, k1 = y_new, k7
            if atlas is not None:
                c = atlas.chart(chart)
                y[:3] = c.reduce(y[None, :3])[0]
                new_chart, y2 = _maybe_switch(atlas, chart, y)
                if y2 is not y:  # self-transitions keep the chart id
                    traj.switches.append((t, chart, new_chart, len(traj.t)))
                    chart, y = new_chart, y2
                    ode = _Geodesic(g, chart)
                    k1 = ode.rhs(y)
            traj.append(t, chart, y[:3], y[3:], ode.norm(y))
            fac = 0.9 * err ** (-0.7 / 5) * err_prev ** (0.4 / 5)
            h *= min(5.0, max(0.2, fac))
            err_prev = max(err, 1e-4)
            if stop is not None and stop(t, chart, y):
                break
        else:
            h *= max(0.1, 0.9 * err ** (-1 / 5))
            if atlas is not None and err >= 2.0 and h < 1e-9:
                raise LeftAtlas("trajectory leaves every chart", witness=y[:3].tolist())
        if h < MIN_STEP:
            raise StepUnderflow(f"step size below {MIN_STEP:g} at t={t:.6g}", witness=y[:3].tolist())
    else:
        raise StepUnderflow("maximum number of steps reached", witness=y[:3].tolist())
    return traj


def _representations(atlas: AtlasManifold | None, s: GeodesicState, chart: str):
    """The state s written in ``chart``: directly, and through every applicable transition."""
    out = [(s.position, s.velocity)] if s.chart == chart else []
    if atlas is None:
        return out
    src = atlas.chart(s.chart)
    for m in atlas.transitions_from(s.chart):
        if m.target != chart or not bool(m.overlap_source.contains(s.position[None], src.periodic, tol=1e-9)[0]):
            continue
        x = atlas.chart(chart).reduce(m(s.position[None]))[0]
        out.append((x, m.jacobian(s.position[None])[0] @ s.velocity))
    return out


def round_trip_error(g: MetricField, s0: GeodesicState, T: float, tol: float = 1e-10,
                     atlas: AtlasManifold | None = None) -> float:
    """Integrate for time T, reverse the velocity, integrate back; max-norm distance to the start."""
    fwd = integrate_geodesic(g, s0, s0.affine_parameter + T, tol, atlas).final
    back = GeodesicState(fwd.chart, fwd.position, -fwd.velocity, 0.0)
    ret = integrate_geodesic(g, back, T, tol, atlas).final
    reps = _representations(atlas, ret, s0.chart)
    if not reps:
        raise LeftAtlas("round trip ended outside the starting chart", witness=ret.position.tolist())
    c = atlas.chart(s0.chart) if atlas else None
    errs = []
    for x, v in reps:
        dx = c.difference(x[None], s0.position[None])[0] if c else x - s0.position
        errs.append(float(max(np.max(np.abs(dx)), np.max(np.abs(-v - s0.velocity)))))
    return min(errs)


def transverse_drift(traj: Trajectory, F: FoliationSpec) -> float:
    """|int w(c') / |w| dt|: signed displacement across the leaves, a
    first-integral-free substitute for a leaf function."""
    t = np.array(traj.t)
    vals = np.empty(len(t))
    for cid in set(traj.charts):
        idx = [i for i, c in enumerate(traj.charts) if c == cid]
        x = np.array([traj.x[i] for i in idx])
        v = np.array([traj.v[i] for i in idx])
        w = F.forms[cid](x)
        vals[idx] = np.sum(w * v, axis=1) / np.linalg.norm(w, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(t))])
    return float(np.max(np.abs(cum)))


def leaf_tangent_velocity(F: FoliationSpec, chart: str, x, rng, g: MetricField | None = None) -> np.ndarray:
    """Random unit vector in ker w at x."""
    w = F.forms[chart](np.atleast_2d(x))
    u1, u2 = _kernel_basis(w)
    a = rng.normal(size=2)
    v = a[0] * u1[0] + a[1] * u2[0]
    return v / np.linalg.norm(v)


# holonomy ----------------------------------------------------------------------------------
@dataclass
class HolonomyLoop:
    traversals: list[tuple[SmoothMap, np.ndarray]]
    normal_axis: int
    start: np.ndarray | None = None
    chart: str | None = None


def linear_holonomy(F: FoliationSpec | None, loop: HolonomyLoop, tol: float = 1e-9) -> float:
    """Product of d psi_n / d x_n over the traversals; checks the loop closes in the normal coordinate."""
    n = loop.normal_axis
    lam = 1.0
    if not loop.traversals:
        return 1.0
    start = np.asarray(loop.start if loop.start is not None else loop.traversals[0][1], dtype=float)
    cur = start[n]
    for m, p in loop.traversals:
        p = np.asarray(p, dtype=float)
        if abs(p[n] - cur) > tol:
            raise LoopNotClosed(f"traversal point leaves the leaf (normal coordinate {p[n]:.12g} vs {cur:.12g})",
                                witness=p.tolist())
        J = m.jacobian(p[None, :])[0]
        if np.max(np.abs(np.delete(J[n], n))) > tol:
            raise LoopNotClosed("transition mixes the normal coordinate with leaf directions", witness=p.tolist())
        lam *= float(J[n, n])
        cur = float(m(p[None, :])[0, n])
    if abs(cur - start[n]) > tol:
        raise LoopNotClosed(f"loop returns at normal coordinate {cur:.12g}, started at {start[n]:.12g}",
                            witness=start.tolist())
    return lam


@dataclass
class CompletenessVerdict:
    complete: bool
    linear_holonomy: float
    c_drift: float
    loop_times: list = field(default_factory=list)
    speed_ratio: float | None = None
    total_affine_length: float | None = None
    incomplete_direction: str | None = None
    neighbor_type: str = ""

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["lambda"] = d.pop("linear_holonomy")
        return d


def null_direction(g: MetricField, F: FoliationSpec, chart: str, x) -> np.ndarray:
    w = F.forms[chart](np.atleast_2d(x))
    G2 = _kernel_gram(g.values(chart, np.atleast_2d(x)), w)[0]
    u1, u2 = _kernel_basis(w)
    ev, V = np.linalg.eigh(G2)
    k = int(np.argmin(np.abs(ev)))
    v = V[0, k] * u1[0] + V[1, k] * u2[0]
    return v / np.linalg.norm(v)


def _neighbor_types(g, F, leaf: TangencyLeaf, offsets=(0.02, 0.05), samples=32, seed=DEFAULT_SEED):
    rng = np.random.default_rng(seed)
    chart = F.atlas.chart(leaf.chart)
    base = leaf.project(chart.domain.random(samples, rng, inset=1e-6))
    types = set()
    for side in (-1, 1):
        for d in offsets:
            pts = leaf.offset(base, side * d)
            pts = pts[chart.contains(pts)]
            if not len(pts):
                continue
            G2 = _kernel_gram(g.values(leaf.chart, pts), F.forms[leaf.chart](pts))
            t, _ = classify_gram(G2, strict=False)
            types |= {x for x in t if x != "ambiguous"}
    return types


def null_completeness(g: MetricField, F: FoliationSpec, leaf: TangencyLeaf, loop: HolonomyLoop,
                      x0=None, v0=None, tol: float = 1e-10, loops: int = 3, t_max: float = 50.0,
                      flow=None) -> CompletenessVerdict:
    """Completeness of the closed null geodesic in a lightlike leaf from its linear holonomy.

    Integrates the geodesic to confirm the conserved quantity C = g(c', d_n)
    within each chart and, when it closes up, records the affine time of each
    loop; for lambda != 1 the total affine length in the incomplete direction
    is the geometric series T0 rho / (rho - 1) with rho = max(lambda, 1/lambda).
    """
    types = _neighbor_types(g, F, leaf)
    if len(types) != 1:
        raise NeighborsMixedType(f"neighbouring leaves have types {sorted(types)}")
    lam = linear_holonomy(F, loop)
    atlas = F.atlas
    chart = loop.chart or leaf.chart
    x0 = np.asarray(x0 if x0 is not None else (loop.start if loop.start is not None else loop.traversals[0][1]),
                    dtype=float)
    x0 = leaf.project(x0[None])[0]
    if v0 is None:
        v0 = null_direction(g, F, chart, x0)
        if flow is not None and float(v0 @ flow.fields[chart](x0[None])[0]) < 0:
            v0 = -v0
    v0 = np.asarray(v0, dtype=float)
    n = loop.normal_axis

    def run(vstart, nloops):
        times, tstarts = [], [0.0]
        state = {"left": False, "count": 0}
        c0 = atlas.chart(chart)
        vhat = vstart / np.linalg.norm(vstart)

        def stop(t, cid, y):
            if cid != chart:
                state["left"] = True
                return False
            d = c0.difference(y[None, :3], x0[None])[0]
            along = float(d @ vhat)
            perp = float(np.linalg.norm(d - along * vhat))
            if not state["left"] and np.linalg.norm(d) > 0.3:
                state["left"] = True
            if state["left"] and perp < 1e-3 and 0.0 <= along < 0.2:
                state["left"] = False
                state["count"] += 1
                times.append(t)
                return state["count"] >= nloops
            return False

        # capped steps so the return to x0 is seen
        traj = integrate_geodesic(g, GeodesicState(chart, x0, vstart), t_max, tol, atlas, stop=stop,
                                  max_step=0.1 / float(np.linalg.norm(vstart)))
        return traj, times

    traj, times = run(v0, loops)
    drift = _c_drift(g, traj, n)
    loop_times = _refine_loop_times(g, traj, times, x0, v0, atlas, chart, tol)
    verdict = CompletenessVerdict(abs(lam - 1.0) < 1e-9, lam, drift, neighbor_type=types.pop())
    if loop_times:
        idx = traj.t.index(times[0])
        verdict.speed_ratio = float(traj.v[idx] @ v0 / (v0 @ v0))
        verdict.loop_times = loop_times
    if not verdict.complete:
        rho = max(abs(lam), 1.0 / abs(lam))
        if verdict.speed_ratio is not None and verdict.speed_ratio < 1.0:
            traj_b, times_b = run(-v0, loops)
            verdict.loop_times = _refine_loop_times(g, traj_b, times_b, x0, -v0, atlas, chart, tol)
            verdict.incomplete_direction = "backward"
            verdict.c_drift = max(drift, _c_drift(g, traj_b, n))
        else:
            verdict.incomplete_direction = "forward"
        if verdict.loop_times:
            verdict.total_affine_length = verdict.loop_times[0] * rho / (rho - 1.0)
    return verdict


def _refine_loop_times(g, traj, times, x0, v0, atlas, chart, tol) -> list[float]:
    """Affine time of each loop: crossing of the plane through x0 normal to v0,
    located by secant iteration on exact Dormand-Prince steps."""
    out, prev = [], 0.0
    c0 = atlas.chart(chart)
    for tk in times:
        i = traj.t.index(tk)
        ode = _Geodesic(g, chart)
        y = np.concatenate([traj.x[i], traj.v[i]])
        direction = np.sign(tk - traj.t[0]) or 1.0

        def phase(h):
            yy = y
            if h != 0.0:
                yy, _, _ = ode.step(y, h, ode.rhs(y))
            d = c0.difference(yy[None, :3], x0[None])[0]
            return float(d @ v0)

        a, b = 0.0, -direction * 1e-3
        fa, fb = phase(a), phase(b)
        for _ in range(30):
            if fb == fa:
                break
            c = b - fb * (b - a) / (fb - fa)
            a, fa = b, fb
            b, fb = c, phase(c)
            if abs(fb) < 1e-14:
                break
        t_cross = tk + b
        out.append(abs(t_cross - prev))
        prev = t_cross
    return out


def _c_drift(g: MetricField, traj: Trajectory, n: int) -> float:
    """Max relative change of C = g(c', d_n) between chart switches."""
    bounds = [0] + [s[3] for s in traj.switches] + [len(traj.t)]
    worst = 0.0
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi - lo < 2:
            continue
        cid = traj.charts[lo]
        x = np.array(traj.x[lo:hi])
        v = np.array(traj.v[lo:hi])
        G = g.values(cid, x)
        C = np.einsum("ni,ni->n", v, G[:, :, n])
        worst = max(worst, float(np.max(np.abs(C - C[0])) / max(abs(C[0]), 1e-300)))
    return worst
