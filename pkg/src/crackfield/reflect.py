"""Higher-order reflection of displacement fields across horizontal lines and
the blow-up competitor assembled from two reflected half-fields.

The reflection below the line x2 = tau combines two pullbacks with fixed
coefficients,

    v1(x1, x2) = -2 u1(x1, 3 tau - 2 x2) + 3 u1(x1, 2 tau - x2)
    v2(x1, x2) =  4 u2(x1, 3 tau - 2 x2) - 3 u2(x1, 2 tau - x2)

whose sums (-2 + 3 = 1, 4 - 3 = 1) glue the trace continuously while keeping
the strain p-integrable; the symmetric version extends a field upward across
x2 = -tau.  The blow-up competitor around a crack point rotates the field into
the frame of the local crack graph, reflects away both sides, repairs each
reflection with the ball cover, and glues along the crack polyline.  Limits in
the shrinking-window parameter are replaced by geometric schedules with fitted
decay exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom import Disk, JumpSet, Point2, Polyline, Rect, Segment, h1_length
from .field import (FieldMap, Piece, PiecewiseField, SmoothMap,
                    graph_above_mask)
from .integrate import gauss_segment, integrate_region
from .diskmesh import MeshParams
from .cover import repair

__all__ = ["ReflectionConfig", "reflect_above", "reflect_below",
           "build_blowup", "blowup_schedule", "GeometrySeparationError"]


class GeometrySeparationError(ValueError):
    """The crack graph fails to separate the blow-up window (rho too large)."""


# ---------------------------------------------------------------------------
# reflected half-fields
# ---------------------------------------------------------------------------


class _ReflectedHalf(SmoothMap):
    """The two-pullback combination on one side of the reflection line."""

    def __init__(self, base: SmoothMap, tau: float, above_source: bool):
        self.base = base
        self.tau = tau
        self.above_source = above_source  # True: extend downward from above

    def _maps(self, x2):
        t = self.tau
        if self.above_source:
            return 3.0 * t - 2.0 * x2, 2.0 * t - x2
        return -3.0 * t - 2.0 * x2, -2.0 * t - x2

    def value(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        a2, b2 = self._maps(pts[:, 1])
        A = np.column_stack([pts[:, 0], a2])
        B = np.column_stack([pts[:, 0], b2])
        uA = self.base.value(A)
        uB = self.base.value(B)
        out = np.empty_like(uA)
        out[:, 0] = -2.0 * uA[:, 0] + 3.0 * uB[:, 0]
        out[:, 1] = 4.0 * uA[:, 1] - 3.0 * uB[:, 1]
        return out

    def grad(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        a2, b2 = self._maps(pts[:, 1])
        A = np.column_stack([pts[:, 0], a2])
        B = np.column_stack([pts[:, 0], b2])
        GA = self.base.grad(A)
        GB = self.base.grad(B)
        out = np.empty_like(GA)
        # x2-chain factors are -2 for the first pullback, -1 for the second
        out[:, 0, 0] = -2.0 * GA[:, 0, 0] + 3.0 * GB[:, 0, 0]
        out[:, 0, 1] = 4.0 * GA[:, 0, 1] - 3.0 * GB[:, 0, 1]
        out[:, 1, 0] = 4.0 * GA[:, 1, 0] - 3.0 * GB[:, 1, 0]
        out[:, 1, 1] = -8.0 * GA[:, 1, 1] + 3.0 * GB[:, 1, 1]
        return out


def _split_edge_at_line(e: Segment, y: float):
    """(pieces_above, pieces_below) of an edge split at the line x2 = y."""
    ya, yb = e.a.y, e.b.y
    if ya >= y and yb >= y:
        return [e], []
    if ya <= y and yb <= y:
        return [], [e]
    t = (y - ya) / (yb - ya)
    mid = e.point_at(t)
    first, second = Segment(e.a, mid), Segment(mid, e.b)
    if ya > y:
        return [first], [second]
    return [second], [first]


def _reflected_crack(crack: JumpSet, tau: float, above_source: bool) -> JumpSet:
    """Crack of the reflected field: source-side pieces survive, and each
    sends two images into the replaced half with the coefficient-scaled
    amplitudes; replaced-side pieces are dropped."""
    line = tau if above_source else -tau
    pls, amps = [], []

    def keep(seg: Segment, amp):
        pls.append(Polyline((seg.a, seg.b)))
        amps.append((amp,) if amp is not None else None)

    for e, amp in crack.edges_with_amps():
        above, below = _split_edge_at_line(e, line)
        source = above if above_source else below
        for seg in source:
            if seg.a.y == line and seg.b.y == line:
                # the reflection takes one-sided traces on the line: healed
                continue
            keep(seg, amp)
            for coeff, mapper in (((-2.0, 4.0), 0), ((3.0, -3.0), 1)):
                def img(pt):
                    if above_source:
                        y = (3.0 * tau - pt.y) / 2.0 if mapper == 0 else 2.0 * tau - pt.y
                    else:
                        y = (-3.0 * tau - pt.y) / 2.0 if mapper == 0 else -2.0 * tau - pt.y
                    return Point2(pt.x, y)

                pa, pb = img(seg.a), img(seg.b)
                if pa == pb:
                    continue
                a_img = None
                if amp is not None:
                    a_img = (coeff[0] * amp[0], coeff[1] * amp[1])
                pls.append(Polyline((pa, pb)))
                amps.append((a_img,) if a_img is not None else None)
    return JumpSet(tuple(pls), tuple(amps))


def reflect_above(u: PiecewiseField, tau: float, window: Disk) -> PiecewiseField:
    """Field equal to u on {x2 >= tau} and to the two-pullback reflection of
    the upper half below the line."""

    def below_mask(pts):
        return np.atleast_2d(pts)[:, 1] < tau

    half = _ReflectedHalf(FieldMap(u), tau, above_source=True)
    pieces = [Piece("reflected", half, below_mask)] + list(u.pieces)
    crack = _reflected_crack(u.crack, tau, above_source=True)
    return PiecewiseField(pieces, crack, window, u.name + ":refl+")


def reflect_below(u: PiecewiseField, tau: float, window: Disk) -> PiecewiseField:
    """Mirror image: u kept on {x2 <= -tau}, extension above the line."""

    def above_mask(pts):
        return np.atleast_2d(pts)[:, 1] > -tau

    half = _ReflectedHalf(FieldMap(u), tau, above_source=False)
    pieces = [Piece("reflected", half, above_mask)] + list(u.pieces)
    crack = _reflected_crack(u.crack, tau, above_source=False)
    return PiecewiseField(pieces, crack, window, u.name + ":refl-")


# ---------------------------------------------------------------------------
# blow-up competitor
# ---------------------------------------------------------------------------


@dataclass
class ReflectionConfig:
    tau: float
    x0: tuple
    rho: float
    gamma: np.ndarray      # vertices of the separating graph in the local frame


class _RotatedFrame(SmoothMap):
    """u viewed in the frame translated to x0 and rotated by R^T."""

    def __init__(self, field: PiecewiseField, x0, R):
        self.field = field
        self.x0 = np.asarray(x0, dtype=float)
        self.R = np.asarray(R, dtype=float)

    def value(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        world = self.x0[None, :] + pts @ self.R.T
        return self.field.value(world) @ self.R

    def grad(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        world = self.x0[None, :] + pts @ self.R.T
        G = self.field.grad(world)
        return np.einsum("ji,njk,kl->nil", self.R, G, self.R)


def _to_local_frame(u: PiecewiseField, x0, edge_dir) -> PiecewiseField:
    x0 = np.asarray(x0, dtype=float)
    t = np.asarray(edge_dir, dtype=float)
    t = t / np.hypot(*t)
    R = np.column_stack([t, [-t[1], t[0]]])   # world = x0 + R @ local

    def fwd(px, py):
        v = np.array([px, py]) - x0
        return (float(v @ R[:, 0]), float(v @ R[:, 1]))

    crack = u.crack.transformed(fwd)
    # rotate declared amplitudes into the local frame
    amps = []
    for amp in (u.crack.amps or (None,) * len(u.crack.polylines)):
        if amp is None:
            amps.append(None)
        else:
            amps.append(tuple((float(np.array(a) @ R[:, 0]),
                               float(np.array(a) @ R[:, 1])) for a in amp))
    crack = JumpSet(crack.polylines, tuple(amps))
    return PiecewiseField([Piece("all", _RotatedFrame(u, x0, R))], crack,
                          None, u.name + ":local")


def _crack_edge_at(u: PiecewiseField, x0) -> tuple[Segment, np.ndarray]:
    x0 = np.asarray(x0, dtype=float)
    best, bd = None, math.inf
    for e in u.crack.edges():
        a, b = e.a.as_array(), e.b.as_array()
        ab = b - a
        t = np.clip(float((x0 - a) @ ab) / float(ab @ ab), 0.0, 1.0)
        d = float(np.hypot(*(a + t * ab - x0)))
        if d < bd:
            bd, best = d, e
    if best is None or bd > 1e-9:
        raise ValueError(f"x0={x0} does not lie on a crack edge (dist {bd})")
    d = best.b.as_array() - best.a.as_array()
    return best, d / np.hypot(*d)


def _gamma_graph(crack: JumpSet, span: float) -> np.ndarray:
    """Vertices of the separating polyline graph over x1 in [-span, span];
    errors if the crack in the window is not a graph spanning it."""
    pls = [pl for pl in crack.polylines]
    best = None
    for pl in pls:
        V = np.array([[v.x, v.y] for v in pl.vertices])
        xs = V[:, 0]
        if xs.min() <= -span and xs.max() >= span:
            if not (np.all(np.diff(xs) > 0) or np.all(np.diff(xs) < 0)):
                continue
            if np.all(np.diff(xs) < 0):
                V = V[::-1]
            best = V
            break
    if best is None:
        raise GeometrySeparationError(
            f"no crack polyline spans x1 in [-{span}, {span}] as a graph")
    return best


def build_blowup(u: PiecewiseField, x0, rho: float, params: MeshParams,
                 p: float = 2.0) -> tuple[PiecewiseField, dict]:
    """Blow-up competitor at one window radius: reflect both sides of the
    local crack graph away from the line band |x2| <= tau, repair each
    reflection on B_2rho with s = 1/2, and glue along the graph."""
    edge, direction = _crack_edge_at(u, x0)
    ul = _to_local_frame(u, x0, direction)
    gamma = _gamma_graph(ul.crack, 6.0 * rho)
    # the band height over the 6x window
    xs = np.concatenate([[-6.0 * rho], gamma[:, 0], [6.0 * rho]])
    xs = xs[(xs >= -6.0 * rho) & (xs <= 6.0 * rho)]
    hs = np.interp(xs, gamma[:, 0], gamma[:, 1])
    vert_in = gamma[(np.abs(gamma[:, 0]) <= 6.0 * rho)]
    tau = float(max(np.abs(hs).max(),
                    np.abs(vert_in[:, 1]).max() if len(vert_in) else 0.0))
    if tau > 0.5 * rho:
        raise GeometrySeparationError(
            f"band height tau={tau:.3g} too large for rho={rho:.3g}")
    window = Disk(Point2(0.0, 0.0), 2.0 * rho)
    up = reflect_above(ul, tau, window)
    dn = reflect_below(ul, tau, window)
    rep_up = repair(up, rho, 0.5, params, p=p, estimate_quality=False)
    rep_dn = repair(dn, rho, 0.5, params, p=p, estimate_quality=False)

    gamma_crack = _clip_graph_crack(ul.crack, gamma, 2.0 * rho)
    pieces = [Piece("above", FieldMap(rep_up.w), graph_above_mask(gamma)),
              Piece("below", FieldMap(rep_dn.w))]
    v = PiecewiseField(pieces, gamma_crack, window, "blowup")

    config = ReflectionConfig(tau=tau, x0=tuple(np.asarray(x0, dtype=float)),
                              rho=rho, gamma=gamma)
    report = _blowup_metrics(ul, v, config, rep_up, rep_dn, p)
    return v, report


def _clip_graph_crack(crack: JumpSet, gamma: np.ndarray, radius: float) -> JumpSet:
    disk = Disk(Point2(0.0, 0.0), radius)
    pls, amps = [], []
    gset = {tuple(map(float, g)) for g in gamma}
    for pl, amp in zip(crack.polylines, crack.amps or (None,) * len(crack.polylines)):
        V = [(v.x, v.y) for v in pl.vertices]
        if not any(tuple(map(float, g)) in gset for g in V):
            continue
        edges = pl.edges()
        for i, e in enumerate(edges):
            for lo, hi in disk.clip_segment(e):
                if hi - lo < 1e-15:
                    continue
                pls.append(Polyline((e.point_at(lo), e.point_at(hi))))
                if amp is not None:
                    a = amp[i] if i < len(amp) else amp[-1]
                    amps.append((a,))
                else:
                    amps.append(None)
    return JumpSet(tuple(pls), tuple(amps))


def _blowup_metrics(ul: PiecewiseField, v: PiecewiseField,
                    config: ReflectionConfig, rep_up, rep_dn, p: float) -> dict:
    rho = config.rho
    ball = Disk(Point2(0.0, 0.0), rho)
    gamma = config.gamma

    # refinement hints: the graph, the reflection lines, mesh boundaries
    hint_edges = list(v.crack.polylines)
    for tau_line in (config.tau, -config.tau):
        hint_edges.append(Polyline((Point2(-2.0 * rho, tau_line),
                                    Point2(2.0 * rho, tau_line))))
    hints = JumpSet(tuple(hint_edges), tuple(None for _ in hint_edges))

    # (i) new jump length: repair glue interfaces inside the ball
    extra = 0.0
    for rep in (rep_up, rep_dn):
        for (_c, _R, poly_pts) in rep.ball_meshes:
            P = np.asarray(poly_pts, dtype=float)
            ring = Polyline(tuple(Point2(*q) for q in
                                  np.vstack([P, P[:1]])))
            extra += h1_length(ring, ball)
    q1 = extra / rho

    # (ii) rho^{-1} int |grad v|^p
    def gradp(pts):
        G = v.grad(pts)
        return np.einsum("nij,nij->n", G, G) ** (p / 2.0)

    q2 = integrate_region(gradp, ball, crack=hints, rel_tol=1e-4,
                          max_depth=8) / rho

    # (iii) mismatch area / rho^2 on a deterministic lattice
    n = 160
    xs = -rho + (np.arange(n) + 0.5) / n * 2 * rho
    XX, YY = np.meshgrid(xs, xs, indexing="ij")
    pts = np.column_stack([XX.ravel(), YY.ravel()])
    pts = pts[(pts[:, 0] ** 2 + pts[:, 1] ** 2) <= rho * rho]
    dist_to_crack = ul.crack.distance(pts)
    pts = pts[dist_to_crack > 1e-12 * rho]
    dv = v.value(pts) - ul.value(pts)
    scale = max(float(np.hypot(*ul.value(pts).T).max()), 1e-30)
    mism = np.hypot(dv[:, 0], dv[:, 1]) > 1e-10 * scale
    q3 = float(mism.mean()) * math.pi

    # (iv) rho^{-2} int |v - u|
    def l1(pts):
        dv = v.value(pts) - ul.value(pts)
        return np.hypot(dv[:, 0], dv[:, 1])

    q4 = integrate_region(l1, ball, crack=hints, rel_tol=1e-4,
                          max_depth=8) / rho ** 2

    # (v) rho^{-(p+1)} int |v - u_{x0}|^p with the two-sided constant state
    e0 = _graph_edge_through_origin(ul, gamma)
    tr_plus = ul.jump_values(e0, np.array([_origin_param(e0)]), None)
    up0 = _one_sided(ul, e0, plus=True)
    dn0 = _one_sided(ul, e0, plus=False)

    def vminus_state(pts):
        above = pts[:, 1] > np.interp(pts[:, 0], gamma[:, 0], gamma[:, 1])
        ref = np.where(above[:, None], up0[None, :], dn0[None, :])
        dv = v.value(pts) - ref
        return (dv[:, 0] ** 2 + dv[:, 1] ** 2) ** (p / 2.0)

    q5 = integrate_region(vminus_state, ball, crack=hints, rel_tol=1e-4,
                          max_depth=8) / rho ** (p + 1.0)

    # (vi) rho^{-1} int over the graph of |[v] - [u]|
    q6 = 0.0
    for pl, _amp in zip(ul.crack.polylines, ul.crack.amps or ()):
        pass
    for e, amp in _graph_edges(ul, gamma):
        L = e.length()
        for lo, hi in ball.clip_segment(e):
            ss = np.linspace(lo, hi, 17)
            mid = 0.5 * (ss[:-1] + ss[1:])
            jv = v.jump_values(e, mid, None)
            ju = ul.jump_values(e, mid, amp)
            dj = np.hypot(jv[:, 0] - ju[:, 0], jv[:, 1] - ju[:, 1])
            q6 += float(dj.mean()) * (hi - lo) * L
    q6 /= rho

    return {"rho": rho, "tau": config.tau,
            "q1_new_jump": q1, "q2_gradient": q2, "q3_mismatch_area": q3,
            "q4_l1": q4, "q5_state": q5, "q6_jump_gap": q6,
            "balls_up": len(rep_up.family.balls),
            "balls_dn": len(rep_dn.family.balls)}


def _graph_edges(ul: PiecewiseField, gamma: np.ndarray):
    gset = {(float(a), float(b)) for a, b in gamma}
    for pl, amp in zip(ul.crack.polylines,
                       ul.crack.amps or (None,) * len(ul.crack.polylines)):
        V = [(float(v.x), float(v.y)) for v in pl.vertices]
        if not any(g in gset for g in V):
            continue
        for i, e in enumerate(pl.edges()):
            a = None
            if amp is not None:
                a = amp[i] if i < len(amp) else amp[-1]
            yield e, a


def _graph_edge_through_origin(ul: PiecewiseField, gamma: np.ndarray) -> Segment:
    best, bd = None, math.inf
    origin = np.zeros(2)
    for e, _amp in _graph_edges(ul, gamma):
        a, b = e.a.as_array(), e.b.as_array()
        ab = b - a
        t = np.clip(float((origin - a) @ ab) / float(ab @ ab), 0.0, 1.0)
        d = float(np.hypot(*(a + t * ab)))
        if d < bd:
            bd, best = d, e
    if best is None:
        raise GeometrySeparationError("no graph edge near the blow-up point")
    return best


def _origin_param(e: Segment) -> float:
    a, b = e.a.as_array(), e.b.as_array()
    ab = b - a
    return float(np.clip(-(a @ ab) / (ab @ ab), 0.0, 1.0))


def _one_sided(ul: PiecewiseField, e: Segment, plus: bool) -> np.ndarray:
    s = _origin_param(e)
    nu = ul.edge_normal(e)
    pt = e.point_at(s).as_array()
    eps = 1e-9 * max(e.length(), 1.0)
    probe = pt + (eps if plus else -eps) * nu
    return ul.value(probe[None, :])[0]


def blowup_schedule(u: PiecewiseField, x0, rho0: float, params: MeshParams,
                    p: float = 2.0, n_points: int = 6) -> dict:
    """The six window quantities along rho = rho0 2^{-m}, with log-log decay
    exponents fitted on the strictly positive entries (identically zero
    sequences count as already decayed and report an infinite exponent)."""
    rows = []
    for m in range(n_points):
        rho = rho0 * 2.0 ** (-m)
        _v, rep = build_blowup(u, x0, rho, params, p=p)
        rows.append(rep)
    keys = ["q1_new_jump", "q2_gradient", "q3_mismatch_area", "q4_l1",
            "q5_state", "q6_jump_gap"]
    fits = {}
    for k in keys:
        qs = np.array([r[k] for r in rows])
        rhos = np.array([r["rho"] for r in rows])
        pos = qs > 0
        if pos.sum() == 0:
            fits[k] = {"exponent": math.inf, "identically_zero": True,
                       "decreasing": True}
            continue
        if pos.sum() == 1:
            fits[k] = {"exponent": math.inf, "identically_zero": False,
                       "decreasing": bool(qs[-1] <= qs[0])}
            continue
        slope = np.polyfit(np.log(rhos[pos]), np.log(qs[pos]), 1)[0]
        fits[k] = {"exponent": float(slope), "identically_zero": False,
                   "decreasing": bool(np.all(np.diff(qs[pos]) <= 1e-12))}
    return {"rows": rows, "fits": fits}
