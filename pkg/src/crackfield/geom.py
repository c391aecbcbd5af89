"""Exact 2D computational geometry for crack-carrying displacement fields.

Crossing predicates (segment vs. crack edge) are computed with exact rational
arithmetic on the float coordinates, so crossing *counts* are never subject to
rounding: a float is a binary rational and ``fractions.Fraction`` keeps the
orientation sign exact.  Lengths, by contrast, are plain floating point; they
only ever enter inequalities with O(1) slack.

Regions (disk, annulus, circle, half-plane, rectangle, polygon, capsule) share
one primitive: clipping a segment to a sorted list of parameter intervals.
One-dimensional length of a polyline inside a region is the sum of clipped
interval lengths, which makes it exactly additive over disjoint regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Point2",
    "Segment",
    "Polyline",
    "Disk",
    "Annulus",
    "Circle",
    "HalfPlane",
    "Rect",
    "PolygonRegion",
    "Capsule",
    "SkewAffine",
    "JumpSet",
    "GeometryError",
    "CollinearOverlapError",
    "DegenerateRegionError",
    "RankDeficiencyError",
    "h1_length",
    "intersect",
    "fit_skew_affine",
    "orientation",
]


class GeometryError(ValueError):
    """Invalid geometric input."""


class CollinearOverlapError(GeometryError):
    """A query segment overlaps a crack edge collinearly (H^1-positive contact)."""


class DegenerateRegionError(GeometryError):
    """Region parameters are degenerate (e.g. radius <= 0)."""


class RankDeficiencyError(GeometryError):
    """Sample set does not determine a unique skew-affine fit."""


# ---------------------------------------------------------------------------
# primitive types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite coordinates ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def __sub__(self, other: "Point2") -> np.ndarray:
        return np.array([self.x - other.x, self.y - other.y])


def _as_xy(p) -> tuple[float, float]:
    if isinstance(p, Point2):
        return (p.x, p.y)
    return (float(p[0]), float(p[1]))


@dataclass(frozen=True)
class Segment:
    a: Point2
    b: Point2

    def __post_init__(self):
        if self.a == self.b:
            raise GeometryError("segment endpoints coincide")

    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)

    def point_at(self, t: float) -> Point2:
        return Point2(self.a.x + t * (self.b.x - self.a.x),
                      self.a.y + t * (self.b.y - self.a.y))


@dataclass(frozen=True)
class Polyline:
    vertices: tuple[Point2, ...]

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise GeometryError("polyline needs at least 2 vertices")
        for p, q in zip(self.vertices, self.vertices[1:]):
            if p == q:
                raise GeometryError("zero-length polyline edge")

    @staticmethod
    def from_coords(coords: Sequence) -> "Polyline":
        return Polyline(tuple(Point2(*_as_xy(c)) for c in coords))

    def edges(self) -> list[Segment]:
        return [Segment(p, q) for p, q in zip(self.vertices, self.vertices[1:])]

    def length(self) -> float:
        return sum(e.length() for e in self.edges())


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


def _merge_intervals(ivals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    for lo, hi in sorted(ivals):
        if hi <= lo:
            continue
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def _subtract_intervals(base: list[tuple[float, float]],
                        cut: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out = []
    for lo, hi in base:
        pieces = [(lo, hi)]
        for clo, chi in cut:
            nxt = []
            for plo, phi in pieces:
                if chi <= plo or clo >= phi:
                    nxt.append((plo, phi))
                else:
                    if plo < clo:
                        nxt.append((plo, clo))
                    if chi < phi:
                        nxt.append((chi, phi))
            pieces = nxt
        out.extend(pieces)
    return _merge_intervals(out)


def _disk_clip(cx, cy, r, ax, ay, bx, by) -> list[tuple[float, float]]:
    """Parameter interval of segment a+t(b-a), t in [0,1], inside the closed disk."""
    dx, dy = bx - ax, by - ay
    fx, fy = ax - cx, ay - cy
    A = dx * dx + dy * dy
    B = 2.0 * (fx * dx + fy * dy)
    C = fx * fx + fy * fy - r * r
    disc = B * B - 4.0 * A * C
    if disc <= 0.0:
        # tangent or outside: zero-length overlap
        return []
    s = math.sqrt(disc)
    t0 = (-B - s) / (2.0 * A)
    t1 = (-B + s) / (2.0 * A)
    lo, hi = max(t0, 0.0), min(t1, 1.0)
    if hi <= lo:
        return []
    return [(lo, hi)]


class Region:
    """Base for 2D point sets supporting segment clipping and membership."""

    def clip_segment(self, seg: Segment) -> list[tuple[float, float]]:
        raise NotImplementedError

    def contains(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bbox(self) -> tuple[float, float, float, float]:
        raise NotImplementedError

    def area(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Disk(Region):
    center: Point2
    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise DegenerateRegionError(f"disk radius must be > 0, got {self.radius}")

    def clip_segment(self, seg: Segment) -> list[tuple[float, float]]:
        return _disk_clip(self.center.x, self.center.y, self.radius,
                          seg.a.x, seg.a.y, seg.b.x, seg.b.y)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        d2 = (pts[:, 0] - self.center.x) ** 2 + (pts[:, 1] - self.center.y) ** 2
        return d2 <= self.radius ** 2

    def bbox(self):
        c, r = self.center, self.radius
        return (c.x - r, c.y - r, c.x + r, c.y + r)

    def area(self) -> float:
        return math.pi * self.radius ** 2

    def classify_rect(self, x0, y0, x1, y1) -> int:
        c, r = self.center, self.radius
        dx = max(abs(x0 - c.x), abs(x1 - c.x))
        dy = max(abs(y0 - c.y), abs(y1 - c.y))
        if dx * dx + dy * dy <= r * r:
            return 0
        nx = min(max(c.x, x0), x1)
        ny = min(max(c.y, y0), y1)
        if (nx - c.x) ** 2 + (ny - c.y) ** 2 >= r * r:
            return 1
        return 2


@dataclass(frozen=True)
class Annulus(Region):
    center: Point2
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if not (0.0 <= self.r_inner < self.r_outer):
            raise DegenerateRegionError(
                f"annulus radii must satisfy 0 <= r_inner < r_outer, got "
                f"({self.r_inner}, {self.r_outer})")

    def clip_segment(self, seg: Segment) -> list[tuple[float, float]]:
        outer = _disk_clip(self.center.x, self.center.y, self.r_outer,
                           seg.a.x, seg.a.y, seg.b.x, seg.b.y)
        if self.r_inner == 0.0:
            return outer
        inner = _disk_clip(self.center.x, self.center.y, self.r_inner,
                           seg.a.x, seg.a.y, seg.b.x, seg.b.y)
        return _subtract_intervals(outer, inner)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        d2 = (pts[:, 0] - self.center.x) ** 2 + (pts[:, 1] - self.center.y) ** 2
        return (d2 <= self.r_outer ** 2) & (d2 > self.r_inner ** 2)

    def bbox(self):
        c, r = self.center, self.r_outer
        return (c.x - r, c.y - r, c.x + r, c.y + r)

    def area(self) -> float:
        return math.pi * (self.r_outer ** 2 - self.r_inner ** 2)

    def classify_rect(self, x0, y0, x1, y1) -> int:
        c = self.center
        dx = max(abs(x0 - c.x), abs(x1 - c.x))
        dy = max(abs(y0 - c.y), abs(y1 - c.y))
        dmax2 = dx * dx + dy * dy
        if x0 <= c.x <= x1 and y0 <= c.y <= y1:
            dmin2 = 0.0
        else:
            nx = min(max(c.x, x0), x1)
            ny = min(max(c.y, y0), y1)
            dmin2 = (nx - c.x) ** 2 + (ny - c.y) ** 2
        if dmin2 >= self.r_outer ** 2 or dmax2 <= self.r_inner ** 2:
            return 1
        if dmax2 <= self.r_outer ** 2 and dmin2 >= self.r_inner ** 2:
            return 0
        return 2


@dataclass(frozen=True)
class Circle(Region):
    """The 1D circle itself.  Straight edges meet it in finitely many points,
    so the 1D measure of any polyline overlap is zero unless an edge
    degenerates onto the circle, which cannot happen for straight edges."""

    center: Point2
    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise DegenerateRegionError(f"circle radius must be > 0, got {self.radius}")

    def clip_segment(self, seg: Segment) -> list[tuple[float, float]]:
        return []

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        d = np.hypot(pts[:, 0] - self.center.x, pts[:, 1] - self.center.y)
        return d == self.radius

    def bbox(self):
        c, r = self.center, self.radius
        return (c.x - r, c.y - r, c.x + r, c.y + r)

    def area(self) -> float:
        return 0.0

    def crossing_count(self, jump_set: "JumpSet") -> int:
        """Number of transversal crossing points of the crack with the circle."""
        count = 0
        for edge in jump_set.edges():
            ivals = _disk_clip(self.center.x, self.center.y, self.radius,
                               edge.a.x, edge.a.y, edge.b.x, edge.b.y)
            for lo, hi in ivals:
                if lo > 0.0:
                    count += 1
                if hi < 1.0:
                    count += 1
        return count


@dataclass(frozen=True)
class HalfPlane(Region):
    """Points with normal . x <= offset."""

    normal: tuple[float, float]
    offset: float

    def __post_init__(self):
        nx, ny = self.normal
        if nx == 0.0 and ny == 0.0:
            raise DegenerateRegionError("half-plane normal must be nonzero")

    def clip_segment(self, seg: Segment) -> list[tuple[float, float]]:
        nx, ny = self.normal
        fa = nx * seg.a.x + ny * seg.a.y - self.offset
        fb = nx * seg.b.x + ny * seg.b.y - self.offset
        if fa <= 0.0 and fb <= 0.0:
            return [(0.0, 1.0)]
        if fa > 0.0 and fb > 0.0:
            return []
        t = fa / (fa - fb)
        return [(0.0, t)] if fa <= 0.0 else [(t, 1.0)]

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        nx, ny = self.normal
        return nx * pts[:, 0] + ny * pts[:, 1] <= self.offset

    def bbox(self):
        raise GeometryError("half-plane is unbounded")

    def area(self) -> float:
        return math.inf


@dataclass(frozen=True)
class Rect(Region):
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise DegenerateRegionError("rectangle must have positive extent")

    def clip_segment(self, seg: Segment) -> list[tuple[float, float]]:
        lo, hi = 0.0, 1.0
        for (p, d, mn, mx) in ((seg.a.x, seg.b.x - seg.a.x, self.x0, self.x1),
                               (seg.a.y, seg.b.y - seg.a.y, self.y0, self.y1)):
            if d == 0.0:
                if p < mn or p > mx:
                    return []
                continue
            t0, t1 = (mn - p) / d, (mx - p) / d
            if t0 > t1:
                t0, t1 = t1, t0
            lo, hi = max(lo, t0), min(hi, t1)
        return [(lo, hi)] if hi > lo else []

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return ((pts[:, 0] >= self.x0) & (pts[:, 0] <= self.x1)
                & (pts[:, 1] >= self.y0) & (pts[:, 1] <= self.y1))

    def bbox(self):
        return (self.x0, self.y0, self.x1, self.y1)

    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def classify_rect(self, x0, y0, x1, y1) -> int:
        if x0 >= self.x0 and x1 <= self.x1 and y0 >= self.y0 and y1 <= self.y1:
            return 0
        if x1 <= self.x0 or x0 >= self.x1 or y1 <= self.y0 or y0 >= self.y1:
            return 1
        return 2


class PolygonRegion(Region):
    """Simple polygon (possibly non-convex), given by ccw or cw boundary."""

    def __init__(self, coords: Sequence):
        pts = [(float(c[0]), float(c[1])) for c in coords]
        if len(pts) < 3:
            raise DegenerateRegionError("polygon needs >= 3 vertices")
        if pts[0] == pts[-1]:
            pts = pts[:-1]
        self._pts = np.array(pts, dtype=float)
        self._shape_cache = None

    @property
    def points(self) -> np.ndarray:
        return self._pts

    def _shape(self):
        if self._shape_cache is None:
            import shapely
            from shapely.geometry import Polygon
            self._shape_cache = Polygon(self._pts)
            shapely.prepare(self._shape_cache)
        return self._shape_cache

    def classify_rect(self, x0, y0, x1, y1) -> int:
        import shapely
        box = shapely.box(x0, y0, x1, y1)
        sh = self._shape()
        if not sh.intersects(box):
            return 1   # empty
        if sh.contains_properly(box) if hasattr(sh, "contains_properly") else sh.covers(box):
            return 0   # full
        return 2       # partial

    def clip_segment(self, seg: Segment) -> list[tuple[float, float]]:
        # parameters where the segment crosses the boundary, then parity of
        # midpoints decides inside intervals
        ts = [0.0, 1.0]
        P = self._pts
        n = len(P)
        ax, ay, bx, by = seg.a.x, seg.a.y, seg.b.x, seg.b.y
        dx, dy = bx - ax, by - ay
        for i in range(n):
            px, py = P[i]
            qx, qy = P[(i + 1) % n]
            ex, ey = qx - px, qy - py
            den = dx * ey - dy * ex
            if den == 0.0:
                continue
            t = ((px - ax) * ey - (py - ay) * ex) / den
            s = ((px - ax) * dy - (py - ay) * dx) / den
            if 0.0 < t < 1.0 and 0.0 <= s <= 1.0:
                ts.append(t)
        ts = sorted(set(ts))
        out = []
        for lo, hi in zip(ts, ts[1:]):
            mid = np.array([[ax + 0.5 * (lo + hi) * dx, ay + 0.5 * (lo + hi) * dy]])
            if self.contains(mid)[0]:
                out.append((lo, hi))
        return _merge_intervals(out)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        import shapely
        pts = np.atleast_2d(pts)
        return shapely.intersects_xy(self._shape(), pts[:, 0], pts[:, 1])

    def bbox(self):
        P = self._pts
        return (P[:, 0].min(), P[:, 1].min(), P[:, 0].max(), P[:, 1].max())

    def area(self) -> float:
        P = self._pts
        x, y = P[:, 0], P[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass(frozen=True)
class Capsule(Region):
    """Points within distance r of the segment a-b (stadium / convex hull of
    two equal disks)."""

    a: Point2
    b: Point2
    r: float

    def __post_init__(self):
        if not (self.r > 0.0):
            raise DegenerateRegionError("capsule radius must be > 0")
        if self.a == self.b:
            raise DegenerateRegionError("capsule axis endpoints coincide")

    def clip_segment(self, seg: Segment) -> list[tuple[float, float]]:
        ivals = _disk_clip(self.a.x, self.a.y, self.r,
                           seg.a.x, seg.a.y, seg.b.x, seg.b.y)
        ivals += _disk_clip(self.b.x, self.b.y, self.r,
                            seg.a.x, seg.a.y, seg.b.x, seg.b.y)
        # central slab in the rotated frame
        ux, uy = self.b.x - self.a.x, self.b.y - self.a.y
        L = math.hypot(ux, uy)
        ux, uy = ux / L, uy / L
        nx, ny = -uy, ux

        def to_local(px, py):
            dxp, dyp = px - self.a.x, py - self.a.y
            return (dxp * ux + dyp * uy, dxp * nx + dyp * ny)

        la = to_local(seg.a.x, seg.a.y)
        lb = to_local(seg.b.x, seg.b.y)
        lo, hi = 0.0, 1.0
        ok = True
        for (p, d, mn, mx) in ((la[0], lb[0] - la[0], 0.0, L),
                               (la[1], lb[1] - la[1], -self.r, self.r)):
            if d == 0.0:
                if p < mn or p > mx:
                    ok = False
                    break
                continue
            t0, t1 = (mn - p) / d, (mx - p) / d
            if t0 > t1:
                t0, t1 = t1, t0
            lo, hi = max(lo, t0), min(hi, t1)
        if ok and hi > lo:
            ivals.append((lo, hi))
        return _merge_intervals(ivals)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return _dist_to_segment(pts, self.a.as_array(), self.b.as_array()) <= self.r

    def bbox(self):
        return (min(self.a.x, self.b.x) - self.r, min(self.a.y, self.b.y) - self.r,
                max(self.a.x, self.b.x) + self.r, max(self.a.y, self.b.y) + self.r)

    def area(self) -> float:
        L = math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)
        return 2.0 * self.r * L + math.pi * self.r ** 2


def _dist_to_segment(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    L2 = float(ab @ ab)
    t = np.clip(((pts - a) @ ab) / L2, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(pts[:, 0] - proj[:, 0], pts[:, 1] - proj[:, 1])


# ---------------------------------------------------------------------------
# jump sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpSet:
    """Finite union of polylines with optional per-edge constant jump amplitude.

    ``amps[i]`` is a tuple of per-edge 2-vectors for ``polylines[i]`` (or None
    when the amplitude comes from the field's one-sided traces).  The jump
    sign convention: amplitude = trace on the left of the directed edge minus
    trace on the right.
    """

    polylines: tuple[Polyline, ...] = ()
    amps: tuple = ()

    def __post_init__(self):
        if self.amps and len(self.amps) != len(self.polylines):
            raise GeometryError("amps must parallel polylines")

    @staticmethod
    def from_polyline_coords(coord_lists: Sequence, amp_lists: Sequence | None = None) -> "JumpSet":
        pls = tuple(Polyline.from_coords(c) for c in coord_lists)
        if amp_lists is None:
            amps = tuple(None for _ in pls)
        else:
            amps = tuple(None if a is None else tuple(tuple(map(float, v)) for v in a)
                         for a in amp_lists)
        return JumpSet(pls, amps)

    @staticmethod
    def empty() -> "JumpSet":
        return JumpSet((), ())

    def is_empty(self) -> bool:
        return len(self.polylines) == 0

    def edges(self) -> list[Segment]:
        out = []
        for pl in self.polylines:
            out.extend(pl.edges())
        return out

    def edges_with_amps(self) -> list[tuple[Segment, tuple[float, float] | None]]:
        out = []
        for pl, amp in zip(self.polylines, self.amps or (None,) * len(self.polylines)):
            edges = pl.edges()
            for i, e in enumerate(edges):
                a = None
                if amp is not None:
                    a = amp[i] if i < len(amp) else amp[-1]
                out.append((e, a))
        return out

    def total_length(self) -> float:
        return sum(pl.length() for pl in self.polylines)

    def transformed(self, fn) -> "JumpSet":
        """Apply a point map (x, y) -> (x', y') to every vertex."""
        pls = []
        for pl in self.polylines:
            pls.append(Polyline(tuple(Point2(*fn(v.x, v.y)) for v in pl.vertices)))
        return JumpSet(tuple(pls), self.amps)

    def distance(self, pts: np.ndarray) -> np.ndarray:
        """Euclidean distance of points to the union of edges (inf if empty)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.is_empty():
            return np.full(len(pts), np.inf)
        d = np.full(len(pts), np.inf)
        for e in self.edges():
            d = np.minimum(d, _dist_to_segment(pts, e.a.as_array(), e.b.as_array()))
        return d


# ---------------------------------------------------------------------------
# exact predicates and crossings
# ---------------------------------------------------------------------------


def orientation(a, b, c) -> int:
    """Exact sign of the cross product (b-a) x (c-a); floats are treated as
    the binary rationals they are."""
    ax, ay = (Fraction(v) for v in _as_xy(a))
    bx, by = (Fraction(v) for v in _as_xy(b))
    cx, cy = (Fraction(v) for v in _as_xy(c))
    d = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (d > 0) - (d < 0)


def _exact_cross_param(a, b, p, q) -> Fraction | None:
    """Exact parameter t on segment a-b of its crossing with segment p-q,
    or None if they do not meet in a single point with t in [0,1], s in [0,1].

    Raises CollinearOverlapError when the segments overlap collinearly.
    """
    ax, ay = (Fraction(v) for v in _as_xy(a))
    bx, by = (Fraction(v) for v in _as_xy(b))
    px, py = (Fraction(v) for v in _as_xy(p))
    qx, qy = (Fraction(v) for v in _as_xy(q))
    dx, dy = bx - ax, by - ay
    ex, ey = qx - px, qy - py
    den = dx * ey - dy * ex
    if den == 0:
        # parallel: overlap only if collinear and the 1D projections overlap
        if (px - ax) * dy - (py - ay) * dx != 0:
            return None
        # collinear: project onto the dominant axis of d
        if abs(dx) >= abs(dy):
            t_p = (px - ax) / dx if dx != 0 else Fraction(0)
            t_q = (qx - ax) / dx if dx != 0 else Fraction(0)
        else:
            t_p = (py - ay) / dy
            t_q = (qy - ay) / dy
        lo, hi = min(t_p, t_q), max(t_p, t_q)
        if hi <= 0 or lo >= 1:
            return None
        raise CollinearOverlapError("segment overlaps a crack edge collinearly")
    t = ((px - ax) * ey - (py - ay) * ex) / den
    s = ((px - ax) * dy - (py - ay) * dx) / den
    if 0 <= t <= 1 and 0 <= s <= 1:
        return t
    return None


def intersect(seg: Segment, jump_set: JumpSet) -> list[tuple[float, Point2]]:
    """Transversal crossings of a segment with the crack, sorted by parameter.

    Crossing parameters strictly inside (0, 1); a touch at a shared crack
    vertex is counted once (exact de-duplication on the rational parameter).
    Collinear overlap with any edge raises CollinearOverlapError.
    """
    params: set[Fraction] = set()
    for e in jump_set.edges():
        t = _exact_cross_param(seg.a, seg.b, e.a, e.b)
        if t is not None and 0 < t < 1:
            params.add(t)
    out = []
    for t in sorted(params):
        tf = float(t)
        out.append((tf, seg.point_at(tf)))
    return out


# ---------------------------------------------------------------------------
# lengths
# ---------------------------------------------------------------------------


def _iter_edges(obj) -> Iterable[Segment]:
    if isinstance(obj, JumpSet):
        return obj.edges()
    if isinstance(obj, Polyline):
        return obj.edges()
    if isinstance(obj, Segment):
        return [obj]
    raise GeometryError(f"unsupported set type {type(obj)!r}")


def h1_length(obj, region: Region) -> float:
    """1D measure of (polyline set) ∩ region, by exact segment clipping."""
    total = 0.0
    for e in _iter_edges(obj):
        L = e.length()
        for lo, hi in region.clip_segment(e):
            total += (hi - lo) * L
    return total


def clip_edge_intervals(obj, region: Region) -> list[tuple[Segment, float, float]]:
    """Clipped pieces (edge, t0, t1) of the set inside the region."""
    out = []
    for e in _iter_edges(obj):
        for lo, hi in region.clip_segment(e):
            out.append((e, lo, hi))
    return out


# ---------------------------------------------------------------------------
# skew-affine fields and fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SkewAffine:
    """x -> b + A x with A = [[0, -omega], [omega, 0]] exactly skew."""

    b: tuple[float, float]
    omega: float

    @property
    def A(self) -> np.ndarray:
        return np.array([[0.0, -self.omega], [self.omega, 0.0]])

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty_like(pts)
        out[:, 0] = self.b[0] - self.omega * pts[:, 1]
        out[:, 1] = self.b[1] + self.omega * pts[:, 0]
        return out


def fit_skew_affine(points: np.ndarray, values: np.ndarray,
                    weights: np.ndarray | None = None) -> SkewAffine:
    """Weighted L2-best approximation of (point, 2-vector) samples by a rigid
    motion b + A x with A skew.

    Solves the 3x3 normal equations in (b1, b2, omega); needs >= 3
    non-collinear points with positive total weight.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    V = np.atleast_2d(np.asarray(values, dtype=float))
    n = len(P)
    if n < 3:
        raise RankDeficiencyError("need at least 3 sample points")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.sum() <= 0:
        raise RankDeficiencyError("total weight must be positive")
    # residual per sample: (b1 - omega*y - v1, b2 + omega*x - v2)
    sw = w.sum()
    sx = float(w @ P[:, 0])
    sy = float(w @ P[:, 1])
    sxx = float(w @ (P[:, 0] ** 2))
    syy = float(w @ (P[:, 1] ** 2))
    M = np.array([[sw, 0.0, -sy],
                  [0.0, sw, sx],
                  [-sy, sx, sxx + syy]])
    rhs = np.array([float(w @ V[:, 0]),
                    float(w @ V[:, 1]),
                    float(w @ (P[:, 0] * V[:, 1] - P[:, 1] * V[:, 0]))])
    # collinearity check via the 2x2 spatial covariance
    mx, my = sx / sw, sy / sw
    cxx = sxx / sw - mx * mx
    cyy = syy / sw - my * my
    cxy = float(w @ (P[:, 0] * P[:, 1])) / sw - mx * my
    det_cov = cxx * cyy - cxy * cxy
    scale2 = max(cxx + cyy, 1e-300)
    if det_cov <= 1e-12 * scale2 * scale2:
        raise RankDeficiencyError("sample points are (nearly) collinear")
    sol = np.linalg.solve(M, rhs)
    return SkewAffine((float(sol[0]), float(sol[1])), float(sol[2]))
