"""Rigidity (Korn-type) estimate for cracked fields on Lipschitz graph domains.

The domain is the region below a piecewise-linear graph on (-2, 2) whose
minimum over (-1, 1) equals 2.  A Whitney-style quadtree produces pairs of
concentric squares (q_j half-size, Q_j full); squares whose crack mass exceeds
eta r_j / 8 contribute their upward column P_j to the exceptional set omega,
the remaining squares run the ball-cover repair (rho = r_j/2, s = 1/sqrt(2))
and contribute the repair balls.  The global affine comparison is anchored at
the root square's skew-affine fit; the measured constants are

    c_first  = |u - a|_{L^p(U_int \\ omega)} / |e(u)|_{L^p(U)}
    c_second = |grad u - A|_{L^p(U_int \\ omega)} / |e(u)|_{L^p(U)}

together with the perimeter ratio H^1(boundary omega) / H^1(J ∩ U) and the
neighbor-chain affine increments along the BFS gluing tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import numpy as np

from .geom import (Disk, JumpSet, Point2, PolygonRegion, Rect, Region,
                   SkewAffine, fit_skew_affine, h1_length)
from .field import PiecewiseField
from .integrate import integrate_region
from .diskmesh import MeshParams
from .cover import repair

__all__ = [
    "LipschitzDomain", "WhitneyPair", "KornResult", "whitney_cover",
    "korn_estimate", "reverse_holder", "HoleyRegion",
]


# ---------------------------------------------------------------------------
# domain
# ---------------------------------------------------------------------------


@dataclass
class LipschitzDomain:
    """U = {x1 in (-2,2), x2 in (-2, phi(x1))} below a piecewise-linear graph
    with min over (-1,1) equal to 2."""

    graph: np.ndarray            # (n, 2) vertices of phi, x ascending over [-2, 2]

    def __post_init__(self):
        g = np.asarray(self.graph, dtype=float)
        if g[0, 0] != -2.0 or g[-1, 0] != 2.0:
            raise ValueError("graph must span [-2, 2]")
        if not np.all(np.diff(g[:, 0]) > 0):
            raise ValueError("graph x-coordinates must be strictly increasing")
        self.graph = g
        vals = self._phi_on_interval(-1.0, 1.0)
        if abs(min(vals) - 2.0) > 1e-12:
            raise ValueError(f"min of phi over (-1,1) must be 2, got {min(vals)}")

    def _phi_on_interval(self, a, b):
        xs = [a, b] + [float(x) for x in self.graph[:, 0] if a < x < b]
        return [self.phi(x) for x in xs]

    @property
    def L(self) -> float:
        g = self.graph
        slopes = np.abs(np.diff(g[:, 1]) / np.diff(g[:, 0]))
        return float(slopes.max())

    def phi(self, x: float) -> float:
        return float(np.interp(x, self.graph[:, 0], self.graph[:, 1]))

    def _poly_coords(self, x_lo, x_hi, y_lo):
        top = [(float(x), float(y)) for x, y in self.graph
               if x_lo < x < x_hi]
        coords = [(x_lo, y_lo), (x_hi, y_lo), (x_hi, self.phi(x_hi))]
        coords += list(reversed(top))
        coords += [(x_lo, self.phi(x_lo))]
        return coords

    def U(self) -> PolygonRegion:
        return PolygonRegion(self._poly_coords(-2.0, 2.0, -2.0))

    def U_int(self) -> PolygonRegion:
        return PolygonRegion(self._poly_coords(-1.0, 1.0, -1.0))

    def boundary_distance(self, pts: np.ndarray) -> np.ndarray:
        from shapely.geometry import Polygon, Point as ShPoint
        poly = Polygon(self._poly_coords(-2.0, 2.0, -2.0))
        ring = poly.exterior
        pts = np.atleast_2d(pts)
        return np.array([ring.distance(ShPoint(*p)) for p in pts])

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return self.U().contains(pts)


# ---------------------------------------------------------------------------
# Whitney pairs
# ---------------------------------------------------------------------------


@dataclass
class WhitneyPair:
    idx: int
    x: tuple
    r: float
    is_root: bool = False
    neighbors: list = dfield(default_factory=list)
    dist_ratio: float = 0.0

    def q(self) -> Rect:
        return Rect(self.x[0] - self.r / 2, self.x[1] - self.r / 2,
                    self.x[0] + self.r / 2, self.x[1] + self.r / 2)

    def Q(self) -> Rect:
        return Rect(self.x[0] - self.r, self.x[1] - self.r,
                    self.x[0] + self.r, self.x[1] + self.r)


def whitney_cover(domain: LipschitzDomain, max_level: int = 6) -> list:
    """Dyadic pairs with r_j comparable to the boundary distance.

    Each emitted quadtree leaf of half-size h becomes the pair with
    r_j = 2h, so the q_j tile their parent region and the Q_j overlap with
    finite multiplicity.  The root square (-2,2)^2 is kept as the gluing
    anchor even though it touches the boundary.
    """
    pairs: list[WhitneyPair] = [WhitneyPair(idx=0, x=(0.0, 0.0), r=2.0,
                                            is_root=True, dist_ratio=1.0)]

    def recurse(cx, cy, h, level):
        d = float(domain.boundary_distance(np.array([[cx, cy]]))[0])
        inside = bool(domain.contains(np.array([[cx, cy]]))[0])
        if not inside and d > h * math.sqrt(2.0):
            return
        if inside and 2.0 * h <= d / 2.0:
            pairs.append(WhitneyPair(idx=len(pairs), x=(cx, cy), r=2.0 * h,
                                     dist_ratio=2.0 * h / d))
            return
        if level >= max_level:
            return
        h2 = h / 2.0
        for sx in (-1, 1):
            for sy in (-1, 1):
                recurse(cx + sx * h2, cy + sy * h2, h2, level + 1)

    recurse(0.0, 0.0, 2.0, 0)
    # neighbor lists: overlapping q squares (positive-area intersection)
    for i in range(len(pairs)):
        qi = pairs[i].q()
        for j in range(i + 1, len(pairs)):
            qj = pairs[j].q()
            w = min(qi.x1, qj.x1) - max(qi.x0, qj.x0)
            h = min(qi.y1, qj.y1) - max(qi.y0, qj.y0)
            if w > 1e-12 and h > 1e-12:
                pairs[i].neighbors.append(j)
                pairs[j].neighbors.append(i)
    return pairs


# ---------------------------------------------------------------------------
# holey region (base minus exceptional set)
# ---------------------------------------------------------------------------


class HoleyRegion(Region):
    def __init__(self, base: Region, holes: list):
        self.base = base
        self.holes = holes

    def contains(self, pts):
        pts = np.atleast_2d(pts)
        out = self.base.contains(pts)
        for hole in self.holes:
            out &= ~hole.contains(pts)
        return out

    def clip_segment(self, seg):
        from .geom import _merge_intervals, _subtract_intervals
        ivals = self.base.clip_segment(seg)
        cut = []
        for hole in self.holes:
            cut.extend(hole.clip_segment(seg))
        return _subtract_intervals(ivals, _merge_intervals(cut))

    def bbox(self):
        return self.base.bbox()

    def classify_rect(self, x0, y0, x1, y1) -> int:
        from .integrate import _classify_cell
        base = _classify_cell(self.base, x0, y0, x1, y1)
        if base == 1:
            return 1
        worst = base
        for hole in self.holes:
            cls = _classify_cell(hole, x0, y0, x1, y1)
            if cls == 0:
                return 1
            if cls == 2:
                worst = 2
        return worst

    def area(self) -> float:
        from shapely.geometry import Polygon, Point as ShPoint, box
        from shapely.ops import unary_union
        if isinstance(self.base, PolygonRegion):
            b = Polygon(self.base.points)
        elif isinstance(self.base, Rect):
            b = box(self.base.x0, self.base.y0, self.base.x1, self.base.y1)
        elif isinstance(self.base, Disk):
            b = ShPoint(self.base.center.x, self.base.center.y).buffer(
                self.base.radius, quad_segs=256)
        else:
            raise NotImplementedError
        hs = []
        for hole in self.holes:
            if isinstance(hole, Rect):
                hs.append(box(hole.x0, hole.y0, hole.x1, hole.y1))
            elif isinstance(hole, Disk):
                hs.append(ShPoint(hole.center.x, hole.center.y).buffer(
                    hole.radius, quad_segs=64))
            else:
                raise NotImplementedError
        if hs:
            b = b.difference(unary_union(hs))
        return b.area


# ---------------------------------------------------------------------------
# the estimate
# ---------------------------------------------------------------------------


@dataclass
class KornResult:
    omega_columns: list
    omega_balls: list
    a: SkewAffine
    A: np.ndarray
    c_first: float
    c_second: float
    first_residual: float
    second_residual: float
    perimeter_ratio: float
    omega_perimeter: float
    crack_length: float
    chain_increments: list
    degenerate: bool
    bad_squares: list
    good_squares: list
    pairs: list


def _fit_on_region(u: PiecewiseField, region: Region, n: int = 24) -> SkewAffine:
    bx0, by0, bx1, by1 = region.bbox()
    xs = bx0 + (np.arange(n) + 0.5) / n * (bx1 - bx0)
    ys = by0 + (np.arange(n) + 0.5) / n * (by1 - by0)
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([XX.ravel(), YY.ravel()])
    mask = region.contains(pts)
    pts = pts[mask]
    return fit_skew_affine(pts, u.value(pts))


def korn_estimate(u: PiecewiseField, domain: LipschitzDomain, p: float,
                  params: MeshParams, max_level: int = 6) -> KornResult:
    if not (1.0 < p < math.inf):
        raise ValueError("p must be in (1, inf)")
    pairs = whitney_cover(domain, max_level=max_level)
    crack = u.crack
    y_top = float(domain.graph[:, 1].max()) + 1.0

    columns: list[Rect] = []
    balls: list[Disk] = []
    fits: dict[int, SkewAffine] = {}
    bad_ids, good_ids = [], []
    for pair in pairs:
        Q = pair.Q()
        mass = h1_length(crack, Q) if not crack.is_empty() else 0.0
        threshold = params.eta * pair.r / 8.0
        if (not pair.is_root) and mass > threshold:
            bad_ids.append(pair.idx)
            columns.append(Rect(pair.x[0] - pair.r, pair.x[1] - pair.r,
                                pair.x[0] + pair.r, y_top))
            continue
        omega_j: list[Disk] = []
        if mass > 0.0:
            try:
                res = repair(u, rho=pair.r / 2.0, s=1.0 / math.sqrt(2.0),
                             params=params, center=pair.x, p=p,
                             estimate_quality=False)
            except Exception:
                # repair not applicable (root square with too much crack, or
                # vertex selection failure): the square joins the bad set
                bad_ids.append(pair.idx)
                columns.append(Rect(pair.x[0] - pair.r, pair.x[1] - pair.r,
                                    pair.x[0] + pair.r, y_top))
                continue
            for ball in res.family.balls:
                omega_j.append(Disk(Point2(*ball.center), ball.r))
            balls.extend(omega_j)
        good_ids.append(pair.idx)
        region = HoleyRegion(pair.q(), omega_j) if omega_j else pair.q()
        try:
            fits[pair.idx] = _fit_on_region(u, region)
        except Exception:
            bad_ids.append(pair.idx)
            good_ids.pop()

    degenerate = len(good_ids) == 0 or 0 not in fits
    if degenerate:
        a0 = SkewAffine((0.0, 0.0), 0.0)
    else:
        a0 = fits[0]

    # chain the affine fits from the root through the neighbor graph
    chain = []
    if not degenerate:
        from collections import deque
        seen = {0}
        dq = deque([0])
        good_set = set(good_ids)
        while dq:
            i = dq.popleft()
            for j in pairs[i].neighbors:
                if j in seen or j not in good_set or j not in fits:
                    continue
                seen.add(j)
                # affine difference measured at the smaller square's center
                xj = np.array([pairs[j].x])
                diff = float(np.hypot(*(fits[i](xj) - fits[j](xj))[0]))
                chain.append({"from": i, "to": j,
                              "increment": diff,
                              "scale": pairs[j].r})
                dq.append(j)

    # exceptional set and its perimeter
    omega_perim = 0.0
    U = domain.U()
    if columns or balls:
        from shapely.geometry import Polygon, Point as ShPoint, box
        from shapely.ops import unary_union
        parts = [box(c.x0, c.y0, c.x1, c.y1) for c in columns]
        parts += [ShPoint(b.center.x, b.center.y).buffer(b.radius, quad_segs=64)
                  for b in balls]
        omega_shape = unary_union(parts).intersection(Polygon(U.points))
        omega_perim = omega_shape.length

    crack_len = h1_length(crack, U) if not crack.is_empty() else 0.0
    perimeter_ratio = (omega_perim / crack_len) if crack_len > 0 else 0.0

    # measured constants over U_int \ omega
    Uint = domain.U_int()
    holes = columns + balls
    reg = HoleyRegion(Uint, holes) if holes else Uint
    A = a0.A

    def numerators(pts):
        du = u.value(pts) - a0(pts)
        first = (du[:, 0] ** 2 + du[:, 1] ** 2) ** (p / 2.0)
        G = u.grad(pts) - A[None, :, :]
        second = np.einsum("nij,nij->n", G, G) ** (p / 2.0)
        return np.stack([first, second], axis=1)

    def denominator(pts):
        E = u.strain(pts)
        return np.einsum("nij,nij->n", E, E) ** (p / 2.0)

    vscale = max(u.sup_norm(Rect(-2, -2, 2, float(domain.graph[:, 1].max()))), 1.0)
    floor = (1e-11 * vscale) ** p
    if degenerate:
        c_first = c_second = math.inf
        first_residual = second_residual = math.inf
    else:
        nums = np.atleast_1d(integrate_region(numerators, reg, crack=crack,
                                              rel_tol=1e-4, max_depth=8,
                                              abs_tol=floor))
        den = integrate_region(denominator, U, crack=crack, rel_tol=1e-4,
                               max_depth=8, abs_tol=floor)
        first_residual = float(max(nums[0], 0.0)) ** (1.0 / p)
        second_residual = float(max(nums[1], 0.0)) ** (1.0 / p)
        if den > floor:
            c_first = first_residual / den ** (1.0 / p)
            c_second = second_residual / den ** (1.0 / p)
        else:
            c_first = 0.0 if nums[0] <= floor else math.inf
            c_second = 0.0 if nums[1] <= floor else math.inf

    return KornResult(omega_columns=columns, omega_balls=balls, a=a0, A=A,
                      c_first=c_first, c_second=c_second,
                      first_residual=first_residual,
                      second_residual=second_residual,
                      perimeter_ratio=perimeter_ratio,
                      omega_perimeter=omega_perim, crack_length=crack_len,
                      chain_increments=chain, degenerate=degenerate,
                      bad_squares=bad_ids, good_squares=good_ids, pairs=pairs)


# ---------------------------------------------------------------------------
# reverse-Hoelder comparison
# ---------------------------------------------------------------------------


def reverse_holder(v: PiecewiseField, p: float, radius: float = 1.0,
                   center=(0.0, 0.0)) -> dict:
    """Compare r^{-n-p} ∫|v|^p against r^{-n} ∫|e(v)|^p + (r^{-n-1} ∫|v|)^p
    on the disk (n = 2); the ratio is the measured constant."""
    n = 2
    disk = Disk(Point2(*center), radius)

    def all_parts(pts):
        val = v.value(pts)
        mag = np.hypot(val[:, 0], val[:, 1])
        E = v.strain(pts)
        fro = np.sqrt(np.einsum("nij,nij->n", E, E))
        return np.stack([mag ** p, fro ** p, mag], axis=1)

    parts = np.atleast_1d(integrate_region(all_parts, disk, crack=v.crack,
                                           rel_tol=1e-6))
    lhs = float(parts[0]) / radius ** (n + p)
    term1 = float(parts[1]) / radius ** n
    term2 = (float(parts[2]) / radius ** (n + 1)) ** p
    rhs = term1 + term2
    return {"lhs": lhs, "rhs": rhs, "strain_term": term1, "mean_term": term2,
            "ratio": lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)}
