"""Planar displacement fields with declared jump sets.

A field is a stack of *pieces*, each an everywhere-evaluable smooth map paired
with a membership mask; the first matching piece answers value/gradient
queries.  The declared :class:`~crackfield.geom.JumpSet` carries the
discontinuity geometry and (optionally) per-edge jump amplitudes.  One-sided
traces are exact: the piece owning each side is identified by a small normal
probe, then evaluated *at* the edge point itself.

Smooth maps come in four flavors:

* ``ExprMap``   - sympy expression strings in x1, x2, differentiated
                  symbolically and lambdified with numpy;
* ``LinearMap`` - affine b + M x, exact arithmetic on the gradient;
* ``GridMap``   - bilinear interpolation of row-major binary samples, with
                  one-sided difference stencils within two cells of the crack;
* ``FETriMap``  - piecewise-linear interpolation on a triangulation
                  (matplotlib trapezoid-map point location).

All evaluations are vectorized over (N, 2) point arrays.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field as dfield
from typing import Callable, Sequence

import numpy as np

from .geom import (Annulus, CollinearOverlapError, Disk, GeometryError, JumpSet,
                   Point2, PolygonRegion, Rect, Region, Segment, SkewAffine,
                   clip_edge_intervals, h1_length, intersect)
from .integrate import gauss_segment, integrate_polyline, integrate_region

__all__ = [
    "SmoothMap", "ExprMap", "LinearMap", "GridMap", "FETriMap", "FieldMap", "Piece",
    "PiecewiseField", "Slice1D", "EnergyReport", "OnDiscontinuityError",
    "BadSliceError", "eval_strain", "slice_section", "energy",
    "total_strain_mass", "save_grid", "load_grid", "field_from_dict",
]


class OnDiscontinuityError(ValueError):
    """Point query too close to the declared crack."""


class BadSliceError(ValueError):
    """Slice unusable (collinear overlap with a crack edge or endpoint on crack)."""


# ---------------------------------------------------------------------------
# smooth maps
# ---------------------------------------------------------------------------


class SmoothMap:
    def value(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, pts: np.ndarray) -> np.ndarray:
        """(N, 2, 2) array with grad[n, i, j] = d u_i / d x_j."""
        raise NotImplementedError


class ExprMap(SmoothMap):
    def __init__(self, u1: str, u2: str):
        import sympy as sp
        x1, x2 = sp.symbols("x1 x2")
        self.exprs = (u1, u2)
        e1 = sp.sympify(u1, locals={"x1": x1, "x2": x2})
        e2 = sp.sympify(u2, locals={"x1": x1, "x2": x2})
        mods = ["numpy"]
        self._f = [sp.lambdify((x1, x2), e, modules=mods) for e in (e1, e2)]
        self._df = [[sp.lambdify((x1, x2), sp.diff(e, v), modules=mods)
                     for v in (x1, x2)] for e in (e1, e2)]

    def value(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty((len(pts), 2))
        for i in range(2):
            out[:, i] = np.broadcast_to(self._f[i](pts[:, 0], pts[:, 1]), (len(pts),))
        return out

    def grad(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty((len(pts), 2, 2))
        for i in range(2):
            for j in range(2):
                out[:, i, j] = np.broadcast_to(
                    self._df[i][j](pts[:, 0], pts[:, 1]), (len(pts),))
        return out


class LinearMap(SmoothMap):
    def __init__(self, b, M):
        self.b = np.asarray(b, dtype=float).reshape(2)
        self.M = np.asarray(M, dtype=float).reshape(2, 2)

    @staticmethod
    def constant(b) -> "LinearMap":
        return LinearMap(b, np.zeros((2, 2)))

    @staticmethod
    def from_skew(sa: SkewAffine) -> "LinearMap":
        return LinearMap(sa.b, sa.A)

    def value(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.b[None, :] + pts @ self.M.T

    def grad(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.broadcast_to(self.M, (len(pts), 2, 2)).copy()


class SumMap(SmoothMap):
    def __init__(self, maps: Sequence[SmoothMap]):
        self.maps = list(maps)

    def value(self, pts):
        return sum(m.value(pts) for m in self.maps)

    def grad(self, pts):
        return sum(m.grad(pts) for m in self.maps)


class FieldMap(SmoothMap):
    """SmoothMap view of a whole PiecewiseField (for composition)."""

    def __init__(self, field):
        self.field = field

    def value(self, pts):
        return self.field.value(pts)

    def grad(self, pts):
        return self.field.grad(pts)


class GridMap(SmoothMap):
    """Bilinear interpolation of a regular grid of 2-vector samples.

    ``data[ix, iy, c]`` sits at (origin + (ix*dx, iy*dy)).  Gradients use
    centered differences, falling back to one-sided stencils for nodes within
    two cells of the crack so the jump is never smeared into the strain.
    """

    def __init__(self, data: np.ndarray, spacing, origin, crack: JumpSet | None = None):
        self.data = np.asarray(data, dtype=float)
        if self.data.ndim != 3 or self.data.shape[2] != 2:
            raise ValueError("grid data must have shape (nx, ny, 2)")
        self.dx, self.dy = float(spacing[0]), float(spacing[1])
        self.ox, self.oy = float(origin[0]), float(origin[1])
        self._gx, self._gy = self._build_gradients(crack)

    def _node_xy(self):
        nx, ny = self.data.shape[:2]
        xs = self.ox + self.dx * np.arange(nx)
        ys = self.oy + self.dy * np.arange(ny)
        return xs, ys

    def _build_gradients(self, crack):
        nx, ny = self.data.shape[:2]
        xs, ys = self._node_xy()
        gx = np.gradient(self.data, self.dx, axis=0)
        gy = np.gradient(self.data, self.dy, axis=1)
        if crack is not None and not crack.is_empty():
            XX, YY = np.meshgrid(xs, ys, indexing="ij")
            pts = np.column_stack([XX.ravel(), YY.ravel()])
            near = (crack.distance(pts) < 2.0 * max(self.dx, self.dy)).reshape(nx, ny)
            # one-sided differences at flagged nodes, choosing the side whose
            # stencil partner is farther from the crack
            dist = crack.distance(pts).reshape(nx, ny)
            for ix, iy in zip(*np.nonzero(near)):
                if 0 < ix < nx - 1:
                    fwd = dist[ix + 1, iy] >= dist[ix - 1, iy]
                    j = (ix, ix + 1) if fwd else (ix - 1, ix)
                    gx[ix, iy] = (self.data[j[1], iy] - self.data[j[0], iy]) / self.dx
                if 0 < iy < ny - 1:
                    fwd = dist[ix, iy + 1] >= dist[ix, iy - 1]
                    j = (iy, iy + 1) if fwd else (iy - 1, iy)
                    gy[ix, iy] = (self.data[ix, j[1]] - self.data[ix, j[0]]) / self.dy
        return gx, gy

    def _locate(self, pts):
        nx, ny = self.data.shape[:2]
        fx = (pts[:, 0] - self.ox) / self.dx
        fy = (pts[:, 1] - self.oy) / self.dy
        ix = np.clip(np.floor(fx).astype(int), 0, nx - 2)
        iy = np.clip(np.floor(fy).astype(int), 0, ny - 2)
        tx = np.clip(fx - ix, 0.0, 1.0)
        ty = np.clip(fy - iy, 0.0, 1.0)
        return ix, iy, tx, ty

    def _bilinear(self, arr, pts):
        ix, iy, tx, ty = self._locate(np.atleast_2d(np.asarray(pts, dtype=float)))
        v00 = arr[ix, iy]
        v10 = arr[ix + 1, iy]
        v01 = arr[ix, iy + 1]
        v11 = arr[ix + 1, iy + 1]
        w = ((1 - tx) * (1 - ty))[:, None]
        out = v00 * w
        out += v10 * (tx * (1 - ty))[:, None]
        out += v01 * ((1 - tx) * ty)[:, None]
        out += v11 * (tx * ty)[:, None]
        return out

    def value(self, pts):
        return self._bilinear(self.data, pts)

    def grad(self, pts):
        gx = self._bilinear(self._gx, pts)
        gy = self._bilinear(self._gy, pts)
        out = np.empty((len(gx), 2, 2))
        out[:, :, 0] = gx
        out[:, :, 1] = gy
        return out


class FETriMap(SmoothMap):
    """P1 interpolation on a triangulation; constant gradient per triangle.

    Queries outside the mesh fall back to ``background`` (the glued exterior
    field) so the composite is total.
    """

    def __init__(self, points: np.ndarray, triangles: np.ndarray,
                 values: np.ndarray, background: SmoothMap | None = None):
        import matplotlib.tri as mtri
        self.points = np.asarray(points, dtype=float)
        self.triangles = np.asarray(triangles, dtype=int)
        self.values = np.asarray(values, dtype=float)
        self._tri = mtri.Triangulation(self.points[:, 0], self.points[:, 1],
                                       self.triangles)
        self._finder = self._tri.get_trifinder()
        self.background = background
        self._tri_grad = self._precompute_grads()

    def _precompute_grads(self):
        P, T, V = self.points, self.triangles, self.values
        a, b, c = P[T[:, 0]], P[T[:, 1]], P[T[:, 2]]
        det = ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
               - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
        # gradients of barycentric hats
        gb = np.stack([(c[:, 1] - a[:, 1]) / det, -(c[:, 0] - a[:, 0]) / det], axis=1)
        gc = np.stack([-(b[:, 1] - a[:, 1]) / det, (b[:, 0] - a[:, 0]) / det], axis=1)
        ga = -gb - gc
        va, vb, vc = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
        # grad[t, i, j] = d u_i / d x_j on triangle t
        return (va[:, :, None] * ga[:, None, :] + vb[:, :, None] * gb[:, None, :]
                + vc[:, :, None] * gc[:, None, :])

    def find(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.asarray(self._finder(pts[:, 0], pts[:, 1]))

    def value(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        idx = self.find(pts)
        out = np.zeros((len(pts), 2))
        ok = idx >= 0
        if ok.any():
            t = self.triangles[idx[ok]]
            a, b, c = (self.points[t[:, 0]], self.points[t[:, 1]], self.points[t[:, 2]])
            p = pts[ok]
            det = ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                   - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
            l2 = ((p[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (p[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])) / det
            l3 = ((b[:, 0] - a[:, 0]) * (p[:, 1] - a[:, 1])
                  - (b[:, 1] - a[:, 1]) * (p[:, 0] - a[:, 0])) / det
            l1 = 1.0 - l2 - l3
            out[ok] = (l1[:, None] * self.values[t[:, 0]]
                       + l2[:, None] * self.values[t[:, 1]]
                       + l3[:, None] * self.values[t[:, 2]])
        if (~ok).any():
            if self.background is None:
                raise GeometryError("FE query outside mesh without background")
            out[~ok] = self.background.value(pts[~ok])
        return out

    def grad(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        idx = self.find(pts)
        out = np.zeros((len(pts), 2, 2))
        ok = idx >= 0
        if ok.any():
            out[ok] = self._tri_grad[idx[ok]]
        if (~ok).any():
            if self.background is None:
                raise GeometryError("FE query outside mesh without background")
            out[~ok] = self.background.grad(pts[~ok])
        return out


# ---------------------------------------------------------------------------
# masks and pieces
# ---------------------------------------------------------------------------


MaskFn = Callable[[np.ndarray], np.ndarray]


def halfplane_mask(normal, x0) -> MaskFn:
    n = np.asarray(normal, dtype=float)
    x0 = np.asarray(x0, dtype=float)

    def mask(pts):
        pts = np.atleast_2d(pts)
        return (pts - x0) @ n > 0.0

    return mask


def region_mask(region: Region) -> MaskFn:
    return lambda pts: region.contains(np.atleast_2d(pts))


def graph_above_mask(polyline_coords: np.ndarray) -> MaskFn:
    """Points strictly above the piecewise-linear graph through the given
    vertices (sorted by x; extended horizontally outside the span)."""
    V = np.asarray(polyline_coords, dtype=float)
    xs = V[:, 0]
    ys = V[:, 1]

    def mask(pts):
        pts = np.atleast_2d(pts)
        gy = np.interp(pts[:, 0], xs, ys)
        return pts[:, 1] > gy

    return mask


@dataclass
class Piece:
    name: str
    map: SmoothMap
    mask: MaskFn | None = None  # None = catch-all


# ---------------------------------------------------------------------------
# the field
# ---------------------------------------------------------------------------


@dataclass
class EnergyReport:
    bulk: float
    surface: float
    mu: float
    p: float
    region: str

    def __post_init__(self):
        if min(self.bulk, self.surface, self.mu) < -1e-12:
            raise ValueError("energy components must be nonnegative")


@dataclass
class Slice1D:
    z: np.ndarray            # foot point of the slicing line
    nu: np.ndarray           # unit direction
    interval: tuple[float, float]
    ts: np.ndarray           # sample parameters, strictly increasing
    vals: np.ndarray         # u(z + t nu) . nu at the samples
    jumps: np.ndarray        # crossing parameters strictly inside the interval

    def derivative_integral(self, field: "PiecewiseField") -> float:
        """Integral of |(u . nu)'| over the interval, skipping jump points:
        composite Gauss of |(grad u  nu) . nu| on the continuity subintervals."""
        t0, t1 = self.interval
        cuts = [t0] + [t for t in self.jumps.tolist() if t0 < t < t1] + [t1]
        nu = self.nu
        total = 0.0
        for a, b in zip(cuts, cuts[1:]):
            if b <= a:
                continue
            pa = self.z + a * nu
            pb = self.z + b * nu

            def integrand(pts):
                G = field.grad(pts)
                return np.abs(np.einsum("nij,j,i->n", G, nu, nu))

            n_panels = max(4, int(math.ceil(16 * (b - a) / max(t1 - t0, 1e-300))))
            total += gauss_segment(integrand, pa, pb, n_panels=n_panels)
        return total


class PiecewiseField:
    """Displacement field = ordered pieces + declared jump set."""

    def __init__(self, pieces: Sequence[Piece], crack: JumpSet | None = None,
                 domain: Region | None = None, name: str = "field"):
        if not pieces:
            raise ValueError("need at least one piece")
        if pieces[-1].mask is not None:
            raise ValueError("last piece must be the catch-all (mask=None)")
        self.pieces = list(pieces)
        self.crack = crack if crack is not None else JumpSet.empty()
        self.domain = domain
        self.name = name

    # -- constructors -------------------------------------------------------

    @staticmethod
    def smooth(map_: SmoothMap, domain: Region | None = None,
               name: str = "smooth") -> "PiecewiseField":
        return PiecewiseField([Piece("all", map_)], JumpSet.empty(), domain, name)

    @staticmethod
    def from_expr(u1: str, u2: str, domain: Region | None = None) -> "PiecewiseField":
        return PiecewiseField.smooth(ExprMap(u1, u2), domain)

    @staticmethod
    def two_state(x0, a, b, nu, window: Region, extent: float | None = None) -> "PiecewiseField":
        """a on the nu-positive side of the line through x0, b on the other.

        The crack polyline is the diameter chord of the window along nu-perp.
        """
        x0 = np.asarray(x0, dtype=float)
        nu = np.asarray(nu, dtype=float)
        nu = nu / np.hypot(*nu)
        tang = np.array([nu[1], -nu[0]])   # left of tang is the nu direction
        if extent is None:
            bx0, by0, bx1, by1 = window.bbox()
            extent = math.hypot(bx1 - bx0, by1 - by0)
        p = x0 - extent * tang
        q = x0 + extent * tang
        crack = JumpSet.from_polyline_coords([[p, q]],
                                             [[tuple(np.asarray(a) - np.asarray(b))]])
        pieces = [Piece("plus", LinearMap.constant(a), halfplane_mask(nu, x0)),
                  Piece("minus", LinearMap.constant(b))]
        return PiecewiseField(pieces, crack, window, "two_state")

    def plus_map(self, extra: SmoothMap) -> "PiecewiseField":
        """Field + smooth map (same crack, same masks)."""
        pieces = [Piece(p.name, SumMap([p.map, extra]), p.mask) for p in self.pieces]
        return PiecewiseField(pieces, self.crack, self.domain, self.name + "+map")

    def with_patch(self, mask: MaskFn, patch: SmoothMap, crack: JumpSet,
                   name: str | None = None) -> "PiecewiseField":
        """Override the field inside ``mask`` by ``patch``; crack replaced."""
        pieces = [Piece("patch", patch, mask)] + list(self.pieces)
        return PiecewiseField(pieces, crack, self.domain, name or self.name)

    # -- queries -------------------------------------------------------------

    def _piece_index(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        idx = np.full(len(pts), len(self.pieces) - 1, dtype=int)
        undecided = np.ones(len(pts), dtype=bool)
        for k, piece in enumerate(self.pieces[:-1]):
            m = piece.mask(pts) & undecided
            idx[m] = k
            undecided &= ~m
        return idx

    def value(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        idx = self._piece_index(pts)
        out = np.empty((len(pts), 2))
        for k, piece in enumerate(self.pieces):
            m = idx == k
            if m.any():
                out[m] = piece.map.value(pts[m])
        return out

    def grad(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        idx = self._piece_index(pts)
        out = np.empty((len(pts), 2, 2))
        for k, piece in enumerate(self.pieces):
            m = idx == k
            if m.any():
                out[m] = piece.map.grad(pts[m])
        return out

    def strain(self, pts: np.ndarray) -> np.ndarray:
        G = self.grad(pts)
        return 0.5 * (G + np.transpose(G, (0, 2, 1)))

    def sup_norm(self, region: Region, n_probe: int = 4096) -> float:
        """Max Euclidean |u| over a deterministic probe lattice in the region."""
        bx0, by0, bx1, by1 = region.bbox()
        m = int(math.ceil(math.sqrt(n_probe)))
        xs = bx0 + (np.arange(m) + 0.5) / m * (bx1 - bx0)
        ys = by0 + (np.arange(m) + 0.5) / m * (by1 - by0)
        XX, YY = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([XX.ravel(), YY.ravel()])
        pts = pts[region.contains(pts)]
        if len(pts) == 0:
            return 0.0
        v = self.value(pts)
        return float(np.hypot(v[:, 0], v[:, 1]).max())

    # -- traces and jumps ----------------------------------------------------

    def edge_normal(self, edge: Segment) -> np.ndarray:
        """Left normal of the directed edge (the jump's plus side)."""
        d = edge.b.as_array() - edge.a.as_array()
        d = d / np.hypot(*d)
        return np.array([-d[1], d[0]])

    def jump_values(self, edge: Segment, ss: np.ndarray,
                    amp: tuple[float, float] | None) -> np.ndarray:
        """[u] = u+ - u- at edge points (parameterized by s in [0,1]).

        Declared amplitudes win; otherwise the two one-sided pieces are
        identified by a small normal probe and evaluated at the edge point.
        """
        ss = np.atleast_1d(np.asarray(ss, dtype=float))
        if amp is not None:
            return np.broadcast_to(np.asarray(amp, dtype=float), (len(ss), 2)).copy()
        nu = self.edge_normal(edge)
        pts = edge.a.as_array()[None, :] + ss[:, None] * (
            edge.b.as_array() - edge.a.as_array())[None, :]
        # offset probes stay robust under arbitrary piece composition; the
        # O(eps |grad u|) error is far below every tolerance that consumes this
        eps = 1e-9 * max(edge.length(), 1.0)
        return self.value(pts + eps * nu) - self.value(pts - eps * nu)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def eval_strain(field: PiecewiseField, x, crack_tol_factor: float = 1e-9):
    """(value, grad, sym) at a single point; errors on the crack."""
    pt = np.atleast_2d(np.asarray(x, dtype=float))
    if not field.crack.is_empty():
        scale = 1.0
        if field.domain is not None:
            bx0, by0, bx1, by1 = field.domain.bbox()
            scale = math.hypot(bx1 - bx0, by1 - by0)
        if float(field.crack.distance(pt)[0]) <= crack_tol_factor * scale:
            raise OnDiscontinuityError(f"point {x} lies on the declared crack")
    v = field.value(pt)[0]
    G = field.grad(pt)[0]
    return v, G, 0.5 * (G + G.T)


def slice_section(field: PiecewiseField, x, y, n_samples: int = 64) -> Slice1D:
    """One-dimensional section of u . nu along the segment y -> x.

    nu = (x - y)/|x - y|; the foot point z = (I - nu nu^T) x; jump parameters
    come from the exact crossing predicate and samples are refined near them.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.array_equal(x, y):
        raise ValueError("slice endpoints coincide")
    d = x - y
    L = float(np.hypot(*d))
    nu = d / L
    z = x - nu * float(nu @ x)
    t_x = float(nu @ x)
    t_y = t_x - L
    seg = Segment(Point2(*y), Point2(*x))
    try:
        crossings = intersect(seg, field.crack)
    except CollinearOverlapError as exc:
        raise BadSliceError(str(exc)) from exc
    # map segment parameter s (y -> x) to slice parameter t = t_y + s L
    jumps = np.array(sorted(t_y + s * L for s, _ in crossings))
    base = np.linspace(t_y, t_x, n_samples)
    extra = []
    for tj in jumps:
        h = L / (4.0 * n_samples)
        extra.extend([tj - h, tj + h, tj - 4 * h, tj + 4 * h])
    ts = np.unique(np.concatenate([base, np.asarray(extra, dtype=float)])) if extra else base
    ts = ts[(ts >= t_y) & (ts <= t_x)]
    pts = z[None, :] + ts[:, None] * nu[None, :]
    vals = field.value(pts) @ nu
    return Slice1D(z, nu, (t_y, t_x), ts, vals, jumps)


def _surface_integral(field: PiecewiseField, region: Region | None,
                      weight) -> float:
    """Integral over crack ∩ region of weight(|[u]|)."""
    total = 0.0
    for edge, amp in field.crack.edges_with_amps():
        if region is None:
            pieces = [(0.0, 1.0)]
        else:
            pieces = region.clip_segment(edge)
        L = edge.length()
        for lo, hi in pieces:
            if amp is not None:
                jmag = math.hypot(*amp)
                total += weight(jmag) * (hi - lo) * L
            else:
                xs = np.linspace(lo, hi, 9)
                mid = 0.5 * (xs[:-1] + xs[1:])
                J = field.jump_values(edge, mid, None)
                jm = np.hypot(J[:, 0], J[:, 1])
                total += float(np.sum([weight(v) for v in jm])) * (hi - lo) * L / len(mid)
    return total


def energy(field: PiecewiseField, region: Region, p: float,
           rel_tol: float = 1e-6) -> EnergyReport:
    """Bulk |e(u)|^p + surface (1 + |[u]|) + the area-plus-surface measure."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if field.domain is not None:
        bx0, by0, bx1, by1 = region.bbox()
        corners = np.array([[bx0, by0], [bx1, by0], [bx0, by1], [bx1, by1]])
        # only a sanity check: region must not escape a declared disk domain
        if isinstance(field.domain, Disk):
            c = field.domain.center
            r = field.domain.radius
            if np.hypot(corners[:, 0] - c.x, corners[:, 1] - c.y).max() > 2.0 * r + 1e-9:
                raise GeometryError("energy region escapes the field domain")

    def bulk_density(pts):
        E = field.strain(pts)
        fro = np.sqrt(np.einsum("nij,nij->n", E, E))
        return fro ** p

    bulk = integrate_region(bulk_density, region, crack=field.crack, rel_tol=rel_tol)
    surface = _surface_integral(field, region, lambda j: 1.0 + j)
    mu = region.area() + surface
    return EnergyReport(bulk=max(bulk, 0.0), surface=surface, mu=mu, p=p,
                        region=type(region).__name__)


def total_strain_mass(field: PiecewiseField, region: Region,
                      rel_tol: float = 1e-4) -> float:
    """|Eu|(region): L1 norm of the strain density plus the jump part
    integral of |[u] ⊙ nu| (Frobenius norm of the symmetrized tensor product)."""

    def density(pts):
        E = field.strain(pts)
        return np.sqrt(np.einsum("nij,nij->n", E, E))

    bulk = integrate_region(density, region, crack=field.crack, rel_tol=rel_tol)
    total = bulk
    for edge, amp in field.crack.edges_with_amps():
        nu = field.edge_normal(edge)
        L = edge.length()
        for lo, hi in region.clip_segment(edge):
            xs = np.linspace(lo, hi, 9)
            mid = 0.5 * (xs[:-1] + xs[1:])
            J = field.jump_values(edge, mid, amp)
            odot = 0.5 * (J[:, :, None] * nu[None, None, :]
                          + nu[None, :, None] * J[:, None, :])
            fro = np.sqrt(np.einsum("nij,nij->n", odot, odot))
            total += float(fro.mean()) * (hi - lo) * L
    return total


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def save_grid(path, data: np.ndarray, spacing, origin) -> None:
    """Row-major float64 binary with a one-line ASCII header."""
    data = np.asarray(data, dtype=float)
    nx, ny, _ = data.shape
    with open(path, "wb") as fh:
        header = f"grid2v {nx} {ny} {spacing[0]!r} {spacing[1]!r} {origin[0]!r} {origin[1]!r}\n"
        fh.write(header.encode("ascii"))
        fh.write(data.astype("<f8").tobytes(order="C"))


def load_grid(path, crack: JumpSet | None = None) -> GridMap:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if header[0] != "grid2v":
            raise ValueError(f"not a grid file: {path}")
        nx, ny = int(header[1]), int(header[2])
        dx, dy, ox, oy = (float(v) for v in header[3:7])
        raw = np.frombuffer(fh.read(), dtype="<f8")
    data = raw.reshape(nx, ny, 2)
    return GridMap(data, (dx, dy), (ox, oy), crack)


def _mask_from_dict(d: dict) -> MaskFn:
    kind = d["type"]
    if kind == "halfplane":
        return halfplane_mask(d["normal"], d.get("x0", (0.0, 0.0)))
    if kind == "disk":
        return region_mask(Disk(Point2(*d["center"]), float(d["radius"])))
    if kind == "graph_above":
        return graph_above_mask(np.asarray(d["vertices"], dtype=float))
    raise ValueError(f"unknown mask type {kind!r}")


def _map_from_dict(d: dict, base_dir=None) -> SmoothMap:
    kind = d["type"]
    if kind == "expr":
        return ExprMap(d["u1"], d["u2"])
    if kind == "linear":
        return LinearMap(d.get("b", (0.0, 0.0)), d.get("M", ((0, 0), (0, 0))))
    if kind == "grid":
        import os
        path = d["path"]
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return load_grid(path)
    raise ValueError(f"unknown map type {kind!r}")


def field_from_dict(d: dict, base_dir=None) -> PiecewiseField:
    """Build a field from its structured-text (JSON-compatible) description:
    pieces as expression strings or grid-file references, crack as vertex
    lists with per-edge jump amplitudes."""
    crack = JumpSet.empty()
    if "crack" in d and d["crack"]:
        coord_lists = [pl["vertices"] for pl in d["crack"]["polylines"]]
        amp_lists = [pl.get("amps") for pl in d["crack"]["polylines"]]
        crack = JumpSet.from_polyline_coords(coord_lists, amp_lists)
    pieces = []
    for pd in d["pieces"]:
        mask = _mask_from_dict(pd["mask"]) if pd.get("mask") else None
        pieces.append(Piece(pd.get("name", f"piece{len(pieces)}"),
                            _map_from_dict(pd["map"], base_dir), mask))
    domain = None
    if "domain" in d and d["domain"]:
        dd = d["domain"]
        if dd["type"] == "disk":
            domain = Disk(Point2(*dd["center"]), float(dd["radius"]))
        elif dd["type"] == "rect":
            domain = Rect(*dd["bounds"])
        else:
            raise ValueError(f"unknown domain type {dd['type']!r}")
    return PiecewiseField(pieces, crack, domain, d.get("name", "field"))
