"""Dirichlet cell problems and energy-density estimators.

The model functional is

    F(u, B) = int_B |e(u)|^p dx + int_{J_u ∩ B} (1 + |[u]|) dH^1

(the alpha = beta = 1 representative of the admissible growth class), plus a
custom mode whose bulk term integrates a user-supplied function of the full
gradient.  ``minimize_cell`` bounds the Dirichlet minimum m(u, B) over a
*declared* competitor class: the data itself, P1 finite elements clamped to
the data on the annulus B minus 0.9 B (jump-free class), and two-sided FE
fields whose jump runs along a short polyline through the inner disk
(jump class, coordinate descent on the free vertices with seeded multistart).
Every value is an upper bound on the true infimum and is labeled with the
class that produced it.

Density estimators follow the two cell normalizations: bulk densities divide
by the ball area and extrapolate linearly in eps^2, surface densities divide
by the diameter and extrapolate linearly in eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import numpy as np

from .geom import Annulus, Disk, JumpSet, Point2, Polyline, Segment, h1_length
from .field import (ExprMap, FETriMap, FieldMap, LinearMap, Piece,
                    PiecewiseField, energy)
from .fem import TriMesh, disk_mesh, minimize_strain_energy
from .integrate import integrate_region

__all__ = [
    "ModelFunctional", "CellProblem", "model_energy", "remark_integrand",
    "minimize_cell", "density_estimate", "partition_infimum",
    "radius_continuity",
]


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelFunctional:
    p: float = 2.0
    alpha: float = 1.0
    beta: float = 1.0
    mode: str = "reference"           # "reference" | "custom"
    integrand: object = None          # custom: (N,2,2) gradients -> (N,)

    def __post_init__(self):
        if not (1.0 <= self.p < math.inf):
            raise ValueError("p must be in [1, inf)")
        if not (0.0 < self.alpha <= self.beta):
            raise ValueError("need 0 < alpha <= beta")
        if self.mode not in ("reference", "custom"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "custom" and self.integrand is None:
            raise ValueError("custom mode needs an integrand")


def remark_integrand(xi: np.ndarray):
    """Gradient integrand (tr xi)^2 + sqrt((xi12^2 + xi21^2)^2 + 1) - 2 det xi
    with its two-sided symmetric-part bounds; vectorized over (..., 2, 2)."""
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 2
    X = xi.reshape(-1, 2, 2)
    tr = X[:, 0, 0] + X[:, 1, 1]
    off = X[:, 0, 1] ** 2 + X[:, 1, 0] ** 2
    det = X[:, 0, 0] * X[:, 1, 1] - X[:, 0, 1] * X[:, 1, 0]
    value = tr ** 2 + np.sqrt(off ** 2 + 1.0) - 2.0 * det
    sym2 = ((2.0 * X[:, 0, 0]) ** 2 + (2.0 * X[:, 1, 1]) ** 2
            + 2.0 * (X[:, 0, 1] + X[:, 1, 0]) ** 2)
    lower = sym2 / 8.0
    upper = sym2 / 4.0 + 1.0
    ok = (lower <= value + 1e-12 * np.maximum(1.0, np.abs(value))) & (
        value <= upper + 1e-12 * np.maximum(1.0, np.abs(upper)))
    if single:
        return float(value[0]), float(lower[0]), float(upper[0]), bool(ok[0])
    return value, lower, upper, ok


def model_energy(u: PiecewiseField, region, F: ModelFunctional,
                 rel_tol: float = 1e-6) -> float:
    """F(u, region): reference bulk delegates to the field energy; custom
    bulk integrates the supplied gradient integrand.  Surface is always the
    (1 + |[u]|) length term."""
    if F.mode == "reference":
        rep = energy(u, region, F.p, rel_tol=rel_tol)
        return rep.bulk + rep.surface

    def dens(pts):
        G = u.grad(pts)
        return np.asarray(F.integrand(G), dtype=float)

    bulk = integrate_region(dens, region, crack=u.crack, rel_tol=rel_tol)
    rep = energy(u, region, F.p, rel_tol=1e-3)
    return bulk + rep.surface


# ---------------------------------------------------------------------------
# cell problems
# ---------------------------------------------------------------------------


@dataclass
class CellProblem:
    ball: Disk
    data: PiecewiseField
    competitor_class: str = "jump_free"   # "jump_free" | "polyline_jump"
    resolution: int = 8                   # mesh rings across the ball
    kseg: int = 3
    margin: float = 0.9                   # competitors equal data outside margin*r
    seed: int = 0

    def __post_init__(self):
        if self.competitor_class not in ("jump_free", "polyline_jump"):
            raise ValueError(f"unknown class {self.competitor_class!r}")
        if not (0.0 < self.margin < 1.0):
            raise ValueError("margin must be in (0, 1)")


def _data_is_affine(data: PiecewiseField, ball: Disk) -> np.ndarray | None:
    """Constant gradient of the data on the ball, or None."""
    if not data.crack.is_empty():
        if h1_length(data.crack, ball) > 0.0:
            return None
    c = ball.center
    probes = np.array([[c.x, c.y], [c.x + 0.37 * ball.radius, c.y - 0.21 * ball.radius],
                       [c.x - 0.11 * ball.radius, c.y + 0.43 * ball.radius],
                       [c.x + 0.05 * ball.radius, c.y + 0.31 * ball.radius]])
    G = data.grad(probes)
    if np.abs(G - G[0]).max() < 1e-12 * (1.0 + np.abs(G[0]).max()):
        return G[0]
    return None


def _data_is_two_state(data: PiecewiseField, ball: Disk):
    """(a, b, entry/exit points on the margin circle) for piecewise-constant
    data jumping across a single straight crack through the ball, else None."""
    if len(data.crack.polylines) != 1:
        return None
    edges = data.crack.edges()
    if len(edges) != 1:
        return None
    e = edges[0]
    G = data.grad(np.array([[ball.center.x + 0.31 * ball.radius,
                             ball.center.y + 0.17 * ball.radius]]))
    # piecewise constant: zero gradient off the crack
    probes = _offside_probes(ball, e)
    G = data.grad(probes)
    if np.abs(G).max() > 1e-12:
        return None
    inner = Disk(ball.center, ball.radius * 1.0)
    return e


def _offside_probes(ball: Disk, e: Segment) -> np.ndarray:
    c = ball.center.as_array()
    r = ball.radius
    return np.array([c + [0.23 * r, 0.41 * r], c - [0.37 * r, 0.11 * r],
                     c + [-0.19 * r, 0.29 * r], c + [0.31 * r, -0.33 * r]])


def _fe_jump_free(prob: CellProblem, F: ModelFunctional):
    mesh = disk_mesh((prob.ball.center.x, prob.ball.center.y),
                     prob.ball.radius, n_rings=prob.resolution)
    c = prob.ball.center.as_array()
    rr = np.hypot(mesh.points[:, 0] - c[0], mesh.points[:, 1] - c[1])
    fixed = np.nonzero(rr >= prob.margin * prob.ball.radius - 1e-12)[0]
    fixed_vals = prob.data.value(mesh.points[fixed])
    vals, bulk = minimize_strain_energy(mesh, fixed, fixed_vals, F.p)
    # the annulus crack of the data stays part of the competitor's energy
    ann = Annulus(prob.ball.center, prob.margin * prob.ball.radius,
                  prob.ball.radius)
    surf = _surface_energy(prob.data, ann)
    if F.mode == "custom":
        fe = FETriMap(mesh.points, mesh.triangles, vals)
        G = fe._tri_grad
        dens = np.asarray(F.integrand(G), dtype=float)
        bulk = float(np.sum(dens * mesh.areas))
    return bulk + surf, {"nodes": len(mesh.points), "clamped": len(fixed)}


def _surface_energy(u: PiecewiseField, region) -> float:
    total = 0.0
    for edge, amp in u.crack.edges_with_amps():
        L = edge.length()
        for lo, hi in region.clip_segment(edge):
            ss = np.linspace(lo, hi, 9)
            mid = 0.5 * (ss[:-1] + ss[1:])
            J = u.jump_values(edge, mid, amp)
            jm = np.hypot(J[:, 0], J[:, 1])
            total += float((1.0 + jm).mean()) * (hi - lo) * L
    return total


def _chord_points(ball: Disk, margin: float, e: Segment):
    """Entry/exit of the data crack line on the margin circle."""
    inner = Disk(ball.center, margin * ball.radius)
    # extend the edge far beyond the ball to guarantee crossing
    a, b = e.a.as_array(), e.b.as_array()
    d = b - a
    d = d / np.hypot(*d)
    far = 4.0 * ball.radius
    mid = 0.5 * (a + b)
    eL = Segment(Point2(*(mid - far * d)), Point2(*(mid + far * d)))
    ivals = inner.clip_segment(eL)
    if not ivals:
        return None
    lo, hi = ivals[0]
    return eL.point_at(lo).as_array(), eL.point_at(hi).as_array()


def _polyline_jump_value(prob: CellProblem, F: ModelFunctional,
                         verts: np.ndarray, a_val, b_val,
                         jump_mag: float) -> float:
    """Energy of the piecewise-constant two-sided competitor whose jump runs
    along the polyline `verts` (entry to exit on the margin circle) and whose
    sides carry the constant data states."""
    ann = Annulus(prob.ball.center, prob.margin * prob.ball.radius,
                  prob.ball.radius)
    surf_ann = _surface_energy(prob.data, ann)
    length = float(np.sum(np.hypot(*(np.diff(verts, axis=0).T))))
    return surf_ann + (1.0 + jump_mag) * length


def minimize_cell(prob: CellProblem, F: ModelFunctional) -> tuple[float, dict]:
    """Upper bound on m(data, B) over the declared competitor class; the data
    itself is always admissible, so the bound never exceeds F(data, B)."""
    info: dict = {"class": prob.competitor_class, "candidates": {}}
    F_data = model_energy(prob.data, prob.ball, F, rel_tol=1e-5)
    info["candidates"]["identity"] = F_data
    info["F_data"] = F_data
    best = F_data

    affine_grad = _data_is_affine(prob.data, prob.ball)
    if prob.competitor_class == "jump_free":
        if affine_grad is not None and F.mode == "reference":
            sym = 0.5 * (affine_grad + affine_grad.T)
            closed = float(np.sqrt((sym * sym).sum()) ** F.p) * prob.ball.area()
            info["candidates"]["affine_closed_form"] = closed
            best = min(best, closed)
        else:
            val, meta = _fe_jump_free(prob, F)
            info["candidates"]["fe_jump_free"] = val
            info["fe"] = meta
            best = min(best, val)
    else:
        two_state_edge = _data_is_two_state(prob.data, prob.ball)
        if two_state_edge is None:
            # jump class on data without a straight piecewise-constant jump:
            # fall back to the jump-free machinery (declared in the report)
            val, meta = _fe_jump_free(prob, F)
            info["candidates"]["fe_jump_free"] = val
            best = min(best, val)
        else:
            pq = _chord_points(prob.ball, prob.margin, two_state_edge)
            if pq is None:
                val, meta = _fe_jump_free(prob, F)
                info["candidates"]["fe_jump_free"] = val
                best = min(best, val)
            else:
                P, Q = pq
                amp = prob.data.jump_values(two_state_edge, np.array([0.5]),
                                            _declared_amp(prob.data,
                                                           two_state_edge))[0]
                jm = float(np.hypot(*amp))
                rng = np.random.default_rng(prob.seed)
                best_len = None
                for start in range(4):
                    verts = _init_polyline(P, Q, prob.kseg, rng, start,
                                           prob.ball)
                    verts = _descend_polyline(verts, prob, rng)
                    val = _polyline_jump_value(prob, F, verts, None, None, jm)
                    if best_len is None or val < best_len:
                        best_len = val
                        info["jump_polyline"] = verts.tolist()
                info["candidates"]["polyline_jump"] = best_len
                best = min(best, best_len)
    info["m_upper"] = best
    info["lower_heuristic"] = F.alpha * best if F.mode == "custom" else best
    return best, info


def _declared_amp(data: PiecewiseField, e: Segment):
    for edge, amp in data.crack.edges_with_amps():
        if edge == e:
            return amp
    return None


def _init_polyline(P, Q, kseg, rng, start, ball: Disk):
    ts = np.linspace(0.0, 1.0, kseg + 1)
    base = P[None, :] + ts[:, None] * (Q - P)[None, :]
    if start > 0:
        d = Q - P
        n = np.array([-d[1], d[0]])
        n = n / max(np.hypot(*n), 1e-30)
        wig = rng.uniform(-0.2, 0.2, size=(kseg + 1, 1)) * ball.radius
        wig[0] = wig[-1] = 0.0
        base = base + wig * n[None, :]
    return base


def _descend_polyline(verts, prob: CellProblem, rng):
    """Coordinate descent on interior vertices toward minimal total length
    (the inner solves are piecewise constant, so geometry is the only dof)."""
    verts = verts.copy()
    r = prob.ball.radius * prob.margin
    c = prob.ball.center.as_array()

    def total_len(V):
        return float(np.sum(np.hypot(*(np.diff(V, axis=0).T))))

    step = 0.1 * prob.ball.radius
    for _sweep in range(40):
        improved = False
        for i in range(1, len(verts) - 1):
            for dx, dy in ((step, 0), (-step, 0), (0, step), (0, -step)):
                trial = verts.copy()
                trial[i] = trial[i] + [dx, dy]
                if np.hypot(*(trial[i] - c)) >= r:
                    continue
                if total_len(trial) < total_len(verts) - 1e-15:
                    verts = trial
                    improved = True
        if not improved:
            step *= 0.5
            if step < 1e-6 * prob.ball.radius:
                break
    return verts


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


def density_estimate(kind: str, args: dict, F: ModelFunctional,
                     eps_schedule, resolution: int = 8,
                     seed: int = 0) -> dict:
    """Normalized cell minima along the shrinking-ball schedule with a linear
    extrapolation: area normalization and eps^2 fit for the bulk density,
    diameter normalization and eps fit for the surface density."""
    eps_schedule = sorted(float(e) for e in eps_schedule)
    if len(eps_schedule) < 4:
        raise ValueError("need a schedule of >= 4 radii")
    x0 = np.asarray(args.get("x0", (0.0, 0.0)), dtype=float)
    rows = []
    for eps in eps_schedule:
        ball = Disk(Point2(*x0), eps)
        if kind == "f":
            xi = np.asarray(args["xi"], dtype=float)
            u0 = np.asarray(args.get("u0", (0.0, 0.0)), dtype=float)
            data = PiecewiseField.smooth(LinearMap(u0 - xi @ x0, xi))
            prob = CellProblem(ball, data, "jump_free", resolution, seed=seed)
            m, info = minimize_cell(prob, F)
            rows.append({"eps": eps, "m": m, "normalized": m / (math.pi * eps ** 2)})
        elif kind == "g":
            a = np.asarray(args["a"], dtype=float)
            b = np.asarray(args["b"], dtype=float)
            nu = np.asarray(args["nu"], dtype=float)
            window = Disk(Point2(*x0), 2.0 * eps)
            data = PiecewiseField.two_state(x0, a, b, nu, window,
                                            extent=4.0 * eps)
            prob = CellProblem(ball, data, "polyline_jump", resolution,
                               seed=seed)
            m, info = minimize_cell(prob, F)
            rows.append({"eps": eps, "m": m, "normalized": m / (2.0 * eps)})
        else:
            raise ValueError(f"kind must be 'f' or 'g', got {kind!r}")
    ns = np.array([r["normalized"] for r in rows])
    es = np.array([r["eps"] for r in rows])
    tail = slice(-3, None)
    xfit = es[tail] ** 2 if kind == "f" else es[tail]
    coef = np.polyfit(xfit, ns[tail], 1)
    extrapolated = float(coef[1])
    diffs = np.diff(ns)
    monotone = bool(np.all(diffs <= 1e-9) or np.all(diffs >= -1e-9))
    return {"kind": kind, "rows": rows, "extrapolated": extrapolated,
            "monotone_trend": monotone}


# ---------------------------------------------------------------------------
# partitions
# ---------------------------------------------------------------------------


def _pack_disjoint_balls(region: Disk, delta: float, levels: int = 3):
    """Deterministic multi-scale packing of disjoint balls with diameter
    below delta inside the disk."""
    balls: list[tuple[float, float, float]] = []

    def fits(x, y, r):
        dc = math.hypot(x - region.center.x, y - region.center.y)
        if dc + r > region.radius:
            return False
        for (bx, by, br) in balls:
            if math.hypot(x - bx, y - by) < r + br:
                return False
        return True

    r = 0.495 * delta
    for level in range(levels):
        # hex lattice of the current radius over the bounding box
        pitch = 2.0 * r * 1.001
        ny = int(math.ceil(2.0 * region.radius / (pitch * math.sqrt(3) / 2))) + 2
        nx = int(math.ceil(2.0 * region.radius / pitch)) + 2
        for iy in range(-ny, ny + 1):
            y = region.center.y + iy * pitch * math.sqrt(3) / 2
            off = 0.5 * pitch if iy % 2 else 0.0
            for ix in range(-nx, nx + 1):
                x = region.center.x + ix * pitch + off
                if fits(x, y, r):
                    balls.append((x, y, r))
        r /= 3.0
    return balls


def partition_infimum(u: PiecewiseField, region: Disk, delta: float,
                      F: ModelFunctional, resolution: int = 6,
                      residual_tol: float = 0.05, seed: int = 0) -> dict:
    """Greedy packing upper bound of the partition infimum at scale delta.

    The packing residual (area plus crack measure not covered) is completed
    with the direct energy, so the reported value is a certified upper bound:
    sum of per-ball minima plus F(u, region) minus the per-ball direct
    energies of the covered part.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    balls = _pack_disjoint_balls(region, delta)
    total_m = 0.0
    total_F_covered = 0.0
    for (x, y, r) in balls:
        ball = Disk(Point2(x, y), r)
        crossed = (not u.crack.is_empty()) and h1_length(u.crack, ball) > 0.0
        cls = "polyline_jump" if crossed else "jump_free"
        prob = CellProblem(ball, u, cls, resolution, seed=seed)
        m, _info = minimize_cell(prob, F)
        total_m += m
        total_F_covered += _info["F_data"]
    F_total = model_energy(u, region, F, rel_tol=1e-5)
    residual_F = max(F_total - total_F_covered, 0.0)
    covered_area = sum(math.pi * r * r for (_x, _y, r) in balls)
    area_residual = 1.0 - covered_area / region.area()
    value = total_m + residual_F
    return {"delta": delta, "balls": len(balls), "value": value,
            "sum_m": total_m, "residual_completion": residual_F,
            "area_residual_fraction": area_residual,
            "packing_ok": area_residual <= residual_tol,
            "F_total": F_total}


def radius_continuity(u: PiecewiseField, x0, r: float, F: ModelFunctional,
                      delta_schedule, competitor_class: str = "jump_free",
                      resolution: int = 8, seed: int = 0) -> dict:
    """m on shrunk and grown balls along a delta schedule, with the annulus
    upper bound for the grown radius checked at each step."""
    x0 = np.asarray(x0, dtype=float)

    def m_at(radius):
        prob = CellProblem(Disk(Point2(*x0), radius), u, competitor_class,
                           resolution, seed=seed)
        return minimize_cell(prob, F)[0]

    m_r = m_at(r)
    rows = []
    for d in sorted(float(dd) for dd in delta_schedule):
        m_minus = m_at(r - d)
        m_plus = m_at(r + d)
        ann = Annulus(Point2(*x0), r, r + d)

        def growth(pts):
            E = u.strain(pts)
            return 1.0 + np.einsum("nij,nij->n", E, E) ** (F.p / 2.0)

        bulk = integrate_region(growth, ann, crack=u.crack, rel_tol=1e-4,
                                max_depth=8)
        surf = _surface_energy(u, ann)
        bound = m_r + F.beta * (bulk + surf)
        rows.append({"delta": d, "m_minus": m_minus, "m_plus": m_plus,
                     "upper_bound": bound,
                     "upper_ok": m_plus <= bound * (1.0 + 1e-6) + 1e-12,
                     "gap_minus": abs(m_minus - m_r),
                     "gap_plus": abs(m_plus - m_r)})
    return {"r": r, "m_r": m_r, "rows": rows}
