"""P1 finite elements on triangulations: strain energies, quadrature on
triangles, and minimization of ∫|e(w)|^p with clamped boundary values.

For p = 2 the energy is a sparse quadratic form in the free node values and is
minimized by one sparse direct solve; other p use L-BFGS with the analytic
gradient, started from the p = 2 minimizer, down to a fixed gradient-norm
tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["TriMesh", "disk_mesh", "minimize_strain_energy", "SolverError"]


class SolverError(RuntimeError):
    """FE minimization failed to reach the requested tolerance."""


@dataclass
class TriMesh:
    points: np.ndarray      # (n, 2)
    triangles: np.ndarray   # (m, 3) ccw

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=int)
        a = self.points[self.triangles[:, 0]]
        b = self.points[self.triangles[:, 1]]
        c = self.points[self.triangles[:, 2]]
        det = ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
               - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
        flip = det < 0
        if flip.any():
            tri = self.triangles.copy()
            tri[flip] = tri[flip][:, [0, 2, 1]]
            self.triangles = tri
            det = np.abs(det)
        self.areas = 0.5 * det
        self._hat_grads = self._compute_hat_grads()

    def _compute_hat_grads(self):
        P, T = self.points, self.triangles
        a, b, c = P[T[:, 0]], P[T[:, 1]], P[T[:, 2]]
        det = 2.0 * self.areas
        gb = np.stack([(c[:, 1] - a[:, 1]) / det, -(c[:, 0] - a[:, 0]) / det], axis=1)
        gc = np.stack([-(b[:, 1] - a[:, 1]) / det, (b[:, 0] - a[:, 0]) / det], axis=1)
        ga = -gb - gc
        return np.stack([ga, gb, gc], axis=1)  # (m, 3, 2)

    def strains(self, values: np.ndarray) -> np.ndarray:
        """Constant symmetric strain per triangle for nodal 2-vector values."""
        V = values[self.triangles]                       # (m, 3, 2)
        G = np.einsum("mki,mkj->mij", V, self._hat_grads)  # grad[t, i, j]
        return 0.5 * (G + np.transpose(G, (0, 2, 1)))

    def gauss_points(self, order: int = 2):
        """Interior quadrature nodes and weights per triangle (degree-2 rule)."""
        if order == 1:
            bary = np.array([[1 / 3, 1 / 3, 1 / 3]])
            w = np.array([1.0])
        else:
            bary = np.array([[2 / 3, 1 / 6, 1 / 6],
                             [1 / 6, 2 / 3, 1 / 6],
                             [1 / 6, 1 / 6, 2 / 3]])
            w = np.array([1 / 3, 1 / 3, 1 / 3])
        P, T = self.points, self.triangles
        corners = P[T]                                    # (m, 3, 2)
        pts = np.einsum("qk,mkd->mqd", bary, corners)     # (m, q, 2)
        wts = self.areas[:, None] * w[None, :]            # (m, q)
        return pts, wts

    def min_angle(self) -> float:
        P, T = self.points, self.triangles
        a, b, c = P[T[:, 0]], P[T[:, 1]], P[T[:, 2]]
        angs = []
        for (p, q, r) in ((a, b, c), (b, c, a), (c, a, b)):
            v1 = q - p
            v2 = r - p
            cosang = np.einsum("ij,ij->i", v1, v2) / (
                np.hypot(v1[:, 0], v1[:, 1]) * np.hypot(v2[:, 0], v2[:, 1]))
            angs.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
        return float(np.min(np.stack(angs)))

    def boundary_nodes(self) -> np.ndarray:
        """Nodes on edges that belong to exactly one triangle."""
        T = self.triangles
        edges = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
        edges = np.sort(edges, axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        return np.unique(uniq[counts == 1])


def disk_mesh(center, radius: float, n_rings: int = 8) -> TriMesh:
    """Quality unstructured-looking but fully deterministic disk mesh:
    concentric rings of nodes, Delaunay triangulation."""
    from scipy.spatial import Delaunay
    cx, cy = float(center[0]), float(center[1])
    pts = [(cx, cy)]
    for k in range(1, n_rings + 1):
        r = radius * k / n_rings
        n = 6 * k
        th = 2.0 * math.pi * (np.arange(n) + 0.5 * (k % 2)) / n
        for t in th:
            pts.append((cx + r * math.cos(t), cy + r * math.sin(t)))
    P = np.array(pts)
    tri = Delaunay(P)
    return TriMesh(P, tri.simplices)


def _assemble_quadratic(mesh: TriMesh):
    """Sparse matrix K with  energy(w) = 0.5 w^T K w = ∫ |e(w)|^2 dx  for nodal
    dof vector w (interleaved components)."""
    m = len(mesh.triangles)
    n = len(mesh.points)
    HG = mesh._hat_grads                 # (m, 3, 2)
    rows, cols, vals = [], [], []
    # strain components as linear maps of the 6 local dofs
    # e11 = sum_k g_k0 * u_k0 ; e22 = sum_k g_k1 * u_k1
    # e12 = 0.5 sum_k (g_k1 u_k0 + g_k0 u_k1)
    B = np.zeros((m, 3, 6))              # rows: e11, e22, sqrt2*e12
    for k in range(3):
        B[:, 0, 2 * k + 0] = HG[:, k, 0]
        B[:, 1, 2 * k + 1] = HG[:, k, 1]
        B[:, 2, 2 * k + 0] = HG[:, k, 1] / math.sqrt(2.0)
        B[:, 2, 2 * k + 1] = HG[:, k, 0] / math.sqrt(2.0)
    # |e|^2 = e11^2 + e22^2 + 2 e12^2 = |B u|^2
    Kloc = 2.0 * np.einsum("mqi,mqj,m->mij", B, B, mesh.areas)  # factor: 0.5 w K w
    dof = np.empty((m, 6), dtype=int)
    dof[:, 0::2] = 2 * mesh.triangles
    dof[:, 1::2] = 2 * mesh.triangles + 1
    for i in range(6):
        for j in range(6):
            rows.append(dof[:, i])
            cols.append(dof[:, j])
            vals.append(Kloc[:, i, j])
    K = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(2 * n, 2 * n)).tocsr()
    return K


def _energy_and_grad(mesh: TriMesh, w_flat: np.ndarray, p: float):
    V = w_flat.reshape(-1, 2)
    E = mesh.strains(V)
    fro2 = np.einsum("mij,mij->m", E, E)
    fro = np.sqrt(np.maximum(fro2, 1e-300))
    energy = float(np.sum(fro ** p * mesh.areas))
    # d/dV of sum_T area * |E_T|^p: p |E|^{p-2} E : dE
    coef = p * fro ** (p - 2.0) * mesh.areas
    # dE_T/du_{k,i} contributions: dE_ij = 0.5 (g_kj delta_i. + g_ki delta_.j)
    HG = mesh._hat_grads
    GV = np.einsum("m,mij,mkj->mki", coef, E, HG)  # (m, 3, 2)
    grad = np.zeros_like(V)
    np.add.at(grad, mesh.triangles.ravel(), GV.reshape(-1, 2))
    return energy, grad.ravel()


def minimize_strain_energy(mesh: TriMesh, fixed: np.ndarray,
                           fixed_values: np.ndarray, p: float,
                           grad_tol: float = 1e-8) -> tuple[np.ndarray, float]:
    """Minimize ∫|e(w)|^p over nodal fields with the listed nodes clamped.

    Returns (nodal values (n,2), minimal energy).
    """
    n = len(mesh.points)
    fixed = np.asarray(fixed, dtype=int)
    is_fixed = np.zeros(n, dtype=bool)
    is_fixed[fixed] = True
    free = np.nonzero(~is_fixed)[0]

    V0 = np.zeros((n, 2))
    V0[fixed] = fixed_values
    if len(free) == 0:
        E = mesh.strains(V0)
        fro = np.sqrt(np.einsum("mij,mij->m", E, E))
        return V0, float(np.sum(fro ** p * mesh.areas))

    # p=2 solve (also the seed for general p)
    K = _assemble_quadratic(mesh)
    dof_fixed = np.concatenate([2 * fixed, 2 * fixed + 1])
    dof_free = np.concatenate([2 * free, 2 * free + 1])
    dof_free.sort()
    w = V0.ravel().copy()
    rhs = -K[dof_free][:, dof_fixed] @ w[dof_fixed][...]
    # order fixed dofs consistently
    wfix = np.zeros(2 * n)
    wfix[2 * fixed] = fixed_values[:, 0]
    wfix[2 * fixed + 1] = fixed_values[:, 1]
    rhs = -(K[dof_free] @ wfix)
    Kff = K[dof_free][:, dof_free]
    sol = spla.spsolve(Kff.tocsc(), rhs)
    w = wfix.copy()
    w[dof_free] = sol

    if abs(p - 2.0) > 1e-12:
        from scipy.optimize import minimize

        def fun(x):
            full = wfix.copy()
            full[dof_free] = x
            e, g = _energy_and_grad(mesh, full, p)
            return e, g[dof_free]

        res = minimize(fun, w[dof_free], jac=True, method="L-BFGS-B",
                       options={"maxiter": 2000, "gtol": grad_tol, "ftol": 1e-14})
        if not res.success and np.linalg.norm(res.jac, np.inf) > 1e-5:
            raise SolverError(f"p={p} FE solve stalled: {res.message}, "
                              f"|grad|={np.linalg.norm(res.jac, np.inf):.3e}")
        w[dof_free] = res.x

    V = w.reshape(-1, 2)
    E = mesh.strains(V)
    fro = np.sqrt(np.einsum("mij,mij->m", E, E))
    return V, float(np.sum(fro ** p * mesh.areas))
