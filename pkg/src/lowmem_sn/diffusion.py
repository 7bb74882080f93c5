"""Continuous Galerkin solvers for the diffusion limit ``-div(1/(3 sigma_s) grad u) + sigma_a u = q``.

Linear (1D) or bilinear (2D) nodal elements on the transport mesh with
homogeneous Dirichlet data.  The ``projected`` form replaces each gradient
by its cell average before forming the diffusion term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import ProblemSpec
from .mesh import CartesianMesh, build_mesh, gauss_points

FORMS = ("cg", "projected")


def _corners(dim: int) -> np.ndarray:
    return np.array(np.meshgrid(*([[0, 1]] * dim), indexing="ij")).reshape(dim, -1).T


def _shape(xi: np.ndarray, dim: int):
    """Nodal multilinear shape functions on [-1, 1]^d: values ``(q, 2^d)``, gradients ``(q, 2^d, d)``."""
    cor = 2 * _corners(dim) - 1  # corner signs
    f = 0.5 * (1 + xi[:, None, :] * cor[None])  # (q, k, d)
    val = f.prod(axis=2)
    grad = np.empty(f.shape)
    for a in range(dim):
        g = f.copy()
        g[:, :, a] = 0.5 * cor[None, :, a]
        grad[:, :, a] = g.prod(axis=2)
    return val, grad


@dataclass
class DiffusionSolution:
    mesh: CartesianMesh
    form: str
    values: np.ndarray          # nodal values on the full node grid (boundary included)
    matrix: sp.csr_matrix       # full system matrix before boundary elimination
    load: np.ndarray

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        cells, ref = self.mesh.locate(points)
        val, _ = _shape(ref, self.mesh.dim)
        return np.einsum("pk,pk->p", val, self.values.ravel()[_cell_nodes(self.mesh)[cells]])

    def energy(self) -> float:
        u = self.values.ravel()
        return float(u @ (self.matrix @ u))

    def work(self) -> float:
        return float(self.load @ self.values.ravel())


def _cell_nodes(mesh: CartesianMesh) -> np.ndarray:
    shape = tuple(c + 1 for c in mesh.counts)
    cor = _corners(mesh.dim)
    idx = mesh.index[:, None, :] + cor[None]
    return np.ravel_multi_index(tuple(np.moveaxis(idx, 2, 0)), shape)


def assemble_diffusion(form: str, sigma_s: np.ndarray, sigma_a: np.ndarray, mesh: CartesianMesh):
    """Global stiffness-plus-mass matrix (all nodes) for cellwise constant coefficients."""
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}")
    if np.any(sigma_s <= 0):
        raise ValueError("diffusion limit needs sigma_s > 0 in every cell")
    d = mesh.dim
    xi, wq = gauss_points(d, 2)
    val, grad = _shape(xi, d)
    mass = np.einsum("q,qi,qj->ij", wq, val, val) / 2**d
    nodes = _cell_nodes(mesh)
    k = nodes.shape[1]
    rows = np.repeat(nodes, k, axis=1).ravel()
    cols = np.tile(nodes, (1, k)).ravel()
    scale = 2.0 / mesh.widths  # (cells, d)
    if form == "cg":
        # int grad_i . grad_j over the cell, per axis, in reference coordinates
        stiff_a = np.einsum("q,qia,qja->aij", wq, grad, grad) / 2**d
        stiff = np.einsum("ca,aij->cij", scale**2, stiff_a)
    else:
        avg = np.einsum("q,qia->ia", wq, grad) / 2**d  # cell-averaged reference gradients
        stiff = np.einsum("ca,ia,ja->cij", scale**2, avg, avg)
    blocks = mesh.volumes[:, None, None] * (
        stiff / (3.0 * sigma_s)[:, None, None] + sigma_a[:, None, None] * mass[None]
    )
    n = int(np.prod([c + 1 for c in mesh.counts]))
    return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _boundary_mask(mesh: CartesianMesh) -> np.ndarray:
    shape = tuple(c + 1 for c in mesh.counts)
    idx = np.indices(shape).reshape(mesh.dim, -1).T
    return np.any((idx == 0) | (idx == np.array(shape) - 1), axis=1)


def solve_diffusion_limit(form: str, problem: ProblemSpec, mesh: CartesianMesh, n_points: int = 4) -> DiffusionSolution:
    """Solve the limit problem; the source is sampled as ``q(0, x)`` (isotropic sources)."""
    sig_s, sig_a = problem.cross_sections(mesh)
    A = assemble_diffusion(form, sig_s, sig_a, mesh)
    d = mesh.dim
    xi, wq = gauss_points(d, n_points)
    val, _ = _shape(xi, d)
    pts = mesh.centers[:, None, :] + 0.5 * mesh.widths[:, None, :] * xi[None]
    src = problem.source
    q = src(np.zeros(d), pts) if callable(src) else np.full(pts.shape[:-1], float(src))
    q = np.broadcast_to(np.asarray(q, dtype=float), pts.shape[:-1])
    loc = (mesh.volumes / 2**d)[:, None] * np.einsum("q,cq,qk->ck", wq, q, val)
    nodes = _cell_nodes(mesh)
    b = np.bincount(nodes.ravel(), weights=loc.ravel(), minlength=A.shape[0])
    free = ~_boundary_mask(mesh)
    u = np.zeros(A.shape[0])
    if free.any():
        u[free] = spla.spsolve(A[free][:, free].tocsc(), b[free])
    shape = tuple(c + 1 for c in mesh.counts)
    return DiffusionSolution(mesh, form, u.reshape(shape), A, b)


def projected_stability(sol: DiffusionSolution, problem: ProblemSpec) -> tuple[float, float]:
    """``(||Pi0 grad u||^2 + ||u||^2, max(3 sigma_s / (2 sigma_a), sigma_a^-2) ||q||^2)``."""
    mesh = sol.mesh
    d = mesh.dim
    sig_s, sig_a = problem.cross_sections(mesh)
    xi, wq = gauss_points(d, 4)
    val, grad = _shape(xi, d)
    u = sol.values.ravel()[_cell_nodes(mesh)]
    avg = np.einsum("q,qia->ia", wq, grad) / 2**d
    g = np.einsum("ck,ka->ca", u, avg) * (2.0 / mesh.widths)
    jac = mesh.volumes / 2**d
    lhs = np.sum(mesh.volumes * (g**2).sum(axis=1)) + np.sum(jac[:, None] * wq[None] * (u @ val.T) ** 2)
    pts = mesh.centers[:, None, :] + 0.5 * mesh.widths[:, None, :] * xi[None]
    src = problem.source
    q = src(np.zeros(d), pts) if callable(src) else np.full(pts.shape[:-1], float(src))
    qn = np.sum(jac[:, None] * wq[None] * np.asarray(q) ** 2)
    const = max(np.max(3 * sig_s / (2 * sig_a)), np.max(sig_a ** -2.0))
    return float(lhs), float(const * qn)


def stencil_row(n: int, h: float, node: tuple[int, int], sigma_s: float, sigma_a: float) -> np.ndarray:
    """Row of the projected bilinear system at an interior node, divided by ``h**2``.

    Returned as the 3x3 array of coefficients of the node's neighborhood
    (first index along x).
    """
    i, j = node
    if not (0 < i < n and 0 < j < n):
        raise ValueError("stencil row needs an interior node")
    mesh = build_mesh(((0.0, n * h), (0.0, n * h)), (n, n))
    A = assemble_diffusion("projected", np.full(mesh.n_cells, sigma_s), np.full(mesh.n_cells, sigma_a), mesh)
    shape = (n + 1, n + 1)
    row = A.getrow(np.ravel_multi_index((i, j), shape)).toarray().reshape(shape)
    return row[i - 1:i + 2, j - 1:j + 2] / h**2


def stencil_formula(h: float, sigma_s: float, sigma_a: float) -> np.ndarray:
    """Closed-form stencil: diagonal-neighbor diffusion plus the bilinear mass weights."""
    diff = np.zeros((3, 3))
    diff[[0, 0, 2, 2], [0, 2, 0, 2]] = -1.0
    diff[1, 1] = 4.0
    diff /= 3.0 * sigma_s * 2.0 * h**2
    mass = np.array([[1 / 36, 1 / 9, 1 / 36], [1 / 9, 4 / 9, 1 / 9], [1 / 36, 1 / 9, 1 / 36]])
    return diff + sigma_a * mass
