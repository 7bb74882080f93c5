"""Explicit dense matrices of the discrete transport problem for small instances.

Everything here is built by direct quadrature of the bilinear forms in
physical coordinates, cell by cell and face by face, without the
reference-element tables used by the matrix-free path.  Global index of
coefficient ``r`` of cell ``c`` for ordinate ``l`` is ``(l * n_cells + c) * n_p + r``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assembly import ProblemSpec, _as_angular_field, _local_space
from .mesh import BasisSet, CartesianMesh, SpaceKind
from .quadrature import AngularQuadrature

MAX_UNKNOWNS = 4096


@dataclass
class DenseSystem:
    L: np.ndarray
    M: np.ndarray       # (n_omega n_cells n_p, n_cells n_p)
    P: np.ndarray       # (n_cells n_p, n_omega n_cells n_p)
    Q: np.ndarray
    n_omega: int
    n_cells: int
    n_p: int
    basis: BasisSet

    def index(self, l, c, r):
        return (l * self.n_cells + c) * self.n_p + r

    def solve_full(self) -> np.ndarray:
        """Coefficients of the standard scheme, shape ``(n_omega, n_cells, n_p)``."""
        psi = np.linalg.solve(self.L - self.M @ self.P, self.Q)
        return psi.reshape(self.n_omega, self.n_cells, self.n_p)

    def embedding(self) -> np.ndarray:
        """Map from ``[psi0 (per ordinate), phi1 (shared slopes)]`` to full coefficients."""
        no, nx, npp = self.n_omega, self.n_cells, self.n_p
        m = npp - 1
        E = np.zeros((no * nx * npp, no * nx + nx * m))
        for l in range(no):
            for c in range(nx):
                E[self.index(l, c, 0), l * nx + c] = 1.0
                for r in range(1, npp):
                    E[self.index(l, c, r), no * nx + c * m + r - 1] = 1.0
        return E

    def solve_low_memory(self, R: np.ndarray | None = None, r_alpha: np.ndarray | None = None, w=None):
        """Restricted-basis solve; with ``R`` the trial space adds reconstructed slope deviations.

        ``R`` maps per-ordinate averages (length ``n_omega*n_cells``) to the
        slope block ``(n_omega, n_cells, n_p-1)`` flattened; ``r_alpha`` is the
        matching inflow vector and ``w`` the ordinate weights.
        Test functions are always the low-memory space itself.
        """
        no, nx, npp = self.n_omega, self.n_cells, self.n_p
        E = self.embedding()
        A = self.L - self.M @ self.P
        trial = E.copy()
        shift = np.zeros(E.shape[0])
        if R is not None:
            D = _deviation_matrix(no, nx, npp - 1, w)
            G = D @ R
            slope_rows = np.array([self.index(l, c, r) for l in range(no) for c in range(nx) for r in range(1, npp)])
            trial[slope_rows, : no * nx] += G
            shift[slope_rows] = D @ r_alpha.ravel()
        z = np.linalg.solve(E.T @ A @ trial, E.T @ (self.Q - A @ shift))
        return (trial @ z + shift).reshape(no, nx, npp), z


def _deviation_matrix(no, nx, m, w):
    """``I - Sigma^T P1`` on slope blocks flattened as ``(l, c, r)``."""
    n = nx * m
    D = np.eye(no * n)
    for l in range(no):
        for k in range(no):
            D[l * n:(l + 1) * n, k * n:(k + 1) * n] -= w[k] * np.eye(n)
    return D


def _cell_basis(basis: BasisSet, mesh: CartesianMesh, c: int, x: np.ndarray):
    xi = 2.0 * (x - mesh.centers[c]) / mesh.widths[c]
    grad = basis.gradients(xi) * (2.0 / mesh.widths[c])[None, None, :]
    return basis.values(xi), grad


def _face_rule(mesh: CartesianMesh, c: int, axis: int, side: int, n: int):
    """Physical quadrature points and weights on a face of cell ``c``."""
    x, w = np.polynomial.legendre.leggauss(n)
    lo = mesh.centers[c] - 0.5 * mesh.widths[c]
    hi = mesh.centers[c] + 0.5 * mesh.widths[c]
    d = mesh.dim
    if d == 1:
        return np.array([[hi[0] if side else lo[0]]]), np.ones(1)
    t = 1 - axis
    pts = np.zeros((n, 2))
    pts[:, axis] = hi[axis] if side else lo[axis]
    pts[:, t] = 0.5 * (lo[t] + hi[t]) + 0.5 * (hi[t] - lo[t]) * x
    return pts, 0.5 * (hi[t] - lo[t]) * w


def _volume_rule(mesh: CartesianMesh, c: int, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    grids = np.meshgrid(*([x] * mesh.dim), indexing="ij")
    wg = np.meshgrid(*([w] * mesh.dim), indexing="ij")
    xi = np.stack([g.ravel() for g in grids], axis=1)
    wt = np.prod(np.stack([g.ravel() for g in wg], axis=1), axis=1)
    pts = mesh.centers[c] + 0.5 * mesh.widths[c] * xi
    return pts, wt * mesh.volumes[c] / 2**mesh.dim


def dense_system(
    problem: ProblemSpec,
    mesh: CartesianMesh,
    quad: AngularQuadrature,
    space: SpaceKind | str,
    n_points: int = 4,
) -> DenseSystem:
    _, basis = _local_space(space, mesh.dim)
    no, nx, npp = quad.n_omega, mesh.n_cells, basis.n_p
    N = no * nx * npp
    if N > MAX_UNKNOWNS:
        raise ValueError(f"dense assembly limited to {MAX_UNKNOWNS} unknowns, got {N}")
    sig_s, sig_a = problem.cross_sections(mesh)
    eps = problem.epsilon
    L = np.zeros((N, N))
    M = np.zeros((N, nx * npp))
    P = np.zeros((nx * npp, N))
    Q = np.zeros(N)

    def idx(l, c, r):
        return (l * nx + c) * npp + r

    for c in range(nx):
        xv, wv = _volume_rule(mesh, c, n_points)
        bv, gv = _cell_basis(basis, mesh, c, xv)
        mass = np.einsum("q,qr,qs->rs", wv, bv, bv)
        for l, om in enumerate(quad.ordinates):
            wl = quad.weights[l]
            adv = -np.einsum("q,qs,qr->rs", wv, bv, gv @ om)
            blk = adv + (sig_s[c] / eps + eps * sig_a[c]) * mass
            src = _as_angular_field(problem.source, om, xv)
            for r in range(npp):
                Q[idx(l, c, r)] += wl * eps * np.sum(wv * src * bv[:, r])
            for a in range(mesh.dim):
                for side in (0, 1):
                    nrm = 1.0 if side else -1.0
                    flow = om[a] * nrm
                    xf, wf = _face_rule(mesh, c, a, side, n_points)
                    bf, _ = _cell_basis(basis, mesh, c, xf)
                    if flow > 0:
                        blk += flow * np.einsum("q,qr,qs->rs", wf, bf, bf)
                        continue
                    nb = mesh.neighbors[c, a, side]
                    if nb >= 0:
                        bn, _ = _cell_basis(basis, mesh, nb, xf)
                        cpl = flow * np.einsum("q,qr,qs->rs", wf, bf, bn)
                        for r in range(npp):
                            for s in range(npp):
                                L[idx(l, c, r), idx(l, nb, s)] += wl * cpl[r, s]
                    else:
                        alpha = _as_angular_field(problem.inflow, om, xf)
                        for r in range(npp):
                            Q[idx(l, c, r)] -= wl * flow * np.sum(wf * alpha * bf[:, r])
            for r in range(npp):
                for s in range(npp):
                    L[idx(l, c, r), idx(l, c, s)] += wl * blk[r, s]
                    M[idx(l, c, r), c * npp + s] = wl * sig_s[c] / eps * mass[r, s]
                P[c * npp + r, idx(l, c, r)] = wl
    return DenseSystem(L, M, P, Q, no, nx, npp, basis)


def dense_reconstruction(
    problem: ProblemSpec,
    mesh: CartesianMesh,
    quad: AngularQuadrature,
    basis: BasisSet,
    stencil: str = "two",
    suppress: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Reconstruction matrix and inflow vector from the one-sided difference formulas.

    Interior: ``(u_i - u_{i-1}) / (x_i - x_{i-1})`` (two cells) or
    ``(3 u_i - 4 u_{i-1} + u_{i-2}) / (2 h)`` (three cells, uniform meshes
    only).  Boundary: ``(u_1 - alpha) / (h / 2)``.  Mirrored for negative
    direction components.  With ``suppress`` slopes across cross-section
    jumps are zero.
    """
    no, nx, m = quad.n_omega, mesh.n_cells, basis.n_p - 1
    sig_s, sig_a = problem.cross_sections(mesh)
    R = np.zeros((no * nx * m, no * nx))
    ra = np.zeros(no * nx * m)
    for l, om in enumerate(quad.ordinates):
        for c in range(nx):
            for a in range(mesh.dim):
                r = basis.slope_index(a)
                row = (l * nx + c) * m + r - 1
                sg = 1.0 if om[a] > 0 else -1.0
                up = mesh.neighbors[c, a, 0 if sg > 0 else 1]
                half = 0.5 * mesh.widths[c, a]
                if up < 0:
                    # slope = sg * (u - alpha) / half, coefficient = half * slope
                    face = mesh.centers[c].copy()
                    face[a] -= sg * half
                    alpha = float(_as_angular_field(problem.inflow, om, face[None])[0])
                    R[row, l * nx + c] = sg
                    ra[row] = -sg * alpha
                    continue
                jump = sig_s[c] != sig_s[up] or sig_a[c] != sig_a[up]
                if suppress and jump:
                    continue
                up2 = mesh.neighbors[up, a, 0 if sg > 0 else 1]
                jump2 = up2 >= 0 and (sig_s[up] != sig_s[up2] or sig_a[up] != sig_a[up2])
                if stencil == "three" and up2 >= 0 and not (suppress and jump2):
                    h = mesh.widths[c, a]
                    if not (np.isclose(mesh.widths[up, a], h) and np.isclose(mesh.widths[up2, a], h)):
                        raise ValueError("the dense three-cell formula assumes a uniform mesh")
                    k = half / (2 * h) * sg
                    R[row, l * nx + c] += 3 * k
                    R[row, l * nx + up] += -4 * k
                    R[row, l * nx + up2] += k
                else:
                    dist = abs(mesh.centers[c, a] - mesh.centers[up, a])
                    R[row, l * nx + c] += sg * half / dist
                    R[row, l * nx + up] -= sg * half / dist
    return R, ra


def write_triplets(path: str | Path, A: np.ndarray, tol: float = 0.0) -> int:
    """Write nonzeros of ``A`` as ``row col value`` lines; returns the count."""
    rows, cols = np.nonzero(np.abs(A) > tol)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {A.shape[0]} {A.shape[1]}\n")
        for i, j in zip(rows, cols):
            fh.write(f"{i} {j} {float(A[i, j])!r}\n")
    return len(rows)


def read_triplets(path: str | Path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        n, m = (int(v) for v in fh.readline()[1:].split())
        A = np.zeros((n, m))
        for line in fh:
            i, j, v = line.split()
            A[int(i), int(j)] = float(v)
    return A
