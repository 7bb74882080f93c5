"""Upwind SN-DG bilinear forms on Cartesian meshes, in block-operator form.

Vectors in ordinate-cell-basis layout are arrays of shape
``(n_omega, n_cells, n_basis)``; scalar-flux-like vectors drop the leading
axis.  Rows of every operator carry the quadrature weight of their test
ordinate, so the system reads ``L psi = M P psi + Q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .mesh import BasisSet, CartesianMesh, SpaceKind, gauss_points, sweep_order
from .quadrature import AngularQuadrature

Field = Union[float, Callable]


def _as_cell_field(f: Field, pts: np.ndarray) -> np.ndarray:
    if callable(f):
        return np.broadcast_to(np.asarray(f(pts), dtype=float), pts.shape[:-1]).copy()
    return np.full(pts.shape[:-1], float(f))


def _as_angular_field(f: Field, omega: np.ndarray, pts: np.ndarray) -> np.ndarray:
    if callable(f):
        return np.broadcast_to(np.asarray(f(omega, pts), dtype=float), pts.shape[:-1]).copy()
    return np.full(pts.shape[:-1], float(f))


@dataclass
class ProblemSpec:
    """Data of the scaled steady transport problem.

    ``sigma_s``/``sigma_a`` are constants or callables ``f(x)`` that must be
    constant on every cell.  ``source`` and ``inflow`` are constants or
    callables ``f(omega, x)`` with ``omega`` of shape ``(dim,)`` and ``x`` of
    shape ``(..., dim)``; ``inflow`` is only sampled on the inflow boundary.
    """

    epsilon: float
    sigma_s: Field = 1.0
    sigma_a: Field = 1.0
    source: Field = 0.0
    inflow: Field = 0.0
    name: str = ""

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def cross_sections(self, mesh: CartesianMesh) -> tuple[np.ndarray, np.ndarray]:
        """Cellwise ``(sigma_s, sigma_a)``; raises when a coefficient varies inside a cell."""
        xi, _ = gauss_points(mesh.dim, 3)
        pts = mesh.centers[:, None, :] + 0.5 * mesh.widths[:, None, :] * xi[None, :, :]
        out = []
        for name, f in (("sigma_s", self.sigma_s), ("sigma_a", self.sigma_a)):
            vals = _as_cell_field(f, pts)
            spread = np.abs(vals - vals[:, :1]).max()
            if spread > 1e-12 * max(1.0, np.abs(vals).max()):
                raise ValueError(f"misaligned material regions: {name} varies inside a cell")
            if np.any(vals < 0):
                raise ValueError(f"{name} must be nonnegative")
            out.append(vals[:, 0].copy())
        return out[0], out[1]

    def standing_assumption(self, mesh: CartesianMesh) -> bool:
        """True when both cross sections are bounded away from zero."""
        s, a = self.cross_sections(mesh)
        return bool(s.min() > 0 and a.min() > 0)


# ---------------------------------------------------------------------------
# reference-element matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReferenceMatrices:
    """Scale-free element integrals on [-1, 1]^d (row = test, column = trial).

    For a cell with volume ``V`` and face measures ``F_a``:
    mass ``V * mass``, volume advection ``sum_a Omega_a F_a vol[a]``,
    outflow face ``Omega_a F_a face_self[a, side]`` and inflow coupling to
    the neighbor ``Omega_a F_a face_nbr[a, side]``; ``side`` 0 is the lower face.
    """

    mass: np.ndarray
    vol: np.ndarray
    face_self: np.ndarray
    face_nbr: np.ndarray

    @classmethod
    def build(cls, basis: BasisSet) -> "ReferenceMatrices":
        d, n = basis.dim, basis.n_p
        xi, wq = gauss_points(d, 3)
        val = basis.values(xi)
        grad = basis.gradients(xi)
        mass = np.einsum("q,qr,qs->rs", wq, val, val) / 2**d
        vol = np.zeros((d, n, n))
        for a in range(d):
            vol[a] = -2.0 / 2**d * np.einsum("q,qs,qr->rs", wq, val, grad[:, :, a])
        fs = np.zeros((d, 2, n, n))
        fn = np.zeros((d, 2, n, n))
        if d == 1:
            tp, tw = np.zeros((1, 0)), np.ones(1)
        else:
            tp, tw = gauss_points(d - 1, 3)
        for a in range(d):
            for side, sgn in ((0, -1.0), (1, 1.0)):
                own = np.insert(tp, a, sgn, axis=1)
                other = np.insert(tp, a, -sgn, axis=1)
                bo, bn = basis.values(own), basis.values(other)
                fs[a, side] = sgn * np.einsum("q,qr,qs->rs", tw, bo, bo) / 2 ** (d - 1)
                fn[a, side] = sgn * np.einsum("q,qr,qs->rs", tw, bo, bn) / 2 ** (d - 1)
        return cls(mass, vol, fs, fn)


# ---------------------------------------------------------------------------
# block system
# ---------------------------------------------------------------------------


@dataclass
class BlockSystem:
    """Assembled data for matrix-free application of the transport blocks.

    Local cell matrices are stored once per (ordinate, cell class); cells
    share a class when widths and both cross sections agree.
    """

    problem: ProblemSpec
    mesh: CartesianMesh
    quad: AngularQuadrature
    space: SpaceKind
    basis: BasisSet
    ref: ReferenceMatrices
    sigma_s: np.ndarray
    sigma_a: np.ndarray
    cell_class: np.ndarray
    local: np.ndarray          # (n_omega, n_class, n_p, n_p), full local matrix
    streaming: np.ndarray      # same with the scattering part of the collision term removed
    coupling: np.ndarray       # (n_omega, dim, n_p, n_p), multiplied by face measure per cell
    upwind: np.ndarray         # (n_octant, n_cells, dim)
    octant: np.ndarray         # (n_omega,)
    orders: np.ndarray         # (n_octant, n_cells)
    Q: np.ndarray              # (n_omega, n_cells, n_p)
    _cache: dict = field(default_factory=dict, repr=False)

    # -- sizes ---------------------------------------------------------------
    @property
    def n_omega(self) -> int:
        return self.quad.n_omega

    @property
    def n_cells(self) -> int:
        return self.mesh.n_cells

    @property
    def n_p(self) -> int:
        return self.basis.n_p

    @property
    def weights(self) -> np.ndarray:
        return self.quad.weights

    @property
    def epsilon(self) -> float:
        return self.problem.epsilon

    @property
    def scatter(self) -> np.ndarray:
        """``sigma_s / epsilon`` per cell."""
        return self.sigma_s / self.epsilon

    @property
    def collision(self) -> np.ndarray:
        """Total cross section ``sigma_s / epsilon + epsilon * sigma_a`` per cell."""
        return self.sigma_s / self.epsilon + self.epsilon * self.sigma_a

    @property
    def Q0(self) -> np.ndarray:
        return self.Q[:, :, 0]

    @property
    def Q1(self) -> np.ndarray:
        return self.Q[:, :, 1:]

    # -- transport blocks ----------------------------------------------------
    def apply_L(self, u: np.ndarray, rows=None, cols=None, streaming: bool = False) -> np.ndarray:
        """Apply the (sub-block of the) transport matrix.

        ``rows``/``cols`` select local basis indices; e.g. ``rows=[0],
        cols=[1, 2, 3]`` applies L01 to an array of shape ``(n_omega, n_cells, 3)``.
        With ``streaming`` the collision term keeps only absorption, i.e. the
        result is ``(L - M Sigma^T diag) u`` formed without cancellation.
        """
        rsel = np.arange(self.n_p) if rows is None else np.asarray(rows, dtype=np.int64)
        csel = np.arange(self.n_p) if cols is None else np.asarray(cols, dtype=np.int64)
        u = np.ascontiguousarray(u, dtype=float).reshape(self.n_omega, self.n_cells, len(csel))
        out = np.empty((self.n_omega, self.n_cells, len(rsel)))
        _kernels.apply_transport(
            self.streaming if streaming else self.local, self.coupling, self.mesh.face_areas, self.cell_class,
            self.upwind, self.octant, self.weights, rsel, csel, u, out,
        )
        return out

    def apply_L00(self, u0):
        return self.apply_L(np.asarray(u0)[..., None], [0], [0])[..., 0]

    def apply_L01(self, u1):
        return self.apply_L(u1, [0], self.slope_indices)[..., 0]

    def apply_L10(self, u0):
        return self.apply_L(np.asarray(u0)[..., None], self.slope_indices, [0])

    def apply_L11(self, u1):
        return self.apply_L(u1, self.slope_indices, self.slope_indices)

    @property
    def slope_indices(self) -> np.ndarray:
        return np.arange(1, self.n_p)

    # -- scattering ----------------------------------------------------------
    def apply_M(self, phi: np.ndarray, rows=None) -> np.ndarray:
        """``M phi``: ordinate ``l`` gets ``w_l * (sigma_s/eps) * mass * phi``."""
        rsel = np.arange(self.n_p) if rows is None else np.asarray(rows)
        m = self.basis.mass_diag[rsel]
        phi = np.asarray(phi).reshape(self.n_cells, len(rsel))
        cell = (self.scatter * self.mesh.volumes)[:, None] * m[None, :] * phi
        return self.weights[:, None, None] * cell[None]

    def apply_P(self, psi: np.ndarray) -> np.ndarray:
        """Weighted ordinate sum ``sum_l w_l psi_l``."""
        return np.tensordot(self.weights, psi, axes=(0, 0))

    def apply_M0(self, x0):
        return self.apply_M(np.asarray(x0)[:, None], [0])[..., 0]

    def apply_M1(self, phi1):
        return self.apply_M(phi1, self.slope_indices)

    def apply_sigma(self, direction: str, v: np.ndarray) -> np.ndarray:
        return apply_sigma(direction, v, self.n_omega)

    # -- B11 ----------------------------------------------------------------
    def b11_matrix(self) -> sp.csc_matrix:
        """``Sigma L11 Sigma^T - Sigma M1`` as a sparse matrix of size ``n_cells*(n_p-1)``."""
        if "b11" in self._cache:
            return self._cache["b11"]
        m = self.n_p - 1
        if m == 0:
            raise ValueError("B11 is empty for piecewise-constant spaces")
        nx, d = self.n_cells, self.mesh.dim
        s = slice(1, None)
        w = self.weights
        # the scattering parts cancel exactly since sum_l w_l = 1
        blocks = np.einsum("l,lkrs->krs", w, self.streaming[:, :, s, s])[self.cell_class]
        cells = np.arange(nx)
        ri = (cells[:, None, None] * m + np.arange(m)[None, :, None]).repeat(m, axis=2)
        ci = (cells[:, None, None] * m + np.arange(m)[None, None, :]).repeat(m, axis=1)
        rows, cols, vals = [ri.ravel()], [ci.ravel()], [blocks.ravel()]
        for l in range(self.n_omega):
            up = self.upwind[self.octant[l]]
            for a in range(d):
                nb = up[:, a]
                ok = nb >= 0
                c, n = cells[ok], nb[ok]
                blk = w[l] * self.mesh.face_areas[ok, a][:, None, None] * self.coupling[l, a, s, s][None]
                rows.append((c[:, None, None] * m + np.arange(m)[None, :, None]).repeat(m, axis=2).ravel())
                cols.append((n[:, None, None] * m + np.arange(m)[None, None, :]).repeat(m, axis=1).ravel())
                vals.append(blk.ravel())
        B = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nx * m, nx * m)
        ).tocsc()
        B.sum_duplicates()
        self._cache["b11"] = B
        return B

    def b11_solver(self):
        """Factor B11 once; returns a callable acting on ``(n_cells, n_p-1)`` arrays."""
        if "b11_lu" not in self._cache:
            lu = spla.splu(self.b11_matrix())
            shape = (self.n_cells, self.n_p - 1)
            self._cache["b11_lu"] = lambda v: lu.solve(np.asarray(v, dtype=float).ravel()).reshape(shape)
        return self._cache["b11_lu"]

    def apply_b11(self, v: np.ndarray) -> np.ndarray:
        return (self.b11_matrix() @ np.asarray(v).ravel()).reshape(self.n_cells, self.n_p - 1)


def apply_sigma(direction: str, v: np.ndarray, n_omega: int | None = None) -> np.ndarray:
    """Unweighted ordinate sum (``"sum"``) or replication over ordinates (``"copy"``)."""
    v = np.asarray(v)
    if direction == "sum":
        if n_omega is not None and v.shape[0] != n_omega:
            raise ValueError("layout mismatch: leading axis must be the ordinate index")
        return v.sum(axis=0)
    if direction == "copy":
        if n_omega is None:
            raise ValueError("copy needs the ordinate count")
        return np.broadcast_to(v, (n_omega,) + v.shape).copy()
    raise ValueError(f"unknown direction {direction!r}")


def _local_space(space: SpaceKind | str, dim: int) -> tuple[SpaceKind, BasisSet]:
    space = SpaceKind.parse(space)
    # low-memory variants use the multilinear local basis with coupled slopes
    base = SpaceKind.Q1 if space.low_memory else space
    return space, BasisSet.for_space(base, dim)


def assemble_blocks(
    problem: ProblemSpec,
    mesh: CartesianMesh,
    quad: AngularQuadrature,
    space: SpaceKind | str,
) -> BlockSystem:
    if quad.dim != mesh.dim:
        raise ValueError("unsupported combination: quadrature and mesh dimensions differ")
    if np.abs(quad.ordinates).min() == 0:
        raise ValueError("quadrature has an ordinate parallel to a mesh face")
    space, basis = _local_space(space, mesh.dim)
    ref = ReferenceMatrices.build(basis)
    sig_s, sig_a = problem.cross_sections(mesh)
    eps = problem.epsilon
    tot = sig_s / eps + eps * sig_a

    key = np.column_stack([sig_s, sig_a, mesh.widths])
    _, first, cls = np.unique(key, axis=0, return_index=True, return_inverse=True)
    cls = cls.ravel().astype(np.int64)
    n_cls = len(first)
    om = quad.ordinates
    d = mesh.dim
    n_o = quad.n_omega

    transport = np.zeros((n_o, n_cls, basis.n_p, basis.n_p))
    coupling = np.zeros((n_o, d, basis.n_p, basis.n_p))
    face = mesh.face_areas[first]
    for l in range(n_o):
        for a in range(d):
            out_side = 1 if om[l, a] > 0 else 0
            blk = om[l, a] * (ref.vol[a] + ref.face_self[a, out_side])
            transport[l] += face[:, a][:, None, None] * blk[None]
            coupling[l, a] = om[l, a] * ref.face_nbr[a, 1 - out_side]
    vol = mesh.volumes[first][:, None, None] * ref.mass[None]
    local = transport + (tot[first][:, None, None] * vol)[None]
    streaming = transport + (eps * sig_a[first][:, None, None] * vol)[None]

    octant = quad.octant().astype(np.int64)
    n_oct = 1 << d
    upwind = np.empty((n_oct, mesh.n_cells, d), dtype=np.int64)
    orders = np.empty((n_oct, mesh.n_cells), dtype=np.int64)
    for o in range(n_oct):
        signs = [(-1.0 if (o >> a) & 1 else 1.0) for a in range(d)]
        upwind[o] = mesh.upwind(signs)
        orders[o] = sweep_order(mesh, signs)

    system = BlockSystem(
        problem=problem, mesh=mesh, quad=quad, space=space, basis=basis, ref=ref,
        sigma_s=sig_s, sigma_a=sig_a, cell_class=cls,
        local=np.ascontiguousarray(local), streaming=np.ascontiguousarray(streaming),
        coupling=np.ascontiguousarray(coupling),
        upwind=upwind, octant=octant, orders=orders,
        Q=np.zeros((n_o, mesh.n_cells, basis.n_p)),
    )
    system.Q = assemble_rhs(problem, mesh, quad, basis)
    return system


def assemble_rhs(
    problem: ProblemSpec,
    mesh: CartesianMesh,
    quad: AngularQuadrature,
    space: SpaceKind | str | BasisSet,
    n_points: int = 4,
) -> np.ndarray:
    """Load vector ``Q`` of shape ``(n_omega, n_cells, n_p)``.

    Volume source integrated with an ``n_points``-per-axis Gauss rule,
    inflow data on boundary faces with ``Omega . nu < 0`` likewise.
    """
    basis = space if isinstance(space, BasisSet) else _local_space(space, mesh.dim)[1]
    d = mesh.dim
    eps = problem.epsilon
    xi, wq = gauss_points(d, n_points)
    bv = basis.values(xi)
    pts = mesh.centers[:, None, :] + 0.5 * mesh.widths[:, None, :] * xi[None]
    jac = mesh.volumes / 2**d
    Q = np.zeros((quad.n_omega, mesh.n_cells, basis.n_p))
    if d == 1:
        tp, tw = np.zeros((1, 0)), np.ones(1)
    else:
        tp, tw = gauss_points(d - 1, n_points)
    for l, om in enumerate(quad.ordinates):
        q = _as_angular_field(problem.source, om, pts)
        Q[l] = eps * jac[:, None] * np.einsum("q,cq,qr->cr", wq, q, bv)
        for a in range(d):
            side = 0 if om[a] > 0 else 1
            cells = np.nonzero(mesh.neighbors[:, a, side] < 0)[0]
            if len(cells) == 0:
                continue
            sgn = -1.0 if side == 0 else 1.0
            loc = np.insert(tp, a, sgn, axis=1)
            fpts = mesh.centers[cells, None, :] + 0.5 * mesh.widths[cells, None, :] * loc[None]
            alpha = _as_angular_field(problem.inflow, om, fpts)
            fjac = mesh.face_areas[cells, a] / 2 ** (d - 1)
            Q[l, cells] += abs(om[a]) * fjac[:, None] * np.einsum("q,cq,qr->cr", tw, alpha, basis.values(loc))
    return Q * quad.weights[:, None, None]


# ---------------------------------------------------------------------------
# memory accounting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DofReport:
    space: str
    dim: int
    n_omega: int
    n_cells: int
    per_cell: int
    solution_dim: int
    reduced_dim: int


def count_dofs(space: SpaceKind | str, dim: int, n_omega: int, n_cells: int, cell: str = "rect") -> DofReport:
    """Unknown counts for standard and low-memory spaces on ``cell`` shapes ``rect`` or ``tri``.

    ``reduced_dim`` is the size of the Krylov system actually solved.
    """
    space = SpaceKind.parse(space)
    if cell not in ("rect", "tri"):
        raise ValueError("cell must be 'rect' or 'tri'")
    full = 2**dim if cell == "rect" else dim + 1
    if space is SpaceKind.P0:
        n_p = 1
    elif space is SpaceKind.P1:
        n_p = dim + 1
    elif space is SpaceKind.Q1:
        if cell == "tri":
            raise ValueError("Q1 needs rectangular cells")
        n_p = 2**dim
    else:
        n_p = full
    if space.low_memory:
        per_cell = n_omega + n_p - 1
    else:
        per_cell = n_omega * n_p
    return DofReport(
        space=space.value, dim=dim, n_omega=n_omega, n_cells=n_cells,
        per_cell=per_cell, solution_dim=per_cell * n_cells, reduced_dim=n_p * n_cells,
    )
