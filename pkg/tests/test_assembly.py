import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lowmem_sn.assembly import ProblemSpec, apply_sigma, assemble_blocks, assemble_rhs, count_dofs
from lowmem_sn.dense import dense_system, read_triplets, write_triplets
from lowmem_sn.mesh import build_mesh, piecewise_uniform_1d
from lowmem_sn.quadrature import AngularQuadrature, gauss_legendre_slab, product_sphere_disk


def _matrix(apply, n_in, shape_in):
    return np.column_stack([apply(e.reshape(shape_in)).ravel() for e in np.eye(n_in)])


def test_hand_assembled_p0_matrix():
    # 2 cells of width 1/2, mu = -a, +a with weight 1/2, sigma_t = 2
    prob = ProblemSpec(1.0, 1.0, 1.0)
    s = assemble_blocks(prob, build_mesh((0.0, 1.0), 2), gauss_legendre_slab(2), "p0")
    a = 1 / np.sqrt(3)
    d = a + 2.0 * 0.5
    hand = 0.5 * np.array([
        [d, -a, 0, 0],
        [0, d, 0, 0],
        [0, 0, d, 0],
        [0, 0, -a, d],
    ])
    L = _matrix(s.apply_L, 4, (2, 2, 1))
    assert np.abs(L - hand).max() < 1e-15


@pytest.mark.parametrize("space,dim", [("p0", 1), ("p1", 1), ("p1", 2), ("q1", 2)])
def test_constant_field(space, dim):
    sig_s, sig_a, eps, c = 2.0, 0.5, 0.25, 1.7
    if dim == 1:
        mesh, quad = build_mesh((0.0, 1.0), 5), gauss_legendre_slab(4)
    else:
        mesh, quad = build_mesh(((0.0, 1.0), (0.0, 2.0)), (3, 2)), product_sphere_disk(2, 4)
    s = assemble_blocks(ProblemSpec(eps, sig_s, sig_a), mesh, quad, space)
    u = np.zeros((s.n_omega, s.n_cells, s.n_p))
    u[..., 0] = c
    out = s.apply_L(u)
    expect = np.zeros_like(out)
    sig_t = sig_s / eps + eps * sig_a
    for l, om in enumerate(quad.ordinates):
        expect[l, :, 0] = sig_t * mesh.volumes * c
        for a in range(dim):
            side = 0 if om[a] > 0 else 1
            inflow = mesh.neighbors[:, a, side] < 0
            # inflow boundary faces contribute |Omega.nu| |F| times the constant on the cell trace
            vals = np.abs(om[a]) * mesh.face_areas[:, a] * c
            b = s.basis.values(np.insert(np.zeros((1, dim - 1)), a, -1.0 if side == 0 else 1.0, axis=1))[0]
            expect[l, inflow] += vals[inflow, None] * b[None]
        expect[l] *= quad.weights[l]
    assert np.abs(out - expect).max() < 1e-13


def test_scattering_matches_mean(small_1d):
    mesh, quad = small_1d
    s = assemble_blocks(ProblemSpec(0.5, 3.0, 1.0), mesh, quad, "p1")
    v = np.random.default_rng(0).standard_normal((s.n_omega, s.n_cells, s.n_p))
    out = s.apply_M(s.apply_P(v))
    mean = np.tensordot(quad.weights, v, axes=(0, 0))
    cell = (3.0 / 0.5) * mesh.volumes[:, None] * s.basis.mass_diag[None] * mean
    assert np.abs(out - quad.weights[:, None, None] * cell[None]).max() < 1e-14


def test_rhs_zero():
    s_q = assemble_rhs(ProblemSpec(1.0, 1.0, 1.0, 0.0, 0.0), build_mesh((0.0, 1.0), 4), gauss_legendre_slab(4), "p1")
    assert not s_q.any()


def test_rhs_single_cell():
    eps, h = 0.3, 0.7
    q = gauss_legendre_slab(4)
    Q = assemble_rhs(ProblemSpec(eps, 1.0, 1.0, 1.0, 0.0), build_mesh((0.0, h), 1), q, "p0")
    assert np.allclose(Q[:, 0, 0], q.weights * eps * h, rtol=0, atol=1e-15)


def test_rhs_left_inflow_only():
    q = gauss_legendre_slab(16)
    inflow = lambda om, x: np.where((x[..., 0] < 0.5) & (om[0] > 0), 1.0, 0.0)
    mesh = piecewise_uniform_1d([0.0, 1.0, 11.0], [0.1, 1.0])
    Q = assemble_rhs(ProblemSpec(1.0, 0.0, 2.0, 0.0, inflow), mesh, q, "p1")
    nz = np.argwhere(np.abs(Q).sum(axis=2) > 0)
    assert set(nz[:, 1]) == {0}
    assert np.all(q.mu[nz[:, 0]] > 0)
    assert len(nz) == 8


def test_sigma_copy_and_sum():
    v = np.random.default_rng(1).standard_normal((5, 3))
    assert np.allclose(apply_sigma("sum", apply_sigma("copy", v, 7)), 7 * v)
    one = np.zeros((4, 5, 3))
    one[2] = v
    assert np.array_equal(apply_sigma("sum", one, 4), v)
    with pytest.raises(ValueError):
        apply_sigma("sum", one, 3)


@given(st.integers(0, 2**31 - 1))
def test_p1_sigma_transpose_identity(seed):
    q = gauss_legendre_slab(8)
    s = assemble_blocks(ProblemSpec(1.0, 1.0, 1.0), build_mesh((0.0, 1.0), 4), q, "lm")
    x = np.random.default_rng(seed).standard_normal((s.n_cells, s.n_p - 1))
    assert np.abs(s.apply_P(s.apply_sigma("copy", x)) - x).max() < 1e-14


def test_misaligned_material_rejected():
    prob = ProblemSpec(1.0, lambda x: np.where(x[..., 0] < 0.33, 1.0, 2.0), 1.0)
    with pytest.raises(ValueError, match="misaligned"):
        assemble_blocks(prob, build_mesh((0.0, 1.0), 4), gauss_legendre_slab(2), "p0")


def test_standing_assumption_flag():
    mesh = build_mesh((0.0, 1.0), 4)
    assert ProblemSpec(1.0, 1.0, 1.0).standing_assumption(mesh)
    assert not ProblemSpec(1.0, 100.0, 0.0).standing_assumption(mesh)


@pytest.mark.parametrize("space", ["p0", "p1", "q1", "lm"])
def test_blocks_match_dense(space, slab_problem):
    if space == "q1":
        mesh, quad = build_mesh(((0.0, 1.0), (0.0, 1.0)), (4, 2)), product_sphere_disk(2, 4)
        quad = AngularQuadrature(2, quad.ordinates[::2], np.full(4, 0.25))
    else:
        mesh, quad = build_mesh((0.0, 1.0), 8), gauss_legendre_slab(4)
    s = assemble_blocks(slab_problem, mesh, quad, space)
    D = dense_system(slab_problem, mesh, quad, space)
    no, nx, npp = s.n_omega, s.n_cells, s.n_p
    N = no * nx * npp
    L = _matrix(s.apply_L, N, (no, nx, npp))
    assert np.abs(L - D.L).max() < 1e-12 * np.abs(D.L).max()
    M = _matrix(s.apply_M, nx * npp, (nx, npp))
    assert np.abs(M - D.M).max() < 1e-12 * np.abs(D.M).max()
    if npp > 1:
        idx = np.arange(N).reshape(no, nx, npp)
        i0, i1 = idx[..., 0].ravel(), idx[..., 1:].ravel()
        L01 = _matrix(s.apply_L01, no * nx * (npp - 1), (no, nx, npp - 1))
        L10 = _matrix(s.apply_L10, no * nx, (no, nx))
        L11 = _matrix(s.apply_L11, no * nx * (npp - 1), (no, nx, npp - 1))
        L00 = _matrix(s.apply_L00, no * nx, (no, nx))
        for blk, r, c in ((L00, i0, i0), (L01, i0, i1), (L10, i1, i0), (L11, i1, i1)):
            assert np.abs(blk - D.L[np.ix_(r, c)]).max() < 1e-12 * np.abs(D.L).max()


def test_b11_dense_definition(slab_problem):
    mesh, quad = build_mesh((0.0, 1.0), 6), gauss_legendre_slab(4)
    s = assemble_blocks(slab_problem, mesh, quad, "lm")
    D = dense_system(slab_problem, mesh, quad, "lm")
    no, nx = s.n_omega, s.n_cells
    idx = np.arange(no * nx * 2).reshape(no, nx, 2)
    i1 = idx[..., 1].ravel()
    Sig = np.tile(np.eye(nx), (1, no))
    B = Sig @ D.L[np.ix_(i1, i1)] @ Sig.T - Sig @ D.M[i1][:, np.arange(nx) * 2 + 1]
    assert np.abs(s.b11_matrix().toarray() - B).max() < 1e-12 * np.abs(B).max()


@given(
    st.lists(st.floats(0.1, 50.0), min_size=3, max_size=3),
    st.floats(1e-4, 1.0),
    st.sampled_from([1, 2]),
)
def test_b11_symmetric_positive_definite(sig, eps, dim):
    if dim == 1:
        mesh, quad = build_mesh((0.0, 3.0), 6), gauss_legendre_slab(6)
    else:
        mesh, quad = build_mesh(((0.0, 3.0), (0.0, 1.0)), (3, 2)), product_sphere_disk(2, 4)
    f = lambda x: np.select([x[..., 0] < 1, x[..., 0] < 2], sig[:2], sig[2])
    s = assemble_blocks(ProblemSpec(eps, f, 0.3), mesh, quad, "lm")
    B = s.b11_matrix().toarray()
    assert np.abs(B - B.T).max() < 1e-12 * np.abs(B).max()
    assert np.linalg.eigvalsh(0.5 * (B + B.T)).min() > 0
    np.linalg.cholesky(B)


def test_triplet_roundtrip(tmp_path, slab_problem):
    D = dense_system(slab_problem, build_mesh((0.0, 1.0), 4), gauss_legendre_slab(2), "p1")
    n = write_triplets(tmp_path / "L.txt", D.L)
    assert n == np.count_nonzero(D.L)
    assert np.array_equal(read_triplets(tmp_path / "L.txt"), D.L)


def test_dof_examples():
    r = count_dofs("p1", 1, 32, 20)
    assert (r.solution_dim, r.reduced_dim) == (1280, 40)
    assert count_dofs("lm", 1, 32, 20).solution_dim == 660
    assert count_dofs("q1", 2, 32, 1).per_cell == 4 * 32
    assert count_dofs("lm", 2, 32, 1).per_cell == (32 - 1) + 4


@pytest.mark.parametrize("dim,n_omega,n_x", list(itertools.product([1, 2, 3], [2, 8, 32, 128], [1, 20, 400])))
def test_dof_tables(dim, n_omega, n_x):
    # memory table: standard (d+1) n_Omega on simplices, 2^d n_Omega on boxes;
    # low-memory n_Omega + d on simplices, (n_Omega - 1) + 2^d on boxes
    assert count_dofs("p1", dim, n_omega, 1, "tri").per_cell == (dim + 1) * n_omega
    assert count_dofs("lm", dim, n_omega, 1, "tri").per_cell == n_omega + dim
    assert count_dofs("q1", dim, n_omega, 1).per_cell == 2**dim * n_omega
    assert count_dofs("lm", dim, n_omega, 1).per_cell == (n_omega - 1) + 2**dim
    # comparison table: system and solution dimensions
    assert count_dofs("p0", dim, n_omega, n_x).reduced_dim == n_x
    assert count_dofs("p0", dim, n_omega, n_x).solution_dim == n_omega * n_x
    p1 = {1: 2, 2: 3, 3: 4}[dim]
    q1 = {1: 2, 2: 4, 3: 8}[dim]
    assert count_dofs("p1", dim, n_omega, n_x).reduced_dim == p1 * n_x
    assert count_dofs("p1", dim, n_omega, n_x).solution_dim == p1 * n_omega * n_x
    if dim > 1:
        assert count_dofs("q1", dim, n_omega, n_x).reduced_dim == q1 * n_x
        assert count_dofs("q1", dim, n_omega, n_x).solution_dim == q1 * n_omega * n_x
    for lm in ("lm", "rlm"):
        assert count_dofs(lm, dim, n_omega, n_x).reduced_dim == q1 * n_x
        assert count_dofs(lm, dim, n_omega, n_x).solution_dim == n_omega * n_x + (q1 - 1) * n_x
