import numpy as np
import pytest
from hypothesis import given, strategies as st

from lowmem_sn.assembly import ProblemSpec, assemble_blocks
from lowmem_sn.dense import dense_system
from lowmem_sn.mesh import build_mesh
from lowmem_sn.quadrature import AngularQuadrature, gauss_legendre_slab, product_sphere_disk
from lowmem_sn.reconstruction import ReconstructionSpec, build_reconstruction
from lowmem_sn.sweeps import SweepPlan, invert_transport_block


def _two_stream():
    return AngularQuadrature(dim=1, ordinates=np.array([[1.0], [-1.0]]), weights=np.array([0.5, 0.5]))


def test_single_cell_by_hand():
    # w (|mu| + sigma_t h) c = w  with h = 1, sigma_t = 1  ->  c = 1/2
    s = assemble_blocks(ProblemSpec(1.0, 0.0, 1.0), build_mesh((0.0, 1.0), 1), _two_stream(), "p0")
    u = invert_transport_block(s, np.full((2, 1, 1), 0.5))
    assert np.allclose(u, 0.5, rtol=0, atol=1e-15)


def test_zero_rhs(small_2d, slab_problem):
    s = assemble_blocks(slab_problem, *small_2d, "q1")
    assert not invert_transport_block(s, np.zeros((s.n_omega, s.n_cells, s.n_p))).any()


def test_p1_sweep_matches_dense_solve(slab_problem):
    mesh, quad = build_mesh((0.0, 1.0), 4), gauss_legendre_slab(2)
    s = assemble_blocks(slab_problem, mesh, quad, "p1")
    D = dense_system(slab_problem, mesh, quad, "p1")
    b = np.random.default_rng(3).standard_normal(D.L.shape[0])
    u = invert_transport_block(s, b.reshape(s.n_omega, s.n_cells, s.n_p))
    ref = np.linalg.solve(D.L, b)
    assert np.abs(u.ravel() - ref).max() < 1e-12 * np.abs(ref).max()


@pytest.mark.parametrize("variant", ["full", "00", "tilde00"])
@pytest.mark.parametrize("dim", [1, 2])
def test_sweep_residual(variant, dim, slab_problem):
    if dim == 1:
        mesh, quad = build_mesh((0.0, 1.0), 10), gauss_legendre_slab(8)
    else:
        mesh, quad = build_mesh(((0.0, 1.0), (0.0, 2.0)), (4, 3)), product_sphere_disk(2, 4)
    s = assemble_blocks(slab_problem, mesh, quad, "lm")
    rec = build_reconstruction(s, ReconstructionSpec("two", "auto")) if variant == "tilde00" else None
    plan = SweepPlan(s, variant, rec)
    b = np.random.default_rng(4).standard_normal(plan.block_shape)
    u = plan.invert(b)
    if variant == "full":
        back = s.apply_L(u)
    elif variant == "00":
        back = s.apply_L00(u)
    else:
        back = s.apply_L00(u) + s.apply_L01(rec.apply_R(u))
    assert np.abs(back - b).max() < 1e-12 * np.abs(b).max()


def test_plan_rejects_mismatch(small_1d, slab_problem):
    s = assemble_blocks(slab_problem, *small_1d, "lm")
    with pytest.raises(ValueError):
        SweepPlan(s, "tilde00")
    with pytest.raises(ValueError):
        invert_transport_block(SweepPlan(s, "00"), np.zeros((4, 8)), "full")


@given(st.permutations(range(8)))
def test_ordinate_order_irrelevant(perm):
    perm = np.array(perm)
    mesh = build_mesh(((0.0, 1.0), (0.0, 1.0)), (3, 3))
    q = product_sphere_disk(2, 4)
    prob = ProblemSpec(0.5, 1.0, 1.0, lambda om, x: 1.0 + om[0] * x[..., 1], lambda om, x: 1.0 + om[1])
    s = assemble_blocks(prob, mesh, q, "q1")
    u = invert_transport_block(s, s.Q)
    qp = AngularQuadrature(dim=2, ordinates=q.ordinates[perm], weights=q.weights[perm])
    sp_ = assemble_blocks(prob, mesh, qp, "q1")
    up = invert_transport_block(sp_, sp_.Q)
    assert np.abs(up - u[perm]).max() < 1e-13


def test_p0_sweep_positive():
    s = assemble_blocks(ProblemSpec(0.1, 5.0, 0.5), build_mesh(((0.0, 1.0), (0.0, 1.0)), (5, 4)), product_sphere_disk(2, 4), "p0")
    b = np.random.default_rng(5).uniform(0.0, 1.0, (s.n_omega, s.n_cells, 1))
    assert invert_transport_block(s, b).min() > 0
