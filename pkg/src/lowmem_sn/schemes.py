"""Standard, low-memory and reconstructed low-memory SN-DG solvers.

Each solver eliminates the sweepable blocks and runs GMRES on a reduced
system whose unknowns are scalar-flux-like (one set of local coefficients
per cell), then recovers the angular flux with one more sweep set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import BlockSystem, ProblemSpec, _as_angular_field, apply_sigma, assemble_blocks
from .krylov import KrylovStats, SolverConfig, gmres, solver_config
from .mesh import CartesianMesh, SpaceKind, gauss_points
from .quadrature import AngularQuadrature
from .reconstruction import Reconstruction, ReconstructionSpec, build_reconstruction
from .sweeps import SweepPlan

Logger = Callable[[int, float], None]


@dataclass
class FluxSolution:
    """Discrete angular flux in local coefficients.

    ``psi0`` holds per-ordinate cell averages.  ``psi1`` holds the per-ordinate
    higher coefficients of the represented function (for the low-memory
    schemes it is built from ``phi1``, the shared isotropic slope block, plus
    the reconstructed deviation for RLMDG).
    """

    scheme: str
    system: BlockSystem
    psi0: np.ndarray
    psi1: np.ndarray
    phi1: np.ndarray | None = None
    stats: KrylovStats = field(default_factory=KrylovStats)

    @property
    def iterations(self) -> int:
        return self.stats.iterations

    @property
    def residual(self) -> float:
        return self.stats.residual

    def coefficients(self) -> np.ndarray:
        """All local coefficients, shape ``(n_omega, n_cells, n_p)``."""
        return np.concatenate([self.psi0[..., None], self.psi1], axis=2)

    def scalar_flux(self) -> np.ndarray:
        """Coefficients of the weighted ordinate average, shape ``(n_cells, n_p)``."""
        return self.system.apply_P(self.coefficients())

    def current(self) -> np.ndarray:
        """Coefficients of ``(1/eps) sum_j w_j Omega_j psi_j``, shape ``(n_cells, n_p, dim)``."""
        s = self.system
        wo = s.weights[:, None] * s.quad.ordinates
        return np.einsum("ld,lcr->crd", wo, self.coefficients()) / s.epsilon

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Angular flux at physical points, shape ``(n_omega, n_points)``."""
        cells, ref = self.system.mesh.locate(points)
        b = self.system.basis.values(ref)
        return np.einsum("lpr,pr->lp", self.coefficients()[:, cells], b)

    def evaluate_scalar(self, points: np.ndarray) -> np.ndarray:
        cells, ref = self.system.mesh.locate(points)
        b = self.system.basis.values(ref)
        return np.einsum("pr,pr->p", self.scalar_flux()[cells], b)


def derive_moments(sol: FluxSolution) -> tuple[np.ndarray, np.ndarray]:
    """Scalar flux and current coefficients."""
    return sol.scalar_flux(), sol.current()


def _config(config: SolverConfig | None, system: BlockSystem) -> SolverConfig:
    """``config``, or unrestarted GMRES at the tolerance attainable for the system's epsilon."""
    return config if config is not None else solver_config(system.epsilon)


# ---------------------------------------------------------------------------
# standard SN-DG
# ---------------------------------------------------------------------------


def solve_system_sndg(system: BlockSystem, config: SolverConfig | None = None, log: Logger | None = None) -> FluxSolution:
    config = _config(config, system)
    plan = SweepPlan(system, "full")
    shape = (system.n_cells, system.n_p)
    LinvQ = plan.invert(system.Q)
    rhs = system.apply_P(LinvQ)

    if np.all(system.sigma_s == 0):
        # no scattering: the reduced operator is the identity
        phi, stats = rhs, KrylovStats(0, 0.0, [0.0])
    else:
        # (I - P L^-1 M) x rewritten as P L^-1 (L - M) Sigma^T x: the large
        # scattering terms never get subtracted in floating point
        def op(x):
            x = x.reshape(shape)
            return system.apply_P(plan.invert(system.apply_L(apply_sigma("copy", x, system.n_omega), streaming=True)))

        phi, stats = gmres(op, rhs.ravel(), config, callback=log)
        phi = phi.reshape(shape)
    psi = plan.invert(system.apply_M(phi) + system.Q)
    return FluxSolution(system.space.value, system, psi[..., 0].copy(), psi[..., 1:].copy(), None, stats)


def solve_sndg(
    problem: ProblemSpec,
    mesh: CartesianMesh,
    quad: AngularQuadrature,
    space: SpaceKind | str = "p1",
    config: SolverConfig | None = None,
    log: Logger | None = None,
) -> FluxSolution:
    space = SpaceKind.parse(space)
    if space.low_memory:
        raise ValueError("solve_sndg takes a standard space (p0, p1 or q1)")
    return solve_system_sndg(assemble_blocks(problem, mesh, quad, space), config, log)


# ---------------------------------------------------------------------------
# low-memory schemes
# ---------------------------------------------------------------------------


class _LowMemoryOps:
    """Shared block applications for the LMDG and RLMDG reductions.

    With ``rec`` set, the tilde blocks are used: the cell-average sweep
    includes the reconstructed slopes and the slope rows pick up the
    reconstructed deviation.
    """

    def __init__(self, system: BlockSystem, rec: Reconstruction | None):
        self.s = system
        self.rec = rec
        self.binv = system.b11_solver()
        self.plan = SweepPlan(system, "00" if rec is None else "tilde00", rec)
        self.n0 = system.n_cells
        self.n1 = system.n_cells * (system.n_p - 1)

    def copy(self, v):
        return apply_sigma("copy", v, self.s.n_omega)

    def sigma(self, v):
        return apply_sigma("sum", v, self.s.n_omega)

    def slope_rows_of_deviation(self, dev):
        """``L11 dev`` for a field with zero weighted ordinate mean.

        Only ever used under ``Sigma``, where the scattering mass term drops
        out exactly; leaving it out avoids a large cancelling term.
        """
        idx = self.s.slope_indices
        return self.s.apply_L(dev, idx, idx, streaming=True)

    def L10t(self, u0):
        s = self.s
        out = s.apply_L10(u0)
        if self.rec is not None:
            out += self.slope_rows_of_deviation(self.rec.deviation(self.rec.apply_R(u0)))
        return out

    def coupling_rows(self, y):
        """``(Sigma L10~ + B11 P1 R) y`` for per-ordinate averages ``y``."""
        out = self.sigma(self.L10t(y))
        if self.rec is not None:
            out += self.s.apply_b11(self.s.apply_P(self.rec.apply_R(y)))
        return out

    def inner(self, x0, x1):
        """Averages ``L00~^{-1}(M0 X0 + L01 Sigma^T X1)``."""
        s = self.s
        return self.plan.invert(s.apply_M0(x0) + s.apply_L01(self.copy(x1)))

    def operator(self, x):
        s = self.s
        x0 = x[: self.n0]
        x1 = x[self.n0:].reshape(s.n_cells, s.n_p - 1)
        # y = inner(x0, x1) is split as copy(x0) - z so that the first block
        # row, x0 - P0 y = P0 z, avoids cancelling the scattering terms
        c0 = self.copy(x0)
        t = s.apply_L(c0[..., None], [0], [0], streaming=True)[..., 0] - s.apply_L01(self.copy(x1))
        if self.rec is not None:
            t += s.apply_L01(self.rec.apply_R(c0))
        z = self.plan.invert(t)
        r0 = s.apply_P(z)
        r1 = s.apply_b11(x1) - self.coupling_rows(c0 - z)
        return np.concatenate([r0, r1.ravel()])


def _solve_low_memory(
    system: BlockSystem,
    rec: Reconstruction | None,
    config: SolverConfig,
    log: Logger | None,
) -> FluxSolution:
    s = system
    ops = _LowMemoryOps(s, rec)
    Q0, Q1 = s.Q0, s.Q1
    if rec is not None:
        dev_r = rec.deviation(rec.r_alpha)
        Q0 = Q0 - s.apply_L01(dev_r)
        Q1 = Q1 - ops.slope_rows_of_deviation(dev_r)
    f = ops.plan.invert(Q0 - s.apply_L01(ops.copy(ops.binv(ops.sigma(Q1)))))
    rhs = np.concatenate([s.apply_P(f), ops.coupling_rows(f).ravel()])
    x, stats = gmres(ops.operator, rhs, config, callback=log)
    x0 = x[: ops.n0]
    x1 = x[ops.n0:].reshape(s.n_cells, s.n_p - 1)
    psi0 = ops.inner(x0, x1) + f
    phi1 = ops.binv(ops.sigma(Q1 - ops.L10t(psi0)))
    psi1 = ops.copy(phi1)
    if rec is not None:
        psi1 += rec.deviation(rec.apply_R(psi0) + rec.r_alpha)
    tag = SpaceKind.LM.value if rec is None else SpaceKind.RLM.value
    return FluxSolution(tag, s, psi0, psi1, phi1, stats)


def solve_system_lmdg(system: BlockSystem, config: SolverConfig | None = None, log: Logger | None = None) -> FluxSolution:
    if system.n_p < 2:
        raise ValueError("low-memory schemes need a local space with slopes")
    return _solve_low_memory(system, None, _config(config, system), log)


def solve_system_rlmdg(
    system: BlockSystem,
    config: SolverConfig | None = None,
    stencil: str = "two",
    suppression="auto",
    log: Logger | None = None,
) -> FluxSolution:
    if system.n_p < 2:
        raise ValueError("low-memory schemes need a local space with slopes")
    rec = build_reconstruction(system, ReconstructionSpec(stencil, suppression))
    return _solve_low_memory(system, rec, _config(config, system), log)


def solve_lmdg(
    problem: ProblemSpec,
    mesh: CartesianMesh,
    quad: AngularQuadrature,
    config: SolverConfig | None = None,
    log: Logger | None = None,
) -> FluxSolution:
    return solve_system_lmdg(assemble_blocks(problem, mesh, quad, SpaceKind.LM), config, log)


def solve_rlmdg(
    problem: ProblemSpec,
    mesh: CartesianMesh,
    quad: AngularQuadrature,
    config: SolverConfig | None = None,
    stencil: str = "two",
    suppression="auto",
    log: Logger | None = None,
) -> FluxSolution:
    system = assemble_blocks(problem, mesh, quad, SpaceKind.RLM)
    return solve_system_rlmdg(system, config, stencil, suppression, log)


def solve(
    scheme: SpaceKind | str,
    problem: ProblemSpec,
    mesh: CartesianMesh,
    quad: AngularQuadrature,
    config: SolverConfig | None = None,
    stencil: str = "two",
    suppression="auto",
    log: Logger | None = None,
) -> FluxSolution:
    """Dispatch on the scheme name (``p0``, ``p1``, ``q1``, ``lm``, ``rlm``)."""
    scheme = SpaceKind.parse(scheme)
    if scheme is SpaceKind.LM:
        return solve_lmdg(problem, mesh, quad, config, log)
    if scheme is SpaceKind.RLM:
        return solve_rlmdg(problem, mesh, quad, config, stencil, suppression, log)
    return solve_sndg(problem, mesh, quad, scheme, config, log)


# ---------------------------------------------------------------------------
# stability certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyCertificate:
    scattering: float
    absorption: float
    jumps: float
    bound: float

    @property
    def lhs(self) -> float:
        return self.scattering + self.absorption + self.jumps

    @property
    def holds(self) -> bool:
        return self.lhs <= self.bound


def energy_certificate(sol: FluxSolution, n_points: int = 4) -> EnergyCertificate:
    """Terms of the discrete energy estimate for a solve with zero inflow.

    Left side: ``(1/eps)||sigma_s^(1/2)(psi - mean psi)||^2 + (eps/2)||sigma_a^(1/2) psi||^2
    + (1/2)|psi|_jump^2``; right side ``eps/(2 min sigma_a) ||q||^2``.  Jumps on
    boundary faces are taken against a zero exterior trace.
    """
    s = sol.system
    mesh, basis, w = s.mesh, s.basis, s.weights
    eps = s.epsilon
    if s.sigma_a.min() <= 0:
        raise ValueError("the certificate needs a positive absorption cross section")
    coef = sol.coefficients()
    mass = mesh.volumes[:, None] * basis.mass_diag[None, :]
    dev = coef - s.apply_P(coef)[None]
    scat = np.einsum("l,c,lcr,cr->", w, s.sigma_s, dev**2, mass) / eps
    absn = 0.5 * eps * np.einsum("l,c,lcr,cr->", w, s.sigma_a, coef**2, mass)

    d = mesh.dim
    if d == 1:
        tp, tw = np.zeros((1, 0)), np.ones(1)
    else:
        tp, tw = gauss_points(d - 1, n_points)
    jump = 0.0
    for a in range(d):
        up_pts = basis.values(np.insert(tp, a, 1.0, axis=1))
        lo_pts = basis.values(np.insert(tp, a, -1.0, axis=1))
        fjac = mesh.face_areas[:, a] / 2 ** (d - 1)
        # upper face of every cell, against the upper neighbor or zero
        upper = np.einsum("lcr,qr->lcq", coef, up_pts)
        nb = mesh.neighbors[:, a, 1]
        other = np.zeros_like(upper)
        ok = nb >= 0
        other[:, ok] = np.einsum("lcr,qr->lcq", coef[:, nb[ok]], lo_pts)
        jump += np.einsum("l,l,q,c,lcq->", w, np.abs(s.quad.ordinates[:, a]), tw, fjac, (upper - other) ** 2)
        # lower boundary faces
        bl = mesh.neighbors[:, a, 0] < 0
        lower = np.einsum("lcr,qr->lcq", coef[:, bl], lo_pts)
        jump += np.einsum("l,l,q,c,lcq->", w, np.abs(s.quad.ordinates[:, a]), tw, fjac[bl], lower**2)

    xi, wq = gauss_points(d, n_points)
    pts = mesh.centers[:, None, :] + 0.5 * mesh.widths[:, None, :] * xi[None]
    jac = mesh.volumes / 2**d
    qn = 0.0
    for l, om in enumerate(s.quad.ordinates):
        q = _as_angular_field(s.problem.source, om, pts)
        qn += w[l] * np.einsum("q,c,cq->", wq, jac, q**2)
    bound = eps / (2 * s.sigma_a.min()) * qn
    return EnergyCertificate(float(scat), float(absn), float(0.5 * jump), float(bound))
