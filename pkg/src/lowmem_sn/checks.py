"""Batch of structural checks runnable without the benchmark ladders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import ProblemSpec, assemble_blocks
from .dense import dense_reconstruction, dense_system
from .diffusion import stencil_formula, stencil_row
from .krylov import SolverConfig
from .mesh import build_mesh
from .quadrature import AngularQuadrature, check_moments, gauss_legendre_slab, product_sphere_disk
from .reconstruction import ReconstructionSpec, apply_rstar, build_reconstruction
from .schemes import energy_certificate, solve, solve_system_lmdg, solve_system_rlmdg, solve_system_sndg

TIGHT = SolverConfig(tol=1e-13, restart=None)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<38} value={self.value:.3e} tol={self.tol:.1e} {self.detail}"


def _result(name, value, tol, detail=""):
    return CheckResult(name, bool(value <= tol), float(value), float(tol), detail)


def small_quadrature(dim: int) -> AngularQuadrature:
    """Four-ordinate rule: Gauss on the slab, diagonal directions in 2D."""
    if dim == 1:
        return gauss_legendre_slab(4)
    a = 1.0 / np.sqrt(3.0)
    om = np.array([[a, a], [-a, a], [-a, -a], [a, -a]])
    return AngularQuadrature(dim=2, ordinates=om, weights=np.full(4, 0.25))


def builtin_quadratures() -> dict[str, AngularQuadrature]:
    rules = {f"gauss_legendre_slab({n})": gauss_legendre_slab(n) for n in (2, 4, 8, 16, 32)}
    for p, a in ((2, 4), (4, 8), (8, 16)):
        rules[f"product_sphere_disk({p},{a})"] = product_sphere_disk(p, a)
    rules["four_ordinate_2d"] = small_quadrature(2)
    return rules


def _oracle_instances():
    src = lambda om, x: 1 + np.sin(3 * x[..., 0]) + om[0] * np.cos(x[..., -1])
    inflow = lambda om, x: 0.5 + om[0] * x[..., 0] + x[..., -1] ** 2
    sig1 = lambda x: np.where(x[..., 0] < 0.5, 1.0, 3.0)
    sig2 = lambda x: np.where(x[..., 0] < 0.5, 1.0, 2.0)
    yield "1d", build_mesh((0.0, 1.0), 8), small_quadrature(1), ProblemSpec(0.3, sig1, 0.7, src, inflow), ("p0", "p1")
    yield "2d", build_mesh(((0.0, 1.0), (0.0, 2.0)), (4, 2)), small_quadrature(2), ProblemSpec(0.3, sig2, 0.7, src, inflow), ("p0", "p1", "q1")


def check_quadratures(tol: float = 1e-12) -> list[CheckResult]:
    out = []
    for name, q in builtin_quadratures().items():
        r = check_moments(q, tol)
        worst = max(r.weight_residual, r.first_moment_residual, r.second_moment_residual)
        out.append(_result(f"moments {name}", worst, tol, f"n={q.n_omega}"))
    return out


def check_oracle(tol: float = 1e-10) -> list[CheckResult]:
    """Matrix-free blocks and reduced solves against explicit dense matrices."""
    out = []
    for tag, mesh, quad, prob, spaces in _oracle_instances():
        for space in spaces:
            s = assemble_blocks(prob, mesh, quad, space)
            D = dense_system(prob, mesh, quad, space)
            N = D.L.shape[0]
            shape = (s.n_omega, s.n_cells, s.n_p)
            L = np.column_stack([s.apply_L(e.reshape(shape)).ravel() for e in np.eye(N)])
            scale = np.abs(D.L).max()
            out.append(_result(f"oracle {tag} {space} L block", np.abs(L - D.L).max() / scale, tol))
            out.append(_result(f"oracle {tag} {space} source", np.abs(s.Q.ravel() - D.Q).max() / np.abs(D.Q).max(), tol))
            psi = solve_system_sndg(s, TIGHT).coefficients()
            ref = D.solve_full()
            out.append(_result(f"oracle {tag} {space} solve", np.abs(psi - ref).max() / np.abs(ref).max(), tol))
        s = assemble_blocks(prob, mesh, quad, "lm")
        D = dense_system(prob, mesh, quad, "lm")
        ref = D.solve_low_memory()[0]
        psi = solve_system_lmdg(s, TIGHT).coefficients()
        out.append(_result(f"oracle {tag} lmdg solve", np.abs(psi - ref).max() / np.abs(ref).max(), tol))
        for stencil in ("two", "three"):
            R, ra = dense_reconstruction(prob, mesh, quad, s.basis, stencil, True)
            ref = D.solve_low_memory(R, ra, quad.weights)[0]
            psi = solve_system_rlmdg(s, TIGHT, stencil, "auto").coefficients()
            out.append(_result(f"oracle {tag} rlmdg-{stencil} solve", np.abs(psi - ref).max() / np.abs(ref).max(), tol))
    return out


def check_b11(tol: float = 1e-12) -> list[CheckResult]:
    """Symmetry and Cholesky factorability of the slope-block operator."""
    out = []
    sig = lambda x: 1.0 + 4.0 * (x[..., 0] > 0.5)
    cases = [
        ("1d", build_mesh((0.0, 1.0), 16), gauss_legendre_slab(8)),
        ("2d", build_mesh(((0.0, 1.0), (0.0, 1.0)), (6, 5)), product_sphere_disk(2, 8)),
    ]
    for tag, mesh, quad in cases:
        for eps in (1.0, 1e-3):
            s = assemble_blocks(ProblemSpec(eps, sig, 0.5), mesh, quad, "lm")
            B = s.b11_matrix().toarray()
            asym = np.abs(B - B.T).max() / np.abs(B).max()
            out.append(_result(f"b11 symmetric {tag} eps={eps:g}", asym, tol))
            try:
                np.linalg.cholesky(0.5 * (B + B.T))
                spd = 0.0
            except np.linalg.LinAlgError:
                spd = np.inf
            out.append(_result(f"b11 cholesky {tag} eps={eps:g}", spd, 0.0))
    return out


def check_energy() -> list[CheckResult]:
    """Energy estimate for zero-inflow Galerkin solves with positive absorption.

    The reconstructed scheme is a Petrov-Galerkin method and carries no such
    estimate, so it is not checked here.
    """
    out = []
    src = lambda om, x: 1.0 + np.cos(2.0 * x[..., 0]) * (1.0 + om[0])
    sig = lambda x: np.where(x[..., 0] < 0.5, 2.0, 0.5)
    setups = [
        (build_mesh((0.0, 1.0), 20), gauss_legendre_slab(8), ("p0", "p1", "lm")),
        (build_mesh(((0.0, 1.0), (0.0, 1.0)), 6), product_sphere_disk(2, 4), ("p0", "p1", "q1", "lm")),
    ]
    for mesh, quad, schemes in setups:
        for eps in (1.0, 0.1, 0.01):
            prob = ProblemSpec(eps, sig, 0.8, src, 0.0)
            for scheme in schemes:
                cert = energy_certificate(solve(scheme, prob, mesh, quad, TIGHT))
                margin = cert.lhs / cert.bound
                out.append(_result(f"energy {mesh.dim}d {scheme} eps={eps:g}", margin, 1.0, "lhs/bound"))
    return out


def check_stencil(tol: float = 1e-12, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(5):
        ss, sa, h = rng.uniform(0.2, 5.0), rng.uniform(0.0, 5.0), rng.uniform(0.01, 1.0)
        row = stencil_row(5, h, (2, 3), ss, sa)
        ref = stencil_formula(h, ss, sa)
        err = np.abs(row - ref).max() / np.abs(ref).max()
        out.append(_result(f"stencil sigma_s={ss:.2f} sigma_a={sa:.2f} h={h:.3f}", err, tol))
    return out


def check_reconstruction(tol: float = 1e-14, seed: int = 1) -> list[CheckResult]:
    """Slope isotropy of LMDG, zero ordinate mean of R*, upwind-only stencils."""
    rng = np.random.default_rng(seed)
    out = []
    prob = ProblemSpec(1.0, 1.0, 1.0, lambda om, x: 1.0 + x[..., 0] * om[0], lambda om, x: 1.0 + om[0])
    for mesh, quad in (
        (build_mesh((0.0, 1.0), 12), gauss_legendre_slab(8)),
        (build_mesh(((0.0, 1.0), (0.0, 1.0)), (5, 4)), product_sphere_disk(2, 8)),
    ):
        sol = solve("lm", prob, mesh, quad, TIGHT)
        spread = np.abs(sol.psi1 - sol.psi1[:1]).max()
        out.append(_result(f"lmdg slope isotropy {mesh.dim}d", spread, 0.0))
        s = sol.system
        for stencil in ("two", "three"):
            rec = build_reconstruction(s, ReconstructionSpec(stencil, "none"))
            v = rng.standard_normal((s.n_omega, s.n_cells))
            dev = apply_rstar(rec, v, include_inflow=True)
            mean = np.abs(np.tensordot(s.weights, dev, axes=(0, 0))).max()
            out.append(_result(f"rstar mean {mesh.dim}d {stencil}", mean / np.abs(dev).max(), tol))
            base = rec.apply_R(v)
            bad = 0
            for k in rng.choice(s.n_cells, size=min(6, s.n_cells), replace=False):
                w = v.copy()
                w[:, k] += 1.0
                changed = np.any(rec.apply_R(w) != base, axis=2)
                for l, om in enumerate(s.quad.ordinates):
                    cells = np.nonzero(changed[l])[0]
                    offs = mesh.centers[cells] - mesh.centers[k]
                    # a changed cell must be k itself or lie downstream of k
                    down = (cells == k) | np.all((offs * om >= 0) & ((offs == 0) | (offs * om > 0)), axis=1)
                    bad += int(np.sum(~down))
            out.append(_result(f"upwind-only {mesh.dim}d {stencil}", float(bad), 0.0, "downwind dependencies"))
    return out


CHECKS = {
    "quadrature": check_quadratures,
    "oracle": check_oracle,
    "b11": check_b11,
    "energy": check_energy,
    "stencil": check_stencil,
    "reconstruction": check_reconstruction,
}


def run_checks(names=None) -> list[CheckResult]:
    results = []
    for name in names or CHECKS:
        if name not in CHECKS:
            raise ValueError(f"unknown check {name!r}; choose from {', '.join(CHECKS)}")
        results.extend(CHECKS[name]())
    return results
