"""Benchmark problems, manufactured solutions, error norms and study drivers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .assembly import ProblemSpec, count_dofs
from .krylov import ConvergenceError, SolverConfig, solver_config
from .mesh import CartesianMesh, build_mesh, gauss_points, piecewise_uniform_1d
from .quadrature import AngularQuadrature, gauss_legendre_slab, product_sphere_disk
from .schemes import FluxSolution, solve

Exact = Callable[[np.ndarray, np.ndarray], np.ndarray]

POLICIES = ("exact_angular", "exact_scalar", "fine_reference", "fine_reference_angular")


# ---------------------------------------------------------------------------
# manufactured solutions
# ---------------------------------------------------------------------------


def manufactured_problem(
    exact: Exact,
    grad: Exact,
    eps: float,
    sigma_s: float,
    sigma_a: float,
    quad: AngularQuadrature,
) -> ProblemSpec:
    """Source and inflow making ``exact(omega, x)`` solve the discrete-ordinate equations.

    ``grad(omega, x)`` is the spatial gradient of ``exact`` with the
    coordinate index last.  The scalar flux in the source uses ``quad``.
    """

    def mean(x):
        return sum(w * exact(om, x) for om, w in zip(quad.ordinates, quad.weights))

    def source(om, x):
        psi = exact(om, x)
        stream = np.tensordot(grad(om, x), om, axes=(-1, 0))
        return (stream + (sigma_s / eps + eps * sigma_a) * psi - sigma_s / eps * mean(x)) / eps

    return ProblemSpec(eps, sigma_s, sigma_a, source, exact)


def _cell_rule(mesh: CartesianMesh, n_points: int = 4):
    xi, wq = gauss_points(mesh.dim, n_points)
    pts = mesh.centers[:, None, :] + 0.5 * mesh.widths[:, None, :] * xi[None]
    wts = (mesh.volumes / 2**mesh.dim)[:, None] * wq[None]
    return pts.reshape(-1, mesh.dim), wts.ravel()


def l1_error(
    sol: FluxSolution,
    policy: str,
    exact: Exact | Callable | None = None,
    reference: FluxSolution | None = None,
    n_points: int = 4,
) -> float:
    """L1 distance to a closed form or a reference solve, by 4-point-per-axis cell quadrature.

    ``exact_angular``: ``sum_j w_j int |psi_hj - psi(Omega_j)|``;
    ``exact_scalar``: ``int |mean psi_h - exact(x)|``;
    ``fine_reference`` and ``fine_reference_angular``: the same against a
    reference solve on a finer mesh with the same ordinates.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown reference policy {policy!r}")
    pts, wts = _cell_rule(sol.system.mesh, n_points)
    quad = sol.system.quad
    if policy.startswith("exact") and exact is None:
        raise ValueError("missing reference: closed form required")
    if policy.startswith("fine") and reference is None:
        raise ValueError("missing reference: reference solution required")
    if policy == "exact_angular":
        diff = sol.evaluate(pts) - np.array([exact(om, pts) for om in quad.ordinates])
        return float(np.sum(quad.weights[:, None] * np.abs(diff) * wts[None]))
    if policy == "exact_scalar":
        return float(np.sum(np.abs(sol.evaluate_scalar(pts) - exact(pts)) * wts))
    if policy == "fine_reference":
        return float(np.sum(np.abs(sol.evaluate_scalar(pts) - reference.evaluate_scalar(pts)) * wts))
    diff = sol.evaluate(pts) - reference.evaluate(pts)
    return float(np.sum(quad.weights[:, None] * np.abs(diff) * wts[None]))


def relative_profile_error(sol: FluxSolution, reference: FluxSolution) -> float:
    """``||phi_h - phi_ref||_1 / ||phi_ref||_1`` for scalar fluxes."""
    pts, wts = _cell_rule(sol.system.mesh)
    ref = reference.evaluate_scalar(pts)
    return float(np.sum(np.abs(sol.evaluate_scalar(pts) - ref) * wts) / np.sum(np.abs(ref) * wts))


# ---------------------------------------------------------------------------
# cases
# ---------------------------------------------------------------------------


@dataclass
class BenchmarkCase:
    """A benchmark: data, mesh family, ordinates, schemes and error reference.

    ``ladder`` lists mesh parameters passed to ``make_mesh`` (cells per axis,
    or a refinement factor for the piecewise mesh); ``labels`` are the
    matching nominal mesh sizes reported in tables.  ``reference_mesh`` is
    the mesh parameter of the fine reference solve.
    """

    id: str
    eps: float
    quad: AngularQuadrature
    problem: ProblemSpec
    make_mesh: Callable[[int], CartesianMesh]
    ladder: tuple[int, ...]
    labels: tuple[str, ...]
    schemes: tuple[str, ...]
    policy: str
    exact: Exact | None = None
    reference_scheme: str = "p1"
    reference_mesh: int = 0
    profile_cells: tuple[int, ...] = ()
    suppression: object = "auto"
    notes: dict = field(default_factory=dict)

    def config(self, **overrides) -> SolverConfig:
        return solver_config(self.eps, **overrides)

    def describe(self) -> dict:
        return {
            "id": self.id,
            "epsilon": self.eps,
            "n_omega": self.quad.n_omega,
            "ladder": list(self.ladder),
            "labels": list(self.labels),
            "schemes": list(self.schemes),
            "policy": self.policy,
            "reference": f"{self.reference_scheme}:{self.reference_mesh}" if self.policy.startswith("fine") else "closed form",
            **self.notes,
        }


def _cos_iso():
    return (lambda om, x: np.cos(x[..., 0]), lambda om, x: -np.sin(x[..., 0])[..., None])


def _cos_aniso():
    return (
        lambda om, x: np.cos(x[..., 0] + om[0]),
        lambda om, x: -np.sin(x[..., 0] + om[0])[..., None],
    )


def _sin_xy():
    def f(om, x):
        return np.sin(x[..., 0] + x[..., 1])

    def g(om, x):
        c = np.cos(x[..., 0] + x[..., 1])
        return np.stack([c, c], axis=-1)

    return f, g


def _aniso_2d(k: float):
    def f(om, x):
        return (om[0] - k * om[1]) ** 2 * np.sin(2 * x[..., 0] + x[..., 1])

    def g(om, x):
        c = (om[0] - k * om[1]) ** 2 * np.cos(2 * x[..., 0] + x[..., 1])
        return np.stack([2 * c, c], axis=-1)

    return f, g


def _ex41(kind: str, quad: AngularQuadrature) -> BenchmarkCase:
    exact, grad = _cos_iso() if kind == "iso" else _cos_aniso()
    hs = (20, 40, 80, 160)
    return BenchmarkCase(
        id=f"ex41_{kind}", eps=1.0, quad=quad,
        problem=manufactured_problem(exact, grad, 1.0, 1.0, 1.0, quad),
        # the tabulated mesh size h corresponds to cells of width h/2
        make_mesh=lambda n: build_mesh((0.0, 1.0), n),
        ladder=tuple(2 * k for k in hs), labels=tuple(f"1/{k}" for k in hs),
        schemes=("p0", "p1", "lm", "rlm"), policy="exact_angular", exact=exact,
        notes={"cells_per_unit_h": 2},
    )


def _ex42(eps: float, quad: AngularQuadrature) -> BenchmarkCase:
    problem = ProblemSpec(eps, 1.0, 1.0, lambda om, x: 4.0 / 3.0 * np.sin(x[..., 0]), 0.0)
    hs = (20, 40, 80, 160)
    return BenchmarkCase(
        id="ex42", eps=eps, quad=quad, problem=problem,
        make_mesh=lambda n: build_mesh((0.0, math.pi), n),
        ladder=hs, labels=tuple(f"1/{k}" for k in hs),
        schemes=("p0", "p1", "lm", "rlm"), policy="fine_reference_angular",
        reference_scheme="p1", reference_mesh=1280, profile_cells=(8,),
    )


def _ex43(sigma_s2: float, quad: AngularQuadrature) -> BenchmarkCase:
    sig = lambda x: np.where(x[..., 0] < 0.5, 100.0, sigma_s2)
    problem = ProblemSpec(1.0, sig, 0.0, 0.01, 0.0)
    return BenchmarkCase(
        id="ex43", eps=1.0, quad=quad, problem=problem,
        make_mesh=lambda n: build_mesh((0.0, 1.0), n),
        ladder=(10, 50), labels=("0.1", "0.02"),
        schemes=("p0", "p1", "lm", "rlm"), policy="fine_reference",
        reference_scheme="p1", reference_mesh=500, profile_cells=(10, 50),
        notes={"sigma_s2": sigma_s2},
    )


def _ex44(quad: AngularQuadrature) -> BenchmarkCase:
    sig_s = lambda x: np.where(x[..., 0] < 1.0, 0.0, 100.0)
    sig_a = lambda x: np.where(x[..., 0] < 1.0, 2.0, 0.0)
    inflow = lambda om, x: np.where((x[..., 0] < 0.5) & (om[0] > 0), 1.0, 0.0)
    problem = ProblemSpec(1.0, sig_s, sig_a, 0.0, inflow)

    def mesh(k):
        return piecewise_uniform_1d([0.0, 1.0, 11.0], [0.1 / k, 1.0 / k])

    return BenchmarkCase(
        id="ex44", eps=1.0, quad=quad, problem=problem, make_mesh=mesh,
        # mesh parameter k divides both sub-mesh widths
        ladder=(1, 2, 4), labels=("0.1|1", "0.05|0.5", "0.025|0.25"),
        schemes=("p0", "p1", "lm", "rlm"), policy="fine_reference",
        reference_scheme="p1", reference_mesh=20, profile_cells=(1,),
    )


def _ex45(quad: AngularQuadrature) -> BenchmarkCase:
    sig_s = lambda x: np.where(x[..., 0] < 10.0, 90.0, 100.0)
    sig_a = lambda x: np.where(x[..., 0] < 10.0, 10.0, 0.0)
    src = lambda om, x: np.where(x[..., 0] < 10.0, 1.0, 0.0)
    problem = ProblemSpec(1.0, sig_s, sig_a, src, 0.0)
    return BenchmarkCase(
        id="ex45", eps=1.0, quad=quad, problem=problem,
        make_mesh=lambda n: build_mesh((0.0, 20.0), n),
        ladder=(20,), labels=("1",),
        schemes=("p0", "p1", "lm", "rlm"), policy="fine_reference",
        reference_scheme="p1", reference_mesh=400, profile_cells=(20,),
    )


def _ex46(kind: str, quad: AngularQuadrature, k: float = 3.0) -> BenchmarkCase:
    exact, grad = _sin_xy() if kind == "iso" else _aniso_2d(k)
    hs = (20, 40, 80)
    return BenchmarkCase(
        id=f"ex46_{kind}", eps=1.0, quad=quad,
        problem=manufactured_problem(exact, grad, 1.0, 1.0, 1.0, quad),
        make_mesh=lambda n: build_mesh(((0.0, 1.0), (0.0, 1.0)), n),
        ladder=hs, labels=tuple(f"1/{n}" for n in hs),
        schemes=("p0", "p1", "q1", "lm", "rlm"), policy="exact_angular", exact=exact,
        notes={} if kind == "iso" else {"anisotropy_coefficient": k},
    )


def _ex47(eps: float, quad: AngularQuadrature) -> BenchmarkCase:
    c = math.pi / 2

    def src(om, x):
        return (math.pi**2 / 6 + 1) * np.cos(c * x[..., 0]) * np.cos(c * x[..., 1])

    problem = ProblemSpec(eps, 1.0, 1.0, src, 0.0)
    return BenchmarkCase(
        id="ex47", eps=eps, quad=quad, problem=problem,
        make_mesh=lambda n: build_mesh(((-1.0, 1.0), (-1.0, 1.0)), n),
        ladder=(10, 20, 40), labels=("0.2", "0.1", "0.05"),
        schemes=("p0", "p1", "q1", "lm", "rlm"), policy="fine_reference",
        reference_scheme="q1", reference_mesh=80, profile_cells=(20,),
    )


CASE_IDS = ("ex41_iso", "ex41_aniso", "ex42", "ex43", "ex44", "ex45", "ex46_iso", "ex46_aniso", "ex47")


DEFAULT_ORDINATES = {
    "ex41_iso": 32, "ex41_aniso": 32, "ex42": 32, "ex43": 16, "ex44": 16, "ex45": 16,
    "ex46_iso": 32, "ex46_aniso": 32, "ex47": 32,
}


def quadrature_for(dim: int, n_omega: int) -> AngularQuadrature:
    """Gauss rule in 1D; in 2D the product rule with ``n_azimuth = 2 n_polar``."""
    if dim == 1:
        return gauss_legendre_slab(n_omega)
    p = int(round(math.sqrt(n_omega / 2)))
    if 2 * p * p != n_omega:
        raise ValueError(f"2D ordinate counts are 2 p^2 for even p, got {n_omega}")
    return product_sphere_disk(p, 2 * p)


def get_case(
    case_id: str,
    eps: float | None = None,
    sigma_s2: float = 10000.0,
    anisotropy: float = 3.0,
    ordinates: int | None = None,
) -> BenchmarkCase:
    """Build a case by id; ``eps`` applies to ``ex42`` and ``ex47`` (defaults 1e-5 and 2**-14)."""
    if case_id not in CASE_IDS:
        raise ValueError(f"unknown case {case_id!r}; choose from {', '.join(CASE_IDS)}")
    dim = 2 if case_id.startswith(("ex46", "ex47")) else 1
    quad = quadrature_for(dim, ordinates or DEFAULT_ORDINATES[case_id])
    if case_id.startswith("ex41"):
        return _ex41(case_id[5:], quad)
    if case_id == "ex42":
        return _ex42(1e-5 if eps is None else eps, quad)
    if case_id == "ex43":
        return _ex43(sigma_s2, quad)
    if case_id == "ex44":
        return _ex44(quad)
    if case_id == "ex45":
        return _ex45(quad)
    if case_id.startswith("ex46"):
        return _ex46(case_id[5:], quad, anisotropy)
    return _ex47(2.0**-14 if eps is None else eps, quad)


def reference_solution(case: BenchmarkCase, config: SolverConfig | None = None) -> FluxSolution:
    mesh = case.make_mesh(case.reference_mesh)
    return solve(case.reference_scheme, case.problem, mesh, case.quad, config or case.config())


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------


@dataclass
class ErrorRow:
    scheme: str
    label: str
    cells: int
    error: float
    order: float
    iterations: int
    dofs: int
    reduced_dim: int
    status: str = "ok"


@dataclass
class ErrorReport:
    case: str
    rows: list[ErrorRow]

    def errors(self, scheme: str) -> np.ndarray:
        return np.array([r.error for r in self.rows if r.scheme == scheme])

    def orders(self, scheme: str) -> np.ndarray:
        return np.array([r.order for r in self.rows if r.scheme == scheme])[1:]

    def to_csv(self, path: str | Path) -> None:
        names = ["scheme", "h", "cells", "error", "order", "iterations", "dofs", "reduced_dim", "status"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for r in self.rows:
                w.writerow([r.scheme, r.label, r.cells, f"{r.error:.6e}", "" if math.isnan(r.order) else f"{r.order:.4f}",
                            r.iterations, r.dofs, r.reduced_dim, r.status])


def run_convergence_study(
    case: BenchmarkCase,
    schemes: Sequence[str] | None = None,
    ladder: Sequence[int] | None = None,
    config: SolverConfig | None = None,
    stencil: str = "two",
) -> ErrorReport:
    """Solve every (scheme, mesh) pair and tabulate errors and observed orders.

    Orders compare consecutive ladder levels of the same scheme; a failed
    solve is recorded in its row and breaks the order chain.
    """
    schemes = tuple(schemes or case.schemes)
    ladder = tuple(ladder or case.ladder)
    labels = dict(zip(case.ladder, case.labels))
    config = config or case.config()
    ref = reference_solution(case, config) if case.policy.startswith("fine") else None
    rows = []
    for scheme in schemes:
        prev = None
        for n in ladder:
            mesh = case.make_mesh(n)
            h = float(mesh.widths.max())
            dofs = count_dofs(scheme, mesh.dim, case.quad.n_omega, mesh.n_cells)
            try:
                sol = solve(scheme, case.problem, mesh, case.quad, config, stencil, case.suppression)
            except ConvergenceError as exc:
                rows.append(ErrorRow(scheme, labels.get(n, str(n)), mesh.n_cells, math.nan, math.nan,
                                     exc.stats.iterations, dofs.solution_dim, dofs.reduced_dim, f"failed: {exc}"))
                prev = None
                continue
            err = l1_error(sol, case.policy, case.exact, ref)
            order = math.log(prev[0] / err) / math.log(prev[1] / h) if prev else math.nan
            rows.append(ErrorRow(scheme, labels.get(n, str(n)), mesh.n_cells, err, order,
                                 sol.iterations, dofs.solution_dim, dofs.reduced_dim))
            prev = (err, h)
    return ErrorReport(case.id, rows)


@dataclass
class Profile:
    """Scalar flux sampled at cell centres for several schemes."""

    case: str
    centers: np.ndarray
    values: dict[str, np.ndarray]
    solutions: dict[str, FluxSolution]

    def to_csv(self, path: str | Path) -> None:
        d = self.centers.shape[1]
        names = ["x", "y"][:d] + list(self.values)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for i, c in enumerate(self.centers):
                w.writerow([f"{v:.10g}" for v in c] + [f"{self.values[k][i]:.10e}" for k in self.values])


def run_profile(
    case: BenchmarkCase,
    schemes: Sequence[str] | None = None,
    cells: int | None = None,
    config: SolverConfig | None = None,
    stencil: str = "two",
    suppression=None,
    with_reference: bool = True,
) -> Profile:
    """Scalar-flux profiles on one mesh, optionally with the fine reference sampled at the same points."""
    schemes = tuple(schemes or case.schemes)
    n = cells if cells is not None else (case.profile_cells or case.ladder)[0]
    mesh = case.make_mesh(n)
    config = config or case.config()
    supp = case.suppression if suppression is None else suppression
    values, sols = {}, {}
    for scheme in schemes:
        sol = solve(scheme, case.problem, mesh, case.quad, config, stencil, supp)
        sols[scheme] = sol
        values[scheme] = sol.evaluate_scalar(mesh.centers)
    if with_reference and case.reference_mesh:
        ref = reference_solution(case, config)
        sols["reference"] = ref
        values["reference"] = ref.evaluate_scalar(mesh.centers)
    return Profile(case.id, mesh.centers.copy(), values, sols)


def kink_size(
    sol: FluxSolution,
    reference: FluxSolution,
    location: float,
    n_points: int = 16,
    measure: str = "peak",
) -> float:
    """Scalar-flux artifact on the two 1D cells sharing the face at ``location``.

    ``peak``: largest pointwise deviation from the reference (the height of
    the kink in a profile plot).  ``relative_l1``: L1 deviation over the two
    cells divided by the reference L1 norm there.
    """
    if measure not in ("peak", "relative_l1"):
        raise ValueError(f"unknown kink measure {measure!r}")
    mesh = sol.system.mesh
    nodes = mesh.nodes[0]
    k = int(np.argmin(np.abs(nodes - location)))
    if not 0 < k < len(nodes) - 1:
        raise ValueError("location must be an interior face")
    xi, wq = np.polynomial.legendre.leggauss(n_points)
    err = ref = peak = 0.0
    for lo, hi in ((nodes[k - 1], nodes[k]), (nodes[k], nodes[k + 1])):
        x = (0.5 * (lo + hi) + 0.5 * (hi - lo) * xi)[:, None]
        r = reference.evaluate_scalar(x)
        d = np.abs(sol.evaluate_scalar(x) - r)
        peak = max(peak, float(d.max()))
        err += 0.5 * (hi - lo) * np.sum(wq * d)
        ref += 0.5 * (hi - lo) * np.sum(wq * np.abs(r))
    return peak if measure == "peak" else float(err / ref)


def with_eps(case: BenchmarkCase, eps: float) -> BenchmarkCase:
    """Copy of ``case`` with a new scaling parameter (non-manufactured cases only)."""
    if case.exact is not None:
        raise ValueError("manufactured cases fix epsilon through their source")
    return replace(case, eps=eps, problem=replace(case.problem, epsilon=eps))
