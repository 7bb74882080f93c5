"""Acceptance criteria, one PASS/FAIL line each (shown in the pytest summary).

Reference errors and orders below are frozen target values; tolerances are the
pinned acceptance tolerances.  Each test evaluates every item of its
criterion before asserting, so a failing item does not hide the others.
"""

import itertools

import numpy as np
import pytest

from lowmem_sn.assembly import count_dofs
from lowmem_sn.benchmarks import (
    get_case,
    kink_size,
    reference_solution,
    relative_profile_error,
    run_convergence_study,
)
from lowmem_sn.checks import run_checks
from lowmem_sn.schemes import solve

from conftest import ACCEPTANCE_LINES

# target errors and orders, nominal mesh sizes 1/20 .. 1/160
TARGET_COS = {
    "p1": ([2.48e-5, 6.27e-6, 1.58e-6, 3.96e-7], [1.98, 1.99, 2.00]),
    "lm": ([2.24e-5, 5.62e-6, 1.41e-6, 3.52e-7], [2.00, 2.00, 2.00]),
}
TARGET_ANISO_COARSEST = {"lm": 3.20e-3, "rlm": 7.74e-5}
TARGET_2D_ISO_LM_COARSEST = 1.24e-4

ERR_REL = 0.20
PROFILE_REL = 0.05


class Criterion:
    def __init__(self, number):
        self.number = number
        self.items = []

    def check(self, name, passed, detail):
        passed = bool(passed)
        self.items.append((name, passed))
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {self.number}: {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    def info(self, name, detail):
        line = f"[INFO] criterion {self.number}: {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    def finish(self):
        failed = [n for n, ok in self.items if not ok]
        assert not failed, f"criterion {self.number} failed items: {failed}"


def _fmt(values, spec="{:.3e}"):
    return "[" + ", ".join(spec.format(v) for v in values) + "]"


def _cells(case, ladder=None):
    return [case.make_mesh(n).n_cells for n in (ladder or case.ladder)]


@pytest.mark.slow
def test_criterion_1_slab_isotropic_accuracy():
    c = Criterion(1)
    case = get_case("ex41_iso")
    rep = run_convergence_study(case, ["p0", "p1", "lm"])
    cells = _cells(case)
    for scheme, (ref_err, ref_ord) in TARGET_COS.items():
        err, order = rep.errors(scheme), rep.orders(scheme)
        ratio = err / np.array(ref_err)
        c.check(f"{scheme} errors within 20%", np.all(np.abs(ratio - 1) <= ERR_REL),
                f"cells={cells} err={_fmt(err)} ratio={_fmt(ratio, '{:.3f}')}")
        c.check(f"{scheme} orders within 0.1", np.all(np.abs(order - np.array(ref_ord)) <= 0.1),
                f"orders={_fmt(order, '{:.3f}')} ref={ref_ord}")
    order = rep.orders("p0")
    c.check("p0 order 1.0 +- 0.1", np.all(np.abs(order - 1.0) <= 0.1), f"orders={_fmt(order, '{:.3f}')}")
    c.finish()


@pytest.mark.slow
def test_criterion_2_slab_anisotropic_accuracy():
    c = Criterion(2)
    case = get_case("ex41_aniso")
    rep = run_convergence_study(case, ["lm", "rlm"])
    cells = _cells(case)
    for scheme, target_order in (("lm", 1.0), ("rlm", 2.0)):
        err, order = rep.errors(scheme), rep.orders(scheme)
        c.check(f"{scheme} order {target_order} +- 0.1", np.all(np.abs(order - target_order) <= 0.1),
                f"cells={cells} orders={_fmt(order, '{:.3f}')}")
        ratio = err[0] / TARGET_ANISO_COARSEST[scheme]
        c.check(f"{scheme} error at h=1/20 within 20%", abs(ratio - 1) <= ERR_REL,
                f"err={err[0]:.3e} ref={TARGET_ANISO_COARSEST[scheme]:.2e} ratio={ratio:.3f}")
    c.finish()


@pytest.mark.slow
def test_criterion_3_slab_diffusion_limit():
    c = Criterion(3)
    case = get_case("ex42", eps=1e-5)
    rep = run_convergence_study(case, ["p0", "lm", "rlm"])
    cells = _cells(case)
    c.info("reference", f"{case.reference_scheme} on {case.make_mesh(case.reference_mesh).n_cells} cells")
    err, order = rep.errors("p0"), rep.orders("p0")
    c.check("eps=1e-5 p0 error 2.00, order 0.00 +- 0.05",
            np.all(np.abs(err - 2.0) <= 0.05) and np.all(np.abs(order) <= 0.05),
            f"cells={cells} err={_fmt(err)} orders={_fmt(order, '{:.3f}')}")
    for scheme in ("lm", "rlm"):
        err, order = rep.errors(scheme), rep.orders(scheme)
        c.check(f"eps=1e-5 {scheme} order 2.0 +- 0.15", np.all(np.abs(order - 2.0) <= 0.15),
                f"err={_fmt(err)} orders={_fmt(order, '{:.3f}')}")
    rep1 = run_convergence_study(get_case("ex42", eps=1.0), ["lm", "rlm"])
    order = rep1.orders("lm")
    c.check("eps=1 lm order 1.0 +- 0.1", np.all(np.abs(order - 1.0) <= 0.1), f"orders={_fmt(order, '{:.3f}')}")
    order = rep1.orders("rlm")
    c.check("eps=1 rlm order >= 1.85", np.all(order >= 1.85), f"orders={_fmt(order, '{:.3f}')}")
    c.finish()


@pytest.mark.slow
def test_criterion_4_square_orders():
    c = Criterion(4)
    for case_id, targets in (("ex46_iso", {"lm": 2.0, "rlm": 2.0}), ("ex46_aniso", {"lm": 1.0, "rlm": 2.0})):
        case = get_case(case_id)
        rep = run_convergence_study(case, list(targets))
        cells = _cells(case)
        for scheme, target in targets.items():
            tol = 0.1 if target == 1.0 else 0.15
            order = rep.orders(scheme)
            c.check(f"{case_id} {scheme} order {target} +- {tol}", np.all(np.abs(order - target) <= tol),
                    f"cells={cells} err={_fmt(rep.errors(scheme))} orders={_fmt(order, '{:.3f}')}")
        if case_id == "ex46_iso":
            c.info("ex46_iso lm error at h/sqrt2=1/20 (quadrature-dependent)",
                   f"{rep.errors('lm')[0]:.3e} vs target {TARGET_2D_ISO_LM_COARSEST:.2e}")
    c.finish()


@pytest.mark.slow
def test_criterion_5_profiles():
    c = Criterion(5)

    # discontinuous scattering, three contrasts, both mesh sizes
    for s2 in (100.0, 1000.0, 10000.0):
        case = get_case("ex43", sigma_s2=s2)
        cfg = case.config()
        ref = reference_solution(case, cfg)
        kinks, l1_kinks = [], []
        for n in case.profile_cells:
            mesh = case.make_mesh(n)
            sols = {s: solve(s, case.problem, mesh, case.quad, cfg) for s in ("p0", "lm", "rlm")}
            rel = {s: relative_profile_error(v, ref) for s, v in sols.items()}
            c.check(f"ex43 sigma_s2={s2:g} cells={mesh.n_cells} lm within 5%", rel["lm"] <= PROFILE_REL,
                    f"lm={rel['lm']:.4f} rlm={rel['rlm']:.4f} p0={rel['p0']:.4f}")
            kinks.append(kink_size(sols["rlm"], ref, 0.5))
            l1_kinks.append(kink_size(sols["rlm"], ref, 0.5, measure="relative_l1"))
            if n == case.profile_cells[0] and s2 == 10000.0:
                c.check("ex43 p0 collapse at sigma_s2=1e4, h=0.1", rel["p0"] > 0.5, f"p0 rel={rel['p0']:.3f}")
        c.check(f"ex43 sigma_s2={s2:g} rlm kink at x=0.5 shrinks with h", kinks[1] < kinks[0],
                f"peak deviation={_fmt(kinks)} (interface relative L1 {_fmt(l1_kinks)})")

    # absorber next to a diffusive region, with and without suppression
    case = get_case("ex44")
    cfg = case.config()
    ref = reference_solution(case, cfg)
    mesh = case.make_mesh(1)
    lm = solve("lm", case.problem, mesh, case.quad, cfg)
    rel_lm = relative_profile_error(lm, ref)
    rlm = {sup: solve("rlm", case.problem, mesh, case.quad, cfg, suppression=sup) for sup in ("auto", "none")}
    rel_r = {sup: relative_profile_error(s, ref) for sup, s in rlm.items()}
    c.check(f"ex44 cells={mesh.n_cells} lm within 5%", rel_lm <= PROFILE_REL,
            f"lm={rel_lm:.4f} rlm(suppressed)={rel_r['auto']:.4f} rlm(unsuppressed)={rel_r['none']:.4f}")
    k_sup, k_none = (kink_size(rlm[s], ref, 1.0) for s in ("auto", "none"))
    l_sup, l_none = (kink_size(rlm[s], ref, 1.0, measure="relative_l1") for s in ("auto", "none"))
    c.check("ex44 rlm kink at x=1 smaller with suppression", k_sup < k_none,
            f"peak deviation suppressed={k_sup:.3e} unsuppressed={k_none:.3e} "
            f"(interface relative L1 {l_sup:.3e} / {l_none:.3e})")
    sols = [solve("rlm", case.problem, case.make_mesh(k), case.quad, cfg, suppression="none") for k in case.ladder]
    kinks = [kink_size(s, ref, 1.0) for s in sols]
    l1_kinks = [kink_size(s, ref, 1.0, measure="relative_l1") for s in sols]
    c.check("ex44 rlm kink at x=1 shrinks with h", np.all(np.diff(kinks) < 0),
            f"cells={_cells(case)} peak deviation={_fmt(kinks)} (interface relative L1 {_fmt(l1_kinks)})")

    # two diffusive regions
    case = get_case("ex45")
    cfg = case.config()
    ref = reference_solution(case, cfg)
    mesh = case.make_mesh(case.profile_cells[0] if case.profile_cells else case.ladder[0])
    rel = {s: relative_profile_error(solve(s, case.problem, mesh, case.quad, cfg), ref) for s in ("lm", "rlm", "p0")}
    c.check(f"ex45 cells={mesh.n_cells} lm within 5%", rel["lm"] <= PROFILE_REL,
            f"lm={rel['lm']:.4f} rlm={rel['rlm']:.4f} p0={rel['p0']:.4f}")

    # 2D epsilon sweep towards the diffusion limit
    for eps in (1.0, 2.0**-6, 2.0**-10, 2.0**-14):
        case = get_case("ex47", eps=eps)
        cfg = case.config()
        ref = reference_solution(case, cfg)
        mesh = case.make_mesh(case.profile_cells[0])
        schemes = ("lm", "p0") if eps == 2.0**-14 else ("lm",)
        sols = {s: solve(s, case.problem, mesh, case.quad, cfg) for s in schemes}
        rel = relative_profile_error(sols["lm"], ref)
        c.check(f"ex47 eps=2^{int(round(np.log2(eps)))} cells={mesh.n_cells} lm within 5%", rel <= PROFILE_REL,
                f"lm={rel:.4f} reference {case.reference_scheme} on {case.make_mesh(case.reference_mesh).n_cells} cells")
        if "p0" in sols:
            peak = float(np.abs(sols["p0"].scalar_flux()[:, 0]).max())
            c.check("ex47 p0 collapse at eps=2^-14", peak < 0.05, f"max |p0 scalar flux| = {peak:.3e} (limit peak ~1)")
    c.finish()


CHECK_GROUPS = {
    "a": ("quadrature", "quadrature moments at 1e-12"),
    "b": ("oracle", "dense-oracle equivalence at 1e-10"),
    "c": ("b11", "B11 symmetry at 1e-12 and Cholesky"),
    "d": ("energy", "energy certificate, Galerkin schemes"),
    "e": ("stencil", "projected-form stencil identity at 1e-12"),
    "f": ("reconstruction", "slope isotropy, R* mean at 1e-14, upwind-only"),
}


@pytest.mark.parametrize("part", list(CHECK_GROUPS))
def test_criterion_6_property_suite(part):
    c = Criterion(f"6{part}")
    name, label = CHECK_GROUPS[part]
    res = run_checks([name])
    bad = [r for r in res if not r.passed]
    worst = max(res, key=lambda r: r.value / r.tol if r.tol else r.value)
    c.check(label, not bad, f"{len(res) - len(bad)}/{len(res)} passed, worst {worst.name}={worst.value:.2e}")
    c.finish()


def test_criterion_7_dof_accounting():
    c = Criterion(7)
    # memory table: per cell and per ordinate on simplices and boxes
    per_cell = {
        ("p1", "tri"): lambda d, n: (d + 1) * n,
        ("lm", "tri"): lambda d, n: n + d,
        ("q1", "rect"): lambda d, n: 2**d * n,
        ("lm", "rect"): lambda d, n: (n - 1) + 2**d,
    }
    # comparison table: (reduced system, full solution) sizes per scheme
    sizes = {
        "p0": lambda d, n, x: (x, n * x),
        "p1": lambda d, n, x: ((d + 1) * x, (d + 1) * n * x),
        "q1": lambda d, n, x: (2**d * x, 2**d * n * x),
        "lm": lambda d, n, x: (2**d * x, n * x + (2**d - 1) * x),
        "rlm": lambda d, n, x: (2**d * x, n * x + (2**d - 1) * x),
    }
    combos = list(itertools.product((1, 2, 3), (2, 4, 8, 16, 32, 128), (1, 10, 20, 400, 6400)))
    bad = 0
    for d, n, x in combos:
        for (space, cell), f in per_cell.items():
            bad += count_dofs(space, d, n, 1, cell).per_cell != f(d, n)
        for space, f in sizes.items():
            if space == "q1" and d == 1:
                continue
            r = count_dofs(space, d, n, x)
            bad += (r.reduced_dim, r.solution_dim) != f(d, n, x)
    c.check("DOF formulas for memory and comparison tables", bad == 0,
            f"{len(combos)} (dim, n_omega, n_x) combinations, {bad} mismatches")
    c.finish()
