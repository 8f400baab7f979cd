"""Acceptance suite: one test and one PASS/FAIL line per criterion.

The studies come from :mod:`emelim.pipelines` with their default (acceptance)
parameters and bounds. Each study runs once per session and its wall time
is checked against the runtime budget of its criterion, so a budget covers
everything the study computes. The summary lines appear in the
"acceptance criteria" section of the pytest report (and on stdout with
``-s``).
"""

import time

import pytest

from emelim import pipelines


def _timed(func, **kw):
    t0 = time.perf_counter()
    result = func(**kw)
    return result, time.perf_counter() - t0


@pytest.fixture(scope="module")
def scalar():
    return _timed(pipelines.scalar_elim)


@pytest.fixture(scope="module")
def dirac():
    return _timed(pipelines.dirac_elim)


@pytest.fixture(scope="module")
def spinor():
    return _timed(pipelines.spinor_reconstruct)


@pytest.fixture(scope="module")
def carleman():
    return _timed(pipelines.carleman)


def _report(log, number, title, passed, detail):
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    log.append(line)
    print(line)
    return passed


def _fmt(v):
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return f"{v:.3g}" if isinstance(v, float) else str(v)


def test_criterion_1_scalar_elimination(scalar, acceptance_log):
    result, wall = scalar
    order = result.check("density_order")
    finest = result.check("density_gap_finest")
    _, gaps = result.values("density_gap")
    ok = order.passed and finest.passed and wall <= 60.0
    assert _report(acceptance_log, 1, "scalar elimination equivalence", ok,
                   f"gaps {_fmt(gaps)}, order {order.measured:.3f} in {order.bound}, "
                   f"N=256 gap {finest.measured:.2e} <= {finest.bound:g}, {wall:.1f}s <= 60s")


def test_criterion_2_gauss_constraint(scalar, acceptance_log):
    result, _ = scalar
    cc = result.check("gauss_growth_coupled")
    ce = result.check("gauss_growth_eliminated")
    _, gc = result.values("gauss_growth_coupled")
    _, ge = result.values("gauss_growth_eliminated")
    assert len(gc) == len(ge) == 3
    ok = cc.passed and ce.passed
    assert _report(acceptance_log, 2, "Gauss constraint preservation", ok,
                   f"growth coupled {_fmt(gc)}, eliminated {_fmt(ge)} (each <= 10)")


def test_criterion_3_dirac_identity(dirac, acceptance_log):
    result, wall = dirac
    c = result.check("identity_order")
    orders = result.diagnostics["identity_orders"]
    assert len(orders) == 5
    all_in = all(1.8 <= o <= 2.2 for o in orders.values())
    ok = c.passed and all_in and wall <= 120.0
    assert _report(acceptance_log, 3, "Dirac conservation identity", ok,
                   f"orders per seed {_fmt([float(o) for o in orders.values()])} in [1.8, 2.2], "
                   f"study {wall:.1f}s <= 120s")


def test_criterion_4_component_elimination(dirac, acceptance_log):
    result, _ = dirac
    c = result.check("psi2_order")
    d = result.check("fourth_order_residual_decreasing")
    _, errs = result.values("psi2_error")
    ok = c.passed and d.passed and len(errs) >= 3
    assert _report(acceptance_log, 4, "component elimination on solutions", ok,
                   f"psi2 errors {_fmt(errs)} order {c.measured:.3f} >= 1.8, "
                   f"fourth-order residual {_fmt(d.measured)} strictly decreasing")


def test_criterion_5_two_path_identity(dirac, acceptance_log):
    result, _ = dirac
    c = result.check("dual_route_gap")
    assert _report(acceptance_log, 5, "two-path algebra identity", c.passed,
                   f"worst relative gap {c.measured:.2e} <= {c.bound:g}")


def test_criterion_6_spinor_reconstruction(spinor, acceptance_log):
    result, wall = spinor
    dec = [result.check(f"bddd{m}_decreasing") for m in range(4)]
    subs = [result.check(f"{k}_order") for k in pipelines.SPINOR_SUBORACLES]
    ok = all(c.passed for c in dec + subs) and wall <= 300.0
    rel = ", ".join(f"B{m} {_fmt(c.measured)}" for m, c in enumerate(dec))
    orders = ", ".join(f"{k} {c.measured:.2f}" for k, c in zip(pipelines.SPINOR_SUBORACLES, subs))
    assert _report(acceptance_log, 6, "spinor third-derivative reconstruction", ok,
                   f"relative errors {rel} strictly decreasing; orders {orders} (>= 1.5); "
                   f"{wall:.1f}s <= 300s")


def test_criterion_7_carleman_embedding(carleman, acceptance_log):
    result, wall = carleman
    names = ("linear_gap", "nonlinear_gap_decreasing", "nonlinear_gap_final", "commutators",
             "superposition_reduction")
    checks = {n: result.check(n) for n in names}
    ok = all(c.passed for c in checks.values()) and wall <= 60.0
    detail = (f"(a) linear gap {checks['linear_gap'].measured:.2e} <= 1e-6; "
              f"(b) gaps {_fmt(checks['nonlinear_gap_decreasing'].measured)} decreasing, "
              f"final <= 1e-4; (c) commutator defect {checks['commutators'].measured:.1e}; "
              f"(d) reduction {checks['superposition_reduction'].measured:.2f} >= 3; "
              f"{wall:.1f}s <= 60s")
    assert _report(acceptance_log, 7, "Carleman embedding", ok, detail)


def test_criterion_8_fock_linearity(carleman, acceptance_log):
    result, _ = carleman
    c = result.check("fock_linearity")
    assert _report(acceptance_log, 8, "Fock-space strict linearity", c.passed,
                   f"relative defect {c.measured:.2e} <= {c.bound:g}")
