import warnings

import numpy as np
import pytest
import sympy as sp

from emelim import dirac_elim as de
from emelim.errors import DegenerateField
from emelim.lattice import GridSpec, Series, sup_norm
from emelim.pipelines import DiracBackground, dual_route_gap, elimination_errors, identity_gap

ETA = np.diag([1.0, -1.0, -1.0, -1.0])


# ---------------------------------------------------------------------------
# symbolic oracle: analytic spinor and potential, residual from the matrix form

T, X, Y, Z = sp.symbols("t x y z", real=True)
COORDS = (T, X, Y, Z)
PSI_EXPR = [
    (1 + sp.Rational(3, 10) * sp.cos(X + Y)) * sp.exp(-sp.I * T),
    sp.Rational(1, 5) * sp.sin(Z - T) + sp.I * sp.Rational(1, 10) * sp.cos(X),
    sp.Rational(1, 4) * sp.exp(sp.I * (Y - T)),
    sp.Rational(1, 10) * sp.cos(X + Z + T) - sp.Rational(1, 5) * sp.I * sp.sin(Y),
]
A_EXPR = [  # contravariant components
    1 + sp.Rational(3, 10) * sp.sin(X) * sp.cos(Z),
    sp.Rational(1, 5) * sp.cos(Y + T),
    -T + sp.Rational(1, 10) * sp.sin(Z - T),
    sp.Rational(3, 10) * sp.cos(X),
]


def _matrix_residual():
    g = [sp.Matrix(de.GAMMA[m].tolist()).applyfunc(sp.nsimplify) for m in range(4)]
    psi = sp.Matrix(PSI_EXPR)
    R = -psi
    for m in range(4):
        R += sp.I * g[m] * psi.diff(COORDS[m]) - g[m] * (int(ETA[m, m]) * A_EXPR[m]) * psi
    return [sp.lambdify(COORDS, r, "numpy") for r in R]


def _lambdas(exprs):
    return [sp.lambdify(COORDS, e, "numpy") for e in exprs]


def _sample(funcs, grid, dt, nt, t0=0.0):
    x, y, z = grid.coords()
    times = t0 + dt * np.arange(nt)

    def at(t):
        return np.stack([np.broadcast_to(f(t, x, y, z), grid.shape).astype(complex) for f in funcs])
    return de.sample_fields(at, grid, dt, times)


def _real(series):
    return [s.map(np.real) for s in series]


# ---------------------------------------------------------------------------
# gamma matrices


def test_gamma_matrices_as_printed():
    g = de.GAMMA
    assert g[0][0, 2] == -1 and g[0][1, 3] == -1 and g[0][2, 0] == -1
    assert np.all(g[0][:2, :2] == 0)
    s1 = np.array([[0, 1], [1, 0]])
    assert np.array_equal(g[1][:2, 2:], s1) and np.array_equal(g[1][2:, :2], -s1)


def test_clifford_algebra():
    g = de.GAMMA
    for m in range(4):
        for n in range(4):
            assert np.allclose(g[m] @ g[n] + g[n] @ g[m], 2 * ETA[m, n] * np.eye(4))


def test_rest_spinor_solves_free_equation():
    u = de.rest_spinor()
    assert np.allclose(de.GAMMA[0] @ u, u) and abs(u[0]) > 0
    assert np.linalg.norm(u) == pytest.approx(1.0)
    g = GridSpec.cubic(8, dim=3)
    dt = 0.01
    psi = de.sample_fields(lambda t: u[:, None, None, None] * np.exp(-1j * t) * np.ones(g.shape),
                           g, dt, dt * np.arange(3))
    A = [Series(np.zeros((3,) + g.shape), g, dt) for _ in range(4)]
    res = de.dirac_residual(psi, A)
    assert max(sup_norm(r.values) for r in res) <= dt ** 2


# ---------------------------------------------------------------------------
# field strength


def test_pure_gauge_has_no_field():
    g = GridSpec.cubic(8, dim=3)
    x, y, z = g.coords()
    dt = 0.1
    chi = Series(np.stack([np.sin(x + 2 * y) * np.cos(z + t) + t ** 2 for t in dt * np.arange(5)]), g, dt)
    A = [ETA[m, m] * chi.d(m) for m in range(4)]
    for f in de.chiral_f(A):
        assert sup_norm(f.values) <= 1e-12


def test_field_signs():
    g = GridSpec.cubic(32, dim=3)
    x = g.coords()[0]
    dt = 0.1
    zero = np.zeros((3,) + g.shape)
    wave = np.broadcast_to(np.sin(x), (3,) + g.shape)
    A = [Series(wave, g, dt), Series(zero, g, dt), Series(zero, g, dt), Series(wave, g, dt)]
    E, H = de.electric_magnetic(A)
    # E = -grad A^0, H = curl A
    assert sup_norm(E[0].center() + np.cos(x)) <= g.h ** 2
    assert sup_norm(H[1].center() + np.cos(x)) <= g.h ** 2
    F = de.chiral_f(A)
    assert sup_norm(F[0].center() - E[0].center()) <= 1e-14
    assert sup_norm(F[1].center() - 1j * H[1].center()) <= 1e-14


# ---------------------------------------------------------------------------
# Dirac equation


def test_dirac_residual_matches_matrix_form():
    R = _matrix_residual()
    pf, af = _lambdas(PSI_EXPR), _lambdas(A_EXPR)
    errs = []
    for n in (16, 32):
        g = GridSpec.cubic(n, dim=3)
        dt = 0.25 * g.h
        psi = _sample(pf, g, dt, 3)
        A = _real(_sample(af, g, dt, 3))
        num = de.dirac_residual(psi, A)
        x, y, z = g.coords()
        errs.append(max(sup_norm(num[k].center() - R[k](dt, x, y, z)) for k in range(4)))
    assert errs[1] <= 0.05
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.2)


def test_reduced_pair_equations_symbolically():
    """The written-out pair equations equal the first two component equations after substitution."""
    psi = [sp.Function(f"p{k}")(*COORDS) for k in range(1, 5)]
    Au = [sp.Function(f"A{k}")(*COORDS) for k in range(4)]
    g = [sp.Matrix(de.GAMMA[m].tolist()).applyfunc(sp.nsimplify) for m in range(4)]
    P = sp.Matrix(psi)
    R = -P
    for m in range(4):
        R += sp.I * g[m] * P.diff(COORDS[m]) - g[m] * (int(ETA[m, m]) * Au[m]) * P
    # the lower rows of R are psi_3 and psi_4 minus algebraic expressions
    p3 = sp.solve(R[2], psi[2])[0]
    p4 = sp.solve(R[3], psi[3])[0]
    sub = {psi[2]: p3, psi[3]: p4}
    first = sp.expand(R[0].subs(sub).doit())
    second = sp.expand(R[1].subs(sub).doit())

    d = lambda f, m: sp.diff(f, COORDS[m])
    dA = lambda m, n: d(Au[m], n)
    I = sp.I
    box = lambda f: sum(ETA[m, m] * d(d(f, m), m) for m in range(4))
    div = sum(dA(m, m) for m in range(4))
    AA = sum(ETA[m, m] * Au[m] ** 2 for m in range(4))
    transport = lambda f: sum(Au[m] * d(f, m) for m in range(4))
    p1, p2 = psi[:2]
    # coefficients exactly as coded in first_pair_equation / second_pair_equation
    e14 = (-box(p1)
           + p2 * (-I * dA(1, 3) - dA(2, 3) + dA(0, 2) + dA(3, 2) + I * (dA(0, 1) + dA(3, 1) + dA(1, 0)) + dA(2, 0))
           + p1 * (-1 + AA - I * div + I * dA(0, 3) - dA(1, 2) + dA(2, 1) + I * dA(3, 0))
           - 2 * I * transport(p1))
    e15 = (-box(p2)
           + I * p1 * (dA(1, 3) + I * dA(2, 3) + I * dA(0, 2) - I * dA(3, 2) + dA(0, 1) - dA(3, 1)
                       + dA(1, 0) + I * dA(2, 0))
           + p2 * (-1 + AA - I * (div + dA(0, 3) + I * dA(1, 2) - I * dA(2, 1) + dA(3, 0)))
           - 2 * I * transport(p2))
    assert sp.simplify(first - e14) == 0
    assert sp.simplify(second - e15) == 0


def test_pair_equation_coding_matches_component_equations():
    """Numerically, the pair equations are the component equations with psi_3, psi_4 substituted."""
    pf, af = _lambdas(PSI_EXPR), _lambdas(A_EXPR)
    gaps = []
    for n in (16, 32):
        g = GridSpec.cubic(n, dim=3)
        dt = 0.25 * g.h
        psi = _sample(pf, g, dt, 5)
        A = _real(_sample(af, g, dt, 5))
        p3, p4 = de.lower_components(psi[0], psi[1], A)
        r = de.dirac_residual([psi[0], psi[1], p3, p4], A)
        e1 = de.first_pair_equation(psi[0], psi[1], A)
        e2 = de.second_pair_equation(psi[0], psi[1], A)
        gaps.append(max(sup_norm(r[0].center() - e1.center()), sup_norm(r[1].center() - e2.center())))
    assert np.log2(gaps[0] / gaps[1]) >= 1.8


def test_norm_conservation_static_potential():
    g = GridSpec.cubic(8, dim=3)
    x, y, z = g.coords()
    A = np.stack([0.3 * np.cos(x), 0.2 * np.sin(y), 0.1 * np.cos(z + x), 0.2 * np.sin(x)])
    psi0 = DiracBackground().spinor(g)
    out = de.evolve_dirac(psi0, lambda t: A, 0.05, 40, g, keep={0, 40})
    n0, n1 = np.sum(np.abs(out[0]) ** 2), np.sum(np.abs(out[40]) ** 2)
    assert abs(n1 / n0 - 1) <= 1e-6


def test_constant_temporal_potential_shifts_phase():
    g = GridSpec.cubic(8, dim=3)
    u = de.rest_spinor()[:, None, None, None] * np.ones(g.shape)
    A = np.zeros((4,) + g.shape)
    A[0] = 0.7
    out = de.evolve_dirac(u, lambda t: A, 0.01, 100, g, keep={100})
    assert sup_norm(out[100] - u * np.exp(-1j * 1.7 * 1.0)) <= 1e-8


def test_dirac_step_needs_three_dimensions():
    with pytest.raises(ValueError):
        de.dirac_step(np.zeros((4, 8)), lambda t: np.zeros((4, 8)), 0.1, GridSpec.cubic(8))


# ---------------------------------------------------------------------------
# elimination


def test_static_background_is_degenerate():
    g = GridSpec.cubic(8, dim=3)
    dt = 0.1
    A = [Series(np.zeros((7,) + g.shape), g, dt) for _ in range(4)]
    psi1 = Series(np.ones((7,) + g.shape, dtype=complex), g, dt)
    with pytest.raises(DegenerateField) as info:
        de.psi2_from_psi1(psi1, A)
    assert info.value.site is not None


def test_fourth_order_operator_is_linear(rng):
    g = GridSpec.cubic(8, dim=3)
    dt = 0.25 * g.h
    x, y, z = g.coords()
    A = de.sample_fields(DiracBackground().potential(g), g, dt, dt * np.arange(7))
    f = Series(rng.standard_normal((7,) + g.shape) + 1j * rng.standard_normal((7,) + g.shape), g, dt)
    h = Series(np.exp(1j * (x + y))[None] * np.ones((7,) + g.shape), g, dt)
    a, b = 0.3 - 1j, 2.0
    lhs = de.fourth_order_residual(f * a + h * b, A)
    rhs = de.fourth_order_residual(f, A) * a + de.fourth_order_residual(h, A) * b
    assert sup_norm((lhs - rhs).values) <= 1e-10 * sup_norm(lhs.values)


def test_two_routes_to_fourth_order_operator():
    assert dual_route_gap(8, seed=3) <= 1e-12


def test_elimination_on_solutions_improves_with_resolution():
    errs = [elimination_errors(n)[2:] for n in (8, 12)]
    assert errs[1][0] < errs[0][0] and errs[1][1] < errs[0][1]


# ---------------------------------------------------------------------------
# currents and gauge


def test_current_is_real_with_density_component(rng):
    psi = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    j = de.current(psi)
    assert np.isrealobj(j)
    assert np.allclose(j[0], np.sum(np.abs(psi) ** 2, axis=0))
    # timelike or null: j^0 >= |j|
    assert np.all(j[0] ** 2 >= np.sum(j[1:] ** 2, axis=0) - 1e-12)
    assert np.allclose(de.lowered(j)[1], -j[1])


def test_current_series_and_array_forms_agree(rng):
    g = GridSpec.cubic(8, dim=3)
    vals = rng.standard_normal((4, 3) + g.shape) + 1j * rng.standard_normal((4, 3) + g.shape)
    js = de.current([Series(v, g, 0.1) for v in vals])
    ja = de.current(vals[:, 1])
    assert all(np.allclose(js[m].values[1], ja[m]) for m in range(4))


def test_conservation_identity_converges():
    gaps = [identity_gap(n, seed=0)[2] for n in (8, 16)]
    assert 1.7 <= np.log2(gaps[0] / gaps[1]) <= 2.3


def _gauge_data(n=16, wind=0):
    g = GridSpec.cubic(n, dim=3)
    dt = 0.25 * g.h
    pf, af = _lambdas(PSI_EXPR), _lambdas(A_EXPR)
    psi = _sample(pf, g, dt, 5)
    if wind:
        x = g.coords()[0]
        psi = [p * Series(np.broadcast_to(np.exp(1j * wind * x), (5,) + g.shape), g, dt) for p in psi]
    return g, psi, _real(_sample(af, g, dt, 5))


def test_make_real_gauge():
    g, psi, A = _gauge_data()
    new_psi, new_A, alpha = de.make_real_gauge(psi, A)
    p1 = new_psi[0].values
    assert sup_norm(p1.imag) <= 1e-14 and np.all(p1.real >= 0)
    # F is gauge invariant up to truncation
    F_old, F_new = de.chiral_f(A), de.chiral_f(new_A)
    assert max(sup_norm((a - b).values) for a, b in zip(F_old, F_new)) <= 5 * g.h ** 2
    # the residual transforms covariantly
    r_old = de.dirac_residual(psi, A)
    r_new = de.dirac_residual(new_psi, new_A)
    t = r_new[0].t_center
    rot = np.exp(1j * alpha.at(t))
    assert max(sup_norm(r_new[k].at(t) - rot * r_old[k].at(t)) for k in range(4)) <= 5 * g.h ** 2


def test_make_real_gauge_warns_on_winding():
    g, psi, A = _gauge_data(wind=1)
    assert de.winding_numbers(psi[0]) == [1, 0, 0]
    with pytest.warns(RuntimeWarning):
        de.make_real_gauge(psi, A)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        de.make_real_gauge(*_gauge_data()[1:])


def test_wrapped_phase_derivative_ignores_branch_cut():
    g = GridSpec.cubic(16, dim=3)
    x = g.coords()[0]
    z = Series(np.broadcast_to(np.exp(1j * 3 * x), (3,) + g.shape), g, 0.1)
    d = de.wrapped_phase_derivative(z, 1)
    # central difference of the unwrapped phase 3x
    assert np.allclose(d.values, 3.0, atol=1e-13)
