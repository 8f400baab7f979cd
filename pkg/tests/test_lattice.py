import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emelim.errors import Degenerate, MissingSlices, NonFiniteValue, UnsupportedOrder
from emelim.lattice import (
    GridSpec,
    Series,
    SmoothRandomField,
    TimeStack,
    helmholtz_solve,
    laplacian,
    partial,
    rk4_step,
    second_partial,
    sup_norm,
    time_derivative,
)


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec((8, 8), (1.0, 1.0))
    with pytest.raises(ValueError):
        GridSpec.cubic(4)
    g = GridSpec.cubic(16, length=2.0, dim=3)
    assert g.spacing == (0.125,) * 3
    assert g.size == 16 ** 3
    assert g.cell_volume == pytest.approx(0.125 ** 3)
    x, y, z = g.coords()
    assert x[1, 0, 0] == pytest.approx(0.125) and y[0, 1, 0] == pytest.approx(0.125)


def test_partial_of_constant_is_zero(grid1d):
    assert np.all(partial(np.full(grid1d.shape, 5.0), 1, grid1d) == 0.0)


def test_partial_sine_second_order():
    L = 3.0
    errs = []
    for n in (64, 128):
        g = GridSpec.cubic(n, length=L)
        (x,) = g.coords()
        k = 2 * np.pi / L
        err = sup_norm(partial(np.sin(k * x), 1, g) - k * np.cos(k * x))
        assert err <= k ** 3 * g.h ** 2 / 6 * 1.01
        errs.append(err)
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.01)


def test_partial_plane_wave(grid1d):
    (x,) = grid1d.coords()
    f = np.exp(1j * x)
    assert sup_norm(partial(f, 1, grid1d) - 1j * f) <= grid1d.h ** 2


def test_partial_time_axis_needs_series(grid1d):
    with pytest.raises(MissingSlices):
        partial(np.zeros(grid1d.shape), 0, grid1d)


@pytest.mark.parametrize("op", ["partial", "second", "compact", "wide"])
def test_stencil_orders(op):
    errs = []
    for n in (32, 64, 128):
        g = GridSpec.cubic(n)
        (x,) = g.coords()
        f = np.sin(x) + 0.3 * np.cos(3 * x)
        if op == "partial":
            err = partial(f, 1, g) - (np.cos(x) - 0.9 * np.sin(3 * x))
        else:
            exact = -np.sin(x) - 2.7 * np.cos(3 * x)
            approx = second_partial(f, 1, g) if op == "second" else laplacian(f, g, op)
            err = approx - exact
        errs.append(sup_norm(err))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders >= 1.8) & (orders <= 2.2))


def test_laplacian_3d_matches_sum_of_second_partials(rng):
    g = GridSpec((8, 10, 12), (1.0, 2.0, 3.0))
    f = rng.standard_normal(g.shape)
    direct = sum(second_partial(f, ax, g) for ax in (1, 2, 3))
    assert np.allclose(laplacian(f, g), direct, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(shift=st.integers(0, 15), seed=st.integers(0, 2 ** 16))
def test_derivatives_commute_with_lattice_shifts(shift, seed):
    g = GridSpec.cubic(16)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    for op in (lambda u: partial(u, 1, g), lambda u: laplacian(u, g), lambda u: laplacian(u, g, "wide")):
        assert np.array_equal(op(np.roll(f, shift)), np.roll(op(f), shift))


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 2 ** 16))
def test_derivatives_are_linear(a, b, seed):
    g = GridSpec.cubic(16)
    r = np.random.default_rng(seed)
    f, h = r.standard_normal(g.shape), r.standard_normal(g.shape)
    lhs = partial(a * f + b * h, 1, g)
    rhs = a * partial(f, 1, g) + b * partial(h, 1, g)
    assert np.allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)) / g.h)


def _stack(func, dt, n=7, t0=0.0, shape=(8,)):
    s = TimeStack(dt=dt)
    for k in range(n):
        t = t0 + k * dt
        s.push(t, {"f": np.full(shape, func(t))})
    return s


def test_time_derivative_quadratic_exact():
    s = _stack(lambda t: t ** 2, 0.1, t0=0.3)
    assert np.allclose(time_derivative(s, "f", 2), 2.0, atol=1e-10)


def test_time_derivative_third_order_sine():
    s = _stack(np.sin, 0.01, t0=1.0)
    t_mid = s.t_middle
    assert np.allclose(time_derivative(s, "f", 3), -np.cos(t_mid), atol=1e-3)


def test_time_derivative_contract():
    s = _stack(np.sin, 0.01)
    with pytest.raises(UnsupportedOrder):
        time_derivative(s, "f", 5)
    short = _stack(np.sin, 0.01, n=3)
    with pytest.raises(MissingSlices):
        time_derivative(short, "f", 4)
    assert issubclass(UnsupportedOrder, MissingSlices)


def test_timestack_capacity_and_spacing():
    with pytest.raises(ValueError):
        TimeStack(dt=0.1, capacity=5)
    s = TimeStack(dt=0.1)
    s.push(0.0, {"f": np.zeros(8)})
    with pytest.raises(ValueError):
        s.push(0.25, {"f": np.zeros(8)})
    for k in range(1, 12):
        s.push(0.1 * k, {"f": np.zeros(8)})
    assert len(s) == 7 and s.times[0] == pytest.approx(0.5)


def test_series_alignment_and_center(grid1d):
    vals = np.arange(5.0)[:, None] * np.ones(grid1d.shape)
    s = Series(vals, grid1d, dt=0.5, t0=1.0)
    d = s.d(0)
    assert d.nt == 3 and d.t0 == pytest.approx(1.5)
    both = s + d
    assert both.nt == 3 and np.allclose(both.values[:, 0], [1.0 + 2, 2.0 + 2, 3.0 + 2])
    assert np.allclose(s.center(), 2.0)
    with pytest.raises(MissingSlices):
        Series(vals[:4], grid1d, 0.5).center()
    with pytest.raises(MissingSlices):
        s.at(10.0)


def test_rk4_exponential_decay():
    x = np.array([1.0])
    for k in range(10):
        x = rk4_step(x, lambda s, t: -s, 0.1, 0.1 * k)
    assert abs(x[0] - np.exp(-1.0)) <= 1e-6


def test_rk4_static_and_nonfinite():
    x = (np.array([1.0, 2.0]), np.array([3.0]))
    y = rk4_step(x, lambda s, t: (np.zeros(2), np.zeros(1)), 0.1)
    assert np.array_equal(y[0], x[0]) and np.array_equal(y[1], x[1])
    with pytest.raises(NonFiniteValue):
        rk4_step(np.array([1.0]), lambda s, t: np.array([np.inf]), 0.1)


def test_helmholtz_single_mode():
    L = 4 * np.pi
    g = GridSpec.cubic(128, length=L)
    (x,) = g.coords()
    k = 2 * np.pi / L
    rhs = np.sin(k * x)
    u = helmholtz_solve(rhs, 1.0, g, tol=1e-10)
    assert sup_norm(laplacian(u, g) + u - rhs) <= 1e-10
    assert sup_norm(u - rhs / (1 - k ** 2)) <= 1e-3


def test_helmholtz_zero_rhs_positive_coeff(grid1d):
    (x,) = grid1d.coords()
    u = helmholtz_solve(np.zeros(grid1d.shape), 0.5 + 0.1 * np.cos(x), grid1d)
    assert np.all(u == 0.0)


def test_helmholtz_poisson_zero_mean(grid1d):
    (x,) = grid1d.coords()
    u = helmholtz_solve(np.cos(2 * x), 0.0, grid1d, tol=1e-10)
    assert abs(u.mean()) <= 1e-14
    assert sup_norm(laplacian(u, grid1d) - np.cos(2 * x)) <= 1e-10
    with pytest.raises(Degenerate):
        helmholtz_solve(np.cos(2 * x) + 1.0, 0.0, grid1d)


def test_helmholtz_null_projection_for_wide_stencil(grid1d):
    # the wide Laplacian also annihilates the alternating mode
    rhs = np.cos(grid1d.coords()[0]) + (-1.0) ** np.arange(64)
    with pytest.raises(Degenerate):
        helmholtz_solve(rhs, 0.0, grid1d, stencil="wide")
    u = helmholtz_solve(rhs, 0.0, grid1d, stencil="wide", null_space="project")
    assert sup_norm(laplacian(u, grid1d, "wide") - np.cos(grid1d.coords()[0])) <= 1e-10


def test_helmholtz_variable_negative_coeff(rng):
    g = GridSpec.cubic(8, dim=3)
    x, y, z = g.coords()
    coeff = -(1.0 + 0.5 * np.cos(x) * np.sin(y))
    rhs = rng.standard_normal(g.shape)
    u = helmholtz_solve(rhs, coeff, g, tol=1e-10)
    assert sup_norm(laplacian(u, g) + coeff * u - rhs) <= 1e-10


def test_smooth_random_field_is_seeded():
    g = GridSpec.cubic(8, dim=3)
    f1 = SmoothRandomField(g, np.random.default_rng(3))
    f2 = SmoothRandomField(g, np.random.default_rng(3))
    assert np.array_equal(f1(0.2), f2(0.2))
    real = SmoothRandomField(g, np.random.default_rng(3), complex_valued=False)
    assert np.isrealobj(real(0.0))
