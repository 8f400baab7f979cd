import numpy as np
import pytest

from emelim import spinor_ed as se
from emelim.dirac_elim import chiral_f, current, rest_spinor
from emelim.errors import DegenerateField, MissingSlices, WindingObstruction
from emelim.lattice import GridSpec, Series, TimeStack, sup_norm


def _window(grid, psi_of_t, A_of_t, nt=5, dt=0.05):
    times = dt * np.arange(nt)
    psi = [Series(np.stack([psi_of_t(t)[k] for t in times]), grid, dt) for k in range(4)]
    A = [Series(np.stack([A_of_t(t)[k] for t in times]).astype(complex), grid, dt) for k in range(4)]
    return psi, A


def _smooth_window(grid, nt=5, dt=0.05):
    x, y, z = grid.coords()
    u = rest_spinor()[:, None, None, None]

    def psi_of_t(t):
        mod = (1.0 + 0.2 * np.cos(x + t) + 0.1j * np.sin(y - z)) * np.exp(-1j * t)
        out = u * mod
        out[1] = out[1] + 0.1 * np.cos(z + 2 * t)
        return out

    def A_of_t(t):
        return np.stack([0.3 * np.cos(y), 0.2 * np.sin(z + t), -t + 0.1 * np.cos(x), 0.1 * np.sin(y)])
    return _window(grid, psi_of_t, A_of_t, nt, dt)


def test_neutral_background(grid3d, rng):
    psi = rng.standard_normal((4,) + grid3d.shape) + 0j
    c = se.DMCouplings.neutral(psi, e=0.5)
    assert c.background == pytest.approx(0.25 * np.mean(np.sum(np.abs(psi) ** 2, axis=0)))


def test_constant_phase_gives_trivial_gauge(grid3d):
    amp = 0.6 * np.exp(0.4j)
    psi_of_t = lambda t: np.full((4,) + grid3d.shape, amp)
    A_of_t = lambda t: np.stack([np.cos(grid3d.coords()[0])] * 4)
    psi, A = _window(grid3d, psi_of_t, A_of_t)
    phi, B, gauge = se.generalized_gauge(psi, A)
    assert np.allclose(gauge.delta.values, -np.log(0.6))
    for b, a in zip(B, A):
        assert sup_norm((b - a).values) <= 1e-14


def test_gauge_round_trip_and_unit_first_component(grid3d):
    psi, A = _smooth_window(grid3d)
    phi, B, gauge = se.generalized_gauge(psi, A)
    assert np.all(phi[0].values == 1.0)
    for p, q in zip(psi, phi):
        assert sup_norm((q * psi[0] - p).values) <= 1e-14
    assert sup_norm(gauge.weight.values - np.abs(psi[0].values) ** 2) <= 1e-14


def test_imaginary_part_of_potential_is_curl_free(grid3d):
    psi, A = _smooth_window(grid3d)
    _, B, _ = se.generalized_gauge(psi, A)
    assert max(sup_norm(c.values) for c in se.imaginary_curl(B)) <= 1e-12


def test_field_strength_is_gauge_invariant(grid3d):
    """Lattice derivatives commute, so the complex gauge leaves F unchanged up to rounding."""
    psi, A = _smooth_window(grid3d, dt=0.25 * grid3d.h)
    _, B, _ = se.generalized_gauge(psi, A)
    FA, FB = chiral_f(A), chiral_f(B)
    assert max(sup_norm((fb - fa).values) for fa, fb in zip(FA, FB)) <= 1e-12


def test_current_scales_with_first_component(grid3d):
    """The spinor current is the gauge-fixed current weighted by |psi_1|^2."""
    psi, A = _smooth_window(grid3d)
    phi, _, gauge = se.generalized_gauge(psi, A)
    j_psi = current(psi)
    j_phi = current(phi)
    for a, b in zip(j_psi, j_phi):
        assert sup_norm((a - gauge.weight * b).values) <= 1e-13


def test_gauge_errors(grid3d):
    x = grid3d.coords()[0]
    wind = lambda t: rest_spinor()[:, None, None, None] * np.exp(1j * x)
    A_of_t = lambda t: np.zeros((4,) + grid3d.shape)
    with pytest.raises(WindingObstruction):
        se.generalized_gauge(*_window(grid3d, wind, A_of_t))
    zero = lambda t: np.zeros((4,) + grid3d.shape, dtype=complex)
    with pytest.raises(DegenerateField):
        se.generalized_gauge(*_window(grid3d, zero, A_of_t))


def test_lower_components_trivial(grid3d):
    dt = 0.1
    vals = np.array([2.0, 0.5, -0.3, 0.7])
    B = [Series(np.full((3,) + grid3d.shape, v, dtype=complex), grid3d, dt) for v in vals]
    phi2 = Series(np.zeros((3,) + grid3d.shape, dtype=complex), grid3d, dt)
    phi3, phi4 = se.phi34_from_B(B, phi2)
    assert np.allclose(phi3.center(), 2.0 - 0.7)
    assert np.allclose(phi4.center(), -(0.5 - 0.3j))


def test_weight_denominator_for_first_component_only(grid3d):
    psi, A = _smooth_window(grid3d)
    _, B, _ = se.generalized_gauge(psi, A)
    zero = B[0] * 0.0
    w = se.exp_neg2delta(B, [zero, zero, zero], background=0.4)
    assert sup_norm((w - (se.gauss_numerator(B) + 0.4)).values) <= 1e-14


def test_static_potential_is_degenerate(grid3d):
    B = np.ones((4,) + grid3d.shape, dtype=complex)
    with pytest.raises(DegenerateField):
        se.b_dddot_from_jet(B, np.zeros_like(B), np.zeros_like(B), grid3d)


def test_direct_third_derivative_of_cubic(grid3d):
    dt = 0.1
    t = dt * np.arange(5)
    s = Series(np.stack([np.full(grid3d.shape, tt ** 3 - tt ** 2) for tt in t]), grid3d, dt)
    assert np.allclose(se.direct_third_derivative([s]), 6.0)
    with pytest.raises(MissingSlices):
        se.direct_third_derivative([s.window(0.0, 3)])


def test_stack_wrapper_matches_jet(grid3d):
    psi, A = _smooth_window(grid3d, nt=5, dt=0.1)
    _, B, _ = se.generalized_gauge(psi, A)
    B = [b.window(b.t_center - 0.1, 3) for b in B]
    stack = TimeStack(dt=0.1)
    for k in range(3):
        stack.push(B[0].t0 + 0.1 * k, {n: b.values[k] for n, b in zip(se.B_NAMES, B)})
    out, jet = se.b_dddot(stack, grid3d, background=0.2)
    ref, ref_jet = se.b_dddot_from_jet(*se.jet_from_series(B), grid3d, 0.2)
    assert np.allclose(out, ref, atol=1e-12)
    assert set(jet) == {"phi2", "phi2_dot", "phi2_ddot", "phi3", "phi3_dot", "phi4", "phi4_dot",
                        "weight", "weight_dot", "current", "condition"}
    assert jet.condition == ref_jet.condition


def test_vacuum_standing_wave():
    """Without matter a divergence-free standing wave oscillates at the lattice frequency."""
    g = GridSpec.cubic(16, dim=3)
    x, y, z = g.coords()
    c = se.DMCouplings(e=1.0)
    psi = np.zeros((4,) + g.shape, dtype=complex)
    As = np.stack([np.cos(y), 0.0 * x, np.sin(x) + 0.0 * y])
    Ads = np.zeros_like(As)
    A, A_dot = se.complete_potential(psi, As, Ads, g, c)
    assert sup_norm(A[0]) <= 1e-12 and sup_norm(A_dot[0]) <= 1e-12
    omega = np.sin(g.h) / g.h  # wide Laplacian symbol for unit wavenumber
    dt, n = 0.05, 40
    for k in range(n):
        psi, A, A_dot = se.dm_coupled_step(psi, A, A_dot, dt, g, c, k * dt)
    assert sup_norm(A[1:] - As * np.cos(omega * n * dt)) <= 1e-6
    assert np.all(psi == 0)


def test_gauss_law_holds_along_the_flow():
    g = GridSpec.cubic(8, dim=3)
    psi, A, A_dot, c = se.SpinorPreset().initial_state(g)
    assert se.gauss_law_residual(psi, A, A_dot, g, c) <= 1e-8
    for k in range(5):
        psi, A, A_dot = se.dm_coupled_step(psi, A, A_dot, 0.25 * g.h, g, c, k * 0.25 * g.h)
    assert se.gauss_law_residual(psi, A, A_dot, g, c) <= 1e-8
    with pytest.raises(ValueError):
        se.SpinorPreset().initial_state(GridSpec.cubic(8))


@pytest.fixture(scope="module")
def checks():
    return {n: se.reconstruction_check(GridSpec.cubic(n, dim=3)) for n in (8, 12)}


def test_lorenz_residual_bounded_and_shrinking(checks):
    lor = [checks[n]["lorenz"] for n in (8, 12)]
    assert lor[1] < lor[0]
    assert lor[0] <= checks[8]["h"] ** 2


def test_reconstructed_fields_converge(checks):
    for key in ("phi2", "phi3", "phi4", "phi2_dot", "phi2_ddot", "weight"):
        a, b = checks[8][key], checks[12][key]
        assert b < a, key
    assert checks[12]["condition"] < 2.0
