"""Component-wise Dirac machinery in an external electromagnetic field.

The Dirac equation ``(i gamma^mu d_mu - gamma^mu A_mu - 1) psi = 0`` is written
for the four components of ``psi`` in a chiral basis whose ``gamma^0`` has
``-I`` off-diagonal blocks. Two lower components are algebraic in the upper
two, ``psi_2`` is algebraic in ``psi_1`` wherever ``iF^1 + F^2`` is nonzero,
and ``psi_1`` alone obeys a fourth-order equation.

Fields on a time window are :class:`~emelim.lattice.Series` objects. A
spinor is a sequence of four Series and a potential a sequence of four Series
holding the contravariant components ``A^mu`` (charge absorbed). Every
operator below trims the time window as its stencils require, so results are
defined on fewer slices than the inputs.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import DegenerateField, MissingSlices
from .lattice import Series, rk4_step, sup_norm

I2 = np.eye(2)
Z2 = np.zeros((2, 2))
PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)
METRIC = np.diag([1.0, -1.0, -1.0, -1.0])


def gammas():
    """The four gamma matrices as an array of shape ``(4, 4, 4)``.

    ``gamma^0 = [[0, -I], [-I, 0]]`` and ``gamma^i = [[0, s_i], [-s_i, 0]]``.
    """
    g = np.zeros((4, 4, 4), dtype=complex)
    g[0] = np.block([[Z2, -I2], [-I2, Z2]])
    for i in range(3):
        g[i + 1] = np.block([[Z2, PAULI[i]], [-PAULI[i], Z2]])
    return g


GAMMA = gammas()
ALPHA = np.array([GAMMA[0] @ GAMMA[i] for i in range(1, 4)])


def rest_spinor():
    """Unit spinor with ``gamma^0 u = u`` and nonzero first component.

    Obtained by projecting the first basis vector onto the ``+1`` eigenspace
    of ``gamma^0``; ``u exp(-i t)`` then solves the free equation at rest.
    """
    e1 = np.zeros(4, dtype=complex)
    e1[0] = 1.0
    u = 0.5 * (e1 + GAMMA[0] @ e1)
    return u / np.linalg.norm(u)


# ---------------------------------------------------------------------------
# series helpers


def sample_fields(func, grid, dt, times):
    """Sample ``func(t) -> array (k, *grid.shape)`` into a list of ``k`` Series."""
    times = np.asarray(times, dtype=float)
    values = np.stack([np.asarray(func(t)) for t in times], axis=1)
    return [Series(v, grid, dt, times[0]) for v in values]


def from_stack(stack, names, grid):
    """Series for each of ``names`` from a :class:`~emelim.lattice.TimeStack`."""
    return [stack.series(n, grid) for n in names]


def _dot_metric(a, b):
    return a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]


# ---------------------------------------------------------------------------
# field strength


def field_tensor(A):
    """``F^{mu nu} = d^mu A^nu - d^nu A^mu`` as a 4x4 nested list of Series.

    Indices are raised with ``diag(1, -1, -1, -1)`` so ``d^i = -d_i``.
    """
    up = [[METRIC[m, m] * A[n].d(m) for n in range(4)] for m in range(4)]
    return [[up[m][n] - up[n][m] for n in range(4)] for m in range(4)]


def chiral_f(A):
    """``F^i = E^i + i H^i`` with ``E = -grad A^0 - dA/dt`` and ``H = curl A``.

    Returns three complex Series.
    """
    E = [-A[0].d(i) - A[i].d(0) for i in (1, 2, 3)]
    H = [A[3].d(2) - A[2].d(3), A[1].d(3) - A[3].d(1), A[2].d(1) - A[1].d(2)]
    return [E[k] + 1j * H[k] for k in range(3)]


def electric_magnetic(A):
    """``(E, H)`` read off the field tensor: ``E^i = F^{i0}``, ``H^1 = F^{32}``..."""
    F = field_tensor(A)
    E = [F[i][0] for i in (1, 2, 3)]
    H = [F[3][2], F[1][3], F[2][1]]
    return E, H


# ---------------------------------------------------------------------------
# Dirac equation


def dirac_residual(psi, A):
    """Left minus right-hand sides of the four component equations.

    Equals ``(i gamma^mu d_mu - gamma^mu A_mu - 1) psi`` component by
    component.
    """
    p1, p2, p3, p4 = psi
    A0, A1, A2, A3 = A
    r1 = ((A0 + A3) * p3 + (A1 - 1j * A2) * p4
          + 1j * (p3.d(3) - 1j * p4.d(2) + p4.d(1) - p3.d(0)) - p1)
    r2 = ((A1 + 1j * A2) * p3 + (A0 - A3) * p4
          - 1j * (p4.d(3) - 1j * p3.d(2) - p3.d(1) + p4.d(0)) - p2)
    r3 = ((A0 - A3) * p1 - (A1 - 1j * A2) * p2
          - 1j * (p1.d(3) - 1j * p2.d(2) + p2.d(1) + p1.d(0)) - p3)
    r4 = (-(A1 + 1j * A2) * p1 + (A0 + A3) * p2 + 1j * p2.d(3) + p1.d(2)
          - 1j * (p1.d(1) + p2.d(0)) - p4)
    return [r1, r2, r3, r4]


def spatial_derivative(f, axis, h):
    """Periodic central difference of a plain array along array axis ``axis``."""
    return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2.0 * h)


def dirac_time_derivative(psi, A, grid):
    """``d psi/dt = -alpha^i D_i psi - i (A^0 - alpha^i A^i) psi - i gamma^0 psi``.

    ``psi`` has shape ``(4, *grid.shape)`` and ``A`` the contravariant
    components with shape ``(4, *grid.shape)``.
    """
    out = -1j * np.einsum("ab,b...->a...", GAMMA[0], psi) - 1j * A[0] * psi
    for i in range(3):
        dpsi = spatial_derivative(psi, i + 1, grid.spacing[i])
        out -= np.einsum("ab,b...->a...", ALPHA[i], dpsi)
        out += 1j * A[i + 1] * np.einsum("ab,b...->a...", ALPHA[i], psi)
    return out


def dirac_step(psi, A_of_t, dt, grid, t=0.0):
    """One RK4 step of the Dirac equation in the external potential ``A_of_t(t)``."""
    if grid.dim != 3:
        raise ValueError("the Dirac equation is evolved on a 3-d lattice")
    return rk4_step(psi, lambda s, tt: dirac_time_derivative(s, A_of_t(tt), grid), dt, t)


def evolve_dirac(psi0, A_of_t, dt, n_steps, grid, t0=0.0, keep=None):
    """Evolve ``n_steps``; returns the slices whose step index is in ``keep`` (all if None)."""
    psi, t = np.asarray(psi0, dtype=complex), t0
    out = {}
    if keep is None or 0 in keep:
        out[0] = psi
    for n in range(1, n_steps + 1):
        psi = dirac_step(psi, A_of_t, dt, grid, t)
        t = t0 + n * dt
        if keep is None or n in keep:
            out[n] = psi
    return out


# ---------------------------------------------------------------------------
# elimination


def lower_components(psi1, psi2, A):
    """``(psi_3, psi_4)`` from the third and fourth component equations."""
    A0, A1, A2, A3 = A
    psi3 = ((A0 - A3) * psi1 - (A1 - 1j * A2) * psi2
            - 1j * (psi1.d(3) - 1j * psi2.d(2) + psi2.d(1) + psi1.d(0)))
    psi4 = (-(A1 + 1j * A2) * psi1 + (A0 + A3) * psi2 + 1j * psi2.d(3) + psi1.d(2)
            - 1j * (psi1.d(1) + psi2.d(0)))
    return psi3, psi4


def box_prime(f, A):
    """``(d^mu d_mu + 2i A^mu d_mu + i A^mu_{,mu} - A^mu A_mu + 1) f``."""
    box = f.d2(0) - f.lap("compact")
    transport = A[0] * f.d(0) + A[1] * f.d(1) + A[2] * f.d(2) + A[3] * f.d(3)
    div = A[0].d(0) + A[1].d(1) + A[2].d(2) + A[3].d(3)
    AA = _dot_metric(A, A)
    return box + 2j * transport + (1j * div - AA + 1.0) * f


def coupling_field(F, eps_rel=1e-8, eps_abs=1e-10, time=None):
    """``iF^1 + F^2``, checked to stay away from zero.

    Raises
    ------
    DegenerateField
        ``|iF^1 + F^2| < max(eps_rel * max|iF^1 + F^2|, eps_abs)`` at some site.
    """
    G = 1j * F[0] + F[1]
    mag = np.abs(G.values)
    floor = max(eps_rel * float(mag.max()), eps_abs)
    if np.any(mag < floor):
        idx = np.unravel_index(np.argmin(mag), mag.shape)
        raise DegenerateField(f"|iF1 + F2| = {mag[idx]:.3e} below {floor:.3e}",
                              site=idx[1:], time=G.t0 + idx[0] * G.dt)
    return G


def psi2_from_psi1(psi1, A, eps_rel=1e-8, eps_abs=1e-10):
    """``psi_2 = -(iF^1 + F^2)^{-1} (box' + iF^3) psi_1``."""
    F = chiral_f(A)
    G = coupling_field(F, eps_rel, eps_abs)
    return -(box_prime(psi1, A) + 1j * F[2] * psi1) / G


def fourth_order_residual(psi1, A, eps_rel=1e-8, eps_abs=1e-10):
    """``((box' - iF^3)(iF^1 + F^2)^{-1}(box' + iF^3) - iF^1 + F^2) psi_1``.

    The inverse is a pointwise division applied between the two operator
    applications. Needs seven time slices for one output slice.
    """
    F1, F2, F3 = chiral_f(A)
    G = coupling_field((F1, F2, F3), eps_rel, eps_abs)
    inner = (box_prime(psi1, A) + 1j * F3 * psi1) / G
    return box_prime(inner, A) - 1j * F3 * inner + (-1j * F1 + F2) * psi1


def first_pair_equation(psi1, psi2, A):
    """Left-hand side of the first reduced equation (``psi_3``, ``psi_4`` eliminated).

    Written out in potentials and their derivatives, independently of
    :func:`box_prime` and :func:`chiral_f`.
    """
    A0, A1, A2, A3 = A
    d = lambda m, n: A[m].d(n)  # A^m_{,n}
    div = d(0, 0) + d(1, 1) + d(2, 2) + d(3, 3)
    AA = A0 * A0 - A1 * A1 - A2 * A2 - A3 * A3
    box1 = psi1.d2(0) - psi1.lap("compact")
    c2 = (-1j * d(1, 3) - d(2, 3) + d(0, 2) + d(3, 2)
          + 1j * (d(0, 1) + d(3, 1) + d(1, 0)) + d(2, 0))
    c1 = -1.0 + AA - 1j * div + 1j * d(0, 3) - d(1, 2) + d(2, 1) + 1j * d(3, 0)
    transport = A0 * psi1.d(0) + A1 * psi1.d(1) + A2 * psi1.d(2) + A3 * psi1.d(3)
    return -box1 + psi2 * c2 + psi1 * c1 - 2j * transport


def second_pair_equation(psi1, psi2, A):
    """Left-hand side ``delta`` of the second reduced equation, written out in potentials."""
    A0, A1, A2, A3 = A
    d = lambda m, n: A[m].d(n)
    div = d(0, 0) + d(1, 1) + d(2, 2) + d(3, 3)
    AA = A0 * A0 - A1 * A1 - A2 * A2 - A3 * A3
    box2 = psi2.d2(0) - psi2.lap("compact")
    c1 = 1j * (d(1, 3) + 1j * d(2, 3) + 1j * d(0, 2) - 1j * d(3, 2) + d(0, 1) - d(3, 1)
               + d(1, 0) + 1j * d(2, 0))
    c2 = -1.0 + AA - 1j * (div + d(0, 3) + 1j * d(1, 2) - 1j * d(2, 1) + d(3, 0))
    transport = A0 * psi2.d(0) + A1 * psi2.d(1) + A2 * psi2.d(2) + A3 * psi2.d(3)
    return -box2 + psi1 * c1 + psi2 * c2 - 2j * transport


def fourth_order_via_psi2(psi1, A, eps_rel=1e-8, eps_abs=1e-10):
    """Same quantity as :func:`fourth_order_residual`, composed as
    ``delta(psi_1, psi_2)`` with ``psi_2`` from :func:`psi2_from_psi1`."""
    psi2 = psi2_from_psi1(psi1, A, eps_rel, eps_abs)
    return second_pair_equation(psi1, psi2, A)


# ---------------------------------------------------------------------------
# currents


def current(psi):
    """``j^mu = psi^dagger gamma^0 gamma^mu psi`` (real).

    ``psi`` is either an array of shape ``(4, ...)`` or a list of four Series;
    the result has the matching form.
    """
    if isinstance(psi[0], Series):
        out = []
        for mu in range(4):
            M = GAMMA[0] @ GAMMA[mu]
            acc = None
            for a in range(4):
                for b in range(4):
                    if M[a, b] != 0:
                        term = psi[a].conj() * psi[b] * M[a, b]
                        acc = term if acc is None else acc + term
            out.append(acc.real)
        return out
    psi = np.asarray(psi)
    return np.stack([np.real(np.einsum("a...,ab,b...->...", psi.conj(), GAMMA[0] @ GAMMA[mu], psi))
                     for mu in range(4)])


def lowered(j):
    """Lower the index of a four-vector (list of Series or array)."""
    return [METRIC[m, m] * j[m] for m in range(4)]


def current_divergence(j):
    """``d_mu j^mu`` by central differences; ``j`` is a list of four Series."""
    return j[0].d(0) + j[1].d(1) + j[2].d(2) + j[3].d(3)


def bar_contract(psi, chi):
    """``psi-bar chi = psi^dagger gamma^0 chi`` for lists of Series."""
    g0 = GAMMA[0]
    acc = None
    for a in range(4):
        for b in range(4):
            if g0[a, b] != 0:
                term = psi[a].conj() * chi[b] * g0[a, b]
                acc = term if acc is None else acc + term
    return acc


def conservation_identity_gap(psi, A):
    """``d_mu j^mu - 2 Im(psi-bar (i dslash - Aslash - 1) psi)``.

    Vanishes in the continuum for every smooth ``psi`` and real ``A``; on the
    lattice it is a second-order truncation error.
    """
    div = current_divergence(current(psi))
    R = dirac_residual(psi, A)
    return div - 2.0 * bar_contract(psi, R).imag


class SplitCheck:
    """Result of :func:`conservation_split_check`."""

    def __init__(self, re_part, im_gap, mask):
        self.re_part = re_part
        self.im_gap = im_gap
        self.mask = mask

    @property
    def coverage(self):
        return float(np.mean(self.mask))

    def im_gap_norm(self):
        return sup_norm(np.where(self.mask, self.im_gap, 0.0))

    def re_part_norm(self):
        return sup_norm(np.where(self.mask, self.re_part, 0.0))


def conservation_split_check(psi1, A, eps_psi=1e-8, eps_rel=1e-8, eps_abs=1e-10):
    """Split current conservation into ``Im(psi_4^* delta)`` and ``Re(psi_4^* delta)``.

    ``psi_2`` comes from :func:`psi2_from_psi1` and ``(psi_3, psi_4)`` from
    :func:`lower_components`, so the first, third and fourth component
    equations hold and only ``delta`` (the second) remains. Returns a
    :class:`SplitCheck` evaluated on the centre slice; sites with
    ``|psi_4| < eps_psi`` are masked out of the norms.
    """
    psi2 = psi2_from_psi1(psi1, A, eps_rel, eps_abs)
    psi3, psi4 = lower_components(psi1, psi2, A)
    delta = second_pair_equation(psi1, psi2, A)
    div = current_divergence(current([psi1, psi2, psi3, psi4]))
    prod = psi4.conj() * delta
    im_gap = (-2.0 * prod.imag - div)
    re_part = 2.0 * prod.real
    p4 = psi4.window(im_gap.t0, im_gap.nt)
    t = im_gap.t_center
    mask = np.abs(p4.at(t)) >= eps_psi
    return SplitCheck(re_part.at(t), im_gap.at(t), mask)


# ---------------------------------------------------------------------------
# gauge


def wrapped_phase_derivative(z, mu):
    """Central difference of ``arg z`` along ``mu`` without branch cuts.

    Uses ``arg(z(x+h) conj z(x-h)) / (2h)``, the exact central difference of
    the continuous phase whenever the phase changes by less than ``pi`` over
    two lattice spacings.
    """
    v = z.values
    if mu == 0:
        if z.nt < 3:
            raise MissingSlices("time derivative needs 3 slices")
        ang = np.angle(v[2:] * np.conj(v[:-2])) / (2.0 * z.dt)
        return Series(ang, z.grid, z.dt, z.t0 + z.dt)
    h = z.grid.spacing[mu - 1]
    ang = np.angle(np.roll(v, -1, mu) * np.conj(np.roll(v, 1, mu))) / (2.0 * h)
    return Series(ang, z.grid, z.dt, z.t0)


def winding_numbers(z):
    """Net winding of ``arg z`` around each periodic spatial axis (max over lines)."""
    v = z.values
    out = []
    for mu in range(1, z.grid.dim + 1):
        steps = np.angle(np.roll(v, -1, mu) * np.conj(v))
        w = np.rint(np.sum(steps, axis=mu) / (2.0 * np.pi)).astype(int)
        out.append(int(np.max(np.abs(w))))
    return out


def unwrap_time(z):
    """Phase of ``z`` unwrapped along the time axis, anchored at the first slice."""
    return np.unwrap(np.angle(z.values), axis=0)


def make_real_gauge(psi, A, eps_psi=1e-8):
    """Gauge transform making ``psi_1`` real and non-negative.

    Returns ``(psi', A', alpha)`` with ``alpha = -arg psi_1``,
    ``psi' = exp(i alpha) psi`` and ``A'_mu = A_mu - alpha_{,mu}``. A phase
    that winds around a periodic axis admits no single-valued ``alpha``; the
    transform is still returned (it is valid locally) with a warning.
    """
    p1 = psi[0]
    if np.min(np.abs(p1.values)) < eps_psi:
        idx = np.unravel_index(np.argmin(np.abs(p1.values)), p1.values.shape)
        raise DegenerateField("|psi_1| too small for a phase gauge", site=idx[1:],
                              time=p1.t0 + idx[0] * p1.dt)
    if any(winding_numbers(p1)):
        warnings.warn("phase of psi_1 winds around the periodic box; the real gauge is only local",
                      RuntimeWarning, stacklevel=2)
    alpha = Series(-unwrap_time(p1), p1.grid, p1.dt, p1.t0)
    rot = alpha.map(lambda a: np.exp(1j * a))
    new_psi = [rot * p for p in psi]
    dalpha = [-wrapped_phase_derivative(p1, mu) for mu in range(4)]
    # A'^mu = A^mu - d^mu alpha
    new_A = [A[mu] - METRIC[mu, mu] * dalpha[mu] for mu in range(4)]
    return new_psi, new_A, alpha


__all__ = [
    "gammas", "rest_spinor", "sample_fields", "from_stack", "field_tensor", "chiral_f",
    "electric_magnetic", "dirac_residual", "dirac_time_derivative", "dirac_step",
    "evolve_dirac", "lower_components", "box_prime", "coupling_field", "psi2_from_psi1",
    "fourth_order_residual", "first_pair_equation", "second_pair_equation",
    "fourth_order_via_psi2", "current", "lowered", "current_divergence", "bar_contract",
    "conservation_identity_gap", "SplitCheck", "conservation_split_check",
    "wrapped_phase_derivative", "winding_numbers", "unwrap_time", "make_real_gauge",
]
