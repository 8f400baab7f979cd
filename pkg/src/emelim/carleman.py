"""Linear embedding of a polynomial ODE in a truncated bosonic Fock space.

For ``xi' = F(xi)`` with ``F`` polynomial in ``k`` complex modes, the
unnormalised coherent state ``exp(xi . a^dagger)|0>`` evolves exactly under
the linear equation ``v' = M v`` with ``M = sum_i a_i^dagger F_i(a)``. In
normalised form the evolved vector is ``exp((|xi(t)|^2 - |xi_0|^2) / 2)``
times the coherent state at ``xi(t)``. Truncating the Fock space by total
occupation ``N_max`` turns this into a finite linear system whose distance
from the classical trajectory, :func:`embedding_gap`, shrinks as the cutoff
grows.

Fock vectors are plain complex arrays indexed by :class:`FockBasis`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
import scipy.sparse as sp

from .errors import AmplitudeTooLarge
from .lattice import rk4_step

AMPLITUDE_BOUND = 0.5


class FockBasis:
    """Occupation tuples ``(n_1, ..., n_k)`` with ``sum n_i <= n_max``.

    Ordered by total occupation, then lexicographically, so the vacuum is
    index 0 and each shell is a contiguous block.
    """

    def __init__(self, k, n_max):
        if k < 1 or n_max < 0:
            raise ValueError("need k >= 1 modes and n_max >= 0")
        self.k = int(k)
        self.n_max = int(n_max)
        states = []
        for total in range(self.n_max + 1):
            shell = [s for s in itertools.product(range(total + 1), repeat=self.k) if sum(s) == total]
            states.extend(sorted(shell, reverse=True))
        self.states = states
        self.index = {s: i for i, s in enumerate(states)}
        self.occupation = np.array(states, dtype=int).reshape(len(states), self.k)
        self.total = self.occupation.sum(axis=1)

    @property
    def dim(self):
        return len(self.states)

    @staticmethod
    def expected_dim(k, n_max):
        return comb(n_max + k, k)

    def vacuum(self):
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def __repr__(self):
        return f"FockBasis(k={self.k}, n_max={self.n_max}, dim={self.dim})"


def ladder_ops(basis):
    """Annihilation and creation matrices ``(a, a_dag)`` as lists of sparse CSR matrices.

    ``a_dag[i]`` maps the cutoff shell to zero; ``a_dag[i]`` is the exact
    adjoint of ``a[i]`` on the truncated space.
    """
    a = []
    for i in range(basis.k):
        rows, cols, vals = [], [], []
        for col, s in enumerate(basis.states):
            if s[i] > 0:
                t = s[:i] + (s[i] - 1,) + s[i + 1:]
                rows.append(basis.index[t])
                cols.append(col)
                vals.append(np.sqrt(s[i]))
        a.append(sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim), dtype=complex))
    return a, [op.conj().T.tocsr() for op in a]


def commutator(x, y):
    return (x @ y - y @ x).tocsr() if sp.issparse(x) else x @ y - y @ x


@dataclass
class PolyVectorField:
    """Polynomial ``F_i(xi) = sum_alpha c_{i,alpha} xi^alpha`` over ``k`` modes.

    ``terms[i]`` maps exponent tuples ``alpha`` (length ``k``) to complex
    coefficients.
    """

    terms: list
    max_degree: int = 3

    def __post_init__(self):
        self.terms = [{tuple(int(p) for p in e): complex(c) for e, c in t.items()} for t in self.terms]
        for t in self.terms:
            for e, c in t.items():
                if len(e) != self.k:
                    raise ValueError(f"exponent {e} does not have {self.k} entries")
                if sum(e) > self.max_degree:
                    raise ValueError(f"monomial degree {sum(e)} exceeds {self.max_degree}")
                if not np.isfinite(c):
                    raise ValueError("coefficients must be finite")

    @property
    def k(self):
        return len(self.terms)

    @property
    def degree(self):
        return max((sum(e) for t in self.terms for e in t), default=0)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=complex)
        out = np.zeros(self.k, dtype=complex)
        for i, t in enumerate(self.terms):
            for e, c in t.items():
                out[i] += c * np.prod(xi ** np.array(e))
        return out

    @classmethod
    def rotor(cls, omega, k=1):
        """``F_i = -i omega_i xi_i``."""
        omega = np.broadcast_to(np.asarray(omega, dtype=float), (k,))
        return cls([{_unit(k, i): -1j * omega[i]} for i in range(k)])

    @classmethod
    def quadratic_rotor(cls, omega=1.0, lam=0.1):
        """Single mode ``F = -i omega xi - i lam xi^2``."""
        return cls([{(1,): -1j * omega, (2,): -1j * lam}])

    @classmethod
    def lattice_chain(cls, k=3, omega=1.0, hop=0.2, lam=0.1):
        """``k`` modes on a ring: rotation, discrete-Laplacian hopping and a quadratic self term.

        ``F_i = -i (omega xi_i - hop (xi_{i+1} - 2 xi_i + xi_{i-1}) + lam xi_i^2)``.
        """
        terms = []
        for i in range(k):
            t = {}
            for j, c in ((i, omega + 2 * hop), ((i + 1) % k, -hop), ((i - 1) % k, -hop)):
                e = _unit(k, j)
                t[e] = t.get(e, 0.0) - 1j * c
            t[tuple(2 if j == i else 0 for j in range(k))] = -1j * lam
            terms.append(t)
        return cls(terms)


def _unit(k, i):
    return tuple(1 if j == i else 0 for j in range(k))


def _check_amplitude(xi, bound):
    norm = float(np.linalg.norm(xi))
    if norm > bound * (1.0 + 1e-12):
        raise AmplitudeTooLarge(f"|xi| = {norm:.4g} exceeds the amplitude bound {bound:.4g}")
    return norm


def coherent(xi, basis, bound=AMPLITUDE_BOUND):
    """Normalised coherent state ``exp(-|xi|^2/2) prod xi_i^{n_i} / sqrt(n_i!)`` on ``basis``."""
    xi = np.asarray(xi, dtype=complex).reshape(basis.k)
    norm = _check_amplitude(xi, bound)
    occ = basis.occupation
    fact = np.array([np.prod([factorial(n) for n in s]) for s in basis.states], dtype=float)
    amps = np.prod(xi[None, :] ** occ, axis=1) / np.sqrt(fact)
    return np.exp(-0.5 * norm ** 2) * amps


def poisson_tail(r2, n_max):
    """``exp(-r2) sum_{n > n_max} r2^n / n!``, the squared weight a truncated coherent state misses."""
    term, head = 1.0, 0.0
    for n in range(n_max + 1):
        head += term
        term *= r2 / (n + 1)
    return max(0.0, 1.0 - np.exp(-r2) * head)


def hamiltonian(F, basis):
    """``M = sum_i a_i^dagger F_i(a)`` with all annihilators to the right."""
    if F.k != basis.k:
        raise ValueError(f"vector field has {F.k} modes, basis has {basis.k}")
    a, a_dag = ladder_ops(basis)
    eye = sp.identity(basis.dim, dtype=complex, format="csr")
    M = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for i, t in enumerate(F.terms):
        Fi = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
        for e, c in t.items():
            mono = eye
            for j, p in enumerate(e):
                for _ in range(p):
                    mono = mono @ a[j]
            Fi = Fi + c * mono
        M = M + a_dag[i] @ Fi
    return M.tocsr()


def fock_evolve(v0, M, T, dt, keep=False):
    """RK4 integration of ``v' = M v`` up to time ``T``.

    The step is shrunk so that a whole number of steps lands on ``T``.
    Returns the final vector, or ``(times, trajectory)`` when ``keep`` is set.
    """
    n = max(1, int(np.ceil(T / dt - 1e-12)))
    h = T / n
    rhs = lambda v, t: M @ v
    v = np.asarray(v0, dtype=complex)
    traj = [v]
    for s in range(n):
        v = rk4_step(v, rhs, h, s * h)
        if keep:
            traj.append(v)
    if keep:
        return np.linspace(0.0, T, n + 1), np.array(traj)
    return v


@dataclass
class CoherentParams:
    """Classical amplitude ``xi`` and the log of the embedding prefactor."""

    xi: np.ndarray
    norm_log: float = 0.0
    times: np.ndarray = field(default=None, repr=False)
    history: np.ndarray = field(default=None, repr=False)


def classical_evolve(xi0, F, T, dt, bound=AMPLITUDE_BOUND):
    """RK4 trajectory of ``xi' = F(xi)`` with ``norm_log = (|xi(t)|^2 - |xi_0|^2) / 2``.

    Raises
    ------
    AmplitudeTooLarge
        The trajectory leaves the ball ``|xi| <= bound``.
    """
    xi = np.asarray(xi0, dtype=complex).reshape(F.k)
    r0 = _check_amplitude(xi, bound)
    n = max(1, int(np.ceil(T / dt - 1e-12)))
    h = T / n
    hist = [xi]
    for s in range(n):
        xi = rk4_step(xi, lambda x, t: F(x), h, s * h)
        _check_amplitude(xi, bound)
        hist.append(xi)
    norm_log = 0.5 * (float(np.vdot(xi, xi).real) - r0 ** 2)
    return CoherentParams(xi, norm_log, np.linspace(0.0, T, n + 1), np.array(hist))


def embedding_gap(v_t, cp, basis, bound=np.inf):
    """``|v_t - exp(norm_log) coherent(xi(t))|``, the distance from the classical image."""
    return float(np.linalg.norm(v_t - np.exp(cp.norm_log) * coherent(cp.xi, basis, bound)))


def gap_study(F, xi0, n_max_values, T=2.0, dt=0.01):
    """Embedding gap at time ``T`` for each cutoff in ``n_max_values``."""
    cp = classical_evolve(xi0, F, T, dt)
    out = []
    for n_max in n_max_values:
        basis = FockBasis(F.k, n_max)
        v = fock_evolve(coherent(xi0, basis), hamiltonian(F, basis), T, dt)
        out.append(embedding_gap(v, cp, basis))
    return out


@dataclass
class SuperpositionReport:
    """Deviations from superposition for each amplitude scale ``s``.

    ``fock``: ``|V(a xi + b eta) - vac - a (V(xi) - vac) - b (V(eta) - vac)|``
    with ``V`` the embedded evolution and ``vac`` the vacuum;
    ``field``: the same comparison for the classical trajectories.
    ``fock_exponent`` and ``field_exponent`` are least-squares slopes of
    ``log deviation`` against ``log s``.
    """

    scales: list
    fock: list
    field: list

    @staticmethod
    def _slope(s, d):
        d = np.asarray(d, dtype=float)
        if np.any(d <= 0):
            return float("nan")
        return float(np.polyfit(np.log(s), np.log(d), 1)[0])

    @property
    def fock_exponent(self):
        return self._slope(self.scales, self.fock)

    @property
    def field_exponent(self):
        return self._slope(self.scales, self.field)

    def reduction_factors(self, which="fock"):
        d = getattr(self, which)
        return [d[i] / d[i + 1] if d[i + 1] > 0 else float("inf") for i in range(len(d) - 1)]


def weak_superposition(a, b, xi, eta, F, T, basis, dt=0.01, scales=(1.0, 0.5, 0.25),
                       bound=AMPLITUDE_BOUND):
    """Superposition defect of embedded and classical evolution under amplitude scaling.

    For each ``s`` the initial amplitudes ``s xi`` and ``s eta`` are evolved
    separately and as ``s (a xi + b eta)``. In the Fock space the vacuum is
    subtracted from every evolved state before the combination is formed.
    """
    xi, eta = (np.asarray(v, dtype=complex).reshape(F.k) for v in (xi, eta))
    if abs(a) * np.linalg.norm(xi) + abs(b) * np.linalg.norm(eta) > bound:
        raise AmplitudeTooLarge("|a||xi| + |b||eta| exceeds the amplitude bound")
    M = hamiltonian(F, basis)
    vac = basis.vacuum()
    evolve = lambda z: fock_evolve(coherent(z, basis, bound), M, T, dt)
    fock, fld = [], []
    for s in scales:
        x, y = s * xi, s * eta
        both = a * x + b * y
        dev = (evolve(both) - vac) - a * (evolve(x) - vac) - b * (evolve(y) - vac)
        fock.append(float(np.linalg.norm(dev)))
        cl = lambda z: classical_evolve(z, F, T, dt, bound).xi
        fld.append(float(np.linalg.norm(cl(both) - a * cl(x) - b * cl(y))))
    return SuperpositionReport(list(scales), fock, fld)


def linearity_defect(M, v, w, alpha, beta, T, dt=0.01):
    """Relative gap between evolving ``alpha v + beta w`` and combining the evolved parts."""
    lhs = fock_evolve(alpha * v + beta * w, M, T, dt)
    rhs = alpha * fock_evolve(v, M, T, dt) + beta * fock_evolve(w, M, T, dt)
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny))


__all__ = [
    "AMPLITUDE_BOUND", "FockBasis", "ladder_ops", "commutator", "PolyVectorField", "coherent",
    "poisson_tail", "hamiltonian", "fock_evolve", "CoherentParams", "classical_evolve",
    "embedding_gap", "gap_study", "SuperpositionReport", "weak_superposition", "linearity_defect",
]
