"""Finite-difference calculus on periodic lattices.

Fields are plain numpy arrays whose shape equals ``GridSpec.shape``; a real
dtype marks a real-valued field and a complex dtype a complex-valued one.
Time dependence is carried by :class:`Series`, a window of consecutive time
slices with leading time axis. Every derivative is a second-order central
difference, and temporal derivatives shrink the window by one slice at each
end, so composed operators automatically report how many slices they consume.

Index conventions: axis 0 is time, axes 1..d are space, the metric is
diag(+1, -1, -1, -1).
"""

from __future__ import annotations

import math
import operator
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import linalg as spla

from .errors import (
    Degenerate,
    MissingSlices,
    NoConvergence,
    NonFiniteValue,
    UnsupportedOrder,
)

TWO_PI = 2.0 * np.pi
METRIC = np.array([1.0, -1.0, -1.0, -1.0])


@dataclass(frozen=True)
class GridSpec:
    """Periodic lattice with ``shape[i]`` points over a box of ``length[i]``."""

    shape: tuple
    length: tuple

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        length = tuple(float(x) for x in self.length)
        if len(shape) not in (1, 3):
            raise ValueError(f"spatial dimension must be 1 or 3, got {len(shape)}")
        if len(length) != len(shape):
            raise ValueError("shape and length must have the same number of axes")
        if min(shape) < 8:
            raise ValueError(f"need at least 8 points per axis, got {shape}")
        if min(length) <= 0:
            raise ValueError("box lengths must be positive")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "length", length)

    @classmethod
    def cubic(cls, n, length=TWO_PI, dim=1):
        return cls((n,) * dim, (length,) * dim)

    @property
    def dim(self):
        return len(self.shape)

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.length, self.shape))

    @property
    def h(self):
        """Largest lattice spacing; used for CFL-tied time steps."""
        return max(self.spacing)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def coords(self):
        """Site coordinates as an ``ij``-indexed meshgrid, one array per axis."""
        axes = [np.arange(n) * h for n, h in zip(self.shape, self.spacing)]
        return np.meshgrid(*axes, indexing="ij")

    def wavenumbers(self):
        """Angular wavenumbers of the FFT modes, broadcastable per axis."""
        ks = []
        for ax, (n, h) in enumerate(zip(self.shape, self.spacing)):
            k = TWO_PI * np.fft.fftfreq(n, d=h)
            shape = [1] * self.dim
            shape[ax] = n
            ks.append(k.reshape(shape))
        return ks


# ---------------------------------------------------------------------------
# spatial stencils on arrays (array_axis counts from the array's first axis)


def _central(f, array_axis, h):
    return (np.roll(f, -1, array_axis) - np.roll(f, 1, array_axis)) / (2.0 * h)


def _second(f, array_axis, h):
    return (np.roll(f, -1, array_axis) - 2.0 * f + np.roll(f, 1, array_axis)) / (h * h)


def partial(f, axis, grid):
    """Central difference along spatial ``axis`` (1-based, periodic).

    ``f`` may be a lattice array or a :class:`Series`; axis 0 is only
    available on a Series, because it needs neighbouring time slices.
    """
    if isinstance(f, Series):
        return f.d(axis)
    if axis == 0:
        raise MissingSlices("time derivative needs a Series or TimeStack with >= 3 slices")
    _check_axis(axis, grid)
    return _central(f, axis - 1, grid.spacing[axis - 1])


def second_partial(f, axis, grid):
    """Compact three-point second difference along spatial ``axis``."""
    if isinstance(f, Series):
        return f.d2(axis)
    if axis == 0:
        raise MissingSlices("time derivative needs a Series or TimeStack with >= 3 slices")
    _check_axis(axis, grid)
    return _second(f, axis - 1, grid.spacing[axis - 1])


def laplacian(f, grid, stencil="compact"):
    """Sum of spatial second differences.

    ``stencil="compact"`` uses the three-point stencil; ``"wide"`` applies the
    central first difference twice, which commutes exactly with
    :func:`partial` and keeps discrete divergence identities exact.
    """
    if isinstance(f, Series):
        return f.lap(stencil)
    out = np.zeros_like(f)
    for ax in range(1, grid.dim + 1):
        if stencil == "compact":
            out = out + second_partial(f, ax, grid)
        elif stencil == "wide":
            out = out + partial(partial(f, ax, grid), ax, grid)
        else:
            raise ValueError(f"unknown stencil {stencil!r}")
    return out


def laplacian_symbol(grid, stencil="compact"):
    """Eigenvalues of :func:`laplacian` on the FFT modes (all <= 0)."""
    sym = 0.0
    for k, h in zip(grid.wavenumbers(), grid.spacing):
        if stencil == "compact":
            sym = sym - (2.0 * np.sin(k * h / 2.0) / h) ** 2
        elif stencil == "wide":
            sym = sym - (np.sin(k * h) / h) ** 2
        else:
            raise ValueError(f"unknown stencil {stencil!r}")
    return np.broadcast_to(sym, grid.shape).copy()


def _check_axis(axis, grid):
    if not 1 <= axis <= grid.dim:
        raise ValueError(f"axis {axis} out of range for a {grid.dim}-d lattice")


def sup_norm(f):
    return float(np.max(np.abs(f))) if np.size(f) else 0.0


def l2_norm(f, grid):
    """Discrete L2 norm with the cell volume as quadrature weight."""
    return float(np.sqrt(np.sum(np.abs(f) ** 2) * grid.cell_volume))


# ---------------------------------------------------------------------------
# time windows


class Series:
    """Consecutive time slices ``values[n]`` at times ``t0 + n*dt``.

    Arithmetic between two Series keeps only their common time slices, so
    expressions built from derivatives of different orders line up by time
    without manual cropping. Plain arrays of lattice shape and scalars act as
    time-independent operands.
    """

    __array_priority__ = 100.0
    __array_ufunc__ = None

    def __init__(self, values, grid, dt, t0=0.0):
        values = np.asarray(values)
        if values.shape[1:] != grid.shape:
            raise ValueError(f"slice shape {values.shape[1:]} does not match grid {grid.shape}")
        if values.shape[0] < 1:
            raise MissingSlices("empty time window")
        self.values = values
        self.grid = grid
        self.dt = float(dt)
        self.t0 = float(t0)

    @classmethod
    def sample(cls, func, grid, dt, times):
        """Evaluate ``func(t)`` on each of ``times`` (uniform spacing ``dt``)."""
        times = np.asarray(times, dtype=float)
        return cls(np.stack([func(t) for t in times]), grid, dt, times[0])

    @property
    def nt(self):
        return self.values.shape[0]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.nt)

    @property
    def dtype(self):
        return self.values.dtype

    def __repr__(self):
        return f"Series(nt={self.nt}, t0={self.t0:.6g}, dt={self.dt:.6g}, grid={self.grid.shape})"

    # -- alignment -----------------------------------------------------

    def _offset(self, other):
        shift = (other.t0 - self.t0) / self.dt
        k = int(round(shift))
        if abs(shift - k) > 1e-6 or abs(other.dt - self.dt) > 1e-12 * max(1.0, self.dt):
            raise ValueError("Series are not on a common time lattice")
        return k

    def window(self, t_start, nt):
        k = int(round((t_start - self.t0) / self.dt))
        if k < 0 or k + nt > self.nt:
            raise MissingSlices(f"requested {nt} slices from t={t_start:.6g} outside {self!r}")
        return Series(self.values[k:k + nt], self.grid, self.dt, self.t0 + k * self.dt)

    def align(self, other):
        """Crop ``self`` and ``other`` to their common time slices."""
        k = self._offset(other)
        start = max(self.t0, other.t0)
        stop = min(self.times[-1], other.times[-1])
        nt = int(round((stop - start) / self.dt)) + 1
        if nt < 1:
            raise MissingSlices(f"no common time slices between {self!r} and {other!r}")
        del k
        return self.window(start, nt), other.window(start, nt)

    def _binary(self, other, op):
        if isinstance(other, Series):
            a, b = self.align(other)
            return Series(op(a.values, b.values), self.grid, self.dt, a.t0)
        return Series(op(self.values, other), self.grid, self.dt, self.t0)

    def _rbinary(self, other, op):
        return Series(op(other, self.values), self.grid, self.dt, self.t0)

    __add__ = lambda self, o: self._binary(o, operator.add)
    __sub__ = lambda self, o: self._binary(o, operator.sub)
    __mul__ = lambda self, o: self._binary(o, operator.mul)
    __truediv__ = lambda self, o: self._binary(o, operator.truediv)
    __pow__ = lambda self, o: self._binary(o, operator.pow)
    __radd__ = lambda self, o: self._rbinary(o, operator.add)
    __rsub__ = lambda self, o: self._rbinary(o, operator.sub)
    __rmul__ = lambda self, o: self._rbinary(o, operator.mul)
    __rtruediv__ = lambda self, o: self._rbinary(o, operator.truediv)

    def __neg__(self):
        return Series(-self.values, self.grid, self.dt, self.t0)

    def map(self, func):
        return Series(func(self.values), self.grid, self.dt, self.t0)

    def conj(self):
        return self.map(np.conj)

    @property
    def real(self):
        return self.map(np.real)

    @property
    def imag(self):
        return self.map(np.imag)

    def abs(self):
        return self.map(np.abs)

    # -- derivatives -----------------------------------------------------

    def d(self, mu):
        """Central first difference along ``mu`` (0 = time)."""
        if mu == 0:
            if self.nt < 3:
                raise MissingSlices(f"d/dt needs 3 slices, window has {self.nt}")
            v = (self.values[2:] - self.values[:-2]) / (2.0 * self.dt)
            return Series(v, self.grid, self.dt, self.t0 + self.dt)
        _check_axis(mu, self.grid)
        return Series(_central(self.values, mu, self.grid.spacing[mu - 1]),
                      self.grid, self.dt, self.t0)

    def d2(self, mu):
        """Compact second difference along ``mu`` (0 = time)."""
        if mu == 0:
            if self.nt < 3:
                raise MissingSlices(f"d2/dt2 needs 3 slices, window has {self.nt}")
            v = (self.values[2:] - 2.0 * self.values[1:-1] + self.values[:-2]) / self.dt ** 2
            return Series(v, self.grid, self.dt, self.t0 + self.dt)
        _check_axis(mu, self.grid)
        return Series(_second(self.values, mu, self.grid.spacing[mu - 1]),
                      self.grid, self.dt, self.t0)

    def lap(self, stencil="compact"):
        out = None
        for ax in range(1, self.grid.dim + 1):
            term = self.d2(ax) if stencil == "compact" else self.d(ax).d(ax)
            out = term if out is None else out + term
        return out

    def box(self, stencil="compact"):
        """d'Alembertian: second time difference minus the spatial Laplacian."""
        return self.d2(0) - self.lap(stencil)

    # -- access -------------------------------------------------------------

    def center(self):
        """The middle slice; the window must have an odd number of slices."""
        if self.nt % 2 == 0:
            raise MissingSlices(f"centre of an even window ({self.nt} slices) is ambiguous")
        return self.values[self.nt // 2]

    @property
    def t_center(self):
        return self.t0 + self.dt * (self.nt // 2)

    def at(self, t):
        k = int(round((t - self.t0) / self.dt))
        if not 0 <= k < self.nt or abs(self.t0 + k * self.dt - t) > 1e-6 * self.dt:
            raise MissingSlices(f"time {t:.6g} not in {self!r}")
        return self.values[k]


def stack_series(parts):
    """Combine equally windowed Series into one with a leading component axis."""
    aligned = list(parts)
    first = aligned[0]
    for p in aligned[1:]:
        first, _ = first.align(p)
    out = [p.window(first.t0, first.nt).values for p in aligned]
    return np.stack(out, axis=0), first.t0, first.nt


_TIME_STENCILS = {
    1: np.array([-0.5, 0.0, 0.5]),
    2: np.array([1.0, -2.0, 1.0]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
    4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}


def stencil_width(order):
    if order not in _TIME_STENCILS:
        raise UnsupportedOrder(f"temporal derivative order {order} not supported (1..4)")
    return len(_TIME_STENCILS[order])


@dataclass
class TimeStack:
    """Rolling window of the most recent time slices of a named field set."""

    dt: float
    capacity: int = 7
    times: deque = field(default_factory=deque)
    slices: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.capacity < 7:
            raise ValueError("TimeStack capacity must be at least 7")

    def __len__(self):
        return len(self.slices)

    def push(self, t, fields):
        if self.times:
            gap = t - self.times[-1]
            if abs(gap - self.dt) > 1e-12 * max(1.0, abs(t)) + 1e-12 * self.dt * 1e3:
                raise ValueError(f"slice at t={t} breaks uniform spacing dt={self.dt}")
        self.times.append(float(t))
        self.slices.append({k: np.asarray(v) for k, v in fields.items()})
        while len(self.slices) > self.capacity:
            self.times.popleft()
            self.slices.popleft()

    def series(self, name, grid):
        if not self.slices:
            raise MissingSlices("stack is empty")
        values = np.stack([s[name] for s in self.slices])
        return Series(values, grid, self.dt, self.times[0])

    def middle(self, name):
        return self.slices[len(self.slices) // 2][name]

    @property
    def t_middle(self):
        return self.times[len(self.times) // 2]


def time_derivative(stack, name, order):
    """Second-order central estimate of the ``order``-th time derivative.

    Evaluated at the middle slice of ``stack`` (a :class:`TimeStack`).
    """
    weights = _TIME_STENCILS.get(order)
    if weights is None:
        raise UnsupportedOrder(f"temporal derivative order {order} not supported (1..4)")
    n = len(stack)
    width = len(weights)
    if n < width:
        raise MissingSlices(f"order {order} needs {width} slices, stack holds {n}")
    mid = n // 2
    lo = mid - width // 2
    if lo < 0 or lo + width > n:
        raise MissingSlices(f"order {order} stencil does not fit around the middle slice")
    out = 0.0
    for w, k in zip(weights, range(lo, lo + width)):
        if w:
            out = out + w * stack.slices[k][name]
    return out / stack.dt ** order


# ---------------------------------------------------------------------------
# time integration


def _tmap(f, *states):
    if isinstance(states[0], tuple):
        return tuple(_tmap(f, *parts) for parts in zip(*states))
    return f(*states)


def _all_finite(state):
    if isinstance(state, tuple):
        return all(_all_finite(s) for s in state)
    return bool(np.all(np.isfinite(state)))


def rk4_step(state, rhs, dt, t=0.0):
    """Classical Runge-Kutta step for ``d state/dt = rhs(state, t)``.

    ``state`` is an array or a (nested) tuple of arrays.
    """
    k1 = rhs(state, t)
    k2 = rhs(_tmap(lambda s, k: s + 0.5 * dt * k, state, k1), t + 0.5 * dt)
    k3 = rhs(_tmap(lambda s, k: s + 0.5 * dt * k, state, k2), t + 0.5 * dt)
    k4 = rhs(_tmap(lambda s, k: s + dt * k, state, k3), t + dt)
    new = _tmap(lambda s, a, b, c, d: s + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d),
                state, k1, k2, k3, k4)
    if not _all_finite(new):
        raise NonFiniteValue(f"non-finite value after RK4 step at t={t + dt:.6g}")
    return new


# ---------------------------------------------------------------------------
# elliptic solves


def helmholtz_solve(rhs, coeff, grid, tol=1e-10, stencil="compact", maxiter=500,
                    null_space="raise"):
    """Solve ``(laplacian + coeff) u = rhs`` on the periodic lattice.

    Constant ``coeff`` is solved directly in Fourier space. Variable ``coeff``
    uses a Krylov method (CG when ``coeff <= 0`` makes the operator negative
    definite, GMRES otherwise) preconditioned by the exact inverse of the
    constant-coefficient operator with ``coeff`` replaced by its mean. Exact
    null modes are fixed to zero amplitude (zero-mean convention for the
    constant mode).

    With ``null_space="project"`` and constant ``coeff``, right-hand-side
    components along exact null modes are discarded instead of raising, and
    the residual is measured against the projected right-hand side. This is
    how a Poisson problem with the wide Laplacian (null modes at zero and at
    the Nyquist wavenumbers) is solved for smooth but not band-limited data.

    Raises
    ------
    Degenerate
        The right-hand side excites a (near) null mode.
    NoConvergence
        ``||(laplacian + coeff) u - rhs||_inf <= tol`` not reached.
    """
    rhs = np.asarray(rhs, dtype=float)
    coeff = np.broadcast_to(np.asarray(coeff, dtype=float), grid.shape)
    sym = laplacian_symbol(grid, stencil)
    cbar = float(coeff.mean())
    psym = sym + cbar
    scale = max(float(np.abs(sym).max()), abs(cbar), 1e-300)
    null = np.abs(psym) < 1e-12 * scale
    near = (np.abs(psym) < 1e-8 * scale) & ~null

    def apply(u):
        return laplacian(u, grid, stencil) + coeff * u

    rhs_hat = np.fft.fftn(rhs)
    rhs_scale = max(float(np.abs(rhs_hat).max()), 1e-300)
    constant = float(np.ptp(coeff)) <= 1e-14 * max(1.0, abs(cbar))

    if constant:
        if np.any(near & (np.abs(rhs_hat) > 1e-10 * rhs_scale)):
            raise Degenerate("operator has a near-zero mode excited by the right-hand side")
        if null_space == "project":
            rhs = np.real(np.fft.ifftn(np.where(null, 0.0, rhs_hat)))
        elif np.any(null & (np.abs(rhs_hat) > 1e-10 * rhs_scale + 1e-12 * grid.size)):
            raise Degenerate("right-hand side has a component along the operator's null space")
        inv = np.where(null, 0.0, 1.0 / np.where(null, 1.0, psym))
        u = np.real(np.fft.ifftn(rhs_hat * inv))
        res = sup_norm(apply(u) - rhs)
        if res > tol:
            raise NoConvergence(f"direct Fourier solve residual {res:.3e} > tol {tol:.3e}")
        return u

    if np.any(null | near):
        raise Degenerate("mean-coefficient preconditioner is singular; operator near-degenerate")
    inv = 1.0 / psym
    n = grid.size
    A = spla.LinearOperator((n, n), matvec=lambda v: apply(v.reshape(grid.shape)).ravel(),
                            dtype=float)
    M = spla.LinearOperator(
        (n, n), dtype=float,
        matvec=lambda v: np.real(np.fft.ifftn(np.fft.fftn(v.reshape(grid.shape)) * inv)).ravel())
    definite = bool(np.all(coeff <= 0.0))

    u = np.real(np.fft.ifftn(rhs_hat * inv))
    used = 0
    while True:
        r = rhs - apply(u)
        res = sup_norm(r)
        if res <= tol:
            return u
        if used >= maxiter:
            raise NoConvergence(f"helmholtz_solve residual {res:.3e} > tol {tol:.3e} "
                                f"after {used} iterations")
        budget = maxiter - used
        counter = _Counter()
        if definite:
            # CG on the SPD operator -A with SPD preconditioner -M
            negA = spla.LinearOperator((n, n), matvec=lambda v: -A.matvec(v), dtype=float)
            negM = spla.LinearOperator((n, n), matvec=lambda v: -M.matvec(v), dtype=float)
            du, _ = spla.cg(negA, -r.ravel(), rtol=1e-14, atol=0.1 * tol, maxiter=budget,
                            M=negM, callback=counter)
        else:
            du, _ = spla.gmres(A, r.ravel(), rtol=1e-14, atol=0.1 * tol, maxiter=budget,
                               restart=min(50, n), M=M, callback=counter,
                               callback_type="pr_norm")
        used += max(counter.n, 1)
        u = u + du.reshape(grid.shape)


class _Counter:
    def __init__(self):
        self.n = 0

    def __call__(self, *_):
        self.n += 1


# ---------------------------------------------------------------------------
# smooth random fields


class SmoothRandomField:
    """Band-limited random field ``sum_k c_k exp(i(k.x - w_k t))``.

    Wavevectors have integer components (in units of 2*pi/L) with absolute
    value at most ``modes``; amplitudes decay like 1/(1+|k|^2) so the fields
    are smooth; frequencies ``w_k`` are uniform in [-max_freq, max_freq].
    Real fields keep the real part.
    """

    def __init__(self, grid, rng, modes=2, amplitude=1.0, complex_valued=True, max_freq=1.0,
                 offset=0.0):
        self.grid = grid
        self.complex_valued = complex_valued
        self.offset = offset
        ranges = [range(-modes, modes + 1)] * grid.dim
        ks = np.array(np.meshgrid(*ranges, indexing="ij")).reshape(grid.dim, -1).T
        self.kvec = ks * (TWO_PI / np.array(grid.length))
        weight = amplitude / (1.0 + np.sum(ks ** 2, axis=1))
        self.coef = weight * (rng.standard_normal(len(ks)) + 1j * rng.standard_normal(len(ks)))
        self.coef /= math.sqrt(len(ks))
        self.freq = rng.uniform(-max_freq, max_freq, size=len(ks))
        self._x = grid.coords()

    def __call__(self, t=0.0):
        phase = sum(k[:, None] * x.ravel()[None, :] for k, x in zip(self.kvec.T, self._x))
        vals = (self.coef * np.exp(-1j * self.freq * t)) @ np.exp(1j * phase)
        vals = vals.reshape(self.grid.shape) + self.offset
        return vals if self.complex_valued else vals.real.copy()
