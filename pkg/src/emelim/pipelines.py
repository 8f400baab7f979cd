"""Verification studies over refinement levels, shared by the CLI and the test suite.

Every study returns a :class:`StudyResult` holding one :class:`Record` per
measured metric and one :class:`Check` per acceptance bound. Module errors
raised inside a study are re-raised as :class:`PipelineError` naming the
study and refinement level; the original error stays attached as
``__cause__``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import carleman as cm
from . import dirac_elim as de
from . import scalar_ed as sc
from . import spinor_ed as sp
from .convergence import convergence_report
from .errors import ConfigError, EmelimError, PipelineError
from .lattice import (
    GridSpec,
    Series,
    SmoothRandomField,
    laplacian,
    partial,
    second_partial,
    sup_norm,
)


@dataclass
class Record:
    experiment: str
    level: float
    h: float
    dt: float
    metric: str
    value: float
    wall_time: float = 0.0


@dataclass
class Check:
    name: str
    measured: object
    bound: object
    passed: bool

    def as_dict(self):
        return {"measured": self.measured, "bound": self.bound, "pass": bool(self.passed)}


@dataclass
class StudyResult:
    experiment: str
    records: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def values(self, metric):
        """``(levels, values)`` of one metric in recording order."""
        rows = [r for r in self.records if r.metric == metric]
        return [r.level for r in rows], [r.value for r in rows]

    def summary(self):
        return {c.name: c.as_dict() for c in self.checks}


class _Study:
    """Accumulates records and checks, applying tolerance overrides by check name."""

    def __init__(self, experiment, bounds, overrides=None):
        self.result = StudyResult(experiment)
        self.bounds = dict(bounds)
        for k, v in (overrides or {}).items():
            if k not in self.bounds:
                raise ConfigError(f"unknown tolerance '{k}' for {experiment}; "
                                  f"known: {sorted(self.bounds)}")
            self.bounds[k] = v

    def record(self, level, h, dt, metric, value, wall):
        self.result.records.append(
            Record(self.result.experiment, level, float(h), float(dt), metric, float(value), wall))

    def at_most(self, name, measured):
        b = self.bounds[name]
        self._add(name, measured, b, measured <= b)

    def at_least(self, name, measured):
        b = self.bounds[name]
        self._add(name, measured, b, measured >= b)

    def between(self, name, measured):
        lo, hi = self.bounds[name]
        self._add(name, measured, [lo, hi], lo <= measured <= hi)

    def truth(self, name, measured, passed):
        self._add(name, measured, self.bounds.get(name), passed)

    def _add(self, name, measured, bound, passed):
        if isinstance(measured, (np.floating, np.integer)):
            measured = measured.item()
        self.result.checks.append(Check(name, measured, bound, bool(passed)))

    def guard(self, level):
        return _Guard(self.result.experiment, level)


class _Guard:
    def __init__(self, experiment, level):
        self.where = f"{experiment} at level {level}"

    def __enter__(self):
        return self

    def __exit__(self, kind, err, tb):
        if err is not None and isinstance(err, EmelimError) and not isinstance(err, PipelineError):
            raise PipelineError(f"{self.where}: {type(err).__name__}: {err}") from err
        return False


# ---------------------------------------------------------------------------
# scalar electrodynamics


SCALAR_BOUNDS = {"density_order": (1.8, 2.2), "density_gap_finest": 1e-4,
                 "gauss_growth_coupled": 10.0, "gauss_growth_eliminated": 10.0}


def scalar_elim(levels=(64, 128, 256), horizon=1.0, cfl=0.25, e=1.0, m=1.0, a1=0.2, a2=0.1,
                phi_rate=0.05, wave=0.05, b0_target=1.0, tolerances=None, seed=0):
    """Coupled versus eliminated scalar electrodynamics in one dimension.

    Per level: the largest gap ``|Phi_reconstructed - phi^2|`` over the run
    and the growth factor of the Gauss residual for both solvers. The growth
    factor is ``max_t G / max(G(0), floor)`` with ``floor`` the rounding
    floor of the residual. Per-step diagnostics of the finest level are kept
    in ``diagnostics["steps"]``.
    """
    st = _Study("scalar-elim", SCALAR_BOUNDS, tolerances)
    preset = sc.SmoothPreset(a1=a1, a2=a2, phi_rate=phi_rate, wave=wave, b0_target=b0_target)
    gaps, hs = [], []
    growth_c, growth_e = [], []
    for N in levels:
        t0 = time.perf_counter()
        with st.guard(N):
            g = GridSpec.cubic(int(N))
            s, c = preset.initial_state(g, e, m)
            el = s.eliminated()
            n = max(1, int(round(horizon / (cfl * g.h))))
            dt = horizon / n
            Gc = [sc.gauss_residual(s, c)]
            Ge = [sc.gauss_residual(el, c)]
            fc, fe = sc.gauss_rounding_floor(s, c), sc.gauss_rounding_floor(el, c)
            gap = 0.0
            steps = []
            for k in range(n):
                s = sc.coupled_step(s, dt, c)
                el = sc.eliminated_step(el, dt, c)
                d = sup_norm(sc.reconstruct_density(el, c) - s.Phi)
                gap = max(gap, d)
                Gc.append(sc.gauss_residual(s, c))
                Ge.append(sc.gauss_residual(el, c))
                steps.append((s.time, Gc[-1], d, sc.field_energy(s)))
        wall = time.perf_counter() - t0
        gc = max(Gc) / max(Gc[0], fc)
        ge = max(Ge) / max(Ge[0], fe)
        gaps.append(gap)
        hs.append(g.h)
        growth_c.append(gc)
        growth_e.append(ge)
        st.record(N, g.h, dt, "density_gap", gap, wall)
        st.record(N, g.h, dt, "gauss_growth_coupled", gc, wall)
        st.record(N, g.h, dt, "gauss_growth_eliminated", ge, wall)
        st.result.diagnostics["steps"] = steps
    rep = convergence_report(gaps, hs)
    st.result.diagnostics["density_report"] = rep
    st.between("density_order", rep.order)
    st.at_most("density_gap_finest", gaps[-1])
    st.at_most("gauss_growth_coupled", max(growth_c))
    st.at_most("gauss_growth_eliminated", max(growth_e))
    return st.result


# ---------------------------------------------------------------------------
# Dirac equation


DIRAC_BOUNDS = {"identity_order": (1.8, 2.2), "psi2_order": 1.8,
                "fourth_order_residual_decreasing": None, "dual_route_gap": 1e-12}


def _random_pair(grid, rng, dt, times, modes, amplitude):
    pf = [SmoothRandomField(grid, rng, modes=modes) for _ in range(4)]
    af = [SmoothRandomField(grid, rng, modes=modes, complex_valued=False, amplitude=amplitude)
          for _ in range(4)]
    psi = de.sample_fields(lambda t: np.stack([f(t) for f in pf]), grid, dt, times)
    A = de.sample_fields(lambda t: np.stack([f(t) for f in af]), grid, dt, times)
    return psi, A


def identity_gap(N, seed, cfl=0.25, modes=1, amplitude=0.5, coarsest=8):
    """Conservation-identity gap of one random smooth pair, on the sites of the ``coarsest`` lattice."""
    g = GridSpec.cubic(int(N), dim=3)
    dt = cfl * g.h
    rng = np.random.default_rng(seed)
    psi, A = _random_pair(g, rng, dt, np.arange(-1, 2) * dt, modes, amplitude)
    gap = de.conservation_identity_gap(psi, A).center()
    stride = max(1, int(N) // coarsest)
    return g, dt, sup_norm(gap[::stride, ::stride, ::stride])


@dataclass(frozen=True)
class DiracBackground:
    """Dirac data in a uniform electric field along the second axis plus small waves."""

    field: float = 1.0
    wave: float = 0.1
    ripple: float = 0.1

    def potential(self, grid):
        x, y, z = grid.coords()
        a, E = self.wave, self.field

        def A_of_t(t):
            return np.stack([a * np.sin(x) * np.cos(z), a * np.cos(y + t),
                             -E * t + a * np.sin(z - t), a * np.cos(x)])
        return A_of_t

    def spinor(self, grid):
        x, y, z = grid.coords()
        pert = 1.0 + self.ripple * (np.cos(x) + 1j * np.sin(y) + 0.5 * np.cos(z + x))
        return de.rest_spinor()[:, None, None, None] * pert


def elimination_errors(N, background=None, t_final=np.pi / 4, cfl=0.25):
    """Evolve the Dirac equation and test the eliminated relations at ``t_final``.

    Returns ``(grid, dt, psi2_error, fourth_order_residual)`` with both norms
    taken over the whole lattice at the reconstruction time.
    """
    bg = background or DiracBackground()
    g = GridSpec.cubic(int(N), dim=3)
    dt = cfl * g.h
    n = int(round(t_final / dt))
    T = n * dt
    A_of_t = bg.potential(g)
    ks = range(n - 3, n + 4)
    out = de.evolve_dirac(bg.spinor(g), A_of_t, dt, n + 3, g, keep=set(ks))
    t_first = (n - 3) * dt
    psi = [Series(np.stack([out[k][c] for k in ks]), g, dt, t_first) for c in range(4)]
    A = de.sample_fields(A_of_t, g, dt, t_first + dt * np.arange(7))
    p2 = de.psi2_from_psi1(psi[0], A)
    err = sup_norm(p2.at(T) - psi[1].at(T))
    res = sup_norm(de.fourth_order_residual(psi[0], A).at(T))
    return g, dt, err, res


def dual_route_gap(N, seed, cfl=0.25, field=1.0):
    """Relative difference of the two evaluations of the fourth-order operator on random data."""
    g = GridSpec.cubic(int(N), dim=3)
    dt = cfl * g.h
    rng = np.random.default_rng(seed)
    pf = SmoothRandomField(g, rng, modes=2)
    af = [SmoothRandomField(g, rng, modes=1, complex_valued=False, amplitude=0.5) for _ in range(4)]
    shift = np.array([0.0, 0.0, -1.0, 0.0])[:, None, None, None]
    times = np.arange(-3, 4) * dt
    psi1 = de.sample_fields(lambda t: pf(t)[None], g, dt, times)[0]
    A = de.sample_fields(lambda t: np.stack([f(t) for f in af]) + field * t * shift, g, dt, times)
    r1, r2 = de.fourth_order_residual(psi1, A).align(de.fourth_order_via_psi2(psi1, A))
    return sup_norm((r1 - r2).values) / sup_norm(r1.values)


def dirac_elim(levels=(8, 16, 32), seeds=5, elimination_levels=(8, 12, 16), field=1.0, wave=0.1,
               ripple=0.1, t_final=np.pi / 4, cfl=0.25, dual_levels=(8, 12), tolerances=None,
               seed=0):
    """Identity chain, component elimination on solutions and the two-route algebra check."""
    st = _Study("dirac-elim", DIRAC_BOUNDS, tolerances)
    per_seed = {s: [] for s in range(seed, seed + seeds)}
    hs = []
    for N in levels:
        t0 = time.perf_counter()
        with st.guard(N):
            for s in per_seed:
                g, dt, gap = identity_gap(N, s, cfl, coarsest=int(levels[0]))
                per_seed[s].append(gap)
                st.record(N, g.h, dt, f"identity_gap_seed{s}", gap, time.perf_counter() - t0)
        hs.append(g.h)
    orders = {s: convergence_report(v, hs).order for s, v in per_seed.items()}
    st.result.diagnostics["identity_orders"] = orders
    worst = max(orders.values(), key=lambda o: abs(o - 2.0))
    st.between("identity_order", worst)

    bg = DiracBackground(field, wave, ripple)
    errs, ress, hs = [], [], []
    for N in elimination_levels:
        t0 = time.perf_counter()
        with st.guard(N):
            g, dt, err, res = elimination_errors(N, bg, t_final, cfl)
        wall = time.perf_counter() - t0
        errs.append(err)
        ress.append(res)
        hs.append(g.h)
        st.record(N, g.h, dt, "psi2_error", err, wall)
        st.record(N, g.h, dt, "fourth_order_residual", res, wall)
    rep = convergence_report(errs, hs)
    st.result.diagnostics["psi2_report"] = rep
    st.at_least("psi2_order", rep.order)
    res_rep = convergence_report(ress, hs)
    st.truth("fourth_order_residual_decreasing", ress, res_rep.strictly_decreasing)

    worst_gap = 0.0
    for N in dual_levels:
        t0 = time.perf_counter()
        for s in range(seed, seed + seeds):
            with st.guard(N):
                gap = dual_route_gap(N, s, cfl, field)
            g = GridSpec.cubic(int(N), dim=3)
            st.record(N, g.h, cfl * g.h, f"dual_route_gap_seed{s}", gap, time.perf_counter() - t0)
            worst_gap = max(worst_gap, gap)
    st.at_most("dual_route_gap", worst_gap)
    return st.result


# ---------------------------------------------------------------------------
# spinor electrodynamics


SPINOR_SUBORACLES = ("phi2", "phi3", "phi4", "phi2_dot", "phi2_ddot")
SPINOR_BOUNDS = dict({f"bddd{m}_decreasing": None for m in range(4)},
                     **{f"{k}_order": 1.5 for k in SPINOR_SUBORACLES})


def spinor_reconstruct(levels=(8, 12, 16), e=0.3, field=1.0, wave=0.1, ripple=0.1,
                       t_final=np.pi / 4, cfl=0.25, tolerances=None, seed=0):
    """Third-derivative reconstruction of the complex potential on Dirac-Maxwell solutions."""
    st = _Study("spinor-reconstruct", SPINOR_BOUNDS, tolerances)
    preset = sp.SpinorPreset(e=e, field=field, wave=wave, ripple=ripple)
    rows, hs = [], []
    for N in levels:
        t0 = time.perf_counter()
        with st.guard(N):
            g = GridSpec.cubic(int(N), dim=3)
            r = sp.reconstruction_check(g, preset, t_final, cfl)
        wall = time.perf_counter() - t0
        rows.append(r)
        hs.append(g.h)
        for m, v in enumerate(r["bddd_rel"]):
            st.record(N, g.h, r["dt"], f"bddd{m}_rel", v, wall)
        for k in SPINOR_SUBORACLES + ("weight", "condition", "lorenz"):
            st.record(N, g.h, r["dt"], k, r[k], wall)
    for m in range(4):
        seq = [r["bddd_rel"][m] for r in rows]
        st.truth(f"bddd{m}_decreasing", seq, convergence_report(seq, hs).strictly_decreasing)
    for k in SPINOR_SUBORACLES:
        st.at_least(f"{k}_order", convergence_report([r[k] for r in rows], hs).order)
    return st.result


# ---------------------------------------------------------------------------
# Carleman embedding


CARLEMAN_BOUNDS = {"linear_gap": 1e-6, "linear_gap_all_cutoffs": 1e-6, "nonlinear_gap_decreasing": None, "nonlinear_gap_final": 1e-4,
                   "commutators": 1e-13, "superposition_reduction": 3.0, "fock_linearity": 1e-10}

CARLEMAN_FIELDS = {
    "linear-rotor": lambda: cm.PolyVectorField.rotor(1.0, k=2),
    "quadratic-rotor": lambda: cm.PolyVectorField.quadratic_rotor(1.0, 0.1),
    "chain": lambda: cm.PolyVectorField.lattice_chain(3),
}


def _xi_for(F, norm):
    base = np.array([1.0, 0.6j, -0.3][:F.k], dtype=complex)
    return norm * base / np.linalg.norm(base)


def carleman(field="quadratic-rotor", n_max_levels=(4, 8, 12), amplitude=0.3, horizon=2.0, dt=0.01,
             linear_n_max=8, linear_amplitude=0.5, commutator_n_max=6, tolerances=None, seed=0):
    """Embedding gap, commutators, weak and strict superposition.

    The linear-rotor gap is always measured. ``field`` selects the vector
    field of the cutoff refinement, superposition and linearity studies;
    the refinement must decrease strictly for a nonlinear field and stay at
    the linear bound for a linear one.
    """
    st = _Study("carleman", CARLEMAN_BOUNDS, tolerances)
    if field not in CARLEMAN_FIELDS:
        raise ConfigError(f"unknown vector field '{field}'; known: {sorted(CARLEMAN_FIELDS)}")
    F = CARLEMAN_FIELDS[field]()
    lin = CARLEMAN_FIELDS["linear-rotor"]()

    t0 = time.perf_counter()
    with st.guard(linear_n_max):
        (lgap,) = cm.gap_study(lin, _xi_for(lin, linear_amplitude), [linear_n_max], horizon, dt)
    st.record(linear_n_max, 0.0, dt, "linear_gap", lgap, time.perf_counter() - t0)
    st.at_most("linear_gap", lgap)

    gaps = []
    for n_max in n_max_levels:
        t0 = time.perf_counter()
        with st.guard(n_max):
            (gap,) = cm.gap_study(F, _xi_for(F, amplitude), [n_max], horizon, dt)
        gaps.append(gap)
        st.record(n_max, 0.0, dt, "embedding_gap", gap, time.perf_counter() - t0)
    if F.degree >= 2:
        st.truth("nonlinear_gap_decreasing", gaps, all(b < a for a, b in zip(gaps, gaps[1:])))
        st.at_most("nonlinear_gap_final", gaps[-1])
    else:
        # a linear field conserves occupation, so every cutoff sits at the integrator floor
        st.at_most("linear_gap_all_cutoffs", max(gaps))

    basis = cm.FockBasis(2, commutator_n_max)
    a, a_dag = cm.ladder_ops(basis)
    low = basis.total < basis.n_max
    eye = np.eye(int(low.sum()))
    worst = 0.0
    for i in range(basis.k):
        for j in range(basis.k):
            cc = cm.commutator(a[i], a_dag[j]).toarray()[np.ix_(low, low)]
            worst = max(worst, np.abs(cc - (eye if i == j else 0.0)).max(),
                        abs(cm.commutator(a[i], a[j])).max())
    st.at_most("commutators", float(worst))

    basis = cm.FockBasis(F.k, max(n_max_levels))
    rep = cm.weak_superposition(0.6, 0.8, _xi_for(F, amplitude / 2), np.roll(_xi_for(F, amplitude / 2), 1) * 1j,
                                F, horizon, basis, dt)
    for s, dv, df in zip(rep.scales, rep.fock, rep.field):
        st.record(s, 0.0, dt, "superposition_fock", dv, 0.0)
        st.record(s, 0.0, dt, "superposition_field", df, 0.0)
    st.result.diagnostics["superposition"] = rep
    st.at_least("superposition_reduction", min(rep.reduction_factors("fock")))

    rng = np.random.default_rng(seed)
    M = cm.hamiltonian(F, basis)
    v, w = (rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim) for _ in range(2))
    defect = cm.linearity_defect(M, v, w, 0.3 - 0.2j, 1.7, horizon, dt)
    st.record(basis.n_max, 0.0, dt, "fock_linearity", defect, 0.0)
    st.at_most("fock_linearity", defect)
    return st.result


# ---------------------------------------------------------------------------
# lattice stencils


STENCIL_BOUNDS = {"stencil_order": (1.8, 2.2)}


def stencil_convergence(levels=(16, 32, 64, 128), length=2 * np.pi, tolerances=None, seed=0):
    """Orders of the spatial difference operators on a smooth periodic test function."""
    st = _Study("convergence", STENCIL_BOUNDS, tolerances)
    errs = {"partial": [], "second_partial": [], "laplacian_compact": [], "laplacian_wide": []}
    hs = []
    for N in levels:
        t0 = time.perf_counter()
        g = GridSpec.cubic(int(N), length=length)
        (x,) = g.coords()
        k = 2 * np.pi / length
        f = np.sin(k * x) + 0.5 * np.cos(2 * k * x)
        df = k * np.cos(k * x) - k * np.sin(2 * k * x)
        d2f = -k ** 2 * np.sin(k * x) - 2 * k ** 2 * np.cos(2 * k * x)
        vals = {"partial": sup_norm(partial(f, 1, g) - df),
                "second_partial": sup_norm(second_partial(f, 1, g) - d2f),
                "laplacian_compact": sup_norm(laplacian(f, g) - d2f),
                "laplacian_wide": sup_norm(laplacian(f, g, "wide") - d2f)}
        wall = time.perf_counter() - t0
        for name, v in vals.items():
            errs[name].append(v)
            st.record(N, g.h, 0.0, name, v, wall)
        hs.append(g.h)
    orders = {name: convergence_report(v, hs).order for name, v in errs.items()}
    st.result.diagnostics["orders"] = orders
    st.between("stencil_order", max(orders.values(), key=lambda o: abs(o - 2.0)))
    return st.result


PIPELINES = {
    "scalar-elim": scalar_elim,
    "dirac-elim": dirac_elim,
    "spinor-reconstruct": spinor_reconstruct,
    "carleman": carleman,
    "convergence": stencil_convergence,
}

__all__ = [
    "Record", "Check", "StudyResult", "scalar_elim", "identity_gap", "DiracBackground",
    "elimination_errors", "dual_route_gap", "dirac_elim", "spinor_reconstruct", "carleman",
    "stencil_convergence", "PIPELINES",
]
