# # A nonlinear oscillator as linear Fock-space dynamics
#
# The coherent state exp(xi . a^dagger)|0> evolves linearly under
# M = sum_i a_i^dagger F_i(a) exactly when xi follows xi' = F(xi). Truncating
# the Fock space turns this into a finite linear ODE whose distance from the
# classical trajectory shrinks with the cutoff.

import numpy as np

from emelim import carleman as cm

F = cm.PolyVectorField.quadratic_rotor(omega=1.0, lam=0.1)
xi0 = [0.3]

# %% Embedding gap against the cutoff

for n_max, gap in zip((4, 8, 12), cm.gap_study(F, xi0, (4, 8, 12), T=2.0)):
    print(f"N_max = {n_max:2d}  dim = {cm.FockBasis(1, n_max).dim:3d}  gap = {gap:.2e}")

# %% The evolved vector is a rescaled coherent state

basis = cm.FockBasis(1, 12)
v = cm.fock_evolve(cm.coherent(xi0, basis), cm.hamiltonian(F, basis), 2.0, 0.01)
cp = cm.classical_evolve(xi0, F, 2.0, 0.01)
print("xi(T) =", np.round(cp.xi, 6), " prefactor exp(norm_log) =", np.exp(cp.norm_log))
print("occupation weights", np.round(np.abs(v[:5]) ** 2, 6))

# %% Superposition: strict in the Fock space, approximate for the field

rep = cm.weak_superposition(0.6, 0.8, [0.15], [0.15j], F, 2.0, basis)
for s, d_fock, d_field in zip(rep.scales, rep.fock, rep.field):
    print(f"s = {s:5.2f}  Fock deviation {d_fock:.2e}  field deviation {d_field:.2e}")
print("exponents", round(rep.fock_exponent, 3), round(rep.field_exponent, 3))
rng = np.random.default_rng(0)
v1, v2 = (rng.standard_normal(basis.dim) + 0j for _ in range(2))
print("linearity defect", cm.linearity_defect(cm.hamiltonian(F, basis), v1, v2, 0.5, 2.0, 2.0))
