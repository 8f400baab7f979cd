# # Four Dirac components, one equation
#
# In a chiral basis the lower two spinor components are algebraic in the
# upper two, and where iF^1 + F^2 does not vanish the second is algebraic
# in the first. The first component then satisfies a fourth-order equation
# on its own. We check both statements on a numerical solution in a uniform
# electric field.

import numpy as np

from emelim import dirac_elim as de
from emelim.lattice import GridSpec, Series, sup_norm
from emelim.pipelines import DiracBackground

# %% Gamma matrices and the rest spinor

print("gamma^0 =\n", de.GAMMA[0].real)
u = de.rest_spinor()
print("rest spinor", np.round(u, 4), " gamma^0 u == u:", np.allclose(de.GAMMA[0] @ u, u))

# %% Evolve in a background with a nonzero iF^1 + F^2

grid = GridSpec.cubic(12, dim=3)
dt = 0.25 * grid.h
bg = DiracBackground()
A_of_t = bg.potential(grid)
n = 20
out = de.evolve_dirac(bg.spinor(grid), A_of_t, dt, n + 3, grid, keep=set(range(n - 3, n + 4)))
t_first = (n - 3) * dt
psi = [Series(np.stack([out[k][c] for k in range(n - 3, n + 4)]), grid, dt, t_first) for c in range(4)]
A = de.sample_fields(A_of_t, grid, dt, t_first + dt * np.arange(7))
T = n * dt

# %% psi_2 from psi_1, and the fourth-order residual

psi2 = de.psi2_from_psi1(psi[0], A)
print("|psi_2 reconstructed - psi_2|", sup_norm(psi2.at(T) - psi[1].at(T)))
print("fourth-order residual", sup_norm(de.fourth_order_residual(psi[0], A).at(T)))
print("|psi_1| scale", sup_norm(psi[0].at(T)))

# %% Two independent compositions of the fourth-order operator agree

r1, r2 = de.fourth_order_residual(psi[0], A).align(de.fourth_order_via_psi2(psi[0], A))
print("relative difference of the two routes", sup_norm((r1 - r2).values) / sup_norm(r1.values))

# %% Current conservation identity on the lattice

gap = de.conservation_identity_gap(psi, A)
print("identity gap", sup_norm(gap.center()), " (second order in h)")
