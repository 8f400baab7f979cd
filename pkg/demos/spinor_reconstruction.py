# # Spinor electrodynamics from the potential alone
#
# A complex gauge phase sets the first spinor component to one. The other
# components, the charge weight and finally the third time derivative of the
# complex potential then follow from (B, B', B'') on a single time slice. We
# build that jet from a Dirac-Maxwell solution and compare the closure with
# finite differences of the solution itself.

import numpy as np

from emelim import spinor_ed as se
from emelim.lattice import GridSpec

# %% One reconstruction at 12^3

grid = GridSpec.cubic(12, dim=3)
report = se.reconstruction_check(grid)
print("relative error of B''' per component:", np.round(report["bddd_rel"], 4))
for key in ("phi2", "phi3", "phi4", "phi2_dot", "phi2_ddot", "weight"):
    print(f"  {key:10s} error {report[key]:.2e}")
print("max 1/|iF^1 + F^2|", round(report["condition"], 3), " Lorenz residual", report["lorenz"])

# %% Refinement

rows = {n: se.reconstruction_check(GridSpec.cubic(n, dim=3)) for n in (8, 12, 16)}
for n, r in rows.items():
    print(n, np.round(r["bddd_rel"], 4), f"phi2 {r['phi2']:.2e}")
