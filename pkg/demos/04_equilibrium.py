"""Resource game over the cluster values.

The symmetric equilibrium gives the attacker R_a / (2 R_d) of the total
value.  A defender who guards only one infrastructure pays for ignoring the
coupling: the expected damage rises by the closed-form factor shown below.
"""

import numpy as np

from iciblotto import blotto, pipeline
from iciblotto.scenario import load_scenario

val = pipeline.value_system(pipeline.build_system(load_scenario()))
phi = val.phi_norm
for R_a, R_d in ((1.0, 5.0), (10.0, 20.0), (1.0, 20.0)):
    p = blotto.solve_symmetric_msne(phi, R_a, R_d, val.total)
    print(f"R_a={R_a:>4} R_d={R_d:>4}: U_a={p.U_a:.4f}, expected CED {p.Pi:.4e}, "
          f"attacker atom at 0 = {p.atoms('attacker')[0]:.2f}")

print(blotto.check_blotto_applicability(phi, 1.0, 5.0).reason)

for ci in ("power", "gas", "water"):
    Pi_bar, kappa, _ = blotto.single_ci_defense_ced(val.phi_raw, val.mask([ci]), 1.0, 4.0)
    Pi = blotto.solve_symmetric_msne(phi, 1.0, 4.0, val.total).Pi
    print(f"defend only {ci:<5} (kappa={kappa:.3f}): damage x{Pi_bar / Pi:.2f}")

forced = pipeline.force_kappa(val, ["gas"], 0.38)
Pi_bar, _, _ = blotto.single_ci_defense_ced(forced.phi_raw, forced.mask(["gas"]), 1.0, 4.0)
print(f"with the gas share forced to 0.38: x{Pi_bar / blotto.solve_symmetric_msne(forced.phi_norm, 1, 4, forced.total).Pi:.2f}")

# a pure best response against an opponent who spreads in proportion to value
br = blotto.best_response(blotto.proportional_allocation(phi, 5.0), phi, 1.0)
print(f"attacker best response to a proportional defender wins {int(br.won.sum())} clusters, "
      f"utility {br.utility:.3f}")
