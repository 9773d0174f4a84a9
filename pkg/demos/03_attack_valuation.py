"""Value every sensor cluster by the worst stealthy impulse it admits.

Each value is the largest estimation-error cost an attacker can cause by
corrupting that cluster alone while keeping the detector statistics within
the alpha budget.  The normalized values drive the resource game.
"""

import numpy as np

from iciblotto import pipeline
from iciblotto.attack import deviation_response
from iciblotto.scenario import load_scenario

s = pipeline.build_system(load_scenario())
val = pipeline.value_system(s)
order = np.argsort(val.phi_norm)[::-1]
print(f"{val.n_clusters} clusters, alpha={val.alpha}, total raw value {val.total:.4e}")
print("five most valuable clusters:")
for i in order[:5]:
    c = val.certificates[i]
    print(f"  {val.ids[i]:<10} phi={val.phi_norm[i]:.4f}  objective k={c.objective_id}  "
          f"dual gap {c.gap:.1e}")
for ci in ("power", "gas", "water"):
    print(f"share held by {ci}: {val.kappa([ci]):.3f}")

# the cost of the optimal impulse peaks within the first two steps
top = order[0]
d = deviation_response(s.bundle, val.certificates[top].vector, 30)
print(f"q(k) for {val.ids[top]}, k=0..5:", np.array2string(d.q[:6], precision=3))
