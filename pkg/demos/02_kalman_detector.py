"""Kalman filter and chi-square detector on the benchmark system.

Without an attack the alarm fires about 5% of the time.  A small impulse on
a few sensors barely moves that rate, while a gross one is flagged at once.
"""

import numpy as np

from iciblotto import pipeline
from iciblotto.attack import solve_max_ced
from iciblotto.estimator import empirical_alarm_rates, noise_rng, simulate
from iciblotto.scenario import load_scenario

s = pipeline.build_system(load_scenario())
b = s.bundle
print(f"steady-state gain K: {b.K.shape}, rho(Q) = {np.abs(np.linalg.eigvals(b.Q)).max():.4f}")
print(f"detector threshold (chi-square 0.95, {b.n_sensors} dof): {b.threshold:.2f}")

t = simulate(b, s.noise, 10_000, inputs=s.input_sequence(10_000), rng=noise_rng(1))
print(f"false-alarm rate over 10^4 steps: {100 * t.alarm[1:].mean():.2f}%")

sensors = s.index.sensors([2, 12, 24])
for alpha in (0.05, 5.0):
    ya = solve_max_ced(b, sensors, alpha, s.impact).vector
    trajs = [simulate(b, s.noise, 5, attack=ya, rng=noise_rng(2, r)) for r in range(400)]
    clean, attacked = empirical_alarm_rates(trajs)
    print(f"alpha={alpha:>4}: alarm rate at k=1 clean {clean[1]:.3f}, attacked {attacked[1]:.3f}")
