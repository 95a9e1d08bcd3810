"""Horizon scaling: solve time grows roughly linearly with N.

The trajectory QPs are block banded (each timestep's rows touch only the
neighboring timestep), so the sparse factorization and the per-iteration
solves scale close to linearly. This script fits the log-log slope over a
range of horizons for the trot scenario.
"""

import numpy as np

from centroidal_bcd.bcd import optimize
from centroidal_bcd.gaits import make_gait
from centroidal_bcd.scenarios import materialize

rows = []
for N in (75, 150, 300, 600):
    plan, refs, settings, weights = materialize(make_gait("trot", N=N))
    result = optimize(plan, refs, settings, weights)
    rows.append((N, result.solve_time, result.force_time_share, len(result.records)))
    print(f"N={N:4d}: solve {result.solve_time:6.2f} s, "
          f"force share {result.force_time_share * 100:5.1f}%, "
          f"{len(result.records)} outer iterations")

logs = np.log([[N, t] for N, t, _, _ in rows])
slope = np.polyfit(logs[:, 0], logs[:, 1], 1)[0]
print(f"\nfitted solve-time exponent vs horizon: {slope:.2f} (1.0 would be exactly linear)")
