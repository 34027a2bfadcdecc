"""Following one random daughter cell: the parasite-count chain.

Simulates the random cell line for a subcritical model with contamination,
looks at return times to the parasite-free state, and estimates the
stationary law from excursions, checking it against the exact kernel.
"""

import numpy as np

from cellbranch import (
    build_kernel,
    collect_hitting_times,
    simulate_path,
    stationary_by_regeneration,
    stationary_solve,
    tv_distance,
)
from cellbranch.presets import subcritical_geometric

env, imm = subcritical_geometric()
rng = np.random.default_rng(42)

print("== one trajectory ==")
traj = simulate_path(3, 25, env, imm, rng)
print("  states:", " ".join(str(int(s)) for s in traj.states))

print("\n== return times to the empty state ==")
summary = collect_hitting_times(0, env, imm, rng, samples=20_000, cap=10_000)
print(f"  mean return time: {summary.times.mean():.3f}")
print(f"  capped fraction:  {summary.capped_fraction:.4f}")

print("\n== stationary law: excursion estimate vs exact kernel ==")
est = stationary_by_regeneration(env, imm, rng, excursions=30_000)
exact = stationary_solve(build_kernel(env, imm, 128))
print(f"  long-run empty-state rate: {est.u_infinity:.4f} (estimate)")
print(f"                             {1.0 / est.lengths.mean():.4f} (from mean excursion)")
print("  state   excursions   kernel")
for k in range(6):
    print(f"  {k:>5}   {est.measure.frequency(k):>10.4f}   {exact.pmf[k]:>6.4f}")
print(f"  total variation gap: {tv_distance(est.measure, exact.pmf):.4f}")
