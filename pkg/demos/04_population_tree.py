"""The whole dividing population: infected-cell fractions and proportions.

Runs the binary division tree breadth-first and depth-first, shows the
recovery dichotomy without contamination (the infected fraction is always
nonincreasing; whether it vanishes depends on the growth regime), and checks
that deep-generation proportions of parasite counts land on the cell line's
stationary law.
"""

import numpy as np

from cellbranch import (
    ImmigrationPair,
    build_kernel,
    infected_fraction_series,
    simulate_tree_bfs,
    simulate_tree_dfs,
    stationary_solve,
    tv_distance,
)
from cellbranch.presets import split_environment, subcritical_binomial
from cellbranch.stats import EmpiricalMeasure

rng = np.random.default_rng(7)

print("== recovery dichotomy, no contamination, one parasite at the root ==")
for name, brood in (("subcritical", 1), ("critical", 2), ("supercritical", 4)):
    env = split_environment(brood)
    ledgers = simulate_tree_bfs(1, 14, env, ImmigrationPair.zero(), rng)
    series = infected_fraction_series(ledgers)
    print(f"  {name:<14} infected fraction: "
          + " ".join(f"{series[g]:.3f}" for g in (0, 2, 6, 10, 14))
          + f"   (always nonincreasing: {bool(np.all(np.diff(series) <= 0))})")

print("\n== deep generations reach the cell line's stationary law ==")
env, imm = subcritical_binomial()
exact = stationary_solve(build_kernel(env, imm, 64))
counts: dict[int, int] = {}
for _ in range(40):
    simulate_tree_dfs(0, 12, env, imm, rng, accumulator=counts)
leaves = EmpiricalMeasure.from_counts(counts)
print("  state   leaf fraction   stationary")
for k in range(4):
    print(f"  {k:>5}   {leaves.frequency(k):>13.4f}   {exact.pmf[k]:>10.4f}")
print(f"  total variation gap: {tv_distance(leaves, exact.pmf):.4f}")

print("\n== breadth-first and depth-first agree in law ==")
bfs = simulate_tree_bfs(0, 10, env, imm, rng)[-1]
dfs = simulate_tree_dfs(0, 10, env, imm, rng)
gap = tv_distance(
    EmpiricalMeasure.from_counts(bfs.histogram), EmpiricalMeasure.from_counts(dfs.histogram)
)
print(f"  single-tree leaf histograms, total variation: {gap:.4f} (two independent runs)")
