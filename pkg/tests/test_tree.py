"""Binary-tree population checks: ledger exactness, traversal law equality."""

import math

import numpy as np
import pytest

from cellbranch.laws import (
    BivariateOffspringLaw,
    EnvironmentLaw,
    FiniteLaw,
    ImmigrationPair,
    build_binomial_split,
)
from cellbranch.oracle import build_kernel, propagate
from cellbranch.stats import EmptySeries, EmpiricalMeasure, tv_distance
from cellbranch.tree import (
    DepthTooLarge,
    GenerationLedger,
    PrefixLedger,
    advance_generation,
    collapsed_total_law,
    growth_exponent,
    infected_fraction_series,
    iter_forest_bfs,
    iter_forest_infected,
    prefix_ledgers,
    simulate_parasite_totals,
    simulate_tree_bfs,
    simulate_tree_dfs,
    total_parasites_series,
)


def dying_env():
    return EnvironmentLaw(((BivariateOffspringLaw.delta(0, 0), 1.0),))


def toy_imm():
    return ImmigrationPair(FiniteLaw.bernoulli(0.5), FiniteLaw.delta(0))


def sub_env():
    return build_binomial_split(FiniteLaw.delta(1), [(0.5, 1.0)])


class TestAdvanceGeneration:
    def test_contamination_reaches_both_daughters(self):
        imm = ImmigrationPair(
            FiniteLaw.delta(1), FiniteLaw.delta(0), require_contamination_condition=False
        )
        rng = np.random.default_rng(0)
        assert list(advance_generation([0], dying_env(), imm, rng)) == [1, 1]

    def test_all_offspring_to_first_daughter(self):
        env = EnvironmentLaw(((BivariateOffspringLaw.delta(1, 0), 1.0),))
        rng = np.random.default_rng(1)
        assert list(advance_generation([3], env, ImmigrationPair.zero(), rng)) == [3, 0]

    def test_daughters_contaminated_independently(self):
        rng = np.random.default_rng(2)
        children = advance_generation([0] * 10**5, dying_env(), toy_imm(), rng)
        both = (children[0::2] > 0) & (children[1::2] > 0)
        assert abs(both.mean() - 0.25) < 0.01

    def test_children_are_interleaved(self):
        env = EnvironmentLaw(((BivariateOffspringLaw.delta(1, 0), 1.0),))
        rng = np.random.default_rng(3)
        children = advance_generation([5, 0, 2], env, ImmigrationPair.zero(), rng)
        assert list(children) == [5, 0, 0, 0, 2, 0]


class TestBfs:
    def test_root_only(self):
        rng = np.random.default_rng(0)
        ledgers = simulate_tree_bfs(7, 0, sub_env(), toy_imm(), rng)
        assert len(ledgers) == 1
        assert ledgers[0].histogram == {7: 1}

    def test_zero_immigration_from_empty_root(self):
        rng = np.random.default_rng(1)
        ledgers = simulate_tree_bfs(0, 6, sub_env(), ImmigrationPair.zero(), rng)
        for g, led in enumerate(ledgers):
            assert led.histogram == {0: 2**g}
            assert led.infected == 0

    def test_ledger_invariants_every_generation(self):
        rng = np.random.default_rng(2)
        ledgers = simulate_tree_bfs(1, 8, sub_env(), toy_imm(), rng)
        for g, led in enumerate(ledgers):
            assert led.cells == 2**g
            assert sum(led.histogram.values()) == led.cells
            assert led.cells - led.histogram.get(0, 0) == led.infected
            assert sum(k * c for k, c in led.histogram.items()) == led.parasites_total

    def test_mean_generation_proportions_match_chain_law(self):
        # cell picked uniformly at random in generation n carries the chain's law
        env, imm = dying_env(), toy_imm()
        exact = propagate(build_kernel(env, imm, 16), 0, 6)
        rng = np.random.default_rng(3)
        freqs: dict[int, list] = {}
        n_trees = 200
        for g, states in iter_forest_bfs(0, 6, env, imm, rng, n_trees):
            if g == 6:
                for k in range(4):
                    freqs[k] = (states == k).mean(axis=1)
        for k, per_tree in freqs.items():
            se = per_tree.std(ddof=1) / math.sqrt(n_trees)
            assert abs(per_tree.mean() - exact.probs[k]) < 3 * se + 1e-9

    def test_depth_bound(self):
        rng = np.random.default_rng(4)
        with pytest.raises(DepthTooLarge):
            simulate_tree_bfs(0, 23, sub_env(), toy_imm(), rng)


class TestDfs:
    def test_zero_immigration_leaves(self):
        rng = np.random.default_rng(0)
        led = simulate_tree_dfs(0, 8, sub_env(), ImmigrationPair.zero(), rng)
        assert led.histogram == {0: 256}

    def test_single_level_matches_advance_law(self):
        env, imm = sub_env(), toy_imm()
        rng = np.random.default_rng(5)
        dfs_states = []
        for _ in range(20_000):
            led = simulate_tree_dfs(1, 1, env, imm, rng)
            for k, c in led.histogram.items():
                dfs_states.extend([k] * c)
        direct = advance_generation([1] * 20_000, env, imm, np.random.default_rng(6))
        tv = tv_distance(
            EmpiricalMeasure.from_samples(dfs_states), EmpiricalMeasure.from_samples(direct)
        )
        assert tv < 0.02

    def test_matches_bfs_in_law_at_depth_ten(self):
        env, imm = sub_env(), toy_imm()
        rng = np.random.default_rng(7)
        bfs_counts: dict[int, int] = {}
        for _ in range(20):
            led = simulate_tree_bfs(0, 10, env, imm, rng)[-1]
            for k, c in led.histogram.items():
                bfs_counts[k] = bfs_counts.get(k, 0) + c
        dfs_counts: dict[int, int] = {}
        for _ in range(20):
            simulate_tree_dfs(0, 10, env, imm, rng, accumulator=dfs_counts)
        tv = tv_distance(
            EmpiricalMeasure.from_counts(bfs_counts), EmpiricalMeasure.from_counts(dfs_counts)
        )
        assert tv < 0.02

    def test_accumulator_merges(self):
        rng = np.random.default_rng(8)
        acc: dict[int, int] = {}
        for _ in range(3):
            simulate_tree_dfs(0, 4, sub_env(), toy_imm(), rng, accumulator=acc)
        assert sum(acc.values()) == 3 * 16

    def test_depth_bound(self):
        rng = np.random.default_rng(9)
        with pytest.raises(DepthTooLarge):
            simulate_tree_dfs(0, 31, sub_env(), toy_imm(), rng)


class TestInfectedFraction:
    def test_monotone_under_zero_contamination(self):
        super_env = build_binomial_split(FiniteLaw.delta(4), [(0.5, 1.0)])
        for seed in range(20):
            rng = np.random.default_rng(seed)
            ledgers = simulate_tree_bfs(1, 12, super_env, ImmigrationPair.zero(), rng)
            series = infected_fraction_series(ledgers)
            assert np.all(np.diff(series) <= 1e-15)

    def test_empty_tree_is_constant_zero(self):
        rng = np.random.default_rng(1)
        ledgers = simulate_tree_bfs(0, 6, sub_env(), ImmigrationPair.zero(), rng)
        assert infected_fraction_series(ledgers) == pytest.approx(np.zeros(7))

    def test_infected_only_forest_counts(self):
        env = build_binomial_split(FiniteLaw.delta(2), [(0.5, 1.0)])
        rng = np.random.default_rng(2)
        n_runs = 50
        for g, states, runs in iter_forest_infected(1, 10, env, rng, n_runs):
            counts = np.bincount(runs, minlength=n_runs)
            assert counts.sum() == len(states)
            assert np.all(states > 0)


class TestParasiteTotals:
    def gw_setup(self, z: int):
        env = build_binomial_split(FiniteLaw.delta(z), [(0.5, 1.0)])
        imm = ImmigrationPair(FiniteLaw.bernoulli(0.5), FiniteLaw.bernoulli(0.5))
        return env, imm

    def test_collapsed_total_law_extraction(self):
        env, _ = self.gw_setup(4)
        law = collapsed_total_law(env)
        assert law.values == (4,)

    def test_collapsed_total_law_rejects_mixed_broods(self):
        env = EnvironmentLaw(
            ((BivariateOffspringLaw.delta(1, 1), 0.5), (BivariateOffspringLaw.delta(2, 2), 0.5))
        )
        with pytest.raises(ValueError):
            collapsed_total_law(env)

    def test_mean_totals_after_three_generations(self):
        # growth mean 4 and half an immigrant per daughter: expected total 28
        env, imm = self.gw_setup(4)
        rng = np.random.default_rng(10)
        totals = simulate_parasite_totals(env, imm, 0, 3, rng, n_runs=20_000)
        assert abs(totals[:, 3].mean() - 28.0) < 1.0

    def test_totals_chain_matches_real_trees(self):
        env, imm = self.gw_setup(4)
        rng = np.random.default_rng(11)
        forest_totals = None
        for g, states in iter_forest_bfs(0, 3, env, imm, rng, 20_000):
            if g == 3:
                forest_totals = states.sum(axis=1)
        chain_totals = simulate_parasite_totals(env, imm, 0, 3, np.random.default_rng(12), 20_000)
        tv = tv_distance(
            EmpiricalMeasure.from_samples(forest_totals),
            EmpiricalMeasure.from_samples(chain_totals[:, 3]),
        )
        assert tv < 0.03
        assert abs(forest_totals.mean() - chain_totals[:, 3].mean()) < 1.5

    def test_series_helpers(self):
        env, imm = self.gw_setup(4)
        rng = np.random.default_rng(13)
        ledgers = simulate_tree_bfs(0, 4, env, imm, rng)
        series = total_parasites_series(ledgers)
        assert len(series) == 5
        assert all(isinstance(v, int) for v in series)


class TestGrowthExponent:
    def test_recovers_doubling_rate(self):
        # fit on the last half, where the log n correction is ~1/n
        series = [2.0**n * max(n, 1) for n in range(120)]
        fit = growth_exponent(series)
        assert fit.exponent == pytest.approx(math.log(2), abs=0.02)
        assert fit.zero_censored == 0

    def test_zero_censoring_reported(self):
        series = [0, 0, 1, 2, 4, 8, 0, 32, 64, 128, 256, 512]
        fit = growth_exponent(series)
        assert fit.zero_censored == 1

    def test_empty_series_rejected(self):
        with pytest.raises(EmptySeries):
            growth_exponent([])

    def test_all_zero_window_rejected(self):
        with pytest.raises(EmptySeries):
            growth_exponent([4, 2, 1, 0, 0, 0, 0])

    def test_exponent_near_log3_for_tripling_population(self):
        env = build_binomial_split(FiniteLaw.delta(3), [(0.5, 1.0)])
        imm = ImmigrationPair(FiniteLaw.bernoulli(0.5), FiniteLaw.bernoulli(0.5))
        rng = np.random.default_rng(14)
        totals = simulate_parasite_totals(env, imm, 0, 20, rng, n_runs=200)
        fits = [growth_exponent(row).exponent for row in totals]
        assert abs(np.mean(fits) - math.log(3)) < 0.15


class TestPrefixLedgers:
    def test_counts_cover_all_cells_seen(self):
        rng = np.random.default_rng(15)
        ledgers = simulate_tree_bfs(0, 6, sub_env(), toy_imm(), rng)
        prefixes = prefix_ledgers(ledgers)
        for n, pref in enumerate(prefixes):
            assert pref.denominator == 2 ** (n + 1)
            assert sum(pref.counts.values()) == 2 ** (n + 1) - 1
            assert sum(pref.proportions().values()) == pytest.approx(1 - 1 / pref.denominator)

    def test_invariant_enforced(self):
        with pytest.raises(ValueError):
            PrefixLedger(n=1, counts={0: 2}, denominator=4)


class TestLedgerValidation:
    def test_inconsistent_totals_rejected(self):
        with pytest.raises(ValueError):
            GenerationLedger(n=1, histogram={0: 1, 2: 1}, cells=2, infected=1, parasites_total=3)

    def test_inconsistent_cells_rejected(self):
        with pytest.raises(ValueError):
            GenerationLedger(n=1, histogram={0: 1}, cells=2, infected=0, parasites_total=0)
