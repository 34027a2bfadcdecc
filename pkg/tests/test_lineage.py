"""Random cell line simulation checks against enumeration and kernel oracles."""

import numpy as np
import pytest

from cellbranch.laws import (
    STATE_CAP,
    BivariateOffspringLaw,
    DegenerateMarginal,
    EnvironmentLaw,
    FiniteLaw,
    ImmigrationPair,
    build_binomial_split,
)
from cellbranch.lineage import (
    ExcursionCapExceeded,
    collect_hitting_times,
    hitting_time,
    normalized_process,
    simulate_coupled_pair,
    simulate_normalized_batch,
    simulate_path,
    simulate_states_batch,
    stationary_by_regeneration,
    step,
)
from cellbranch.oracle import build_kernel, propagate, stationary_solve, survival_no_immigration
from cellbranch.stats import EmpiricalMeasure, tv_distance


def dying_env():
    return EnvironmentLaw(((BivariateOffspringLaw.delta(0, 0), 1.0),))


def toy_chain():
    return dying_env(), ImmigrationPair(FiniteLaw.bernoulli(0.5), FiniteLaw.delta(0))


def sub_binom():
    env = build_binomial_split(FiniteLaw.delta(1), [(0.5, 1.0)])
    return env, ImmigrationPair(FiniteLaw.bernoulli(0.5), FiniteLaw.delta(0))


def sub_geom():
    env = build_binomial_split(FiniteLaw.delta(1), [(0.5, 1.0)])
    g = FiniteLaw.geometric_truncated(0.5, 20)
    return env, ImmigrationPair(g, g)


def super_env():
    return build_binomial_split(FiniteLaw.delta(4), [(0.5, 1.0)])


class TestStep:
    def test_empty_cell_stays_empty_without_contamination(self):
        rng = np.random.default_rng(0)
        z, mean = step(0, dying_env(), ImmigrationPair.zero(), rng)
        assert z == 0
        assert mean == 0.0

    def test_dead_offspring_leaves_only_immigration(self):
        rng = np.random.default_rng(1)
        imm = ImmigrationPair(
            FiniteLaw.bernoulli(0.5), FiniteLaw.delta(3), require_contamination_condition=False
        )
        z, _ = step(5, dying_env(), imm, rng)
        assert z == 3

    def test_bernoulli_contamination_mean(self):
        env, imm = toy_chain()
        rng = np.random.default_rng(2)
        states = simulate_states_batch(0, env, imm, rng, 10**6, checkpoints=[1])[1]
        assert abs(states.mean() - 0.5) < 0.002

    def test_scalar_step_matches_contamination_mean(self):
        env, imm = toy_chain()
        rng = np.random.default_rng(3)
        draws = [step(0, env, imm, rng)[0] for _ in range(20_000)]
        assert abs(np.mean(draws) - 0.5) < 0.011  # 3 sigma


class TestSimulatePath:
    def test_zero_steps(self):
        rng = np.random.default_rng(0)
        traj = simulate_path(9, 0, *sub_binom(), rng)
        assert list(traj.states) == [9]
        assert traj.normalizer[0] == 1.0

    def test_absorbing_collapse(self):
        rng = np.random.default_rng(4)
        traj = simulate_path(7, 6, dying_env(), ImmigrationPair.zero(), rng)
        assert list(traj.states) == [7, 0, 0, 0, 0, 0, 0]

    def test_toy_chain_two_step_return(self):
        env, imm = toy_chain()
        rng = np.random.default_rng(5)
        states = simulate_states_batch(0, env, imm, rng, 10**5, checkpoints=[2])[2]
        assert abs(np.mean(states == 0) - 0.75) < 0.01

    def test_saturation_flag(self):
        env = EnvironmentLaw(((BivariateOffspringLaw.delta(9, 9), 1.0),))
        rng = np.random.default_rng(6)
        traj = simulate_path(1, 70, env, ImmigrationPair.zero(), rng)
        assert traj.saturated
        assert traj.states.max() == STATE_CAP

    def test_deterministic_given_seed(self):
        env, imm = sub_geom()
        a = simulate_path(2, 40, env, imm, np.random.default_rng(99))
        b = simulate_path(2, 40, env, imm, np.random.default_rng(99))
        assert np.array_equal(a.states, b.states)


class TestHittingTime:
    def test_immediate_return(self):
        rng = np.random.default_rng(0)
        assert hitting_time(0, dying_env(), ImmigrationPair.zero(), rng, cap=10) == 1

    def test_toy_chain_mean_return(self):
        env, imm = toy_chain()
        rng = np.random.default_rng(7)
        summary = collect_hitting_times(0, env, imm, rng, samples=10**5, cap=50)
        assert summary.capped_fraction == 0.0
        assert abs(summary.times.mean() - 1.5) < 0.01
        assert set(np.unique(summary.times)) == {1, 2}

    def test_supercritical_capped_fraction_matches_survival(self):
        env = super_env()
        imm = ImmigrationPair(FiniteLaw.bernoulli(0.5), FiniteLaw.delta(0))
        rng = np.random.default_rng(8)
        summary = collect_hitting_times(1, env, imm, rng, samples=60, cap=1000)
        # with no immigration in infected states, capping is surviving
        expected = survival_no_immigration(env, 1, 1000)
        assert summary.capped_fraction > 0.0
        assert abs(summary.capped_fraction - expected) < 4 * np.sqrt(expected * (1 - expected) / 60)


class TestRegeneration:
    def test_toy_chain_estimates(self):
        env, imm = toy_chain()
        rng = np.random.default_rng(9)
        est = stationary_by_regeneration(env, imm, rng, excursions=10**5)
        assert abs(est.measure.frequency(0) - 2.0 / 3.0) < 0.01
        assert abs(est.measure.frequency(1) - 1.0 / 3.0) < 0.01
        assert abs(est.u_infinity - 2.0 / 3.0) < 0.01

    def test_frequencies_sum_to_one(self):
        env, imm = sub_geom()
        rng = np.random.default_rng(10)
        est = stationary_by_regeneration(env, imm, rng, excursions=2000)
        assert sum(est.measure.as_dict().values()) == pytest.approx(1.0)

    def test_absorbing_chain_gives_point_mass(self):
        rng = np.random.default_rng(11)
        est = stationary_by_regeneration(dying_env(), ImmigrationPair.zero(), rng, excursions=500)
        assert est.measure.as_dict() == {0: 1.0}
        assert est.u_infinity == 1.0

    def test_matches_kernel_stationary(self):
        env, imm = sub_binom()
        rng = np.random.default_rng(12)
        est = stationary_by_regeneration(env, imm, rng, excursions=10**5)
        exact = stationary_solve(build_kernel(env, imm, 64))
        assert tv_distance(est.measure, exact.pmf) < 0.02

    def test_supercritical_warns_and_caps(self):
        env = super_env()
        imm = ImmigrationPair(FiniteLaw.bernoulli(0.5), FiniteLaw.delta(0))
        rng = np.random.default_rng(13)
        with pytest.warns(UserWarning):
            with pytest.raises(ExcursionCapExceeded):
                stationary_by_regeneration(env, imm, rng, excursions=100, cap=200)


class TestNormalizedProcess:
    def test_deterministic_growth_is_flat(self):
        env = EnvironmentLaw(((BivariateOffspringLaw.delta(3, 3), 1.0),))
        rng = np.random.default_rng(14)
        traj = simulate_path(1, 12, env, ImmigrationPair.zero(), rng)
        assert normalized_process(traj) == pytest.approx(np.ones(13))

    def test_empty_chain_is_zero(self):
        env = build_binomial_split(FiniteLaw.delta(2), [(0.5, 1.0)])
        rng = np.random.default_rng(15)
        traj = simulate_path(0, 10, env, ImmigrationPair.zero(), rng)
        assert normalized_process(traj) == pytest.approx(np.zeros(11))

    def test_zero_mean_rejected(self):
        rng = np.random.default_rng(16)
        traj = simulate_path(1, 3, dying_env(), ImmigrationPair.zero(), rng)
        with pytest.raises(DegenerateMarginal):
            normalized_process(traj)

    def test_geometric_series_mean_with_unit_immigration(self):
        # marginal mean 3 on both sides, one immigrant per division
        env = build_binomial_split(FiniteLaw.delta(6), [(0.5, 1.0)])
        imm = ImmigrationPair.state_independent(FiniteLaw.delta(1))
        rng = np.random.default_rng(17)
        w = simulate_normalized_batch(0, env, imm, rng, 10**5, checkpoints=[20])[20]
        assert abs(w.mean() - 0.5) < 0.02


class TestMonotoneCoupling:
    def test_pathwise_dominance(self):
        env, imm = sub_geom()
        for seed in range(25):
            rng = np.random.default_rng(seed)
            lo, hi = simulate_coupled_pair(1, 4, 40, env, imm, rng)
            assert np.all(lo <= hi)

    def test_equal_starts_stay_equal(self):
        env, imm = sub_binom()
        rng = np.random.default_rng(42)
        lo, hi = simulate_coupled_pair(3, 3, 30, env, imm, rng)
        assert np.array_equal(lo, hi)


class TestBatchAgainstOracle:
    def test_batch_law_matches_kernel(self):
        env, imm = sub_geom()
        kernel = build_kernel(env, imm, 128)
        exact = propagate(kernel, 0, 8)
        rng = np.random.default_rng(18)
        states = simulate_states_batch(0, env, imm, rng, 40_000, checkpoints=[8])[8]
        assert tv_distance(EmpiricalMeasure.from_samples(states), exact) < 0.02

    def test_scalar_law_matches_kernel(self):
        env, imm = sub_geom()
        kernel = build_kernel(env, imm, 128)
        exact = propagate(kernel, 0, 8)
        rng = np.random.default_rng(19)
        finals = [simulate_path(0, 8, env, imm, rng).states[-1] for _ in range(8000)]
        assert tv_distance(EmpiricalMeasure.from_samples(finals), exact) < 0.03

    def test_convergence_to_stationary_in_tv(self):
        env, imm = sub_binom()
        exact = stationary_solve(build_kernel(env, imm, 64)).pmf
        rng = np.random.default_rng(20)
        out = simulate_states_batch(0, env, imm, rng, 30_000, checkpoints=[5, 50])
        tv_5 = tv_distance(EmpiricalMeasure.from_samples(out[5]), exact)
        tv_50 = tv_distance(EmpiricalMeasure.from_samples(out[50]), exact)
        assert tv_50 < 0.02
        assert tv_50 <= tv_5 + 0.01
