"""Truncated-kernel oracle checks against hand enumeration and closed forms."""

import math

import numpy as np
import pytest

from cellbranch.laws import (
    BivariateOffspringLaw,
    EnvironmentLaw,
    FiniteLaw,
    HeavyTailLaw,
    ImmigrationPair,
    build_binomial_split,
    uniform_grid_p,
)
from cellbranch.oracle import (
    NonConvergent,
    TruncationTooSmall,
    build_kernel,
    hitting_tail,
    propagate,
    renewal_limit,
    renewal_sequence,
    stationary_solve,
    survival_no_immigration,
)


def dying_env() -> EnvironmentLaw:
    return EnvironmentLaw(((BivariateOffspringLaw.delta(0, 0), 1.0),))


def toy_chain():
    """Two-state chain: offspring all die, fresh cells get a fair coin of parasites."""
    return dying_env(), ImmigrationPair(FiniteLaw.bernoulli(0.5), FiniteLaw.delta(0))


def subcritical_env() -> EnvironmentLaw:
    return build_binomial_split(FiniteLaw.delta(1), [(0.5, 1.0)])


def geometric_set():
    env = subcritical_env()
    g = FiniteLaw.geometric_truncated(0.5, 20)
    return env, ImmigrationPair(g, g)


class TestBuildKernel:
    def test_toy_chain_rows(self):
        env, imm = toy_chain()
        kernel = build_kernel(env, imm, 3)
        assert kernel.matrix[0] == pytest.approx([0.5, 0.5, 0.0, 0.0])
        for x in (1, 2, 3):
            assert kernel.matrix[x] == pytest.approx([1.0, 0.0, 0.0, 0.0])
        assert kernel.overflow == pytest.approx(np.zeros(4))

    def test_zero_immigration_dying_env(self):
        kernel = build_kernel(dying_env(), ImmigrationPair.zero(), 4)
        for x in range(5):
            assert kernel.matrix[x] == pytest.approx([1.0, 0.0, 0.0, 0.0, 0.0])

    def test_one_parasite_row_is_binomial(self):
        # critical mean: top rows overflow any truncation, so lift the budget
        env = build_binomial_split(FiniteLaw.delta(2), [(0.5, 1.0)])
        kernel = build_kernel(env, ImmigrationPair.zero(), 8, overflow_budget=None)
        assert kernel.matrix[1, :3] == pytest.approx([0.25, 0.5, 0.25])
        assert kernel.matrix[1, 3:] == pytest.approx(np.zeros(6))

    def test_row_zero_is_state_zero_immigration_law(self):
        env, imm = geometric_set()
        kernel = build_kernel(env, imm, 64)
        expected, _ = imm.y0.pmf_array(65)
        assert kernel.matrix[0] == pytest.approx(expected)

    def test_mass_defect_small(self):
        env, imm = geometric_set()
        kernel = build_kernel(env, imm, 64)
        assert kernel.row_mass_defect() < 1e-10

    def test_truncation_budget_enforced(self):
        env, imm = geometric_set()
        with pytest.raises(TruncationTooSmall):
            build_kernel(env, imm, 4)

    def test_heavy_tail_is_flagged_not_rejected(self):
        env = subcritical_env()
        imm = ImmigrationPair(FiniteLaw.bernoulli(0.5), HeavyTailLaw())
        kernel = build_kernel(env, imm, 64)
        assert kernel.heavy_truncated
        assert kernel.overflow.max() > 1e-3


class TestPropagate:
    def test_zero_steps_is_point_mass(self):
        env, imm = toy_chain()
        kernel = build_kernel(env, imm, 3)
        result = propagate(kernel, 2, 0)
        assert result.probs == pytest.approx([0.0, 0.0, 1.0, 0.0])

    def test_toy_chain_two_steps(self):
        env, imm = toy_chain()
        kernel = build_kernel(env, imm, 3)
        result = propagate(kernel, 0, 2)
        assert result.probs[0] == pytest.approx(0.75)
        assert result.probs[1] == pytest.approx(0.25)

    def test_halving_survival_without_immigration(self):
        kernel = build_kernel(subcritical_env(), ImmigrationPair.zero(), 16)
        for n in (1, 5, 10, 20):
            result = propagate(kernel, 1, n)
            assert 1.0 - result.probs[0] == pytest.approx(2.0**-n, abs=1e-12)

    def test_mass_conserved_along_the_way(self):
        env, imm = geometric_set()
        kernel = build_kernel(env, imm, 64)
        for n in (1, 7, 30):
            result = propagate(kernel, 3, n)
            assert result.probs.sum() + result.overflow == pytest.approx(1.0, abs=1e-10)


class TestRenewal:
    def test_toy_chain_limit(self):
        env, imm = toy_chain()
        kernel = build_kernel(env, imm, 3)
        limit = renewal_limit(kernel)
        assert limit.expected_return_time == pytest.approx(1.5, abs=1e-12)
        assert limit.u_infinity == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_sequence_reaches_limit(self):
        env, imm = toy_chain()
        kernel = build_kernel(env, imm, 3)
        u = renewal_sequence(kernel, 400)
        assert u[0] == 1.0
        assert u[1] == pytest.approx(0.5)
        assert abs(u[400] - 2.0 / 3.0) < 1e-12

    def test_never_leaving_zero(self):
        kernel = build_kernel(dying_env(), ImmigrationPair.zero(), 3)
        u = renewal_sequence(kernel, 10)
        assert u == pytest.approx(np.ones(11))
        assert renewal_limit(kernel).u_infinity == pytest.approx(1.0)

    def test_escape_fails_loudly(self):
        env = subcritical_env()
        imm = ImmigrationPair(HeavyTailLaw(), FiniteLaw.delta(0))
        kernel = build_kernel(env, imm, 64)
        with pytest.raises(NonConvergent):
            renewal_limit(kernel)


class TestHittingTail:
    def test_toy_chain_from_zero(self):
        env, imm = toy_chain()
        kernel = build_kernel(env, imm, 3)
        tail = hitting_tail(kernel, 0, 5)
        assert tail == pytest.approx([0.5, 0.0, 0.0, 0.0, 0.0])

    def test_absorbed_at_zero(self):
        kernel = build_kernel(dying_env(), ImmigrationPair.zero(), 3)
        assert hitting_tail(kernel, 0, 6) == pytest.approx(np.zeros(6))

    def test_geometric_tail_ratio_converges(self):
        env, imm = geometric_set()
        kernel = build_kernel(env, imm, 256)
        tail = hitting_tail(kernel, 0, 100)
        ratios = tail[1:] / tail[:-1]
        last = ratios[-20:]
        assert last.max() - last.min() < 1e-9
        assert last[-1] < 0.99


class TestStationary:
    def test_toy_chain_distribution(self):
        env, imm = toy_chain()
        kernel = build_kernel(env, imm, 3)
        result = stationary_solve(kernel)
        assert result.pmf[:2] == pytest.approx([2.0 / 3.0, 1.0 / 3.0], abs=1e-11)

    def test_absorbing_zero(self):
        kernel = build_kernel(dying_env(), ImmigrationPair.zero(), 3)
        result = stationary_solve(kernel)
        assert result.pmf[0] == pytest.approx(1.0, abs=1e-11)

    def test_two_routes_agree(self):
        for env, imm in (toy_chain(), geometric_set()):
            kernel = build_kernel(env, imm, 128)
            result = stationary_solve(kernel)
            tv = 0.5 * np.abs(result.pmf - result.excursion).sum()
            assert tv < 1e-9

    def test_iteration_budget_enforced(self):
        from cellbranch.oracle import NoConvergence

        env, imm = geometric_set()
        kernel = build_kernel(env, imm, 64)
        with pytest.raises(NoConvergence):
            stationary_solve(kernel, max_iterations=2)


class TestSurvival:
    def test_subcritical_thinning(self):
        env = subcritical_env()
        for n in (1, 4, 10, 30):
            assert survival_no_immigration(env, 1, n) == pytest.approx(2.0**-n, abs=1e-13)

    def test_multiple_starters_share_environment(self):
        env = subcritical_env()
        # with an effectively deterministic environment, starters thin independently
        assert survival_no_immigration(env, 3, 5) == pytest.approx(
            1.0 - (1.0 - 2.0**-5) ** 3, abs=1e-12
        )

    def test_supercritical_limit_is_fixed_point(self):
        env = build_binomial_split(FiniteLaw.delta(3), [(0.5, 1.0)])
        q = 0.0
        for _ in range(10_000):
            q = (0.5 + 0.5 * q) ** 3
        assert survival_no_immigration(env, 1, 4000) == pytest.approx(1.0 - q, abs=1e-9)

    def test_critical_survival_matches_direct_iteration(self):
        env = build_binomial_split(FiniteLaw.delta(2), [(0.5, 1.0)])
        s = 0.0
        for _ in range(256):
            s = (0.5 + 0.5 * s) ** 2
        assert survival_no_immigration(env, 1, 256) == pytest.approx(1.0 - s, abs=1e-13)

    def test_enumeration_and_kernel_routes_agree(self):
        env = build_binomial_split(FiniteLaw.delta(1), [(0.3, 0.5), (0.8, 0.5)])
        by_enum = survival_no_immigration(env, 2, 10)
        by_kernel = survival_no_immigration(env, 2, 10, value_budget=1)
        assert by_kernel == pytest.approx(by_enum, abs=1e-9)

    def test_uniform_grid_subcritical_decay(self):
        env = build_binomial_split(FiniteLaw.delta(2), uniform_grid_p(64))
        assert survival_no_immigration(env, 1, 40) < 0.05
