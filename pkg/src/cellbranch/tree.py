"""Full cell population on the binary division tree.

Every cell divides into two daughters each generation.  A cell with x
parasites draws one offspring mechanism from the environment, its x parasites
reproduce through that mechanism's joint law (child goes to daughter 0 or
daughter 1), and each daughter independently receives contamination: from the
state-zero law when the mother was parasite-free, from the infected-state law
otherwise.

Two traversals cover the practical depth range.  The breadth-first simulator
advances whole generations as arrays and keeps a ledger per generation; runs
with zero contamination track only infected cells (parasite-free cells stay
parasite-free forever, exactly).  The depth-first simulator walks one
root-to-leaf path at a time in O(depth) memory and tallies only the target
generation.

The total parasite count across a generation is itself a Markov chain
whenever each parasite's total brood size has the same law in every realized
environment and contamination ignores the cell state; ``simulate_parasite_totals``
exploits that for the growth-rate experiments, with the same law as the full
tree's totals.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ._sampling import multinomial_counts
from .laws import (
    EnvironmentLaw,
    FiniteLaw,
    HeavyTailLaw,
    ImmigrationPair,
)
from .lineage import BATCH_STATE_CAP
from .stats import EmptySeries

BFS_DEPTH_LIMIT = 22
DFS_DEPTH_LIMIT = 30

# above this count a depth-first node switches from per-parasite draws to one
# multinomial over the joint support
_DFS_SMALL_STATE = 32


class DepthTooLarge(ValueError):
    """Requested tree depth exceeds the configured traversal bound."""


@dataclass(frozen=True)
class GenerationLedger:
    """Per-generation tally: histogram of parasite counts over all cells."""

    n: int
    histogram: dict[int, int]
    cells: int
    infected: int
    parasites_total: int

    def __post_init__(self):
        if sum(self.histogram.values()) != self.cells:
            raise ValueError("histogram must cover every cell")
        if self.cells - self.histogram.get(0, 0) != self.infected:
            raise ValueError("infected count inconsistent with histogram")
        if sum(k * c for k, c in self.histogram.items()) != self.parasites_total:
            raise ValueError("parasite total inconsistent with histogram")

    @classmethod
    def from_histogram(cls, n: int, histogram: dict[int, int], cells: int) -> "GenerationLedger":
        infected = cells - histogram.get(0, 0)
        total = sum(k * c for k, c in histogram.items())
        return cls(n=n, histogram=dict(histogram), cells=cells, infected=infected,
                   parasites_total=total)

    def proportions(self) -> dict[int, float]:
        return {k: c / self.cells for k, c in self.histogram.items()}


@dataclass(frozen=True)
class PrefixLedger:
    """Cumulative histogram over generations 0..n.

    Counts cover the 2^(n+1) - 1 cells seen so far; proportions use the
    conventional 2^(n+1) denominator, so they sum to just under one.
    """

    n: int
    counts: dict[int, int]
    denominator: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.denominator - 1:
            raise ValueError("prefix counts must cover 2^(n+1) - 1 cells")

    def proportions(self) -> dict[int, float]:
        return {k: c / self.denominator for k, c in self.counts.items()}


def _ledger_from_states(n: int, states: np.ndarray) -> GenerationLedger:
    vals, counts = np.unique(states, return_counts=True)
    hist = {int(v): int(c) for v, c in zip(vals, counts)}
    return GenerationLedger.from_histogram(n, hist, cells=len(states))


def _immigration_draws(law, rng: np.random.Generator, size: int) -> np.ndarray:
    if size == 0:
        return np.empty(0, dtype=np.int64)
    return law.sample_many(rng, size).astype(np.int64)


def advance_generation(
    cells: Sequence[int] | np.ndarray,
    env: EnvironmentLaw,
    imm: ImmigrationPair,
    rng: np.random.Generator,
) -> np.ndarray:
    """One division round: returns the daughter states, two per input cell.

    Daughters of cell i land at positions 2i and 2i+1.  Each daughter's
    contamination is drawn independently.
    """
    states = np.asarray(cells, dtype=np.int64)
    if states.size == 0:
        raise ValueError("need at least one cell")
    n = states.size
    comps = env.sample_indices(rng, n)
    s0 = np.zeros(n, dtype=np.int64)
    s1 = np.zeros(n, dtype=np.int64)
    for ci, (law, _) in enumerate(env.components):
        mask = comps == ci
        if not mask.any():
            continue
        x = states[mask]
        a, b = law.pair_values
        counts = multinomial_counts(rng, x, law.pair_probs)
        s0[mask] = counts @ a
        s1[mask] = counts @ b
    was_zero = states == 0
    n_zero = int(was_zero.sum())
    d0 = s0.copy()
    d1 = s1.copy()
    for d in (d0, d1):
        d[was_zero] += _immigration_draws(imm.y0, rng, n_zero)
        d[~was_zero] += _immigration_draws(imm.y1, rng, n - n_zero)
    out = np.empty(2 * n, dtype=np.int64)
    out[0::2] = np.minimum(d0, BATCH_STATE_CAP)
    out[1::2] = np.minimum(d1, BATCH_STATE_CAP)
    return out


def _advance_infected_only(
    states: np.ndarray,
    run_ids: np.ndarray,
    env: EnvironmentLaw,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Zero-contamination step keeping only infected daughters."""
    if states.size == 0:
        return states, run_ids
    children = advance_generation(states, env, ImmigrationPair.zero(), rng)
    child_runs = np.repeat(run_ids, 2)
    keep = children > 0
    return children[keep], child_runs[keep]


def simulate_tree_bfs(
    k0: int,
    n_max: int,
    env: EnvironmentLaw,
    imm: ImmigrationPair,
    rng: np.random.Generator,
    max_depth: int = BFS_DEPTH_LIMIT,
) -> list[GenerationLedger]:
    """Breadth-first population run; one ledger per generation 0..n_max."""
    if n_max > max_depth:
        raise DepthTooLarge(f"depth {n_max} exceeds breadth-first bound {max_depth}")
    if imm.is_zero_pair:
        ledgers = []
        states = np.array([k0], dtype=np.int64)
        states = states[states > 0]
        runs = np.zeros(len(states), dtype=np.int64)
        for g in range(n_max + 1):
            hist = {int(v): int(c) for v, c in zip(*np.unique(states, return_counts=True))}
            hist[0] = 2**g - len(states)
            if hist[0] == 0:
                del hist[0]
            ledgers.append(GenerationLedger.from_histogram(g, hist, cells=2**g))
            if g < n_max:
                states, runs = _advance_infected_only(states, runs, env, rng)
        return ledgers
    states = np.array([k0], dtype=np.int64)
    ledgers = [_ledger_from_states(0, states)]
    for g in range(1, n_max + 1):
        states = advance_generation(states, env, imm, rng)
        ledgers.append(_ledger_from_states(g, states))
    return ledgers


def iter_forest_bfs(
    k0: int,
    n_max: int,
    env: EnvironmentLaw,
    imm: ImmigrationPair,
    rng: np.random.Generator,
    n_runs: int,
    max_depth: int = BFS_DEPTH_LIMIT,
) -> Iterator[tuple[int, np.ndarray]]:
    """Advance n_runs independent trees together, one flat array per generation.

    Yields (generation, states matrix of shape (n_runs, 2**generation)).
    Cells of independent runs are interleaved into a single vector pass, which
    is what makes many-replicate experiments affordable.
    """
    if n_max > max_depth:
        raise DepthTooLarge(f"depth {n_max} exceeds breadth-first bound {max_depth}")
    states = np.full(n_runs, k0, dtype=np.int64)
    yield 0, states.reshape(n_runs, 1)
    for g in range(1, n_max + 1):
        states = advance_generation(states, env, imm, rng)
        yield g, states.reshape(n_runs, 2**g)


def iter_forest_infected(
    k0: int,
    n_max: int,
    env: EnvironmentLaw,
    rng: np.random.Generator,
    n_runs: int,
    max_depth: int = BFS_DEPTH_LIMIT,
) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Zero-contamination forest keeping only infected cells.

    Yields (generation, infected states flat, run index per state).  The
    dropped cells are parasite-free forever, so per-run infected counts and
    histograms are exact.
    """
    if n_max > max_depth:
        raise DepthTooLarge(f"depth {n_max} exceeds breadth-first bound {max_depth}")
    states = np.full(n_runs, k0, dtype=np.int64)
    runs = np.arange(n_runs, dtype=np.int64)
    keep = states > 0
    states, runs = states[keep], runs[keep]
    yield 0, states, runs
    for g in range(1, n_max + 1):
        states, runs = _advance_infected_only(states, runs, env, rng)
        yield g, states, runs


class _DfsSampler:
    """Per-node sampling tables for the depth-first walk.

    Scalar generator calls dominate a per-node loop, so uniforms are consumed
    from a refillable buffer and small laws are inverted with bisect on plain
    Python lists.
    """

    def __init__(self, env: EnvironmentLaw, imm: ImmigrationPair, rng: np.random.Generator):
        self.rng = rng
        self.env_cum = np.cumsum(env.weights).tolist()
        self.pair_tables = []
        for law, _ in env.components:
            a, b = law.pair_values
            self.pair_tables.append(
                (np.cumsum(law.pair_probs).tolist(), a.tolist(), b.tolist(), law.pair_probs, a, b)
            )
        self.imm_tables = []
        for law in (imm.y0, imm.y1):
            if isinstance(law, HeavyTailLaw):
                self.imm_tables.append(None)  # fall back to the law's own sampler
            else:
                self.imm_tables.append((np.cumsum(law._probs_arr).tolist(), list(law.values)))
        self.imm_laws = (imm.y0, imm.y1)
        self._buf: list[float] = []
        self._idx = 0

    def uniform(self) -> float:
        if self._idx >= len(self._buf):
            self._buf = self.rng.random(8192).tolist()
            self._idx = 0
        u = self._buf[self._idx]
        self._idx += 1
        return u

    def immigration(self, infected: bool) -> int:
        table = self.imm_tables[1 if infected else 0]
        if table is None:
            return int(self.imm_laws[1 if infected else 0].sample(self.rng))
        cum, values = table
        return values[bisect.bisect_right(cum, self.uniform())]

    def offspring(self, x: int) -> tuple[int, int]:
        cum_env = self.env_cum
        ci = bisect.bisect_right(cum_env, self.uniform()) if len(cum_env) > 1 else 0
        ci = min(ci, len(cum_env) - 1)
        cum, a_list, b_list, probs, a_arr, b_arr = self.pair_tables[ci]
        if x == 0:
            return 0, 0
        if x <= _DFS_SMALL_STATE:
            s0 = 0
            s1 = 0
            for _ in range(x):
                j = min(bisect.bisect_right(cum, self.uniform()), len(a_list) - 1)
                s0 += a_list[j]
                s1 += b_list[j]
            return s0, s1
        counts = self.rng.multinomial(x, probs)
        return int(counts @ a_arr), int(counts @ b_arr)


def simulate_tree_dfs(
    k0: int,
    n_target: int,
    env: EnvironmentLaw,
    imm: ImmigrationPair,
    rng: np.random.Generator,
    accumulator: dict[int, int] | None = None,
    max_depth: int = DFS_DEPTH_LIMIT,
) -> GenerationLedger:
    """Depth-first run tallying only the target generation, in O(depth) memory.

    The walk carries each cell state down one root-to-leaf path at a time and
    produces the same leaf-histogram law as the breadth-first simulator.  When
    ``accumulator`` is given, the leaf counts are also merged into it so
    replicate trees can share a tally.
    """
    if n_target > max_depth:
        raise DepthTooLarge(f"depth {n_target} exceeds depth-first bound {max_depth}")
    sampler = _DfsSampler(env, imm, rng)
    hist: dict[int, int] = {}
    stack: list[tuple[int, int]] = [(0, k0)]
    while stack:
        depth, state = stack.pop()
        if depth == n_target:
            hist[state] = hist.get(state, 0) + 1
            continue
        s0, s1 = sampler.offspring(state)
        infected = state > 0
        d0 = s0 + sampler.immigration(infected)
        d1 = s1 + sampler.immigration(infected)
        stack.append((depth + 1, d1))
        stack.append((depth + 1, d0))
    if accumulator is not None:
        for k, c in hist.items():
            accumulator[k] = accumulator.get(k, 0) + c
    return GenerationLedger.from_histogram(n_target, hist, cells=2**n_target)


def infected_fraction_series(ledgers: Sequence[GenerationLedger]) -> np.ndarray:
    """Fraction of infected cells per generation."""
    return np.array([led.infected / led.cells for led in ledgers])


def total_parasites_series(ledgers: Sequence[GenerationLedger]) -> list[int]:
    """Total parasite count per generation."""
    return [led.parasites_total for led in ledgers]


def prefix_ledgers(ledgers: Sequence[GenerationLedger]) -> list[PrefixLedger]:
    """Cumulative histograms over generations 0..n for each n."""
    out = []
    counts: dict[int, int] = {}
    for led in ledgers:
        for k, c in led.histogram.items():
            counts[k] = counts.get(k, 0) + c
        out.append(PrefixLedger(n=led.n, counts=dict(counts), denominator=2 ** (led.n + 1)))
    return out


@dataclass(frozen=True)
class GrowthFit:
    """Least-squares growth exponent of a count series on the log scale."""

    exponent: float
    window: tuple[int, int]
    zero_censored: int


def growth_exponent(series: Sequence[int], window: tuple[int, int] | None = None) -> GrowthFit:
    """Exponential growth rate fitted on the last half of the generations.

    Zero counts are excluded from the fit and reported; early generations are
    skipped because their small counts dominate the log scale otherwise.
    """
    arr = np.asarray(series, dtype=float)
    if arr.size == 0:
        raise EmptySeries("no generations to fit")
    if window is None:
        window = (math.ceil((arr.size - 1) / 2), arr.size)
    start, stop = window
    segment = arr[start:stop]
    idx = np.arange(start, stop)
    positive = segment > 0
    censored = int((~positive).sum())
    if positive.sum() < 2:
        raise EmptySeries("fewer than two positive counts in the fit window")
    coeffs = np.polyfit(idx[positive], np.log(segment[positive]), 1)
    return GrowthFit(exponent=float(coeffs[0]), window=window, zero_censored=censored)


def collapsed_total_law(env: EnvironmentLaw) -> FiniteLaw:
    """The shared per-parasite brood-size law, if the environment has one.

    The total-parasite shortcut is valid exactly when every realized
    mechanism gives the same law for a parasite's total number of children.
    """
    laws = [law.total_law() for law, _ in env.components]
    first = laws[0]
    for other in laws[1:]:
        if other.values != first.values or any(
            abs(p - q) > 1e-12 for p, q in zip(other.probs, first.probs)
        ):
            raise ValueError("environment components disagree on the total brood law")
    return first


def simulate_parasite_totals(
    env: EnvironmentLaw,
    imm: ImmigrationPair,
    k0: int,
    n_max: int,
    rng: np.random.Generator,
    n_runs: int,
) -> np.ndarray:
    """Generation totals of parasites for many runs, without building trees.

    Requires a shared brood-size law across realized environments and
    state-independent finite contamination; under those preconditions the
    returned (n_runs, n_max+1) series has exactly the law of the full tree's
    per-generation totals.
    """
    z_law = collapsed_total_law(env)
    if isinstance(imm.y0, HeavyTailLaw) or isinstance(imm.y1, HeavyTailLaw):
        raise ValueError("total-parasite shortcut needs finite contamination laws")
    if imm.y0.values != imm.y1.values or any(
        abs(p - q) > 1e-12 for p, q in zip(imm.y0.probs, imm.y1.probs)
    ):
        raise ValueError("total-parasite shortcut needs state-independent contamination")
    y_vals = np.asarray(imm.y0.values, dtype=np.int64)
    y_probs = np.asarray(imm.y0.probs, dtype=float)
    z_vals = np.asarray(z_law.values, dtype=np.int64)
    z_probs = np.asarray(z_law.probs, dtype=float)

    totals = np.empty((n_runs, n_max + 1), dtype=np.int64)
    current = np.full(n_runs, k0, dtype=np.int64)
    totals[:, 0] = current
    for g in range(1, n_max + 1):
        offspring = multinomial_counts(rng, current, z_probs) @ z_vals
        arrivals = multinomial_counts(rng, np.full(n_runs, 2**g, dtype=np.int64), y_probs) @ y_vals
        current = np.minimum(offspring + arrivals, BATCH_STATE_CAP)
        totals[:, g] = current
    return totals
