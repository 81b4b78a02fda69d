"""Real-coded genetic algorithm over linear input ramps.

A candidate holds four genes ``(a1, b1, a2, b2)`` and decodes to the input
sequence ``u1[k] = a1*k + b1``, ``u2[k] = a2*k + b2`` for ``k = 0..N-1``.
Each generation keeps the best candidate in slot 0, nine intercept
perturbations of it in slots 1-9, and fills the rest by roulette selection,
pairwise blend crossover and multiplicative mutation.

All random draws of one solve come from a single ``numpy`` generator in a
fixed order: initial random candidates, then per generation the selection
draws, the crossover weights, the mutation thresholds and the mutation
factors.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .cost_constraints import INFEASIBLE_COST, MpcProblem
from .vehicle_dynamics import VehicleState

N_VARIATIONAL = 9
N_FIXED = 1 + N_VARIATIONAL
A1, B1, A2, B2 = range(4)


class Candidate(NamedTuple):
    a1: float = 0.0
    b1: float = 0.0
    a2: float = 0.0
    b2: float = 0.0

    def shifted(self, steps: float = 1.0) -> Candidate:
        """Re-anchor the ramps ``steps`` control steps later (slopes unchanged)."""
        return Candidate(self.a1, self.b1 + steps * self.a1, self.a2, self.b2 + steps * self.a2)


@dataclass(frozen=True)
class GaConfig:
    n_pop: int = 40
    n_gen: int = 25
    var: float = 0.10
    var_floor: float = 0.02
    lim_u1: float = 0.5
    lim_u2: float = 3000.0
    beta_th: float = 0.9
    alpha_mut_range: tuple[float, float] = (-0.2, 0.2)
    rng_seed: int = 0
    vary_slopes: bool = False

    def __post_init__(self):
        if self.n_pop < N_FIXED + 1:
            raise ValueError(f"n_pop must be at least {N_FIXED + 1}")
        if self.n_gen < 1:
            raise ValueError("n_gen must be at least 1")
        if not 0.0 <= self.beta_th <= 1.0:
            raise ValueError("beta_th must lie in [0, 1]")
        lo, hi = self.alpha_mut_range
        if lo > hi:
            raise ValueError("alpha_mut_range must be (lo, hi) with lo <= hi")
        if not (self.lim_u1 > 0 and self.lim_u2 > 0):
            raise ValueError("input search limits must be positive")


@dataclass
class GaSolution:
    best: Candidate
    best_cost: float
    input_sequence: np.ndarray
    fitness_history: list = field(default_factory=list)
    mean_cost_history: list = field(default_factory=list)
    solve_ms: float = 0.0

    @property
    def first_input(self) -> tuple[float, float]:
        return float(self.input_sequence[0, 0]), float(self.input_sequence[0, 1])


def decode(c, N: int) -> np.ndarray:
    """``(N, 2)`` array of ``(u1, u2)`` for ramp candidate ``c``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    a1, b1, a2, b2 = (float(v) for v in c)
    k = np.arange(N, dtype=float)
    return np.column_stack([a1 * k + b1, a2 * k + b2])


def _variations(value: float, var: float, floor: float) -> np.ndarray:
    if abs(value) <= 1e-9:
        return np.array([-floor, 0.0, floor]) + value
    return value * np.array([1.0 - var, 1.0, 1.0 + var])


def variational_block(best, cfg: GaConfig) -> np.ndarray:
    """The 3 x 3 intercept perturbations of ``best``.

    Slopes are kept unless ``cfg.vary_slopes``, in which case each slope gets
    the same relative change as its intercept.
    """
    v1 = _variations(best[B1], cfg.var, cfg.var_floor * cfg.lim_u1)
    v2 = _variations(best[B2], cfg.var, cfg.var_floor * cfg.lim_u2)
    block = np.tile(np.asarray(best, dtype=float), (N_VARIATIONAL, 1))
    block[:, B1] = np.repeat(v1, 3)
    block[:, B2] = np.tile(v2, 3)
    if cfg.vary_slopes:
        f = 1.0 + cfg.var * np.array([-1.0, 0.0, 1.0])
        block[:, A1] *= np.repeat(f, 3)
        block[:, A2] *= np.tile(f, 3)
    return block


def random_candidates(n: int, cfg: GaConfig, N: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform intercepts in the input box and slopes spread around the intercept-cancelling ramp.

    Slopes are drawn per second, ``k' * lim - b / (N * dt)``, then converted
    to the per-step slopes used by :func:`decode`.
    """
    k = rng.uniform(-1.0, 1.0, size=(n, 4))
    lim = np.array([cfg.lim_u1, cfg.lim_u1, cfg.lim_u2, cfg.lim_u2])
    genes = k * lim
    horizon_time = N * dt
    genes[:, A1] = (genes[:, A1] - genes[:, B1] / horizon_time) * dt
    genes[:, A2] = (genes[:, A2] - genes[:, B2] / horizon_time) * dt
    return genes


def search_box(cfg: GaConfig, N: int, dt: float) -> np.ndarray:
    """Per-gene half-widths reachable by :func:`random_candidates`."""
    slope = (1.0 + 1.0 / (N * dt)) * dt
    return np.array([cfg.lim_u1 * slope, cfg.lim_u1, cfg.lim_u2 * slope, cfg.lim_u2])


def init_population(prev, cfg: GaConfig, N: int, dt: float, rng: np.random.Generator,
                    shift: float = 1.0) -> np.ndarray:
    """Warm start, its nine variations, then random candidates."""
    first = np.zeros(4) if prev is None else np.asarray(Candidate(*prev).shifted(shift), dtype=float)
    return np.vstack([first, variational_block(first, cfg),
                      random_candidates(cfg.n_pop - N_FIXED, cfg, N, dt, rng)])


def fitness(costs) -> np.ndarray:
    return 1.0 / np.asarray(costs, dtype=float)


def roulette_select(fitnesses, count: int, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn with probability proportional to fitness (cumulative wheel)."""
    f = np.asarray(fitnesses, dtype=float)
    draws = rng.random(count)
    total = f.sum()
    if not total > 0 or not np.isfinite(total):
        return np.minimum((draws * len(f)).astype(int), len(f) - 1)
    wheel = np.cumsum(f / total)
    idx = np.searchsorted(wheel, draws, side="right")
    return np.minimum(idx, len(f) - 1)


def blend(parents: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """Pairwise convex crossover of consecutive parent rows, one weight per gene."""
    p1 = parents[0::2]
    p2 = parents[1::2]
    children = np.empty_like(parents)
    children[0::2] = alphas * p1 + (1.0 - alphas) * p2
    children[1::2] = (1.0 - alphas) * p1 + alphas * p2
    return children


def crossover(parents: np.ndarray, best, cfg: GaConfig, rng: np.random.Generator) -> np.ndarray:
    n_rest = cfg.n_pop - N_FIXED
    n_pairs = (n_rest + 1) // 2
    if len(parents) < 2 * n_pairs:
        raise ValueError(f"need {2 * n_pairs} parents, got {len(parents)}")
    alphas = rng.random((n_pairs, 4))
    children = blend(np.asarray(parents[:2 * n_pairs], dtype=float), alphas)[:n_rest]
    best = np.asarray(best, dtype=float)
    return np.vstack([best, variational_block(best, cfg), children])


def mutate(population: np.ndarray, cfg: GaConfig, rng: np.random.Generator) -> np.ndarray:
    """Scale each non-elite gene by ``1 + alpha`` when its draw reaches ``beta_th``."""
    pop = np.array(population, dtype=float)
    shape = (len(pop) - 1, pop.shape[1])
    beta = rng.random(shape)
    lo, hi = cfg.alpha_mut_range
    alpha = rng.uniform(lo, hi, size=shape)
    # strict at beta_th == 1 so that threshold never fires
    hit = beta >= cfg.beta_th if cfg.beta_th < 1.0 else np.zeros(shape, dtype=bool)
    pop[1:] = np.where(hit, pop[1:] * (1.0 + alpha), pop[1:])
    return pop


def solve(x0: VehicleState, prev, problem: MpcProblem, cfg: GaConfig | None = None,
          shift: float = 1.0, seed=None) -> GaSolution:
    """Run ``cfg.n_gen`` generations and return the best candidate ever evaluated.

    ``prev`` is the previous cycle's best candidate (or ``None``); it is
    re-anchored by ``shift`` control steps before seeding slot 0. ``seed``
    overrides ``cfg.rng_seed`` (anything ``numpy.random.default_rng`` takes).
    """
    cfg = cfg or GaConfig()
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.rng_seed if seed is None else seed)
    N, dt = problem.horizon.N, problem.horizon.dt
    x0_arr = x0.as_array()
    pop = init_population(prev, cfg, N, dt, rng, shift)
    best_genes, best_cost = None, np.inf
    fit_hist, mean_hist = [], []
    for gen in range(cfg.n_gen):
        costs = problem.population_costs(x0_arr, pop)
        i = int(np.argmin(costs))
        if costs[i] < best_cost:
            best_cost = float(costs[i])
            best_genes = pop[i].copy()
        fit_hist.append(1.0 / best_cost)
        mean_hist.append(float(np.mean(costs)))
        if gen == cfg.n_gen - 1:
            break
        n_sel = 2 * ((cfg.n_pop - N_FIXED + 1) // 2)
        parents = pop[roulette_select(fitness(costs), n_sel, rng)]
        pop = mutate(crossover(parents, pop[i], cfg, rng), cfg, rng)
    best = Candidate(*(float(v) for v in best_genes))
    return GaSolution(best=best, best_cost=min(best_cost, INFEASIBLE_COST),
                      input_sequence=decode(best, N), fitness_history=fit_hist,
                      mean_cost_history=mean_hist, solve_ms=1e3 * (time.perf_counter() - t0))
