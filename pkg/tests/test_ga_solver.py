import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gampc.cost_constraints import HorizonSpec, MpcProblem
from gampc.ga_solver import (
    Candidate,
    GaConfig,
    blend,
    crossover,
    decode,
    fitness,
    init_population,
    mutate,
    random_candidates,
    roulette_select,
    search_box,
    solve,
    variational_block,
)
from gampc.obstacles import Obstacle
from gampc.road_map import HermiteSegment, RoadMap
from gampc.vehicle_dynamics import ControlInput, VehicleState, integrate_plant_step

genes = st.floats(-1e3, 1e3, allow_nan=False)
candidates = st.tuples(genes, genes, genes, genes)


def straight(L=300.0):
    return RoadMap([HermiteSegment(0.0, L, (0.0, 0.0), (L, 0.0), (L, 0.0), (L, 0.0))])


def obstacle_problem(N=10):
    return MpcProblem(straight(), horizon=HorizonSpec(N=N, v_ref=8.0),
                      obstacles=(Obstacle(25.0, -0.8, a=2.0, b=1.0),))


# -- decoding ------------------------------------------------------------------

def test_decode_examples():
    assert np.array_equal(decode(Candidate(0, 0.2, 0, 100.0), 4), np.tile([0.2, 100.0], (4, 1)))
    assert decode(Candidate(0.01, 0.1, 0, 0), 20)[19, 0] == pytest.approx(0.29)
    assert not decode(Candidate(), 7).any()
    with pytest.raises(ValueError):
        decode(Candidate(), 0)


@given(candidates, st.integers(2, 40))
def test_decode_linearity(c, N):
    U = decode(c, N)
    d = np.diff(U, axis=0)
    assert np.allclose(d, d[0], rtol=0, atol=1e-9 * (1 + np.abs(U).max()))
    assert tuple(U[0]) == (c[1], c[3])


def test_shift_reanchors_ramp():
    c = Candidate(0.01, 0.1, 50.0, 200.0)
    s = c.shifted(1.0)
    assert np.allclose(decode(s, 5)[:4], decode(c, 6)[1:5])
    assert c.shifted(0.0) == c


# -- initialisation --------------------------------------------------------------

def test_population_layout():
    cfg = GaConfig(n_pop=11)
    rng = np.random.default_rng(0)
    pop = init_population(None, cfg, 20, 0.12, rng)
    assert pop.shape == (11, 4)
    assert not pop[0].any()
    # zero intercepts get the additive floor
    assert sorted(set(pop[1:10, 1])) == pytest.approx([-0.01, 0.0, 0.01])
    assert sorted(set(pop[1:10, 3])) == pytest.approx([-60.0, 0.0, 60.0])


def test_variational_block_relative():
    cfg = GaConfig()
    block = variational_block(Candidate(0.3, 0.2, 7.0, 1000.0), cfg)
    assert sorted(set(block[:, 1])) == pytest.approx([0.18, 0.2, 0.22])
    assert sorted(set(block[:, 3])) == pytest.approx([900.0, 1000.0, 1100.0])
    assert set(block[:, 0]) == {0.3} and set(block[:, 2]) == {7.0}
    sloped = variational_block(Candidate(0.3, 0.2, 7.0, 1000.0), GaConfig(vary_slopes=True))
    assert sorted(set(sloped[:, 0])) == pytest.approx([0.27, 0.3, 0.33])


def test_warm_start_slot_is_shifted_previous():
    prev = Candidate(0.02, 0.1, 10.0, 500.0)
    pop = init_population(prev, GaConfig(), 20, 0.12, np.random.default_rng(0), shift=0.5)
    assert tuple(pop[0]) == pytest.approx(tuple(prev.shifted(0.5)))


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 30))
def test_random_candidates_inside_search_box(seed, N):
    cfg = GaConfig()
    g = random_candidates(500, cfg, N, 0.12, np.random.default_rng(seed))
    assert np.all(np.abs(g) <= search_box(cfg, N, 0.12) * (1 + 1e-12))
    assert np.all(np.abs(g[:, 1]) <= cfg.lim_u1) and np.all(np.abs(g[:, 3]) <= cfg.lim_u2)


def test_random_slopes_centered_on_cancelling_ramp():
    cfg = GaConfig()
    N, dt = 20, 0.12
    g = random_candidates(200000, cfg, N, dt, np.random.default_rng(5))
    # per second slope minus the intercept-cancelling part is uniform on [-lim, lim]
    k = (g[:, 0] / dt + g[:, 1] / (N * dt)) / cfg.lim_u1
    assert k.min() >= -1 and k.max() <= 1
    assert abs(k.mean()) < 0.01


def test_config_validation():
    with pytest.raises(ValueError):
        GaConfig(n_pop=10)
    with pytest.raises(ValueError):
        GaConfig(n_gen=0)
    with pytest.raises(ValueError):
        GaConfig(beta_th=1.5)


# -- fitness and selection -----------------------------------------------------------

def test_fitness_examples():
    assert fitness([2.0])[0] == 0.5
    assert fitness([1e12])[0] == pytest.approx(1e-12)


@given(st.lists(st.floats(1e-3, 1e12), min_size=2, max_size=30))
def test_fitness_order_reverses_cost_order(costs):
    c = np.array(costs)
    f = fitness(c)
    assert np.all(np.sign(np.subtract.outer(f, f)) == -np.sign(np.subtract.outer(c, c)))


def test_roulette_chi_square_one_to_three():
    idx = roulette_select([1.0, 3.0], 10000, np.random.default_rng(11))
    counts = np.bincount(idx, minlength=2)
    assert stats.chisquare(counts, [2500, 7500]).pvalue > 0.001


@pytest.mark.parametrize("f", [
    [1.0, 3.0],
    [6.0, 6.0, 1.0, 1.0, 1.0, 1.0, 10.0, 10.0, 10.0, 10.0],
    [0.5, 2.0, 0.01, 7.0, 3.3],
    list(np.linspace(0.1, 4.0, 40)),
])
def test_roulette_frequencies_within_three_sigma(f):
    f = np.array(f)
    n = 10000
    counts = np.bincount(roulette_select(f, n, np.random.default_rng(2024)), minlength=len(f))
    p = f / f.sum()
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3 * sigma)


def test_roulette_edge_cases():
    rng = np.random.default_rng(0)
    assert set(roulette_select([5.0], 100, rng)) == {0}
    counts = np.bincount(roulette_select(np.ones(4), 8000, rng), minlength=4)
    assert stats.chisquare(counts).pvalue > 0.001
    # degenerate wheel falls back to uniform
    assert len(set(roulette_select([0.0, 0.0, 0.0], 300, rng))) == 3


# -- crossover and mutation ----------------------------------------------------------

def test_blend_identity_and_midpoint():
    parents = np.array([[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]])
    assert np.array_equal(blend(parents, np.ones((1, 4))), parents)
    mid = blend(parents, np.full((1, 4), 0.5))
    assert np.array_equal(mid[0], mid[1]) and np.allclose(mid[0], [3, 4, 5, 6])


@settings(max_examples=100)
@given(st.lists(candidates, min_size=2, max_size=40).filter(lambda x: len(x) % 2 == 0),
       st.integers(0, 2**32 - 1))
def test_crossover_gene_sum_conservation(parents, seed):
    p = np.array(parents, dtype=float)
    alphas = np.random.default_rng(seed).random((len(p) // 2, 4))
    c = blend(p, alphas)
    assert np.allclose(c[0::2] + c[1::2], p[0::2] + p[1::2], rtol=1e-12, atol=1e-9)


def test_crossover_keeps_elite_and_size():
    cfg = GaConfig()
    rng = np.random.default_rng(2)
    parents = rng.normal(size=(30, 4))
    best = Candidate(0.1, 0.2, 3.0, 4.0)
    pop = crossover(parents, best, cfg, rng)
    assert pop.shape == (cfg.n_pop, 4)
    assert tuple(pop[0]) == tuple(best)
    odd = GaConfig(n_pop=41)
    assert crossover(rng.normal(size=(32, 4)), best, odd, rng).shape == (41, 4)


def test_mutation_boundaries():
    pop = np.random.default_rng(0).normal(size=(40, 4))
    same = mutate(pop, GaConfig(beta_th=1.0), np.random.default_rng(1))
    assert np.array_equal(same, pop)
    allm = mutate(pop, GaConfig(beta_th=0.0), np.random.default_rng(1))
    assert np.array_equal(allm[0], pop[0])
    ratio = allm[1:] / pop[1:]
    assert np.all((ratio >= 0.8) & (ratio <= 1.2)) and np.all(ratio != 1.0)
    zeros = mutate(np.zeros((12, 4)), GaConfig(beta_th=0.0), np.random.default_rng(1))
    assert not zeros.any()


# -- solve ---------------------------------------------------------------------------

def test_single_generation_not_worse_than_zero_candidate():
    problem = MpcProblem(straight(), horizon=HorizonSpec(N=10, v_ref=8.0))
    x0 = VehicleState(s=5.0, Vx=8.0)
    sol = solve(x0, None, problem, GaConfig(n_pop=11, n_gen=1), seed=0)
    assert sol.best_cost <= problem.rollout_cost(x0, decode(Candidate(), 10))


@pytest.mark.parametrize("seed", range(8))
def test_elitism_monotone_every_generation(seed):
    sol = solve(VehicleState(s=10.0, Vx=6.0, y=0.3), Candidate(0.0, 0.05, 0.0, 100.0),
                obstacle_problem(), GaConfig(n_gen=40), seed=seed)
    f = np.array(sol.fitness_history)
    assert len(f) == 40
    assert np.all(np.diff(f) >= 0.0)
    assert sol.best_cost == pytest.approx(1.0 / f[-1], rel=1e-15)


@settings(max_examples=15)
@given(st.integers(0, 2**63 - 1), st.floats(-1.0, 1.0), st.floats(2.0, 14.0))
def test_elitism_property(seed, y0, v0):
    sol = solve(VehicleState(s=10.0, y=y0, Vx=v0), None, obstacle_problem(N=8),
                GaConfig(n_gen=10), seed=seed)
    assert np.all(np.diff(sol.fitness_history) >= 0.0)


def test_solution_sequence_matches_best():
    sol = solve(VehicleState(s=10.0, Vx=7.0), None, obstacle_problem(), seed=3)
    assert np.array_equal(sol.input_sequence, decode(sol.best, 10))
    assert sol.first_input == (sol.best.b1, sol.best.b2)
    assert len(sol.mean_cost_history) == len(sol.fitness_history)


def test_same_seed_bitwise_identical():
    x0 = VehicleState(s=10.0, Vx=7.0, y=-0.2)
    a = solve(x0, Candidate(0.01, 0.1, 5.0, 50.0), obstacle_problem(), seed=99)
    b = solve(x0, Candidate(0.01, 0.1, 5.0, 50.0), obstacle_problem(), seed=99)
    assert a.best == b.best and a.best_cost == b.best_cost
    assert a.fitness_history == b.fitness_history
    assert np.array_equal(a.input_sequence, b.input_sequence)
    c = solve(x0, Candidate(0.01, 0.1, 5.0, 50.0), obstacle_problem(), seed=100)
    assert c.fitness_history != a.fitness_history


def test_seed_defaults_to_config_seed():
    x0 = VehicleState(s=10.0, Vx=7.0)
    a = solve(x0, None, obstacle_problem(), GaConfig(rng_seed=5))
    b = solve(x0, None, obstacle_problem(), GaConfig(), seed=5)
    assert a.fitness_history == b.fitness_history


def test_warm_start_dominance_over_consecutive_cycles():
    """Replanning a static scene after the plan advanced keeps the best cost within 20%."""
    problem = obstacle_problem(N=20)
    cfg = GaConfig()
    x = VehicleState(s=5.0, Vx=8.0)
    prev, last = None, None
    shift = 0.05 / 0.12
    for cycle in range(30):
        sol = solve(x, prev, problem, cfg, shift=shift, seed=np.random.SeedSequence([0, cycle]))
        if last is not None:
            assert sol.best_cost <= 1.2 * last
        prev, last = sol.best, sol.best_cost
        for _ in range(5):
            x = integrate_plant_step(x, ControlInput(*sol.first_input), problem.road, problem.params, 0.01)
