"""End-to-end acceptance criteria, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line, repeated in the terminal summary.
"""
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE_LINES
from gampc.ga_solver import GaConfig, blend, roulette_select, solve
from gampc.road_map import fit_waypoints
from gampc.sim_harness import emit_outputs, load_scenario, run_scenario
from gampc.sim_harness.cli import EXIT_FAIL, bench, main, resolve_scenario
from gampc.sim_harness.tracks import campus_turns, circle_points
from gampc.vehicle_dynamics import VehicleParams, pacejka_lateral
from oracles import dense_ellipse_distance, random_ellipse_pair

sys.path.insert(0, str(Path(__file__).parent / "fixtures"))
from make_lattice import instance  # noqa: E402

pytestmark = pytest.mark.slow

ROAD_HALF_WIDTH = 1.75


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def scenario(name, *overrides):
    return load_scenario(resolve_scenario(name), overrides)


def max_abs_y(log):
    return float(np.abs(log.state_array()[:, 1]).max())


def test_1_full_lap_lane_keeping():
    rows, ok = [], True
    for name in ("lap_v4", "lap_v8"):
        t0 = time.perf_counter()
        log = run_scenario(scenario(name))
        wall = time.perf_counter() - t0
        y = max_abs_y(log)
        good = log.termination == "goal" and y <= ROAD_HALF_WIDTH and not log.collision
        ok &= good
        rows.append(f"{name}: {log.termination} max|y|={y:.3f} m wall={wall:.0f} s")
    assert report(1, ok, "; ".join(rows))


def test_2_static_obstacle_avoidance():
    rows, ok = [], True
    for v in (4, 8, 12, 18):
        log = run_scenario(scenario("static_obstacle", f"horizon.v_ref={v}"))
        d = log.min_obstacle_distance()
        y = max_abs_y(log)
        good = log.termination == "goal" and bool(np.all(d > 0.0)) and y <= ROAD_HALF_WIDTH
        if v != 18:
            ok &= good
        tag = "" if v != 18 else " (attempted, not gated: " + ("ok" if good else "failed") + ")"
        rows.append(f"v={v}: min dist={d.min():.3f} m max|y|={y:.3f} m{tag}")
    assert report(2, ok, "; ".join(rows))


def _passing_time(t, ego_s, obs_s):
    ahead = np.nonzero(ego_s > obs_s)[0]
    behind = np.nonzero(ego_s <= obs_s)[0]
    if ahead.size == 0 or behind.size == 0 or ahead[-1] < behind[-1]:
        return None
    return t[behind[-1] + 1]


def test_3_moving_obstacle_overtaking():
    cfg = scenario("moving_obstacles")
    log = run_scenario(cfg)
    X = log.state_array()
    t = np.asarray(log.t)
    a, b, c = cfg.obstacles
    pass_a = _passing_time(t, X[:, 0], a.s_obs + a.v_s * t)
    pass_c = _passing_time(t, X[:, 0], c.s_obs + c.v_s * t)
    d_b = log.distance_array()[:, 1].min()
    v_mean = float(X[:, 3].mean())
    ok = (not log.collision and pass_a is not None and pass_c is not None and pass_a < pass_c
          and v_mean > 3.0 and float(log.min_obstacle_distance().min()) > 0.0)
    detail = (f"passed A at t={pass_a} s, C at t={pass_c} s, min dist to B={d_b:.3f} m, "
              f"collision={log.collision}, mean speed={v_mean:.2f} m/s")
    assert report(3, ok, detail)


def test_4_friction_robustness_band(tmp_path):
    _, turn2_exit, _ = campus_turns()["turn2"]
    rows, ok = [], True
    for mu in (0.4, 0.5, 0.6, 0.7):
        cfg = scenario("friction_sweep", f"plant.mu={mu}")
        assert cfg.vehicle.mu == 0.7
        log = run_scenario(cfg)
        y = max_abs_y(log)
        good = log.termination == "goal" and log.state_array()[-1, 0] > turn2_exit and y <= ROAD_HALF_WIDTH
        ok &= good
        rows.append(f"mu={mu}: max|y|={y:.3f} m")
    code = main(["run", str(resolve_scenario("friction_sweep")), "--override", "plant.mu=0.2",
                 "--out-dir", str(tmp_path)])
    summary = json.loads((tmp_path / "friction_sweep_summary.json").read_text())
    ok &= code == EXIT_FAIL
    rows.append(f"mu=0.2: exit {code} max|y|={summary['max_abs_y']:.3f} m")
    assert report(4, ok, "; ".join(rows))


def test_5_real_time_budget(tmp_path):
    cfg = scenario("moving_obstacles")
    assert cfg.ga == GaConfig()
    r = bench(cfg, 500)
    (tmp_path / "bench.json").write_text(json.dumps(r, indent=2))
    ok = r["cycles"] == 500 and r["mean_ms"] <= 50.0 and r["p95_ms"] <= 60.0
    detail = (f"{r['cycles']} cycles mean={r['mean_ms']:.2f} ms p95={r['p95_ms']:.2f} ms "
              f"on {r['machine']['cpu']} ({r['machine']['cores']} cores)")
    assert report(5, ok, detail)


def test_6_map_fit_accuracy():
    R = 10.0
    road = fit_waypoints(circle_points(R, 0.01), 4.0, cyclic=True)
    _, curve = road.sample(100000)
    dist = float(np.abs(np.hypot(*curve.T) - R).max())
    assert report(6, dist <= 0.05, f"max distance to the analytic circle = {dist:.4f} m (limit 0.05)")


def test_7_ga_oracle_equivalence():
    fixture = json.loads((Path(__file__).parent / "fixtures" / "ga_lattice.json").read_text())
    problem, x0 = instance()
    # the stored argmin must still evaluate to the stored minimum on this build
    U = np.array(fixture["argmin"])
    k = np.arange(problem.horizon.N)
    seq = np.column_stack([U[0] * k + U[1], U[2] * k + U[3]])
    assert problem.rollout_cost(x0, seq) == pytest.approx(fixture["min_cost"], rel=1e-9)
    solve(x0, None, problem, GaConfig(), seed=0)  # compile outside the timed call
    t0 = time.perf_counter()
    sol = solve(x0, None, problem, GaConfig(), seed=0)
    wall = time.perf_counter() - t0
    ratio = sol.best_cost / fixture["min_cost"]
    ok = ratio <= 1.05 and wall < 1.0
    assert report(7, ok, f"GA/lattice cost ratio = {ratio:.5f} (limit 1.05), solve {1e3 * wall:.1f} ms")


def _elitism_check():
    problem, x0 = instance()
    for seed in range(20):
        f = solve(x0, None, problem, GaConfig(n_gen=30), seed=seed).fitness_history
        if np.any(np.diff(f) < 0):
            return False, f"seed {seed} lost fitness"
    return True, "20 seeds x 30 generations"


def _chi_square_check():
    counts = np.bincount(roulette_select([1.0, 3.0], 10000, np.random.default_rng(0)), minlength=2)
    p = stats.chisquare(counts, [2500, 7500]).pvalue
    return p > 0.001, f"p={p:.3f}"


def _crossover_check():
    rng = np.random.default_rng(1)
    parents = rng.normal(scale=100.0, size=(1000, 4))
    kids = blend(parents, rng.random((500, 4)))
    err = np.abs(kids[0::2] + kids[1::2] - parents[0::2] - parents[1::2]).max()
    return err < 1e-10, f"max sum error {err:.1e}"


def _pacejka_check():
    p = VehicleParams()
    a = np.linspace(-0.5, 0.5, 200001)
    f = pacejka_lateral(a, p)
    odd = np.array_equal(pacejka_lateral(-a, p), -f)
    peak = np.abs(f).max() / (0.7 * 1200 * 9.81 / 4)
    return odd and abs(peak - 1) <= 0.01, f"odd={odd} peak ratio={peak:.4f}"


def _ellipse_check():
    from gampc.obstacles import relative_distance

    rng = np.random.default_rng(2024)
    rel = []
    for _ in range(1000):
        e1, e2 = random_ellipse_pair(rng)
        err = abs(relative_distance(e1, e2) - dense_ellipse_distance(e1, e2))
        rel.append(err / min(e1.semi_minor, e2.semi_minor))
    rel = np.array(rel)
    return rel.max() < 0.15, f"worst {rel.max():.1%} of semi-minor, {np.mean(rel >= 0.15):.1%} of pairs over 15%"


def _rk4_check():
    from gampc.road_map import HermiteSegment, RoadMap
    from gampc.vehicle_dynamics import ControlInput, VehicleState, plant_step

    L = 2000.0
    road = RoadMap([HermiteSegment(0.0, L, (0.0, 0.0), (L, 0.0), (L, 0.0), (L, 0.0))])
    x0 = VehicleState(Vx=12.0, Vy=0.3, omega=0.2, delta=0.02, tau=300.0)
    u = ControlInput(0.08, 200.0)
    p = VehicleParams()

    def final(dt):
        x = x0
        for _ in range(int(round(1.0 / dt))):
            x, _ = plant_step(x, u, road, p, dt)
        return x.as_array()

    ref = final(0.0005)
    errs = [np.abs(final(dt) - ref).max() for dt in (0.04, 0.02, 0.01)]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    return all(3.5 < q < 4.5 for q in orders), "orders " + ", ".join(f"{q:.2f}" for q in orders)


def _determinism_check(tmp):
    cfg = scenario("static_obstacle")
    a = emit_outputs(run_scenario(cfg), tmp / "a")["trajectory"].read_bytes()
    b = emit_outputs(run_scenario(cfg), tmp / "b")["trajectory"].read_bytes()
    return a == b, f"{len(a)} trajectory bytes compared"


def test_8_property_suites(tmp_path):
    checks = {
        "elitism": _elitism_check(),
        "selection chi-square": _chi_square_check(),
        "crossover conservation": _crossover_check(),
        "pacejka": _pacejka_check(),
        "ellipse distance vs dense oracle": _ellipse_check(),
        "rk4 order": _rk4_check(),
        "bitwise rerun": _determinism_check(tmp_path),
    }
    ok = all(good for good, _ in checks.values())
    detail = "; ".join(f"{name} {'ok' if good else 'FAILED'} ({why})" for name, (good, why) in checks.items())
    assert report(8, ok, detail)
