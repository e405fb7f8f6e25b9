"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line (visible in the
pytest output even with capture enabled) before asserting.
"""
import math
import time
import warnings

import numpy as np
import pytest

from exprgen import central_difference, random_expression
from oracles import RandomGeometry2D, energy_drift, unforced_execution_rates
from fabtune import symexpr as sx
from fabtune.autotune import best, load_study, run_study, run_trials, save_study
from fabtune.planner import assemble, build_planner
from fabtune.space import ParameterDecl, SearchSpace
from fabtune.world import (Obstacle, Scenario, TrajectoryLog, Weights, compute_metrics,
                           objective, rollout, test_scenarios)

SPACE = SearchSpace.default()
MANUAL = SPACE.manual()


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    return emit


def test_criterion_1_symbolic_gradients(report):
    start = time.perf_counter()
    xs = sx.Builder().input_group("x", 3)
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        e = random_expression(rng, xs)
        plan = sx.compile_plan({"g": sx.to_array([sx.differentiate(e, x) for x in xs])}, [xs])
        point = rng.uniform(-1, 1, 3)
        grad = plan.evaluate({"x": point})["g"]
        for i in range(3):
            fd = central_difference(e, "x", point, i)
            worst = max(worst, abs(grad[i] - fd) / max(abs(grad[i]), abs(fd), 1.0))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-5 and elapsed < 10
    report(1, ok, f"worst relative error {worst:.2e}, {elapsed:.1f} s")
    assert ok


def test_criterion_2_leaf_homogeneity(report, robot3):
    bp = assemble(robot3, 2)
    rng = np.random.default_rng(2)
    worst = 0.0
    floats = [p for p in SPACE if p.kind == "float"]
    for leaf in bp.leaves:
        plan = sx.compile_plan({"h": leaf.h[0]}, [(f"x_{leaf.name}", 1), (f"xd_{leaf.name}", 1),
                                                   ("theta", len(SPACE))])
        for _ in range(50):
            theta = dict(MANUAL, **{p.name: rng.uniform(p.lower, p.upper) for p in floats})
            vec = [theta[n] for n in SPACE.names]
            x, xd = rng.uniform(0.05, 3.0), rng.uniform(-3.0, 3.0)
            h1 = plan.run([x, xd] + vec)[0]
            for alpha in (0.5, 2.0, 7.0):
                h2 = plan.run([x, alpha * xd] + vec)[0]
                scale = abs(alpha ** 2 * h1)
                worst = max(worst, abs(h2 - alpha ** 2 * h1) / scale if scale else abs(h2))
    ok = worst <= 1e-9
    report(2, ok, f"{len(bp.leaves)} leaves, worst relative deviation {worst:.2e}")
    assert ok


def test_criterion_3_energized_conservation(report):
    rng = np.random.default_rng(3)
    drifts = []
    for _ in range(20):
        geo = RandomGeometry2D(rng)
        drifts.append(energy_drift(geo, rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)))
    ok = max(drifts) <= 1e-3
    report(3, ok, f"worst drift {max(drifts):.2e} over 20 geometries")
    assert ok


def test_criterion_4_execution_energy(report, planner3, ring):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(3):
        qd0 = rng.uniform(-1.0, 1.0, 3)
        rates, energy = unforced_execution_rates(planner3, ring, MANUAL, ring.q0, qd0,
                                                 dt=1e-3, steps=500)
        worst = max(worst, float(np.max(np.abs(rates) / energy)))
    ok = worst <= 1e-6
    report(4, ok, f"worst |dL_ex/dt| / L_ex = {worst:.2e} over 3 x 500 steps")
    assert ok


def test_criterion_5_metric_formulas(report):
    def log(ee):
        ee = np.asarray(ee, dtype=float)
        z = np.zeros((len(ee), 1))
        return TrajectoryLog(z, z, z, ee, np.zeros(len(ee)), np.zeros(len(ee)))

    line = compute_metrics(log(np.linspace([0.0, 0.0], [2.0, 1.0], 51)),
                           Scenario("r", (0.0,), (2.0, 1.0), T=50))
    three = Scenario("r", (0.0,), (1.0, 0.0), (Obstacle((0.5, 1.0), 0.1), Obstacle((1.0, -1.0), 0.1)), T=2)
    m = compute_metrics(log([[0, 0], [0.5, 0], [1, 0]]), three)
    hand = 0.7 * m.cost_distance + 0.1 * m.cost_path + 0.2 * m.cost_clearance
    ok = (abs(line.cost_path - 1.0) <= 1e-12 and abs(m.cost_distance - 1.5) <= 1e-12
          and objective(m, Weights(0.7, 0.1, 0.2)) == hand and abs(hand - 1.35) <= 1e-12)
    report(5, ok, f"c_path {line.cost_path!r}, c_distance {m.cost_distance!r}, "
                  f"objective {objective(m)!r}")
    assert ok


def test_criterion_6_goal_reaching(report, planner3, planner3_free, empty3, ring):
    t0 = time.perf_counter()
    free = rollout(planner3_free, empty3, MANUAL)
    t_free = time.perf_counter() - t0
    t0 = time.perf_counter()
    ringed = rollout(planner3, ring, MANUAL)
    t_ring = time.perf_counter() - t0
    dist = np.linalg.norm(free.ee - np.asarray(empty3.goal), axis=1)
    reached = bool(np.any(dist <= 0.05))
    clearance = float(np.min(ringed.min_gap))
    ok = (reached and free.termination == "completed" and ringed.termination == "completed"
          and clearance > 0 and t_free < 5 and t_ring < 5)
    report(6, ok, f"empty: min distance {dist.min():.4f} ({t_free:.2f} s); "
                  f"ring: min clearance {clearance:.4f} ({t_ring:.2f} s)")
    assert ok


@pytest.mark.slow
def test_criterion_7_tuned_beats_random(report, planner3, ring):
    start = time.perf_counter()
    wins = []
    for seed in range(10):
        tpe = best(run_study(SPACE, ring, planner3, n_trials=60, sampler="tpe", master_seed=seed)).cost
        rnd = best(run_study(SPACE, ring, planner3, n_trials=60, sampler="random", master_seed=seed)).cost
        wins.append(tpe <= rnd)
        print(f"seed {seed}: tpe {tpe:.4f} random {rnd:.4f}")
    elapsed = time.perf_counter() - start
    ok = sum(wins) >= 7 and elapsed <= 30 * 60
    report(7, ok, f"TPE wins {sum(wins)}/10 paired seeds, {elapsed / 60:.1f} min")
    assert ok


def test_criterion_8_tpe_quadratic(report):
    space = SearchSpace((ParameterDecl("t", 0.0, 1.0, "float", "uniform", 0.5),))
    start = time.perf_counter()
    hits = 0
    for seed in range(10):
        study = run_trials(space, lambda th: (th["t"] - 0.3) ** 2, 60, "tpe", seed)
        hits += abs(best(study).params["t"] - 0.3) <= 0.05
    elapsed = time.perf_counter() - start
    ok = hits >= 9 and elapsed < 5
    report(8, ok, f"{hits}/10 seeds within 0.05 of 0.3, {elapsed:.2f} s")
    assert ok


@pytest.mark.slow
def test_criterion_9_transfer(report, planner3, planner2, ring, ring2, robot2):
    from fabtune.autotune import evaluate_on
    tuned3 = best(run_study(SPACE, ring, planner3, n_trials=60, master_seed=0)).params
    tuned2 = best(run_study(SPACE, ring2, planner2, n_trials=60, master_seed=0)).params
    tests = test_scenarios(ring2, robot2, 10, seed=0)
    transfer = np.mean([r.cost for r in evaluate_on(planner2, tests, tuned3)])
    direct = np.mean([r.cost for r in evaluate_on(planner2, tests, tuned2)])
    gap = (transfer - direct) / direct
    ok = gap <= 0.2
    report(9, ok, f"transferred {transfer:.4f} vs direct {direct:.4f} ({gap:+.1%}); soft criterion")
    if not ok:
        warnings.warn(f"transfer objective is {gap:.1%} above the directly tuned one", UserWarning)


def test_criterion_10_determinism_and_persistence(report, planner3, ring, tmp_path):
    a = run_study(SPACE, ring, planner3, n_trials=12, master_seed=10)
    b = run_study(SPACE, ring, planner3, n_trials=12, master_seed=10)
    path = tmp_path / "study.jsonl"
    save_study(a, path)
    loaded = load_study(path)
    resumed = run_study(SPACE, ring, planner3, n_trials=13, master_seed=10, study=load_study(path))
    fresh = run_study(SPACE, ring, planner3, n_trials=13, master_seed=10)
    with open(path, "a") as fh:
        fh.write('{"type": "trial", "index": 12, "par')
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        truncated = load_study(path)
    ok = (a.trials == b.trials and loaded.trials == a.trials and resumed.trials == fresh.trials
          and truncated.trials == a.trials and any("truncated" in str(w.message) for w in caught))
    report(10, ok, "identical seeds, save/load and resume reproduce trials; truncated tail tolerated")
    assert ok
