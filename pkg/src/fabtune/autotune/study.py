"""Study loop: suggest, roll out, score, record."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from ..space import SearchSpace
from ..world import Metrics, Scenario, Weights, compute_metrics, objective, rollout
from .samplers import make_sampler


@dataclass
class Trial:
    index: int
    params: dict[str, float]
    cost: float
    metrics: Metrics | None = None
    termination: str = "completed"
    termination_step: int | None = None
    rng_seed: int = 0
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class Study:
    space: SearchSpace
    sampler: str
    sampler_config: dict
    weights: Weights
    master_seed: int
    trials: list[Trial] = field(default_factory=list)
    scenario: dict | None = None
    scenario_path: str | None = None
    planner: dict | None = None

    def __len__(self):
        return len(self.trials)

    @property
    def costs(self) -> list[float]:
        return [t.cost for t in self.trials]

    def history(self) -> list[tuple[dict, float]]:
        return [(t.params, t.cost) for t in self.trials]

    def best(self) -> Trial:
        return best(self)

    def best_so_far(self) -> list[float]:
        return best_so_far(self.costs)


def best(study: Study) -> Trial:
    """Lowest-cost trial; the earliest one wins ties."""
    if not study.trials:
        raise ValueError("study has no trials")
    return min(study.trials, key=lambda t: (t.cost if not math.isnan(t.cost) else math.inf, t.index))


def best_so_far(costs) -> list[float]:
    out = []
    running = math.inf
    for c in costs:
        if c < running:
            running = c
        out.append(running)
    return out


def trial_seed(master_seed: int, index: int) -> int:
    """Per-trial RNG seed derived from the master seed and the trial counter."""
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1)[0])


@dataclass(eq=False)
class Evaluation:
    cost: float
    metrics: Metrics | None = None
    termination: str = "completed"
    termination_step: int | None = None


class RolloutObjective:
    """Cost of one parameter set: roll out the planner, score the trajectory."""

    def __init__(self, planner, scenario: Scenario, weights: Weights = Weights()):
        self.planner = planner
        self.scenario = scenario
        self.weights = weights

    def __call__(self, theta: Mapping[str, float]) -> Evaluation:
        log = rollout(self.planner, self.scenario, theta)
        metrics = compute_metrics(log, self.scenario)
        cost = objective(metrics, self.weights)
        if not math.isfinite(cost):
            cost = math.inf
        return Evaluation(cost, metrics, log.termination, log.termination_step)


def run_trials(space: SearchSpace, evaluate: Callable[[dict], Evaluation | float], n_trials: int,
               sampler: str = "tpe", master_seed: int = 0, sampler_config: Mapping | None = None,
               study: Study | None = None, weights: Weights = Weights(),
               on_trial: Callable[[Trial], None] | None = None, batch_size: int = 1,
               executor=None) -> Study:
    """Run (or continue) a study until it holds ``n_trials`` trials.

    With ``batch_size > 1`` each round suggests that many candidates from the
    same history and evaluates them, through ``executor.map`` when given.
    Trials are committed in suggestion order either way.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    smp = make_sampler(sampler, sampler_config)
    if study is None:
        study = Study(space, smp.kind, dict(smp.config), weights, int(master_seed))
    elif study.sampler != smp.kind or study.master_seed != master_seed:
        raise ValueError("continuing a study needs the same sampler and master seed")
    while len(study.trials) < n_trials:
        start = len(study.trials)
        indices = range(start, min(start + batch_size, n_trials))
        history = study.history()
        seeds = [trial_seed(study.master_seed, i) for i in indices]
        suggestions = [space.validate(smp.suggest(space, history, np.random.default_rng(s)))
                       for s in seeds]
        t0 = time.perf_counter()
        if executor is not None and len(suggestions) > 1:
            results = list(executor.map(evaluate, suggestions))
        else:
            results = [evaluate(theta) for theta in suggestions]
        elapsed = (time.perf_counter() - t0) / len(suggestions)
        for i, theta, seed, res in zip(indices, suggestions, seeds, results):
            if not isinstance(res, Evaluation):
                res = Evaluation(float(res))
            trial = Trial(i, theta, float(res.cost), res.metrics, res.termination,
                          res.termination_step, seed, elapsed)
            study.trials.append(trial)
            if on_trial is not None:
                on_trial(trial)
    return study


def check_compatible(planner, scenario: Scenario):
    if len(scenario.obstacles) > planner.obstacle_count:
        raise ValueError(f"scenario has {len(scenario.obstacles)} obstacles but the planner "
                         f"was built for {planner.obstacle_count}")
    scenario.check_robot(planner.robot)


def run_study(space: SearchSpace, scenario: Scenario, planner, weights: Weights = Weights(),
              n_trials: int = 60, sampler: str = "tpe", master_seed: int = 0,
              sampler_config: Mapping | None = None, study: Study | None = None,
              scenario_path: str | None = None, on_trial=None, batch_size: int = 1,
              executor=None) -> Study:
    """Tune planner parameters on one scenario; deterministic given ``master_seed``."""
    check_compatible(planner, scenario)
    if study is None:
        smp = make_sampler(sampler, sampler_config)
        study = Study(space, smp.kind, dict(smp.config), weights, int(master_seed),
                      scenario=scenario.to_dict(), scenario_path=scenario_path,
                      planner=planner.metadata())
    evaluate = RolloutObjective(planner, scenario, weights)
    return run_trials(space, evaluate, n_trials, sampler, master_seed, sampler_config, study,
                      weights, on_trial, batch_size, executor)


def evaluate_on(planner, scenarios, theta: Mapping[str, float],
                weights: Weights = Weights()) -> list[Evaluation]:
    """Objective of one parameter set on each scenario, in scenario order."""
    results = []
    for sc in scenarios:
        check_compatible(planner, sc)
        results.append(RolloutObjective(planner, sc, weights)(theta))
    return results
