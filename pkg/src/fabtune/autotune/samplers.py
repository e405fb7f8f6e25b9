"""Random and Tree-structured Parzen Estimator samplers.

The TPE here is the independent (per-parameter) variant: trials are split
into a good and a bad set by cost, each parameter gets a truncated Gaussian
Parzen estimator per set, and the candidate drawn from the good estimators
with the largest summed log density ratio is suggested.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import truncnorm

from ..leaves import ParameterDecl
from ..space import SearchSpace


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> dict[str, float]:
    """Floats uniform (log-uniform for log scale), ints uniform over ``{lower..upper}``."""
    theta = {}
    for p in space:
        if p.kind == "int":
            theta[p.name] = int(rng.integers(int(p.lower), int(p.upper) + 1))
        else:
            lo, hi = space.internal_bounds(p)
            theta[p.name] = space.from_internal(p, float(rng.uniform(lo, hi)))
    return theta


@dataclass(frozen=True)
class TPEConfig:
    n_startup: int = 10
    gamma: float = 0.25
    n_candidates: int = 24
    bandwidth_factor: float = 1.06
    bandwidth_floor: float = 0.01  # fraction of the parameter range
    prior_weight: float = 1.0  # weight of a broad kernel over the whole range; 0 disables it
    adaptive_floor: bool = True  # also floor the bandwidth at range / (1 + n)

    def to_dict(self) -> dict:
        return asdict(self)


class ParzenEstimator:
    """Mixture of Gaussians truncated to ``[low, high]``, one kernel per observation.

    Observation kernels share Scott's bandwidth ``factor * std * n^(-1/5)``
    floored at ``floor * (high - low)`` and, with ``adaptive_floor``, at
    ``(high - low) / (1 + n)`` so a small good set cannot collapse.  With ``prior_weight > 0`` a broad
    kernel (centered mid-range, width equal to the range) joins the mixture
    with that weight relative to each observation, which keeps some mass
    everywhere once the observations cluster.
    """

    def __init__(self, observations: Sequence[float], low: float, high: float,
                 factor: float = 1.06, floor: float = 0.01, prior_weight: float = 0.0,
                 adaptive_floor: bool = False):
        obs = np.asarray(observations, dtype=float)
        if obs.size == 0:
            raise ValueError("a Parzen estimator needs at least one observation")
        if prior_weight < 0:
            raise ValueError("prior_weight must be non-negative")
        self.low = low
        self.high = high
        span = high - low
        sigma = float(np.std(obs)) if obs.size > 1 else 0.0
        self.bandwidth = max(factor * sigma * obs.size ** -0.2, floor * span)
        if adaptive_floor:
            self.bandwidth = max(self.bandwidth, span / (1 + obs.size))
        mus = list(obs)
        sigmas = [self.bandwidth] * obs.size
        weights = [1.0] * obs.size
        if prior_weight > 0:
            mus.append(0.5 * (low + high))
            sigmas.append(span)
            weights.append(prior_weight)
        self.mus = np.array(mus)
        self.sigmas = np.array(sigmas)
        self.weights = np.array(weights) / sum(weights)
        self._a = (low - self.mus) / self.sigmas
        self._b = (high - self.mus) / self.sigmas

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        comp = rng.choice(len(self.mus), size=size, p=self.weights)
        return truncnorm.rvs(self._a[comp], self._b[comp], loc=self.mus[comp],
                             scale=self.sigmas[comp], random_state=rng)

    def logpdf(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        comp = truncnorm.logpdf(x[:, None], self._a[None, :], self._b[None, :],
                                loc=self.mus[None, :], scale=self.sigmas[None, :])
        return logsumexp(comp + np.log(self.weights)[None, :], axis=1)


def _search_bounds(space: SearchSpace, p: ParameterDecl) -> tuple[float, float]:
    lo, hi = space.internal_bounds(p)
    if p.kind == "int":
        # each integer owns a unit-width cell before rounding
        return lo - 0.5, hi + 0.5
    return lo, hi


def _to_value(space: SearchSpace, p: ParameterDecl, internal: float):
    if p.kind == "int":
        return int(min(max(round(internal), p.lower), p.upper))
    return space.from_internal(p, internal)


def split_history(costs: Sequence[float], gamma: float) -> tuple[list[int], list[int]]:
    """Indices of the ``ceil(gamma * n)`` lowest-cost trials and of the rest; ties by index."""
    key = [(c if math.isfinite(c) else math.inf, i) for i, c in enumerate(costs)]
    order = [i for _, i in sorted(key)]
    n_good = min(max(math.ceil(gamma * len(costs)), 1), len(costs))
    return order[:n_good], order[n_good:]


def suggest_tpe(space: SearchSpace, history: Sequence[tuple[Mapping[str, float], float]],
                rng: np.random.Generator, config: TPEConfig = TPEConfig()) -> dict[str, float]:
    """Next parameter set from ``(params, cost)`` history; uniform during startup."""
    if len(history) < max(config.n_startup, 2):
        return sample_uniform(space, rng)
    costs = [float(c) for _, c in history]
    good, bad = split_history(costs, config.gamma)
    score = np.zeros(config.n_candidates)
    draws: dict[str, np.ndarray] = {}
    for p in space:
        lo, hi = _search_bounds(space, p)
        values = [space.to_internal(p, float(history[i][0][p.name])) for i in range(len(history))]
        l_est = ParzenEstimator([values[i] for i in good], lo, hi, config.bandwidth_factor,
                                config.bandwidth_floor, config.prior_weight, config.adaptive_floor)
        g_est = ParzenEstimator([values[i] for i in bad], lo, hi, config.bandwidth_factor,
                                config.bandwidth_floor, config.prior_weight, config.adaptive_floor)
        cand = l_est.sample(rng, config.n_candidates)
        if p.kind == "int":
            cand = np.clip(np.round(cand), space.internal_bounds(p)[0], space.internal_bounds(p)[1])
        draws[p.name] = cand
        score += l_est.logpdf(cand) - g_est.logpdf(cand)
    best = int(np.argmax(score))
    return {p.name: _to_value(space, p, float(draws[p.name][best])) for p in space}


class RandomSampler:
    kind = "random"

    def __init__(self, config: Mapping | None = None):
        self.config: dict = dict(config or {})

    def suggest(self, space: SearchSpace, history, rng: np.random.Generator) -> dict[str, float]:
        return sample_uniform(space, rng)


class TPESampler:
    kind = "tpe"

    def __init__(self, config: TPEConfig | Mapping | None = None):
        if config is None:
            config = TPEConfig()
        elif not isinstance(config, TPEConfig):
            config = TPEConfig(**config)
        self.tpe = config
        self.config = config.to_dict()

    def suggest(self, space: SearchSpace, history, rng: np.random.Generator) -> dict[str, float]:
        return suggest_tpe(space, history, rng, self.tpe)


def make_sampler(kind: str, config: Mapping | None = None):
    if kind == "tpe":
        return TPESampler(config)
    if kind == "random":
        return RandomSampler(config)
    raise ValueError(f"unknown sampler {kind!r} (expected 'tpe' or 'random')")
