"""Bounded, typed search spaces over planner parameters."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np

from .leaves import PARAMETERS, ParameterDecl


class ParameterBoundsError(ValueError):
    """A parameter set is missing names, has extra names, or leaves its bounds."""


@dataclass(frozen=True)
class SearchSpace:
    params: tuple[ParameterDecl, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        names = [p.name for p in self.params]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValueError(f"duplicate parameter names: {', '.join(dupes)}")

    @classmethod
    def default(cls) -> "SearchSpace":
        return cls(PARAMETERS)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def __len__(self):
        return len(self.params)

    def __iter__(self):
        return iter(self.params)

    def __getitem__(self, name: str) -> ParameterDecl:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def manual(self) -> dict[str, float]:
        return {p.name: _typed(p, p.manual) for p in self.params}

    def with_overrides(self, overrides: Iterable[ParameterDecl]) -> "SearchSpace":
        by_name = {p.name: p for p in overrides}
        unknown = set(by_name) - set(self.names)
        if unknown:
            raise ValueError(f"unknown parameters in overrides: {', '.join(sorted(unknown))}")
        return SearchSpace(tuple(by_name.get(p.name, p) for p in self.params))

    def validate(self, theta: Mapping[str, float]) -> dict[str, float]:
        """Check names, integrality and closed bounds; return a clean copy."""
        missing = [n for n in self.names if n not in theta]
        extra = [n for n in theta if n not in self.names]
        if missing or extra:
            raise ParameterBoundsError(
                f"parameter set mismatch (missing: {missing or 'none'}, unknown: {extra or 'none'})")
        out = {}
        for p in self.params:
            v = float(theta[p.name])
            if not math.isfinite(v) or not p.lower <= v <= p.upper:
                raise ParameterBoundsError(f"{p.name}={v} outside [{p.lower}, {p.upper}]")
            if p.kind == "int" and v != round(v):
                raise ParameterBoundsError(f"{p.name}={v} must be integral")
            out[p.name] = _typed(p, v)
        return out

    def contains(self, theta: Mapping[str, float]) -> bool:
        try:
            self.validate(theta)
        except ParameterBoundsError:
            return False
        return True

    def vector(self, theta: Mapping[str, float], order: Iterable[str] | None = None) -> np.ndarray:
        clean = self.validate(theta)
        return np.array([float(clean[n]) for n in (order or self.names)])

    # internal (search) coordinates: log10 for log-scaled parameters
    def to_internal(self, p: ParameterDecl, value: float) -> float:
        return math.log10(value) if p.scale == "log" else float(value)

    def from_internal(self, p: ParameterDecl, value: float) -> float:
        v = 10.0 ** value if p.scale == "log" else float(value)
        return min(max(v, p.lower), p.upper)

    def internal_bounds(self, p: ParameterDecl) -> tuple[float, float]:
        if p.scale == "log":
            return math.log10(p.lower), math.log10(p.upper)
        return float(p.lower), float(p.upper)

    def to_json(self) -> list[dict]:
        return [{"name": p.name, "lower": p.lower, "upper": p.upper, "kind": p.kind,
                 "scale": p.scale, "manual": p.manual} for p in self.params]

    @classmethod
    def from_json(cls, data: list[dict]) -> "SearchSpace":
        return cls(tuple(ParameterDecl(d["name"], d["lower"], d["upper"], d.get("kind", "float"),
                                       d.get("scale", "uniform"), d["manual"]) for d in data))


def _typed(p: ParameterDecl, v: float):
    return int(round(v)) if p.kind == "int" else float(v)


def decl(name: str, **changes) -> ParameterDecl:
    """Copy of a default declaration with some fields changed."""
    return replace(SearchSpace.default()[name], **changes)
