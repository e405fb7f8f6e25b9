"""JSON-Lines study files: one header record, then one record per trial.

Writes are append-only and flushed per trial, so a crash leaves at worst a
truncated last line, which :func:`load_study` skips with a warning.
"""
from __future__ import annotations

import json
import math
import os
import warnings
from pathlib import Path

from ..space import SearchSpace
from ..world import Metrics, Weights
from .study import Study, Trial

FORMAT_VERSION = 1


class StudyFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _cost_out(cost: float):
    return cost if math.isfinite(cost) else None


def header_record(study: Study) -> dict:
    return {
        "type": "header",
        "version": FORMAT_VERSION,
        "space": study.space.to_json(),
        "weights": study.weights.to_dict(),
        "scenario_path": study.scenario_path,
        "scenario": study.scenario,
        "planner": study.planner,
        "sampler": {"kind": study.sampler, "config": study.sampler_config},
        "master_seed": study.master_seed,
    }


def trial_record(trial: Trial) -> dict:
    return {
        "type": "trial",
        "index": trial.index,
        "params": trial.params,
        "cost": _cost_out(trial.cost),
        "metrics": trial.metrics.to_dict() if trial.metrics is not None else None,
        "termination": trial.termination,
        "termination_step": trial.termination_step,
        "rng_seed": trial.rng_seed,
        "wall_time": trial.wall_time,
    }


def _write_line(fh, record: dict):
    fh.write(json.dumps(record, allow_nan=False) + "\n")
    fh.flush()
    os.fsync(fh.fileno())


def write_header(path, study: Study):
    with open(path, "w") as fh:
        _write_line(fh, header_record(study))


def append_trial(path, trial: Trial):
    with open(path, "a") as fh:
        _write_line(fh, trial_record(trial))


def save_study(study: Study, path):
    with open(path, "w") as fh:
        fh.write(json.dumps(header_record(study), allow_nan=False) + "\n")
        for t in study.trials:
            fh.write(json.dumps(trial_record(t), allow_nan=False) + "\n")


def _parse_trial(rec: dict, space: SearchSpace) -> Trial:
    params = {}
    for p in space:
        v = rec["params"][p.name]
        params[p.name] = int(v) if p.kind == "int" else float(v)
    cost = rec["cost"]
    return Trial(
        index=int(rec["index"]),
        params=params,
        cost=math.inf if cost is None else float(cost),
        metrics=Metrics.from_dict(rec["metrics"]) if rec.get("metrics") else None,
        termination=rec.get("termination", "completed"),
        termination_step=rec.get("termination_step"),
        rng_seed=int(rec.get("rng_seed", 0)),
        wall_time=float(rec.get("wall_time", 0.0)),
    )


def load_study(path) -> Study:
    text = Path(path).read_text()
    lines = text.split("\n")
    complete_tail = text.endswith("\n")
    if complete_tail:
        lines = lines[:-1]
    if not lines or not lines[0].strip():
        raise StudyFormatError("empty study file", 1)
    study = None
    for lineno, line in enumerate(lines, start=1):
        is_last = lineno == len(lines)
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise ValueError("record is not an object")
            if lineno == 1:
                if rec.get("type") != "header":
                    raise StudyFormatError("first record is not a header", 1)
                study = Study(
                    space=SearchSpace.from_json(rec["space"]),
                    sampler=rec["sampler"]["kind"],
                    sampler_config=dict(rec["sampler"].get("config") or {}),
                    weights=Weights(**rec["weights"]),
                    master_seed=int(rec["master_seed"]),
                    scenario=rec.get("scenario"),
                    scenario_path=rec.get("scenario_path"),
                    planner=rec.get("planner"),
                )
                continue
            if rec.get("type") != "trial":
                raise ValueError("record is not a trial")
            trial = _parse_trial(rec, study.space)
        except StudyFormatError:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            if is_last and not complete_tail and lineno > 1:
                warnings.warn(f"{path}: ignoring truncated final line {lineno}", RuntimeWarning)
                break
            raise StudyFormatError(f"corrupt record ({exc})", lineno) from None
        if trial.index != len(study.trials):
            raise StudyFormatError(f"trial index {trial.index} out of sequence", lineno)
        study.trials.append(trial)
    return study
