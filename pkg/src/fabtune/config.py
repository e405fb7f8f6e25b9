"""Schema-validated loading of robot, scenario, search-space, parameter and weight files."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .leaves import ParameterDecl
from .space import ParameterBoundsError, SearchSpace
from .world import Obstacle, RobotModel, Scenario, Weights


class ConfigError(ValueError):
    """A configuration file failed to parse or validate."""

    def __init__(self, source: str, message: str, line: int | None = None, field: str | None = None):
        self.source = source
        self.line = line
        self.field = field
        where = source + (f":{line}" if line is not None else "")
        what = f" at {field}" if field else ""
        super().__init__(f"{where}: {message}{what}")


_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_POINT = {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}

ROBOT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "link_lengths", "joint_limits", "sphere_radii"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "link_lengths": {"type": "array", "items": _POSITIVE, "minItems": 1},
        "joint_limits": {"type": "array", "items": _POINT, "minItems": 1},
        "sphere_radii": {"type": "array", "items": _POSITIVE, "minItems": 1},
        "self_collision_pairs": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer", "minimum": 1},
                      "minItems": 2, "maxItems": 2},
        },
        "velocity_limit": _POSITIVE,
    },
}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["robot", "q0", "goal"],
    "properties": {
        "robot": {"type": "string", "minLength": 1},
        "q0": {"type": "array", "items": _NUMBER, "minItems": 1},
        "qd0": {"type": "array", "items": _NUMBER, "minItems": 1},
        "obstacles": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["center", "radius"],
                "properties": {"center": _POINT, "radius": _POSITIVE},
            },
        },
        "goal": _POINT,
        "T": {"type": "integer", "minimum": 1},
        "dt": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.05},
        "seed": {"type": "integer"},
    },
}

SPACE_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "additionalProperties": False,
        "required": ["name", "lower", "upper", "manual"],
        "properties": {
            "name": {"type": "string"},
            "lower": _NUMBER,
            "upper": _NUMBER,
            "kind": {"enum": ["float", "int"]},
            "scale": {"enum": ["uniform", "log"]},
            "manual": _NUMBER,
        },
    },
}

PARAMS_SCHEMA = {"type": "object", "additionalProperties": _NUMBER}

WEIGHTS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["distance", "path", "clearance"],
    "properties": {"distance": _NUMBER, "path": _NUMBER, "clearance": _NUMBER},
}


# locating a JSON path in the source text ----------------------------------------

_WS = " \t\r\n"


def _skip(text: str, pos: int) -> int:
    while pos < len(text) and text[pos] in _WS:
        pos += 1
    return pos


def _offset(text: str, path) -> int | None:
    """Character offset of the value at ``path`` (keys and indices), or None."""
    decoder = json.JSONDecoder()
    pos = _skip(text, 0)
    for step in path:
        if pos >= len(text):
            return None
        if text[pos] == "{" and isinstance(step, str):
            pos = _skip(text, pos + 1)
            while pos < len(text) and text[pos] == '"':
                key, pos = json.decoder.scanstring(text, pos + 1)
                pos = _skip(text, pos)
                pos = _skip(text, pos + 1)  # ':'
                if key == step:
                    break
                _, pos = decoder.raw_decode(text, pos)
                pos = _skip(text, pos)
                if text[pos] == ",":
                    pos = _skip(text, pos + 1)
            else:
                return None
        elif text[pos] == "[" and isinstance(step, int):
            pos = _skip(text, pos + 1)
            for _ in range(step):
                _, pos = decoder.raw_decode(text, pos)
                pos = _skip(text, pos)
                if text[pos] != ",":
                    return None
                pos = _skip(text, pos + 1)
        else:
            return None
    return pos


def _line_of(text: str, path) -> int | None:
    try:
        pos = _offset(text, list(path))
    except (ValueError, IndexError):
        return None
    return None if pos is None else text.count("\n", 0, pos) + 1


def _field_name(path) -> str:
    out = ""
    for step in path:
        out += f"[{step}]" if isinstance(step, int) else (f".{step}" if out else step)
    return out or "<root>"


def read_json(path, schema: dict | None = None) -> tuple[Any, str]:
    """Parse a JSON file and validate it; errors carry the line and field."""
    source = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(source, f"cannot read file ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(source, f"invalid JSON: {exc.msg}", exc.lineno) from None
    if schema is not None:
        validate(data, schema, source, text)
    return data, text


def validate(data, schema: dict, source: str = "<config>", text: str | None = None):
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        line = _line_of(text, path) if text is not None else None
        raise ConfigError(source, err.message, line, _field_name(path))


def _wrap(source: str, text: str | None, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(source, str(exc)) from None


# typed loaders -------------------------------------------------------------------

def robot_from_data(data: dict, source: str = "<robot>") -> RobotModel:
    validate(data, ROBOT_SCHEMA, source)
    return _wrap(source, None, lambda: RobotModel.from_dict(data))


def load_robot(path) -> RobotModel:
    data, text = read_json(path, ROBOT_SCHEMA)
    return _wrap(str(path), text, lambda: RobotModel.from_dict(data))


def scenario_from_data(data: dict, source: str = "<scenario>") -> Scenario:
    validate(data, SCENARIO_SCHEMA, source)
    return _wrap(source, None, lambda: Scenario.from_dict(data))


def load_scenario(path, robot: RobotModel | None = None) -> Scenario:
    data, text = read_json(path, SCENARIO_SCHEMA)
    scenario = _wrap(str(path), text, lambda: Scenario.from_dict(data))
    if robot is not None:
        if scenario.robot != robot.name:
            raise ConfigError(str(path), f"scenario is for robot {scenario.robot!r}, "
                              f"not {robot.name!r}", _line_of(text, ["robot"]), "robot")
        _wrap(str(path), text, lambda: scenario.check_robot(robot))
    return scenario


def space_from_data(data: list, source: str = "<space>") -> SearchSpace:
    """A space file lists declarations; a partial list overrides the defaults by name."""
    validate(data, SPACE_SCHEMA, source)

    def build():
        decls = [ParameterDecl(d["name"], d["lower"], d["upper"], d.get("kind", "float"),
                               d.get("scale", "uniform"), d["manual"]) for d in data]
        return SearchSpace.default().with_overrides(decls)

    return _wrap(source, None, build)


def load_space(path=None) -> SearchSpace:
    if path is None:
        return SearchSpace.default()
    data, _ = read_json(path, SPACE_SCHEMA)
    return space_from_data(data, str(path))


def load_params(path, space: SearchSpace) -> dict[str, float]:
    data, text = read_json(path, PARAMS_SCHEMA)
    try:
        return space.validate(data)
    except ParameterBoundsError as exc:
        raise ConfigError(str(path), str(exc)) from None


def parse_weights(spec: str | None) -> Weights:
    """``None`` for defaults, ``"a,b,c"`` inline, or a path to a weights JSON file."""
    if spec is None:
        return Weights()
    if Path(spec).is_file():
        data, _ = read_json(spec, WEIGHTS_SCHEMA)
        return Weights(float(data["distance"]), float(data["path"]), float(data["clearance"]))
    parts = spec.split(",")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        values = []
    if len(values) != 3:
        raise ConfigError("--weights", "expected 'distance,path,clearance' or a JSON file")
    return Weights(*values)


def data_path(name: str) -> Path:
    """Path of a file shipped in the package's ``data`` directory."""
    return Path(str(resources.files("fabtune") / "data" / name))
