"""JSON formats: problem definitions and experiment configs.

Problem file::

    {
      "name": "P1", "n": 2, "m": 2, "lb": [-3, -3], "ub": [7, 7],
      "objectives": [
        {"smooth": {"kind": "power_sum", "coef": [1, 1], "shift": [0, 0], "power": [4, 4]},
         "sigma": 0.0, "L": null,
         "nonsmooth": [{"kind": "quadratic", "A": [[2, 0], [0, 2]], "b": [-4, 4], "c": 8},
                       {"kind": "quadratic", "A": [[2, 0], [0, 0]], "b": [0, 8], "c": 0}]},
        ...
      ]
    }

Smooth kinds: ``zero``, ``quadratic`` (A, b, c: 0.5 x'Ax + b'x + c),
``power_sum`` (coef, shift, power: sum coef_i (x_i - shift_i)^power_i).
Piece kinds: ``affine`` (u, c), ``quadratic`` (A, b, c), ``exp_affine``
(scale, u, c: scale * exp(u'x + c)), ``power_sum`` (a generic piece).
An empty or missing ``nonsmooth`` list means g_j = 0.

Experiment config::

    {
      "problems": ["P1", "H1"],
      "solvers": [{"name": "monpg", "method": "monpg", "options": {"eps": 1e-5}},
                  {"name": "mopg", "method": "mopg"}],
      "n_starts": 20, "seed": 7, "output_dir": "out",
      "metrics": ["delta", "hv", "iterations", "fevals"], "hv_samples": 10000
    }
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .problem import (ConvexPiece, InvalidArgument, MultiObjectiveProblem, PiecewiseMaxFunction, PowerSum,
                      SmoothFunction, _Quadratic, _Zero)
from .solvers import SolverConfig

_vec = {"type": "array", "items": {"type": "number"}}
_mat = {"type": "array", "items": _vec}

PIECE_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "oneOf": [
        {"properties": {"kind": {"const": "affine"}, "u": _vec, "c": {"type": "number"}},
         "required": ["u"], "additionalProperties": False},
        {"properties": {"kind": {"const": "quadratic"}, "A": _mat, "b": _vec, "c": {"type": "number"}},
         "required": ["A"], "additionalProperties": False},
        {"properties": {"kind": {"const": "exp_affine"}, "scale": {"type": "number"}, "u": _vec,
                        "c": {"type": "number"}},
         "required": ["scale", "u"], "additionalProperties": False},
        {"properties": {"kind": {"const": "power_sum"}, "coef": _vec, "shift": _vec,
                        "power": {"type": "array", "items": {"type": "integer"}}},
         "required": ["coef", "shift", "power"], "additionalProperties": False},
    ],
}

SMOOTH_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "oneOf": [
        {"properties": {"kind": {"const": "zero"}}, "additionalProperties": False},
        {"properties": {"kind": {"const": "quadratic"}, "A": _mat, "b": _vec, "c": {"type": "number"}},
         "required": ["A"], "additionalProperties": False},
        {"properties": {"kind": {"const": "power_sum"}, "coef": _vec, "shift": _vec,
                        "power": {"type": "array", "items": {"type": "integer"}}},
         "required": ["coef", "shift", "power"], "additionalProperties": False},
    ],
}

PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["name", "n", "m", "lb", "ub", "objectives"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 1},
        "lb": _vec,
        "ub": _vec,
        "objectives": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["smooth"],
                "additionalProperties": False,
                "properties": {
                    "smooth": SMOOTH_SCHEMA,
                    "sigma": {"type": "number", "minimum": 0},
                    "L": {"type": ["number", "null"]},
                    "nonsmooth": {"type": "array", "items": PIECE_SCHEMA},
                },
            },
        },
    },
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "required": ["problems", "solvers"],
    "additionalProperties": False,
    "properties": {
        "problems": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "solvers": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["method"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "method": {"enum": ["monpg", "mopg", "ws"]},
                    "options": {"type": "object"},
                },
            },
        },
        "n_starts": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "output_dir": {"type": "string"},
        "metrics": {"type": "array", "items": {"enum": ["delta", "hv", "iterations", "fevals"]}},
        "hv_samples": {"type": "integer", "minimum": 1},
    },
}


class ConfigError(InvalidArgument):
    """Schema or value error, with the offending line when it can be located."""


def _locate(text: str, path) -> int | None:
    """Best-effort line number of the JSON element at ``path``."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return 1 if text else None
    pos = 0
    for key in keys:
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if m is None:
            break
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def load_json(text: str, schema: dict, source: str = "<config>") -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(data), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        if err.validator == "additionalProperties":
            extra = re.findall(r"'([^']+)' (?:was|were) unexpected", err.message)
            extra = extra or re.findall(r"'([^']+)'", err.message)
            path += extra[:1]
        line = _locate(text, path)
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{source}:{line}: {where}: {err.message}")
    return data


def _piece(d: dict) -> ConvexPiece:
    kind = d["kind"]
    if kind == "affine":
        return ConvexPiece.affine(d["u"], d.get("c", 0.0))
    if kind == "quadratic":
        return ConvexPiece.quadratic(d["A"], d.get("b"), d.get("c", 0.0))
    if kind == "exp_affine":
        return ConvexPiece.exp_affine(d["scale"], d["u"], d.get("c", 0.0))
    return ConvexPiece.power_sum(d["coef"], d["shift"], d["power"])


def _smooth(d: dict, n: int, sigma: float, L) -> SmoothFunction:
    kind = d["kind"]
    if kind == "zero":
        return SmoothFunction.from_object(_Zero(n), n, sigma, L)
    if kind == "quadratic":
        A = np.asarray(d["A"], dtype=float)
        b = d.get("b", np.zeros(A.shape[0]))
        return SmoothFunction.from_object(_Quadratic(A, b, d.get("c", 0.0)), A.shape[0], sigma, L)
    return SmoothFunction.power_sum(d["coef"], d["shift"], d["power"], sigma, L)


def problem_from_dict(data: dict) -> MultiObjectiveProblem:
    n, m = data["n"], data["m"]
    if len(data["objectives"]) != m:
        raise ConfigError(f"m = {m} but {len(data['objectives'])} objectives given")
    fs, gs = [], []
    for obj in data["objectives"]:
        fs.append(_smooth(obj["smooth"], n, float(obj.get("sigma", 0.0)), obj.get("L")))
        pieces = obj.get("nonsmooth") or []
        gs.append(PiecewiseMaxFunction(tuple(_piece(p) for p in pieces)) if pieces
                  else PiecewiseMaxFunction.zero(n))
    return MultiObjectiveProblem(data["name"], fs, gs, data["lb"], data["ub"])


def load_problem(text: str, source: str = "<problem>") -> MultiObjectiveProblem:
    data = load_json(text, PROBLEM_SCHEMA, source)
    try:
        return problem_from_dict(data)
    except InvalidArgument as exc:
        raise ConfigError(f"{source}: {exc}") from None


def _smooth_to_dict(f: SmoothFunction) -> dict:
    obj = getattr(f.value, "__self__", None)
    if isinstance(obj, _Zero):
        return {"kind": "zero"}
    if isinstance(obj, _Quadratic):
        return {"kind": "quadratic", "A": obj.A.tolist(), "b": obj.b.tolist(), "c": obj.c}
    if isinstance(obj, PowerSum):
        return {"kind": "power_sum", "coef": obj.coef.tolist(), "shift": obj.shift.tolist(),
                "power": obj.power.tolist()}
    raise ConfigError("smooth part has no JSON form")


def problem_to_dict(problem: MultiObjectiveProblem) -> dict:
    objectives = []
    for f, g in zip(problem.smooth, problem.nonsmooth):
        objectives.append({"smooth": _smooth_to_dict(f), "sigma": f.sigma, "L": f.L,
                           "nonsmooth": [p.to_dict() for p in g.pieces]})
    return {"name": problem.name, "n": problem.n, "m": problem.m, "lb": problem.lb.tolist(),
            "ub": problem.ub.tolist(), "objectives": objectives}


@dataclass
class SolverSpec:
    name: str
    method: str
    config: SolverConfig


@dataclass
class ExperimentConfig:
    problems: list
    solvers: list
    seed: int
    n_starts: int = 100
    output_dir: str = "."
    metrics: list = field(default_factory=lambda: ["delta", "hv", "iterations", "fevals"])
    hv_samples: int = 10_000

    def canonical(self) -> dict:
        """Everything that determines the outputs (not the output location or worker count)."""
        return {"problems": self.problems,
                "solvers": [{"name": s.name, "method": s.method, "options": s.config.to_dict()}
                            for s in self.solvers],
                "seed": self.seed, "n_starts": self.n_starts, "metrics": self.metrics,
                "hv_samples": self.hv_samples}


def load_experiment(text: str, source: str = "<config>", seed: int | None = None,
                    known_problems=None) -> ExperimentConfig:
    data = load_json(text, EXPERIMENT_SCHEMA, source)
    solvers = []
    for k, s in enumerate(data["solvers"]):
        try:
            cfg = SolverConfig.from_dict(s.get("options", {}))
        except (InvalidArgument, TypeError) as exc:
            line = _locate(text, ["solvers", "options"])
            raise ConfigError(f"{source}:{line}: solvers/{k}/options: {exc}") from None
        solvers.append(SolverSpec(s.get("name", s["method"]), s["method"], cfg))
    names = [s.name for s in solvers]
    if len(set(names)) != len(names):
        raise ConfigError(f"{source}:{_locate(text, ['solvers'])}: solver names must be unique")
    if known_problems is not None:
        for p in data["problems"]:
            if p not in known_problems:
                raise ConfigError(f"{source}:{_locate(text, ['problems'])}: unknown problem {p!r}")
    seed = seed if seed is not None else data.get("seed")
    if seed is None:
        raise ConfigError(f"{source}: a seed is required")
    return ExperimentConfig(data["problems"], solvers, int(seed), data.get("n_starts", 100),
                            data.get("output_dir", "."),
                            data.get("metrics", ["delta", "hv", "iterations", "fevals"]),
                            data.get("hv_samples", 10_000))
