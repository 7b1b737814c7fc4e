"""Run configuration: one JSON document drives every subcommand.

Complex numbers are encoded as [re, im] pairs throughout; measures use the
literal form {"atoms": [[x, w], ...], "pieces": [{"interval": [a, b],
"poly": [c0, c1, ...]}, ...]}.  All validation errors carry the offending
field path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .blackbox import BlackBoxModel, SystemBlock
from .boundary import DIV_TOL, IM_TOL, ZERO_TOL, EpsilonLadder
from .certify import D_FLOOR
from .errors import ConfigError, InvalidModelError, SpecboxError
from .measures import SpectralMeasure
from .resolvent import CouplingParams

__all__ = ["RunConfig", "Tolerances", "load_config", "build_run_config"]

_FORMATS = ("json", "csv")


@dataclass
class Tolerances:
    div_tol: float = DIV_TOL
    zero_tol: float = ZERO_TOL
    im_tol: float = IM_TOL
    d_floor: float = D_FLOOR
    quad_tol: float = 1e-9

    @classmethod
    def from_dict(cls, raw: dict) -> "Tolerances":
        tol = cls()
        for key, value in raw.items():
            if not hasattr(tol, key):
                raise ConfigError(f"unknown tolerance {key!r}", field=f"tolerances.{key}")
            value = _number(value, f"tolerances.{key}")
            if value <= 0:
                raise ConfigError("tolerance must be positive", field=f"tolerances.{key}")
            setattr(tol, key, value)
        return tol


@dataclass
class RunConfig:
    model: BlackBoxModel | None = None
    coupling: CouplingParams = field(default_factory=lambda: CouplingParams(0.0, 0.0))
    grid: np.ndarray | None = None
    ladder: EpsilonLadder = field(default_factory=EpsilonLadder)
    nodes_per_piece: int = 400
    tolerances: Tolerances = field(default_factory=Tolerances)
    greens_im_z: float = 1e-2
    average_eps: float = 1e-3
    seed: int = 0
    out_format: str = "json"
    out_path: str | None = None

    def require_model(self) -> BlackBoxModel:
        if self.model is None:
            raise ConfigError("this command needs a model; pass --config", field="model")
        return self.model

    def require_grid(self) -> np.ndarray:
        if self.grid is None or len(self.grid) == 0:
            raise ConfigError("this command needs a grid", field="grid")
        return self.grid


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=where)
    if not math.isfinite(value):
        raise ConfigError("number must be finite", field=where)
    return float(value)


def _complex_vector(raw, where: str) -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("expected a nonempty list of [re, im] pairs", field=where)
    out = []
    for i, entry in enumerate(raw):
        if not (isinstance(entry, list) and len(entry) == 2):
            raise ConfigError("expected an [re, im] pair", field=f"{where}[{i}]")
        out.append(complex(_number(entry[0], f"{where}[{i}][0]"),
                           _number(entry[1], f"{where}[{i}][1]")))
    return np.array(out)


def _measure(raw, where: str) -> SpectralMeasure:
    if not isinstance(raw, dict):
        raise ConfigError("expected a measure object", field=where)
    atoms = raw.get("atoms", [])
    pieces = raw.get("pieces", [])
    if not isinstance(atoms, list) or not isinstance(pieces, list):
        raise ConfigError("atoms and pieces must be lists", field=where)
    parsed_pieces = []
    for i, piece in enumerate(pieces):
        pw = f"{where}.pieces[{i}]"
        if not isinstance(piece, dict) or "interval" not in piece or "poly" not in piece:
            raise ConfigError("piece needs 'interval' and 'poly'", field=pw)
        interval = piece["interval"]
        if not (isinstance(interval, list) and len(interval) == 2):
            raise ConfigError("interval must be [a, b]", field=f"{pw}.interval")
        a = _number(interval[0], f"{pw}.interval[0]")
        b = _number(interval[1], f"{pw}.interval[1]")
        poly = [_number(c, f"{pw}.poly[{j}]") for j, c in enumerate(piece["poly"])]
        parsed_pieces.append(([a, b], poly))
    parsed_atoms = []
    for i, atom in enumerate(atoms):
        aw = f"{where}.atoms[{i}]"
        if not (isinstance(atom, list) and len(atom) == 2):
            raise ConfigError("atom must be [position, weight]", field=aw)
        parsed_atoms.append((_number(atom[0], f"{aw}[0]"), _number(atom[1], f"{aw}[1]")))
    try:
        return SpectralMeasure(atoms=parsed_atoms, pieces=parsed_pieces)
    except InvalidModelError as exc:
        raise ConfigError(str(exc), field=where) from exc


def _model(raw, where: str = "model") -> BlackBoxModel:
    if not isinstance(raw, dict):
        raise ConfigError("expected a model object", field=where)
    for key in ("system", "reservoir_left", "reservoir_right"):
        if key not in raw:
            raise ConfigError(f"missing '{key}'", field=where)
    sysd = raw["system"]
    if not isinstance(sysd, dict) or "matrix" not in sysd:
        raise ConfigError("system needs a 'matrix'", field=f"{where}.system")
    rows = sysd["matrix"]
    if not isinstance(rows, list) or not rows:
        raise ConfigError("matrix must be a nonempty list of rows", field=f"{where}.system.matrix")
    mat = []
    for i, row in enumerate(rows):
        mat.append(_complex_vector(row, f"{where}.system.matrix[{i}]"))
    matrix = np.array(mat)
    delta_l = _complex_vector(sysd.get("delta_l"), f"{where}.system.delta_l")
    delta_r = _complex_vector(sysd.get("delta_r"), f"{where}.system.delta_r")
    try:
        block = SystemBlock(matrix, delta_l, delta_r)
        return BlackBoxModel(
            block,
            _measure(raw["reservoir_left"], f"{where}.reservoir_left"),
            _measure(raw["reservoir_right"], f"{where}.reservoir_right"),
        )
    except InvalidModelError as exc:
        raise ConfigError(str(exc), field=where) from exc


def _grid(raw, where: str = "grid") -> np.ndarray:
    if isinstance(raw, dict) and "list" in raw:
        vals = [_number(v, f"{where}.list[{i}]") for i, v in enumerate(raw["list"])]
        if not vals:
            raise ConfigError("grid list must be nonempty", field=f"{where}.list")
        return np.array(vals)
    if isinstance(raw, dict) and {"start", "stop", "points"} <= set(raw):
        start = _number(raw["start"], f"{where}.start")
        stop = _number(raw["stop"], f"{where}.stop")
        points = raw["points"]
        if not isinstance(points, int) or points < 1:
            raise ConfigError("points must be an integer >= 1", field=f"{where}.points")
        return np.linspace(start, stop, points)
    raise ConfigError(
        "grid must be {'start','stop','points'} or {'list': [...]}", field=where
    )


def parse_grid_flag(text: str) -> np.ndarray:
    """CLI shorthand a:b:n."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("grid flag must look like a:b:n", field="--grid")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"bad grid flag: {exc}", field="--grid") from exc
    if n < 1:
        raise ConfigError("grid needs at least one point", field="--grid")
    return np.linspace(a, b, n)


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field="--config") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}", field="--config") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object", field="--config")
    return raw


def build_run_config(raw: dict | None, overrides: dict | None = None) -> RunConfig:
    """Merge a parsed config document with CLI flag overrides."""
    raw = raw or {}
    overrides = overrides or {}
    cfg = RunConfig()

    if "model" in raw:
        cfg.model = _model(raw["model"])
    if "grid" in raw:
        cfg.grid = _grid(raw["grid"])

    coupling = raw.get("coupling", {})
    if not isinstance(coupling, dict):
        raise ConfigError("coupling must be an object", field="coupling")
    lam = coupling.get("lambda", 0.0)
    nu = coupling.get("nu", 0.0)
    cfg.coupling = CouplingParams(
        _number(lam, "coupling.lambda"), _number(nu, "coupling.nu")
    )

    ladder_raw = raw.get("ladder", {})
    if not isinstance(ladder_raw, dict):
        raise ConfigError("ladder must be an object", field="ladder")
    ladder_kwargs = {}
    for key in ("eps_max", "eps_min", "ratio"):
        if key in ladder_raw:
            ladder_kwargs[key] = _number(ladder_raw[key], f"ladder.{key}")
    try:
        cfg.ladder = EpsilonLadder(**ladder_kwargs)
    except SpecboxError as exc:
        raise ConfigError(str(exc), field="ladder") from exc

    oracle = raw.get("oracle", {})
    if "nodes_per_piece" in oracle:
        nodes = oracle["nodes_per_piece"]
        if not isinstance(nodes, int) or nodes < 2:
            raise ConfigError("nodes_per_piece must be an integer >= 2",
                              field="oracle.nodes_per_piece")
        cfg.nodes_per_piece = nodes

    if "tolerances" in raw:
        cfg.tolerances = Tolerances.from_dict(raw["tolerances"])
    if "greens" in raw and "im_z" in raw["greens"]:
        cfg.greens_im_z = _number(raw["greens"]["im_z"], "greens.im_z")
    if "average" in raw and "eps" in raw["average"]:
        cfg.average_eps = _number(raw["average"]["eps"], "average.eps")
    if "seed" in raw:
        if not isinstance(raw["seed"], int):
            raise ConfigError("seed must be an integer", field="seed")
        cfg.seed = raw["seed"]

    output = raw.get("output", {})
    if "format" in output:
        if output["format"] not in _FORMATS:
            raise ConfigError(f"format must be one of {_FORMATS}", field="output.format")
        cfg.out_format = output["format"]
    if "path" in output and output["path"] is not None:
        cfg.out_path = str(output["path"])

    # flag overrides beat the document
    if overrides.get("lam") is not None or overrides.get("nu") is not None:
        cfg.coupling = CouplingParams(
            cfg.coupling.lam if overrides.get("lam") is None else overrides["lam"],
            cfg.coupling.nu if overrides.get("nu") is None else overrides["nu"],
        )
    if overrides.get("grid") is not None:
        cfg.grid = parse_grid_flag(overrides["grid"])
    eps_min = overrides.get("eps_min")
    eps_max = overrides.get("eps_max")
    if eps_min is not None or eps_max is not None:
        try:
            cfg.ladder = EpsilonLadder(
                eps_max=eps_max if eps_max is not None else cfg.ladder.eps_max,
                eps_min=eps_min if eps_min is not None else cfg.ladder.eps_min,
                ratio=cfg.ladder.ratio,
            )
        except SpecboxError as exc:
            raise ConfigError(str(exc), field="--eps-min/--eps-max") from exc
    if overrides.get("nodes") is not None:
        if overrides["nodes"] < 2:
            raise ConfigError("--nodes must be >= 2", field="--nodes")
        cfg.nodes_per_piece = overrides["nodes"]
    if overrides.get("seed") is not None:
        cfg.seed = overrides["seed"]
    if overrides.get("out_format") is not None:
        cfg.out_format = overrides["out_format"]
    if overrides.get("out_path") is not None:
        cfg.out_path = overrides["out_path"]
    return cfg
