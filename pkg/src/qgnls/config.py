"""Experiment configuration: strict JSON parsing with defaults."""

import json
import math
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError
from .solvers import SolverConfig

MODES = ("solve", "sweep", "peaked", "spectrum", "profile-check")
TOP_KEYS = {"graph", "p", "lambda", "lambda_range", "mode", "peaks", "solver", "h_target",
            "output", "sweep_mode", "warm_start", "workers", "spectrum", "solution"}
SPECTRUM_KEYS = {"k", "kernel_tol", "state", "center", "shift"}
RANGE_KEYS = {"min", "max", "count", "log"}


@dataclass
class SpectrumOptions:
    k: int = None  # default: max vertex degree + 2
    kernel_tol: float = 1e-3
    state: str = "star"  # "star" | "zero" | "least_action"
    center: str = None
    shift: float = None


@dataclass
class ExperimentConfig:
    graph: str
    p: float
    lambdas: list
    mode: str
    peaks: list = None  # list of (vertex, l_cut or None)
    solver: SolverConfig = field(default_factory=SolverConfig)
    h_target: float = None
    output: str = "out"
    sweep_mode: str = None
    warm_start: bool = True
    workers: int = 1
    spectrum: SpectrumOptions = field(default_factory=SpectrumOptions)
    solution: str = None

    def to_dict(self):
        return {
            "graph": self.graph,
            "p": self.p,
            "lambda": self.lambdas,
            "mode": self.mode,
            "peaks": None if self.peaks is None else [
                {"vertex": v, "l_cut": lc} for v, lc in self.peaks],
            "solver": self.solver.to_dict(),
            "h_target": self.h_target,
            "output": self.output,
            "sweep_mode": self.sweep_mode,
            "warm_start": self.warm_start,
            "workers": self.workers,
            "spectrum": vars(self.spectrum).copy(),
            "solution": self.solution,
        }


def _num(name, value, positive=True):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field {name!r}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value) or (positive and value <= 0):
        raise ConfigError(f"field {name!r}: expected a positive finite number, got {value!r}")
    return value


def lambda_range(lo, hi, count, log=True):
    lo, hi = _num("lambda_range.min", lo), _num("lambda_range.max", hi)
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ConfigError(f"field 'lambda_range.count': expected a positive integer, got {count!r}")
    if hi < lo:
        raise ConfigError("field 'lambda_range': max must not be below min")
    if count == 1:
        return [lo]
    vals = np.geomspace(lo, hi, count) if log else np.linspace(lo, hi, count)
    return [float(v) for v in vals]


def parse_peaks(raw):
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = [s for s in raw.split(",") if s.strip()]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("field 'peaks': expected a non-empty list")
    out = []
    for i, item in enumerate(raw):
        if isinstance(item, str):
            out.append((item.strip(), None))
        elif isinstance(item, dict):
            extra = set(item) - {"vertex", "l_cut"}
            if extra or "vertex" not in item:
                raise ConfigError(f"field 'peaks[{i}]': expected keys vertex[, l_cut], got {sorted(item)}")
            lc = item.get("l_cut")
            out.append((str(item["vertex"]), None if lc is None else _num(f"peaks[{i}].l_cut", lc)))
        else:
            raise ConfigError(f"field 'peaks[{i}]': expected a vertex id or object")
    return out


def parse_solver(raw):
    if raw is None:
        return SolverConfig()
    if not isinstance(raw, dict):
        raise ConfigError("field 'solver': expected an object")
    known = {f.name for f in fields(SolverConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"field 'solver': unknown keys {sorted(unknown)}")
    try:
        return replace(SolverConfig(), **raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'solver': {exc}") from None


def parse_dict(raw, base_dir="."):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"field 'mode': expected one of {list(MODES)}, got {mode!r}")
    if "graph" not in raw:
        raise ConfigError("field 'graph' is required")
    graph = str(raw["graph"])
    if not os.path.isabs(graph):
        graph = os.path.normpath(os.path.join(base_dir, graph))
    if not os.path.isfile(graph):
        raise ConfigError(f"field 'graph': file {graph!r} does not exist")
    p = _num("p", raw.get("p", 3.0))
    if p <= 1:
        raise ConfigError(f"field 'p': must exceed 1, got {p}")

    if "lambda" in raw and "lambda_range" in raw:
        raise ConfigError("give either 'lambda' or 'lambda_range', not both")
    if "lambda" in raw:
        lams = raw["lambda"]
        if not isinstance(lams, list):
            lams = [lams]
        if not lams:
            raise ConfigError("field 'lambda': empty list")
        lams = [_num(f"lambda[{i}]", v) for i, v in enumerate(lams)]
    elif "lambda_range" in raw:
        r = raw["lambda_range"]
        if not isinstance(r, dict) or set(r) - RANGE_KEYS or not {"min", "max", "count"} <= set(r):
            raise ConfigError("field 'lambda_range': expected {min, max, count[, log]}")
        lams = lambda_range(r["min"], r["max"], r["count"], bool(r.get("log", True)))
    elif mode == "spectrum":
        lams = [1.0]
    else:
        raise ConfigError("field 'lambda' or 'lambda_range' is required")

    peaks = parse_peaks(raw.get("peaks"))
    if mode == "peaked" and not peaks:
        raise ConfigError("mode 'peaked' requires field 'peaks'")
    sweep_mode = raw.get("sweep_mode")
    if sweep_mode is not None and sweep_mode not in ("least_action", "peaked"):
        raise ConfigError(f"field 'sweep_mode': got {sweep_mode!r}")
    if sweep_mode == "peaked" and not peaks:
        raise ConfigError("sweep_mode 'peaked' requires field 'peaks'")
    if mode == "sweep":
        if len(lams) < 3:
            raise ConfigError("mode 'sweep' needs at least 3 lambda values")
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ConfigError("mode 'sweep' needs strictly ascending lambda values")

    spec_raw = raw.get("spectrum") or {}
    if not isinstance(spec_raw, dict) or set(spec_raw) - SPECTRUM_KEYS:
        raise ConfigError(f"field 'spectrum': allowed keys {sorted(SPECTRUM_KEYS)}")
    spectrum = SpectrumOptions(**spec_raw)
    if spectrum.state not in ("star", "zero", "least_action"):
        raise ConfigError(f"field 'spectrum.state': got {spectrum.state!r}")

    h = raw.get("h_target")
    solution = raw.get("solution")
    if solution is not None:
        solution = str(solution)
        if not os.path.isabs(solution):
            solution = os.path.normpath(os.path.join(base_dir, solution))
        if not os.path.isfile(solution):
            raise ConfigError(f"field 'solution': file {solution!r} does not exist")
    workers = raw.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError("field 'workers': expected a positive integer")
    return ExperimentConfig(
        graph=graph,
        p=p,
        lambdas=lams,
        mode=mode,
        peaks=peaks,
        solver=parse_solver(raw.get("solver")),
        h_target=None if h is None else _num("h_target", h),
        output=str(raw.get("output", "out")),
        sweep_mode=sweep_mode,
        warm_start=bool(raw.get("warm_start", True)),
        workers=workers,
        spectrum=spectrum,
        solution=solution,
    )


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"file {path!r} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def parse_config(path):
    return parse_dict(load_json(path), base_dir=os.path.dirname(os.path.abspath(path)))
