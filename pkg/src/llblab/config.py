"""TOML run configuration: strict parsing, resolution, deterministic emit.

A config file has up to five tables: ``[grid]``, ``[noise]``, ``[run]``,
``[initial]`` and ``[study]``.  Unknown keys are errors (naming the key),
not warnings, so typos cannot silently fall back to defaults.  The
resolved form can be re-emitted as canonical TOML whose bytes, and hence
whose hash, depend only on the resolved values.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:                      # python < 3.11
    import tomli as tomllib

from .dynamics import SCHEMES, SimConfig
from .errors import ConfigError
from .experiments import STUDY_KINDS, StudySpec
from .fields import (Grid, VectorField, constant_field, fourier_mode_field,
                     gaussian_bump_field, zero_field)
from .noise import FAMILIES, NoiseParams

_GRID_KEYS = {"n": 128, "half_width": 16.0}
_NOISE_KEYS = {"family": "gaussian_bump", "modes": 16, "decay": 2.0,
               "amplitude": 0.3, "width": 2.0, "center_span": 2.0}
_RUN_KEYS = {"epsilon": 0.5, "delta": 0.0, "dt": 1e-2, "t_final": 5.0,
             "scheme": "em_ito", "seed": 0, "paths": 1, "cfl_cap": 5.0}
_INITIAL_KEYS = {"kind": "gaussian_bump", "amplitude": 1.0, "width": 2.0,
                 "center": [0.0, 0.0], "direction": [0.0, 0.0, 1.0],
                 "value": [0.0, 0.0, 0.0], "mode": [1, 0], "phase": 0.0,
                 "trig": "cos"}
INITIAL_KINDS = ("zero", "constant", "gaussian_bump", "fourier_mode")


@dataclass(frozen=True)
class ResolvedConfig:
    """Fully defaulted configuration plus the dict it was resolved from."""

    sim: SimConfig
    initial: dict
    study: StudySpec | None
    resolved: dict

    @property
    def hash(self) -> str:
        return config_hash(self.resolved)

    def make_initial(self) -> VectorField:
        return make_initial(self.sim.grid, self.initial)


def _merge(section: str, raw: dict, defaults: dict) -> dict:
    out = dict(defaults)
    for key, value in raw.items():
        if key not in defaults:
            raise ConfigError(f"unknown key '{section}.{key}'")
        out[key] = value
    return out


def resolve_config(data: dict) -> ResolvedConfig:
    known = {"grid", "noise", "run", "initial", "study"}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown table '[{key}]'")
    grid_d = _merge("grid", data.get("grid", {}), _GRID_KEYS)
    noise_d = _merge("noise", data.get("noise", {}), _NOISE_KEYS)
    run_d = _merge("run", data.get("run", {}), _RUN_KEYS)
    init_d = _merge("initial", data.get("initial", {}), _INITIAL_KEYS)
    if init_d["kind"] not in INITIAL_KINDS:
        raise ConfigError(
            f"unknown initial kind {init_d['kind']!r}, "
            f"expected one of {INITIAL_KINDS}")
    if run_d["scheme"] not in SCHEMES:
        raise ConfigError(
            f"unknown scheme {run_d['scheme']!r}, expected one of {SCHEMES}")
    if noise_d["family"] not in FAMILIES:
        raise ConfigError(
            f"unknown noise family {noise_d['family']!r}, "
            f"expected one of {FAMILIES}")

    grid = Grid(int(grid_d["n"]), float(grid_d["half_width"]))
    noise = NoiseParams(
        family=noise_d["family"], modes=int(noise_d["modes"]),
        decay=float(noise_d["decay"]), amplitude=float(noise_d["amplitude"]),
        width=float(noise_d["width"]),
        center_span=float(noise_d["center_span"]))
    sim = SimConfig(
        grid=grid, noise=noise, epsilon=float(run_d["epsilon"]),
        delta=float(run_d["delta"]), dt=float(run_d["dt"]),
        t_final=float(run_d["t_final"]), scheme=run_d["scheme"],
        seed=int(run_d["seed"]), paths=int(run_d["paths"]),
        cfl_cap=float(run_d["cfl_cap"]))

    study = None
    study_raw = data.get("study", {})
    if study_raw:
        kind = study_raw.get("kind")
        if kind is None:
            raise ConfigError("table [study] needs a 'kind' key")
        if kind not in STUDY_KINDS:
            raise ConfigError(
                f"unknown key 'study.kind' value {kind!r}, "
                f"expected one of {STUDY_KINDS}")
        extra = set(study_raw) - {"kind", "params", "tolerances"}
        if extra:
            raise ConfigError(f"unknown key 'study.{sorted(extra)[0]}'")
        study = StudySpec(kind, sim,
                          dict(study_raw.get("params", {})),
                          dict(study_raw.get("tolerances", {})))

    resolved = {"grid": grid_d, "noise": noise_d, "run": run_d,
                "initial": init_d}
    if study is not None:
        resolved["study"] = {"kind": study.kind,
                             "params": dict(study.params),
                             "tolerances": dict(study.tolerances)}
    return ResolvedConfig(sim, init_d, study, resolved)


def load_config(path) -> ResolvedConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc
    return resolve_config(data)


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise ConfigError(f"cannot emit value of type {type(value).__name__}")


def emit_config(resolved: dict) -> str:
    """Canonical TOML text: fixed table order, sorted keys, repr floats."""
    lines = []
    order = ["grid", "noise", "run", "initial", "study"]
    for table in order:
        if table not in resolved:
            continue
        body = resolved[table]
        lines.append(f"[{table}]")
        for key in sorted(body):
            value = body[key]
            if isinstance(value, dict):
                continue
            lines.append(f"{key} = {_toml_scalar(value)}")
        for key in sorted(body):
            value = body[key]
            if isinstance(value, dict) and value:
                lines.append("")
                lines.append(f"[{table}.{key}]")
                for k2 in sorted(value):
                    lines.append(f"{k2} = {_toml_scalar(value[k2])}")
        lines.append("")
    return "\n".join(lines)


def config_hash(resolved: dict) -> str:
    return hashlib.sha256(emit_config(resolved).encode()).hexdigest()[:16]


def make_initial(grid: Grid, spec: dict) -> VectorField:
    kind = spec.get("kind", "gaussian_bump")
    if kind == "zero":
        return zero_field(grid)
    if kind == "constant":
        return constant_field(grid, spec.get("value", (0.0, 0.0, 1.0)))
    if kind == "gaussian_bump":
        return gaussian_bump_field(
            grid, spec.get("amplitude", 1.0), spec.get("width", 2.0),
            center=tuple(spec.get("center", (0.0, 0.0))),
            direction=tuple(spec.get("direction", (0.0, 0.0, 1.0))))
    if kind == "fourier_mode":
        return fourier_mode_field(
            grid, tuple(spec.get("mode", (1, 0))),
            spec.get("amplitude", 1.0),
            direction=tuple(spec.get("direction", (0.0, 0.0, 1.0))),
            phase=spec.get("phase", 0.0), trig=spec.get("trig", "cos"))
    raise ConfigError(
        f"unknown initial kind {kind!r}, expected one of {INITIAL_KINDS}")
