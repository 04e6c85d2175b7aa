"""On-disk artifacts: series files, run manifests, binary checkpoints.

Everything written here except ``run.stamp`` is a pure function of
(config, seed): floats are serialized via ``repr`` (shortest round-trip),
JSON keys are sorted, and the manifest records content hashes rather than
timestamps.  The wall clock lives only in the ``run.stamp`` sidecar so a
run directory can be compared byte-for-byte after excluding that one file.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .dynamics import PathState, SimConfig
from .errors import (CheckpointCorruptError, CheckpointFormatError,
                     ParameterError)
from .fields import Grid, VectorField
from .noise import NoiseStream
from .version import VERSION

STAMP_NAME = "run.stamp"
DIAGNOSTIC_COLUMNS = ("t", "l2_sq", "h1_sq", "h2_sq",
                      "tail_j4", "tail_j8", "tail_j12", "energy_residual")
SERIES_SCHEMAS = ("diagnostics", "study_point")

# column-order conventions for study_point: ladder coordinates first,
# confidence bounds last, statistics in record order in between
_COORD_COLUMNS = ("epsilon", "delta", "dt", "eps0", "j")
_CI_COLUMNS = ("wilson_lo", "wilson_hi")

_CKPT_MAGIC = b"LLB1"
_CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sIIIddQdd")      # 56 bytes
_CKPT_CURSOR = struct.Struct("<QQQ")             # seed, path_id, substream


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_series(path, rows, columns) -> None:
    """CSV with a header row; floats via repr so reads round-trip exactly."""
    columns = tuple(columns)
    lines = [",".join(columns)]
    for row in rows:
        if isinstance(row, dict):
            missing = [c for c in columns if c not in row]
            if missing:
                raise ParameterError(f"row is missing column {missing[0]!r}")
            values = [row[c] for c in columns]
        else:
            values = list(row)
            if len(values) != len(columns):
                raise ParameterError(
                    f"row has {len(values)} values for {len(columns)} columns")
        lines.append(",".join(_fmt(v) for v in values))
    Path(path).write_text("\n".join(lines) + "\n")


def study_point_columns(records) -> tuple:
    """Coordinates first, statistics in record order, CI bounds last."""
    if not records:
        return ()
    keys = list(records[0].keys())
    coords = [c for c in _COORD_COLUMNS if c in keys]
    ci = [c for c in _CI_COLUMNS if c in keys]
    stats = [k for k in keys if k not in coords and k not in ci]
    return tuple(coords + stats + ci)


def write_schema_series(records, schema: str, path) -> None:
    if schema == "diagnostics":
        write_series(path, records, DIAGNOSTIC_COLUMNS)
    elif schema == "study_point":
        write_series(path, records, study_point_columns(list(records)))
    else:
        raise ParameterError(
            f"unknown series schema {schema!r}, expected one of "
            f"{SERIES_SCHEMAS}")


def read_series(path):
    """Parse a CSV written by write_series; floats round-trip exactly."""
    text = Path(path).read_text().rstrip("\n")
    lines = text.split("\n") if text else []
    if not lines:
        raise ParameterError(f"series file {path} has no header")
    columns = tuple(lines[0].split(","))

    def parse(token: str):
        if token == "true":
            return True
        if token == "false":
            return False
        try:
            return int(token)
        except ValueError:
            pass
        try:
            return float(token)
        except ValueError:
            return token

    rows = [dict(zip(columns, (parse(tok) for tok in line.split(","))))
            for line in lines[1:]]
    return columns, rows


def write_jsonl(path, records) -> None:
    lines = [json.dumps(rec, sort_keys=True) for rec in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def diagnostics_rows(records, tail_radii=(4, 8, 12)):
    """Flatten DiagnosticsRecord objects into the canonical series schema."""
    rows = []
    for rec in records:
        row = {"t": rec.t, "l2_sq": rec.l2_sq, "h1_sq": rec.h1_sq,
               "h2_sq": rec.h2_sq, "energy_residual": rec.energy_residual}
        for j in tail_radii:
            row[f"tail_j{int(j)}"] = rec.tail[j]
        rows.append(row)
    return rows


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def hash_tree(directory, exclude=(STAMP_NAME,)) -> str:
    """Order-independent digest of a run directory, stamp file excluded."""
    root = Path(directory)
    entries = []
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name not in exclude:
            entries.append(f"{p.relative_to(root)}:{sha256_file(p)}")
    return hashlib.sha256("\n".join(entries).encode()).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """What produced a run directory; everything but the stamp sidecar is
    a pure function of the resolved config and seed."""

    config_hash: str
    resolved: dict
    seed: int
    command: str
    outputs: dict = field(default_factory=dict)
    code_version: str = VERSION
    determinism: dict = field(default_factory=lambda: {
        "thread_invariant": True,
        "float_format": "shortest-round-trip",
        "payload_endianness": "little",
    })
    stamp_file: str = STAMP_NAME

    def to_json(self) -> str:
        body = {"config_hash": self.config_hash, "resolved": self.resolved,
                "seed": self.seed, "command": self.command,
                "outputs": dict(self.outputs),
                "code_version": self.code_version,
                "determinism": dict(self.determinism),
                "stamp_file": self.stamp_file}
        return json.dumps(body, sort_keys=True, indent=2) + "\n"


def write_manifest(directory, manifest: RunManifest,
                   stamp: bool = True) -> None:
    """Write manifest.json (and, once, the wall-clock stamp sidecar).

    Call first with empty outputs before producing results, then again
    with the output hashes filled in; both writes are deterministic.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    (root / "manifest.json").write_text(manifest.to_json())
    stamp_path = root / manifest.stamp_file
    if stamp and not stamp_path.exists():
        now = datetime.now(timezone.utc).isoformat()
        stamp_path.write_text(now + "\n")


def load_manifest(directory) -> RunManifest:
    body = json.loads((Path(directory) / "manifest.json").read_text())
    return RunManifest(body["config_hash"], body["resolved"], body["seed"],
                       body["command"], body["outputs"],
                       body["code_version"], body["determinism"],
                       body["stamp_file"])


def collect_outputs(directory, exclude=("manifest.json", STAMP_NAME)) -> dict:
    root = Path(directory)
    return {str(p.relative_to(root)): sha256_file(p)
            for p in sorted(root.rglob("*"))
            if p.is_file() and p.name not in exclude}


# ------------------------------------------------------------- checkpoints
#
# layout: 56-byte header (magic "LLB1", version u32, n u32, reserved u32,
# L f64, t f64, step u64, epsilon f64, delta f64), then n*n*3 float64
# little-endian row-major with the component axis innermost, then the
# 24-byte RNG cursor (seed, path_id, substream as u64)

@dataclass(frozen=True)
class Checkpoint:
    n: int
    half_width: float
    t: float
    step_index: int
    epsilon: float
    delta: float
    seed: int
    path_id: int
    substream: int
    u: np.ndarray

    def state(self, cfg: SimConfig) -> PathState:
        """Rebuild a PathState, validating the config it will run under."""
        if cfg.grid.n != self.n or cfg.grid.half_width != self.half_width:
            raise ParameterError(
                f"checkpoint grid ({self.n}, {self.half_width}) does not "
                f"match config grid ({cfg.grid.n}, {cfg.grid.half_width})")
        if cfg.epsilon != self.epsilon or cfg.delta != self.delta:
            raise ParameterError(
                "checkpoint (epsilon, delta) "
                f"({self.epsilon}, {self.delta}) does not match config "
                f"({cfg.epsilon}, {cfg.delta})")
        if cfg.seed != self.seed:
            raise ParameterError(
                f"checkpoint seed {self.seed} does not match "
                f"config seed {cfg.seed}")
        if self.step_index * cfg.dt != self.t:
            raise ParameterError(
                f"checkpoint time {self.t} is not step {self.step_index} "
                f"of dt={cfg.dt}")
        fld = VectorField(Grid(self.n, self.half_width), self.u)
        stream = NoiseStream(self.seed, self.path_id, self.substream)
        return PathState(fld, self.t, stream, self.step_index)


def _pack_checkpoint(n: int, half_width: float, t: float, step: int,
                     eps: float, delta: float, seed: int, path_id: int,
                     substream: int, values: np.ndarray) -> bytes:
    payload = np.ascontiguousarray(values, dtype="<f8").tobytes()
    header = _CKPT_HEADER.pack(_CKPT_MAGIC, _CKPT_VERSION, n, 0,
                               half_width, t, step, eps, delta)
    cursor = _CKPT_CURSOR.pack(seed, path_id, substream)
    return header + payload + cursor


def checkpoint_bytes(state: PathState, cfg: SimConfig) -> bytes:
    return _pack_checkpoint(
        cfg.grid.n, cfg.grid.half_width, state.t, state.step_index,
        cfg.epsilon, cfg.delta, state.stream.seed, state.stream.path_id,
        state.stream.substream, state.u.values)


def save_checkpoint(path, state: PathState, cfg: SimConfig) -> None:
    Path(path).write_bytes(checkpoint_bytes(state, cfg))


def save_measure(directory, mu, functionals=()) -> None:
    """Persist an empirical measure: snapshot archive plus JSONL index.

    Snapshots reuse the checkpoint binary layout (one file per snapshot,
    path_id field holding the snapshot index); the index carries the
    metadata line first, then one functional-mean line per test function.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    meta = dict(mu.metadata)
    index = [{"kind": "metadata", "count": mu.size, **meta}]
    for g in functionals:
        index.append({"kind": "functional_mean", "label": g.label,
                      "mean": mu.mean_functional(g)})
    write_jsonl(root / "index.jsonl", index)
    grid = mu.snapshots[0].grid
    width = len(str(mu.size - 1))
    for i, u in enumerate(mu.snapshots):
        blob = _pack_checkpoint(
            grid.n, grid.half_width, 0.0, 0,
            float(meta.get("epsilon", 0.0)), float(meta.get("delta", 0.0)),
            int(meta.get("seed", 0)), i, 0, u.values)
        (root / f"snap_{i:0{width}d}.ckpt").write_bytes(blob)


def load_measure(directory):
    from .measures import EmpiricalMeasure

    root = Path(directory)
    lines = (root / "index.jsonl").read_text().splitlines()
    records = [json.loads(ln) for ln in lines]
    meta = {k: v for k, v in records[0].items()
            if k not in ("kind", "count")}
    snapshots = []
    for p in sorted(root.glob("snap_*.ckpt")):
        ck = load_checkpoint(p)
        snapshots.append(VectorField(Grid(ck.n, ck.half_width), ck.u))
    if len(snapshots) != records[0]["count"]:
        raise CheckpointCorruptError(
            f"index promises {records[0]['count']} snapshots, "
            f"found {len(snapshots)}")
    return EmpiricalMeasure(tuple(snapshots), meta)


def load_checkpoint(path) -> Checkpoint:
    blob = Path(path).read_bytes()
    if len(blob) < _CKPT_HEADER.size:
        raise CheckpointFormatError(
            f"file is {len(blob)} bytes, shorter than the "
            f"{_CKPT_HEADER.size}-byte header")
    magic, version, n, _, half_width, t, step, eps, delta = \
        _CKPT_HEADER.unpack_from(blob)
    if magic != _CKPT_MAGIC:
        raise CheckpointFormatError(
            f"bad magic {magic!r}, expected {_CKPT_MAGIC!r}")
    if version != _CKPT_VERSION:
        raise CheckpointFormatError(
            f"unsupported checkpoint version {version}")
    expected = _CKPT_HEADER.size + 8 * n * n * 3 + _CKPT_CURSOR.size
    if len(blob) != expected:
        raise CheckpointCorruptError(
            f"payload size mismatch: file is {len(blob)} bytes, "
            f"n={n} implies {expected}")
    payload = blob[_CKPT_HEADER.size:-_CKPT_CURSOR.size]
    seed, path_id, substream = _CKPT_CURSOR.unpack(
        blob[-_CKPT_CURSOR.size:])
    u = np.frombuffer(payload, dtype="<f8").reshape(n, n, 3)
    u = np.ascontiguousarray(u, dtype=np.float64)
    if not np.all(np.isfinite(u)):
        raise CheckpointCorruptError("payload contains non-finite values")
    return Checkpoint(n, half_width, t, int(step), eps, delta,
                      int(seed), int(path_id), int(substream), u)
