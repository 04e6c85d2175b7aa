"""Command-line surface: simulate, the six studies, and a self test.

Exit codes: 0 when the requested run or study passes, 1 when a study's
verdicts fail, 2 on usage errors.  Every output directory receives a
manifest before results and again after, with content hashes filled in;
the only wall-clock artifact is the run.stamp sidecar.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .config import ResolvedConfig, config_hash, load_config, resolve_config
from .diagnostics import DiagnosticsRecorder
from .dynamics import (SimConfig, integrate, make_state, resolve_threads,
                       run_ensemble, step_em_ito, step_heun_strat)
from .errors import LabError
from .experiments import StudySpec, run_study
from .fields import random_smooth_field
from .measures import default_functionals
from .noise import NoiseStream, sample_increments
from .storage import (RunManifest, collect_outputs, diagnostics_rows,
                      load_checkpoint, save_checkpoint, write_jsonl,
                      write_manifest, write_schema_series)
from .version import VERSION

STUDY_COMMANDS = {
    "study-viscosity": "viscosity",
    "study-noise": "noise_continuity",
    "study-tail": "tail_uniformity",
    "study-dissipativity": "dissipativity",
    "study-measure": "invariant_limit",
    "study-convergence": "self_convergence",
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="llblab",
        description="stochastic Landau-Lifshitz-Bloch laboratory")
    parser.add_argument("--version", action="version", version=VERSION)
    sub = parser.add_subparsers(dest="command")
    for name in ["simulate", *STUDY_COMMANDS, "self-test"]:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None,
                       help="TOML config file (defaults apply if omitted)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (env LLB_THREADS also honored)")
        p.add_argument("--out", type=Path, default=Path("out"),
                       help="output directory")
    return parser


def _load(args) -> ResolvedConfig:
    if args.config is not None:
        resolved = load_config(args.config)
    else:
        resolved = resolve_config({})
    if args.seed is not None:
        if args.seed < 0:
            raise LabError(f"seed must be a non-negative integer, "
                           f"got {args.seed}")
        sim = replace(resolved.sim, seed=args.seed)
        run_d = dict(resolved.resolved["run"], seed=args.seed)
        resolved = ResolvedConfig(
            sim, resolved.initial,
            (replace(resolved.study, base=sim) if resolved.study else None),
            {**resolved.resolved, "run": run_d})
    return resolved


def _begin_run(out: Path, resolved: ResolvedConfig,
               command: str) -> RunManifest:
    manifest = RunManifest(config_hash(resolved.resolved),
                           resolved.resolved, resolved.sim.seed, command)
    write_manifest(out, manifest)
    return manifest


def _finish_run(out: Path, manifest: RunManifest) -> None:
    write_manifest(out, replace(manifest, outputs=collect_outputs(out)),
                   stamp=False)


def _cmd_simulate(args) -> int:
    resolved = _load(args)
    cfg = resolved.sim
    threads = resolve_threads(args.threads)
    out = args.out
    manifest = _begin_run(out, resolved, "simulate")
    basis = cfg.noise.build(cfg.grid)
    u0 = resolved.make_initial()
    tail_radii = tuple(j for j in (4, 8, 12)
                       if 0.75 * j <= cfg.grid.half_width)
    if len(tail_radii) != 3:
        raise LabError(
            f"grid half_width {cfg.grid.half_width} is too small for the "
            "diagnostic tail radii (4, 8, 12); need half_width >= 9")

    def worker(path_id: int):
        state = make_state(u0, cfg, path_id)
        recorder = DiagnosticsRecorder(state, cfg, basis, stride=1)
        final = integrate(state, cfg, basis, (recorder.observer(),))
        return path_id, recorder.records, final

    for path_id, records, final in run_ensemble(
            worker, range(cfg.paths), threads):
        write_schema_series(diagnostics_rows(records),
                            "diagnostics", out / f"diagnostics_p{path_id}.csv")
        save_checkpoint(out / f"final_p{path_id}.ckpt", final, cfg)
    _finish_run(out, manifest)
    print(f"simulate: {cfg.paths} path(s) to t={cfg.t_final} written to {out}")
    return 0


def _cmd_study(args, kind: str) -> int:
    resolved = _load(args)
    threads = resolve_threads(args.threads)
    if resolved.study is not None:
        if resolved.study.kind != kind:
            print(f"error: config requests study kind "
                  f"{resolved.study.kind!r} but the subcommand runs "
                  f"{kind!r}", file=sys.stderr)
            return 2
        spec = resolved.study
    else:
        spec = StudySpec(kind, resolved.sim)
    out = args.out
    manifest = _begin_run(out, resolved, f"study:{kind}")
    report = run_study(spec, threads)
    write_schema_series(list(report.points), "study_point",
                        out / "points.csv")
    write_jsonl(out / "report.jsonl", [{
        "kind": report.kind, "outcome": report.outcome,
        "verdicts": report.verdicts, "series": report.series,
        "provenance": report.provenance,
    }])
    _finish_run(out, manifest)
    for name, ok in report.verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'} {kind}:{name}")
    print(f"study {kind}: {report.outcome}")
    return 0 if report.passed else 1


def _selftest_checks():
    """Fast invariant suite run by ``self-test``; yields (name, ok)."""
    from .diagnostics import norm_sq
    from .fields import Grid, l2_inner, laplacian

    grid = Grid(32, 8.0)
    rng = np.random.default_rng(7)
    u = random_smooth_field(grid, rng, 1.0)

    lap = laplacian(u)
    lhs = l2_inner(lap, u)
    rhs = -(norm_sq(u, "h1") - norm_sq(u, "l2"))
    yield ("laplacian_is_symmetric_negative",
           abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs)))

    cross = np.cross(u.values, lap.values)
    yield ("precession_is_pointwise_orthogonal",
           float(np.max(np.abs(np.sum(cross * u.values, axis=-1)))) <= 1e-10)

    cfg = SimConfig(grid=grid, epsilon=0.0, dt=1e-2, t_final=5e-2, seed=3)
    basis = cfg.noise.build(grid)
    s1 = make_state(u, cfg, 0)
    s2 = make_state(u, cfg, 0)
    for i in range(5):
        s1 = step_em_ito(s1, cfg, basis)
        s2 = step_heun_strat(s2, cfg, basis)
    yield ("schemes_agree_without_noise",
           bool(np.array_equal(s1.u.values, s2.u.values)))

    a = sample_increments(NoiseStream(11, 2), 5, basis.count, 1e-2)
    b = sample_increments(NoiseStream(11, 2), 5, basis.count, 1e-2)
    yield ("noise_stream_is_reproducible",
           bool(np.array_equal(a.values, b.values)))

    import tempfile
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "state.ckpt"
        save_checkpoint(path, s1, cfg)
        back = load_checkpoint(path).state(cfg)
        yield ("checkpoint_round_trips_bit_exactly",
               bool(np.array_equal(back.u.values, s1.u.values))
               and back.t == s1.t and back.step_index == s1.step_index)

    g = default_functionals(grid)[0]
    yield ("functionals_land_in_unit_interval", 0.0 <= g(u) <= 1.0)


def _cmd_selftest(args) -> int:
    failures = 0
    for name, ok in _selftest_checks():
        print(f"{'PASS' if ok else 'FAIL'} self-test:{name}")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 1


def cli_dispatch(argv) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version, 2 for usage errors
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command in STUDY_COMMANDS:
            return _cmd_study(args, STUDY_COMMANDS[args.command])
        return _cmd_selftest(args)
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
