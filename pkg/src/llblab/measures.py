"""Empirical invariant measures and weak-convergence instrumentation.

Long-run laws are approximated by time-averaged snapshot clouds (pool the
field at times burn_in + m*stride over all paths).  Weak closeness is
probed against a small declared family of bounded uniformly continuous
test functionals with certified Lipschitz constants:

* ``gauss_of_projection``: exp(-sum_i (<u, p_i> - a_i)^2 / w^2) for fixed
  probe fields p_i; Lipschitz constant 2 max_i ||p_i|| / w on L2 (the
  certified bound assumes an orthogonal probe family, which the default
  builders produce),
* ``lipschitz_of_norms``: the tent clip(1 - | ||u||_{L2} - a | / w, 0, 1)
  with constant 1/w.

``smooth_lift`` applies (1 + delta_s |k|^2)^{-1/2}, the standard trick
for lifting L2 test functions to H1 arguments; ``invariance_defect``
re-propagates a snapshot subsample with fresh noise and compares
functional means before and after (paired), which vanishes in law exactly
when the measure is stationary for the chosen dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import Observer, PathState, SimConfig, integrate, make_state, \
    run_ensemble
from .errors import ParameterError
from .fields import (VectorField, Grid, _irfft, _rfft, _spectral_tables,
                     fourier_mode_field, l2_inner)
from .noise import NoiseBasis, NoiseStream


@dataclass(frozen=True)
class TestFunctional:
    """Bounded UC_b test functional with a certified Lipschitz constant."""

    kind: str
    label: str
    width: float
    centers: tuple = ()
    probes: tuple = ()

    def __post_init__(self) -> None:
        if self.kind not in ("gauss_of_projection", "lipschitz_of_norms"):
            raise ParameterError(f"unknown functional kind {self.kind!r}")
        if self.width <= 0:
            raise ParameterError(f"functional width must be > 0, got {self.width}")
        if self.kind == "gauss_of_projection":
            if not self.probes:
                raise ParameterError("gauss_of_projection needs probe fields")
            if len(self.probes) != len(self.centers):
                raise ParameterError("need one center per probe")

    @property
    def lipschitz_constant(self) -> float:
        if self.kind == "gauss_of_projection":
            norms = [math.sqrt(l2_inner(p, p)) for p in self.probes]
            return 2.0 * max(norms) / self.width
        return 1.0 / self.width

    def __call__(self, u: VectorField) -> float:
        if self.kind == "gauss_of_projection":
            q = 0.0
            for p, a in zip(self.probes, self.centers):
                q += (l2_inner(u, p) - a) ** 2
            return math.exp(-q / self.width ** 2)
        a = self.centers[0] if self.centers else 0.0
        value = 1.0 - abs(math.sqrt(l2_inner(u, u)) - a) / self.width
        return min(1.0, max(0.0, value))


def default_functionals(grid: Grid, norm_scale: float = 0.5) -> tuple:
    """A small fixed family: four Gaussian projections on orthogonal
    low-mode probes plus two norm tents.  ``norm_scale`` sets the widths
    relative to the expected stationary field magnitude."""
    def probe(mode, comp, trig):
        direction = [0.0, 0.0, 0.0]
        direction[comp] = 1.0
        p = fourier_mode_field(grid, mode, 1.0, direction, trig=trig)
        return (1.0 / math.sqrt(l2_inner(p, p))) * p

    w = norm_scale
    p1 = probe((1, 0), 2, "sin")
    p2 = probe((0, 1), 0, "cos")
    p3 = probe((1, 1), 1, "sin")
    p4 = probe((2, 1), 2, "cos")
    return (
        TestFunctional("gauss_of_projection", "gauss_p1", w,
                       (0.0,), (p1,)),
        TestFunctional("gauss_of_projection", "gauss_p2_wide", 2 * w,
                       (0.0,), (p2,)),
        TestFunctional("gauss_of_projection", "gauss_p3p4", w,
                       (0.0, 0.0), (p3, p4)),
        TestFunctional("gauss_of_projection", "gauss_p1_offset", w,
                       (0.5 * w,), (p1,)),
        TestFunctional("lipschitz_of_norms", "tent_origin", 2 * w, (0.0,)),
        TestFunctional("lipschitz_of_norms", "tent_offset", w, (w,)),
    )


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniformly weighted snapshot cloud with collection metadata."""

    snapshots: tuple
    metadata: dict

    @property
    def size(self) -> int:
        return len(self.snapshots)

    def mean_functional(self, g) -> float:
        if not self.snapshots:
            raise ParameterError("empty empirical measure")
        return float(np.mean([g(u) for u in self.snapshots]))

    def split_half(self, by: str = "path") -> tuple:
        """Two disjoint halves, by path parity (default) or snapshot index.

        Path-parity splitting keeps the halves statistically independent;
        index parity interleaves time samples of the same paths.
        """
        if by == "path" and "samples_per_path" in self.metadata:
            m = self.metadata["samples_per_path"]
            pick = lambda i: (i // m) % 2
        elif by in ("path", "index"):
            pick = lambda i: i % 2
        else:
            raise ParameterError(f"unknown split key {by!r}")
        even = tuple(u for i, u in enumerate(self.snapshots) if pick(i) == 0)
        odd = tuple(u for i, u in enumerate(self.snapshots) if pick(i) == 1)
        meta = dict(self.metadata, split=by)
        return (EmpiricalMeasure(even, meta), EmpiricalMeasure(odd, meta))

    def split_time(self) -> tuple:
        """First-half vs second-half sampling times of every path."""
        m = self.metadata.get("samples_per_path")
        if not m:
            raise ParameterError("time split needs samples_per_path metadata")
        early, late = [], []
        for i, u in enumerate(self.snapshots):
            (early if (i % m) < m // 2 else late).append(u)
        meta = dict(self.metadata, split="time")
        return (EmpiricalMeasure(tuple(early), meta),
                EmpiricalMeasure(tuple(late), meta))

    def subsample(self, count: int) -> "EmpiricalMeasure":
        """Deterministic evenly spaced subsample."""
        if count < 1:
            raise ParameterError(f"subsample count must be >= 1, got {count}")
        count = min(count, self.size)
        idx = np.linspace(0, self.size - 1, count).round().astype(int)
        return EmpiricalMeasure(tuple(self.snapshots[i] for i in idx),
                                dict(self.metadata, subsample=count))


def eval_functional(mu: EmpiricalMeasure, g: TestFunctional) -> float:
    return mu.mean_functional(g)


def collect_empirical(cfg: SimConfig, basis: NoiseBasis, u0: VectorField,
                      burn_in: float, stride: float,
                      threads: int = 1) -> EmpiricalMeasure:
    """Pool snapshots u(burn_in + m*stride), m >= 1, over all cfg.paths.

    Requires t_final > burn_in, and burn_in and stride commensurate
    with dt.  Reports the pooled lag-1 autocorrelation of ||u||_{L2}
    at the chosen stride in the metadata (sampling-adequacy hint).
    """
    dt = cfg.dt
    if cfg.t_final <= burn_in:
        raise ParameterError(
            f"t_final={cfg.t_final} must exceed burn_in={burn_in}")
    burn_steps = int(round(burn_in / dt))
    stride_steps = int(round(stride / dt))
    if stride_steps < 1 or abs(stride - stride_steps * dt) > 1e-9 * max(1.0, stride):
        raise ParameterError(
            f"stride={stride} must be a positive multiple of dt={dt}")
    if abs(burn_in - burn_steps * dt) > 1e-9 * max(1.0, burn_in):
        raise ParameterError(
            f"burn_in={burn_in} must be a multiple of dt={dt}")

    def worker(path_id: int):
        snaps = []

        def grab(state: PathState) -> None:
            if state.step_index > burn_steps and \
                    (state.step_index - burn_steps) % stride_steps == 0:
                snaps.append(state.u)

        integrate(make_state(u0, cfg, path_id), cfg, basis,
                  observers=(Observer(grab, 1),))
        return snaps

    per_path = run_ensemble(worker, range(cfg.paths), threads)
    counts = {len(s) for s in per_path}
    assert len(counts) == 1, "paths must produce equal snapshot counts"
    snapshots = tuple(u for snaps in per_path for u in snaps)
    if not snapshots:
        raise ParameterError("no snapshots collected; lengthen t_final")

    rhos = []
    for snaps in per_path:
        if len(snaps) >= 3:
            series = np.array([math.sqrt(l2_inner(u, u)) for u in snaps])
            a, b = series[:-1], series[1:]
            sa, sb = a.std(), b.std()
            if sa > 0 and sb > 0:
                rhos.append(float(np.mean((a - a.mean()) * (b - b.mean()))
                                  / (sa * sb)))
    meta = {
        "epsilon": cfg.epsilon, "delta": cfg.delta, "seed": cfg.seed,
        "paths": cfg.paths, "burn_in": burn_in, "stride": stride,
        "samples_per_path": len(per_path[0]),
        "lag1_autocorr": float(np.mean(rhos)) if rhos else None,
    }
    return EmpiricalMeasure(snapshots, meta)


def smooth_lift(u: VectorField, delta_s: float) -> VectorField:
    """Fourier multiplier (1 + delta_s |k|^2)^{-1/2}; contracts amplitudes,
    identity on the zero mode."""
    if delta_s <= 0:
        raise ParameterError(f"smoothing parameter must be > 0, got {delta_s}")
    k_sq = _spectral_tables(u.grid.n, u.grid.half_width)[0]
    mult = 1.0 / np.sqrt(1.0 + delta_s * k_sq)
    return VectorField(u.grid, _irfft(mult[:, :, None] * _rfft(u.values),
                                      u.grid.n))


def weak_distance(mu1: EmpiricalMeasure, mu2: EmpiricalMeasure,
                  functionals) -> float:
    """max_g |E_mu1 g - E_mu2 g| over the declared family."""
    if not functionals:
        raise ParameterError("need at least one test functional")
    return max(abs(mu1.mean_functional(g) - mu2.mean_functional(g))
               for g in functionals)


@dataclass(frozen=True)
class DefectReport:
    """Paired invariance defect against its Monte-Carlo noise floor.

    ``floor`` is the maximal-inequality-scaled standard error
    max_g sem_g * sqrt(2 ln(2 |G|)), the expected size of max_g |mean|
    under exact stationarity.
    """

    defect: float
    floor: float
    per_functional: dict
    subsample_size: int
    horizon: float


def invariance_defect(mu: EmpiricalMeasure, cfg: SimConfig, basis: NoiseBasis,
                      t: float, functionals, eps: float | None = None,
                      subsample: int = 64, threads: int = 1) -> DefectReport:
    """Propagate a snapshot subsample for time t with fresh noise and
    compare functional means (paired) with the unpropagated subsample.

    ``eps`` defaults to the measure's own epsilon (stationarity check);
    passing another value probes invariance under different dynamics.
    Fresh noise uses substream 1 of the counter-based streams, so the
    draws are independent of anything used during collection.
    """
    if t < cfg.dt:
        raise ParameterError(f"horizon t={t} must be at least dt={cfg.dt}")
    eps_run = mu.metadata.get("epsilon") if eps is None else eps
    run_cfg = replace(cfg, epsilon=float(eps_run), t_final=float(t))
    sub = mu.subsample(subsample)

    def worker(i: int) -> VectorField:
        state = PathState(sub.snapshots[i], 0.0,
                          NoiseStream(cfg.seed, i, substream=1), 0)
        return integrate(state, run_cfg, basis).u

    moved = run_ensemble(worker, range(sub.size), threads)

    per = {}
    sems = []
    diffs_abs = []
    for g in functionals:
        d = np.array([g(v) - g(u) for v, u in zip(moved, sub.snapshots)])
        mean = float(d.mean())
        sem = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0
        per[g.label] = (mean, sem)
        sems.append(sem)
        diffs_abs.append(abs(mean))
    floor = max(sems) * math.sqrt(2.0 * math.log(2.0 * len(per)))
    return DefectReport(defect=max(diffs_abs), floor=float(floor),
                        per_functional=per, subsample_size=sub.size,
                        horizon=t)
