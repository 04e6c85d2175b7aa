"""Experiment drivers: parameter-ladder studies with quantitative verdicts.

Every study couples its runs through the shared counter-based noise
streams (increments depend on (seed, path, step) only, never on eps,
delta or the scheme), computes declared statistics with uncertainty
estimates, and returns a :class:`StudyReport` whose verdicts make the
claimed trend falsifiable.  Reports are byte-reproducible functions of
(spec, seed): no wall-clock, no scheduling dependence.

Convergence in probability is operationalized as exceedance fractions
with Wilson confidence intervals; mean trends must beat split-half noise
floors before they count.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .diagnostics import norm_sq, tail_mass
from .dynamics import (STEPPERS, SimConfig, integrate, make_state,
                       run_ensemble)
from .errors import ParameterError
from .fields import VectorField, gaussian_bump_field
from .measures import (collect_empirical, default_functionals,
                       invariance_defect, weak_distance)
from .noise import NoiseBasis, NoiseParams, WienerIncrements, \
    sample_increments
from .version import VERSION

STUDY_KINDS = ("viscosity", "noise_continuity", "tail_uniformity",
               "dissipativity", "invariant_limit", "self_convergence")


@dataclass(frozen=True)
class StudySpec:
    """A study kind, its base run configuration and ladder parameters.

    ``params`` entries override the per-kind defaults (see the run_*
    functions); ``tolerances`` override verdict thresholds.
    """

    kind: str
    base: SimConfig
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in STUDY_KINDS:
            raise ParameterError(
                f"unknown study kind {self.kind!r}, expected one of {STUDY_KINDS}")

    def fingerprint(self) -> str:
        """64-bit hex digest of the serializable spec content."""
        def clean(d):
            return {k: (v if isinstance(v, (int, float, str, bool, type(None)))
                        else (list(v) if isinstance(v, (list, tuple)) else repr(v)))
                    for k, v in sorted(d.items())}
        payload = {
            "kind": self.kind,
            "base": clean(asdict(self.base)),
            "params": clean(self.params),
            "tolerances": clean(self.tolerances),
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class StudyReport:
    """Per-point summaries, named verdicts, and provenance."""

    kind: str
    points: tuple
    verdicts: dict
    outcome: str            # pass | fail | inconclusive
    provenance: dict
    series: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.outcome == "pass"


def _provenance(spec: StudySpec) -> dict:
    return {"kind": spec.kind, "fingerprint": spec.fingerprint(),
            "seed": spec.base.seed, "version": VERSION}


def _outcome(verdicts: dict, inconclusive_keys: tuple = ()) -> str:
    if all(verdicts.values()):
        return "pass"
    failed = [k for k, v in verdicts.items() if not v]
    if failed and all(k in inconclusive_keys for k in failed):
        return "inconclusive"
    return "fail"


def wilson_interval(successes: int, trials: int, z: float = 1.96):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ParameterError("Wilson interval needs at least one trial")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials ** 2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _strictly_decreasing(xs) -> bool:
    return all(a > b for a, b in zip(xs, xs[1:]))


def _non_increasing(xs) -> bool:
    return all(a >= b for a, b in zip(xs, xs[1:]))


def _default_u0(cfg: SimConfig, amplitude: float = 1.0,
                width: float = 2.0) -> VectorField:
    return gaussian_bump_field(cfg.grid, amplitude, width,
                               direction=(0.6, 0.0, 0.8))


def _lockstep(cfgs, basis: NoiseBasis, u0: VectorField, path_id: int,
              on_step) -> list:
    """Advance several configs in lockstep on shared Wiener increments.

    All configs must agree on grid, dt and t_final; they may differ in
    eps, delta and scheme.  ``on_step(i, states)`` fires after every step.
    """
    head = cfgs[0]
    for c in cfgs[1:]:
        if c.grid != head.grid or c.dt != head.dt or c.t_final != head.t_final:
            raise ParameterError(
                "lockstep configs must share grid, dt and t_final")
    states = [make_state(u0, c, path_id) for c in cfgs]
    steppers = [STEPPERS[c.scheme] for c in cfgs]
    n_steps = int(round(head.t_final / head.dt))
    sample_noise = any(c.epsilon != 0.0 for c in cfgs)
    for i in range(n_steps):
        incr = (sample_increments(states[0].stream, i, basis.count, head.dt)
                if sample_noise else None)
        states = [step(s, c, basis, incr)
                  for step, s, c in zip(steppers, states, cfgs)]
        on_step(i, states)
    return states


# ---------------------------------------------------------------- viscosity

def run_viscosity_study(spec: StudySpec, threads: int = 1) -> StudyReport:
    """Vanishing-viscosity ladder against the unregularized baseline.

    Statistics per delta (shared noise with the delta = 0 baseline):
    ensemble mean of sup_t ||u^delta - u^0||_{L2}, ensemble mean of
    integral_0^T ||u^delta - u^0||_{H1}^2 dt, and the exceedance fraction
    P(sup-difference > eta) with eta a declared fraction of the baseline
    magnitude.  Verdicts: both means strictly decrease along the
    (descending) ladder, exceedance fractions do not increase.
    """
    if spec.kind != "viscosity":
        raise ParameterError(f"spec kind {spec.kind!r} is not 'viscosity'")
    p = dict(spec.params)
    deltas = list(p.pop("delta_ladder", (1e-1, 1e-2, 1e-3, 1e-4)))
    eta_fraction = float(p.pop("eta_fraction", 0.1))
    u0 = p.pop("u0", None) or _default_u0(spec.base)
    if p:
        raise ParameterError(f"unknown viscosity params {sorted(p)}")
    if sorted(deltas, reverse=True) != deltas:
        raise ParameterError("delta_ladder must be strictly descending")
    base = replace(spec.base, delta=0.0)
    cfgs = [base] + [replace(base, delta=d) for d in deltas]
    basis = base.noise.build(base.grid)
    dt = base.dt

    def worker(path_id: int):
        m = len(deltas)
        sup_l2 = np.zeros(m)
        int_h1 = np.zeros(m)
        sup_base = 0.0

        def on_step(i, states):
            nonlocal sup_base
            u_base = states[0].u
            sup_base = max(sup_base, math.sqrt(norm_sq(u_base, "l2")))
            for k in range(m):
                d = states[k + 1].u - u_base
                sup_l2[k] = max(sup_l2[k], math.sqrt(norm_sq(d, "l2")))
                int_h1[k] += norm_sq(d, "h1") * dt

        _lockstep(cfgs, basis, u0, path_id, on_step)
        return sup_l2, int_h1, sup_base

    results = run_ensemble(worker, range(base.paths), threads)
    sup = np.array([r[0] for r in results])        # (paths, m)
    ih1 = np.array([r[1] for r in results])
    eta = eta_fraction * float(np.mean([r[2] for r in results]))

    points = []
    for k, d in enumerate(deltas):
        exceed = int(np.sum(sup[:, k] > eta))
        lo, hi = wilson_interval(exceed, base.paths)
        points.append({
            "delta": d,
            "mean_sup_l2": float(sup[:, k].mean()),
            "sd_sup_l2": float(sup[:, k].std(ddof=1)) if base.paths > 1 else 0.0,
            "mean_int_h1_sq": float(ih1[:, k].mean()),
            "exceedance": exceed / base.paths,
            "wilson_lo": lo, "wilson_hi": hi, "eta": eta,
        })
    mean_sups = [pt["mean_sup_l2"] for pt in points]
    mean_ints = [pt["mean_int_h1_sq"] for pt in points]
    fracs = [pt["exceedance"] for pt in points]
    verdicts = {
        "sup_l2_strictly_decreasing": _strictly_decreasing(mean_sups),
        "int_h1_strictly_decreasing": _strictly_decreasing(mean_ints),
        "exceedance_non_increasing": _non_increasing(fracs),
    }
    return StudyReport("viscosity", tuple(points), verdicts,
                       _outcome(verdicts), _provenance(spec))


# --------------------------------------------------------- noise continuity

def run_noise_continuity_study(spec: StudySpec, threads: int = 1) -> StudyReport:
    """Mean-square continuity of paths in the noise amplitude.

    Couples u^eps to u^{eps0} on identical increments; the ensemble
    mean-square sup-difference must scale like |eps - eps0|^2 (log-log
    slope within the declared band) and its max over a small set of
    initial data must decrease along the ladder.  A second sub-experiment
    perturbs the initial datum at fixed eps and checks the coupled
    sup-difference decreases as the perturbation halves.
    """
    if spec.kind != "noise_continuity":
        raise ParameterError(f"spec kind {spec.kind!r} is not 'noise_continuity'")
    p = dict(spec.params)
    eps0 = float(p.pop("eps0", 0.5))
    offsets = list(p.pop("offsets", (0.4, 0.2, 0.1, 0.05)))
    u0_list = p.pop("initial_data", None)
    pert_halvings = int(p.pop("perturbation_halvings", 4))
    if p:
        raise ParameterError(f"unknown noise_continuity params {sorted(p)}")
    tol = dict(spec.tolerances)
    slope_band = tol.pop("slope_band", (0.8, 1.2))

    base = spec.base
    grid = base.grid
    if u0_list is None:
        u0_list = [
            gaussian_bump_field(grid, 0.8, 2.0, direction=(0.0, 0.6, 0.8)),
            gaussian_bump_field(grid, 1.2, 1.5, direction=(1.0, 0.0, 0.0)),
            gaussian_bump_field(grid, 0.5, 3.0, center=(2.0, -1.0),
                                direction=(0.0, 1.0, 0.0)),
            gaussian_bump_field(grid, 1.0, 2.5, center=(-2.0, 2.0),
                                direction=(0.577, 0.577, 0.577)),
        ]
    for u0 in u0_list:
        h1 = norm_sq(u0, "h1")
        if h1 > 25.0:
            raise ParameterError(
                "initial data must satisfy ||u0||_H1 <= 5, "
                f"got {math.sqrt(h1):.3g}")

    eps_ladder = [eps0 + off for off in offsets]
    if any(not (0 <= e <= 1) for e in eps_ladder):
        raise ParameterError("eps0 + offsets must stay inside [0, 1]")
    cfgs = [replace(base, epsilon=eps0)] + \
           [replace(base, epsilon=e) for e in eps_ladder]
    basis = base.noise.build(grid)

    sup_sq = np.zeros((len(u0_list), len(eps_ladder), base.paths))
    for iu, u0 in enumerate(u0_list):
        def worker(path_id: int, u0=u0):
            sups = np.zeros(len(eps_ladder))

            def on_step(i, states):
                u_ref = states[0].u
                for k in range(len(eps_ladder)):
                    d = states[k + 1].u - u_ref
                    sups[k] = max(sups[k], math.sqrt(norm_sq(d, "l2")))

            _lockstep(cfgs, basis, u0, path_id, on_step)
            return sups

        res = run_ensemble(worker, range(base.paths), threads)
        sup_sq[iu] = np.array(res).T ** 2

    msd = sup_sq.mean(axis=2)                  # (u0, eps)
    stat = msd.max(axis=0)                     # max over initial data
    x = np.log(np.array([(e - eps0) ** 2 for e in eps_ladder]))
    y = np.log(stat)
    slope = float(np.polyfit(x, y, 1)[0])

    # initial-data continuity at fixed (largest) eps
    eps_fix = eps_ladder[0]
    cfg_fix = replace(base, epsilon=eps_fix)
    pert = gaussian_bump_field(grid, 0.5, 3.0, direction=(0.0, 0.8, 0.6))
    pert_cfgs = [cfg_fix] * (pert_halvings + 1)
    pert_stats = np.zeros((base.paths, pert_halvings))

    def pert_worker(path_id: int):
        sups = np.zeros(pert_halvings)
        starts = [u0_list[0]] + [u0_list[0] + (0.5 ** n) * pert
                                 for n in range(pert_halvings)]
        # lockstep needs one shared start; run coupled manually instead
        states = [make_state(s, cfg_fix, path_id) for s in starts]
        n_steps = int(round(cfg_fix.t_final / cfg_fix.dt))
        step = STEPPERS[cfg_fix.scheme]
        for i in range(n_steps):
            incr = sample_increments(states[0].stream, i, basis.count,
                                     cfg_fix.dt)
            states = [step(s, cfg_fix, basis, incr) for s in states]
            for nidx in range(pert_halvings):
                d = states[nidx + 1].u - states[0].u
                sups[nidx] = max(sups[nidx], math.sqrt(norm_sq(d, "l2")))
        return sups

    pert_stats = np.array(run_ensemble(pert_worker, range(base.paths), threads))
    pert_means = pert_stats.mean(axis=0)

    lo, hi = slope_band
    points = []
    for k, e in enumerate(eps_ladder):
        points.append({
            "epsilon": e, "eps0": eps0, "gap_sq": (e - eps0) ** 2,
            "max_mean_sq_sup": float(stat[k]),
            **{f"mean_sq_sup_u{j}": float(msd[j, k])
               for j in range(len(u0_list))},
        })
    verdicts = {
        "slope_in_band": bool(lo <= slope <= hi),
        "max_msd_decreasing": _strictly_decreasing(list(stat)),
        "initial_data_continuity": _strictly_decreasing(list(pert_means)),
    }
    series = {"slope": slope,
              "perturbation_mean_sup": [float(v) for v in pert_means]}
    return StudyReport("noise_continuity", tuple(points), verdicts,
                       _outcome(verdicts), _provenance(spec), series)


# ----------------------------------------------------------- tail uniformity

def run_tail_uniformity_study(spec: StudySpec, threads: int = 1) -> StudyReport:
    """Uniform-in-(eps, delta) smallness of tail masses on a radius ladder.

    For every (eps, delta) combination, the ensemble mean of
    sup_t tail_mass(u(t), j) is tabulated on the j ladder.  Verdicts: the
    max over the grid strictly decreases in j, the largest radius is below
    the declared fraction of ||u0||_{H1}^2, and the fitted radius
    J = min{j : stat < threshold} varies by at most one ladder step
    across the grid.
    """
    if spec.kind != "tail_uniformity":
        raise ParameterError(f"spec kind {spec.kind!r} is not 'tail_uniformity'")
    p = dict(spec.params)
    eps_grid = list(p.pop("eps_grid", (0.0, 0.5, 1.0)))
    delta_grid = list(p.pop("delta_grid", (0.0, 1e-3, 1e-1)))
    j_ladder = list(p.pop("j_ladder", (4, 6, 8, 10, 12)))
    sample_stride = int(p.pop("sample_stride", 5))
    u0 = p.pop("u0", None) or gaussian_bump_field(
        spec.base.grid, 1.0, 1.5, direction=(0.6, 0.0, 0.8))
    if p:
        raise ParameterError(f"unknown tail_uniformity params {sorted(p)}")
    tol = dict(spec.tolerances)
    tail_fraction = float(tol.pop("tail_fraction", 1e-3))

    base = spec.base
    if base.noise.family != "gaussian_bump":
        raise ParameterError(
            "tail study needs localized noise (family gaussian_bump)")
    if sorted(j_ladder) != j_ladder:
        raise ParameterError("j_ladder must be ascending")
    basis = base.noise.build(base.grid)
    u0_h1 = norm_sq(u0, "h1")
    combos = list(itertools.product(eps_grid, delta_grid))

    def combo_stats(eps: float, delta: float) -> np.ndarray:
        cfg = replace(base, epsilon=eps, delta=delta)

        def worker(path_id: int):
            state = make_state(u0, cfg, path_id)
            sups = np.array([tail_mass(state.u, j) for j in j_ladder])
            n_steps = int(round(cfg.t_final / cfg.dt))
            step = STEPPERS[cfg.scheme]
            for i in range(n_steps):
                state = step(state, cfg, basis)
                if (i + 1) % sample_stride == 0 or i + 1 == n_steps:
                    for jj, j in enumerate(j_ladder):
                        sups[jj] = max(sups[jj], tail_mass(state.u, j))
            return sups

        res = np.array(run_ensemble(worker, range(cfg.paths), threads))
        return res.mean(axis=0)

    table = {c: combo_stats(*c) for c in combos}
    uniform = np.max(np.array(list(table.values())), axis=0)

    # auto threshold: geometric midpoint of the worst combo's extremes
    threshold = float(tol.pop("fit_threshold", 0.0)) or \
        float(math.sqrt(uniform[0] * uniform[-1]))
    fitted = {}
    for c, stats in table.items():
        idx = next((i for i, v in enumerate(stats) if v < threshold), None)
        fitted[c] = idx

    points = []
    for c, stats in table.items():
        pt = {"epsilon": c[0], "delta": c[1],
              **{f"tail_j{j}": float(stats[i]) for i, j in enumerate(j_ladder)},
              "fitted_j": (j_ladder[fitted[c]] if fitted[c] is not None else -1)}
        points.append(pt)

    fit_indices = [v for v in fitted.values() if v is not None]
    verdicts = {
        "uniform_max_decreasing_in_j": _strictly_decreasing(list(uniform)),
        "largest_radius_small": bool(uniform[-1] <= tail_fraction * u0_h1),
        "fitted_radius_uniform": (len(fit_indices) == len(combos)
                                  and max(fit_indices) - min(fit_indices) <= 1),
    }
    series = {"j_ladder": j_ladder,
              "uniform_max": [float(v) for v in uniform],
              "threshold": threshold, "u0_h1_sq": u0_h1}
    return StudyReport("tail_uniformity", tuple(points), verdicts,
                       _outcome(verdicts), _provenance(spec), series)


# ------------------------------------------------------------ dissipativity

def run_dissipativity_study(spec: StudySpec, threads: int = 1) -> StudyReport:
    """Empirical dissipativity envelopes over an (eps, delta, u0) grid.

    Fits the minimal admissible envelope constant on [0, T], re-fits on
    [0, 2T] (the run horizon), and checks: relative drift of the constant
    <= 10%, at-most-linear growth of the cumulative H2 integral, and an
    exponential transient rate >= 0.5 for the largest deterministic
    initial datum.

    "At most linear" admits two shapes: steady growth (affine fit with
    R^2 >= 0.95, the stationary noise-driven regime) or saturation (the
    late-window growth rate does not exceed the early one, the decaying
    eps = 0 regime).  Superlinear growth fails both arms.
    """
    if spec.kind != "dissipativity":
        raise ParameterError(f"spec kind {spec.kind!r} is not 'dissipativity'")
    p = dict(spec.params)
    eps_grid = list(p.pop("eps_grid", (0.0, 0.5, 1.0)))
    delta_grid = list(p.pop("delta_grid", (0.0, 1e-3, 1e-1)))
    amplitudes = list(p.pop("u0_amplitudes", (1.0, 5.0)))
    stride = int(p.pop("sample_stride", 5))
    if p:
        raise ParameterError(f"unknown dissipativity params {sorted(p)}")
    tol = dict(spec.tolerances)
    m3_drift_tol = float(tol.pop("m3_drift", 0.10))
    r2_min = float(tol.pop("h2_r2", 0.95))
    accel_tol = float(tol.pop("h2_accel", 0.10))
    rate_min = float(tol.pop("transient_rate", 0.5))

    base = spec.base                      # t_final here is T; runs go to 2T
    T = base.t_final
    run_cfg_proto = replace(base, t_final=2.0 * T)
    basis = base.noise.build(base.grid)
    dt = base.dt

    def mean_series(cfg: SimConfig, u0: VectorField):
        def worker(path_id: int):
            state = make_state(u0, cfg, path_id)
            ts = [0.0]
            h1s = [norm_sq(state.u, "h1")]
            h2s = [norm_sq(state.u, "h2")]
            n_steps = int(round(cfg.t_final / cfg.dt))
            step = STEPPERS[cfg.scheme]
            for i in range(n_steps):
                state = step(state, cfg, basis)
                if (i + 1) % stride == 0 or i + 1 == n_steps:
                    ts.append(state.t)
                    h1s.append(norm_sq(state.u, "h1"))
                    h2s.append(norm_sq(state.u, "h2"))
            return np.array(ts), np.array(h1s), np.array(h2s)

        res = run_ensemble(worker, range(cfg.paths), threads)
        ts = res[0][0]
        h1 = np.mean([r[1] for r in res], axis=0)
        h2 = np.mean([r[2] for r in res], axis=0)
        return ts, h1, h2

    def minimal_m3(ts, h1, u0_h1, horizon):
        mask = ts <= horizon + 1e-12
        shape_fn = 1.0 + np.exp(-ts[mask]) * u0_h1
        return float(np.max(h1[mask] / shape_fn))

    points = []
    rates = []
    for amp in amplitudes:
        u0 = _default_u0(base, amplitude=amp)
        u0_h1 = norm_sq(u0, "h1")
        for eps, delta in itertools.product(eps_grid, delta_grid):
            cfg = replace(run_cfg_proto, epsilon=eps, delta=delta)
            ts, h1, h2 = mean_series(cfg, u0)
            m3_t = minimal_m3(ts, h1, u0_h1, T)
            m3_2t = minimal_m3(ts, h1, u0_h1, 2.0 * T)
            drift_rel = abs(m3_2t - m3_t) / m3_t if m3_t > 0 else math.inf
            # cumulative integral of the H2 series, trapezoid
            cum = np.concatenate(
                [[0.0], np.cumsum(0.5 * (h2[1:] + h2[:-1]) * np.diff(ts))])
            a, b = np.polyfit(ts, cum, 1)
            fit = a * ts + b
            ss_res = float(np.sum((cum - fit) ** 2))
            ss_tot = float(np.sum((cum - cum.mean()) ** 2))
            r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
            half = len(ts) // 2
            rate_early = float((cum[half] - cum[0]) / (ts[half] - ts[0]))
            rate_late = float((cum[-1] - cum[half]) / (ts[-1] - ts[half]))
            non_accel = rate_late <= rate_early * (1.0 + accel_tol) + 1e-12
            pt = {"epsilon": eps, "delta": delta, "u0_h1_sq": u0_h1,
                  "m3_fit_T": m3_t, "m3_fit_2T": m3_2t,
                  "m3_rel_drift": drift_rel, "h2_linear_r2": r2,
                  "h2_growth_rate": float(a),
                  "h2_rate_early": rate_early, "h2_rate_late": rate_late,
                  "h2_non_accelerating": bool(non_accel)}
            if eps == 0.0 and amp == max(amplitudes):
                window = (ts >= 0.25) & (ts <= min(2.0, T))
                logs = np.log(np.maximum(h1[window], 1e-300))
                rate = -float(np.polyfit(ts[window], logs, 1)[0])
                pt["transient_rate"] = rate
                rates.append(rate)
            points.append(pt)

    verdicts = {
        "m3_stable_under_doubling": all(
            pt["m3_rel_drift"] <= m3_drift_tol for pt in points),
        "h2_growth_at_most_linear": all(
            pt["h2_linear_r2"] >= r2_min or pt["h2_non_accelerating"]
            for pt in points),
        "transient_rate_ok": bool(rates) and all(r >= rate_min for r in rates),
    }
    series = {"transient_rates": [float(r) for r in rates]}
    return StudyReport("dissipativity", tuple(points), verdicts,
                       _outcome(verdicts), _provenance(spec), series)


# ---------------------------------------------------------- invariant limit

def run_invariant_limit_study(spec: StudySpec, threads: int = 1) -> StudyReport:
    """Weak stability of long-run empirical measures as eps -> eps0.

    Collects time-averaged snapshot clouds on an eps ladder plus the eps0
    baseline, then checks: weak distances to the baseline decrease with
    every decrement exceeding the split-half noise floor; the smallest-eps
    measure and the baseline are stationary for their own dynamics within
    2x the Monte-Carlo floor; H2 moments and tail masses stay uniformly
    bounded along the ladder (tightness probes).  A paired time-split
    stationarity test (first-half vs second-half time averages per path,
    gauged against their own per-path sem) marks the study inconclusive
    on failure rather than passing silently.  The defect of each measure
    under the eps0 dynamics is reported as a trend series (the
    limit-invariance content).
    """
    if spec.kind != "invariant_limit":
        raise ParameterError(f"spec kind {spec.kind!r} is not 'invariant_limit'")
    p = dict(spec.params)
    eps_ladder = list(p.pop("eps_ladder", (0.5, 0.25, 0.1, 0.05)))
    eps0 = float(p.pop("eps0", 0.0))
    burn_in = float(p.pop("burn_in", 20.0))
    stride = float(p.pop("stride", 50 * spec.base.dt))
    defect_horizon = float(p.pop("defect_horizon", 2.0))
    subsample = int(p.pop("subsample", 48))
    tail_j = float(p.pop("tail_j", 12.0))
    u0 = p.pop("u0", None) or _default_u0(spec.base)
    functionals = p.pop("functionals", None) or default_functionals(
        spec.base.grid)
    if p:
        raise ParameterError(f"unknown invariant_limit params {sorted(p)}")
    tol = dict(spec.tolerances)
    defect_factor = float(tol.pop("defect_factor", 2.0))
    h2_uniform_factor = float(tol.pop("h2_uniform_factor", 2.0))
    tail_cap = float(tol.pop("tail_cap", 1e-2))
    stationarity_factor = float(tol.pop("stationarity_factor", 2.0))
    # deterministic members have a zero split-half floor; without an
    # absolute resolution any residual transient, however tiny, would
    # flag them as non-stationary
    stationarity_abs = float(tol.pop("stationarity_abs", 1e-6))

    if sorted(eps_ladder, reverse=True) != eps_ladder:
        raise ParameterError("eps_ladder must be strictly descending")
    base = spec.base
    basis = base.noise.build(base.grid)

    ladder = eps_ladder + [eps0]
    measures = {}
    for e in ladder:
        cfg = replace(base, epsilon=e)
        measures[e] = collect_empirical(cfg, basis, u0, burn_in, stride,
                                        threads)

    mu0 = measures[eps0]
    distances = [weak_distance(measures[e], mu0, functionals)
                 for e in eps_ladder]
    floors = {}
    for e in ladder:
        h1, h2m = measures[e].split_half(by="path")
        floors[e] = weak_distance(h1, h2m, functionals)
    floor_all = max(floors.values())
    decrements_ok = all(
        (d1 - d2) > floor_all
        for d1, d2 in zip(distances, distances[1:]))

    own_defects = {}
    for e in (eps_ladder[-1], eps0):
        cfg = replace(base, epsilon=e)
        own_defects[e] = invariance_defect(
            measures[e], cfg, basis, defect_horizon, functionals,
            subsample=subsample, threads=threads)
    cross_defects = []
    for e in eps_ladder:
        cfg = replace(base, epsilon=e)
        rep = invariance_defect(measures[e], cfg, basis, defect_horizon,
                                functionals, eps=eps0, subsample=subsample,
                                threads=threads)
        cross_defects.append(rep.defect)

    h2_means = {}
    tail_means = {}
    for e in ladder:
        snaps = measures[e].snapshots
        h2_means[e] = float(np.mean([norm_sq(u, "h2") for u in snaps]))
        tail_means[e] = float(np.mean([tail_mass(u, tail_j) for u in snaps]))

    # Paired time-split stationarity test.  The gap max_g |mean_p d_{p,g}|
    # with d_{p,g} the first-half minus second-half time average of g on
    # path p is compared against its own Monte-Carlo floor
    # max_g sem_g * sqrt(2 ln(2|G|)); the path-parity floor above is an
    # independent same-scale draw and cannot calibrate this statistic.
    stationarity_ok = True
    stationarity_gaps = {}
    stationarity_floors = {}
    scale = math.sqrt(2.0 * math.log(2.0 * len(functionals)))
    for e in ladder:
        mu = measures[e]
        m = mu.metadata["samples_per_path"]
        n_paths = mu.size // m
        vals = np.array([[g(u) for g in functionals] for u in mu.snapshots])
        vals = vals.reshape(n_paths, m, len(functionals))
        d = vals[:, : m // 2].mean(axis=1) - vals[:, m - m // 2:].mean(axis=1)
        gap = float(np.max(np.abs(d.mean(axis=0))))
        if n_paths > 1:
            sems = d.std(axis=0, ddof=1) / math.sqrt(n_paths)
            floor_t = float(np.max(sems)) * scale
        else:
            floor_t = 0.0
        stationarity_gaps[e] = gap
        stationarity_floors[e] = floor_t
        if gap > stationarity_factor * max(floor_t, stationarity_abs):
            stationarity_ok = False

    ladder_h2 = [h2_means[e] for e in eps_ladder]
    h2_ref = h2_means[eps_ladder[0]]
    points = []
    for i, e in enumerate(eps_ladder):
        points.append({
            "epsilon": e, "weak_distance_to_base": float(distances[i]),
            "split_half_floor": float(floors[e]),
            "cross_defect_eps0": float(cross_defects[i]),
            "mean_h2_sq": h2_means[e], "mean_tail_j": tail_means[e],
            "stationarity_gap": float(stationarity_gaps[e]),
            "stationarity_floor": float(stationarity_floors[e]),
        })
    points.append({
        "epsilon": eps0, "weak_distance_to_base": 0.0,
        "split_half_floor": float(floors[eps0]), "cross_defect_eps0": 0.0,
        "mean_h2_sq": h2_means[eps0], "mean_tail_j": tail_means[eps0],
        "stationarity_gap": float(stationarity_gaps[eps0]),
        "stationarity_floor": float(stationarity_floors[eps0]),
    })

    verdicts = {
        "weak_distance_strictly_decreasing": _strictly_decreasing(distances),
        "decrements_beat_noise_floor": decrements_ok,
        "smallest_eps_stationary": own_defects[eps_ladder[-1]].defect
            <= defect_factor * max(own_defects[eps_ladder[-1]].floor, 1e-12),
        "baseline_stationary": own_defects[eps0].defect
            <= defect_factor * max(own_defects[eps0].floor, 1e-12),
        "h2_uniformly_bounded": max(ladder_h2) <= h2_uniform_factor * h2_ref,
        "tails_uniformly_small": all(
            tail_means[e] <= tail_cap for e in ladder),
        "stationarity_ok": stationarity_ok,
    }
    series = {
        "distances": [float(d) for d in distances],
        "cross_defects_eps0": [float(d) for d in cross_defects],
        "noise_floor": float(floor_all),
        "own_defects": {str(e): (own_defects[e].defect, own_defects[e].floor)
                        for e in own_defects},
    }
    return StudyReport("invariant_limit", tuple(points), verdicts,
                       _outcome(verdicts, ("stationarity_ok",)),
                       _provenance(spec), series)


# --------------------------------------------------------- self convergence

def dyadic_increment_table(stream, count: int, dt_fine: float,
                           n_fine: int, levels: int) -> list:
    """Wiener increments at dt_fine plus ``levels`` pairwise coarsenings.

    Entry q has shape (n_fine / 2^q, count) with step size dt_fine * 2^q;
    each coarse increment is exactly the float sum of its two children, so
    coupled runs across the ladder consume literally the same noise.
    """
    if n_fine % (2 ** levels) != 0:
        raise ParameterError("n_fine must be divisible by 2^levels")
    fine = np.empty((n_fine, count))
    for i in range(n_fine):
        fine[i] = stream.increments(i, count, dt_fine)
    table = [fine]
    for _ in range(levels):
        prev = table[-1]
        table.append(prev.reshape(-1, 2, prev.shape[1]).sum(axis=1))
    return table


def _ladder_run(cfg: SimConfig, basis: NoiseBasis, u0: VectorField,
                incr: np.ndarray, path_id: int, scheme: str) -> VectorField:
    run = replace(cfg, scheme=scheme)
    state = make_state(u0, run, path_id)
    step = STEPPERS[scheme]
    for i in range(incr.shape[0]):
        state = step(state, run, basis,
                     WienerIncrements(incr[i], run.dt))
    return state.u


def run_self_convergence_study(spec: StudySpec, threads: int = 1) -> StudyReport:
    """Dyadic dt ladders: deterministic order, strong order, scheme gap.

    Three sub-experiments on shared dyadic Brownian refinements:

    * deterministic (eps = 0) self-convergence slope ~ 1,
    * strong self-convergence of em_ito under multiplicative noise,
      slope in the declared band around 1/2,
    * em_ito vs heun_strat gap on identical increments, which must shrink
      under refinement (finest gap below a quarter of the coarsest).
    """
    if spec.kind != "self_convergence":
        raise ParameterError(f"spec kind {spec.kind!r} is not 'self_convergence'")
    p = dict(spec.params)
    dt_exps = list(p.pop("dt_exponents", (8, 9, 10, 11, 12)))
    T = float(p.pop("horizon", 1.0))
    paths_strong = int(p.pop("paths_strong", 64))
    paths_gap = int(p.pop("paths_gap", 32))
    strong_noise = p.pop("strong_noise", None) or replace(
        spec.base.noise, amplitude=2.0, modes=8)
    weak_noise = p.pop("weak_noise", None) or replace(
        spec.base.noise, amplitude=0.15, modes=8)
    u0 = p.pop("u0", None) or _default_u0(spec.base)
    if p:
        raise ParameterError(f"unknown self_convergence params {sorted(p)}")
    tol = dict(spec.tolerances)
    det_band = tol.pop("det_slope_band", (0.8, 1.2))
    strong_band = tol.pop("strong_slope_band", (0.35, 0.65))
    gap_ratio_max = float(tol.pop("gap_ratio", 0.25))

    if sorted(dt_exps) != dt_exps:
        raise ParameterError("dt_exponents must be ascending (coarse to fine)")
    dts = [2.0 ** -q for q in dt_exps]
    levels = dt_exps[-1] - dt_exps[0]
    n_fine = int(round(T / dts[-1]))
    base = spec.base

    def cfg_for(dt: float, eps: float, noise: NoiseParams) -> SimConfig:
        return replace(base, dt=dt, t_final=T, epsilon=eps, noise=noise,
                       seed=base.seed)

    # (a) deterministic ladder, single path
    det_fields = []
    for dt in dts:
        cfg = cfg_for(dt, 0.0, weak_noise)
        basis = weak_noise.build(base.grid)
        state = integrate(make_state(u0, cfg, 0), cfg, basis)
        det_fields.append(state.u)
    det_diffs = [math.sqrt(norm_sq(a - b, "l2"))
                 for a, b in zip(det_fields, det_fields[1:])]
    det_slope = float(np.polyfit(np.log(dts[:-1]), np.log(det_diffs), 1)[0])

    # (b) strong self-convergence of em_ito, multiplicative noise
    strong_basis = strong_noise.build(base.grid)

    def strong_worker(path_id: int):
        from .noise import NoiseStream
        table = dyadic_increment_table(
            NoiseStream(base.seed, path_id), strong_basis.count,
            dts[-1], n_fine, levels)
        fields = []
        for q, dt in enumerate(dts):
            # table[j] carries step size dts[-1] * 2^j
            incr = table[dt_exps[-1] - dt_exps[q]]
            cfg = cfg_for(dt, 1.0, strong_noise)
            fields.append(_ladder_run(cfg, strong_basis, u0, incr,
                                      path_id, "em_ito"))
        return [math.sqrt(norm_sq(a - b, "l2"))
                for a, b in zip(fields, fields[1:])]

    strong = np.array(run_ensemble(strong_worker, range(paths_strong), threads))
    strong_means = strong.mean(axis=0)
    strong_slope = float(np.polyfit(np.log(dts[:-1]),
                                    np.log(strong_means), 1)[0])

    # (c) em vs heun gap on identical increments, weak multiplicative noise
    weak_basis = weak_noise.build(base.grid)
    gap_exps = [dt_exps[0], dt_exps[len(dt_exps) // 2], dt_exps[-1]]
    gap_dts = [2.0 ** -q for q in gap_exps]

    def gap_worker(path_id: int):
        from .noise import NoiseStream
        table = dyadic_increment_table(
            NoiseStream(base.seed, path_id), weak_basis.count,
            dts[-1], n_fine, levels)
        gaps = []
        for q, dt in zip(gap_exps, gap_dts):
            incr = table[dt_exps[-1] - q]
            cfg = cfg_for(dt, 0.5, weak_noise)
            u_em = _ladder_run(cfg, weak_basis, u0, incr, path_id, "em_ito")
            u_he = _ladder_run(cfg, weak_basis, u0, incr, path_id,
                               "heun_strat")
            gaps.append(math.sqrt(norm_sq(u_em - u_he, "l2")))
        return gaps

    gaps = np.array(run_ensemble(gap_worker, range(paths_gap), threads))
    gap_means = gaps.mean(axis=0)
    gap_ratio = float(gap_means[-1] / gap_means[0]) if gap_means[0] > 0 else 0.0

    points = []
    for q, dt in enumerate(dts[:-1]):
        points.append({
            "dt": dt, "det_diff": float(det_diffs[q]),
            "strong_mean_diff": float(strong_means[q]),
        })
    for dt, g in zip(gap_dts, gap_means):
        points.append({"dt": dt, "scheme_gap": float(g)})

    verdicts = {
        "det_slope_in_band": bool(det_band[0] <= det_slope <= det_band[1]),
        "strong_slope_in_band": bool(
            strong_band[0] <= strong_slope <= strong_band[1]),
        "gap_decreasing": _strictly_decreasing(list(gap_means)),
        "gap_ratio_ok": bool(gap_ratio < gap_ratio_max),
    }
    series = {"det_slope": det_slope, "strong_slope": strong_slope,
              "gap_ratio": gap_ratio,
              "gap_means": [float(g) for g in gap_means]}
    return StudyReport("self_convergence", tuple(points), verdicts,
                       _outcome(verdicts), _provenance(spec), series)


RUNNERS = {
    "viscosity": run_viscosity_study,
    "noise_continuity": run_noise_continuity_study,
    "tail_uniformity": run_tail_uniformity_study,
    "dissipativity": run_dissipativity_study,
    "invariant_limit": run_invariant_limit_study,
    "self_convergence": run_self_convergence_study,
}


def run_study(spec: StudySpec, threads: int = 1) -> StudyReport:
    return RUNNERS[spec.kind](spec, threads)
