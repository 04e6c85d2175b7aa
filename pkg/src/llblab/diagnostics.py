"""Norms, smooth cutoffs, tail masses and energy-balance diagnostics.

Sobolev norms use the equivalent-norm convention

    ||u||_{L2}^2 = integral |u|^2,
    ||u||_{H1}^2 = ||u||_{L2}^2 + ||grad u||_{L2}^2,
    ||u||_{H2}^2 = ||u||_{H1}^2 + ||Delta u||_{L2}^2,

evaluated by trapezoidal quadrature (exact Parseval sums on the periodic
grid) with derivatives from the spectral operators.

The cutoff family is a fixed radial C^2 profile theta with theta = 1 on
|x| <= 1/2 and theta = 0 on |x| >= 3/4, built from the exp(-1/s) smooth
step; theta_n(x) = theta(x/n), phi_j = 1 - theta_j.  The scaled profiles
obey |grad theta_j| <= C/j and |Delta theta_j| <= C/j^2 with C read off
the profile once.

tail_mass(u, j) = ||phi_j u||_{L2}^2 + ||phi_j grad u||_{L2}^2 measures
how much of u lives outside radius ~ j/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dynamics import Observer, PathState, SimConfig, drift, integrate, \
    make_state, run_ensemble
from .errors import ParameterError
from .fields import VectorField, Grid, gradient, l2_inner, laplacian
from .noise import NoiseBasis, WienerIncrements, diffusion_apply, \
    quadratic_variation_integral

NORM_KINDS = ("l2", "h1", "h2")


def norm_sq(u: VectorField, kind: str = "l2") -> float:
    if kind not in NORM_KINDS:
        raise ParameterError(
            f"unknown norm kind {kind!r}, expected one of {NORM_KINDS}")
    total = l2_inner(u, u)
    if kind == "l2":
        return total
    ux, uy = gradient(u)
    total += l2_inner(ux, ux) + l2_inner(uy, uy)
    if kind == "h1":
        return total
    lap = laplacian(u)
    return total + l2_inner(lap, lap)


def _smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, exp(-1/s) blend between."""
    s = np.asarray(s, dtype=np.float64)
    lo = s <= 1e-9
    hi = s >= 1.0 - 1e-9
    mid = ~(lo | hi)
    out = np.empty_like(s)
    out[lo] = 0.0
    out[hi] = 1.0
    sm = s[mid]
    b = np.exp(-1.0 / sm)
    bc = np.exp(-1.0 / (1.0 - sm))
    out[mid] = b / (b + bc)
    return out


def _smooth_step_prime(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    mid = (s > 1e-9) & (s < 1.0 - 1e-9)
    sm = s[mid]
    b = np.exp(-1.0 / sm)
    bc = np.exp(-1.0 / (1.0 - sm))
    bp = b / sm ** 2
    bcp = bc / (1.0 - sm) ** 2
    out[mid] = (bp * bc + b * bcp) / (b + bc) ** 2
    return out


@dataclass(frozen=True)
class CutoffFamily:
    """Radial plateau cutoff: 1 inside r <= 1/2, 0 outside r >= 3/4."""

    inner: float = 0.5
    outer: float = 0.75

    def theta_profile(self, r) -> np.ndarray:
        """theta as a function of radius (scale 1)."""
        r = np.asarray(r, dtype=np.float64)
        return _smooth_step((self.outer - r) / (self.outer - self.inner))

    def theta_profile_prime(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        scale = 1.0 / (self.outer - self.inner)
        return -scale * _smooth_step_prime((self.outer - r) * scale)

    def theta(self, points, scale: float = 1.0) -> np.ndarray:
        """theta_n(x) = theta(|x|/n) for points of shape (..., 2)."""
        pts = np.asarray(points, dtype=np.float64)
        r = np.sqrt(np.sum(pts * pts, axis=-1)) / float(scale)
        return self.theta_profile(r)

    def phi(self, points, scale: float = 1.0) -> np.ndarray:
        """phi_j = 1 - theta_j (vanishes inside, 1 far out)."""
        return 1.0 - self.theta(points, scale)

    def theta_on_grid(self, grid: Grid, scale: float) -> np.ndarray:
        return _cutoff_grid(self, grid.n, grid.half_width, float(scale))

    def phi_on_grid(self, grid: Grid, scale: float) -> np.ndarray:
        return 1.0 - self.theta_on_grid(grid, scale)

    def derivative_bounds(self) -> tuple[float, float]:
        """(c1, c2) with |grad theta_j| <= c1/j and |Delta theta_j| <= c2/j^2."""
        return _profile_bounds(self.inner, self.outer)


@lru_cache(maxsize=128)
def _cutoff_grid(family: CutoffFamily, n: int, half_width: float,
                 scale: float) -> np.ndarray:
    grid = Grid(n, half_width)
    xx, yy = grid.meshes()
    r = np.sqrt(xx ** 2 + yy ** 2) / scale
    out = family.theta_profile(r)
    out.flags.writeable = False
    return out


@lru_cache(maxsize=8)
def _profile_bounds(inner: float, outer: float) -> tuple[float, float]:
    fam = CutoffFamily(inner, outer)
    r = np.linspace(inner, outer, 200001)
    tp = fam.theta_profile_prime(r)
    c1 = float(np.abs(tp).max())
    h = 1e-6
    tpp = (fam.theta_profile_prime(r + h) - fam.theta_profile_prime(r - h)) / (2 * h)
    # radial laplacian of theta(r): theta'' + theta'/r
    c2 = float(np.abs(tpp + tp / np.maximum(r, inner)).max())
    # dense-sampling safety margin
    return 1.005 * c1, 1.02 * c2


DEFAULT_CUTOFF = CutoffFamily()


def cutoff_eval(family: CutoffFamily, kind: str, scale: float,
                points) -> np.ndarray:
    """Evaluate theta_n or phi_j at spatial points of shape (..., 2)."""
    if kind == "theta":
        return family.theta(points, scale)
    if kind == "phi":
        return family.phi(points, scale)
    raise ParameterError(f"unknown cutoff kind {kind!r}, expected theta or phi")


def tail_mass(u: VectorField, j: float,
              family: CutoffFamily = DEFAULT_CUTOFF) -> float:
    """||phi_j u||_{L2}^2 + ||phi_j grad u||_{L2}^2.

    Requires j >= 1 and the transition annulus inside the box:
    outer radius (3/4) j <= L.
    """
    if j < 1:
        raise ParameterError(f"tail radius must satisfy j >= 1, got {j}")
    L = u.grid.half_width
    if family.outer * j > L:
        raise ParameterError(
            f"tail radius j={j} needs ({family.outer})*j <= L={L}; "
            "enlarge the box or shrink j")
    w = family.phi_on_grid(u.grid, float(j)) ** 2
    ux, uy = gradient(u)
    dens = (np.sum(u.values ** 2, axis=-1) + np.sum(ux.values ** 2, axis=-1)
            + np.sum(uy.values ** 2, axis=-1))
    return float(np.sum(w * dens) * u.grid.spacing ** 2)


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One sampled instant of a path."""

    t: float
    l2_sq: float
    h1_sq: float
    h2_sq: float
    tail: dict[int, float] = field(default_factory=dict)
    energy_residual: float = 0.0


class DiagnosticsRecorder:
    """Observer that samples norms, tails and the per-step L2 residual.

    Attach via ``recorder.observer()``; it watches every step (keeping the
    previous field so the energy balance of a recorded step is computable)
    and emits a :class:`DiagnosticsRecord` every ``stride`` steps.
    Increments are regenerated from the path's counter-based stream, so no
    noise needs to be stored.
    """

    def __init__(self, initial: PathState, cfg: SimConfig, basis: NoiseBasis,
                 stride: int = 1, tail_radii: tuple = (4, 8, 12),
                 family: CutoffFamily = DEFAULT_CUTOFF,
                 with_residual: bool = True):
        if stride < 1:
            raise ParameterError(f"record stride must be >= 1, got {stride}")
        for j in tail_radii:
            if family.outer * j > cfg.grid.half_width:
                raise ParameterError(
                    f"tail radius j={j} does not fit the box L={cfg.grid.half_width}")
        self.cfg = cfg
        self.basis = basis
        self.stride = stride
        self.tail_radii = tuple(tail_radii)
        self.family = family
        self.with_residual = with_residual
        self.records: list[DiagnosticsRecord] = []
        self._prev = initial.u

    def observer(self) -> Observer:
        return Observer(self._on_step, 1)

    def _on_step(self, state: PathState) -> None:
        if state.step_index % self.stride == 0:
            residual = 0.0
            if self.with_residual:
                incr = WienerIncrements(
                    state.stream.increments(
                        state.step_index - 1, self.basis.count, self.cfg.dt),
                    self.cfg.dt)
                residual = step_l2_residual(
                    self._prev, state.u, incr, self.cfg, self.basis)
            tails = {j: tail_mass(state.u, j, self.family)
                     for j in self.tail_radii}
            self.records.append(DiagnosticsRecord(
                t=state.t,
                l2_sq=norm_sq(state.u, "l2"),
                h1_sq=norm_sq(state.u, "h1"),
                h2_sq=norm_sq(state.u, "h2"),
                tail=tails,
                energy_residual=residual))
        self._prev = state.u


@dataclass(frozen=True)
class EnvelopeReport:
    """Outcome of checking mean ||u(t)||_{H1}^2 <= M (1 + e^{-t} ||u0||_{H1}^2)."""

    m3: float
    minimal_m3: float
    violations: tuple
    passed: bool


def dissipativity_envelope_check(times, mean_h1_sq, u0_h1_sq: float,
                                 m3: float) -> EnvelopeReport:
    """Check the dissipativity envelope and report the smallest admissible M.

    The envelope value at time t is m3 * (1 + e^{-t} * u0_h1_sq); the
    minimal admissible constant is max_t mean(t) / (1 + e^{-t} u0_h1_sq).
    """
    t = np.asarray(times, dtype=np.float64)
    m = np.asarray(mean_h1_sq, dtype=np.float64)
    if t.shape != m.shape or t.ndim != 1 or t.size == 0:
        raise ParameterError("times and mean_h1_sq must be equal-length 1-d arrays")
    shape_fn = 1.0 + np.exp(-t) * u0_h1_sq
    minimal = float(np.max(m / shape_fn))
    bound = m3 * shape_fn
    bad = np.nonzero(m > bound)[0]
    violations = tuple((float(t[i]), float(m[i]), float(bound[i])) for i in bad)
    return EnvelopeReport(m3=m3, minimal_m3=minimal, violations=violations,
                          passed=len(violations) == 0)


def step_l2_residual(u_pre: VectorField, u_post: VectorField,
                     increments: WienerIncrements, cfg: SimConfig,
                     basis: NoiseBasis) -> float:
    """Signed defect of the one-step discrete Ito L2 balance.

    residual = (||u+||^2 - ||u||^2) - 2 <drift(u), u> dt
               - 2 <diffusion(u, dW), u> - QV(u) dt
    """
    d = norm_sq(u_post, "l2") - norm_sq(u_pre, "l2")
    d -= 2.0 * l2_inner(drift(u_pre, cfg, basis), u_pre) * cfg.dt
    if cfg.epsilon != 0.0:
        d -= 2.0 * l2_inner(
            diffusion_apply(u_pre, basis, increments, cfg.epsilon), u_pre)
        d -= quadratic_variation_integral(u_pre, basis, cfg.epsilon) * cfg.dt
    return d


def l2_balance_residual(samples, cfg: SimConfig, basis: NoiseBasis) -> float:
    """Ensemble mean of path-summed step residuals.

    ``samples`` iterates over paths; each path is an iterable of
    (u_pre, u_post, increments) triples for consecutive steps.
    """
    sums = []
    for path in samples:
        total = 0.0
        for u_pre, u_post, incr in path:
            total += step_l2_residual(u_pre, u_post, incr, cfg, basis)
        sums.append(total)
    if not sums:
        raise ParameterError("no balance samples supplied")
    return float(np.mean(sums))


def run_balance_ensemble(cfg: SimConfig, basis: NoiseBasis, u0: VectorField,
                         threads: int = 1) -> float:
    """Run cfg.paths paths to t_final accumulating the summed L2 residual."""

    def worker(path_id: int) -> float:
        state = make_state(u0, cfg, path_id)
        collect = _ResidualCollector(state, cfg, basis)
        integrate(state, cfg, basis, observers=(Observer(collect, 1),))
        return collect.total

    totals = run_ensemble(worker, range(cfg.paths), threads)
    return float(np.mean(totals))


class _ResidualCollector:
    def __init__(self, initial: PathState, cfg: SimConfig, basis: NoiseBasis):
        self.cfg = cfg
        self.basis = basis
        self.total = 0.0
        self._prev = initial.u

    def __call__(self, state: PathState) -> None:
        incr = WienerIncrements(
            state.stream.increments(
                state.step_index - 1, self.basis.count, self.cfg.dt),
            self.cfg.dt)
        self.total += step_l2_residual(
            self._prev, state.u, incr, self.cfg, self.basis)
        self._prev = state.u
