"""Noise basis families, Wiener increments and the diffusion operators.

The driving noise is eps * sum_k (u x f_k + f_k) dW_k over a finite basis
{f_k} of smooth fields with summable W^{1,inf} n H^1 norms (amplitudes
decay like k^{-decay}, decay > 1).  Two families:

* ``fourier_bump``: low-wavenumber trigonometric modes (global support),
* ``gaussian_bump``: Gaussian bumps on a small lattice of centers near the
  origin (effectively local support, which is what makes the tail-ends
  experiments meaningful).

Increments are normal(0, dt), drawn from counter-based streams keyed by
(seed, path, step, substream) so that any increment can be regenerated in
isolation and ensemble results cannot depend on scheduling order.

The Ito correction (eps^2/2) sum_k (u x f_k) x f_k is evaluated through
the pointwise identity (a x b) x b = (a.b) b - |b|^2 a using tensors
sum_k f_k (x) f_k and sum_k |f_k|^2 precomputed at build time; tests check
it against the direct double cross product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .fields import (Grid, VectorField, cross, dealias, gradient, l2_inner)

FAMILIES = ("fourier_bump", "gaussian_bump")


@dataclass(frozen=True)
class NoiseParams:
    """Declarative description of a noise basis (what config files carry)."""

    family: str = "gaussian_bump"
    modes: int = 16
    decay: float = 2.0
    amplitude: float = 0.3
    width: float = 2.0         # gaussian_bump only
    center_span: float = 2.0   # gaussian_bump lattice spacing

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ParameterError(
                f"unknown noise family {self.family!r}, expected one of {FAMILIES}")
        if self.modes < 1:
            raise ParameterError(f"mode count must be >= 1, got {self.modes}")
        if not self.decay > 1.0:
            raise ParameterError(
                "summability of the basis norms requires decay > 1, "
                f"got decay={self.decay}")
        if self.amplitude < 0:
            raise ParameterError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.width <= 0 or self.center_span < 0:
            raise ParameterError("width must be > 0 and center_span >= 0")

    def build(self, grid: Grid) -> "NoiseBasis":
        return build_basis(grid, self)


@dataclass(frozen=True)
class NoiseBasis:
    """Realized basis on a grid, with per-mode norm records.

    ``summability_value`` is sum_k max(||f_k||_{W^{1,inf}}, ||f_k||_{H^1})
    computed on the grid (sup norms over grid points, H^1 by quadrature).
    """

    grid: Grid
    params: NoiseParams
    modes: np.ndarray                 # (K, n, n, 3), read-only
    w1inf_norms: np.ndarray           # (K,)
    h1_norms: np.ndarray              # (K,)
    summability_value: float
    outer_sum: np.ndarray = field(repr=False)    # (n, n, 3, 3) sum f (x) f
    mag_sq_sum: np.ndarray = field(repr=False)   # (n, n)  sum |f|^2

    @property
    def count(self) -> int:
        return self.modes.shape[0]

    def mode_field(self, k: int) -> VectorField:
        return VectorField(self.grid, self.modes[k])


def _fourier_mode_slots(grid: Grid):
    """Deterministic enumeration (wavevector, trig, component) by |m| then index."""
    limit = int(grid.n / 3)
    vecs = []
    for mx in range(-limit, limit + 1):
        for my in range(-limit, limit + 1):
            if (mx, my) == (0, 0):
                continue
            if my < 0 or (my == 0 and mx < 0):
                continue  # -m duplicates m for real trig modes
            vecs.append((mx, my))
    vecs.sort(key=lambda m: (m[0] ** 2 + m[1] ** 2, m[0], m[1]))
    for m in vecs:
        for trig in ("cos", "sin"):
            for comp in range(3):
                yield m, trig, comp


def _gaussian_mode_slots():
    """Deterministic enumeration (lattice offset, component) by ring."""
    ring = 0
    while True:
        pts = []
        for i in range(-ring, ring + 1):
            for j in range(-ring, ring + 1):
                if max(abs(i), abs(j)) == ring:
                    pts.append((i, j))
        pts.sort()
        for p in pts:
            for comp in range(3):
                yield p, comp
        ring += 1


def build_basis(grid: Grid, params: NoiseParams) -> NoiseBasis:
    """Realize a noise family on a grid.

    Raises :class:`ParameterError` when the requested mode count is not
    resolvable: fourier wavevectors must stay inside the dealias band,
    gaussian bumps must be wider than two grid spacings and fit inside the
    box together with their centers.
    """
    n, L = grid.n, grid.half_width
    xx, yy = grid.meshes()
    k = params.modes
    modes = np.empty((k, n, n, 3))
    eye = np.eye(3)

    if params.family == "fourier_bump":
        slots = list(_fourier_mode_slots(grid))
        if k > len(slots):
            raise ParameterError(
                f"fourier_bump supports at most {len(slots)} modes inside the "
                f"dealias band at n={n} (requested {k})")
        for i, (m, trig, comp) in enumerate(slots[:k]):
            arg = np.pi * (m[0] * xx + m[1] * yy) / L
            wave = np.cos(arg) if trig == "cos" else np.sin(arg)
            amp = params.amplitude * (i + 1) ** (-params.decay)
            modes[i] = amp * wave[:, :, None] * eye[comp]
    else:
        if params.width < 2.0 * grid.spacing:
            raise ParameterError(
                f"gaussian_bump width {params.width} is not resolvable at "
                f"spacing h={grid.spacing:.4g} (need width >= 2h)")
        gen = _gaussian_mode_slots()
        for i in range(k):
            (ci, cj), comp = next(gen)
            cx, cy = params.center_span * ci, params.center_span * cj
            if max(abs(cx), abs(cy)) + 3.0 * params.width > L:
                raise ParameterError(
                    f"gaussian_bump mode {i} does not fit in the box: center "
                    f"({cx}, {cy}) with width {params.width} exceeds L={L}")
            r_sq = (xx - cx) ** 2 + (yy - cy) ** 2
            bump = np.exp(-r_sq / (2.0 * params.width ** 2))
            amp = params.amplitude * (i + 1) ** (-params.decay)
            modes[i] = amp * bump[:, :, None] * eye[comp]

    # Keep every mode inside the dealias band so the state stays band
    # limited; for the defaults this changes the gaussian family by less
    # than machine-level amounts.
    for i in range(k):
        modes[i] = dealias(VectorField(grid, modes[i])).values

    w1inf = np.empty(k)
    h1 = np.empty(k)
    for i in range(k):
        f = VectorField(grid, modes[i])
        fx, fy = gradient(f)
        mag = np.sqrt(np.sum(f.values ** 2, axis=-1))
        mag_x = np.sqrt(np.sum(fx.values ** 2, axis=-1))
        mag_y = np.sqrt(np.sum(fy.values ** 2, axis=-1))
        w1inf[i] = max(mag.max(), mag_x.max(), mag_y.max())
        h1[i] = math.sqrt(l2_inner(f, f) + l2_inner(fx, fx) + l2_inner(fy, fy))

    summability = float(np.sum(np.maximum(w1inf, h1)))
    outer = np.einsum("kxyi,kxyj->xyij", modes, modes)
    mag_sq = np.einsum("kxyi,kxyi->xy", modes, modes)
    for a in (modes, w1inf, h1, outer, mag_sq):
        a.flags.writeable = False
    return NoiseBasis(grid, params, modes, w1inf, h1, summability, outer, mag_sq)


@dataclass(frozen=True)
class NoiseStream:
    """Counter-based stream handle; any step's draw is regenerable in place.

    Draws come from Philox keyed by (seed, path_id) with the block counter
    set to (step_index, substream).  Identical keys and counters give
    identical increments on any platform and any scheduling order.
    ``substream`` separates independent uses (0 = path driving noise,
    1 = fresh re-propagation noise for invariance checks).
    """

    seed: int
    path_id: int
    substream: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "path_id", "substream"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2 ** 64):
                raise ParameterError(f"{name} must fit in uint64, got {v}")

    def increments(self, step_index: int, count: int, dt: float) -> np.ndarray:
        """normal(0, dt) draws for one step, shape (count,)."""
        if step_index < 0:
            raise ParameterError(f"step_index must be >= 0, got {step_index}")
        key = np.array([self.seed, self.path_id], dtype=np.uint64)
        counter = np.array([step_index, self.substream, 0, 0], dtype=np.uint64)
        gen = np.random.Generator(np.random.Philox(key=key, counter=counter))
        return gen.standard_normal(count) * math.sqrt(dt)


@dataclass(frozen=True)
class WienerIncrements:
    """One step's worth of increments, values[k] ~ normal(0, dt)."""

    values: np.ndarray
    dt: float


def sample_increments(stream: NoiseStream, step_index: int, count: int,
                      dt: float) -> WienerIncrements:
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    return WienerIncrements(stream.increments(step_index, count, dt), dt)


def diffusion_apply(u: VectorField, basis: NoiseBasis,
                    increments: WienerIncrements, eps: float) -> VectorField:
    """eps * sum_k (u x f_k + f_k) dW_k.

    Bilinearity lets the sum collapse onto S = sum_k f_k dW_k, so the cost
    is one weighted mode sum plus a single cross product.
    """
    w = np.asarray(increments.values, dtype=np.float64)
    if w.shape != (basis.count,):
        raise ParameterError(
            f"increment count {w.shape} does not match basis size {basis.count}")
    s = np.tensordot(w, basis.modes, axes=(0, 0))
    return VectorField(u.grid, eps * (np.cross(u.values, s) + s))


def ito_correction(u: VectorField, basis: NoiseBasis, eps: float) -> VectorField:
    """(eps^2/2) sum_k (u x f_k) x f_k, via (a x b) x b = (a.b) b - |b|^2 a."""
    if eps == 0.0:
        return VectorField(u.grid, np.zeros_like(u.values))
    mu = np.einsum("xyij,xyj->xyi", basis.outer_sum, u.values)
    corr = 0.5 * eps * eps * (mu - basis.mag_sq_sum[:, :, None] * u.values)
    return VectorField(u.grid, corr)


def quadratic_variation_integral(u: VectorField, basis: NoiseBasis,
                                 eps: float) -> float:
    """eps^2 * sum_k ||u x f_k + f_k||_{L2}^2 (the L2-balance QV rate).

    Uses (u x f).f = 0 and |u x f|^2 = |u|^2 |f|^2 - (u.f)^2 against the
    precomputed basis tensors.
    """
    v = u.values
    u_sq = np.sum(v * v, axis=-1)
    umu = np.einsum("xyi,xyij,xyj->xy", v, basis.outer_sum, v)
    density = u_sq * basis.mag_sq_sum - umu + basis.mag_sq_sum
    return float(eps * eps * np.sum(density) * u.grid.spacing ** 2)
