"""Periodic grid, 3-vector fields and pseudo-spectral operators.

The domain is the square [-L, L)^2 sampled on an N x N lattice with
spacing h = 2L/N.  Derivatives are Fourier multipliers with wavenumbers
k = pi*m/L for integer modes m in [-N/2, N/2).  Real fields are kept in
physical space; transforms use the half-spectrum (rfft2) layout of shape
(N, N//2 + 1, 3).

Conventions fixed here and relied on elsewhere:

* first-derivative multipliers zero the Nyquist mode (odd derivatives of
  a real signal are not representable there); even-order multipliers
  (laplacian, biharmonic) keep it,
* the biharmonic operator is the direct |k|^4 multiplier, not a repeated
  laplacian,
* dealiasing zeroes every mode with max(|m_x|, |m_y|) > N/3.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import GridMismatchError, InvalidFieldError, ParameterError


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L, L)^2 with N points per side."""

    n: int
    half_width: float

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 8 or self.n % 2 != 0:
            raise ParameterError(
                f"grid size must be an even integer >= 8, got n={self.n}")
        if not (float(self.half_width) > 0.0):
            raise ParameterError(
                f"grid half width must satisfy L > 0, got L={self.half_width}")
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def axis(self) -> np.ndarray:
        """Physical coordinates along one side, -L + i*h."""
        return _axis(self.n, self.half_width)

    def meshes(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) coordinate arrays of shape (n, n)."""
        x = self.axis
        return np.meshgrid(x, x, indexing="ij")

    @property
    def k_max(self) -> float:
        """Largest resolvable wavenumber magnitude per axis, pi*N/(2L)."""
        return np.pi * self.n / (2.0 * self.half_width)


@lru_cache(maxsize=32)
def _axis(n: int, half_width: float) -> np.ndarray:
    a = -half_width + (2.0 * half_width / n) * np.arange(n)
    a.flags.writeable = False
    return a


@lru_cache(maxsize=32)
def _spectral_tables(n: int, half_width: float):
    """Cached wavenumber multipliers for an (n, n//2+1, ...) half spectrum."""
    scale = np.pi / half_width
    m0 = np.fft.fftfreq(n, d=1.0 / n)          # 0..n/2-1, -n/2..-1
    m1 = np.fft.rfftfreq(n, d=1.0 / n)         # 0..n/2
    k0 = (scale * m0)[:, None]
    k1 = (scale * m1)[None, :]
    k_sq = k0 ** 2 + k1 ** 2                   # (n, n//2+1)
    # Odd-derivative multipliers drop the Nyquist mode.
    d0 = 1j * k0.copy()
    d0[n // 2, 0] = 0.0
    d1 = 1j * k1.copy()
    d1[0, n // 2] = 0.0
    keep = np.maximum(np.abs(m0)[:, None], np.abs(m1)[None, :]) <= n / 3.0
    out = (k_sq, k_sq ** 2, d0, d1, keep)
    for a in out:
        a.flags.writeable = False
    return out


class VectorField:
    """Immutable 3-vector field sampled on a :class:`Grid`.

    The payload has shape (n, n, 3), dtype float64, C order, and every
    entry finite; violations raise :class:`InvalidFieldError`.  Instances
    support +, -, unary - and scalar *, mixing of grids raises
    :class:`GridMismatchError`.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values: np.ndarray):
        v = np.ascontiguousarray(values, dtype=np.float64)
        if v.shape != (grid.n, grid.n, 3):
            raise InvalidFieldError(
                f"field payload must have shape {(grid.n, grid.n, 3)}, "
                f"got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidFieldError("field payload contains non-finite entries")
        v.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", v)

    def __setattr__(self, name, value):
        raise AttributeError("VectorField is immutable")

    def _check(self, other: "VectorField") -> None:
        if not isinstance(other, VectorField):
            raise TypeError(f"expected VectorField, got {type(other).__name__}")
        if other.grid != self.grid:
            raise GridMismatchError(
                f"grids differ: {self.grid} vs {other.grid}")

    def __add__(self, other: "VectorField") -> "VectorField":
        self._check(other)
        return VectorField(self.grid, self.values + other.values)

    def __sub__(self, other: "VectorField") -> "VectorField":
        self._check(other)
        return VectorField(self.grid, self.values - other.values)

    def __neg__(self) -> "VectorField":
        return VectorField(self.grid, -self.values)

    def __mul__(self, c) -> "VectorField":
        return VectorField(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return (f"VectorField(n={self.grid.n}, L={self.grid.half_width}, "
                f"max|u|={np.abs(self.values).max():.3g})")


def zero_field(grid: Grid) -> VectorField:
    return VectorField(grid, np.zeros((grid.n, grid.n, 3)))


def constant_field(grid: Grid, vec) -> VectorField:
    v = np.broadcast_to(np.asarray(vec, dtype=np.float64), (grid.n, grid.n, 3))
    return VectorField(grid, v.copy())


def gaussian_bump_field(grid: Grid, amplitude: float = 1.0, width: float = 1.0,
                        center=(0.0, 0.0), direction=(0.0, 0.0, 1.0)) -> VectorField:
    """amplitude * exp(-|x - c|^2 / (2 width^2)) along a fixed direction."""
    if width <= 0:
        raise ParameterError(f"bump width must be positive, got {width}")
    xx, yy = grid.meshes()
    r_sq = (xx - center[0]) ** 2 + (yy - center[1]) ** 2
    bump = amplitude * np.exp(-r_sq / (2.0 * width ** 2))
    return VectorField(grid, bump[:, :, None] * np.asarray(direction, dtype=np.float64))


def fourier_mode_field(grid: Grid, mode=(1, 0), amplitude: float = 1.0,
                       direction=(1.0, 0.0, 0.0), phase: float = 0.0,
                       trig: str = "sin") -> VectorField:
    """amplitude * trig(pi*(m_x x + m_y y)/L + phase) along a fixed direction."""
    if trig not in ("sin", "cos"):
        raise ParameterError(f"trig must be 'sin' or 'cos', got {trig!r}")
    xx, yy = grid.meshes()
    arg = np.pi * (mode[0] * xx + mode[1] * yy) / grid.half_width + phase
    wave = amplitude * (np.sin(arg) if trig == "sin" else np.cos(arg))
    return VectorField(grid, wave[:, :, None] * np.asarray(direction, dtype=np.float64))


def random_smooth_field(grid: Grid, rng: np.random.Generator,
                        amplitude: float = 1.0) -> VectorField:
    """Band-limited random field (all modes inside the dealias band).

    Used by property tests: spectral identities are exact for fields with
    no content at or beyond the 2/3 cutoff.
    """
    white = rng.standard_normal((grid.n, grid.n, 3))
    spec = _rfft(white)
    spec *= _spectral_tables(grid.n, grid.half_width)[4][:, :, None]
    out = _irfft(spec, grid.n)
    peak = np.abs(out).max()
    if peak > 0:
        out *= amplitude / peak
    return VectorField(grid, out)


def _rfft(values: np.ndarray) -> np.ndarray:
    return np.fft.rfft2(values, axes=(0, 1))


def _irfft(spec: np.ndarray, n: int) -> np.ndarray:
    return np.fft.irfft2(spec, s=(n, n), axes=(0, 1))


def to_fourier(u: VectorField) -> np.ndarray:
    """Half spectrum of shape (n, n//2+1, 3), numpy rfft2 normalization."""
    return _rfft(u.values)


def from_fourier(grid: Grid, spec: np.ndarray) -> VectorField:
    return VectorField(grid, _irfft(spec, grid.n))


def laplacian(u: VectorField) -> VectorField:
    k_sq = _spectral_tables(u.grid.n, u.grid.half_width)[0]
    return VectorField(u.grid, _irfft(-k_sq[:, :, None] * _rfft(u.values), u.grid.n))


def biharmonic(u: VectorField) -> VectorField:
    """Direct |k|^4 multiplier (equal to laplacian(laplacian(u)) up to rounding)."""
    k_4 = _spectral_tables(u.grid.n, u.grid.half_width)[1]
    return VectorField(u.grid, _irfft(k_4[:, :, None] * _rfft(u.values), u.grid.n))


def gradient(u: VectorField) -> tuple[VectorField, VectorField]:
    """(d/dx u, d/dy u) as two vector fields."""
    tabs = _spectral_tables(u.grid.n, u.grid.half_width)
    spec = _rfft(u.values)
    ux = _irfft(tabs[2][:, :, None] * spec, u.grid.n)
    uy = _irfft(tabs[3][:, :, None] * spec, u.grid.n)
    return VectorField(u.grid, ux), VectorField(u.grid, uy)


def cross(u: VectorField, v: VectorField) -> VectorField:
    u._check(v)
    return VectorField(u.grid, np.cross(u.values, v.values))


def cubic_damping(u: VectorField) -> VectorField:
    """(1 + |u|^2) u, the reaction magnitude; callers apply the minus sign."""
    s = 1.0 + np.sum(u.values * u.values, axis=-1, keepdims=True)
    return VectorField(u.grid, s * u.values)


def dealias(u: VectorField) -> VectorField:
    """Zero every mode with max(|m_x|, |m_y|) > n/3 (2/3 rule)."""
    keep = _spectral_tables(u.grid.n, u.grid.half_width)[4]
    return VectorField(u.grid, _irfft(keep[:, :, None] * _rfft(u.values), u.grid.n))


def dealias_mask(grid: Grid) -> np.ndarray:
    """Boolean keep-mask over the half spectrum."""
    return _spectral_tables(grid.n, grid.half_width)[4]


def l2_inner(u: VectorField, v: VectorField) -> float:
    """Trapezoidal (= exact Parseval) quadrature of the pointwise dot product."""
    u._check(v)
    return float(np.sum(u.values * v.values) * u.grid.spacing ** 2)
