"""Shared helpers for the test suite.

Random fields used in property tests are band limited by construction so
spectral identities hold to round-off rather than to truncation error.
"""

from __future__ import annotations

import numpy as np
import pytest

from llblab import Grid, VectorField, dealias, random_smooth_field


@pytest.fixture
def grid32() -> Grid:
    return Grid(n=32, half_width=16.0)


@pytest.fixture
def grid64() -> Grid:
    return Grid(n=64, half_width=16.0)


def band_limited(grid: Grid, seed: int, amplitude: float = 1.0) -> VectorField:
    """A reproducible random field inside the dealiased band."""
    rng = np.random.default_rng(seed)
    u = random_smooth_field(grid, rng, amplitude=amplitude)
    return dealias(u)


def spectral_sq_norm(values: np.ndarray, grid: Grid) -> float:
    """Independent Parseval route: quadrature L2 norm straight from numpy ffts.

    Uses the full complex fft2 (not the half spectrum the package uses) so a
    bookkeeping bug in the library's Hermitian handling cannot cancel out.
    """
    n = grid.n
    h_sq = grid.spacing**2
    total = 0.0
    for comp in range(values.shape[-1]):
        coeff = np.fft.fft2(values[..., comp])
        total += float(np.sum(np.abs(coeff) ** 2)) / (n * n)
    return h_sq * total
