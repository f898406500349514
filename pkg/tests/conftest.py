import numpy as np
import pytest

try:  # small dense kernels dominate: threaded BLAS only adds sync overhead
    from threadpoolctl import threadpool_limits

    threadpool_limits(1)
except ImportError:
    pass

from dnlslab.spectral import FieldState, Grid


def random_band_field(grid: Grid, band: int, seed: int, mass: float = 1.0) -> FieldState:
    """Random coefficients supported on |k| <= band, rescaled to the given mass."""
    rng = np.random.default_rng(seed)
    n = grid.modes
    c = np.zeros(n + 1, dtype=complex)
    ks = np.arange(-band, band + 1)
    vals = rng.standard_normal(ks.size) + 1j * rng.standard_normal(ks.size)
    vals *= np.exp(-((ks / max(band / 2.0, 1.0)) ** 2))
    c[n // 2 + ks] = vals
    c *= np.sqrt(mass / np.sum(np.abs(c) ** 2))
    return FieldState(grid, c)


def gaussian_field(grid: Grid, width: float, mass: float, center=None, carrier: float = 0.0) -> FieldState:
    """Gaussian bump, centered by default, rescaled to the given mass."""
    L = grid.period
    x0 = 0.5 * L if center is None else center
    x = grid.points
    y = x - x0
    y -= L * np.round(y / L)
    vals = np.exp(-((y / width) ** 2) + 1j * carrier * y)
    q = FieldState.from_samples(grid, vals)
    scale = np.sqrt(mass / q.mass())
    return FieldState(grid, q.coefficients * scale)


@pytest.fixture
def grid64():
    return Grid(64, 1.0)


@pytest.fixture
def grid256():
    return Grid(256, 1.0)
