import numpy as np
import pytest

from biphoton.grid import ComplexField, GridSpec, PlaneKind


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(grid: GridSpec, rng: np.random.Generator) -> ComplexField:
    amps = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return ComplexField(grid, amps)


def gaussian_field(grid: GridSpec, sigma: float, amplitude: float = 1.0) -> ComplexField:
    x, y = grid.coords()
    amps = amplitude * np.exp(-(x**2 + y**2) / (2.0 * sigma**2))
    return ComplexField(grid, amps.astype(np.complex128))


def amplitude_std(amps: np.ndarray, pitch: float, axis: int) -> float:
    """Standard deviation of |amps| treated as a weight distribution."""
    weights = np.abs(amps)
    coords = (np.arange(amps.shape[axis]) - amps.shape[axis] // 2) * pitch
    shape = [1, 1]
    shape[axis] = amps.shape[axis]
    coords = coords.reshape(shape)
    total = weights.sum()
    mean = (weights * coords).sum() / total
    return float(np.sqrt((weights * (coords - mean) ** 2).sum() / total))


@pytest.fixture
def nf_grid_8():
    return GridSpec(n=8, pitch=1.0e-5, plane_kind=PlaneKind.NEAR_FIELD)


@pytest.fixture
def nf_grid_32():
    return GridSpec(n=32, pitch=1.0e-5, plane_kind=PlaneKind.NEAR_FIELD)
