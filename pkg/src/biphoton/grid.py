"""Complex field container and centered unitary 2-D Fourier transforms.

Conventions used throughout the package:

* arrays are indexed ``[ix, iy]`` with the physical x axis along axis 0
  (the walk-off axis) and y along axis 1;
* coordinates are centered: pixel ``n // 2`` sits at coordinate zero,
  both in real space and in the spectral domain;
* transforms are unitary, so total power is preserved (Parseval) and
  normalized correlation maps need no extra bookkeeping;
* one-dimensional studies use grids of shape ``(n, 1)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError


class PlaneKind(enum.Enum):
    NEAR_FIELD = "near_field"
    FAR_FIELD = "far_field"

    def toggled(self) -> "PlaneKind":
        if self is PlaneKind.NEAR_FIELD:
            return PlaneKind.FAR_FIELD
        return PlaneKind.NEAR_FIELD


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Square sampling grid with a physical pixel pitch.

    ``pitch`` is in meters for near-field (image) planes and in inverse
    meters for spectral planes produced by :func:`dft2`.  ``ndim = 1``
    selects the one-dimensional mode with fields of shape ``(n, 1)``.
    """

    n: int
    pitch: float
    plane_kind: PlaneKind = PlaneKind.NEAR_FIELD
    ndim: int = 2

    def __post_init__(self) -> None:
        if self.n < 8 or not _is_power_of_two(self.n):
            raise ValueError(f"grid size must be a power of two >= 8, got {self.n}")
        if not self.pitch > 0:
            raise ValueError(f"grid pitch must be positive, got {self.pitch}")
        if self.ndim not in (1, 2):
            raise ValueError(f"ndim must be 1 or 2, got {self.ndim}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, 1) if self.ndim == 1 else (self.n, self.n)

    @property
    def npix(self) -> int:
        return self.n if self.ndim == 1 else self.n * self.n

    @property
    def center(self) -> int:
        return self.n // 2

    def fourier_conjugate(self) -> "GridSpec":
        """Grid of the unitary DFT of a field on this grid."""
        return GridSpec(
            n=self.n,
            pitch=1.0 / (self.n * self.pitch),
            plane_kind=self.plane_kind.toggled(),
            ndim=self.ndim,
        )

    def axis_coords(self, axis: int) -> np.ndarray:
        """Centered physical coordinates along one array axis."""
        size = self.shape[axis]
        return (np.arange(size) - size // 2) * self.pitch

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable (x, y) coordinate arrays."""
        x = self.axis_coords(0)[:, None]
        y = self.axis_coords(1)[None, :]
        return x, y


@dataclass
class ComplexField:
    """Complex amplitudes sampled on a :class:`GridSpec`."""

    grid: GridSpec
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes)
        if self.amplitudes.shape != self.grid.shape:
            raise ValueError(
                f"amplitude shape {self.amplitudes.shape} does not match "
                f"grid shape {self.grid.shape}"
            )
        if not np.iscomplexobj(self.amplitudes):
            self.amplitudes = self.amplitudes.astype(np.complex128)

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def require_same_grid(a: GridSpec, b: GridSpec, what: str = "field") -> None:
    if a != b:
        raise GridMismatchError(f"{what} grids differ: {a} vs {b}")


def dirac_field(grid: GridSpec, pixel: tuple[int, int]) -> ComplexField:
    """Unit amplitude on one pixel, zero elsewhere."""
    ix, iy = pixel
    nx, ny = grid.shape
    if not (0 <= ix < nx and 0 <= iy < ny):
        raise IndexError(f"pixel {pixel} outside grid of shape {grid.shape}")
    amps = np.zeros(grid.shape, dtype=np.complex128)
    amps[ix, iy] = 1.0
    return ComplexField(grid, amps)


def dft2_amplitudes(amps: np.ndarray) -> np.ndarray:
    """Centered unitary DFT over the last two axes (batch friendly)."""
    shifted = np.fft.ifftshift(amps, axes=(-2, -1))
    spec = np.fft.fft2(shifted, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(spec, axes=(-2, -1))


def idft2_amplitudes(amps: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dft2_amplitudes`."""
    shifted = np.fft.ifftshift(amps, axes=(-2, -1))
    spat = np.fft.ifft2(shifted, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(spat, axes=(-2, -1))


def dft2(field: ComplexField) -> ComplexField:
    """Unitary 2-D DFT with zero frequency at the grid center."""
    return ComplexField(field.grid.fourier_conjugate(), dft2_amplitudes(field.amplitudes))


def idft2(field: ComplexField) -> ComplexField:
    """Unitary inverse 2-D DFT; exact inverse of :func:`dft2`."""
    return ComplexField(field.grid.fourier_conjugate(), idft2_amplitudes(field.amplitudes))


def parseval_residual(field: ComplexField) -> float:
    """Relative power mismatch between a field and its spectrum.

    Returns 0 for an all-zero field.
    """
    power_in = field.power
    if power_in == 0.0:
        return 0.0
    power_out = float(np.sum(np.abs(dft2_amplitudes(field.amplitudes)) ** 2))
    return abs(power_in - power_out) / power_in


def parity_flip(amps: np.ndarray) -> np.ndarray:
    """Grid inversion x -> -x, y -> -y under the centered-index convention.

    Maps index i to (n - i) mod n on each axis, which is exactly the image
    of applying the centered DFT twice.  Length-1 axes are left untouched.
    """
    out = amps
    for axis in (-2, -1):
        if out.shape[axis] > 1:
            out = np.roll(np.flip(out, axis=axis), 1, axis=axis)
    return out
