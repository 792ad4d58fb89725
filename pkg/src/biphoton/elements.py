"""Optical elements, arm-level chains, and impulse responses.

Every element is unitary on the grid interior (a pure phase, a unitary
transform, or a parity/metadata change), except the optional aperture
which deliberately clips power.  Elements operate on stacks of fields
shaped ``(..., nx, ny)`` so that a whole bank of impulse responses can be
propagated at once; :meth:`OpticalElement.apply` is the single-field view
of the same code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError
from .grid import (
    ComplexField,
    GridSpec,
    PlaneKind,
    dft2_amplitudes,
    dirac_field,
    idft2_amplitudes,
    parity_flip,
)


@dataclass(frozen=True)
class PhaseMask:
    """Deterministic pure-phase screen (transfer modulus exactly 1)."""

    grid: GridSpec
    phases: np.ndarray = field(repr=False)
    seed: int = 0
    correlation_length: float = 0.0

    def transfer(self) -> np.ndarray:
        return np.exp(1j * self.phases)


def random_phase_mask(grid: GridSpec, seed: int, correlation_length: float = 0.0) -> PhaseMask:
    """Seeded random phase screen with phases in [0, 2*pi).

    ``correlation_length = 0`` gives independent per-pixel phases.  A
    positive value smooths an independent uniform field with a Gaussian
    kernel of that transverse size, then rescales the result so the
    phases wrap back over the full [0, 2*pi) range.
    """
    if correlation_length < 0:
        raise ValueError("correlation_length must be >= 0")
    rng = np.random.default_rng(seed)
    raw = rng.uniform(0.0, 2.0 * np.pi, size=grid.shape)
    if correlation_length < 0.5 * grid.pitch:
        # sub-pixel grain is indistinguishable from independent pixels
        phases = raw
    else:
        from scipy.ndimage import gaussian_filter

        sigma_px = correlation_length / grid.pitch
        sigmas = tuple(sigma_px if size > 1 else 0.0 for size in grid.shape)
        smooth = gaussian_filter(raw, sigma=sigmas, mode="wrap")
        spread = float(np.std(smooth))
        if spread > 0:
            # std pi drives the smoothed field through several wraps, which
            # restores a deep (near-uniform) phase distribution at the
            # requested grain size
            smooth = (smooth - float(np.mean(smooth))) * (np.pi / spread)
        phases = np.mod(smooth, 2.0 * np.pi)
    return PhaseMask(grid=grid, phases=phases, seed=seed, correlation_length=correlation_length)


class OpticalElement:
    """Base class: maps a field on ``input grid`` to one on :meth:`output_grid`."""

    def output_grid(self, grid: GridSpec) -> GridSpec:
        raise NotImplementedError

    def apply_stack(self, amps: np.ndarray, grid: GridSpec) -> np.ndarray:
        raise NotImplementedError

    def apply(self, field: ComplexField) -> ComplexField:
        out = self.apply_stack(field.amplitudes, field.grid)
        return ComplexField(self.output_grid(field.grid), out)


@dataclass(frozen=True)
class LensFourier(OpticalElement):
    """Exact 2f Fourier transform between focal planes.

    The output plane coordinate is x = lambda * f * nu, so the output
    pitch is lambda * f times the spectral step of the input grid, and the
    plane kind toggles between near field and far field.
    """

    focal_length: float
    wavelength: float

    def __post_init__(self) -> None:
        if not self.focal_length > 0:
            raise ValueError("focal_length must be positive")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    def output_grid(self, grid: GridSpec) -> GridSpec:
        freq_step = 1.0 / (grid.n * grid.pitch)
        return GridSpec(
            n=grid.n,
            pitch=self.wavelength * self.focal_length * freq_step,
            plane_kind=grid.plane_kind.toggled(),
            ndim=grid.ndim,
        )

    def apply_stack(self, amps: np.ndarray, grid: GridSpec) -> np.ndarray:
        return dft2_amplitudes(amps)


@dataclass(frozen=True)
class FreeSpace(OpticalElement):
    """Paraxial angular-spectrum propagation over a distance in meters."""

    distance: float
    wavelength: float

    def __post_init__(self) -> None:
        if self.distance < 0:
            raise ValueError("distance must be >= 0")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    def output_grid(self, grid: GridSpec) -> GridSpec:
        return grid

    def apply_stack(self, amps: np.ndarray, grid: GridSpec) -> np.ndarray:
        if self.distance == 0.0:
            return amps.copy()
        conj = grid.fourier_conjugate()
        nu_x, nu_y = conj.coords()
        chirp = np.exp(-1j * np.pi * self.wavelength * self.distance * (nu_x**2 + nu_y**2))
        return idft2_amplitudes(dft2_amplitudes(amps) * chirp.astype(amps.dtype, copy=False))


@dataclass(frozen=True)
class Phase(OpticalElement):
    """Pointwise multiplication by a pure-phase mask."""

    mask: PhaseMask

    def output_grid(self, grid: GridSpec) -> GridSpec:
        if grid != self.mask.grid:
            raise GridMismatchError(
                f"phase mask grid {self.mask.grid} does not match field grid {grid}"
            )
        return grid

    def apply_stack(self, amps: np.ndarray, grid: GridSpec) -> np.ndarray:
        self.output_grid(grid)
        return amps * self.mask.transfer().astype(amps.dtype, copy=False)


@dataclass(frozen=True)
class Relay(OpticalElement):
    """Afocal relay: integer magnification on the grid metadata, optional
    image inversion as an exact parity flip (no resampling)."""

    magnification: float = 1.0
    invert: bool = False

    def __post_init__(self) -> None:
        if self.magnification == 0:
            raise ValueError("magnification must be nonzero")

    @property
    def _inverts(self) -> bool:
        return self.invert or self.magnification < 0

    def output_grid(self, grid: GridSpec) -> GridSpec:
        return GridSpec(
            n=grid.n,
            pitch=grid.pitch * abs(self.magnification),
            plane_kind=grid.plane_kind,
            ndim=grid.ndim,
        )

    def apply_stack(self, amps: np.ndarray, grid: GridSpec) -> np.ndarray:
        return parity_flip(amps) if self._inverts else amps.copy()


@dataclass(frozen=True)
class Aperture(OpticalElement):
    """Hard circular stop (binary mask).  The one non-unitary element;
    models collection loss and is off unless explicitly configured."""

    diameter: float

    def __post_init__(self) -> None:
        if not self.diameter > 0:
            raise ValueError("diameter must be positive")

    def output_grid(self, grid: GridSpec) -> GridSpec:
        return grid

    def apply_stack(self, amps: np.ndarray, grid: GridSpec) -> np.ndarray:
        x, y = grid.coords()
        inside = (x**2 + y**2) <= (self.diameter / 2.0) ** 2
        return amps * inside


@dataclass(frozen=True)
class OpticalSystem:
    """Ordered element chain for one detection arm."""

    elements: tuple[OpticalElement, ...]
    input_grid: GridSpec

    def __init__(self, elements, input_grid: GridSpec):
        object.__setattr__(self, "elements", tuple(elements))
        object.__setattr__(self, "input_grid", input_grid)
        self.plane_grids()  # validate chain compatibility eagerly

    def plane_grids(self) -> list[GridSpec]:
        """Grids at the input plane and after each element."""
        grids = [self.input_grid]
        for element in self.elements:
            grids.append(element.output_grid(grids[-1]))
        return grids

    @property
    def output_grid(self) -> GridSpec:
        return self.plane_grids()[-1]

    def apply_stack(self, amps: np.ndarray) -> np.ndarray:
        grid = self.input_grid
        for element in self.elements:
            amps = element.apply_stack(amps, grid)
            grid = element.output_grid(grid)
        return amps

    def with_elements(self, elements) -> "OpticalSystem":
        return OpticalSystem(elements, self.input_grid)


def apply_element(element: OpticalElement, field: ComplexField) -> ComplexField:
    return element.apply(field)


def propagate(system: OpticalSystem, field: ComplexField) -> ComplexField:
    """Left-to-right fold of the chain over one input field."""
    if field.grid != system.input_grid:
        raise GridMismatchError(
            f"field grid {field.grid} does not match system input {system.input_grid}"
        )
    return ComplexField(system.output_grid, system.apply_stack(field.amplitudes))


def impulse_response(system: OpticalSystem, source_pixel: tuple[int, int]) -> ComplexField:
    """Response of the arm to a numerical Dirac pulse at one pixel."""
    return propagate(system, dirac_field(system.input_grid, source_pixel))


def response_bank(
    system: OpticalSystem,
    pre_spectral_transfer: np.ndarray | None = None,
    dtype: np.dtype | type = np.complex128,
) -> np.ndarray:
    """All impulse responses at once, as a (npix, npix) matrix.

    Row ``r`` holds the flattened output field for a Dirac at flattened
    source pixel ``r``.  ``pre_spectral_transfer`` is an optional transfer
    applied in the Fourier domain of the input grid before the chain (used
    for propagation through the remaining crystal).
    """
    grid = system.input_grid
    npix = grid.npix
    basis = np.eye(npix, dtype=dtype).reshape(npix, *grid.shape)
    if pre_spectral_transfer is not None:
        spectrum = dft2_amplitudes(basis)
        spectrum *= np.asarray(pre_spectral_transfer).astype(dtype, copy=False)
        basis = idft2_amplitudes(spectrum)
    out = system.apply_stack(basis)
    return out.reshape(npix, npix)
