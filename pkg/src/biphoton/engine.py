"""Biphoton wave-function construction for thin and thick crystals.

The wave function psi(r_s, r_i) is accumulated as a coherent sum over
pump pixels (thin crystal) and additionally over crystal slices (thick
crystal).  Per slice, propagation through the remaining crystal is a
pure-phase transfer in the Fourier domain; phase matching and walk-off
emerge from the interference of the slice contributions.

Slice scheme: for slice m of M the pump is propagated to the slice
entrance (m - 1) * L / M and the emitted photons propagate from the slice
exit, i.e. over the remaining length (M - m) * L / M.  Conversion inside
a slice is treated as instantaneous, so a single slice (M = 1) degenerates
exactly to the thin-crystal sum.

The accumulation of pump-pixel outer products is the M * N^6 hot loop.
``mode="serial"`` reduces in a fixed order (slice-major, row-major pump
pixels) and is bit-reproducible run to run; ``mode="parallel"`` maps each
slice onto one threaded matrix product over disjoint partials and agrees
with serial mode to 1e-12 relative.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .elements import OpticalSystem, response_bank
from .errors import GridMismatchError
from .grid import (
    ComplexField,
    GridSpec,
    PlaneKind,
    dft2_amplitudes,
    idft2_amplitudes,
)

FWHM_TO_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))


class PhaseMatching(enum.Enum):
    TYPE1_DEGENERATE = "type1_degenerate"
    TYPE2 = "type2"


class Photon(enum.Enum):
    SIGNAL = "signal"
    IDLER = "idler"


# the extraordinary (walk-off) photon in type-2 phase matching
WALKOFF_PHOTON = Photon.IDLER


@dataclass(frozen=True)
class CrystalSpec:
    """Nonlinear crystal parameters driving the split-step engine."""

    length: float
    slices: int
    pm_type: PhaseMatching
    wavelength_pump: float
    wavelength_down: float
    refractive_index: float
    walkoff_angle: float = 0.0
    pump_walkoff_angle: float = 0.0

    def __post_init__(self) -> None:
        if not self.length > 0:
            raise ValueError("crystal length must be positive")
        if self.slices < 1:
            raise ValueError("slice count must be >= 1")
        if not (self.wavelength_pump > 0 and self.wavelength_down > 0):
            raise ValueError("wavelengths must be positive")
        if not self.refractive_index > 0:
            raise ValueError("refractive index must be positive")
        if self.pm_type is PhaseMatching.TYPE1_DEGENERATE and self.walkoff_angle != 0.0:
            raise ValueError("walk-off applies to type-2 phase matching only")


@dataclass(frozen=True)
class PumpSpec:
    """Gaussian pump beam: amplitude FWHM in meters, centered at (x, y)."""

    waist_fwhm: float
    center: tuple[float, float] = (0.0, 0.0)
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if not self.waist_fwhm > 0:
            raise ValueError("pump FWHM must be positive")


@dataclass
class BiphotonWavefunction:
    """Non-normalized psi(r_s, r_i) on a shared detection grid.

    ``amplitudes[s, i]`` indexes flattened signal and idler detection
    pixels (row-major over the grid shape).
    """

    grid: GridSpec
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        npix = self.grid.npix
        if self.amplitudes.shape != (npix, npix):
            raise ValueError(
                f"psi shape {self.amplitudes.shape} does not match grid with {npix} pixels"
            )

    @property
    def total_weight(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


def pump_field(spec: PumpSpec, grid: GridSpec) -> ComplexField:
    """Centered Gaussian pump amplitude; real and non-negative."""
    if grid.plane_kind is not PlaneKind.NEAR_FIELD:
        raise GridMismatchError("pump field must be built on a near-field grid")
    sigma = spec.waist_fwhm / FWHM_TO_SIGMA
    x, y = grid.coords()
    cx, cy = spec.center
    r2 = (x - cx) ** 2 + (y - cy) ** 2
    amps = spec.amplitude * np.exp(-r2 / (2.0 * sigma**2))
    return ComplexField(grid, amps.astype(np.complex128))


def _spectral_phase_rate(
    crystal: CrystalSpec, wavelength: float, walkoff: float, grid: GridSpec
) -> np.ndarray:
    """Phase accumulated per meter of crystal, on the spectral grid."""
    nu_x, nu_y = grid.coords()
    rate = -np.pi * wavelength * (nu_x**2 + nu_y**2) / crystal.refractive_index
    if walkoff != 0.0:
        rate = rate + 2.0 * np.pi * walkoff * nu_x
    return rate


def slice_transfer(
    crystal: CrystalSpec, z: float, photon: Photon, grid: GridSpec
) -> ComplexField:
    """Pure-phase transfer for propagation from depth z to the exit face.

    Evaluated on the Fourier conjugate of the crystal near-field grid.  At
    z = length the transfer is identity; at nu = 0 the phase vanishes for
    every z (perfect collinear matching).  In type-2 matching the
    extraordinary photon additionally picks up the walk-off tilt.
    """
    if not 0.0 <= z <= crystal.length:
        raise ValueError(f"slice depth {z} outside crystal of length {crystal.length}")
    if grid.plane_kind is not PlaneKind.FAR_FIELD:
        raise GridMismatchError("slice transfer lives on a spectral (far-field) grid")
    walkoff = 0.0
    if crystal.pm_type is PhaseMatching.TYPE2 and photon is WALKOFF_PHOTON:
        walkoff = crystal.walkoff_angle
    rate = _spectral_phase_rate(crystal, crystal.wavelength_down, walkoff, grid)
    return ComplexField(grid, np.exp(1j * rate * (crystal.length - z)))


def accumulate_pair_products(
    psi: np.ndarray,
    pump_values: np.ndarray,
    signal_bank: np.ndarray,
    idler_bank: np.ndarray,
    mode: str = "serial",
) -> None:
    """psi += sum_r pump[r] * outer(signal_bank[r], idler_bank[r]).

    This is the N^6 kernel.  Serial mode runs the pump-pixel reduction in
    fixed row-major order; parallel mode evaluates the same contraction as
    a single threaded matrix product.
    """
    if mode == "serial":
        row = np.empty_like(signal_bank[0])
        tmp = np.empty_like(psi)
        for r in range(pump_values.size):
            np.multiply(signal_bank[r], pump_values[r], out=row)
            np.outer(row, idler_bank[r], out=tmp)
            psi += tmp
    elif mode == "parallel":
        psi += (pump_values[:, None] * signal_bank).T @ idler_bank
    else:
        raise ValueError(f"unknown accumulation mode {mode!r}")


def _require_shared_input(signal_arm: OpticalSystem, idler_arm: OpticalSystem) -> GridSpec:
    if signal_arm.input_grid != idler_arm.input_grid:
        raise GridMismatchError("signal and idler arms must share the source grid")
    if signal_arm.output_grid != idler_arm.output_grid:
        raise GridMismatchError("signal and idler arms must share the detection grid")
    return signal_arm.input_grid


def thin_crystal_wavefunction(
    pump: ComplexField,
    signal_arm: OpticalSystem,
    idler_arm: OpticalSystem,
    mode: str = "serial",
    dtype: np.dtype | type = np.complex128,
) -> BiphotonWavefunction:
    """psi(r_s, r_i) = sum_r E_p(r) h_s(r_s, r) h_i(r_i, r)."""
    source = _require_shared_input(signal_arm, idler_arm)
    if pump.grid != source:
        raise GridMismatchError("pump grid does not match the arm source grid")
    npix = source.npix
    signal_bank = response_bank(signal_arm, dtype=dtype)
    idler_bank = signal_bank if idler_arm is signal_arm else response_bank(idler_arm, dtype=dtype)
    psi = np.zeros((npix, npix), dtype=dtype)
    accumulate_pair_products(
        psi, pump.amplitudes.ravel().astype(dtype), signal_bank, idler_bank, mode
    )
    return BiphotonWavefunction(signal_arm.output_grid, psi)


def thick_crystal_wavefunction(
    pump: PumpSpec,
    crystal: CrystalSpec,
    signal_arm: OpticalSystem,
    idler_arm: OpticalSystem,
    mode: str = "serial",
    dtype: np.dtype | type = np.complex128,
) -> BiphotonWavefunction:
    """Coherent sum over crystal slices of per-slice thin-crystal terms.

    Per slice: the pump is propagated (paraxially, inside the crystal) to
    the slice entrance, each photon's impulse responses are pre-composed
    with the remaining-crystal transfer in the Fourier domain, and the
    downstream arm is applied after the exit face.
    """
    source = _require_shared_input(signal_arm, idler_arm)
    if source.plane_kind is not PlaneKind.NEAR_FIELD:
        raise GridMismatchError("arms must begin at the crystal exit-face (near-field) grid")
    spectral = source.fourier_conjugate()
    npix = source.npix
    m_slices = crystal.slices
    step = crystal.length / m_slices

    pump0 = pump_field(pump, source)
    pump_spectrum = dft2_amplitudes(pump0.amplitudes)
    pump_rate = _spectral_phase_rate(
        crystal, crystal.wavelength_pump, crystal.pump_walkoff_angle, spectral
    )

    same_transfer = (
        crystal.pm_type is PhaseMatching.TYPE1_DEGENERATE or crystal.walkoff_angle == 0.0
    )
    basis_spectrum = dft2_amplitudes(np.eye(npix, dtype=dtype).reshape(npix, *source.shape))

    psi = np.zeros((npix, npix), dtype=dtype)
    for m in range(1, m_slices + 1):
        z_entrance = (m - 1) * step
        z_exit = m * step
        pump_m = idft2_amplitudes(pump_spectrum * np.exp(1j * pump_rate * z_entrance))
        transfer_s = slice_transfer(crystal, z_exit, Photon.SIGNAL, spectral).amplitudes
        stack_s = idft2_amplitudes(basis_spectrum * transfer_s.astype(dtype, copy=False))
        signal_bank = signal_arm.apply_stack(stack_s).reshape(npix, npix)
        if same_transfer:
            stack_i = stack_s
        else:
            transfer_i = slice_transfer(crystal, z_exit, Photon.IDLER, spectral).amplitudes
            stack_i = idft2_amplitudes(basis_spectrum * transfer_i.astype(dtype, copy=False))
        if same_transfer and idler_arm is signal_arm:
            idler_bank = signal_bank
        else:
            idler_bank = idler_arm.apply_stack(stack_i).reshape(npix, npix)
        accumulate_pair_products(
            psi, pump_m.ravel().astype(dtype), signal_bank, idler_bank, mode
        )
    return BiphotonWavefunction(signal_arm.output_grid, psi)
