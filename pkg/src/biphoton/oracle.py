"""Independent brute-force reference for small grids.

Everything here is evaluated through explicit dense matrices and plain
loops: a directly summed DFT matrix, per-element transfer matrices, and
the slice/pump double sum written out literally.  No FFTs and no code
shared with the propagation paths it validates, so agreement between this
module and the optimized engine is a meaningful check rather than a
tautology.
"""

from __future__ import annotations

import numpy as np

from .elements import (
    Aperture,
    FreeSpace,
    LensFourier,
    OpticalSystem,
    Phase,
    Relay,
)
from .engine import (
    BiphotonWavefunction,
    CrystalSpec,
    PhaseMatching,
    Photon,
    PumpSpec,
    WALKOFF_PHOTON,
    pump_field,
)
from .errors import SizeGuardError
from .grid import GridSpec

MAX_BRUTE_N = 8
MAX_BRUTE_SLICES = 8
MAX_BRUTE_CORR_N = 16


def dft_matrix(n: int) -> np.ndarray:
    """Centered unitary 1-D DFT by direct evaluation of the kernel."""
    if n == 1:
        return np.ones((1, 1), dtype=np.complex128)
    c = n // 2
    k = np.arange(n)[:, None] - c
    j = np.arange(n)[None, :] - c
    return np.exp(-2j * np.pi * k * j / n) / np.sqrt(n)


def dft2_matrix(grid: GridSpec) -> np.ndarray:
    """Centered unitary 2-D DFT acting on row-major flattened fields."""
    nx, ny = grid.shape
    return np.kron(dft_matrix(nx), dft_matrix(ny))


def parity_matrix(grid: GridSpec) -> np.ndarray:
    """Index map i -> (n - i) mod n on each axis, as a permutation matrix."""
    nx, ny = grid.shape
    npix = grid.npix
    mat = np.zeros((npix, npix))
    for ix in range(nx):
        for iy in range(ny):
            jx = (nx - ix) % nx
            jy = (ny - iy) % ny
            mat[jx * ny + jy, ix * ny + iy] = 1.0
    return mat


def _flat_coords(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    x, y = grid.coords()
    nx, ny = grid.shape
    return (
        np.broadcast_to(x, (nx, ny)).ravel(),
        np.broadcast_to(y, (nx, ny)).ravel(),
    )


def element_matrix(element, grid: GridSpec) -> np.ndarray:
    """Dense transfer matrix of one optical element on a given grid."""
    if isinstance(element, LensFourier):
        return dft2_matrix(grid)
    if isinstance(element, FreeSpace):
        conj = grid.fourier_conjugate()
        nu_x, nu_y = _flat_coords(conj)
        chirp = np.exp(
            -1j * np.pi * element.wavelength * element.distance * (nu_x**2 + nu_y**2)
        )
        fwd = dft2_matrix(grid)
        return fwd.conj().T @ np.diag(chirp) @ fwd
    if isinstance(element, Phase):
        return np.diag(np.exp(1j * element.mask.phases.ravel()))
    if isinstance(element, Relay):
        if element.invert or element.magnification < 0:
            return parity_matrix(grid).astype(np.complex128)
        return np.eye(grid.npix, dtype=np.complex128)
    if isinstance(element, Aperture):
        x, y = _flat_coords(grid)
        inside = (x**2 + y**2) <= (element.diameter / 2.0) ** 2
        return np.diag(inside.astype(np.complex128))
    raise TypeError(f"no oracle matrix for element {type(element).__name__}")


def system_matrix(system: OpticalSystem) -> np.ndarray:
    """Whole-arm transfer matrix: product of element matrices."""
    grids = system.plane_grids()
    mat = np.eye(system.input_grid.npix, dtype=np.complex128)
    for element, grid in zip(system.elements, grids[:-1]):
        mat = element_matrix(element, grid) @ mat
    return mat


def _crystal_phase_diag(
    crystal: CrystalSpec, wavelength: float, walkoff: float, grid: GridSpec, distance: float
) -> np.ndarray:
    conj = grid.fourier_conjugate()
    nu_x, nu_y = _flat_coords(conj)
    rate = -np.pi * wavelength * (nu_x**2 + nu_y**2) / crystal.refractive_index
    rate = rate + 2.0 * np.pi * walkoff * nu_x
    return np.exp(1j * rate * distance)


def crystal_propagator(
    crystal: CrystalSpec, photon: Photon, grid: GridSpec, distance: float
) -> np.ndarray:
    """Dense matrix for paraxial propagation inside the crystal."""
    walkoff = 0.0
    if crystal.pm_type is PhaseMatching.TYPE2 and photon is WALKOFF_PHOTON:
        walkoff = crystal.walkoff_angle
    fwd = dft2_matrix(grid)
    diag = _crystal_phase_diag(crystal, crystal.wavelength_down, walkoff, grid, distance)
    return fwd.conj().T @ np.diag(diag) @ fwd


def pump_propagator(crystal: CrystalSpec, grid: GridSpec, distance: float) -> np.ndarray:
    fwd = dft2_matrix(grid)
    diag = _crystal_phase_diag(
        crystal, crystal.wavelength_pump, crystal.pump_walkoff_angle, grid, distance
    )
    return fwd.conj().T @ np.diag(diag) @ fwd


def brute_force_wavefunction(
    pump: PumpSpec,
    crystal: CrystalSpec,
    signal_arm: OpticalSystem,
    idler_arm: OpticalSystem,
) -> BiphotonWavefunction:
    """Literal double sum over slices and pump pixels with dense matrices."""
    grid = signal_arm.input_grid
    if grid.n > MAX_BRUTE_N:
        raise SizeGuardError(f"brute force limited to n <= {MAX_BRUTE_N}, got {grid.n}")
    if crystal.slices > MAX_BRUTE_SLICES:
        raise SizeGuardError(
            f"brute force limited to M <= {MAX_BRUTE_SLICES}, got {crystal.slices}"
        )
    npix = grid.npix
    m_slices = crystal.slices
    step = crystal.length / m_slices

    arm_s = system_matrix(signal_arm)
    arm_i = system_matrix(idler_arm)
    pump_vec = pump_field(pump, grid).amplitudes.ravel()

    psi = np.zeros((npix, npix), dtype=np.complex128)
    for m in range(1, m_slices + 1):
        z_entrance = (m - 1) * step
        remaining = crystal.length - m * step
        pump_m = pump_propagator(crystal, grid, z_entrance) @ pump_vec
        h_s = arm_s @ crystal_propagator(crystal, Photon.SIGNAL, grid, remaining)
        h_i = arm_i @ crystal_propagator(crystal, Photon.IDLER, grid, remaining)
        for r in range(npix):
            for s in range(npix):
                psi[s, :] += pump_m[r] * h_s[s, r] * h_i[:, r]
    return BiphotonWavefunction(signal_arm.output_grid, psi)


def brute_force_correlations(psi: BiphotonWavefunction):
    """Quadruple-loop accumulation of the difference and sum maps."""
    from .analysis import CorrelationMap, MapKind

    grid = psi.grid
    if grid.n > MAX_BRUTE_CORR_N:
        raise SizeGuardError(
            f"brute-force correlations limited to n <= {MAX_BRUTE_CORR_N}, got {grid.n}"
        )
    nx, ny = grid.shape
    cx, cy = nx // 2, ny // 2
    prob = np.abs(psi.amplitudes) ** 2
    weight = prob.sum()
    if weight == 0.0:
        raise ValueError("zero-weight wave function")
    diff = np.zeros((nx, ny))
    total = np.zeros((nx, ny))
    for s_r in range(nx):
        for s_c in range(ny):
            for i_r in range(nx):
                for i_c in range(ny):
                    p = prob[s_r * ny + s_c, i_r * ny + i_c]
                    diff[(s_r - i_r + cx) % nx, (s_c - i_c + cy) % ny] += p
                    total[(s_r + i_r - cx) % nx, (s_c + i_c - cy) % ny] += p
    return (
        CorrelationMap(grid=grid, values=diff / weight, kind=MapKind.DIFFERENCE),
        CorrelationMap(grid=grid, values=total / weight, kind=MapKind.SUM),
    )
