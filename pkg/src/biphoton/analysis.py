"""Observables derived from the biphoton wave function.

Joint probability, intensity marginals, difference/sum correlation maps
(periodic index arithmetic, normalized to unit total), peak statistics,
Schmidt numbers and speckle metrics.  All functions are pure; the heavy
inputs (psi, P) are never mutated.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.ndimage import gaussian_filter

from .engine import BiphotonWavefunction
from .errors import NumericalError
from .grid import GridSpec, parity_flip


class MapKind(enum.Enum):
    DIFFERENCE = "difference"
    SUM = "sum"


@dataclass
class CorrelationMap:
    """Normalized correlation over the difference or sum coordinate.

    The coordinate grid has the same pitch as the detection grid; the map
    sums to one by construction.
    """

    grid: GridSpec
    values: np.ndarray = field(repr=False)
    kind: MapKind = MapKind.DIFFERENCE

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"map shape {self.values.shape} does not match grid shape {self.grid.shape}"
            )

    @property
    def total(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class SchmidtInputs:
    """Standard deviations along one axis: pump size and emission bandwidth."""

    sigma_pump: float
    sigma_nu: float

    def __post_init__(self) -> None:
        if not (self.sigma_pump > 0 and self.sigma_nu > 0):
            raise ValueError("Schmidt inputs must be positive")


def schmidt_number(inputs: SchmidtInputs) -> float:
    """Mode count along one dimension: K = (1/2) * sigma_pump * 2*pi * sigma_nu."""
    return 0.5 * inputs.sigma_pump * 2.0 * np.pi * inputs.sigma_nu


def joint_probability(psi: BiphotonWavefunction) -> tuple[np.ndarray, float]:
    """P(r_s, r_i) = |psi|^2 and the total weight W = sum(P).

    Computed in double precision regardless of the engine's working
    precision, so downstream normalizations hold to 1e-12.
    """
    amps = psi.amplitudes
    with np.errstate(over="ignore"):  # overflow surfaces via the finite check
        prob = amps.real.astype(np.float64) ** 2 + amps.imag.astype(np.float64) ** 2
    weight = float(prob.sum())
    if not np.isfinite(weight):
        raise NumericalError("non-finite joint probability")
    if weight == 0.0:
        raise NumericalError("wave function has zero total weight")
    return prob, weight


def signal_intensity(prob: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Marginal over idler pixels: I_s(r_s) = sum_i P(r_s, r_i)."""
    return prob.sum(axis=1).reshape(grid.shape)


def idler_intensity(prob: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Marginal over signal pixels."""
    return prob.sum(axis=0).reshape(grid.shape)


def _prob_4d(prob: np.ndarray, grid: GridSpec) -> np.ndarray:
    nx, ny = grid.shape
    return prob.reshape(nx, ny, nx, ny)


def difference_correlation(prob: np.ndarray, weight: float, grid: GridSpec) -> CorrelationMap:
    """C(delta) = (1/W) sum over pairs with r_s - r_i = delta, periodic.

    delta = 0 sits at the grid center pixel.
    """
    if not weight > 0:
        raise NumericalError("total weight must be positive")
    nx, ny = grid.shape
    cx, cy = nx // 2, ny // 2
    p4 = _prob_4d(prob, grid)
    values = np.zeros((nx, ny))
    for ix in range(nx):
        for iy in range(ny):
            values += np.roll(p4[:, :, ix, iy], shift=(cx - ix, cy - iy), axis=(0, 1))
    values /= weight
    return CorrelationMap(grid=grid, values=values, kind=MapKind.DIFFERENCE)


def sum_correlation(prob: np.ndarray, weight: float, grid: GridSpec) -> CorrelationMap:
    """C(sigma) over r_s + r_i: the difference correlation against the
    180-degree rotated idler image (an exact identity on the periodic grid)."""
    p4 = _prob_4d(prob, grid)
    rotated = parity_flip(p4)  # flips the trailing (idler) axes
    flat = rotated.reshape(prob.shape)
    result = difference_correlation(flat, weight, grid)
    return CorrelationMap(grid=grid, values=result.values, kind=MapKind.SUM)


def _argmax_pixel(values: np.ndarray) -> tuple[int, int]:
    # np.argmax scans row-major, which implements the smallest-row,
    # then smallest-column tie-break
    return tuple(int(v) for v in np.unravel_index(int(np.argmax(values)), values.shape))


def pairs_ratio(cmap: CorrelationMap, peak_radius: int) -> float:
    """Mass of the map inside a disc around its peak (periodic distances)."""
    nx, ny = cmap.values.shape
    if peak_radius < 0:
        raise ValueError("peak radius must be >= 0")
    if peak_radius > cmap.grid.n // 2:
        raise ValueError(f"peak radius {peak_radius} exceeds grid half-size {cmap.grid.n // 2}")
    px, py = _argmax_pixel(cmap.values)
    ix = np.arange(nx)[:, None]
    iy = np.arange(ny)[None, :]
    dx = (ix - px + nx // 2) % nx - nx // 2
    dy = (iy - py + ny // 2) % ny - ny // 2
    disc = dx**2 + dy**2 <= peak_radius**2
    return float(cmap.values[disc].sum())


def peak_std(cmap: CorrelationMap, window_radius: int) -> tuple[float, float]:
    """Second-moment peak widths (sigma_x, sigma_y) in physical units.

    Moments are taken in a window centered on the argmax after subtracting
    the window-border median as background.  The single-pixel bin variance
    pitch^2 / 12 is included, so a sub-pixel (Dirac) peak reports the
    pitch / sqrt(12) convention.
    """
    values = cmap.values
    nx, ny = values.shape
    w = window_radius
    if w < 1:
        raise ValueError("window radius must be >= 1")
    if 2 * w + 1 > nx:
        raise ValueError(f"window radius {w} does not fit a grid of {nx} rows")
    px, py = _argmax_pixel(values)
    cx, cy = nx // 2, ny // 2
    centered = np.roll(values, shift=(cx - px, cy - py), axis=(0, 1))
    lox, hix = cx - w, cx + w + 1
    if ny == 1:
        window = centered[lox:hix, :]
        border = window[[0, -1], :]
    else:
        window = centered[lox:hix, cy - w : cy + w + 1]
        interior = np.zeros_like(window, dtype=bool)
        interior[1:-1, 1:-1] = True
        border = window[~interior]
    background = float(np.median(border))
    weights = np.clip(window - background, 0.0, None)
    total = float(weights.sum())
    pitch = cmap.grid.pitch
    bin_var = pitch**2 / 12.0
    if total == 0.0:
        return (float(np.sqrt(bin_var)), float(np.sqrt(bin_var)))
    xs = (np.arange(window.shape[0]) - w)[:, None] * pitch
    ys = (np.arange(window.shape[1]) - (0 if ny == 1 else w))[None, :] * pitch
    mean_x = float((weights * xs).sum()) / total
    mean_y = float((weights * ys).sum()) / total
    var_x = float((weights * (xs - mean_x) ** 2).sum()) / total
    var_y = float((weights * (ys - mean_y) ** 2).sum()) / total
    return (float(np.sqrt(var_x + bin_var)), float(np.sqrt(var_y + bin_var)))


def speckle_contrast(cmap_or_values, mask: np.ndarray, floor_db: float | None = None) -> float:
    """std / mean of the map restricted to the mask (>= 16 pixels).

    ``floor_db`` clips values below the display floor (relative to the map
    maximum) before taking moments, so that structure invisible in the
    dB-rendered map cannot register as contrast.
    """
    values = cmap_or_values.values if isinstance(cmap_or_values, CorrelationMap) else cmap_or_values
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != values.shape:
        raise ValueError("mask shape does not match map shape")
    if floor_db is not None:
        values = np.maximum(values, float(values.max()) * 10.0 ** (floor_db / 10.0))
    selected = values[mask]
    if selected.size < 16:
        raise ValueError(f"mask selects {selected.size} pixels, need >= 16")
    mean = float(selected.mean())
    if mean == 0.0:
        return 0.0
    contrast = float(selected.std()) / mean
    if floor_db is not None and contrast < 1e-12:
        return 0.0
    return contrast


def envelope_mask(
    values: np.ndarray, threshold_db: float = -20.0, smooth_px: float = 1.5
) -> np.ndarray:
    """Support region of a map: smoothed values above a dB threshold."""
    arr = values.values if isinstance(values, CorrelationMap) else np.asarray(values)
    sigmas = tuple(smooth_px if size > 1 else 0.0 for size in arr.shape)
    smooth = gaussian_filter(arr, sigma=sigmas, mode="wrap")
    peak = float(smooth.max())
    if peak <= 0:
        return np.zeros_like(arr, dtype=bool)
    return smooth >= peak * 10.0 ** (threshold_db / 10.0)


def local_speckle_contrast(
    values: np.ndarray, mask: np.ndarray, smooth_px: float = 4.0
) -> float:
    """Speckle contrast after dividing out the smooth envelope trend.

    Robust companion to :func:`speckle_contrast` when the map has a strong
    large-scale intensity envelope: fully developed speckle still reports
    about 1, a smooth beam reports close to 0.
    """
    arr = values.values if isinstance(values, CorrelationMap) else np.asarray(values)
    sigmas = tuple(smooth_px if size > 1 else 0.0 for size in arr.shape)
    trend = gaussian_filter(arr, sigma=sigmas, mode="wrap")
    floor = float(trend.max()) * 1e-12
    normalized = arr / np.maximum(trend, floor)
    return speckle_contrast(normalized, mask)


def line_anisotropy(
    values: np.ndarray, lag: int = 2, mask: np.ndarray | None = None
) -> float:
    """Ratio of autocovariance along vs across the map anti-diagonal.

    A map striped parallel to the anti-diagonal stays correlated under the
    (+lag, -lag) displacement but decorrelates under (+lag, +lag), giving a
    large ratio; an isotropic blob gives a ratio near one.
    """
    arr = values.values if isinstance(values, CorrelationMap) else np.asarray(values)
    if arr.ndim != 2 or min(arr.shape) < 2 * lag + 1:
        raise ValueError("anisotropy needs a 2-D map larger than the lag")
    if mask is None:
        mask = np.ones_like(arr, dtype=bool)

    mu = float(arr[mask].mean())
    centered = arr - mu
    var = float((centered[mask] ** 2).mean())
    if var == 0.0:
        return 1.0

    def autocorr(shift: tuple[int, int]) -> float:
        rolled = np.roll(centered, shift=shift, axis=(0, 1))
        rolled_mask = np.roll(mask, shift=shift, axis=(0, 1))
        valid = mask & rolled_mask
        return float((centered[valid] * rolled[valid]).mean()) / var

    along = autocorr((lag, -lag))
    across = autocorr((lag, lag))
    # no coherent structure at this lag in either direction means no line
    # structure; report isotropy rather than a ratio of noise
    if max(along, across) < 0.05:
        return 1.0
    return max(along, 0.0) / max(across, 0.02)


def epr_degree(
    sigma_position: tuple[float, float],
    sigma_momentum: tuple[float, float],
    formula: Callable[[tuple[float, float], tuple[float, float]], float],
) -> float:
    """Combine near- and far-field peak widths with a caller-supplied formula.

    No default definition is asserted; the quantitative meaning depends on
    a convention that this package does not fix.
    """
    return float(formula(sigma_position, sigma_momentum))
