"""Timing harness for the M * N^6 accumulation kernel.

Times the production kernel (:func:`biphoton.engine.accumulate_pair_products`)
on synthetic impulse-response banks, so any grid size can be measured, and
fits the log-log scaling of time versus n at fixed slice count plus the
linearity in the slice count.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .engine import accumulate_pair_products
from .errors import SizeGuardError

BYTES_PER_CELL = 16  # complex128


@dataclass
class BenchRow:
    n: int
    slices: int
    seconds: float


@dataclass
class BenchResult:
    rows: list[BenchRow]
    mode: str
    slope_n: float | None = None
    slope_fit_m: int | None = None

    def table(self) -> str:
        lines = [f"{'n':>6} {'M':>6} {'seconds':>12}"]
        for row in self.rows:
            lines.append(f"{row.n:>6} {row.slices:>6} {row.seconds:>12.4f}")
        if self.slope_n is not None:
            lines.append(
                f"log-time vs log-n slope at M={self.slope_fit_m}: {self.slope_n:.2f}"
            )
        return "\n".join(lines)


def _check_memory(n: int) -> None:
    npix = n * n
    needed = 4 * npix * npix * BYTES_PER_CELL  # psi, two banks, one temp
    try:
        import psutil

        available = psutil.virtual_memory().available
    except ImportError:  # guard degrades gracefully
        return
    if needed > 0.8 * available:
        raise SizeGuardError(
            f"benchmark at n={n} needs about {needed / 2**30:.1f} GiB, "
            f"only {available / 2**30:.1f} GiB available"
        )


def _time_kernel(n: int, slices: int, mode: str, repeats: int, rng: np.random.Generator) -> float:
    npix = n * n
    signal_bank = rng.standard_normal((npix, npix)) + 1j * rng.standard_normal((npix, npix))
    idler_bank = rng.standard_normal((npix, npix)) + 1j * rng.standard_normal((npix, npix))
    pump = rng.standard_normal(npix) + 1j * rng.standard_normal(npix)
    psi = np.zeros((npix, npix), dtype=np.complex128)
    best = np.inf
    for _ in range(repeats):
        psi[:] = 0.0
        start = time.perf_counter()
        for _ in range(slices):
            accumulate_pair_products(psi, pump, signal_bank, idler_bank, mode)
        best = min(best, time.perf_counter() - start)
    return best


def run_benchmark(
    n_list: list[int],
    m_list: list[int],
    mode: str = "serial",
    repeats: int = 3,
    seed: int = 0,
) -> BenchResult:
    """Wall time per (n, M) cell plus the fitted log-log slope over n."""
    if not n_list or not m_list:
        raise ValueError("need at least one n and one M")
    rng = np.random.default_rng(seed)
    rows = []
    for n in n_list:
        _check_memory(n)
        for m in m_list:
            rows.append(BenchRow(n=n, slices=m, seconds=_time_kernel(n, m, mode, repeats, rng)))
    result = BenchResult(rows=rows, mode=mode)
    fit_m = m_list[0]
    pts = [(row.n, row.seconds) for row in rows if row.slices == fit_m]
    if len(pts) >= 2:
        log_n = np.log([p[0] for p in pts])
        log_t = np.log([p[1] for p in pts])
        result.slope_n = float(np.polyfit(log_n, log_t, 1)[0])
        result.slope_fit_m = fit_m
    return result
