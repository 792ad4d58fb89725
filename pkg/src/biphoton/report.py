"""Scenario output writers: raw arrays, previews, figures, manifest.

Array format: for each map ``<name>.f64`` holds the values as raw
little-endian 64-bit reals in row-major order, and ``<name>.hdr`` is a
text sidecar with the magic line ``BIPHOTON-MAP v1`` followed by
``rows cols pitch_m kind``.  Previews are 8-bit greyscale PGM in dB
scale; figures are matplotlib renderings of the same maps.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

MAGIC = "BIPHOTON-MAP v1"


def to_db(values: np.ndarray, floor_db: float = -40.0) -> np.ndarray:
    """10*log10(v / max v), floored; an all-zero map renders at the floor."""
    peak = float(values.max())
    if peak <= 0.0:
        return np.full(values.shape, floor_db)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(values / peak)
    return np.clip(db, floor_db, 0.0)


def write_map(directory: Path, name: str, values: np.ndarray, pitch_m: float, kind: str) -> list[Path]:
    """Write one map as raw f64 data plus its text sidecar header."""
    directory = Path(directory)
    data_path = directory / f"{name}.f64"
    header_path = directory / f"{name}.hdr"
    arr = np.ascontiguousarray(values, dtype="<f8")
    data_path.write_bytes(arr.tobytes())
    rows, cols = arr.shape
    header_path.write_text(f"{MAGIC}\n{rows} {cols} {pitch_m:.17g} {kind}\n")
    return [data_path, header_path]


def read_map(directory: Path, name: str) -> tuple[np.ndarray, float, str]:
    """Load a map written by :func:`write_map`."""
    directory = Path(directory)
    header = (directory / f"{name}.hdr").read_text().splitlines()
    if not header or header[0] != MAGIC:
        raise ValueError(f"{name}.hdr is not a {MAGIC} sidecar")
    rows, cols, pitch, kind = header[1].split()
    data = np.frombuffer((directory / f"{name}.f64").read_bytes(), dtype="<f8")
    return data.reshape(int(rows), int(cols)).copy(), float(pitch), kind


def write_preview(directory: Path, name: str, values: np.ndarray, floor_db: float) -> Path:
    """8-bit greyscale PGM of the dB-scaled map (x horizontal, y up)."""
    db = to_db(values, floor_db)
    scaled = np.round((db - floor_db) / (0.0 - floor_db) * 255.0).astype(np.uint8)
    raster = np.flipud(scaled.T)  # rows top-to-bottom = decreasing y
    path = Path(directory) / f"{name}.pgm"
    rows, cols = raster.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(raster).tobytes())
    return path


def write_figure(
    directory: Path, name: str, values: np.ndarray, pitch_m: float, kind: str, floor_db: float
) -> Path:
    """Matplotlib rendering of a map in dB scale, axes in physical units."""
    path = Path(directory) / f"{name}.png"
    db = to_db(values, floor_db)
    rows, cols = values.shape
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    if cols == 1:
        coord = (np.arange(rows) - rows // 2) * pitch_m
        ax.plot(coord, db[:, 0], lw=1.2)
        ax.set_xlabel("coordinate")
        ax.set_ylabel("dB")
        ax.set_ylim(floor_db - 2, 2)
        ax.grid(alpha=0.3)
    else:
        half_x = (rows // 2) * pitch_m
        half_y = (cols // 2) * pitch_m
        im = ax.imshow(
            db.T,
            origin="lower",
            extent=(-half_x, half_x, -half_y, half_y),
            cmap="inferno",
            vmin=floor_db,
            vmax=0.0,
            aspect="equal",
        )
        fig.colorbar(im, ax=ax, label="dB")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    ax.set_title(f"{name} ({kind})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def write_metrics_csv(directory: Path, metrics: dict[str, float]) -> Path:
    path = Path(directory) / "metrics.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key, value in metrics.items():
            writer.writerow([key, f"{value:.12g}"])
    return path


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def write_manifest(directory: Path, payload: dict, output_paths: list[Path]) -> Path:
    """Manifest with a config echo, results, and a checksum per output file."""
    directory = Path(directory)
    manifest = dict(payload)
    manifest["outputs"] = [
        {
            "path": str(Path(p).relative_to(directory)),
            "sha256": sha256_of(p),
            "bytes": Path(p).stat().st_size,
        }
        for p in output_paths
    ]
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
