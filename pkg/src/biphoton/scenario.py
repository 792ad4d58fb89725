"""Config-driven scenario assembly and execution.

Configs are TOML with explicit units in key names (lengths in the key
suffix: _um, _mm, _nm, ...).  A scenario defines the grid, pump, crystal,
the two detection arms as ordered element lists, optional thin phase
scatterers, and the outputs to emit.

Scatterer placement follows the modeled relay geometry: a far-field mask
goes into the first far-field plane of each arm, a near-field mask into
the last near-field plane strictly before detection (falling back to the
arm input when the chain has no interior near-field plane).  Along the
propagation direction the far-field scatterer therefore precedes the
near-field one, matching thick-scatterer stacks built from a Fourier-plane
diffuser followed by its conjugate image plane.  The same seeded mask is
applied in both arms.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import report
from .analysis import (
    SchmidtInputs,
    difference_correlation,
    joint_probability,
    idler_intensity,
    pairs_ratio,
    peak_std,
    schmidt_number,
    signal_intensity,
    sum_correlation,
)
from .elements import (
    Aperture,
    FreeSpace,
    LensFourier,
    OpticalSystem,
    Phase,
    Relay,
    random_phase_mask,
)
from .engine import (
    CrystalSpec,
    PhaseMatching,
    PumpSpec,
    thick_crystal_wavefunction,
)
from .errors import AssemblyError, ConfigError, NumericalError
from .grid import GridSpec, PlaneKind

KNOWN_MAPS = ("sum", "difference", "signal_intensity", "idler_intensity", "joint")
ELEMENT_KINDS = ("lens_fourier", "free_space", "relay", "aperture")


class _Table:
    """Dict wrapper producing config errors that name the missing key."""

    def __init__(self, data: dict, path: str = ""):
        if not isinstance(data, dict):
            raise ConfigError(f"config section {path or '<root>'} must be a table")
        self.data = data
        self.path = path

    def _name(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def require(self, key: str):
        if key not in self.data:
            raise ConfigError(f"missing required config key: {self._name(key)}")
        return self.data[key]

    def get(self, key: str, default=None):
        return self.data.get(key, default)

    def table(self, key: str) -> "_Table":
        return _Table(self.require(key), self._name(key))

    def optional_table(self, key: str) -> "_Table | None":
        if key not in self.data:
            return None
        return _Table(self.data[key], self._name(key))

    def number(self, key: str, default=None) -> float:
        value = self.require(key) if default is None else self.get(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {self._name(key)} must be a number")
        return float(value)

    def integer(self, key: str, default=None) -> int:
        value = self.require(key) if default is None else self.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key {self._name(key)} must be an integer")
        return value

    def string(self, key: str, default=None) -> str:
        value = self.require(key) if default is None else self.get(key, default)
        if not isinstance(value, str):
            raise ConfigError(f"config key {self._name(key)} must be a string")
        return value


@dataclass
class ScatterersConfig:
    plane: str = "none"  # none | nf | ff | both
    seed_nf: int | None = None
    seed_ff: int | None = None
    correlation_length_nf: float = 0.0
    correlation_length_ff: float = 0.0


@dataclass
class OutputsConfig:
    maps: tuple[str, ...] = ("sum", "difference")
    db_floor: float = -40.0
    peak_radius_px: int = 2
    figures: bool = True
    schmidt: dict[str, float] | None = None


@dataclass
class RunConfig:
    mode: str = "serial"  # serial | parallel
    precision: str = "double"  # double | single
    threads: int = 0


@dataclass
class ScenarioConfig:
    grid: GridSpec
    pump: PumpSpec
    crystal: CrystalSpec
    signal_elements: list[dict]
    idler_elements: list[dict]
    scatterers: ScatterersConfig
    outputs: OutputsConfig
    run: RunConfig
    raw: dict = field(default_factory=dict, repr=False)


def parse_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc
    return parse_config_dict(data)


def parse_config_dict(data: dict) -> ScenarioConfig:
    root = _Table(data)

    grid_tbl = root.table("grid")
    try:
        grid = GridSpec(
            n=grid_tbl.integer("n"),
            pitch=grid_tbl.number("pitch_um") * 1e-6,
            plane_kind=PlaneKind.NEAR_FIELD,
            ndim=grid_tbl.integer("ndim", 2),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc

    pump_tbl = root.table("pump")
    center = pump_tbl.get("center_um", [0.0, 0.0])
    if not (isinstance(center, (list, tuple)) and len(center) == 2):
        raise ConfigError("config key pump.center_um must be a list of two numbers")
    try:
        pump = PumpSpec(
            waist_fwhm=pump_tbl.number("fwhm_um") * 1e-6,
            center=(float(center[0]) * 1e-6, float(center[1]) * 1e-6),
            amplitude=pump_tbl.number("amplitude", 1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid pump: {exc}") from exc

    crystal_tbl = root.table("crystal")
    pm_name = crystal_tbl.string("phase_matching")
    try:
        pm_type = PhaseMatching(pm_name)
    except ValueError as exc:
        names = ", ".join(p.value for p in PhaseMatching)
        raise ConfigError(
            f"config key crystal.phase_matching must be one of: {names}"
        ) from exc
    try:
        crystal = CrystalSpec(
            length=crystal_tbl.number("length_mm") * 1e-3,
            slices=crystal_tbl.integer("slices"),
            pm_type=pm_type,
            wavelength_pump=crystal_tbl.number("pump_wavelength_nm") * 1e-9,
            wavelength_down=crystal_tbl.number("down_wavelength_nm") * 1e-9,
            refractive_index=crystal_tbl.number("refractive_index"),
            walkoff_angle=crystal_tbl.number("walkoff_mrad", 0.0) * 1e-3,
            pump_walkoff_angle=crystal_tbl.number("pump_walkoff_mrad", 0.0) * 1e-3,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid crystal: {exc}") from exc

    def arm_elements(name: str) -> list[dict]:
        arm_tbl = root.table(name)
        elements = arm_tbl.get("elements", [])
        if not isinstance(elements, list):
            raise ConfigError(f"config key {name}.elements must be an array of tables")
        for idx, entry in enumerate(elements):
            if not isinstance(entry, dict) or "kind" not in entry:
                raise ConfigError(f"config key {name}.elements[{idx}].kind is required")
            if entry["kind"] not in ELEMENT_KINDS:
                raise ConfigError(
                    f"unknown element kind {entry['kind']!r} in {name}.elements[{idx}]; "
                    f"known: {', '.join(ELEMENT_KINDS)}"
                )
        return elements

    scat = ScatterersConfig()
    scat_tbl = root.optional_table("scatterers")
    if scat_tbl is not None:
        scat.plane = scat_tbl.string("plane", "none").lower()
        if scat.plane not in ("none", "nf", "ff", "both"):
            raise ConfigError("config key scatterers.plane must be none, nf, ff or both")
        shared = scat_tbl.number("correlation_length_um", 0.0)
        scat.correlation_length_nf = scat_tbl.number("correlation_length_nf_um", shared) * 1e-6
        scat.correlation_length_ff = scat_tbl.number("correlation_length_ff_um", shared) * 1e-6
        if scat.plane in ("nf", "both"):
            scat.seed_nf = scat_tbl.integer("seed_nf")
        if scat.plane in ("ff", "both"):
            scat.seed_ff = scat_tbl.integer("seed_ff")

    out = OutputsConfig()
    out_tbl = root.optional_table("outputs")
    if out_tbl is not None:
        maps = out_tbl.get("maps", list(out.maps))
        if not isinstance(maps, list) or not maps:
            raise ConfigError("config key outputs.maps must be a non-empty array")
        for name in maps:
            if name not in KNOWN_MAPS:
                raise ConfigError(
                    f"unknown output map {name!r}; known: {', '.join(KNOWN_MAPS)}"
                )
        out.maps = tuple(maps)
        out.db_floor = out_tbl.number("db_floor", -40.0)
        out.peak_radius_px = out_tbl.integer("peak_radius_px", 2)
        out.figures = bool(out_tbl.get("figures", True))
        schmidt_tbl = out_tbl.optional_table("schmidt")
        if schmidt_tbl is not None:
            out.schmidt = {
                "sigma_pump_x_mm": schmidt_tbl.number("sigma_pump_x_mm"),
                "sigma_pump_y_mm": schmidt_tbl.number("sigma_pump_y_mm"),
                "sigma_pump_t_ps": schmidt_tbl.number("sigma_pump_t_ps"),
                "sigma_nu_x_per_mm": schmidt_tbl.number("sigma_nu_x_per_mm"),
                "sigma_nu_y_per_mm": schmidt_tbl.number("sigma_nu_y_per_mm"),
                "sigma_nu_t_thz": schmidt_tbl.number("sigma_nu_t_thz"),
            }

    run = RunConfig()
    run_tbl = root.optional_table("run")
    if run_tbl is not None:
        run.mode = run_tbl.string("mode", "serial")
        if run.mode not in ("serial", "parallel"):
            raise ConfigError("config key run.mode must be serial or parallel")
        run.precision = run_tbl.string("precision", "double")
        if run.precision not in ("double", "single"):
            raise ConfigError("config key run.precision must be double or single")
        run.threads = run_tbl.integer("threads", 0)

    return ScenarioConfig(
        grid=grid,
        pump=pump,
        crystal=crystal,
        signal_elements=arm_elements("signal_arm"),
        idler_elements=arm_elements("idler_arm"),
        scatterers=scat,
        outputs=out,
        run=run,
        raw=data,
    )


def _build_element(entry: dict, index: int, arm: str, default_wavelength: float):
    tbl = _Table(entry, f"{arm}.elements[{index}]")
    kind = tbl.string("kind")
    try:
        if kind == "lens_fourier":
            return LensFourier(
                focal_length=tbl.number("focal_length_mm") * 1e-3,
                wavelength=tbl.number("wavelength_nm", default_wavelength * 1e9) * 1e-9,
            )
        if kind == "free_space":
            return FreeSpace(
                distance=tbl.number("distance_mm") * 1e-3,
                wavelength=tbl.number("wavelength_nm", default_wavelength * 1e9) * 1e-9,
            )
        if kind == "relay":
            return Relay(
                magnification=tbl.number("magnification"),
                invert=bool(tbl.get("invert", False)),
            )
        if kind == "aperture":
            return Aperture(diameter=tbl.number("diameter_um") * 1e-6)
    except ValueError as exc:
        raise ConfigError(f"invalid element {arm}.elements[{index}]: {exc}") from exc
    raise ConfigError(
        f"unknown element kind {kind!r} in {arm}.elements[{index}]; "
        f"known: {', '.join(ELEMENT_KINDS)}"
    )


def _scatterer_positions(system: OpticalSystem, want_nf: bool, want_ff: bool):
    """Insertion positions (element-list indices) for the NF and FF masks."""
    planes = system.plane_grids()
    positions: dict[str, int] = {}
    if want_ff:
        ff = [i for i, g in enumerate(planes) if g.plane_kind is PlaneKind.FAR_FIELD]
        if not ff:
            raise AssemblyError("scatterer plane 'ff' requested but the arm has no far-field plane")
        positions["ff"] = ff[0]
    if want_nf:
        nf_interior = [
            i
            for i, g in enumerate(planes[:-1])
            if g.plane_kind is PlaneKind.NEAR_FIELD
        ]
        if nf_interior:
            positions["nf"] = nf_interior[-1]
        elif planes[-1].plane_kind is PlaneKind.NEAR_FIELD:
            positions["nf"] = 0  # identity-style arm: mask at the input plane
        else:
            raise AssemblyError(
                "scatterer plane 'nf' requested but the arm has no near-field plane"
            )
    return positions


def assemble_arms(config: ScenarioConfig) -> tuple[OpticalSystem, OpticalSystem]:
    """Build both arms from the config and inject the shared scatterers."""
    lam = config.crystal.wavelength_down
    arms = []
    mask_cache: dict[tuple, Phase] = {}
    for name, entries in (
        ("signal_arm", config.signal_elements),
        ("idler_arm", config.idler_elements),
    ):
        elements = [
            _build_element(entry, i, name, lam) for i, entry in enumerate(entries)
        ]
        try:
            system = OpticalSystem(elements, config.grid)
        except (ValueError, AssemblyError) as exc:
            raise AssemblyError(f"cannot assemble {name}: {exc}") from exc

        scat = config.scatterers
        want_nf = scat.plane in ("nf", "both")
        want_ff = scat.plane in ("ff", "both")
        if want_nf or want_ff:
            positions = _scatterer_positions(system, want_nf, want_ff)
            planes = system.plane_grids()
            inserts = []
            for plane_name, pos in positions.items():
                if plane_name == "nf":
                    seed, corr = scat.seed_nf, scat.correlation_length_nf
                else:
                    seed, corr = scat.seed_ff, scat.correlation_length_ff
                grid = planes[pos]
                key = (plane_name, grid)
                if key not in mask_cache:
                    mask_cache[key] = Phase(
                        random_phase_mask(grid, seed=seed, correlation_length=corr)
                    )
                inserts.append((pos, mask_cache[key]))
            for pos, element in sorted(inserts, reverse=True):
                elements.insert(pos, element)
            system = OpticalSystem(elements, config.grid)
        arms.append(system)
    return arms[0], arms[1]


def _schmidt_results(params: dict[str, float]) -> dict[str, float]:
    kx = schmidt_number(
        SchmidtInputs(params["sigma_pump_x_mm"] * 1e-3, params["sigma_nu_x_per_mm"] * 1e3)
    )
    ky = schmidt_number(
        SchmidtInputs(params["sigma_pump_y_mm"] * 1e-3, params["sigma_nu_y_per_mm"] * 1e3)
    )
    kt = schmidt_number(
        SchmidtInputs(params["sigma_pump_t_ps"] * 1e-12, params["sigma_nu_t_thz"] * 1e12)
    )
    return {"k_x": kx, "k_y": ky, "k_t": kt, "k_product": kx * ky * kt}


def run_scenario(
    config_path: str | Path,
    output_dir: str | Path,
    seed_override: int | None = None,
    threads: int | None = None,
    force_serial: bool = False,
) -> dict:
    """Execute one scenario: engine, analysis, and all configured outputs.

    Returns the manifest payload (also written to ``manifest.json``).
    """
    started = time.perf_counter()
    config = parse_config(config_path)
    if seed_override is not None:
        if config.scatterers.seed_nf is not None:
            config.scatterers.seed_nf = seed_override
        if config.scatterers.seed_ff is not None:
            config.scatterers.seed_ff = seed_override + 1
    if force_serial:
        config.run.mode = "serial"
    if threads is None and config.run.threads:
        threads = config.run.threads

    signal_arm, idler_arm = assemble_arms(config)
    dtype = np.complex64 if config.run.precision == "single" else np.complex128

    def compute():
        return thick_crystal_wavefunction(
            config.pump,
            config.crystal,
            signal_arm,
            idler_arm,
            mode=config.run.mode,
            dtype=dtype,
        )

    if threads:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=threads):
            psi = compute()
    else:
        psi = compute()

    if not np.all(np.isfinite(psi.amplitudes)):
        raise NumericalError("non-finite values in the computed wave function")

    prob, weight = joint_probability(psi)
    detection = signal_arm.output_grid

    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: list[Path] = []
    metrics: dict[str, float] = {"total_weight": weight}
    map_results: dict[str, dict] = {}

    for name in config.outputs.maps:
        if name == "sum":
            cmap = sum_correlation(prob, weight, detection)
            values, kind = cmap.values, "sum"
        elif name == "difference":
            cmap = difference_correlation(prob, weight, detection)
            values, kind = cmap.values, "difference"
        elif name == "signal_intensity":
            cmap, values, kind = None, signal_intensity(prob, detection), "signal_intensity"
        elif name == "idler_intensity":
            cmap, values, kind = None, idler_intensity(prob, detection), "idler_intensity"
        else:  # joint
            cmap, values, kind = None, prob, "joint"

        if not np.all(np.isfinite(values)):
            raise NumericalError(f"non-finite values in output map {name}")

        outputs.extend(report.write_map(out_dir, name, values, detection.pitch, kind))
        outputs.append(report.write_preview(out_dir, name, values, config.outputs.db_floor))
        if config.outputs.figures:
            outputs.append(
                report.write_figure(
                    out_dir, name, values, detection.pitch, kind, config.outputs.db_floor
                )
            )

        entry: dict[str, float] = {"total": float(values.sum())}
        if cmap is not None:
            ratio = pairs_ratio(cmap, config.outputs.peak_radius_px)
            sx, sy = peak_std(cmap, window_radius=max(2, config.outputs.peak_radius_px))
            entry.update(
                {"pairs_ratio": ratio, "peak_std_x_m": sx, "peak_std_y_m": sy}
            )
            metrics[f"{name}_pairs_ratio"] = ratio
            metrics[f"{name}_peak_std_x_m"] = sx
            metrics[f"{name}_peak_std_y_m"] = sy
        map_results[name] = entry

    results: dict = {"total_weight": weight, "maps": map_results}
    if config.outputs.schmidt is not None:
        schmidt = _schmidt_results(config.outputs.schmidt)
        results["schmidt"] = schmidt
        metrics.update({f"schmidt_{k}": v for k, v in schmidt.items()})

    wall_time = time.perf_counter() - started
    results["wall_time_s"] = wall_time
    metrics["wall_time_s"] = wall_time
    outputs.append(report.write_metrics_csv(out_dir, metrics))

    payload = {"config": config.raw, "results": results}
    report.write_manifest(out_dir, payload, outputs)
    return payload
