"""Scenario configuration: TOML parsing, unit validation, and construction
of the domain objects a simulation run needs.

Every numeric key must carry an explicit unit suffix (``_nm``, ``_thz``,
``_um``, ``_s``, ...) or be a known dimensionless quantity; bandwidths
additionally require ``bandwidth_kind = "std" | "fwhm"`` so nanometer or
terahertz figures are never silently misread.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .acquisition import NoiseModel, ScanPlan
from .errors import ConfigError
from .sample import DispersiveSlab, GapSample, SingleLayer
from .spectra import SpdcSource
from .units import (
    C_M_PER_S,
    STD_TO_FWHM,
    TWO_PI,
    omega_bandwidth_from_wavelength,
    omega_from_wavelength,
    tau_from_mirror_um,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_UNIT_SUFFIXES = (
    "_nm", "_um", "_mm", "_m", "_s", "_ms", "_ns", "_hz", "_ghz", "_thz",
    "_cps", "_rad", "_nm_s",
)

_DIMENSIONLESS_KEYS = {
    "r", "r1", "r2", "t1", "backing_r", "passes", "echo_count", "seed",
    "runs", "samples_per_bin", "drift_correlation", "path_drift_rate",
    "efficiency_d1", "efficiency_d2", "efficiency_d3", "order", "nodes",
    "cutoff_over_pump", "sigma1_over_pump", "savgol_order",
}


def _check_units(table: dict, path: str = "") -> None:
    for key, value in table.items():
        here = f"{path}.{key}" if path else key
        if isinstance(value, dict):
            _check_units(value, here)
        elif isinstance(value, bool) or isinstance(value, str):
            continue
        elif isinstance(value, (int, float)) or (
            isinstance(value, list) and value and all(isinstance(v, (int, float)) for v in value)
        ):
            if key in _DIMENSIONLESS_KEYS or any(key.endswith(s) for s in _UNIT_SUFFIXES):
                continue
            raise ConfigError(
                f"config key '{here}' is numeric but carries no unit suffix "
                f"({', '.join(_UNIT_SUFFIXES)}) and is not a known dimensionless key"
            )


@dataclass
class AnalysisConfig:
    cutoff_over_pump: float = 0.015
    savgol_window_um: float = 17.0
    savgol_order: int = 3
    sigma1_over_pump: float | None = None

    def as_dict(self) -> dict:
        return {
            "cutoff_over_pump": self.cutoff_over_pump,
            "savgol_window_um": self.savgol_window_um,
            "savgol_order": self.savgol_order,
            "sigma1_over_pump": self.sigma1_over_pump,
        }


@dataclass
class Scenario:
    source: SpdcSource
    sample: object
    plan: ScanPlan
    noise: NoiseModel
    analysis: AnalysisConfig
    runs: int
    seed: int
    schemes: tuple
    nodes: int
    name: str = "scenario"
    raw: dict = field(default_factory=dict)


def _bandwidth_to_std(table: dict, prefix: str, kind: str, center_omega: float | None = None) -> float:
    """Resolve '<prefix>_ghz'/'_thz'/'_nm' into a rad/s standard deviation."""
    candidates = [k for k in table if k.startswith(prefix)]
    if len(candidates) != 1:
        raise ConfigError(f"need exactly one '{prefix}_*' key, found {candidates}")
    key = candidates[0]
    value = float(table[key])
    if key.endswith("_ghz"):
        width = TWO_PI * value * 1e9
    elif key.endswith("_thz"):
        width = TWO_PI * value * 1e12
    elif key.endswith("_nm"):
        if center_omega is None:
            raise ConfigError(f"{key}: wavelength bandwidth needs a center frequency")
        center_m = TWO_PI * C_M_PER_S / center_omega
        width = omega_bandwidth_from_wavelength(value * 1e-9, center_m)
    else:
        raise ConfigError(f"{key}: unsupported bandwidth unit")
    if kind == "fwhm":
        width /= STD_TO_FWHM
    elif kind != "std":
        raise ConfigError(f"bandwidth_kind must be 'std' or 'fwhm', got {kind!r}")
    return width


def build_source(table: dict) -> SpdcSource:
    if "bandwidth_kind" not in table:
        raise ConfigError("source block requires bandwidth_kind = 'std' | 'fwhm'")
    kind = table["bandwidth_kind"]
    pump_omega = omega_from_wavelength(float(table["pump_wavelength_nm"]) * 1e-9)
    pump_std = _bandwidth_to_std(table, "pump_bandwidth", kind, center_omega=pump_omega)
    phasematch_std = _bandwidth_to_std(
        table, "phasematch_bandwidth", kind, center_omega=pump_omega / 2.0
    )
    return SpdcSource(pump_center=pump_omega, pump_std=pump_std, phasematch_std=phasematch_std)


def build_sample(table: dict, source: SpdcSource):
    kind = table.get("type")
    if kind == "mirror":
        return SingleLayer(
            r=float(table.get("r", 1.0)),
            delay=tau_from_mirror_um(float(table.get("position_um", 0.0))),
        )
    if kind == "slab":
        from . import materials

        thickness = float(table["thickness_mm"]) * 1e-3
        passes = int(table.get("passes", 2))
        omega0 = source.degenerate_center
        mat = table.get("material", "silicon")
        n0 = float(materials.sellmeier_index(mat, omega0))
        n1 = float(materials.sellmeier_dn_domega(mat, omega0))
        group_delay = passes * thickness * (n0 + omega0 * n1) / C_M_PER_S
        # rebalance the reference arm: place the envelope at position_um
        delay = tau_from_mirror_um(float(table.get("position_um", 0.0))) - group_delay
        return DispersiveSlab(
            thickness=thickness,
            material=mat,
            backing_r=float(table.get("backing_r", 1.0)),
            passes=passes,
            expansion=table.get("expansion", "linear"),
            reference_omega=omega0,
            delay=delay,
        )
    if kind == "gap":
        return GapSample(
            r1=float(table["r1"]),
            r2=float(table["r2"]),
            t1=float(table["t1"]),
            gap=float(table["gap_um"]) * 1e-6,
            first_interface=float(table.get("first_interface_um", 0.0)) * 1e-6,
            echo_count=int(table.get("echo_count", 4)),
        )
    raise ConfigError(f"sample type must be mirror|slab|gap, got {kind!r}")


def build_plan(table: dict) -> ScanPlan:
    span_um = table.get("span_um")
    if not (isinstance(span_um, list) and len(span_um) == 2):
        raise ConfigError("scan block needs span_um = [start, end]")
    span = (tau_from_mirror_um(float(span_um[0])), tau_from_mirror_um(float(span_um[1])))
    mode = table.get("mode", "step")
    if mode == "step":
        return ScanPlan(
            span=span,
            mode="step",
            step_size=float(table.get("step_nm", 70.0)) * 1e-9,
            exposure=float(table.get("exposure_s", 0.1)),
        )
    if mode == "continuous":
        return ScanPlan(
            span=span,
            mode="continuous",
            velocity=float(table.get("velocity_nm_s", 16.7)) * 1e-9,
            bin_width=float(table.get("bin_nm", 300.0)) * 1e-9,
            samples_per_bin=int(table.get("samples_per_bin", 600)),
        )
    raise ConfigError(f"scan mode must be step|continuous, got {mode!r}")


def build_noise(table: dict, seed: int) -> NoiseModel:
    return NoiseModel(
        pair_rate=float(table.get("pair_rate_cps", 1e6)),
        path_jitter_std=float(table.get("jitter_nm", 0.0)) * 1e-9,
        drift_rate=float(table.get("path_drift_rate", 0.0)),
        drift_correlation=int(table.get("drift_correlation", 64)),
        efficiencies=(
            float(table.get("efficiency_d1", 1.0)),
            float(table.get("efficiency_d2", 1.0)),
            float(table.get("efficiency_d3", 1.0)),
        ),
        dark_rates=(
            float(table.get("dark_cps_d1", 0.0)),
            float(table.get("dark_cps_d2", 0.0)),
            float(table.get("dark_cps_d3", 0.0)),
        ),
        coincidence_window=float(table.get("coincidence_window_ns", 1.0)) * 1e-9,
        seed=seed,
    )


def build_analysis(table: dict) -> AnalysisConfig:
    return AnalysisConfig(
        cutoff_over_pump=float(table.get("cutoff_over_pump", 0.015)),
        savgol_window_um=float(table.get("savgol_window_um", 17.0)),
        savgol_order=int(table.get("savgol_order", 3)),
        sigma1_over_pump=(
            float(table["sigma1_over_pump"]) if "sigma1_over_pump" in table else None
        ),
    )


def build_scenario(config: dict, name: str = "scenario", seed_override: int | None = None) -> Scenario:
    _check_units(config)
    for block in ("source", "sample", "scan"):
        if block not in config:
            raise ConfigError(f"scenario is missing the [{block}] block")
    run_block = config.get("run", {})
    seed = int(seed_override if seed_override is not None else run_block.get("seed", 0))
    source = build_source(config["source"])
    scenario = Scenario(
        source=source,
        sample=build_sample(config["sample"], source),
        plan=build_plan(config["scan"]),
        noise=build_noise(config.get("noise", {}), seed),
        analysis=build_analysis(config.get("analysis", {})),
        runs=int(run_block.get("runs", 1)),
        seed=seed,
        schemes=tuple(run_block.get("schemes", ["cross", "auto"])),
        nodes=int(run_block.get("nodes", 64)),
        name=name,
        raw=config,
    )
    if scenario.runs < 1:
        raise ConfigError("run.runs must be >= 1")
    if not math.isfinite(scenario.plan.span[0]):
        raise ConfigError("invalid scan span")
    return scenario


def load_scenario(path_or_preset: str, seed_override: int | None = None) -> Scenario:
    """Load a scenario TOML from a path, or from the bundled presets when
    the argument names one (e.g. 'proof_of_concept')."""
    path = Path(path_or_preset)
    if path.exists():
        text = path.read_bytes()
        name = path.stem
    else:
        candidate = resources.files("qoctsim.presets").joinpath(f"{path_or_preset}.toml")
        if not candidate.is_file():
            raise ConfigError(
                f"no such scenario file or preset: {path_or_preset!r} "
                f"(presets: {', '.join(available_presets())})"
            )
        text = candidate.read_bytes()
        name = path_or_preset
    try:
        config = tomllib.loads(text.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path_or_preset}: TOML parse error: {exc}") from exc
    return build_scenario(config, name=name, seed_override=seed_override)


def available_presets() -> list[str]:
    out = []
    for entry in resources.files("qoctsim.presets").iterdir():
        if entry.name.endswith(".toml"):
            out.append(entry.name[: -len(".toml")])
    return sorted(out)
