"""Scenario configuration and its YAML file format.

The file is a flat mapping whose keys are exactly the :class:`ScenarioConfig`
field names; unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigError

MODES = ("fd_isac", "hd_isac", "ideal_fd")
MODE_ALIASES = {"fd": "fd_isac", "hd": "hd_isac", "ideal": "ideal_fd"}
FALLBACKS = ("previous", "transmit")
REFLECTION_MODELS = ("radar", "fixed")


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    # waveform (5G NR FR2 numerology)
    carrier_hz: float = 28e9
    bandwidth_hz: float = 100e6
    subframe_duration: float = 1e-3
    n_symbols: int = 14
    n_subcarriers: int = 792
    subcarrier_spacing: float = 120e3
    # power levels
    tx_power_dbm: float = 30.0
    noise_floor_dbm: float = -90.0
    rf_saturation_dbm: float = -30.0
    # documentation only; they motivate rf_saturation_dbm
    adc_bits: int = 14
    papr_db: float = 10.0
    dynamic_range_db: float = 60.0
    # arrays and streams
    n_tx: int = 128
    n_rx: int = 128
    n_rf_tx: int = 8
    n_rf_rx: int = 8
    n_tx_sub: int = 16
    n_rx_sub: int = 16
    n_users: int = 2
    n_user_antennas: int = 2
    n_targets: int = 4
    codebook_bits: int = 5
    element_spacing_wavelengths: float = 0.5
    distinct_beams: bool = True
    # self-interference
    si_separation: float = 5e-3
    si_isolation_db: float = 0.0
    n_taps: int = 16
    canceller_error_db: Optional[float] = None
    saturation_fallback: str = "previous"
    # scene
    doa_sector_deg: tuple = (-60.0, 60.0)
    min_range: float = 10.0
    max_range: float = 80.0
    reflection_model: str = "fixed"
    fixed_reflection_db: float = -74.0
    reflectivity: float = 16384.0
    pathloss_db: float = 100.0
    velocity: float = 0.0
    doa_step_deg: Optional[float] = None
    # estimation
    grid_step_deg: float = 0.01
    music_normalized: bool = True
    search_margin_deg: float = 5.0
    initial_prior_error_deg: float = 1.0
    # protocol
    mode: str = "fd_isac"
    hd_dl_fraction: float = 0.5
    n_subframes: int = 20
    seed: int = 0
    simulate_radar: bool = True

    def __post_init__(self):
        mode = MODE_ALIASES.get(self.mode, self.mode)
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "doa_sector_deg", tuple(float(v) for v in self.doa_sector_deg))

    @property
    def tx_power_mw(self) -> float:
        return dbm_to_mw(self.tx_power_dbm)

    @property
    def noise_mw(self) -> float:
        return dbm_to_mw(self.noise_floor_dbm)

    @property
    def rho_b_mw(self) -> float:
        return dbm_to_mw(self.rf_saturation_dbm)

    def validate(self) -> "ScenarioConfig":
        """Raise :class:`ConfigError` listing every violated invariant."""
        problems = []
        if self.n_tx != self.n_rf_tx * self.n_tx_sub:
            problems.append(f"n_tx ({self.n_tx}) != n_rf_tx * n_tx_sub ({self.n_rf_tx * self.n_tx_sub})")
        if self.n_rx != self.n_rf_rx * self.n_rx_sub:
            problems.append(f"n_rx ({self.n_rx}) != n_rf_rx * n_rx_sub ({self.n_rf_rx * self.n_rx_sub})")
        if self.n_users * self.n_user_antennas > self.n_rf_tx:
            problems.append("n_users * n_user_antennas exceeds n_rf_tx")
        if not 1 <= self.n_targets < self.n_rf_rx:
            problems.append(f"need 1 <= n_targets < n_rf_rx, got {self.n_targets}")
        if self.n_users > self.n_targets:
            problems.append("n_users exceeds n_targets (each user needs a DL scatterer)")
        if not 0 <= self.n_taps <= self.n_rf_tx * self.n_rf_rx:
            problems.append(f"n_taps must lie in [0, {self.n_rf_tx * self.n_rf_rx}]")
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.saturation_fallback not in FALLBACKS:
            problems.append(f"saturation_fallback must be one of {FALLBACKS}")
        if self.reflection_model not in REFLECTION_MODELS:
            problems.append(f"reflection_model must be one of {REFLECTION_MODELS}")
        if self.si_isolation_db < 0:
            problems.append("si_isolation_db must be >= 0")
        if not 0 < self.hd_dl_fraction < 1:
            problems.append("hd_dl_fraction must lie in (0, 1)")
        if not 0 < self.min_range <= self.max_range:
            problems.append("need 0 < min_range <= max_range")
        if self.doa_sector_deg[0] >= self.doa_sector_deg[1]:
            problems.append("doa_sector_deg must be increasing")
        for name in ("n_symbols", "n_subcarriers", "n_subframes", "codebook_bits"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        for name in ("carrier_hz", "subcarrier_spacing", "subframe_duration", "si_separation",
                     "element_spacing_wavelengths", "grid_step_deg", "reflectivity"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0")
        if self.initial_prior_error_deg < 0:
            problems.append("initial_prior_error_deg must be >= 0")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["doa_sector_deg"] = list(self.doa_sector_deg)
        return out


FIELD_NAMES = tuple(f.name for f in dataclasses.fields(ScenarioConfig))


def config_from_mapping(data: dict) -> ScenarioConfig:
    unknown = sorted(set(data) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    types = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}
    kwargs = {}
    for key, value in data.items():
        default = getattr(ScenarioConfig, key)
        if value is not None and isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{key} must be a boolean")
        elif value is not None and isinstance(default, int) and not isinstance(default, bool):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{key} must be an integer ({types[key]})")
        elif value is not None and isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key} must be a number")
            value = float(value)
        kwargs[key] = value
    return ScenarioConfig(**kwargs)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a key-value mapping at top level")
    return config_from_mapping(data)


def dump_config(config: ScenarioConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=False), encoding="utf-8")
