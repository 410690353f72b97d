"""Experiment configuration.

Parameters live in three groups (``system``, ``optimizer``, ``experiment``)
and are addressed from config files with flat dotted keys, e.g.::

    system.num_subcarriers = 16
    optimizer.inner = "pccp"
    experiment.ber_powers_dbm = [-30, -20, -10]

Files are TOML. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class SystemConfig:
    f0: float = 28e9
    bandwidth: float = 40e6
    num_subcarriers: int = 16
    num_users: int = 4
    meta_cols: int = 10
    meta_rows: int = 10
    layers: int = 7
    thickness: float = 0.05
    atom_pitch: float | None = None  # default c / (2 f0)
    atom_area: float | None = None  # default atom_pitch**2
    bs_height: float = 10.0
    user_range: float = 250.0
    user_spacing: float = 30.0
    num_scatterers: int = 100
    scatter_x: tuple = (-45.0, 45.0)
    scatter_y: tuple = (10.0, 240.0)
    scatter_z: tuple = (0.0, 10.0)
    bs_gain_dbi: float = 3.0
    ue_gain_dbi: float = 0.0
    noise_psd_dbm_hz: float = -112.0

    @property
    def num_atoms(self) -> int:
        return self.meta_cols * self.meta_rows

    @property
    def pitch(self) -> float:
        if self.atom_pitch is not None:
            return self.atom_pitch
        return SPEED_OF_LIGHT / (2.0 * self.f0)

    @property
    def area(self) -> float:
        if self.atom_area is not None:
            return self.atom_area
        return self.pitch ** 2

    @property
    def layer_gap(self) -> float:
        return self.thickness / self.layers

    @property
    def noise_power(self) -> float:
        """Per-subcarrier noise power in watts."""
        psd_w = 10.0 ** ((self.noise_psd_dbm_hz - 30.0) / 10.0)
        return psd_w * self.bandwidth / self.num_subcarriers


@dataclass(frozen=True)
class OptimizerConfig:
    ao_iterations: int = 50
    ao_rtol: float = 1e-5
    ao_patience: int = 3
    restarts: int = 1
    inner: str = "cd"  # "cd" or "pccp"
    zstep: str = "milp"  # milp, random, greedy, ofdma, sdma
    cd_sweeps: int = 3
    pccp_lambda0: float = 1e-3
    pccp_growth: float = 2.0
    pccp_lambda_max: float = 1e4
    pccp_tol: float = 1e-6
    pccp_max_iter: int = 200
    alpha_mode: str = "restricted"  # or "unrestricted"
    greedy_threshold: float = 0.1


@dataclass(frozen=True)
class ExperimentSettings:
    seed: int = 0
    runs: int = 100
    schemes: tuple = ()
    nmse_kc: tuple = (4, 6, 8, 10, 12)
    sumrate_kc: tuple = ()  # empty -> N_c/K .. N_c
    sumrate_power_dbm: float = 10.0
    ber_kc: int = 10
    single_kc: int = 10
    ber_powers_dbm: tuple = (-40.0, -35.0, -30.0, -25.0, -20.0, -15.0, -10.0, -5.0, 0.0)
    ber_symbols: int = 2000
    waterfill_iterations: int = 20
    threads: int = 1
    out_dir: str = "results"


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)

    def to_flat(self) -> dict:
        flat = {}
        for group in ("system", "optimizer", "experiment"):
            for key, value in dataclasses.asdict(getattr(self, group)).items():
                flat[f"{group}.{key}"] = list(value) if isinstance(value, tuple) else value
        return flat

    def config_hash(self) -> str:
        blob = json.dumps(self.to_flat(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        return apply_overrides(self, overrides)

    def validate(self) -> None:
        s = self.system
        if s.num_subcarriers < 1 or s.bandwidth <= 0 or s.f0 <= 0:
            raise ConfigError("need num_subcarriers >= 1, bandwidth > 0, f0 > 0")
        if s.num_users < 1 or s.meta_cols < 1 or s.meta_rows < 1 or s.layers < 1:
            raise ConfigError("users, atom grid and layer counts must be positive")
        if min(s.thickness, s.pitch, s.area, s.user_range, s.bs_height) <= 0:
            raise ConfigError("geometric lengths must be positive")
        if s.num_users > 1 and s.user_spacing <= 0:
            raise ConfigError("user_spacing must be positive")
        o = self.optimizer
        if o.inner not in ("cd", "pccp"):
            raise ConfigError(f"optimizer.inner must be 'cd' or 'pccp', got {o.inner!r}")
        if o.zstep not in ZSTEPS:
            raise ConfigError(f"optimizer.zstep must be one of {ZSTEPS}, got {o.zstep!r}")
        if o.alpha_mode not in ("restricted", "unrestricted"):
            raise ConfigError("optimizer.alpha_mode must be 'restricted' or 'unrestricted'")
        if o.ao_iterations < 1 or o.restarts < 1 or o.cd_sweeps < 1:
            raise ConfigError("iteration budgets must be >= 1")
        unknown = set(self.experiment.schemes) - set(SCHEMES)
        if unknown:
            raise ConfigError(f"unknown schemes {sorted(unknown)}")
        if self.experiment.runs < 1 or self.experiment.ber_symbols < 1:
            raise ConfigError("experiment.runs and experiment.ber_symbols must be >= 1")


ZSTEPS = ("milp", "random", "greedy", "ofdma", "sdma")
SCHEMES = ("joint", "greedy", "random", "sim-sdma", "sim-ofdma", "digital-zf")

PROFILES = {
    "paper": {},
    "desk": {
        "system.meta_cols": 4,
        "system.meta_rows": 4,
        "system.layers": 3,
        "experiment.runs": 10,
    },
}


def _coerce(current, value, key):
    if isinstance(current, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list")
        return tuple(value)
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean")
        return value
    if isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{key}: expected an integer")
        return value
    if isinstance(current, float) or current is None:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number")
        return float(value)
    if isinstance(current, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        return value
    raise ConfigError(f"{key}: unsupported type")


def apply_overrides(config: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    groups = {
        "system": dict(dataclasses.asdict(config.system)),
        "optimizer": dict(dataclasses.asdict(config.optimizer)),
        "experiment": dict(dataclasses.asdict(config.experiment)),
    }
    for key, value in overrides.items():
        group, _, name = key.partition(".")
        if group not in groups or name not in groups[group]:
            raise ConfigError(f"unknown config key {key!r}")
        current = getattr(getattr(config, group), name)
        groups[group][name] = _coerce(current, value, key)
    # asdict turns tuples into tuples already; rebuild frozen dataclasses
    new = ExperimentConfig(
        system=SystemConfig(**groups["system"]),
        optimizer=OptimizerConfig(**groups["optimizer"]),
        experiment=ExperimentSettings(**groups["experiment"]),
    )
    new.validate()
    return new


def _flatten(table, prefix=""):
    out = {}
    for key, value in table.items():
        full = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, full + "."))
        else:
            out[full] = value
    return out


def load_config(path=None, profile: str = "paper") -> ExperimentConfig:
    """Build a config from a profile plus an optional TOML file of overrides."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    config = apply_overrides(ExperimentConfig(), PROFILES[profile])
    if path is not None:
        try:
            with open(Path(path), "rb") as fh:
                table = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        config = apply_overrides(config, _flatten(table))
    return config
