"""System and agent configuration, plus the flat ``key = value`` file format.

Physical quantities are stored in SI/linear units.  dB and dBm fields in a
config file are converted exactly once, in :func:`load_config`.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration input."""


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Deployment geometry and physical constants of one UAV-RIS downlink."""

    area: float = 20.0
    H_BS: float = 10.0
    H_RIS: float = 25.0
    ris_xy: tuple[float, float] | None = None  # None -> centre of the area
    K: int = 3
    user_positions: tuple[tuple[float, float, float], ...] | None = None
    layout_seed: int = 0

    M_y: int = 2
    M_z: int = 2
    N_x: int = 4
    N_y: int = 4
    carrier_hz: float = 2.4e9
    # element spacings in wavelengths
    spacing_bs: float = 0.5
    spacing_ris: float = 0.5

    beta0: float = 1e-3
    a: float = 9.61
    b: float = 0.16
    K_H: float = 10.0
    ris_user_pl_exponent: float = 1.0

    noise_power: float = dbm_to_watts(-102.0)
    bandwidth: float = 20e6
    P_BS_max: float = 500.0
    P_U_max: float | None = None  # None -> P_BS_max / K
    R_min: float = 70e6

    P_sat: float = 2e-3
    c_nl: float = 6400.0
    d_nl: float = 0.003

    sigma_j: float = 0.1
    T: int = 50
    interference_cancellation: bool = True

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        for name in ("M_y", "M_z", "N_x", "N_y", "T"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("area", "carrier_hz", "spacing_bs", "spacing_ris", "bandwidth",
                     "c_nl", "d_nl", "P_sat", "a"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0 < self.beta0 <= 1:
            raise ConfigError("beta0 must lie in (0, 1]")
        if self.P_BS_max < 0 or self.R_min < 0 or self.noise_power <= 0:
            raise ConfigError("P_BS_max and R_min must be >= 0, noise power > 0")
        if self.b < 0 or self.K_H < 0 or self.sigma_j < 0:
            raise ConfigError("b, K_H and sigma_j must be >= 0")
        if self.ris_xy is None:
            object.__setattr__(self, "ris_xy", (self.area / 2, self.area / 2))
        if self.P_U_max is None:
            object.__setattr__(self, "P_U_max", self.P_BS_max / self.K)
        if self.user_positions is None:
            rng = np.random.default_rng(self.layout_seed)
            xy = rng.uniform(0.0, self.area, size=(self.K, 2))
            object.__setattr__(self, "user_positions",
                               tuple((float(x), float(y), 0.0) for x, y in xy))
        else:
            pos = tuple(tuple(float(v) for v in p) for p in self.user_positions)
            if len(pos) != self.K or any(len(p) != 3 for p in pos):
                raise ConfigError(f"expected {self.K} user positions of 3 coordinates")
            object.__setattr__(self, "user_positions", pos)

    @property
    def M(self) -> int:
        return self.M_y * self.M_z

    @property
    def N(self) -> int:
        return self.N_x * self.N_y

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def q_bs(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.H_BS])

    @property
    def q_ris(self) -> np.ndarray:
        return np.array([self.ris_xy[0], self.ris_xy[1], self.H_RIS])

    @property
    def q_users(self) -> np.ndarray:
        return np.array(self.user_positions, dtype=float)

    @property
    def action_dim(self) -> int:
        return 1 + self.K + self.N

    @property
    def state_dim(self) -> int:
        N, M, K = self.N, self.M, self.K
        return 2 * N * M + 2 * N * K + 3 * N + 3 * K + 1 + K + N

    def replace(self, **changes) -> "SystemConfig":
        # user positions are derived from K/layout_seed unless given explicitly
        if ("K" in changes or "layout_seed" in changes) and "user_positions" not in changes:
            changes["user_positions"] = None
        if "K" in changes and "P_U_max" not in changes:
            changes["P_U_max"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ris_xy"] = list(self.ris_xy)
        d["user_positions"] = [list(p) for p in self.user_positions]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        d = dict(d)
        if d.get("ris_xy") is not None:
            d["ris_xy"] = tuple(d["ris_xy"])
        if d.get("user_positions") is not None:
            d["user_positions"] = tuple(tuple(p) for p in d["user_positions"])
        return cls(**d)


@dataclass(frozen=True)
class AgentHyperparams:
    gamma: float = 0.95
    rho: float = 0.005
    sigma_explore: float = 0.1
    sigma_target: float = 0.2
    c_clip: float = 0.5
    beta: float = 10.0
    lambda_ent: float = 1e-3
    batch_size: int = 64
    policy_delay: int = 2
    replay_capacity: int = 100_000
    warmup: int = 1000
    hidden: tuple[int, ...] = (256, 256)
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must lie in [0, 1)")
        if not 0 < self.rho <= 1:
            raise ConfigError("rho must lie in (0, 1]")
        if self.sigma_explore < 0 or self.sigma_target < 0:
            raise ConfigError("noise scales must be >= 0")
        if not self.c_clip > 0:
            raise ConfigError("c_clip must be > 0")
        if not math.isfinite(self.beta):
            raise ConfigError("beta must be finite")
        if self.lambda_ent < 0:
            raise ConfigError("lambda_ent must be >= 0")
        if self.batch_size < 1 or self.policy_delay < 1 or self.replay_capacity < self.batch_size:
            raise ConfigError("batch_size, policy_delay >= 1 and capacity >= batch_size required")
        if self.warmup < 0 or not self.hidden or min(self.hidden) < 1:
            raise ConfigError("warmup >= 0 and positive hidden widths required")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def replace(self, **changes) -> "AgentHyperparams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AgentHyperparams":
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", (256, 256)))
        return cls(**d)


@dataclass(frozen=True)
class ExperimentSettings:
    """Budget and grid knobs of the experiment harness."""

    episodes: int = 300
    eval_seeds: int = 5
    smoothing_window: int = 10
    search_tau_levels: int = 101
    search_power_levels: int = 41
    search_phase_levels: int = 16


@dataclass
class LoadedConfig:
    system: SystemConfig
    hyper: AgentHyperparams
    experiment: ExperimentSettings
    source: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# flat key = value files

REQUIRED_KEYS = ("area", "N", "a", "b", "beta0_db", "sigma_k2_dbm", "P_BS_max",
                 "R_min_mbps", "c", "d")

# file key -> (target, field, converter)
_SYSTEM_KEYS = {
    "area": ("area", float),
    "H_BS": ("H_BS", float),
    "H_RIS": ("H_RIS", float),
    "K": ("K", int),
    "layout_seed": ("layout_seed", int),
    "M_y": ("M_y", int),
    "M_z": ("M_z", int),
    "N_x": ("N_x", int),
    "N_y": ("N_y", int),
    "carrier_ghz": ("carrier_hz", lambda s: float(s) * 1e9),
    "spacing_bs": ("spacing_bs", float),
    "spacing_ris": ("spacing_ris", float),
    "beta0_db": ("beta0", lambda s: db_to_linear(float(s))),
    "a": ("a", float),
    "b": ("b", float),
    "K_H_db": ("K_H", lambda s: db_to_linear(float(s))),
    "ris_user_pl_exponent": ("ris_user_pl_exponent", float),
    "sigma_k2_dbm": ("noise_power", lambda s: dbm_to_watts(float(s))),
    "bandwidth_mhz": ("bandwidth", lambda s: float(s) * 1e6),
    "P_BS_max": ("P_BS_max", float),
    "P_U_max": ("P_U_max", float),
    "R_min_mbps": ("R_min", lambda s: float(s) * 1e6),
    "P_sat": ("P_sat", float),
    "c": ("c_nl", float),
    "d": ("d_nl", float),
    "sigma_j": ("sigma_j", float),
    "T": ("T", int),
    "interference_cancellation": ("interference_cancellation", lambda s: _parse_bool(s)),
}

_HYPER_KEYS = {
    "gamma": float, "rho": float, "sigma_explore": float, "sigma_target": float,
    "c_clip": float, "beta": float, "lambda_ent": float, "batch_size": int,
    "policy_delay": int, "replay_capacity": int, "warmup": int,
    "hidden": lambda s: tuple(int(v) for v in s.split(",")),
    "actor_lr": float, "critic_lr": float,
}

_EXPERIMENT_KEYS = {
    "episodes": int, "eval_seeds": int, "smoothing_window": int,
    "search_tau_levels": int, "search_power_levels": int, "search_phase_levels": int,
}


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_lines(text: str) -> dict[str, tuple[str, int]]:
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} "
                              f"(first set on line {entries[key][1]})")
        entries[key] = (value, lineno)
    return entries


def parse_config(text: str) -> LoadedConfig:
    """Parse the flat config format into resolved configuration objects."""
    entries = _parse_lines(text)
    missing = [k for k in REQUIRED_KEYS if k not in entries]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")

    system_kw: dict = {}
    hyper_kw: dict = {}
    exp_kw: dict = {}
    users: dict[int, tuple[float, float, float]] = {}

    def convert(key, fn):
        value, lineno = entries[key]
        try:
            return fn(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None

    for key, (value, lineno) in entries.items():
        if key in _SYSTEM_KEYS:
            name, fn = _SYSTEM_KEYS[key]
            system_kw[name] = convert(key, fn)
        elif key == "N":
            continue
        elif key in _HYPER_KEYS:
            hyper_kw[key] = convert(key, _HYPER_KEYS[key])
        elif key in _EXPERIMENT_KEYS:
            exp_kw[key] = convert(key, _EXPERIMENT_KEYS[key])
        elif key.startswith("user_") and key[5:].isdigit():
            coords = convert(key, lambda s: tuple(float(v) for v in s.split(",")))
            if len(coords) == 2:
                coords = (*coords, 0.0)
            if len(coords) != 3:
                raise ConfigError(f"line {lineno}: {key} needs 2 or 3 coordinates")
            users[int(key[5:])] = coords
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")

    n_total = convert("N", int)
    if "N_x" not in system_kw and "N_y" not in system_kw:
        side = math.isqrt(n_total)
        if side * side != n_total:
            raise ConfigError(f"line {entries['N'][1]}: N = {n_total} is not square; "
                              "give N_x and N_y explicitly")
        system_kw["N_x"] = system_kw["N_y"] = side
    nx, ny = system_kw.get("N_x", 1), system_kw.get("N_y", 1)
    if nx * ny != n_total:
        raise ConfigError(f"line {entries['N'][1]}: N = {n_total} != N_x * N_y = {nx * ny}")

    if users:
        K = system_kw.get("K", len(users))
        if sorted(users) != list(range(1, K + 1)):
            raise ConfigError(f"user_k keys must cover 1..{K}")
        system_kw["K"] = K
        system_kw["user_positions"] = tuple(users[k] for k in range(1, K + 1))

    try:
        system = SystemConfig(**system_kw)
        hyper = AgentHyperparams(**hyper_kw)
        experiment = ExperimentSettings(**exp_kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return LoadedConfig(system, hyper, experiment, {k: v for k, (v, _) in entries.items()})


def load_config(path: str | Path) -> LoadedConfig:
    """Load a flat config file, or the resolved config stored in a manifest.json."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if path.suffix == ".json":
        try:
            data = json.loads(text)
            return LoadedConfig(
                SystemConfig.from_dict(data["system"]),
                AgentHyperparams.from_dict(data["hyper"]),
                ExperimentSettings(**data.get("experiment", {})),
                {"manifest": str(path)},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: not a valid manifest: {exc}") from None
    return parse_config(text)
