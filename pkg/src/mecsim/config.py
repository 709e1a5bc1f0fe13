"""Experiment configuration: TOML in, fully resolved and validated dict out."""
from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, field
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .orchestration import IMAGE_BITS
from .strategies import StrategyKind

CASES = {"cache": "cache", "orchestrate": "orchestration", "interference": "interference"}

DEFAULTS: dict[str, dict[str, Any]] = {
    "cache": {
        "n_bs": 5,
        "n_videos": 1000,
        "alpha": 0.8,
        "original_bitrate_mbps": 2.0,
        "duration_s": 600.0,
        "variant_ratios": [0.82, 0.67, 0.55, 0.45],
        "variant_dist": "uniform",
        "cache_fraction": 0.3,
        "processing_capacity_mbps": 40.0,
        "arrival_rate": 2.0,
        "horizon_s": 86400.0,
        "warmup_s": 3600.0,
        "strategies": [s.value for s in StrategyKind],
        "load_costing": "input",
        "reactive": False,
    },
    "orchestration": {
        "n_tasks": 20,
        "input_bits_per_task": float(IMAGE_BITS),
        "work_per_task": 30.0,
        "mu": 100.0,
        "sigma": 5.0,
        "link_mbps": 1.0,
        "k": 2,
        "seeds": 100,
        "target_gain": 0.40,
        "mdc_host": True,
        "inventory": {
            "local_speed": 1.0,
            "n_peers": 4,
            "peer_speed": 1.0,
            "n_servers": 2,
            "server_speed": 8.0,
            "relay_overhead_s": "auto",
        },
    },
    "interference": {
        "hex_rings": 1,
        "bs_positions": "hex",
        "cell_radius": 100.0,
        "radius_fraction": 0.8,
        "cqi_threshold_db": 3.0,
        "pathloss_exponent": 3.5,
        "noise_dbm": -100.0,
        "tx_power_dbm": 23.0,
        "raw_rate_mbps": 30.0,
        "n_snapshots": 1000,
        "mode": "cqi",
        "residual": 0.0,
    },
}

# keys whose value may be a keyword instead of the default's type
_KEYWORDS = {"variant_dist": ("uniform",), "bs_positions": ("hex",), "relay_overhead_s": ("auto",)}
_CHOICES = {"load_costing": ("input", "output"), "mode": ("cqi", "geometric")}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ExperimentConfig:
    case: str
    seed: int
    block: dict[str, Any]
    sweep: tuple[str, list] | None = None
    extra: dict[str, dict] = field(default_factory=dict)

    @property
    def block_name(self) -> str:
        return CASES[self.case]

    def resolved(self) -> dict[str, Any]:
        out: dict[str, Any] = {"case": self.case, "seed": self.seed, self.block_name: self.block}
        if self.sweep:
            out["sweep"] = {"parameter": self.sweep[0], "values": self.sweep[1]}
        return out


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _check_value(key: str, value, default):
    name = key.rsplit(".", 1)[-1]
    if isinstance(value, str) and value in _KEYWORDS.get(name, ()):
        return value
    if name in _CHOICES:
        if value not in _CHOICES[name]:
            raise ConfigError(key, f"expected one of {', '.join(_CHOICES[name])}, got {value!r}")
        return value
    if name == "strategies":
        if not isinstance(value, list) or not value:
            raise ConfigError(key, "expected a non-empty list of strategy names")
        for token in value:
            try:
                StrategyKind.parse(token)
            except ValueError as exc:
                raise ConfigError(key, str(exc)) from None
        if len(set(value)) != len(value):
            raise ConfigError(key, "duplicate strategy")
        return list(value)
    if name == "variant_dist" or name == "variant_ratios":
        if not isinstance(value, list) or not all(_is_number(x) for x in value):
            raise ConfigError(key, "expected a list of numbers")
        return [float(x) for x in value]
    if name == "bs_positions":
        if not isinstance(value, list) or not all(
                isinstance(p, list) and len(p) == 2 and all(_is_number(c) for c in p) for p in value):
            raise ConfigError(key, 'expected "hex" or a list of [x, y] pairs')
        return [[float(c) for c in p] for p in value]
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, "expected true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, "expected an integer")
        return value
    if isinstance(default, float) or (isinstance(default, str) and name in _KEYWORDS):
        if not _is_number(value) or math.isnan(value):
            raise ConfigError(key, "expected a number")
        return float(value)
    raise ConfigError(key, f"unsupported value {value!r}")  # pragma: no cover


def _merge(prefix: str, raw: dict, defaults: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(prefix, "expected a table")
    out = copy.deepcopy(defaults)
    for key, value in raw.items():
        path = f"{prefix}.{key}"
        if key not in defaults:
            raise ConfigError(path, "unknown key")
        if isinstance(defaults[key], dict):
            out[key] = _merge(path, value, defaults[key])
        else:
            out[key] = _check_value(path, value, defaults[key])
    return out


def _check_ranges(case: str, block: dict) -> None:
    def need(cond: bool, key: str, msg: str):
        if not cond:
            raise ConfigError(f"{CASES[case]}.{key}", msg)

    if case == "cache":
        for k in ("n_bs", "n_videos"):
            need(block[k] >= 1, k, "must be >= 1")
        for k in ("original_bitrate_mbps", "duration_s", "horizon_s"):
            need(block[k] > 0, k, "must be positive")
        for k in ("alpha", "cache_fraction", "processing_capacity_mbps", "arrival_rate", "warmup_s"):
            need(block[k] >= 0, k, "must be non-negative")
        need(block["warmup_s"] < block["horizon_s"], "warmup_s", "must be shorter than horizon_s")
        if isinstance(block["variant_dist"], list):
            dist = block["variant_dist"]
            need(len(dist) == len(block["variant_ratios"]), "variant_dist", "needs one weight per variant")
            need(all(x >= 0 for x in dist) and abs(sum(dist) - 1.0) <= 1e-9, "variant_dist", "must sum to 1")
    elif case == "orchestrate":
        for k in ("n_tasks", "k", "seeds"):
            need(block[k] >= 1, k, "must be >= 1")
        for k in ("input_bits_per_task", "work_per_task", "link_mbps"):
            need(block[k] > 0, k, "must be positive")
        need(block["sigma"] >= 0, "sigma", "must be non-negative")
        inv = block["inventory"]
        need(inv["n_peers"] >= 1, "inventory.n_peers", "must be >= 1")
        need(1 <= block["k"] <= inv["n_servers"], "k", "must not exceed inventory.n_servers")
    elif case == "interference":
        need(block["cell_radius"] > 0, "cell_radius", "must be positive")
        need(block["radius_fraction"] >= 0, "radius_fraction", "must be non-negative")
        need(block["pathloss_exponent"] > 2, "pathloss_exponent", "must exceed 2")
        need(block["n_snapshots"] >= 1, "n_snapshots", "must be >= 1")
        need(block["hex_rings"] >= 0, "hex_rings", "must be non-negative")
        need(0.0 <= block["residual"] <= 1.0, "residual", "must be in [0, 1]")


def validate_config(raw_text: str, seed_override: int | None = None) -> ExperimentConfig:
    """Parse TOML text, reject unknown keys, fill defaults and check ranges."""
    try:
        raw = tomllib.loads(raw_text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"not valid TOML ({exc})") from None

    allowed = {"case", "seed", "sweep", *CASES.values()}
    for key in raw:
        if key not in allowed:
            raise ConfigError(key, "unknown key")
    case = raw.get("case")
    if case not in CASES:
        raise ConfigError("case", f"expected one of {', '.join(CASES)}, got {case!r}")
    seed = seed_override if seed_override is not None else raw.get("seed")
    if seed is None:
        raise ConfigError("seed", "missing (a seed is mandatory)")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "expected a non-negative integer")

    blocks = {}
    for name in CASES.values():
        if name in raw:
            blocks[name] = _merge(name, raw[name], DEFAULTS[name])
    block_name = CASES[case]
    block = blocks.pop(block_name, None) or copy.deepcopy(DEFAULTS[block_name])
    _check_ranges(case, block)

    sweep = None
    if "sweep" in raw:
        spec = raw["sweep"]
        if not isinstance(spec, dict):
            raise ConfigError("sweep", "expected a table with parameter and values")
        for key in spec:
            if key not in ("parameter", "values"):
                raise ConfigError(f"sweep.{key}", "unknown key")
        param = spec.get("parameter")
        values = spec.get("values")
        if not isinstance(param, str):
            raise ConfigError("sweep.parameter", "missing")
        if param not in block or isinstance(block[param], dict):
            raise ConfigError("sweep.parameter", f"{param!r} is not a key of the {block_name} block")
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep.values", "expected a non-empty list")
        checked = [_check_value(f"sweep.values.{param}", v, DEFAULTS[block_name][param]) for v in values]
        for v in checked:
            _check_ranges(case, {**block, param: v})
        sweep = (param, checked)

    return ExperimentConfig(case=case, seed=seed, block=block, sweep=sweep, extra=blocks)
