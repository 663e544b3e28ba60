"""Flat key = value experiment configuration.

One ``key = value`` pair per line, ``#`` starts a comment, list values are
comma separated. :func:`validate_config` reports every problem at once and
fills defaults, remembering which keys were defaulted.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import ConfigError

EXPERIMENTS = ("scaling", "grouping-compare", "ccdf", "largesystem", "fractions", "prob-sched")
POLICY_NAMES = ("gbf-all", "gbf-max", "zfbf-sus", "zfbf-gus", "prob")
REQUIRED = ("experiment", "seed", "M")


def _int(v: str) -> int:
    return int(v)


def _float(v: str) -> float:
    return float(v)


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _list(conv):
    def parse(v: str):
        items = [x.strip() for x in v.split(",") if x.strip()]
        if not items:
            raise ValueError("empty list")
        return [conv(x) for x in items]
    return parse


def _str(v: str) -> str:
    return v.strip()


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], Any]
    check: Optional[Callable[[Any], Optional[str]]] = None


def _range(lo=None, hi=None, lo_open=False, hi_open=False):
    def check(value):
        values = value if isinstance(value, list) else [value]
        for x in values:
            if lo is not None and (x < lo or (lo_open and x == lo)):
                return f"{x} below {'(' if lo_open else '['}{lo}"
            if hi is not None and (x > hi or (hi_open and x == hi)):
                return f"{x} above {hi}{')' if hi_open else ']'}"
        return None
    return check


def _choices(options):
    def check(value):
        values = value if isinstance(value, list) else [value]
        bad = [x for x in values if x not in options]
        return f"unsupported value(s) {bad}; choose from {list(options)}" if bad else None
    return check


def _interval(lo, hi):
    def check(value):
        if len(value) != 2 or not value[0] < value[1]:
            return "needs two increasing values"
        return _range(lo, hi, True, True)(value)
    return check


SCHEMA: dict[str, _Key] = {
    "experiment": _Key(_str, _choices(EXPERIMENTS)),
    "seed": _Key(_int, _range(0)),
    "M": _Key(_int, _range(1)),
    "trials": _Key(_int, _range(1)),
    "N": _Key(_int, _range(1)),
    "N_values": _Key(_list(_int), _range(1)),
    "D": _Key(_float, _range(0, 0.5, lo_open=True)),
    "G": _Key(_int, _range(1)),
    "K": _Key(_list(_int), _range(1)),
    "kprime": _Key(_list(_int), _range(2)),
    "P_dB": _Key(_list(_float), _range(-50, 60)),
    "theta_range": _Key(_list(_float), _interval(-90, 90)),
    "delta_range": _Key(_list(_float), _interval(0, 45)),
    "population_file": _Key(_str),
    "pattern_mode": _Key(_str, _choices(("alternating", "maxmin"))),
    "pattern": _Key(_int, _choices((1, 2))),
    "grouping": _Key(_list(_str), _choices(("dft", "sector", "kmeans"))),
    "policies": _Key(_list(_str), _choices(POLICY_NAMES)),
    "eta": _Key(_float, _range(0, 1, lo_open=True)),
    "eps": _Key(_float, _range(0, lo_open=True)),
    "alpha": _Key(_float, _range(0, 1, lo_open=True)),
    "delta_gamma": _Key(_float, _range(0, 0.1, lo_open=True)),
    "eps_floor": _Key(_float, _range(0, lo_open=True)),
    "max_iter": _Key(_int, _range(1)),
    "restarts": _Key(_int, _range(1)),
    "rank": _Key(_int, _range(1)),
    "group_theta_deg": _Key(_list(_float), _range(-90, 90, True, True)),
    "group_delta_deg": _Key(_float, _range(0, 45, lo_open=True)),
    "sector_theta_deg": _Key(_list(_float), _range(-90, 90, True, True)),
    "sector_delta_deg": _Key(_float, _range(0, 45, lo_open=True)),
    "subgroups": _Key(_int, _range(1)),
    "utility": _Key(_list(_str), _choices(("pfs", "sumrate"))),
    "with_stop": _Key(_bool),
    "x_grid": _Key(_list(_float), _range(0)),
    "mc_draws": _Key(_int, _range(2)),
    "nodes": _Key(_int, _range(16)),
    "covariance": _Key(_list(_str), _choices(("dft", "one-ring"))),
    "layout": _Key(_str, _choices(("centered", "random"))),
    "load": _Key(_float, _range(0, 1, lo_open=True)),
}

_COMMON_DEFAULTS = {
    "N": 1, "D": 0.5, "P_dB": [10.0], "theta_range": [-60.0, 60.0], "delta_range": [5.0, 15.0],
    "eta": 0.95, "eps": 1e-3, "alpha": 0.3, "delta_gamma": 0.01, "eps_floor": 1e-12,
    "max_iter": 100, "restarts": 5, "pattern_mode": "alternating", "pattern": 1,
}

_EXPERIMENT_DEFAULTS = {
    "scaling": {"trials": 200, "G": 2, "rank": 3, "group_theta_deg": [-30.0, 30.0], "group_delta_deg": 10.0,
                "kprime": [32, 64, 128, 256, 512, 1024, 2048, 4096], "policies": ["gbf-all"]},
    "grouping-compare": {"trials": 500, "G": 8, "K": [50, 100, 200, 400, 600, 800, 1000],
                         "policies": ["zfbf-sus", "gbf-all", "gbf-max"], "grouping": ["dft"],
                         "sector_theta_deg": [-57.5, -41.5, -23.0, -7.5, 7.5, 23.5, 41.5, 57.5],
                         "sector_delta_deg": 12.0},
    "ccdf": {"trials": 1, "G": 2, "group_theta_deg": [-20.0, 25.0], "group_delta_deg": 10.0,
             "x_grid": [0.5, 1.0, 2.0, 4.0], "mc_draws": 200000},
    "largesystem": {"trials": 1, "G": 4, "N_values": [8, 16, 32], "nodes": 2048, "covariance": ["one-ring", "dft"],
                    "layout": "centered", "load": 0.3, "group_delta_deg": 10.0, "subgroups": 4},
    "fractions": {"trials": 1, "G": 4, "subgroups": 16, "utility": ["pfs", "sumrate"], "with_stop": True,
                  "nodes": 2048},
    "prob-sched": {"trials": 300, "G": 4, "subgroups": 48, "N_values": [1, 2], "utility": ["pfs"],
                   "delta_gamma": 0.1, "with_stop": True, "nodes": 2048, "policies": ["prob"]},
}


@dataclass
class ValidationResult:
    config: dict
    errors: list = field(default_factory=list)
    defaulted: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def parse_lines(text: str) -> tuple[dict, list]:
    raw, errors = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key in raw:
            errors.append(f"line {lineno}: duplicate key '{key}'")
            continue
        raw[key] = value
    return raw, errors


def validate_text(text: str, overrides: Optional[dict] = None) -> ValidationResult:
    """Validate configuration text; ``overrides`` (already typed) win over the file."""
    raw, errors = parse_lines(text)
    config: dict = {}
    for key, value in raw.items():
        spec = SCHEMA.get(key)
        if spec is None:
            errors.append(f"unknown key '{key}'")
            continue
        try:
            parsed = spec.parse(value)
        except ValueError as exc:
            errors.append(f"key '{key}': cannot parse {value!r} ({exc})")
            continue
        config[key] = parsed
    for key, value in (overrides or {}).items():
        if value is not None:
            config[key] = value
    for key, value in list(config.items()):
        check = SCHEMA[key].check
        problem = check(value) if check else None
        if problem:
            errors.append(f"key '{key}': {problem}")
    for key in REQUIRED:
        if key not in config:
            errors.append(f"missing required key '{key}'")
    defaulted = []
    defaults = dict(_COMMON_DEFAULTS)
    defaults.update(_EXPERIMENT_DEFAULTS.get(config.get("experiment"), {}))
    if config.get("experiment") == "grouping-compare" and "M" in config:
        defaults.setdefault("rank", max(1, config["M"] // 4))
    for key, value in defaults.items():
        if key not in config:
            config[key] = value
            defaulted.append(key)
    return ValidationResult(config=config, errors=errors, defaulted=sorted(defaulted))


def validate_config(path, overrides: Optional[dict] = None) -> ValidationResult:
    """Read and validate a configuration file. Missing files are reported as an error."""
    path = Path(path)
    if not path.is_file():
        return ValidationResult(config={}, errors=[f"config file not found: {path}"])
    return validate_text(path.read_text(), overrides)


def load_config(path, overrides: Optional[dict] = None) -> ValidationResult:
    result = validate_config(path, overrides)
    if result.errors:
        raise ConfigError(result.errors)
    return result


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form of a normalized configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
