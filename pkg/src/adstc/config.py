"""Experiment configuration: YAML files with nested sections.

A configuration is validated against :data:`SCHEMA`.  Unknown keys and
wrongly typed values raise :class:`ConfigError` naming the dotted key.
With ``scenario: table2`` every omitted key takes its default; with
``scenario: custom`` the physical sections (path loss, geometry, link
SNRs) must be given in full.

A CSV written by the CLI embeds its resolved configuration in a
``# config: {...}`` provenance line, so a result file can be passed back
as ``--config`` to reproduce it.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import yaml

__all__ = ["ConfigError", "SCHEMA", "POLICY_NAMES", "default_config", "load_config",
           "resolve_config", "config_from_csv", "get"]

POLICY_NAMES = ("full", "onoff", "onoff-xi", "piecewise", "df", "hybrid")

_NUM = "number"
_OPT_NUM = "number?"
_NUMS = "numbers"
_OPT_NUMS = "numbers?"
_INT = "int"
_STR = "str"
_BOOL = "bool"
_POLICIES = "policies"

# key -> (kind, table2 default).  Nested dicts are sections.
SCHEMA = {
    "scenario": (_STR, "table2"),
    "seed": (_INT, 20080319),
    "trials": (_INT, 100_000),
    "workers": (_INT, 1),
    "pathloss": {
        "carrier_mhz": (_NUM, 2400.0),
        "d0_m": (_NUM, 100.0),
        "a": (_NUM, 4.0),
        "b": (_NUM, 0.0065),
        "c": (_NUM, 17.1),
        "distances_m": (_OPT_NUMS, None),
        "hop": (_STR, "sr"),
    },
    "geometry": {
        "d_sr1_m": (_NUM, 5000.0),
        "d_sr2_m": (_NUM, 8000.0),
        "d_r1d_m": (_NUM, 2000.0),
        "d_r2d_m": (_NUM, 1000.0),
        "h_bs_m": (_NUM, 32.0),
        "h_rs_m": (_NUM, 15.0),
        "h_ms_m": (_NUM, 1.5),
    },
    "link": {
        "snr_sr_db": (_NUM, 25.0),
        "snr_rd_db": (_NUM, 40.0),
        "snr_sr2_db": (_OPT_NUM, None),
        "snr_rd2_db": (_OPT_NUM, None),
        "gamma_t_db": (_NUM, 10.0),
    },
    "policy": {
        "names": (_POLICIES, ["onoff-xi", "full"]),
        "threshold_db": (_NUM, -20.0),
        "tau1_db": (_NUM, -25.0),
        "tau2_db": (_NUM, -15.0),
        "t2_db": (_OPT_NUM, None),
    },
    "outage": {
        "gamma_t_db": (_NUMS, [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]),
        "method": (_STR, "mc"),
        "tol": (_NUM, 1e-6),
    },
    "ber": {
        "snr_rd_db": (_NUMS, [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]),
        "constellation": (_STR, "bpsk"),
        "estimation_error": (_BOOL, False),
    },
    "optimize": {
        "gamma_t_db": (_NUMS, [0.0, 10.0, 20.0, 30.0]),
        "snr_rd_db": (_NUMS, [0.0, 10.0, 20.0, 30.0, 40.0]),
        "grid_db": (_NUMS, [-30.0 + 2.5 * k for k in range(17)]),
    },
    "sweep": {
        "variable": (_STR, "gamma_t_db"),
        "grid": (_NUMS, [0.0, 10.0, 20.0, 30.0]),
        "metric": (_STR, "outage"),
    },
}

# Sections a custom scenario must spell out completely, bar these keys.
_CUSTOM_REQUIRED = ("pathloss", "geometry", "link")
_CUSTOM_OPTIONAL = {"pathloss.distances_m", "pathloss.hop", "link.snr_sr2_db",
                    "link.snr_rd2_db"}

_CHOICES = {
    "scenario": ("table2", "custom"),
    "pathloss.hop": ("sr", "rd"),
    "outage.method": ("mc", "asymptotic"),
    "ber.constellation": ("bpsk", "qpsk"),
    "sweep.variable": ("gamma_t_db", "snr_rd_db", "snr_sr_db"),
    "sweep.metric": ("outage", "ber"),
}

_POSITIVE = ("trials", "workers", "pathloss.carrier_mhz", "pathloss.d0_m",
             "geometry.d_sr1_m", "geometry.d_sr2_m", "geometry.d_r1d_m", "geometry.d_r2d_m",
             "geometry.h_bs_m", "geometry.h_rs_m", "geometry.h_ms_m")


class ConfigError(ValueError):
    """Schema violation; the message names the offending key."""


def _defaults(schema):
    return {k: _defaults(v) if isinstance(v, dict) else copy.deepcopy(v[1])
            for k, v in schema.items()}


def default_config() -> dict:
    """The table2 scenario with every key at its default."""
    return _defaults(SCHEMA)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _coerce(key: str, kind: str, value):
    if kind.endswith("?"):
        if value is None:
            return None
        kind = kind[:-1]
    if value is None:
        raise ConfigError(f"missing value for '{key}'")
    if kind == _NUM:
        if not _is_number(value):
            raise ConfigError(f"'{key}' must be a number, got {value!r}")
        return float(value)
    if kind == _INT:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"'{key}' must be an integer, got {value!r}")
        return value
    if kind == _STR:
        if not isinstance(value, str):
            raise ConfigError(f"'{key}' must be a string, got {value!r}")
        return value
    if kind == _BOOL:
        if not isinstance(value, bool):
            raise ConfigError(f"'{key}' must be true or false, got {value!r}")
        return value
    if kind == _NUMS:
        if _is_number(value):
            value = [value]
        if not isinstance(value, list) or not value or not all(map(_is_number, value)):
            raise ConfigError(f"'{key}' must be a nonempty list of numbers")
        return [float(v) for v in value]
    if kind == _POLICIES:
        if isinstance(value, str):
            value = [value]
        if not isinstance(value, list) or not value:
            raise ConfigError(f"'{key}' must be a nonempty list of policy names")
        for v in value:
            if v not in POLICY_NAMES:
                raise ConfigError(f"'{key}': unknown policy {v!r}; expected one of "
                                  f"{', '.join(POLICY_NAMES)}")
        return list(value)
    raise AssertionError(kind)


def _merge(schema, defaults, given, prefix, required):
    if not isinstance(given, dict):
        raise ConfigError(f"'{prefix.rstrip('.') or '<root>'}' must be a mapping")
    for key in given:
        if key not in schema:
            raise ConfigError(f"unknown key '{prefix}{key}'")
    out = {}
    for key, spec in schema.items():
        name = prefix + key
        if isinstance(spec, dict):
            sub_required = required or (not prefix and key in _required_sections(given))
            out[key] = _merge(spec, defaults[key], given.get(key, {}), name + ".",
                              sub_required)
            continue
        if key in given:
            out[key] = _coerce(name, spec[0], given[key])
        elif required and name not in _CUSTOM_OPTIONAL:
            raise ConfigError(f"missing required key '{name}'")
        else:
            out[key] = copy.deepcopy(defaults[key])
    return out


def _required_sections(given: dict) -> tuple:
    return _CUSTOM_REQUIRED if given.get("scenario") == "custom" else ()


def _lookup(cfg, dotted):
    node = cfg
    for part in dotted.split("."):
        node = node[part]
    return node


def _validate(cfg: dict) -> None:
    for key, options in _CHOICES.items():
        if _lookup(cfg, key) not in options:
            raise ConfigError(f"'{key}' must be one of {', '.join(options)}, "
                              f"got {_lookup(cfg, key)!r}")
    for key in _POSITIVE:
        if not _lookup(cfg, key) > 0:
            raise ConfigError(f"'{key}' must be positive")
    if not 0 <= cfg["seed"] < 2 ** 64:
        raise ConfigError("'seed' must be an unsigned 64-bit integer")
    if not cfg["policy"]["tau1_db"] < cfg["policy"]["tau2_db"]:
        raise ConfigError("'policy.tau1_db' must be below 'policy.tau2_db'")
    t2 = cfg["policy"]["t2_db"]
    if t2 is not None and t2 < cfg["policy"]["threshold_db"]:
        raise ConfigError("'policy.t2_db' must not be below 'policy.threshold_db'")
    dists = cfg["pathloss"]["distances_m"]
    if dists is not None and not all(d > 0 for d in dists):
        raise ConfigError("'pathloss.distances_m' must be positive")


def resolve_config(given: dict | None = None, overrides: dict | None = None) -> dict:
    """Validate `given`, fill defaults, then apply dotted-key `overrides`."""
    given = {} if given is None else given
    cfg = _merge(SCHEMA, default_config(), given, "", False)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        *parents, leaf = dotted.split(".")
        node, spec = cfg, SCHEMA
        for p in parents:
            node, spec = node[p], spec[p]
        node[leaf] = _coerce(dotted, spec[leaf][0], value)
    _validate(cfg)
    return cfg


def config_from_csv(text: str) -> dict | None:
    """Resolved configuration embedded in a CSV provenance header, if any."""
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        body = line[1:].strip()
        if body.startswith("config:"):
            return json.loads(body[len("config:"):])
    return None


def load_config(path: str | Path | None, overrides: dict | None = None) -> dict:
    """Read a YAML file (or a CSV written by the CLI) and resolve it."""
    given = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
        embedded = config_from_csv(text)
        if embedded is not None:
            given = embedded
        else:
            try:
                given = yaml.safe_load(text)
            except yaml.YAMLError as exc:
                raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
            given = {} if given is None else given
    return resolve_config(given, overrides)


def get(cfg: dict, dotted: str):
    return _lookup(cfg, dotted)
