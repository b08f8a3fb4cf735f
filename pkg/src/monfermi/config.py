"""Flat ``key = value`` run files.

Blank lines and ``#`` comments are ignored. Keys use the long CLI flag names
with dashes or underscores (``t-final`` and ``t_final`` are the same key).
Lists are comma separated::

    unraveling = qsd
    gamma = 0.1, 0.2, 0.4
    L = 16, 32, 64
    trajectories = 48
    seed = 7
"""

from __future__ import annotations

from .ensemble import PRESETS, RunConfig
from .unravelings import ConfigError

_FLOAT_LISTS = {"gamma"}
_INT_LISTS = {"L"}
_INTS = {"trajectories", "seed", "workers", "bins", "smooth_window"}
_FLOATS = {"t_final", "dt", "burn_in", "sample_every", "prominence", "lam"}
_BOOLS = {"weighted_fit", "entropy"}
_STRINGS = {"unraveling", "out", "preset"}
KEYS = _FLOAT_LISTS | _INT_LISTS | _INTS | _FLOATS | _BOOLS | _STRINGS

_FIELD = {
    "gamma": "gamma_list", "L": "L_list", "trajectories": "n_trajectories",
    "seed": "master_seed", "entropy": "record_entropy",
}


def _norm_key(key: str) -> str:
    key = key.strip().replace("-", "_")
    return "L" if key.lower() == "l" else key


def parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _FLOAT_LISTS:
            return [float(x) for x in raw.split(",") if x.strip()]
        if key in _INT_LISTS:
            return [int(x) for x in raw.split(",") if x.strip()]
        if key in _INTS:
            return int(raw)
        if key in _FLOATS:
            return None if raw.lower() in ("", "none", "auto") else float(raw)
        if key in _BOOLS:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    return raw


def parse_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        key = _norm_key(key)
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = parse_value(key, raw)
    return out


def load(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read())


def dump(settings: dict) -> str:
    lines = []
    for key in sorted(settings):
        v = settings[key]
        if isinstance(v, (list, tuple)):
            v = ", ".join(repr(x) for x in v)
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


def build_run_config(settings: dict, defaults: dict | None = None) -> RunConfig:
    """Merge preset, verb defaults and explicit settings into a RunConfig.

    Precedence, lowest first: ``RunConfig`` defaults, the preset, ``defaults``,
    then ``settings``.
    """
    merged = {}
    preset = settings.get("preset") or (defaults or {}).get("preset")
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        merged.update(PRESETS[preset])
    for src in (defaults or {}, settings):
        for key, value in src.items():
            if key == "preset" or value is None:
                continue
            if key == "unraveling":
                merged["unravelings"] = ["qsd", "qj"] if value == "both" else [value]
                continue
            merged[_FIELD.get(key, key)] = value
    return RunConfig(**merged)
