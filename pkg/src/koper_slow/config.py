"""Flat ``key = value`` run configurations.

Blank lines and ``#`` comments are ignored.  Every key is optional except
``preset``.  :func:`serialize` writes the canonical form: ``preset`` first,
then the remaining keys in a fixed order, floats in round-trip ``repr``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .errors import ConfigError, KoperError
from .model import KoperParams

PRESETS = ("fig1", "fig2", "fig3", "manifold", "tracking", "custom")

# Model constants that a config may override.
PARAM_KEYS = ("k", "lambda0", "lambda1", "eps", "eps_hat", "sigma", "alpha", "K", "gamma", "cutoff")

# Run options with their types.  ``None`` means "use the preset default".
_OPTION_TYPES = {
    "seed": int,
    "t_end": float,
    "dt": float,
    "out_dir": str,
    "plot": bool,
    "tamed": bool,
    "x0": float,
    "y0": float,
    "z0": float,
    "y_min": float,
    "y_max": float,
    "z_min": float,
    "z_max": float,
    "n_y": int,
    "n_z": int,
    "lp_dt": float,
    "tol": float,
    "trunc_tol": float,
    "offset": float,
}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


@dataclass
class ExperimentConfig:
    """A parsed run configuration.

    ``params`` holds only the model constants that were overridden; the
    preset supplies the rest.
    """

    preset: str
    seed: int = 0
    t_end: float | None = None
    dt: float | None = None
    out_dir: str | None = None
    plot: bool = True
    tamed: bool | None = None
    x0: float | None = None
    y0: float | None = None
    z0: float | None = None
    y_min: float | None = None
    y_max: float | None = None
    z_min: float | None = None
    z_max: float | None = None
    n_y: int | None = None
    n_z: int | None = None
    lp_dt: float | None = None
    tol: float | None = None
    trunc_tol: float | None = None
    offset: float | None = None
    params: dict = field(default_factory=dict)

    def option(self, name, default):
        value = getattr(self, name)
        return default if value is None else value

    def with_(self, **changes) -> "ExperimentConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["params"] = dict(self.params)
        data.update(changes)
        return ExperimentConfig(**data)


def _parse_value(key, raw, kind, line):
    if kind is bool:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}", line)
    if kind is int:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}", line) from None
    if kind is float:
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}", line) from None
        if not math.isfinite(value):
            raise ConfigError(f"{key}: value must be finite", line)
        return value
    if not raw:
        raise ConfigError(f"{key}: empty value", line)
    return raw


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` text into an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        Unknown or repeated key, malformed value, missing ``preset``, or model
        constants outside their domain; the message carries the line number.
    """
    values = {}
    params = {}
    where = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in where:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        where[key] = lineno
        if key == "preset":
            if raw not in PRESETS:
                raise ConfigError(f"unknown preset {raw!r} (expected one of {', '.join(PRESETS)})", lineno)
            values["preset"] = raw
        elif key in PARAM_KEYS:
            params[key] = _parse_value(key, raw, float, lineno)
        elif key in _OPTION_TYPES:
            values[key] = _parse_value(key, raw, _OPTION_TYPES[key], lineno)
        else:
            raise ConfigError(f"unknown key {key!r}", lineno)
    if "preset" not in values:
        raise ConfigError("missing required key 'preset'", len(text.splitlines()) or 1)
    cfg = ExperimentConfig(**values, params=params)
    validate(cfg, where)
    return cfg


def validate(cfg: ExperimentConfig, where=None):
    """Check option ranges and the model constants; raise :class:`ConfigError`."""
    where = where or {}

    def fail(key, msg):
        raise ConfigError(msg, where.get(key))

    if cfg.preset not in PRESETS:
        fail("preset", f"unknown preset {cfg.preset!r}")
    if cfg.seed < 0:
        fail("seed", "seed must be non-negative")
    for key in ("t_end", "dt", "lp_dt", "tol", "trunc_tol"):
        value = getattr(cfg, key)
        if value is not None and not value > 0:
            fail(key, f"{key} must be positive")
    if cfg.trunc_tol is not None and not cfg.trunc_tol < 1:
        fail("trunc_tol", "trunc_tol must lie in (0, 1)")
    for key in ("n_y", "n_z"):
        value = getattr(cfg, key)
        if value is not None and value < 2:
            fail(key, f"{key} must be at least 2")
    try:
        p = KoperParams(**cfg.params)
    except KoperError as exc:
        bad = next((k for k in cfg.params if k in str(exc)), None)
        fail(bad, str(exc))
    # fig1/fig2/fig3 fix alpha and sigma themselves
    if cfg.preset not in ("fig1", "fig2", "fig3") and not p.in_theory_range:
        key = "alpha" if "alpha" in cfg.params else "sigma"
        fail(key, f"alpha={p.alpha} with sigma={p.sigma}: alpha must lie in (1, 2) when sigma > 0")
    if "alpha" in cfg.params and cfg.params.get("sigma", p.sigma) > 0 and not 1 < p.alpha < 2:
        fail("alpha", f"alpha={p.alpha}: must lie in (1, 2) when sigma > 0")


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(serialize(c)) == c``."""
    lines = [f"preset = {cfg.preset}"]
    for key in _OPTION_TYPES:
        value = getattr(cfg, key)
        if value is None:
            continue
        if key == "seed" and value == 0 or key == "plot" and value is True:
            continue
        lines.append(f"{key} = {_format(value)}")
    for key in PARAM_KEYS:
        if key in cfg.params:
            lines.append(f"{key} = {_format(float(cfg.params[key]))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())
