"""Flat ``key = value`` configuration files.

Keys before any section header are model parameters (``m``, ``rho``, ``Ω``,
... plus the shortcut ``damping_ratio``) or experiment options.  Keys under
``[tolerances]`` override the cross-check tolerances.  ``#`` starts a
comment.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

from .core import PARAM_FIELDS, _ALIASES, make_params, with_damping_ratio
from .errors import ConfigError, ParameterError

# Tolerances used by ``validate`` and by the per-experiment pass/fail flags.
DEFAULT_TOLERANCES = {
    "secular_vs_oracle": 1e-8,   # relative, roots vs generalized eigenvalues
    "histogram_sigma": 3.0,      # bin-wise, in binning standard errors
    "fluct_rel": 1e-4,           # mode sum vs fluctuation-dissipation integral
    "energy_rel": 1e-2,          # quadrature vs weak-coupling closed form (total E_p)
    "gamma_rel": 2e-2,           # fitted decay rate vs rho s / m
    "profile_routes": 1e-8,      # closed-form vs Fourier-sum string profile
}

# Experiment options and their types; anything else is rejected.
OPTIONS = {
    "n_roots": int,
    "truncated": bool,
    "check_forms": bool,
    "normalization": str,
    "cache_dir": str,
    "temperatures": "floats",
    "omega_top": float,
    "z_min": float,
    "z_max": float,
    "z_points": int,
    "x0": float,
    "v0": float,
    "t_max": float,
    "dz": float,
    "cfl": float,
    "record_every": int,
    "snapshot_times": "floats",
    "monitor_z": "floats",
    "allow_reflection": bool,
    "histogram": bool,
    "count_L": float,
    "count_max": float,
    "continuity": bool,
    "grid_points": int,
    "seed": int,
}

KINDS = ("spectrum", "modes", "oracle", "fluct", "profile", "decay", "validate")


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text):
    vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    if not vals or not all(math.isfinite(v) for v in vals):
        raise ValueError(f"expected a non-empty list of finite numbers: {text!r}")
    return vals


def parse_option(key, text):
    kind = OPTIONS[key]
    if kind == "floats":
        return _parse_floats(text)
    if kind is bool:
        return _parse_bool(text)
    value = kind(text.strip())
    if kind is float and not math.isfinite(value):
        raise ValueError(f"{key} must be finite")
    return value


@dataclass
class Config:
    params: dict = field(default_factory=dict)       # raw strings, validated later
    options: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def set(self, key, text, line=None, section=None):
        key = key.strip()
        text = text.strip()
        if section == "tolerances" or key.startswith("tolerances."):
            name = key.split(".", 1)[-1]
            if name not in DEFAULT_TOLERANCES:
                raise ConfigError("unknown tolerance", line=line, key=key)
            try:
                value = float(text)
            except ValueError:
                raise ConfigError(f"cannot parse {text!r}", line=line, key=key) from None
            if not (math.isfinite(value) and value > 0):
                raise ConfigError("tolerance must be a positive finite number", line=line, key=key)
            self.tolerances[name] = value
        elif key in PARAM_FIELDS or key in _ALIASES or key == "damping_ratio":
            self.params[key] = text
        elif key in OPTIONS:
            try:
                self.options[key] = parse_option(key, text)
            except ValueError as exc:
                raise ConfigError(str(exc), line=line, key=key) from None
        else:
            raise ConfigError("unknown key", line=line, key=key)

    def model_params(self, extra=None):
        raw = dict(self.params)
        raw.update(extra or {})
        ratio = raw.pop("damping_ratio", None)
        try:
            p = make_params(raw)
            if ratio is not None:
                p = with_damping_ratio(p, float(ratio))
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
        except ValueError as exc:
            raise ConfigError(f"damping_ratio: {exc}", key="damping_ratio") from None
        return p


def parse_config(text, cfg=None):
    cfg = cfg or Config()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("tolerances",):
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = line.split("=", 1)
        if not key.strip():
            raise ConfigError("empty key", line=lineno)
        cfg.set(key, value, line=lineno, section=section)
    return cfg


def load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise ConfigError(f"config {path} is not valid UTF-8") from None
    return parse_config(text)


def parse_assignment(text):
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def parse_sweep(text):
    key, values = parse_assignment(text)
    items = [v.strip() for v in values.split(",") if v.strip()]
    if not items:
        raise ConfigError("sweep needs at least one value", key=key)
    for v in items:
        try:
            x = float(v)
        except ValueError:
            raise ConfigError(f"sweep value {v!r} is not a number", key=key) from None
        if not math.isfinite(x):
            raise ConfigError(f"sweep value {v!r} is not finite", key=key)
    return key, items
