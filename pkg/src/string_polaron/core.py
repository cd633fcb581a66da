"""Physical parameters of the particle-on-a-string model.

All quantities are in the dimensionless convention hbar = m = Omega = 1 by
default; rho and s stay free so that ``eta / (m * Omega)`` is the single
coupling knob.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CutoffBelowOmega, NonPositiveParameter, OmegaZero, ParameterError

# Aliases accepted by make_params (and therefore by config files).
_ALIASES = {
    "Ω": "Omega",
    "omega": "Omega",
    "ħ": "hbar",
    "ρ": "rho",
    "N": "n_modes",
    "ω_max": "omega_max",
}

PARAM_FIELDS = ("m", "rho", "s", "Omega", "L", "hbar", "T", "omega_max", "n_modes")


@dataclass(frozen=True)
class UnitSystem:
    """Scale factors attached to reported numbers.

    In the default convention hbar, m and Omega are all one and every output
    is a pure number.
    """

    convention: str = "dimensionless"
    length: float = 1.0
    time: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if self.convention not in ("dimensionless", "SI"):
            raise ParameterError(f"unknown unit convention {self.convention!r}")
        for name in ("length", "time", "mass"):
            if not getattr(self, name) > 0:
                raise NonPositiveParameter(name, getattr(self, name))

    @property
    def energy(self):
        return self.mass * self.length**2 / self.time**2

    @property
    def frequency(self):
        return 1.0 / self.time

    def label(self):
        if self.convention == "dimensionless":
            return "hbar = m = Omega = 1"
        return f"SI (L0={self.length:g} m, t0={self.time:g} s, m0={self.mass:g} kg)"


DIMENSIONLESS = UnitSystem()


@dataclass(frozen=True)
class ModelParams:
    """Immutable, validated set of physical constants.

    ``eta = 2 rho s`` is always derived, never stored.  ``omega_max`` defaults
    to half of the largest retained string frequency.
    """

    m: float = 1.0
    rho: float = 0.05
    s: float = 1.0
    Omega: float = 1.0
    L: float = 100.0
    hbar: float = 1.0
    T: float = 0.0
    omega_max: float | None = None
    n_modes: int = 256
    units: UnitSystem = field(default=DIMENSIONLESS, compare=False)

    def __post_init__(self):
        for name in ("m", "rho", "s", "Omega", "L", "hbar", "T"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise ParameterError(f"parameter {name!r} must be a finite number (got {value!r})")
            object.__setattr__(self, name, float(value))
        for name in ("m", "rho", "s", "L", "hbar"):
            if getattr(self, name) <= 0:
                raise NonPositiveParameter(name, getattr(self, name))
        for name in ("Omega", "T"):
            if getattr(self, name) < 0:
                raise NonPositiveParameter(name, getattr(self, name))

        n = self.n_modes
        if isinstance(n, float) and n.is_integer():
            n = int(n)
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise ParameterError(f"n_modes must be an integer (got {self.n_modes!r})")
        if n < 1:
            raise NonPositiveParameter("n_modes", n)
        object.__setattr__(self, "n_modes", int(n))

        if self.omega_max is None:
            object.__setattr__(self, "omega_max", math.pi * self.s * self.n_modes / self.L)
        elif not math.isfinite(self.omega_max):
            raise ParameterError(f"omega_max must be finite (got {self.omega_max!r})")
        else:
            object.__setattr__(self, "omega_max", float(self.omega_max))
        if self.omega_max <= 0:
            raise NonPositiveParameter("omega_max", self.omega_max)
        if self.omega_max <= self.Omega:
            raise CutoffBelowOmega(
                f"omega_max={self.omega_max!r} must exceed Omega={self.Omega!r}")

    @property
    def eta(self):
        """Radiation friction coefficient 2 rho s."""
        return 2.0 * self.rho * self.s

    @property
    def mass_ratio(self):
        """m / (rho L): particle mass relative to the whole string."""
        return self.m / (self.rho * self.L)

    @property
    def string_spacing(self):
        """Spacing 2 pi s / L of the free-string frequencies."""
        return 2.0 * math.pi * self.s / self.L

    @property
    def nu0(self):
        """Free-string density of states L / (2 pi s)."""
        return self.L / (2.0 * math.pi * self.s)

    @property
    def q_max(self):
        return self.omega_max / self.s

    def omega_n(self, n):
        """Free-string frequency 2 pi |n| s / L (vectorised over ``n``)."""
        n = np.abs(np.asarray(n))
        out = 2.0 * math.pi * n * self.s / self.L
        return float(out) if out.ndim == 0 else out

    def free_frequencies(self):
        """omega_n for n = 1 .. n_modes."""
        return self.omega_n(np.arange(1, self.n_modes + 1))

    def replace(self, **changes):
        if "omega_max" not in changes and {"s", "L", "n_modes"} & changes.keys():
            # keep the default rule tied to the new grid unless set explicitly
            default = math.pi * self.s * self.n_modes / self.L
            if self.omega_max == default:
                changes["omega_max"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    def to_config_text(self):
        """Serialise to the ``key = value`` config format (round-trip exact)."""
        lines = [f"# units: {self.units.label()}"]
        for name, value in self.to_dict().items():
            lines.append(f"{name} = {value!r}")
        return "\n".join(lines) + "\n"


def make_params(raw=None, **kwargs):
    """Build validated :class:`ModelParams` from a mapping of raw values.

    Keys may use the symbolic aliases (``Ω``, ``ħ``, ``N``, ...).  Values may
    be strings, as read from a config file.
    """
    merged = dict(raw or {})
    merged.update(kwargs)
    clean = {}
    for key, value in merged.items():
        name = _ALIASES.get(key, key)
        if name not in PARAM_FIELDS:
            raise ParameterError(f"unknown parameter {key!r}")
        if isinstance(value, str):
            try:
                value = int(value) if name == "n_modes" else float(value)
            except ValueError:
                raise ParameterError(f"parameter {key!r}: cannot parse {value!r}") from None
        if name != "n_modes" and value is not None:
            value = float(value)
            if not math.isfinite(value):
                raise ParameterError(f"parameter {key!r} must be finite (got {value!r})")
        clean[name] = value
    return ModelParams(**clean)


def damping_ratio(p):
    """Dimensionless coupling eta / (m Omega)."""
    if p.Omega == 0:
        raise OmegaZero("damping ratio eta/(m Omega) is undefined for Omega = 0")
    return p.eta / (p.m * p.Omega)


def with_damping_ratio(p, ratio):
    """Return a copy of ``p`` with rho chosen so that eta / (m Omega) = ratio."""
    if p.Omega == 0:
        raise OmegaZero("cannot set a damping ratio when Omega = 0")
    return p.replace(rho=ratio * p.m * p.Omega / (2.0 * p.s))
