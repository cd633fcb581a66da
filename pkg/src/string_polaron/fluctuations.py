"""Equilibrium fluctuations of the particle and of the string.

The thermal factor is ``coth(hbar w / 2T)``: it tends to one at T = 0 and to
``2T / hbar w`` in the classical limit.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import (PositionOutOfRange, QuadratureNotConverged, TruncationNotConverged,
                     WindowTooNarrow, ZeroFrequency, ParameterError)
from .modes import roots_below


def thermal_factor(p, omega, T=None):
    """coth(hbar w / 2T), with the T = 0 value 1."""
    T = p.T if T is None else T
    omega = np.asarray(omega, dtype=float)
    if T == 0:
        return np.ones_like(omega)
    with np.errstate(divide="ignore", over="ignore"):
        x = p.hbar * omega / (2.0 * T)
        return np.where(x > 20, 1.0, 1.0 / np.tanh(x))


def mode_variance(p, omega_q, T=None):
    """<eta_q^2> = (L hbar / 2 rho w) coth(hbar w / 2T)."""
    omega_q = np.asarray(omega_q, dtype=float)
    if np.any(omega_q <= 0):
        raise ZeroFrequency("mode variance needs omega_q > 0")
    return p.L * p.hbar / (2.0 * p.rho * omega_q) * thermal_factor(p, omega_q, T)


def _lorentz_weight(p, omega):
    # eta^2 w^2 / ((m w^2 - m Omega^2)^2 + eta^2 w^2)
    w2 = omega**2
    return p.eta**2 * w2 / ((p.m * w2 - p.m * p.Omega**2) ** 2 + p.eta**2 * w2)


def _mode_weight(p, omega, normalization):
    if normalization == "closed_form":
        return _lorentz_weight(p, omega)
    w2 = omega**2
    d = (p.m * w2 - p.m * p.Omega**2) ** 2 + p.eta**2 * w2
    return p.eta**2 * w2 / (d + p.mass_ratio * p.eta**2 * (w2 + p.Omega**2))


def _fdt_integrand(p, T):
    def f(w):
        if w == 0:
            # coth(hbar w/2T) * eta w / D -> 2T eta / (hbar D(0)) for T > 0
            return 0.0 if T == 0 else p.hbar / math.pi * 2 * T * p.eta / (p.hbar * (p.m * p.Omega**2) ** 2)
        d = (p.m * w * w - p.m * p.Omega**2) ** 2 + (p.eta * w) ** 2
        return p.hbar / math.pi * float(thermal_factor(p, w, T)) * p.eta * w / d
    return f


def _fdt_tail(p, T, w0):
    """(hbar/pi) int_w0^inf coth * eta w / D dw."""
    val, err = integrate.quad(_fdt_integrand(p, T), w0, np.inf, epsabs=1e-15, epsrel=1e-11,
                              limit=400)
    return val


def x2_fdt(p, T=None, epsrel=1e-11):
    """<x^2> = (hbar/pi) int_0^inf coth(hbar w/2T) eta w / ((m w^2 - m Omega^2)^2 + eta^2 w^2) dw.

    This is the imaginary part of the response ``1/(m Omega^2 - m w^2 - i eta w)``
    weighted by the thermal factor.
    """
    T = p.T if T is None else T
    if p.Omega == 0:
        raise ParameterError("<x^2> diverges for a free particle (Omega = 0)")
    f = _fdt_integrand(p, T)
    S = p.Omega
    g = p.eta / p.m

    def h(t):
        w = S * t / (1.0 - t)
        return f(w) * S / (1.0 - t) ** 2

    pts = sorted({w / (w + S) for w in (S - 4 * g, S - g, S - 0.25 * g, S, S + 0.25 * g,
                                         S + g, S + 4 * g, 2 * T / p.hbar) if w > 0})
    val, err, info = integrate.quad(h, 0.0, 1.0, points=pts, epsrel=epsrel, epsabs=1e-15,
                                    limit=500, full_output=1)[:3]
    if not math.isfinite(val) or err > 100 * max(epsrel * abs(val), 1e-15):
        raise QuadratureNotConverged(f"FDT integral: {val!r} +- {err:.3e}")
    return val


def x2_matsubara(p, T=None):
    """<x^2> from the response on the imaginary frequency axis.

    ``T [1/(m Omega^2) + 2 sum_{n>=1} 1/(m nu_n^2 + eta nu_n + m Omega^2)]`` with
    ``nu_n = 2 pi n T / hbar``; summed with the digamma function.  At T = 0
    the sum becomes ``(hbar/pi) int_0^inf dxi / (m xi^2 + eta xi + m Omega^2)``.
    """
    T = p.T if T is None else T
    m, eta, O, hbar = p.m, p.eta, p.Omega, p.hbar
    if O == 0:
        raise ParameterError("<x^2> diverges for a free particle (Omega = 0)")
    disc = eta**2 - 4 * m * m * O**2
    # the sum is a trapezoid rule of the T = 0 integral with O(T^2) error
    if 2 * math.pi * T / hbar < 1e-7 * (O + eta / m):
        T = 0.0
    if T == 0:
        if disc < 0:
            r = math.sqrt(-disc)
            val = 2.0 / r * (0.5 * math.pi - math.atan(eta / r))
        elif disc > 0:
            r = math.sqrt(disc)
            val = math.log((eta + r) / (eta - r)) / r
        else:
            val = 2.0 / eta
        return hbar / math.pi * val
    a = 2 * math.pi * T / hbar
    if abs(disc) < 1e-12 * eta**2:
        nu = -eta / (2 * m)
        s = special.polygamma(1, 1 - nu / a) / (m * a * a)
    else:
        root = np.sqrt(complex(disc))
        nu_p = (-eta + root) / (2 * m)
        nu_m = (-eta - root) / (2 * m)
        # sum 1/(m (a n - nu_p)(a n - nu_m)) over n >= 1
        s = (special.psi(1 - nu_m / a) - special.psi(1 - nu_p / a)) / (m * a * (nu_p - nu_m))
        s = s.real
    return T * (1.0 / (m * O * O) + 2.0 * float(s))


@dataclass(frozen=True)
class ModeSum:
    value: float
    tail: float        # continuum estimate of the omitted modes (already added)
    n_modes: int
    omega_top: float


def x2_mode_sum(p, spec=None, T=None, omega_top=None, tail_tol=1e-2, normalization="exact"):
    """<x^2> = (2/L^2) sum_q u_0q^2 <eta_q^2> over the exact spectrum.

    ``u_0q^2`` is evaluated at each root, by default with the finite-length
    normalisation (see :mod:`string_polaron.modes`); ``"closed_form"`` uses
    ``eta^2 w^2 / ((m w^2 - m Omega^2)^2 + eta^2 w^2)`` and is off by
    ``O(1/L)``.  Roots above ``omega_top`` (default
    ``50 max(Omega, eta/m, T/hbar)``) are replaced by the continuum integral
    with the free-string density nu0, started half a level spacing above the
    last kept root.  ``spec`` may be passed to reuse a solved spectrum.
    """
    T = p.T if T is None else T
    top = omega_top or 50.0 * max(p.Omega, p.eta / p.m, T / p.hbar)
    if spec is not None:
        w = spec.omega_q[(spec.omega_q > 0) & (spec.omega_q <= top)]
        if spec.omega_q.max() < top and omega_top is None:
            top = float(spec.omega_q.max())
    else:
        w, _ = roots_below(p, top)
        w = w[w > 0]
    if w.size == 0:
        raise TruncationNotConverged("no modes below the truncation frequency")
    terms = 2.0 / p.L**2 * _mode_weight(p, w, normalization) * mode_variance(p, w, T)
    total = math.fsum(np.sort(terms))
    tail = _fdt_tail(p, T, w[-1] + 0.5 * p.string_spacing)
    if tail > tail_tol * total:
        raise TruncationNotConverged(
            f"continuum tail {tail:.3e} exceeds {tail_tol:g} of the mode sum {total:.3e}; "
            "raise omega_top")
    return ModeSum(value=total + tail, tail=tail, n_modes=int(w.size), omega_top=float(w[-1]))


@dataclass(frozen=True)
class FluctuationReport:
    T: float
    x2_mode_sum: float
    x2_fdt: float
    x2_matsubara: float
    discrepancy: float      # |mode_sum - fdt| / fdt
    n_modes: int

    def row(self):
        return (self.T, self.x2_mode_sum, self.x2_fdt, self.discrepancy)


def fluctuation_report(p, T=None, omega_top=None):
    T = p.T if T is None else T
    ms = x2_mode_sum(p, T=T, omega_top=omega_top)
    fdt = x2_fdt(p, T)
    return FluctuationReport(T=T, x2_mode_sum=ms.value, x2_fdt=fdt, x2_matsubara=x2_matsubara(p, T),
                             discrepancy=abs(ms.value - fdt) / fdt, n_modes=ms.n_modes)


# --------------------------------------------------------------------------
# string displacement profile (ground state)

def _excess_parts(p, w):
    # u0^2 / w and u0^2 beta / w, beta = m (Omega^2 - w^2) / (eta w)
    d = (p.m * w * w - p.m * p.Omega**2) ** 2 + (p.eta * w) ** 2
    a = p.eta**2 * w / d
    b = p.eta * p.m * (p.Omega**2 - w * w) / d
    return a, b


def _oscillatory(f, a, b, kind, k, what):
    opts = dict(weight=kind, wvar=k, limit=2000, epsabs=1e-14, epsrel=1e-10)
    if math.isinf(b):
        opts.pop("epsrel")
        opts["limlst"] = 200
    with np.errstate(all="ignore"):
        val, err = integrate.quad(f, a, b, **opts)[:2]
    if not math.isfinite(val) or err > 1e-7 * max(1.0, abs(val)):
        raise QuadratureNotConverged(f"{what}: {val!r} +- {err:.3e}")
    return val


def _peak_edge(p):
    return p.Omega + 40.0 * p.eta / p.m + 10.0 * p.Omega


def r2_excess(p, z):
    """Particle-induced part (hbar/pi eta) int dw/w u0^2 [cos 2zw/s + beta sin 2|z|w/s]."""
    z = abs(float(z))
    k = 2.0 * z / p.s
    edge = _peak_edge(p)
    fa = lambda w: _excess_parts(p, w)[0]
    fb = lambda w: _excess_parts(p, w)[1]
    val = 0.0
    for lo, hi in ((0.0, edge), (edge, np.inf)):
        val += _oscillatory(fa, lo, hi, "cos", k, "profile excess (cos)")
        if k > 0:
            val += _oscillatory(fb, lo, hi, "sin", k, "profile excess (sin)")
    return p.hbar / (math.pi * p.eta) * val


def r2_excess_laplace(p, z):
    """The same excess after rotating the contour onto the imaginary axis.

    ``(hbar/pi) int_0^inf exp(-2 t |z| / s) / (m (Omega^2 + t^2) + eta t) dt``,
    manifestly positive and decreasing in |z|.
    """
    z = abs(float(z))
    k = 2.0 * z / p.s
    f = lambda t: math.exp(-k * t) / (p.m * (p.Omega**2 + t * t) + p.eta * t)
    val, err = integrate.quad(f, 0.0, np.inf, epsabs=1e-16, epsrel=1e-12, limit=400)
    return p.hbar / math.pi * val


def r2_baseline(p, z):
    """Particle-independent part with both string mode families and cutoff q_max.

    ``(2 hbar / pi eta) int_0^{q_max} dq/q sin^2(qz) =
    (hbar / pi eta)(gamma + ln(2 z q_max) - Ci(2 z q_max))``.
    """
    x = 2.0 * abs(float(z)) * p.q_max
    if x == 0:
        return 0.0
    return p.hbar / (math.pi * p.eta) * (np.euler_gamma + math.log(x) - special.sici(x)[1])


def r2_total(p, z):
    """Full integrand of the ground-state profile summed in one pass.

    The cut-off baseline ``(1 - cos 2zw/s)/w`` is integrated together with the
    particle terms below ``omega_max``; only the particle terms continue above.
    """
    z = abs(float(z))
    if z == 0:
        return r2_excess(p, 0.0)
    k = 2.0 * z / p.s
    wm = p.omega_max
    # below delta the phase is small and the integrand is smooth
    delta = min(0.1 / k, 0.5 * wm)

    def near(w):
        a, b = _excess_parts(p, w)
        c = math.cos(k * w)
        return (1.0 - c) / w + a * c + b * math.sin(k * w) if w > 0 else 0.0

    val, err = integrate.quad(near, 0.0, delta, epsabs=1e-14, epsrel=1e-12, limit=200)
    # non-oscillating 1/w piece in closed form, then the weighted pieces
    val += math.log(wm / delta)
    fa = lambda w: _excess_parts(p, w)[0] - 1.0 / w
    fb = lambda w: _excess_parts(p, w)[1]
    edge = min(max(_peak_edge(p), delta), wm)
    spans = [(delta, edge), (edge, wm)] if edge > delta else [(delta, wm)]
    for lo, hi in spans:
        if hi > lo:
            val += _oscillatory(fa, lo, hi, "cos", k, "profile total (cos)")
            val += _oscillatory(fb, lo, hi, "sin", k, "profile total (sin)")
    fa_out = lambda w: _excess_parts(p, w)[0]
    val += _oscillatory(fa_out, wm, np.inf, "cos", k, "profile total tail (cos)")
    val += _oscillatory(fb, wm, np.inf, "sin", k, "profile total tail (sin)")
    return p.hbar / (math.pi * p.eta) * val


@dataclass(frozen=True)
class TailFit:
    amplitude: float
    exponent: float
    window: tuple
    n_points: int


def fit_tail(z, excess, lo, hi, exponent=None, min_points=10):
    """Log-log least squares of ``excess ~ A |z|^exponent`` inside [lo, hi].

    ``exponent=-1`` fixes the power and returns only the amplitude;
    ``exponent=None`` fits both.
    """
    z = np.abs(np.asarray(z, dtype=float))
    ex = np.asarray(excess, dtype=float)
    sel = (z >= lo) & (z <= hi) & (ex > 0)
    if sel.sum() < min_points:
        raise WindowTooNarrow(
            f"fit window [{lo:.4g}, {hi:.4g}] holds {int(sel.sum())} points (< {min_points})")
    lz, le = np.log(z[sel]), np.log(ex[sel])
    if exponent is None:
        slope, icpt = np.polyfit(lz, le, 1)
        return TailFit(float(math.exp(icpt)), float(slope), (lo, hi), int(sel.sum()))
    amp = math.exp(float(np.mean(le - exponent * lz)))
    return TailFit(amp, float(exponent), (lo, hi), int(sel.sum()))


def default_window(p):
    lo = 20.0 * max(p.eta * p.s / (p.m * p.Omega**2), p.s / p.Omega)
    return lo, 0.05 * p.L


@dataclass(frozen=True)
class ProfileReport:
    z: np.ndarray
    r2_total: np.ndarray
    r2_baseline: np.ndarray
    r2_excess: np.ndarray          # total minus baseline
    r2_excess_direct: np.ndarray   # particle terms integrated on their own
    tail_fit: TailFit              # exponent fixed at -1
    free_fit: TailFit              # exponent free
    expected_amplitude: float      # hbar s / (2 pi m Omega^2)

    def rows(self):
        return np.column_stack([self.z, self.r2_total, self.r2_baseline, self.r2_excess])


def r2_profile(p, z_grid=None, T=None, window=None, n_points=120):
    """Ground-state <R^2(z)> with its baseline/excess split and tail fits."""
    T = p.T if T is None else T
    if T != 0:
        raise ParameterError("the string profile is only defined here for the ground state (T = 0)")
    if p.Omega == 0:
        raise ParameterError("the polaronic tail needs Omega > 0")
    lo, hi = window or default_window(p)
    if z_grid is None:
        z_grid = np.geomspace(0.5 * lo, min(2.0 * hi, 0.5 * p.L), n_points) if hi > lo else \
            np.geomspace(p.s / p.Omega, 0.5 * p.L, n_points)
    z = np.asarray(z_grid, dtype=float)
    if np.any(z <= 0) or np.any(z > 0.5 * p.L):
        raise PositionOutOfRange("profile positions must lie in (0, L/2]")
    total = np.array([r2_total(p, x) for x in z])
    base = np.array([r2_baseline(p, x) for x in z])
    direct = np.array([r2_excess(p, x) for x in z])
    ex = total - base
    fixed = fit_tail(z, ex, lo, hi, exponent=-1.0)
    free = fit_tail(z, ex, lo, hi, exponent=None)
    return ProfileReport(z=z, r2_total=total, r2_baseline=base, r2_excess=ex,
                         r2_excess_direct=direct, tail_fit=fixed, free_fit=free,
                         expected_amplitude=p.hbar * p.s / (2 * math.pi * p.m * p.Omega**2))
