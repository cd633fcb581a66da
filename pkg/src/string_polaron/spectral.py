"""Frequency distribution of the coupled modes and the particle energy.

Only the excess ``nu - nu0`` over the free-string density ever enters an
integral; the free-string zero-point energy is divergent and never formed.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .core import damping_ratio
from .errors import OutsideWeakCoupling, ParameterError, QuadratureNotConverged

WEAK_COUPLING_GATE = 0.05


def excess(p, omega):
    """nu(omega) - nu0 = (eta/pi)(m w^2 + m Omega^2) / ((m w^2 - m Omega^2)^2 + eta^2 w^2)."""
    w2 = np.asarray(omega, dtype=float) ** 2
    num = p.m * w2 + p.m * p.Omega**2
    den = (p.m * w2 - p.m * p.Omega**2) ** 2 + p.eta**2 * w2
    if p.Omega == 0:
        # cancel the common w^2 so that w = 0 is finite
        num, den = np.full_like(w2, p.m), p.m**2 * w2 + p.eta**2
    return p.eta / math.pi * num / den


def nu(p, omega):
    """Total density of states nu0 + excess."""
    return p.nu0 + excess(p, omega)


@dataclass
class SpectralDensity:
    params: object
    omega: np.ndarray = field(default_factory=lambda: np.empty(0))

    @classmethod
    def tabulate(cls, p, omega_hi=None, n_points=2001):
        hi = omega_hi or min(p.omega_max, 10.0 * max(p.Omega, p.eta / p.m))
        return cls(params=p, omega=np.linspace(0.0, hi, n_points))

    @property
    def nu0(self):
        return self.params.nu0

    def excess(self, omega=None):
        return excess(self.params, self.omega if omega is None else omega)

    def nu(self, omega=None):
        return nu(self.params, self.omega if omega is None else omega)

    def table(self):
        """Rows of (omega, nu0, nu, excess)."""
        ex = self.excess()
        return np.column_stack([self.omega, np.full_like(self.omega, self.nu0),
                                self.nu0 + ex, ex])


# --------------------------------------------------------------------------
# quadrature helpers

def _quad(f, a, b, points=(), epsrel=1e-12, epsabs=1e-14, limit=500, what="integral"):
    pts = sorted({x for x in points if a < x < b})
    with np.errstate(all="ignore"):
        val, err, info = integrate.quad(f, a, b, points=pts or None, epsrel=epsrel,
                                        epsabs=epsabs, limit=limit, full_output=1)[:3]
    tol = max(epsabs, epsrel * abs(val))
    if not math.isfinite(val) or err > 100 * tol:
        raise QuadratureNotConverged(
            f"{what}: value {val!r} with error estimate {err:.3e} (tolerance {tol:.3e})")
    return val, err


def _scale(p):
    return p.Omega if p.Omega > 0 else p.eta / p.m


def _peak_points(p):
    # resonance and a few widths either side of it
    if p.Omega == 0:
        return [0.0]
    g = p.eta / p.m
    return [p.Omega + k * g for k in (-8, -2, -0.5, 0.0, 0.5, 2, 8)]


def sum_rule(p, epsrel=1e-12):
    """Integral of the excess density over [0, inf).

    The half line is mapped to [0, 1) by ``omega = S t / (1 - t)`` with ``S``
    the resonance frequency, and the resonance gets its own break points.
    Equals 1 for Omega > 0 and 1/2 for Omega = 0.
    """
    S = _scale(p)

    def g(t):
        w = S * t / (1.0 - t)
        return float(excess(p, w)) * S / (1.0 - t) ** 2

    pts = [w / (w + S) for w in _peak_points(p) if w > 0]
    val, _ = _quad(g, 0.0, 1.0, points=pts, epsrel=epsrel, what="sum rule")
    return val


def sum_rule_contour(p, n_nodes=512):
    """Same integral from the residues of the (even) rational excess.

    ``int_0^inf = (1/2) int_R = pi i * sum of upper half-plane residues``.
    Residues are taken as trapezoid-rule contour integrals on small circles
    around clusters of poles, which also covers the double pole at critical
    damping.
    """
    m, O, eta = p.m, p.Omega, p.eta
    if O > 0:
        num = np.array([m, 0.0, m * O**2]) * eta / math.pi
        den = np.array([m * m, 0.0, eta**2 - 2 * m * m * O**2, 0.0, m * m * O**4])
    else:
        # common factor w^2 removed; it would put poles on the real axis
        num = np.array([m * eta / math.pi])
        den = np.array([m * m, 0.0, eta**2])
    scale = _scale(p)
    zn = np.roots(num).astype(complex)
    zd = np.roots(den).astype(complex)
    lead = num[0] / den[0]

    def r(w):
        out = np.full(w.shape, lead, dtype=complex)
        for z in zn:
            out *= w - z
        for z in zd:
            out /= w - z
        return out

    upper = [i for i in range(zd.size) if zd[i].imag > 0]
    clusters = []
    for i in upper:
        for c in clusters:
            if abs(zd[i] - zd[c[0]]) < 1e-3 * scale:
                c.append(i)
                break
        else:
            clusters.append([i])
    total = 0.0j
    theta = 2 * math.pi * np.arange(n_nodes) / n_nodes
    for c in clusters:
        center = np.mean(zd[c])
        spread = max(abs(zd[i] - center) for i in c)
        others = [abs(zd[i] - center) for i in range(zd.size) if i not in c]
        rad = max(0.5 * min(others + [center.imag]), 4 * spread)
        w = center + rad * np.exp(1j * theta)
        # (1 / 2 pi i) oint r dw with dw = i rad e^{i theta} dtheta
        total += np.mean(r(w) * rad * np.exp(1j * theta))
    return float((math.pi * 1j * total).real)


# --------------------------------------------------------------------------
# occupations and the particle energy

@dataclass(frozen=True)
class OccupationGroup:
    lo: float
    hi: float          # half-open [lo, hi)
    level: int
    occupation: float

    def __post_init__(self):
        if not (0 <= self.lo < self.hi):
            raise ParameterError(f"group interval must satisfy 0 <= lo < hi (got [{self.lo}, {self.hi}))")
        if self.level < 1:
            raise ParameterError(f"group level must be >= 1 (got {self.level})")
        if not (0 <= self.occupation <= self.level):
            raise ParameterError(
                f"occupation {self.occupation} outside [0, level={self.level}]")


@dataclass(frozen=True)
class OccupationSpec:
    """Piecewise-constant occupation numbers over frequency.

    A group may list several intervals with the same level by repeating it.
    Frequencies outside every interval are in their ground state.
    """

    groups: tuple = ()

    def __post_init__(self):
        gs = tuple(g if isinstance(g, OccupationGroup) else OccupationGroup(*g)
                   for g in self.groups)
        object.__setattr__(self, "groups", gs)
        spans = sorted((g.lo, g.hi) for g in gs)
        for (a0, b0), (a1, b1) in zip(spans, spans[1:]):
            if a1 < b0:
                raise ParameterError(f"occupation intervals [{a0}, {b0}) and [{a1}, {b1}) overlap")

    @classmethod
    def ground(cls):
        return cls(())

    @classmethod
    def uniform(cls, occupation, hi=math.inf, level=None):
        level = level or max(1, int(math.ceil(occupation)))
        return cls(((0.0, hi, level, occupation),))

    def occupation(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = np.zeros(omega.shape)
        for g in self.groups:
            out = np.where((omega >= g.lo) & (omega < g.hi), g.occupation, out)
        return out

    def breakpoints(self):
        return sorted({x for g in self.groups for x in (g.lo, g.hi) if math.isfinite(x)})


def particle_energy(p, occ=None, omega_max=None, epsrel=1e-11):
    """E_p = int_0^omega_max hbar w (1/2 + N(w)) (nu - nu0) dw."""
    occ = occ or OccupationSpec.ground()
    top = omega_max or p.omega_max
    cuts = [0.0] + [x for x in occ.breakpoints() if 0 < x < top] + [top]
    inner = [x for x in _peak_points(p) if x > 0]
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        level = float(occ.occupation(0.5 * (a + b)))

        def f(w, level=level):
            return p.hbar * w * (0.5 + level) * float(excess(p, w))

        # log-spaced break points keep the 1/w tail well resolved
        pts = inner + list(np.geomspace(max(a, 1e-3 * _scale(p)), b, 12)[1:-1]) if b > 0 else inner
        val, _ = _quad(f, a, b, points=pts, epsrel=epsrel, what="particle energy")
        total += val
    return total


def ground_state_energy_weak_coupling(p, omega_max=None):
    """hbar Omega / 2 + (hbar eta / 2 pi m) ln(omega_max / Omega).

    Leading weak-coupling form of the zero-point particle energy; only valid
    for eta / (m Omega) <= 0.05.
    """
    ratio = damping_ratio(p)
    if ratio > WEAK_COUPLING_GATE:
        raise OutsideWeakCoupling(
            f"eta/(m Omega) = {ratio:.4g} exceeds the weak-coupling gate {WEAK_COUPLING_GATE}")
    top = omega_max or p.omega_max
    return p.hbar * p.Omega / 2 + p.hbar * p.eta / (2 * math.pi * p.m) * math.log(top / p.Omega)


@dataclass(frozen=True)
class GroundStateReport:
    quadrature: float
    closed_form: float
    discrepancy: float          # quadrature - closed_form
    eta_part_quadrature: float  # both minus hbar Omega / 2
    eta_part_closed_form: float
    omega_max: float

    @property
    def eta_part_ratio(self):
        return self.eta_part_quadrature / self.eta_part_closed_form


def ground_state_report(p, omega_max=None):
    top = omega_max or p.omega_max
    quad = particle_energy(p, omega_max=top)
    closed = ground_state_energy_weak_coupling(p, omega_max=top)
    half = 0.5 * p.hbar * p.Omega
    return GroundStateReport(quadrature=quad, closed_form=closed, discrepancy=quad - closed,
                             eta_part_quadrature=quad - half, eta_part_closed_form=closed - half,
                             omega_max=top)


def log_cutoff_slope(p, omega_maxes):
    """Least-squares slope of the ground-state E_p against ln(omega_max)."""
    w = np.asarray(omega_maxes, dtype=float)
    e = np.array([particle_energy(p, omega_max=x) for x in w])
    slope, _ = np.polyfit(np.log(w), e, 1)
    return float(slope)


def mode_count(p, omega):
    """Smooth counting function int_0^omega nu dw."""
    omega = float(omega)
    if omega <= 0:
        return 0.0
    ex, _ = _quad(lambda w: float(excess(p, w)), 0.0, omega,
                  points=[x for x in _peak_points(p) if x > 0], what="mode count")
    return p.nu0 * omega + ex


def root_histogram(omega_roots, edges, p):
    """Counted roots per bin against the expected count int nu dw per bin.

    Returns ``(counts, expected)``.
    """
    counts, _ = np.histogram(omega_roots, bins=edges)
    cum = np.array([mode_count(p, e) for e in edges])
    return counts, np.diff(cum)


@dataclass(frozen=True)
class ContinuityReport:
    boundaries: np.ndarray
    energies: np.ndarray
    max_step: float          # largest |E(b_i+1) - E(b_i)|
    lipschitz_bound: float   # sup of the integrand times the grid step
    max_jump: float          # largest |step - integral of the slab| (ideally ~ quadrature error)


def boundary_scan(p, boundaries, lo=None, level=1, occupation=1.0, omega_max=None):
    """E_p with one excited group ``[lo, b)`` for every boundary ``b``."""
    lo = 0.25 * _scale(p) if lo is None else lo
    out = []
    for b in boundaries:
        occ = OccupationSpec(((lo, float(b), level, occupation),)) if b > lo else OccupationSpec.ground()
        out.append(particle_energy(p, occ, omega_max=omega_max))
    return np.array(out)


def continuity_check(p, lo_frac=0.5, hi_frac=2.0, n_points=121, occupation=1.0):
    """Sweep an occupation boundary across [lo_frac, hi_frac] times the resonance.

    Each energy step is compared with an independent quadrature of the slab
    it adds, so a discontinuity would show up as ``max_jump`` well above the
    quadrature tolerance.
    """
    S = _scale(p)
    b = np.linspace(lo_frac * S, hi_frac * S, n_points)
    e = boundary_scan(p, b, occupation=occupation)
    steps = np.diff(e)

    def f(w):
        return p.hbar * w * occupation * float(excess(p, w))

    slabs = np.array([_quad(f, b0, b1, points=_peak_points(p), what="slab")[0]
                      for b0, b1 in zip(b, b[1:])])
    grid = np.linspace(b[0], b[-1], 20 * n_points)
    sup = float(np.max(p.hbar * grid * occupation * excess(p, grid)))
    if p.Omega > 0 and b[0] <= p.Omega <= b[-1]:
        sup = max(sup, f(p.Omega))
    return ContinuityReport(boundaries=b, energies=e, max_step=float(np.max(np.abs(steps))),
                            lipschitz_bound=sup * float(b[1] - b[0]),
                            max_jump=float(np.max(np.abs(steps - slabs))))
