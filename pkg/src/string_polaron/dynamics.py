"""Classical time evolution of the particle and the string on a lattice.

The string is sampled on an odd number of sites over [-L/2, L/2] with fixed
ends.  Each site carries mass ``rho dz`` and neighbours are joined by springs
of stiffness ``rho s^2 / dz``; the z = 0 site additionally carries the
particle mass and the well force ``-m Omega^2 R_0``.  Velocity Verlet keeps
the scheme symplectic.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (CFLViolation, DimensionMismatch, InsufficientHistory, OverdampedRegime,
                     ParameterError, ReflectionContamination)


@dataclass(frozen=True)
class Lattice:
    params: object
    dz: float
    n_sites: int
    particle_mass: float
    mass: np.ndarray = field(repr=False)
    stiffness: float = 0.0

    @property
    def center(self):
        return self.n_sites // 2

    @property
    def z(self):
        return (np.arange(self.n_sites) - self.center) * self.dz

    def site_of(self, z):
        i = int(round(z / self.dz)) + self.center
        if not 0 <= i < self.n_sites:
            raise ParameterError(f"position z={z!r} is outside the string")
        return i

    def max_dt(self, cfl=1.0):
        return cfl * self.dz / self.params.s

    def force(self, R):
        f = np.zeros_like(R)
        f[1:-1] = self.stiffness * (R[2:] - 2.0 * R[1:-1] + R[:-2])
        c = self.center
        f[c] -= self.particle_mass * self.params.Omega**2 * R[c]
        return f

    def energy(self, R, V):
        kin = 0.5 * np.dot(self.mass * V, V)
        pot = 0.5 * self.stiffness * np.dot(np.diff(R), np.diff(R))
        well = 0.5 * self.particle_mass * self.params.Omega**2 * R[self.center] ** 2
        return kin + pot + well

    def shadow_energy(self, R, V, dt):
        """Quantity conserved exactly (up to rounding) by velocity Verlet."""
        f = self.force(R)
        return self.energy(R, V) - dt * dt / 8.0 * np.dot(f / self.mass, f)

    def region_energy(self, R, V, i0, i1):
        """Energy of sites i0..i1 and the bonds between them."""
        sl = slice(i0, i1 + 1)
        kin = 0.5 * np.dot(self.mass[sl] * V[sl], V[sl])
        d = np.diff(R[sl])
        pot = 0.5 * self.stiffness * np.dot(d, d)
        well = 0.5 * self.particle_mass * self.params.Omega**2 * R[self.center] ** 2
        return kin + pot + well


def build_lattice(p, dz=None, particle_mass=None):
    """Lattice with spacing close to ``dz`` (default ``s / (40 Omega)``).

    ``particle_mass`` overrides ``p.m`` (zero gives a bare string).
    """
    if dz is None:
        dz = p.s / (40.0 * (p.Omega if p.Omega > 0 else 1.0))
    half = int(math.ceil(0.5 * p.L / dz))
    dz = 0.5 * p.L / half
    n = 2 * half + 1
    mp = p.m if particle_mass is None else float(particle_mass)
    if mp < 0:
        raise ParameterError("particle mass must be non-negative")
    mass = np.full(n, p.rho * dz)
    mass[half] += mp
    return Lattice(params=p, dz=dz, n_sites=n, particle_mass=mp, mass=mass,
                   stiffness=p.rho * p.s**2 / dz)


@dataclass
class FieldState:
    R: np.ndarray
    V: np.ndarray
    t: float
    lattice: Lattice = field(repr=False)

    @property
    def center(self):
        return self.lattice.center

    @property
    def x(self):
        return float(self.R[self.center])

    def energy(self):
        return self.lattice.energy(self.R, self.V)


def initial_state(lattice, x0=0.0, v0=0.0, R=None, V=None):
    """String at rest with the particle displaced by ``x0`` and moving at ``v0``.

    Explicit field arrays ``R`` and ``V`` may be given instead.  A displaced
    particle puts a jump into the string, whose lattice-scale part carries
    an energy of order ``rho s^2 x0^2 / dz``; a velocity kick does not.
    """
    n = lattice.n_sites
    R = np.zeros(n) if R is None else np.array(R, dtype=float)
    V = np.zeros(n) if V is None else np.array(V, dtype=float)
    if R.shape != (n,) or V.shape != (n,):
        raise DimensionMismatch(f"field arrays must have {n} samples")
    if x0:
        R[lattice.center] = x0
    if v0:
        V[lattice.center] = v0
    R[0] = R[-1] = V[0] = V[-1] = 0.0
    return FieldState(R=R, V=V, t=0.0, lattice=lattice)


def _check_dt(lattice, dt):
    cfl = dt * lattice.params.s / lattice.dz
    if not 0 < cfl <= 1.0:
        raise CFLViolation(f"Courant number {cfl:.4g} outside (0, 1] (dt={dt!r}, dz={lattice.dz!r})")


def step(state, p=None, dt=None):
    """One velocity-Verlet step; returns a new state."""
    lat = state.lattice
    if p is not None and p != lat.params:
        raise ParameterError("state was built for different parameters")
    _check_dt(lat, dt)
    V = state.V + 0.5 * dt * lat.force(state.R) / lat.mass
    R = state.R + dt * V
    R[0] = R[-1] = 0.0
    V = V + 0.5 * dt * lat.force(R) / lat.mass
    V[0] = V[-1] = 0.0
    return FieldState(R=R, V=V, t=state.t + dt, lattice=lat)


@dataclass
class Simulation:
    t: np.ndarray              # sample times
    x: np.ndarray              # particle coordinate
    v: np.ndarray              # particle velocity
    energy: np.ndarray         # lattice energy
    shadow: np.ndarray         # Verlet-conserved energy
    radiated: np.ndarray       # energy carried past the monitor points
    region: np.ndarray         # energy between the monitor points
    monitor_z: np.ndarray
    monitor_R: np.ndarray      # (samples, monitors)
    snapshots: dict
    lattice: Lattice = field(repr=False)
    dt: float = 0.0

    def x_at(self, t):
        return np.interp(t, self.t, self.x, left=0.0)


def simulate(lattice, state, dt, t_max, monitor_z=(), flux_z=None, snapshot_times=(),
             record_every=1):
    """Advance ``state`` to ``t_max`` and record the particle and monitor sites.

    ``flux_z`` places the two energy-flux monitors at ``+-flux_z``.
    """
    _check_dt(lattice, dt)
    n_steps = int(math.ceil((t_max - state.t) / dt - 1e-9))
    R, V = state.R.copy(), state.V.copy()
    inv_m = 1.0 / lattice.mass
    c = lattice.center
    k = lattice.stiffness
    mon = np.array([lattice.site_of(z) for z in monitor_z], dtype=int)
    if flux_z is None:
        flux_z = 0.25 * lattice.params.L
    fl = lattice.site_of(-flux_z)
    fr = lattice.site_of(flux_z)

    n_rec = n_steps // record_every + 1
    t_rec = np.empty(n_rec)
    x_rec = np.empty(n_rec)
    v_rec = np.empty(n_rec)
    e_rec = np.empty(n_rec)
    s_rec = np.empty(n_rec)
    rad = np.empty(n_rec)
    reg = np.empty(n_rec)
    m_rec = np.empty((n_rec, mon.size))
    snaps = {}
    pending = sorted(snapshot_times)

    def power_out(R, V):
        # rate of work done across the bonds just outside the region [fl, fr]
        pr = -k * (R[fr + 1] - R[fr]) * 0.5 * (V[fr] + V[fr + 1])
        pl = k * (R[fl] - R[fl - 1]) * 0.5 * (V[fl - 1] + V[fl])
        return pr + pl

    def record(j, t, R, V, radiated):
        t_rec[j] = t
        x_rec[j] = R[c]
        v_rec[j] = V[c]
        e_rec[j] = lattice.energy(R, V)
        s_rec[j] = lattice.shadow_energy(R, V, dt)
        rad[j] = radiated
        reg[j] = lattice.region_energy(R, V, fl, fr)
        m_rec[j] = R[mon]

    t = state.t
    radiated = 0.0
    p_prev = power_out(R, V)
    record(0, t, R, V, radiated)
    j = 1
    f = lattice.force(R)
    for i in range(1, n_steps + 1):
        V += 0.5 * dt * f * inv_m
        R += dt * V
        R[0] = R[-1] = 0.0
        f = lattice.force(R)
        V += 0.5 * dt * f * inv_m
        V[0] = V[-1] = 0.0
        t = state.t + i * dt
        p_now = power_out(R, V)
        radiated += 0.5 * dt * (p_prev + p_now)
        p_prev = p_now
        while pending and pending[0] <= t + 0.5 * dt:
            snaps[pending.pop(0)] = R.copy()
        if i % record_every == 0:
            record(j, t, R, V, radiated)
            j += 1
    sim = Simulation(t=t_rec[:j], x=x_rec[:j], v=v_rec[:j], energy=e_rec[:j], shadow=s_rec[:j],
                     radiated=rad[:j], region=reg[:j], monitor_z=lattice.z[mon],
                     monitor_R=m_rec[:j], snapshots=snaps, lattice=lattice, dt=dt)
    state.R, state.V, state.t = R, V, t
    return sim


# --------------------------------------------------------------------------
# damping analysis

def extrema(t, x, v):
    """Times and values of the extrema of x, from sign changes of v.

    Each extremum is refined by a parabola through the three samples around it.
    """
    idx = np.flatnonzero(np.signbit(v[1:-1]) != np.signbit(v[2:])) + 1
    idx = idx[(idx >= 1) & (idx < len(t) - 1)]
    times, vals = [], []
    for i in idx:
        j = i if abs(v[i]) < abs(v[i + 1]) else i + 1
        j = min(max(j, 1), len(t) - 2)
        y0, y1, y2 = x[j - 1], x[j], x[j + 1]
        h = t[j + 1] - t[j]
        den = y0 - 2 * y1 + y2
        off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        off = max(-1.0, min(1.0, off))
        times.append(t[j] + off * h)
        vals.append(y1 - 0.25 * (y0 - y2) * off)
    return np.array(times), np.array(vals)


@dataclass(frozen=True)
class DampingFit:
    gamma_fit: float
    gamma_theory: float       # rho s / m
    omega_fit: float
    omega_theory: float       # sqrt(Omega^2 - (eta / 2m)^2)
    window: tuple
    n_extrema: int
    amplitude: float
    energy_drift: float       # trend of the lattice energy per well period, relative
    energy_fluctuation: float # max relative deviation of the lattice energy
    shadow_drift: float       # max relative deviation of the Verlet-conserved energy
    simulation: Simulation = field(default=None, repr=False, compare=False)

    @property
    def gamma_ratio(self):
        return self.gamma_fit / self.gamma_theory

    def model(self, t):
        """Damped cosine through the fitted extrema."""
        t0 = self.window[0]
        phase = self.omega_fit * (np.asarray(t) - self.phase_time)
        return self.amplitude * np.exp(-self.gamma_fit * (np.asarray(t) - t0)) * np.cos(phase)

    phase_time: float = 0.0


def fit_decay(sim, t_start, t_end, min_extrema=8, gamma_theory=None, omega_theory=None,
              floor=1e-3):
    """Log-linear fit of the extremal amplitudes of x(t) in [t_start, t_end].

    The extrema list stops once an amplitude drops below ``floor`` times the
    first one or the signs stop alternating, which is where lattice noise
    takes over.
    """
    sel = (sim.t >= t_start) & (sim.t <= t_end)
    te, xe = extrema(sim.t[sel], sim.x[sel], sim.v[sel])
    n = 0
    while n < te.size and abs(xe[n]) > floor * abs(xe[0]) and \
            (n == 0 or np.sign(xe[n]) != np.sign(xe[n - 1])):
        n += 1
    te, xe = te[:n], xe[:n]
    if te.size < min_extrema:
        raise InsufficientHistory(
            f"{te.size} extrema in [{t_start:.4g}, {t_end:.4g}] (need {min_extrema})")
    slope, icpt = np.polyfit(te - t_start, np.log(np.abs(xe)), 1)
    # consecutive extrema are half a period apart
    omega = math.pi * (te.size - 1) / (te[-1] - te[0])
    p = sim.lattice.params
    e0 = sim.energy[0]
    period = 2 * math.pi / p.Omega
    trend = np.polyfit(sim.t, sim.energy, 1)[0] if sim.t.size > 1 else 0.0
    return DampingFit(gamma_fit=float(-slope), gamma_theory=gamma_theory, omega_fit=omega,
                      omega_theory=omega_theory, window=(t_start, float(te[-1])),
                      n_extrema=int(te.size),
                      amplitude=float(math.exp(icpt)) * float(np.sign(xe[0])),
                      energy_drift=float(abs(trend) * period / abs(e0)),
                      energy_fluctuation=float(np.max(np.abs(sim.energy - e0)) / abs(e0)),
                      shadow_drift=float(np.max(np.abs(sim.shadow - sim.shadow[0])) / abs(sim.shadow[0])),
                      simulation=sim, phase_time=float(te[0]))


def reflection_time(p, z=0.0):
    """Time at which the wave reflected from the fixed ends first returns to z."""
    return (p.L - abs(z)) / p.s


def run_decay_experiment(p, x0=1.0, t_max=None, dz=None, cfl=0.5, t_start=None,
                         allow_reflection=False, monitor_z=(), snapshot_times=(),
                         record_every=1, v0=0.0, flux_z=None):
    """Release the particle from ``x0`` with the string at rest and fit the decay.

    The fit starts after one well period (``t_start``) so that the front
    launched at t = 0 has left the particle.

    ``t_max`` must stay below ``(L/2)/s`` unless ``allow_reflection`` is set,
    which is meant for demonstrating the breakdown of the pure decay.
    """
    if p.Omega <= 0:
        raise OverdampedRegime("the decay experiment needs a harmonic well (Omega > 0)")
    if p.eta >= 2 * p.m * p.Omega:
        raise OverdampedRegime(
            f"eta = {p.eta:.4g} >= 2 m Omega = {2 * p.m * p.Omega:.4g}: no oscillation to fit")
    gamma = p.eta / (2 * p.m)
    period = 2 * math.pi / p.Omega
    limit = 0.5 * p.L / p.s
    if t_max is None:
        t_max = min(0.95 * limit, max(12 * period, 4.0 / gamma))
    if t_max >= limit and not allow_reflection:
        raise ReflectionContamination(
            f"t_max = {t_max:.4g} reaches the reflection limit (L/2)/s = {limit:.4g}")
    lat = build_lattice(p, dz=dz)
    dt = lat.max_dt(cfl)
    state = initial_state(lat, x0=x0, v0=v0)
    sim = simulate(lat, state, dt, t_max, monitor_z=monitor_z, snapshot_times=snapshot_times,
                   flux_z=flux_z, record_every=record_every)
    t0 = period if t_start is None else t_start
    omega_th = math.sqrt(p.Omega**2 - gamma**2)
    # the fit itself never reaches past the first possible return of a wave
    return fit_decay(sim, t0, min(t_max, t0 + limit), gamma_theory=gamma, omega_theory=omega_th)


def check_retarded_solution(sim, t_guard=None, n_times=50):
    """max |R(z, t) - x(t - |z|/s)| / max |x| over recorded monitor sites.

    Only samples with ``|z| <= s (t - t_guard)`` are used.  The front
    launched at t = 0 is a jump that the lattice disperses into a ringing
    tail; ``t_guard`` (default two well periods) keeps that tail out.
    """
    p = sim.lattice.params
    if sim.monitor_z.size == 0:
        raise InsufficientHistory("no monitor sites were recorded")
    if t_guard is None:
        t_guard = 4 * math.pi / p.Omega if p.Omega > 0 else 0.0
    idx = np.unique(np.linspace(0, sim.t.size - 1, n_times).astype(int))
    worst = 0.0
    used = 0
    for j, zm in enumerate(sim.monitor_z):
        tt = sim.t[idx]
        ok = np.abs(zm) <= p.s * (tt - t_guard)
        if not ok.any():
            continue
        ret = sim.x_at(tt[ok] - abs(zm) / p.s)
        worst = max(worst, float(np.max(np.abs(sim.monitor_R[idx][ok, j] - ret))))
        used += int(ok.sum())
    if used == 0:
        raise InsufficientHistory("no recorded sample lies inside the light cone")
    return worst / float(np.max(np.abs(sim.x)))


def causality_violation(sim, speed=None):
    """Largest |R| recorded at monitor sites before a signal at ``speed`` could arrive.

    The explicit scheme moves information one site per step, so with the
    default ``speed = dz / dt`` the result is exactly zero.  With the wave
    speed ``s`` it measures the dispersive precursor of a jump front.
    """
    speed = sim.lattice.dz / sim.dt if speed is None else speed
    out = 0.0
    for j, zm in enumerate(sim.monitor_z):
        early = sim.t * speed < abs(zm) - 0.5 * sim.lattice.dz
        if early.any():
            out = max(out, float(np.max(np.abs(sim.monitor_R[early, j]))))
    return out


def flux_balance(sim):
    """Relative mismatch between energy lost inside the flux monitors and energy radiated."""
    lost = sim.region[0] - sim.region[-1]
    if lost == 0:
        return 0.0
    return abs(lost - sim.radiated[-1]) / abs(lost)


def detect_reflection(fit, tol=0.05, floor=1e-3):
    """First extremum of x(t) that leaves the fitted envelope by more than ``tol``.

    Deviations are measured relative to the envelope, but never relative to
    less than ``floor`` times the initial amplitude, so lattice noise in a
    fully decayed record is not mistaken for a returning wave.  Returns
    ``None`` when every extremum follows the fitted decay.
    """
    sim = fit.simulation
    after = sim.t >= fit.window[0]
    te, xe = extrema(sim.t[after], sim.x[after], sim.v[after])
    if te.size == 0:
        return None
    a = abs(fit.amplitude)
    env = a * np.exp(-fit.gamma_fit * (te - fit.window[0]))
    dev = np.abs(np.abs(xe) - env) / np.maximum(env, floor * a)
    bad = np.flatnonzero(dev > tol)
    return float(te[bad[0]]) if bad.size else None
