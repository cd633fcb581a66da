"""Exact normal modes from the secular equation.

Two spectra are available:

* the *continuum* string (all Fourier amplitudes kept) whose frequencies
  solve ``Omega^2 - w^2 = (eta w / m) tan(L w / 2 s)``;
* the *truncated* string of ``n_modes`` amplitudes, the same system the
  brute-force oracle diagonalises.  Its frequencies solve the finite-sum form
  ``lam * sum_j c_j / (p_j - lam) = 1`` with poles ``p_j`` at ``Omega^2``
  (weight ``rho L / m``) and at every ``omega_n^2`` (weight 2).  Summing the
  series in closed form turns it into the continuum equation, so the two
  differ by ``O(1 / n_modes)``.

Mode coefficients follow ``u_nq = (2m / rho L) (w^2 - Omega^2) /
(omega_n^2 - w^2) u_0q``; ``u_0q`` is fixed by ``A_qq = 1``.  For the
continuum string the normalisation sums close to

    1 / u_0q^2 = ((m w^2 - m Omega^2)^2 + eta^2 w^2) / (eta^2 w^2)
                 + (m / rho L) (1 + Omega^2 / w^2),

whose first term alone (``normalization="closed_form"``) is the long-string
limit ``eta w / sqrt((m w^2 - m Omega^2)^2 + eta^2 w^2)``.
"""

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import zeta

from .core import ModelParams
from .errors import (DimensionMismatch, PositionOutOfRange, ResonantDenominator,
                     RootNotBracketed)
from .roots import refine_brackets

RESONANCE_RTOL = 1e-12


@dataclass(frozen=True)
class ModeSpectrum:
    omega_q: np.ndarray     # ascending frequencies
    q_n: np.ndarray         # wave vectors omega_q / s
    branch: np.ndarray      # integer n labelling the branch of each root
    u0q: np.ndarray         # particle component of each mode
    unq: np.ndarray         # string components, rows n = 1 .. n_rows
    params: ModelParams
    truncated: bool = False
    normalization: str = "exact"

    def __len__(self):
        return len(self.omega_q)

    @property
    def eigenvalues(self):
        return self.omega_q**2

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "q_n", "omega_q", "u0q"])
            for i in range(len(self)):
                w.writerow([i, repr(float(self.q_n[i])), repr(float(self.omega_q[i])),
                            repr(float(self.u0q[i]))])


# --------------------------------------------------------------------------
# secular equations

def secular_function(p, omega):
    """Omega^2 - w^2 - (eta w / m) tan(L w / 2 s)."""
    omega = np.asarray(omega, dtype=float)
    return p.Omega**2 - omega**2 - (p.eta * omega / p.m) * np.tan(p.L * omega / (2.0 * p.s))


def _branch_omega(p, k, theta):
    return (2.0 * p.s / p.L) * (k * math.pi + theta)


def _branch_function(p, k, theta):
    # secular function times cos(theta); pole free on [-pi/2, pi/2]
    w = _branch_omega(p, k, theta)
    return np.cos(theta) * (p.Omega**2 - w**2) - (p.eta * w / p.m) * np.sin(theta)


def continuum_roots(p, n_roots, rtol=1e-13):
    """Lowest ``n_roots`` roots, one per branch of tan(L w / 2 s).

    Branch k spans ``L w / 2 s`` in ``(k pi - pi/2, k pi + pi/2)`` (branch 0
    starts at zero).  Each root is located in the branch phase
    ``theta = L w / 2 s - k pi`` where the secular function multiplied by
    ``cos(theta)`` is continuous and changes sign exactly once.
    """
    if n_roots < 1:
        raise ValueError("n_roots must be at least 1")
    k = np.arange(n_roots, dtype=float)
    # refine y = k pi + theta, proportional to omega, so rtol applies to omega
    shift = k * math.pi
    lo = np.where(k == 0, 0.0, shift - 0.5 * math.pi)
    hi = shift + 0.5 * math.pi
    y = np.zeros(n_roots)
    first = 1 if p.Omega == 0 else 0    # branch 0 root is w = 0 when Omega = 0
    ks, sh = k[first:], shift[first:]
    if ks.size:
        y[first:] = refine_brackets(lambda yy: _branch_function(p, ks, yy - sh),
                                    lo[first:], hi[first:], rtol=rtol)
    return _branch_omega(p, 0, y), k.astype(int)


def roots_below(p, omega_max, rtol=1e-13):
    """All continuum roots not exceeding ``omega_max``."""
    n = int(math.floor(omega_max / p.string_spacing + 0.5)) + 2
    omega, branch = continuum_roots(p, n, rtol=rtol)
    keep = omega <= omega_max
    return omega[keep], branch[keep]


def _truncated_poles(p):
    wn2 = p.free_frequencies() ** 2
    if p.Omega > 0:
        gap = np.min(np.abs(wn2 - p.Omega**2) / wn2)
        if gap < RESONANCE_RTOL:
            raise RootNotBracketed(
                "Omega coincides with a free-string frequency; the truncated "
                "secular equation is degenerate")
        poles = np.concatenate([[p.Omega**2], wn2])
        weights = np.concatenate([[1.0 / p.mass_ratio], np.full(wn2.size, 2.0)])
        order = np.argsort(poles, kind="stable")
        return poles[order], weights[order], 1.0
    return wn2, np.full(wn2.size, 2.0), 1.0 + 1.0 / p.mass_ratio


def truncated_secular_function(p, lam):
    """lam * sum_j c_j / (p_j - lam) - const for the ``n_modes`` string.

    Strictly increasing between consecutive poles, from -inf to +inf.
    """
    poles, weights, const = _truncated_poles(p)
    lam = np.asarray(lam, dtype=float)
    return lam * np.sum(weights / (poles - lam[..., None]), axis=-1) - const


def truncated_roots(p, rtol=1e-13):
    """All ``n_modes + 1`` eigenvalues of the truncated system (as omega^2).

    One root lies in each interval between consecutive poles (and one below
    the first pole); the function is multiplied by the distances to the two
    bounding poles so that it is finite on the closed interval.
    """
    poles, weights, const = _truncated_poles(p)
    P = poles.size
    left = np.concatenate([[0.0], poles[:-1]])
    right = poles
    idx = np.arange(P)
    mask = np.ones((P, P), dtype=bool)
    mask[idx, idx] = False
    mask[idx[1:], idx[1:] - 1] = False
    w_left = np.concatenate([[0.0], weights[:-1]])
    w_right = weights

    has_left = np.arange(P) > 0

    def g(lam):
        dl = np.where(has_left, lam - left, 1.0)
        dr = right - lam
        with np.errstate(divide="ignore"):
            others = np.where(mask, weights / (poles[None, :] - lam[:, None]), 0.0)
        rest = others.sum(axis=1)
        return lam * (w_right * dl - w_left * dr + dl * dr * rest) - const * dl * dr

    lam = refine_brackets(g, left, right, rtol=rtol)
    if p.Omega == 0:
        lam = np.concatenate([[0.0], lam])
    return lam


# --------------------------------------------------------------------------
# coefficients

def _resonance_check(p, lam, wn2):
    close = np.abs(wn2[:, None] - lam[None, :]) < RESONANCE_RTOL * wn2[:, None]
    if np.any(close):
        n, q = np.argwhere(close)[0]
        raise ResonantDenominator(
            f"mode {q} (omega={math.sqrt(lam[q])!r}) sits on free-string frequency n={n + 1}")


NORMALIZATIONS = ("exact", "closed_form")


def coefficients(spec, p=None, n_rows=None, normalization=None):
    """Transformation coefficients (u_0q, u_nq) for a solved spectrum.

    ``normalization="exact"`` enforces ``A_qq = 1`` including the
    ``m / rho L`` term; ``"closed_form"`` uses the long-string limit
    ``eta w / sqrt((m w^2 - m Omega^2)^2 + eta^2 w^2)``.  A truncated
    spectrum is always normalised with its finite sums.  ``u_nq`` is
    returned for ``n = 1 .. n_rows`` (default ``p.n_modes``).
    """
    if isinstance(spec, ModeSpectrum):
        omega, truncated = spec.omega_q, spec.truncated
        p = p or spec.params
        normalization = normalization or spec.normalization
    else:
        omega, truncated = np.asarray(spec, dtype=float), False
    return _coefficients(p, omega, truncated, n_rows, normalization or "exact")


def _coefficients(p, omega, truncated, n_rows=None, normalization="exact"):
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    lam = omega**2
    mu = p.mass_ratio
    zero = omega == 0
    lam_nz = np.where(zero, 1.0, lam)
    if truncated:
        wn2 = p.free_frequencies() ** 2
        _resonance_check(p, lam[~zero], wn2)
        d = wn2[:, None] - lam_nz[None, :]
        g2 = np.sum(1.0 / d**2, axis=0)
        dl = lam_nz - p.Omega**2
        inv = 2 * mu**2 * dl**2 / lam_nz**2 + 2 * mu + 4 * mu**2 * dl**2 * g2
        u0 = 1.0 / np.sqrt(inv)
        n_rows = p.n_modes if n_rows is None else n_rows
    else:
        d = (p.m * lam - p.m * p.Omega**2) ** 2 + p.eta**2 * lam
        if normalization == "exact":
            d = d + mu * p.eta**2 * (lam + p.Omega**2)
        with np.errstate(invalid="ignore"):
            u0 = p.eta * omega / np.sqrt(d)
        n_rows = p.n_modes if n_rows is None else n_rows
    # uniform translation of particle plus string (only when Omega = 0)
    u0 = np.where(zero, 1.0 / math.sqrt(2.0 * (1.0 + mu)), u0)
    wn2 = p.omega_n(np.arange(1, n_rows + 1)) ** 2
    if n_rows:
        _resonance_check(p, lam[~zero], wn2)
    un = 2 * mu * (lam[None, :] - p.Omega**2) / (wn2[:, None] - lam[None, :]) * u0[None, :]
    un[:, zero] = 0.0
    return u0, un


def solve_secular(p, n_roots=None, truncated=False, n_rows=None, rtol=1e-13,
                  normalization="exact"):
    """Solve the secular equation and fill in the mode coefficients.

    ``truncated=False`` gives the lowest ``n_roots`` roots of the continuum
    equation; ``truncated=True`` gives all ``n_modes + 1`` roots of the
    finite string (``n_roots`` then keeps only the lowest ones).
    """
    if truncated:
        lam = truncated_roots(p, rtol=rtol)
        omega = np.sqrt(lam)
        branch = np.arange(omega.size)
        if n_roots is not None:
            omega, branch = omega[:n_roots], branch[:n_roots]
    else:
        if n_roots is None:
            n_roots = p.n_modes + 1
        omega, branch = continuum_roots(p, n_roots, rtol=rtol)
    u0, un = _coefficients(p, omega, truncated, n_rows, normalization)
    return ModeSpectrum(omega_q=omega, q_n=omega / p.s, branch=branch, u0q=u0, unq=un,
                        params=p, truncated=truncated, normalization=normalization)


def wavevector_residual(spec):
    """Largest phase mismatch in ``q_n = 2 pi n / L - (2/L) arctan(...)``.

    Returns ``max |L/2 (q_n - rhs)|`` over the non-zero continuum roots.
    """
    p = spec.params
    q = spec.q_n[spec.omega_q > 0]
    n = spec.branch[spec.omega_q > 0]
    rhs = 2 * math.pi * n / p.L - (2.0 / p.L) * np.arctan(
        p.m * p.s * q / p.eta - p.m * p.Omega**2 / (p.eta * p.s * q))
    return float(np.max(np.abs(0.5 * p.L * (q - rhs)))) if q.size else 0.0


# --------------------------------------------------------------------------
# coordinates and profiles

def _amplitudes(spec, amplitudes):
    a = np.asarray(amplitudes, dtype=float)
    if a.shape[0] != len(spec):
        raise DimensionMismatch(f"expected {len(spec)} mode amplitudes, got {a.shape[0]}")
    return a


def reconstruct_x(spec, mode_amplitudes):
    """Particle coordinate x = (sqrt 2 / L) sum_q u_0q eta_q."""
    a = _amplitudes(spec, mode_amplitudes)
    return math.sqrt(2.0) / spec.params.L * (spec.u0q @ a)


def mode_amplitudes_from_xi(spec, xi):
    """eta_q = sum_n (kappa_n / w_q^2) u_nq xi_n for a truncated spectrum."""
    p = spec.params
    xi = np.asarray(xi, dtype=float)
    if xi.shape[0] != spec.unq.shape[0] + 1:
        raise DimensionMismatch(f"expected {spec.unq.shape[0] + 1} coordinates, got {xi.shape[0]}")
    kappa = np.concatenate([[2 * p.m * p.Omega**2 / (p.rho * p.L)],
                            p.omega_n(np.arange(1, xi.shape[0])) ** 2])
    U = np.vstack([spec.u0q, spec.unq])
    with np.errstate(divide="ignore", invalid="ignore"):
        return (U.T @ (kappa * xi)) / spec.omega_q**2


def _check_z(p, z):
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(np.abs(z) > 0.5 * p.L * (1 + 1e-12)):
        raise PositionOutOfRange(f"|z| must not exceed L/2 = {0.5 * p.L!r}")
    return z


def string_profile(spec, mode_amplitudes, z):
    """Displacement R(z) from the closed-form mode shapes.

    Each mode contributes ``u_0q [cos(z w/s) + m (Omega^2 - w^2)/(eta w)
    sin(|z| w/s)]``; exact for the continuum spectrum.
    """
    p = spec.params
    a = _amplitudes(spec, mode_amplitudes)
    z = _check_z(p, z)
    w = spec.omega_q
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = np.where(w > 0, p.m * (p.Omega**2 - w**2) / (p.eta * w), 0.0)
    phase = np.outer(z, w) / p.s
    shape = np.cos(phase) + beta * np.sin(np.abs(phase))
    return math.sqrt(2.0) / p.L * (shape @ (a * spec.u0q))


def _inverse_square_tail(lam, c, first, n_terms=12):
    # sum_{n >= first} 1 / (c^2 n^2 - lam), expanded in lam / (c n)^2
    lam = np.asarray(lam, dtype=float)
    total = np.zeros_like(lam)
    power = np.ones_like(lam)
    for k in range(n_terms):
        total = total + power * zeta(2 * k + 2, first) / c ** (2 * k + 2)
        power = power * lam
    return total


def string_profile_fourier(spec, mode_amplitudes, z, n_terms=None):
    """Displacement R(z) summed directly over string Fourier amplitudes.

    ``R(z) = x + (sqrt 2 / L) sum_n r_n [cos(2 pi n z / L) - 1]`` with
    ``r_n = sum_q u_nq eta_q``.  A truncated spectrum is summed exactly.  A
    continuum spectrum is summed to ``n_terms`` (default 2**16); the
    remainder uses ``r_n ~ b / (c n)^2 + ...``, with the constant part from
    Hurwitz zeta values and the cosine part from the closed form of
    ``sum cos(n k) / n^2``.
    """
    p = spec.params
    a = _amplitudes(spec, mode_amplitudes)
    z = _check_z(p, z)
    x = reconstruct_x(spec, a)
    if spec.truncated:
        n = np.arange(1, spec.unq.shape[0] + 1)
        r = spec.unq @ a
        const_tail, lead = 0.0, 0.0
    else:
        M = n_terms or 2**16
        n = np.arange(1, M + 1)
        r = np.zeros(M)
        lam = spec.omega_q**2
        pref = 2 * p.mass_ratio * (lam - p.Omega**2) * spec.u0q * a
        pref = np.where(spec.omega_q == 0, 0.0, pref)
        wn2 = p.omega_n(n) ** 2
        _resonance_check(p, lam[spec.omega_q > 0], wn2)
        # build r_n in chunks of modes to bound memory
        for i in range(0, lam.size, 64):
            sl = slice(i, i + 64)
            r += (1.0 / (wn2[:, None] - lam[None, sl])) @ pref[sl]
        const_tail = float(np.sum(pref * _inverse_square_tail(lam, p.string_spacing, M + 1)))
        lead = float(np.sum(pref)) / p.string_spacing**2
    k = 2 * math.pi * n / p.L
    out = np.empty(z.size)
    for i in range(0, z.size, 16):
        zz = z[i:i + 16]
        ph = np.outer(zz, k)
        cos_sum = np.cos(ph) @ r
        if lead:
            kap = 2 * math.pi * np.abs(zz) / p.L
            closed = math.pi**2 / 6 - math.pi * kap / 2 + kap**2 / 4
            cos_sum += lead * (closed - np.cos(ph) @ (1.0 / n.astype(float) ** 2))
        out[i:i + 16] = cos_sum - r.sum() - const_tail
    return x + math.sqrt(2.0) / p.L * out


# --------------------------------------------------------------------------
# the cosine series used to close the secular equation

def cosine_series(lam, a):
    """Closed form of sum_{n>=1} cos(n lam) / (n^2 - a^2), |lam| <= 2 pi."""
    lam = np.asarray(lam, dtype=float)
    a = float(a)
    if a == 0 or a == round(a):
        raise ValueError("a must be a non-zero non-integer")
    return 1.0 / (2 * a * a) - math.pi / (2 * a) * (
        np.sin(a * np.abs(lam)) + np.cos(a * lam) / math.tan(math.pi * a))


def cosine_series_partial(lam, a, n_terms):
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    n = np.arange(1, n_terms + 1)
    return (np.cos(np.outer(lam, n)) / (n * n - a * a)).sum(axis=1)


# --------------------------------------------------------------------------
# verification of the diagonalised forms

def form_residuals(spec, n_terms=2**16):
    """Evaluate the transformed kinetic and potential matrices.

    Returns ``(A, B)`` in mode coordinates.  For a truncated spectrum the
    finite sums are exact.  For a continuum spectrum the sums over the string
    amplitudes run to infinity: ``n_terms`` are added explicitly and the rest
    from a Hurwitz-zeta expansion of the remainder.
    """
    p = spec.params
    mu = p.mass_ratio
    u0 = spec.u0q
    lam = spec.omega_q**2
    if spec.truncated:
        from .oracle import build_forms

        forms = build_forms(p)
        V = np.vstack([u0, spec.unq])
        return V.T @ forms.A @ V, V.T @ forms.B @ V

    c = p.string_spacing
    M = n_terms
    _, U = _coefficients(p, spec.omega_q, False, M, spec.normalization)
    wn2 = p.omega_n(np.arange(1, M + 1)) ** 2
    pref = 2 * mu * (lam - p.Omega**2) * u0
    pref = np.where(spec.omega_q == 0, 0.0, pref)

    S = U.sum(axis=0) + pref * _inverse_square_tail(lam, c, M + 1)
    P = U.T @ U
    K = U.T @ (wn2[:, None] * U)

    # remainders of sum 1/((x-a)(x-b)) and sum x/((x-a)(x-b)), x = c^2 n^2
    la, lb = np.meshgrid(lam, lam, indexing="ij")
    h = np.ones_like(la)
    tail_p = np.zeros_like(la)
    tail_k = np.zeros_like(la)
    pow_b = np.ones_like(lb)
    for k in range(12):
        tail_p += h * zeta(2 * k + 4, M + 1) / c ** (2 * k + 4)
        tail_k += h * zeta(2 * k + 2, M + 1) / c ** (2 * k + 2)
        pow_b = pow_b * lb
        h = la * h + pow_b
    outer = np.outer(pref, pref)
    P += outer * tail_p
    K += outer * tail_k

    w = S - u0
    A = 2 * np.outer(w, w) + P + 2 * mu * np.outer(u0, u0)
    B = 2 * p.m * p.Omega**2 / (p.rho * p.L) * np.outer(u0, u0) + K
    return A, B


def orthonormality_errors(spec, **kw):
    """(max |A - I|, max |B - diag(w^2)| / max(w^2))."""
    A, B = form_residuals(spec, **kw)
    lam = spec.omega_q**2
    ea = float(np.max(np.abs(A - np.eye(len(lam)))))
    eb = float(np.max(np.abs(B - np.diag(lam))) / np.max(lam))
    return ea, eb


# --------------------------------------------------------------------------
# binary cache keyed by the parameter set

def params_digest(p, extra=None):
    payload = {k: repr(v) for k, v in p.to_dict().items()}
    if extra:
        payload.update({k: repr(v) for k, v in extra.items()})
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:20]


def save_cache(spec, cache_dir):
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = params_digest(spec.params, {"n": len(spec), "truncated": spec.truncated,
                                      "normalization": spec.normalization})
    path = cache_dir / f"modes-{key}.npz"
    np.savez(path, omega_q=spec.omega_q, q_n=spec.q_n, branch=spec.branch,
             u0q=spec.u0q, unq=spec.unq, truncated=spec.truncated,
             normalization=spec.normalization)
    return path


def load_cache(p, n_roots, truncated, cache_dir, normalization="exact"):
    key = params_digest(p, {"n": n_roots, "truncated": truncated,
                            "normalization": normalization})
    path = Path(cache_dir) / f"modes-{key}.npz"
    if not path.exists():
        return None
    with np.load(path) as d:
        return ModeSpectrum(omega_q=d["omega_q"], q_n=d["q_n"], branch=d["branch"],
                            u0q=d["u0q"], unq=d["unq"], params=p,
                            truncated=bool(d["truncated"]),
                            normalization=str(d["normalization"]))
