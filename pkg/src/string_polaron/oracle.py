"""Brute-force normal modes of the truncated particle-string system.

The string keeps ``n_modes`` cosine (r-type) Fourier amplitudes.  In the
coordinates ``xi_0 = L x / sqrt(2)`` and ``xi_n = r_n`` the energy is, up to
the factor ``rho / (2 L)``, the pair of quadratic forms
``xi_dot^T A xi_dot + xi^T B xi``.  Sine (s-type) amplitudes never couple to
the particle and are not represented.

Index 0 is always the particle coordinate.
"""

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotPositiveDefinite


@dataclass(frozen=True)
class QuadraticForms:
    A: np.ndarray       # kinetic matrix, (N+1, N+1)
    B: np.ndarray       # potential matrix, diagonal
    kappa: np.ndarray   # diagonal of B
    params: object

    @property
    def size(self):
        return self.A.shape[0]

    def condition_number(self):
        """2-norm condition number of the kinetic matrix."""
        w = np.linalg.eigvalsh(self.A)
        return float(w[-1] / w[0])


@dataclass(frozen=True)
class OracleSpectrum:
    omega: np.ndarray   # ascending eigenfrequencies
    modes: np.ndarray   # columns are A-orthonormal eigenvectors, modes[0] >= 0
    forms: QuadraticForms

    @property
    def u0(self):
        """Particle component of every mode (same role as u_0q)."""
        return self.modes[0]

    def residuals(self):
        """max-norm of V^T A V - I and of V^T B V - diag(omega^2)."""
        V = self.modes
        ra = np.max(np.abs(V.T @ self.forms.A @ V - np.eye(V.shape[1])))
        rb = np.max(np.abs(V.T @ self.forms.B @ V - np.diag(self.omega**2)))
        return float(ra), float(rb)

    def to_mode_coordinates(self, xi):
        """Project xi-space coordinates onto the normal modes (eta = V^T A xi)."""
        xi = np.asarray(xi, dtype=float)
        if xi.shape[0] != self.forms.size:
            raise DimensionMismatch(f"expected {self.forms.size} coordinates, got {xi.shape[0]}")
        return self.modes.T @ (self.forms.A @ xi)

    def from_mode_coordinates(self, eta):
        eta = np.asarray(eta, dtype=float)
        if eta.shape[0] != self.modes.shape[1]:
            raise DimensionMismatch(f"expected {self.modes.shape[1]} amplitudes, got {eta.shape[0]}")
        return self.modes @ eta

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "omega_q", "u0q"])
            for i, (om, u) in enumerate(zip(self.omega, self.u0)):
                w.writerow([i, repr(float(om)), repr(float(u))])


def build_forms(p):
    """Kinetic and potential matrices in the ``2L/rho``-scaled energy.

    ``A[n, m] = 2 + delta_nm`` for the string amplitudes, ``A[0, n] = -2`` and
    ``A[0, 0] = 2 (1 + m / (rho L))``; ``B = diag(kappa)`` with
    ``kappa_0 = 2 m Omega^2 / (rho L)`` and ``kappa_n = omega_n^2``.
    """
    N = p.n_modes
    A = np.full((N + 1, N + 1), 2.0)
    A[1:, 1:] += np.eye(N)
    A[0, 1:] = -2.0
    A[1:, 0] = -2.0
    A[0, 0] = 2.0 * (1.0 + p.mass_ratio)
    kappa = np.empty(N + 1)
    kappa[0] = 2.0 * p.m * p.Omega**2 / (p.rho * p.L)
    kappa[1:] = p.free_frequencies() ** 2
    return QuadraticForms(A=A, B=np.diag(kappa), kappa=kappa, params=p)


def diagonalize(f):
    """Solve ``B v = omega^2 A v`` through a Cholesky factorisation of A."""
    try:
        scipy.linalg.cholesky(f.A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"kinetic matrix is not positive definite: {exc}") from None
    lam, V = scipy.linalg.eigh(f.B, f.A)
    lam = np.clip(lam, 0.0, None)
    V = V * np.where(V[0] < 0, -1.0, 1.0)
    return OracleSpectrum(omega=np.sqrt(lam), modes=V, forms=f)


def total_energy(f, xi, xi_dot):
    """Physical energy (rho / 2L) (xi_dot^T A xi_dot + xi^T B xi)."""
    xi = np.asarray(xi, dtype=float)
    xi_dot = np.asarray(xi_dot, dtype=float)
    if xi.shape != (f.size,) or xi_dot.shape != (f.size,):
        raise DimensionMismatch(
            f"state must have {f.size} coordinates and velocities "
            f"(got {xi.shape} and {xi_dot.shape})")
    p = f.params
    return float(p.rho / (2.0 * p.L) * (xi_dot @ f.A @ xi_dot + xi @ (f.kappa * xi)))


def mode_energy(spectrum, eta, eta_dot):
    """The same energy summed over independent oscillators."""
    p = spectrum.forms.params
    eta = np.asarray(eta, dtype=float)
    eta_dot = np.asarray(eta_dot, dtype=float)
    return float(p.rho / (2.0 * p.L) * np.sum(eta_dot**2 + spectrum.omega**2 * eta**2))
