"""Normal modes of a particle on a string.

Attaching a damped oscillator to a string pulls exactly one mode's worth of
states into a Lorentzian around Omega.  This script counts roots of the
secular equation on a long string, compares them with the density of
states, and checks the excess integrates to one.
"""

import numpy as np

from string_polaron import ModelParams, with_damping_ratio
from string_polaron import spectral
from string_polaron.modes import roots_below

p = with_damping_ratio(ModelParams(L=1e4, omega_max=10.0), 0.5)
print(f"eta = {p.eta:.3f}, m/(rho L) = {p.mass_ratio:.2e}, free density nu0 = {p.nu0:.1f}")

w, _ = roots_below(p, 3.0)
print("\n  omega   roots below   minus free string   predicted excess")
for top in (0.25, 0.5, 0.8, 0.9, 1.0, 1.1, 1.25, 2.0, 3.0):
    n = int(np.searchsorted(w, top, side="right"))
    print(f"  {top:5.2f}   {n:11d}   {n - p.nu0 * top:+17.2f}   {spectral.mode_count(p, top) - p.nu0 * top:+16.2f}")

print(f"\nexcess states, quadrature: {spectral.sum_rule(p):.12f}")
print(f"excess states, contour:    {spectral.sum_rule_contour(p):.12f}")

rep = spectral.ground_state_report(with_damping_ratio(ModelParams(omega_max=1000.0), 0.01))
print(f"\nzero-point energy at omega_max = 1000 Omega: quadrature {rep.quadrature:.6f}, "
      f"weak-coupling formula {rep.closed_form:.6f}")
