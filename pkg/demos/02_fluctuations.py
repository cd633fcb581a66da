"""Quantum fluctuations of the attached particle and the dressed string.

The particle's <x^2> computed mode by mode agrees with the
fluctuation-dissipation integral; the string displacement <R^2(z)> carries
a 1/|z| excess near the particle on top of a logarithmic baseline.
"""

import numpy as np

from string_polaron import ModelParams, with_damping_ratio
from string_polaron import fluctuations as fl

print("eta/mOmega   T     mode sum       FDT            rel diff")
for ratio in (0.1, 1.0):
    for T in (0.0, 1.0):
        rep = fl.fluctuation_report(with_damping_ratio(ModelParams(L=2000.0, omega_max=50.0), ratio), T=T)
        print(f"  {ratio:5.2f}    {T:4.1f}  {rep.x2_mode_sum:.10f}  {rep.x2_fdt:.10f}  {rep.discrepancy:.1e}")

p = with_damping_ratio(ModelParams(L=4000.0, omega_max=1000.0), 0.1)
prof = fl.r2_profile(p)
print(f"\n1/|z| tail coefficient / expected: {prof.tail_fit.amplitude / prof.expected_amplitude:.4f}")
print(f"free power-law exponent:           {prof.free_fit.exponent:.4f}")
print("\n   z       <R^2>      baseline   excess")
for z in (10.0, 20.0, 50.0, 100.0, 200.0):
    i = int(np.argmin(np.abs(prof.z - z)))
    print(f"  {prof.z[i]:6.1f}  {prof.r2_total[i]:.6f}  {prof.r2_baseline[i]:.6f}  {prof.r2_excess[i]:.2e}")
