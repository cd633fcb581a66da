"""A particle in a harmonic well attached to an elastic string.

The coupled system is diagonalised exactly (secular equation and brute-force
eigensolver), and the exact modes feed the density of states, the particle
energy spectrum, equilibrium fluctuations and the string displacement
profile.  A lattice integrator shows the classical radiation friction.
"""

from .core import (DIMENSIONLESS, ModelParams, UnitSystem, damping_ratio, make_params,
                   with_damping_ratio)
from .errors import *  # noqa: F401,F403
from .modes import ModeSpectrum, coefficients, reconstruct_x, solve_secular, string_profile
from .oracle import build_forms, diagonalize
from .spectral import (OccupationSpec, SpectralDensity, excess, ground_state_energy_weak_coupling,
                       nu, particle_energy, sum_rule)
from .fluctuations import mode_variance, r2_profile, x2_fdt, x2_mode_sum
from .dynamics import FieldState, check_retarded_solution, run_decay_experiment, step

__version__ = "0.1.0"
