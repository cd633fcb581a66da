import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from string_polaron import ModelParams, with_damping_ratio
from string_polaron import spectral
from string_polaron.errors import OutsideWeakCoupling, ParameterError
from string_polaron.spectral import OccupationGroup, OccupationSpec

# mpmath quad at 30 digits of the excess density integral
SUM_RULE_MPMATH = {(0.3, 1.0): 1.0, (0.02, 1.0): 1.0, (1.0, 0.0): 0.5}


def p_at(ratio, **kw):
    return with_damping_ratio(ModelParams(**kw), ratio)


def test_excess_at_resonance():
    p = p_at(0.2, m=1.7, Omega=1.3, omega_max=10.0)
    assert spectral.excess(p, p.Omega) == pytest.approx(2 * p.m / (math.pi * p.eta), rel=1e-14)


def test_excess_high_frequency_asymptote():
    p = p_at(0.2, m=1.7, Omega=1.3, omega_max=10.0)
    w = 1e6
    assert spectral.excess(p, w) * w * w == pytest.approx(p.eta / (math.pi * p.m), rel=1e-6)


@given(ratio=st.floats(0.01, 2.0), w=st.floats(0.0, 1e4))
def test_excess_positive(ratio, w):
    p = p_at(ratio)
    assert spectral.excess(p, w) > 0
    assert spectral.nu(p, w) == pytest.approx(p.nu0 + spectral.excess(p, w), rel=1e-15)


def test_density_table():
    sd = spectral.SpectralDensity.tabulate(p_at(0.5), n_points=11)
    t = sd.table()
    assert t.shape == (11, 4)
    assert np.allclose(t[:, 2], t[:, 1] + t[:, 3])


@pytest.mark.parametrize("eta,omega", sorted(SUM_RULE_MPMATH))
def test_sum_rule_against_mpmath(eta, omega):
    p = ModelParams(rho=eta / 2, Omega=omega, omega_max=10.0)
    ref = SUM_RULE_MPMATH[(eta, omega)]
    assert spectral.sum_rule(p) == pytest.approx(ref, abs=1e-8)
    assert spectral.sum_rule_contour(p) == pytest.approx(ref, abs=1e-8)


@given(ratio=st.floats(0.01, 2.0), m=st.floats(0.2, 5.0), omega=st.floats(0.2, 5.0))
def test_sum_rule_routes_agree(ratio, m, omega):
    p = with_damping_ratio(ModelParams(m=m, Omega=omega, omega_max=100.0), ratio)
    assert spectral.sum_rule(p) == pytest.approx(1.0, abs=1e-8)
    assert spectral.sum_rule_contour(p) == pytest.approx(1.0, abs=1e-8)


def test_sum_rule_critical_damping():
    p = p_at(2.0)
    assert spectral.sum_rule_contour(p) == pytest.approx(1.0, abs=1e-10)


def test_narrow_peak_sum_rule():
    assert spectral.sum_rule(p_at(0.01)) == pytest.approx(1.0, abs=1e-8)


def test_occupation_validation():
    with pytest.raises(ParameterError):
        OccupationGroup(1.0, 0.5, 1, 1.0)
    with pytest.raises(ParameterError):
        OccupationGroup(0.0, 1.0, 1, 1.5)
    with pytest.raises(ParameterError):
        OccupationSpec(((0.0, 1.0, 1, 1.0), (0.5, 2.0, 2, 1.0)))
    occ = OccupationSpec(((0.0, 1.0, 1, 1.0), (1.0, 2.0, 2, 1.5)))
    assert list(occ.occupation([0.5, 1.0, 1.99, 2.0])) == [1.0, 1.5, 1.5, 0.0]


def test_first_excited_everywhere_triples_ground():
    p = p_at(0.2, omega_max=50.0)
    ground = spectral.particle_energy(p)
    excited = spectral.particle_energy(p, OccupationSpec.uniform(1.0))
    assert excited == pytest.approx(3 * ground, rel=1e-9)


@given(n1=st.floats(0.0, 1.0), n2=st.floats(0.0, 1.0), b=st.floats(0.3, 3.0))
def test_energy_monotone_in_occupation(n1, n2, b):
    p = p_at(0.3, omega_max=20.0)
    lo, hi = sorted((n1, n2))
    e_lo = spectral.particle_energy(p, OccupationSpec(((0.1, b, 1, lo),)))
    e_hi = spectral.particle_energy(p, OccupationSpec(((0.1, b, 1, hi),)))
    assert e_hi >= e_lo - 1e-12


def test_continuity_in_group_boundary():
    c = spectral.continuity_check(p_at(0.1))
    assert c.max_step <= c.lipschitz_bound
    assert c.max_jump < 1e-9


def test_weak_coupling_examples():
    p = p_at(0.01, omega_max=100.0)
    assert spectral.ground_state_energy_weak_coupling(p_at(1e-14, omega_max=100.0)) == pytest.approx(
        0.5 * p.hbar * p.Omega, rel=1e-12)
    doubled = spectral.ground_state_energy_weak_coupling(p, omega_max=200.0)
    step = doubled - spectral.ground_state_energy_weak_coupling(p)
    assert step == pytest.approx(p.hbar * p.eta / (2 * math.pi * p.m) * math.log(2), rel=1e-12)
    with pytest.raises(OutsideWeakCoupling):
        spectral.ground_state_energy_weak_coupling(p_at(0.1))


def test_ground_energy_total_within_one_percent():
    rep = spectral.ground_state_report(p_at(0.01, omega_max=1000.0))
    assert abs(rep.discrepancy) / rep.closed_form < 1e-2


@pytest.mark.parametrize("ratio", [0.01, 0.05])
def test_log_cutoff_slope(ratio):
    p = p_at(ratio, omega_max=1e4)
    slope = spectral.log_cutoff_slope(p, np.geomspace(1e3, 1e4, 5))
    assert slope == pytest.approx(p.hbar * p.eta / (2 * math.pi * p.m), rel=0.03)


def test_mode_count_and_histogram():
    from string_polaron.modes import roots_below

    p = p_at(1.0, L=1000.0, omega_max=5.0)
    w, _ = roots_below(p, 3.0)
    edges = np.linspace(0, 3.0, 16)
    counts, expected = spectral.root_histogram(w, edges, p)
    assert counts.sum() == w.size
    assert np.all(np.abs(counts - expected) <= 3 * np.sqrt(expected))
    assert spectral.mode_count(p, 0.0) == 0.0
