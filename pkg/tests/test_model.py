import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dressedtls import _backend
from dressedtls.errors import DegenerateError, DomainError
from dressedtls.model import (
    KB_OVER_H,
    AtGap,
    BiasPoint,
    DeviceParams,
    EnvironmentSpectrum,
    Harmonic,
    LorentzianPeak,
    PerSliceScalar,
    TankParams,
    Zero,
    bessel_j,
    bias_arrays,
    charging_energy,
    correction_factor_a,
    dressed_gap,
    ladder_energy,
    mixing_angle,
    normalized_amplitude,
    resonance_index,
    spectral_density_q,
    spectral_density_x,
)

mpmath.mp.dps = 40


def series_j(n, x):
    """Power series of J_n in extended precision (independent oracle)."""
    k = abs(n)
    x = mpmath.mpf(x)
    term = (x / 2) ** k / mpmath.factorial(k)
    total = term
    j = 0
    while True:
        j += 1
        term *= -(x / 2) ** 2 / (j * (j + k))
        total += term
        if abs(term) < mpmath.mpf(10) ** -35 and j > x:
            break
    val = float(total)
    return -val if n < 0 and k % 2 else val


# --- Bessel --------------------------------------------------------------

@pytest.mark.parametrize("order,x,expected", [(0, 0.0, 1.0), (1, 0.0, 0.0), (5, 0.0, 0.0)])
def test_bessel_at_zero(order, x, expected):
    assert bessel_j(order, x) == expected


def test_bessel_first_maximum():
    assert bessel_j(1, 1.8412) == pytest.approx(0.5819, abs=1e-4)
    assert abs(bessel_j(1, 1.8412) - series_j(1, 1.8412)) <= 1e-12


@pytest.mark.parametrize("order", [0, 1, 2, 3, 7, 15, 40])
@pytest.mark.parametrize("x", [1e-3, 0.3, 1.0, 3.8317, 7.5, 12.0, 25.0])
def test_bessel_matches_series_oracle(order, x):
    assert abs(bessel_j(order, x) - series_j(order, x)) <= 1e-12


@pytest.mark.parametrize("order", [0, 3, 50, 120, 999])
@pytest.mark.parametrize("x", [40.0, 77.7, 100.0])
def test_bessel_large_argument_against_mpmath(order, x):
    assert abs(bessel_j(order, x) - float(mpmath.besselj(order, x))) <= 1e-12


@given(st.integers(0, 200), st.floats(0.0, 100.0))
def test_bessel_negative_order_exact(n, x):
    assert bessel_j(-n, x) == (-1) ** n * bessel_j(n, x)


@given(st.integers(1, 30), st.floats(0.1, 50.0))
def test_bessel_recurrence(n, x):
    lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x)
    assert abs(lhs - 2 * n / x * bessel_j(n, x)) <= 1e-9


@given(st.floats(0.0, 60.0))
def test_bessel_normalisation(x):
    big_n = int(x) + 40
    tab = _backend.bessel_table(x, big_n)
    total = tab[0] ** 2 + 2 * np.sum(tab[1:] ** 2)
    assert abs(total - 1.0) <= 1e-9


@pytest.mark.parametrize("order,x", [(1001, 1.0), (-1001, 1.0), (1, -0.1), (1, 100.5)])
def test_bessel_domain(order, x):
    with pytest.raises(DomainError):
        bessel_j(order, x)


# --- charge geometry -----------------------------------------------------

def test_charging_energy_examples():
    assert charging_energy(0.5, 62e9) == 0.0
    assert charging_energy(0.0, 62e9) == 62e9
    assert charging_energy(0.25, 62e9) == 31e9


def test_normalized_amplitude():
    assert normalized_amplitude(0.0, 1.0, 62e9, 7e9) == 0.0
    assert normalized_amplitude(0.05, 1.0, 62e9, 7e9) == pytest.approx(0.886, abs=1e-3)
    a = normalized_amplitude(0.01, 1.0, 62e9, 7e9)
    assert normalized_amplitude(0.02, 1.0, 62e9, 7e9) == pytest.approx(2 * a, rel=1e-15)
    with pytest.raises(ValueError):
        normalized_amplitude(-1.0, 1.0, 62e9, 7e9)


def test_resonance_index_examples():
    assert resonance_index(21e9, 7e9) == 3
    assert resonance_index(0.0, 7e9) == 0
    assert resonance_index(10.4e9, 7e9) == 1
    b = BiasPoint.at(charging_inverse(10.4e9), 0.0, DeviceParams())
    assert b.eps == pytest.approx(3.4e9, rel=1e-9)


def charging_inverse(e_ch, e_q=62e9):
    return 0.5 * (1 - e_ch / e_q)


def test_resonance_index_ties_round_to_even():
    assert resonance_index(3.5e9, 7e9) == 0
    assert resonance_index(10.5e9, 7e9) == 2
    assert resonance_index(17.5e9, 7e9) == 2


@given(st.floats(-60e9, 60e9))
def test_detuning_within_half_quantum(e_ch):
    n = resonance_index(e_ch, 7e9)
    assert n >= 0
    assert abs(abs(e_ch) - n * 7e9) <= 3.5e9 * (1 + 1e-12)


def test_dressed_gap_examples():
    assert dressed_gap(0, 0.0, 2.6e9) == 2.6e9
    assert dressed_gap(1, 0.0, 2.6e9) == 0.0
    assert dressed_gap(1, 1.8412, 2.6e9) == pytest.approx(1.513e9, rel=1e-3)


@given(st.integers(0, 20), st.floats(0.0, 50.0))
def test_dressed_gap_consistent_with_bessel(n, alpha):
    assert dressed_gap(n, alpha, 2.6e9) == abs(2.6e9 * bessel_j(n, alpha))


def test_mixing_angle_examples():
    assert mixing_angle(0.0, 1e9) == math.pi / 2
    assert mixing_angle(1e9, 1e-3) == pytest.approx(0.0, abs=1e-9)
    assert mixing_angle(-1e9, 1e-3) == pytest.approx(math.pi, abs=1e-9)
    with pytest.raises(DegenerateError):
        mixing_angle(0.0, 0.0)


@given(st.floats(-1e10, 1e10), st.floats(1e-3, 1e10))
def test_mixing_angle_mirror_exact(eps, delta):
    eta = mixing_angle(eps, delta)
    assert 0.0 <= eta <= math.pi
    if eps > 0:
        assert mixing_angle(-eps, delta) == math.pi - eta
    elif eps < 0:
        # pi - (pi - x) is x only up to rounding
        assert mixing_angle(-eps, delta) == pytest.approx(math.pi - eta, abs=4.5e-16)


# --- ladder --------------------------------------------------------------

def test_ladder_examples(device):
    b = BiasPoint.from_angle(1, 0.8, math.pi / 2, device.e_j, device.f_mu)
    assert ladder_energy(0, "excited", b) == pytest.approx(0.5 * b.delta_n, rel=1e-12)
    assert ladder_energy(3, "ground", b) - ladder_energy(2, "ground", b) == pytest.approx(device.f_mu)
    undriven = BiasPoint.at(0.5, 0.0, device)
    assert ladder_energy(0, "excited", undriven) == pytest.approx(device.e_j / 2)
    with pytest.raises(ValueError):
        ladder_energy(0, "middle", b)


@given(st.floats(0.0, 1.0), st.floats(0.0, 0.2))
def test_ladder_splitting(n_g, a_mu):
    dev = DeviceParams()
    b = BiasPoint.at(n_g, a_mu, dev)
    diff = ladder_energy(2, "excited", b) - ladder_energy(2, "ground", b)
    assert diff == pytest.approx(math.hypot(b.eps, b.delta_n), rel=1e-9, abs=1e-3)
    assert 0 <= b.eta <= math.pi
    assert b.delta_n >= 0
    assert abs(b.eps) <= dev.f_mu / 2 * (1 + 1e-12)


def test_bias_arrays_match_scalar(device):
    ng = np.linspace(0.3, 0.7, 41)
    amp = np.full(ng.shape, 0.02)
    ba = bias_arrays(ng, amp, device)
    for i in range(0, 41, 5):
        b = BiasPoint.at(ng[i], amp[i], device)
        assert ba.eps[i] == pytest.approx(b.eps, abs=1e-3)
        assert ba.delta_n[i] == pytest.approx(b.delta_n, rel=1e-13)
        assert ba.n_res[i] == b.n_res
        if not ba.degenerate[i]:
            assert ba.eta[i] == pytest.approx(b.eta, abs=1e-13)


# --- correction factor ---------------------------------------------------

def test_correction_factor_examples():
    assert correction_factor_a(0.0, 0, 2.6e9, 7e9) == 1.0
    assert correction_factor_a(1.3, 2, 0.0, 7e9) == 1.0
    a = correction_factor_a(1.0, 1, 2.6e9, 7e9, 20)
    assert 0.9 < a < 1.0


def test_correction_factor_direct_sum():
    alpha, n, r = 1.0, 1, 2.6 / 7
    direct = 1 - (r / 2) ** 2 * sum(
        float(mpmath.besselj(m - n, alpha)) ** 2 / m**2 for m in range(-20, 21) if m != 0
    )
    assert correction_factor_a(alpha, n, 2.6e9, 7e9, 20) == pytest.approx(direct, abs=1e-14)


@given(st.floats(0.0, 20.0), st.integers(0, 5))
def test_correction_factor_converged_and_monotone(alpha, n):
    a20 = correction_factor_a(alpha, n, 2.6e9, 7e9, 40)
    a30 = correction_factor_a(alpha, n, 2.6e9, 7e9, 50)
    assert abs(a20 - a30) < 1e-10
    assert correction_factor_a(alpha, n, 3.0e9, 7e9, 40) <= a20


# --- parameters and spectra ----------------------------------------------

def test_tank_derived_capacitance():
    t = TankParams()
    assert t.c_osc == pytest.approx(1 / ((2 * math.pi * 0.65e9) ** 2 * 20e-9))
    with pytest.raises(ValueError):
        TankParams(l_ind=0.0)


@pytest.mark.parametrize("kwargs", [dict(e_j=0.0), dict(beta=1.0), dict(beta=0.0), dict(n_rf=-1.0),
                                    dict(f_rf=-1.0)])
def test_device_validation(kwargs):
    with pytest.raises(ValueError):
        DeviceParams(**kwargs)


def test_device_warns_on_large_perturbation():
    with pytest.warns(UserWarning, match="e_j/f_mu"):
        DeviceParams(e_j=4e9)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        DeviceParams()


def test_spectral_density_examples():
    env = EnvironmentSpectrum(s_phi0=1.0, rel_model=PerSliceScalar(7.0), s_ohmic=2.0,
                              s_x0=3.0, s_x_mu=4.0)
    assert spectral_density_q(env, Harmonic(3)) == 6.0
    assert spectral_density_q(env, AtGap(1.234e9, 0.65e9)) == 7.0
    assert spectral_density_q(env, Zero()) == 1.0
    assert spectral_density_x(env, 0) == 3.0
    assert spectral_density_x(env, 1) == 4.0
    peak = env.with_params(rel_model=LorentzianPeak(1.0, 5.0, 1e7))
    assert spectral_density_q(peak, AtGap(0.65e9, 0.65e9)) == 6.0
    assert spectral_density_q(peak, AtGap(0.655e9, 0.65e9)) == pytest.approx(1.0 + 2.5)


def test_environment_validation():
    with pytest.raises(ValueError):
        EnvironmentSpectrum(s_ohmic=-1.0)
    with pytest.raises(ValueError):
        EnvironmentSpectrum(t_bath=-1.0)
    with pytest.raises(ValueError):
        LorentzianPeak(1.0, 1.0, 0.0)


def test_kb_over_h():
    assert KB_OVER_H == pytest.approx(2.0836619e10, rel=1e-7)
