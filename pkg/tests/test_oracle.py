import math

import numpy as np
import pytest

from dressedtls.errors import ConvergenceError
from dressedtls.model import EnvironmentSpectrum, dressed_gap
from dressedtls.oracle import (
    MIN_STEPS,
    compare_rates,
    gap_check,
    golden_rule_rates,
    locate_degeneracy,
    loglog_slope,
    matrix_element_harmonics,
    oracle_check,
    propagate_period,
)

F = 7e9
UNIT_OHMIC = EnvironmentSpectrum(s_ohmic=1.0)


def folded(e):
    r = (e + F / 2) % F - F / 2
    return F / 2 if r == -F / 2 else r


def test_uncoupled_quasi_energies():
    sol = propagate_period(3e9, 0.0, 1.3, F)
    np.testing.assert_allclose(sorted(sol.quasi_energies), sorted([folded(1.5e9), folded(-1.5e9)]),
                               rtol=0, atol=1e-3)
    sol = propagate_period(9e9, 0.0, 0.7, F)
    np.testing.assert_allclose(sorted(sol.quasi_energies), sorted([folded(4.5e9), folded(-4.5e9)]),
                               rtol=0, atol=1e-3)


def test_static_quasi_energies():
    e_ch, e_j = 2e9, 1.5e9
    sol = propagate_period(e_ch, e_j, 0.0, F)
    half = 0.5 * math.hypot(e_ch, e_j)
    np.testing.assert_allclose(sorted(sol.quasi_energies), [-half, half], rtol=1e-10)
    assert sol.gap == pytest.approx(2 * half, rel=1e-10)


@pytest.mark.parametrize("alpha", [0.3, 1.1, 2.5])
def test_solution_invariants(alpha):
    sol = propagate_period(F + 0.2e9, 0.1 * F, alpha, F)
    mono = sol.monodromy
    assert np.abs(mono.conj().T @ mono - np.eye(2)).max() < 1e-10
    assert np.all(np.isreal(sol.quasi_energies))
    assert np.all(np.abs(sol.quasi_energies) <= F / 2)
    s = sol.quasi_energies.sum()
    assert min(abs(s), abs(abs(s) - F)) < 1e-6 * F
    # Fourier series reproduces the propagated modes on 32 test times
    idx = np.linspace(0, len(sol.times) - 1, 32).astype(int)
    recon = sol.reconstruct(sol.times[idx])
    assert np.abs(recon - sol.samples[idx]).max() < 1e-8


def test_step_floor_and_forced_failure():
    with pytest.raises(ValueError):
        propagate_period(F, 0.1 * F, 0.5, F, steps=MIN_STEPS - 1)
    with pytest.raises(ConvergenceError):
        propagate_period(F, 0.1 * F, 0.5, F, max_doublings=0)


def test_fourier_tail_guard():
    sol = propagate_period(F, 0.02 * F, 6.0, F, m_max=20)
    with pytest.raises(ConvergenceError, match="tail"):
        matrix_element_harmonics(sol, 2)


def test_uncoupled_rates_vanish():
    sol = propagate_period(F + 1e8, 0.0, 0.8, F)
    rel, exc = golden_rule_rates(sol, UNIT_OHMIC)
    assert np.all(rel == 0) and np.all(exc < 1e-30)


def test_static_transverse_qubit():
    # eta = pi/2: sigma_z is purely transverse with unit matrix element at k = 0
    sol = propagate_period(0.0, 1e9, 0.0, F)
    down, up = matrix_element_harmonics(sol, 10)
    assert abs(down[0]) == pytest.approx(1.0, abs=1e-10)
    assert abs(up[0]) == pytest.approx(1.0, abs=1e-10)
    assert np.abs(down[1:]).max() < 1e-10 and np.abs(up[1:]).max() < 1e-10


@pytest.mark.parametrize("alpha", [0.4, 0.8, 1.6])
def test_gap_error_quadratic(alpha):
    errs = [gap_check(1, alpha, r * F, F)[2] for r in (0.01, 0.02, 0.04)]
    assert errs[1] / errs[0] == pytest.approx(4.0, rel=0.15)
    assert loglog_slope([0.01, 0.02, 0.04], errs) == pytest.approx(2.0, abs=0.3)
    for r, e in zip((0.01, 0.02, 0.04), errs):
        assert e <= 5 * r * r


def test_degeneracy_near_resonance():
    e_j = 0.02 * F
    e_ch, gap = locate_degeneracy(1, 0.8, e_j, F)
    assert abs(e_ch - F) < 0.05 * e_j
    assert gap == pytest.approx(abs(dressed_gap(1, 0.8, e_j)), rel=5 * 0.02**2)


def test_charge_reversal_symmetry():
    # e_ch -> -e_ch is conjugation by sigma_x plus a half-period shift
    a = golden_rule_rates(propagate_period(6.6e9, 0.03 * F, 0.9, F), UNIT_OHMIC)
    b = golden_rule_rates(propagate_period(-6.6e9, 0.03 * F, 0.9, F), UNIT_OHMIC)
    scale = max(a[0].max(), a[1].max())
    np.testing.assert_allclose(a[0], b[0], rtol=0, atol=1e-8 * scale)
    np.testing.assert_allclose(a[1], b[1], rtol=0, atol=1e-8 * scale)


def test_mirror_about_resonance_breaks_at_first_order():
    # the dressed-frame eps -> -eps symmetry is a first-order statement;
    # exact numerics break it by O(e_j / f_mu)
    asym = []
    for r in (0.01, 0.02):
        e0, g0 = locate_degeneracy(1, 0.8, r * F, F)
        a = golden_rule_rates(propagate_period(e0 + g0, r * F, 0.8, F), UNIT_OHMIC)
        b = golden_rule_rates(propagate_period(e0 - g0, r * F, 0.8, F), UNIT_OHMIC)
        keep = a[0] > 1e-8 * a[0].max()
        asym.append(np.max(np.abs(a[0][keep] - b[1][keep]) / a[0][keep]))
    assert asym[0] < 5 * 0.01
    assert asym[1] / asym[0] == pytest.approx(2.0, rel=0.2)


def test_compare_rates_identical_and_perturbed():
    rel = np.array([1.0, 0.5, 1e-3, 0.0])
    exc = np.array([0.2, 0.1, 1e-4, 0.0])
    same = compare_rates(rel, exc, rel, exc, 1e-6)
    assert same.max_error == 0.0 and same.passed
    assert same.to_dict()["pass"] is True

    e_j = 0.02 * F
    a = oracle_check(1, 0.8, e_j, F)
    num_rel = np.array(a["comparison"]["numeric_rel"])
    num_exc = np.array(a["comparison"]["numeric_exc"])
    from dressedtls.oracle import analytic_per_m

    d_rel, d_exc = analytic_per_m(1, 0.8, math.pi / 2, 2 * e_j, F, UNIT_OHMIC, 20)
    bad = compare_rates(d_rel, d_exc, num_rel, num_exc, 5 * 0.02**2)
    assert not bad.passed
    assert bad.max_error > 0.5


def test_oracle_check_report():
    doc = oracle_check(1, 0.8, 0.02 * F, F)
    cmp = doc["comparison"]
    assert set(cmp) >= {"m", "rel_error", "exc_error", "max_error", "tolerance", "pass"}
    assert cmp["tolerance"] == pytest.approx(5 * 0.02**2)
    assert len(cmp["m"]) == 20
    assert doc["gap_numeric"] == pytest.approx(doc["gap_analytic"], rel=5 * 0.02**2)
    # resonant term carries the rate and agrees to first order in e_j / f_mu
    rel_err = np.array(cmp["rel_error"], dtype=float)
    assert rel_err[0] < 5 * 0.02
