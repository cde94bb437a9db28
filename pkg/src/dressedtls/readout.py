"""Steady-state Bloch response of the dressed charge and the tank reflection.

The dressed two-level system loads the tank as an effective parallel RC:
``C_eff = beta Q_i / V_rf`` and ``R_eff = V_rf / (2 pi f_rf beta Q_q)``.
Charges are linear in the probe amplitude apart from the saturation term,
so the load is computed per unit probe amplitude and stays finite as
``n_rf -> 0``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import GainDivergenceError, SingularError
from .model import E_CHARGE, H_PLANCK, BiasPoint, DeviceParams, TankParams
from .rates import RateSet

# beta^2 (2e)^2 / 2h prefactor of the two-level quantum capacitance, per beta^2
_QC_PREFACTOR = (2.0 * E_CHARGE) ** 2 / (2.0 * H_PLANCK)
DIVERGENCE_GUARD = 1e-12


@dataclass(frozen=True)
class ResponsePoint:
    q_i: float
    q_q: float
    c_eff: float
    r_eff: float
    s11: complex


def bloch_steady_state(delta_omega: float, omega_rabi: float, rates: RateSet):
    """Transverse Bloch components (u, v) with saturation denominator."""
    g1, g2 = rates.gamma_1, rates.gamma_2
    if g1 == 0 or g2 == 0:
        raise SingularError("Bloch steady state needs gamma_1 > 0 and gamma_2 > 0")
    d = delta_omega**2 + g2**2 + omega_rabi**2 * g2 / g1
    return (
        rates.s_z0 * omega_rabi * delta_omega / d,
        rates.s_z0 * omega_rabi * g2 / d,
    )


def _load_per_probe(eta, splitting, delta_n, s_z0, g1, g2, device: DeviceParams):
    """Resonant charges per unit n_rf, curvature capacitance and V_rf per n_rf."""
    sin_eta = np.sin(eta)
    rabi_unit = 2.0 * np.pi * device.e_q * sin_eta
    rabi = device.n_rf * rabi_unit
    d_omega = 2.0 * np.pi * (splitting - device.f_rf)
    denom = d_omega**2 + g2**2 + rabi**2 * g2 / g1
    u_unit = s_z0 * rabi_unit * d_omega / denom
    v_unit = s_z0 * rabi_unit * g2 / denom
    qi_res = E_CHARGE * sin_eta * u_unit
    qq = E_CHARGE * sin_eta * v_unit
    c_qc = device.beta**2 * _QC_PREFACTOR * delta_n**2 * s_z0 / splitting**3
    v_unit_rf = 2.0 * E_CHARGE / device.c_rf
    return qi_res, qq, c_qc, v_unit_rf, rabi


def charge_quadratures(bias: BiasPoint, rates: RateSet, params: DeviceParams):
    """In-phase and quadrature dressed charge [C] at the configured probe amplitude."""
    qi_res, qq, c_qc, v_unit, rabi = _scalar_load(bias, rates, params)
    qi = qi_res + c_qc / params.beta * v_unit
    return params.n_rf * qi, params.n_rf * qq


def _scalar_load(bias, rates, params):
    if rates.gamma_1 == 0 or rates.gamma_2 == 0:
        raise SingularError("Bloch steady state needs gamma_1 > 0 and gamma_2 > 0")
    out = _load_per_probe(
        bias.eta, bias.splitting, bias.delta_n, rates.s_z0,
        rates.gamma_1, rates.gamma_2, params,
    )
    if out[4] > rates.gamma_2:
        warnings.warn(
            "probe Rabi frequency exceeds gamma_2; response is outside linear response",
            stacklevel=3,
        )
    return tuple(float(x) for x in out)


def effective_load(bias: BiasPoint, rates: RateSet, params: DeviceParams):
    """(C_eff [F], R_eff [Ohm]); R_eff is signed and ``inf`` without absorption."""
    qi_res, qq, c_qc, v_unit, _ = _scalar_load(bias, rates, params)
    c_eff = params.beta * qi_res / v_unit + c_qc
    g_eff = 2.0 * math.pi * params.f_rf * params.beta * qq / v_unit
    return c_eff, (1.0 / g_eff if g_eff != 0 else math.inf)


def reflection_coefficient(c_eff, r_eff, tank: TankParams, f_probe: float):
    """S11 of the tank loaded by C_eff || R_eff, fed from a ``z0`` line."""
    g_eff = np.divide(1.0, r_eff, out=np.zeros_like(np.asarray(r_eff, dtype=float)),
                      where=np.isfinite(r_eff))
    return reflection_from_admittance(c_eff, g_eff, tank, f_probe)


def reflection_from_admittance(c_eff, g_eff, tank: TankParams, f_probe: float):
    w = 2.0 * math.pi * f_probe
    g_int = 0.0 if math.isinf(tank.q_int) else 1.0 / tank.r_int
    y = 1.0 / (1j * w * tank.l_ind) + 1j * w * (tank.c_osc + np.asarray(c_eff)) + g_int + np.asarray(g_eff)
    num = 1.0 - tank.z0 * y
    den = 1.0 + tank.z0 * y
    if np.any(np.abs(den) <= DIVERGENCE_GUARD):
        raise GainDivergenceError("negative load cancels the line impedance")
    s11 = num / den
    return complex(s11) if np.ndim(s11) == 0 else s11


def response_point(bias: BiasPoint, rates: RateSet, params: DeviceParams) -> ResponsePoint:
    q_i, q_q = charge_quadratures(bias, rates, params)
    c_eff, r_eff = effective_load(bias, rates, params)
    s11 = reflection_coefficient(c_eff, r_eff, params.tank, params.f_rf)
    return ResponsePoint(q_i, q_q, c_eff, r_eff, s11)


def load_arrays(bias, rates, device: DeviceParams):
    """Vectorised (C_eff, G_eff = 1/R_eff) and a mask of singular points."""
    singular = (rates.gamma_1 <= 0) | (rates.gamma_2 <= 0) | bias.degenerate
    g1 = np.where(singular, 1.0, rates.gamma_1)
    g2 = np.where(singular, 1.0, rates.gamma_2)
    split = np.where(singular, 1.0, bias.splitting)
    eta = np.where(singular, 0.0, bias.eta)
    qi_res, qq, c_qc, v_unit, _ = _load_per_probe(
        eta, split, bias.delta_n, rates.s_z0, g1, g2, device
    )
    c_eff = device.beta * qi_res / v_unit + c_qc
    g_eff = 2.0 * np.pi * device.f_rf * device.beta * qq / v_unit
    return c_eff, g_eff, singular


def reflection_arrays(c_eff, g_eff, tank: TankParams, f_probe: float):
    """Vectorised S11; diverging points come back as NaN with a mask."""
    w = 2.0 * math.pi * f_probe
    g_int = 0.0 if math.isinf(tank.q_int) else 1.0 / tank.r_int
    y = 1.0 / (1j * w * tank.l_ind) + 1j * w * (tank.c_osc + c_eff) + g_int + g_eff
    den = 1.0 + tank.z0 * y
    bad = np.abs(den) <= DIVERGENCE_GUARD
    s11 = (1.0 - tank.z0 * y) / np.where(bad, 1.0, den)
    s11[bad] = np.nan
    return s11, bad
