"""Dressed relaxation, excitation and dephasing rates.

Two routes compute the same quantities:

* the scalar functions (:func:`gamma_m`, :func:`total_rates`, ...) evaluate
  one bias point term by term and keep the per-photon-number breakdown;
* :func:`dressed_coefficients` / :func:`rate_arrays` evaluate many points at
  once.  All rates are linear in the spectral parameters, so the
  coefficients depend only on the bias and can be reused while fitting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import ConvergenceError
from .model import (
    KB_OVER_H,
    AtGap,
    BiasArrays,
    BiasPoint,
    EnvironmentSpectrum,
    Harmonic,
    Zero,
    bessel_j,
    correction_factor_a,
    spectral_density_q,
    spectral_density_x,
)

TAIL_TOLERANCE = 1e-6


def default_m_max(n: int) -> int:
    return max(20, int(n) + 10)


@dataclass(frozen=True)
class RateSet:
    """All dressed rates at one bias point (1/s), plus T_eff [K] and s_z0."""

    gamma_rel: float
    gamma_exc: float
    gamma_1: float
    gamma_phi_pure: float
    gamma_2: float
    t_eff: float
    s_z0: float
    per_m: list = field(default_factory=list, compare=False)


def _cos_sin2(bias):
    """cos(eta) and sin^2(eta) from the detuning geometry.

    Using eps / sqrt(eps^2 + delta^2) makes the mirror eps -> -eps an exact
    sign flip of cos(eta); the stored angle is the fallback for the poles.
    """
    split = math.hypot(bias.eps, bias.delta_n)
    if split > 0 and math.isfinite(split):
        return bias.eps / split, (bias.delta_n / split) ** 2
    ce = math.cos(bias.eta)
    return ce, (1.0 - ce) * (1.0 + ce)


def angle_terms(bias):
    """Vectorised :func:`_cos_sin2` for :class:`BiasArrays`."""
    split = np.hypot(bias.eps, bias.delta_n)
    ok = (split > 0) & np.isfinite(split)
    safe = np.where(ok, split, 1.0)
    eta = np.nan_to_num(bias.eta, nan=0.5 * np.pi)
    ce = np.where(ok, bias.eps / safe, np.cos(eta))
    sin2 = np.where(ok, (bias.delta_n / safe) ** 2, (1.0 - ce) * (1.0 + ce))
    return ce, sin2


def gamma_std(bias: BiasPoint, env: EnvironmentSpectrum, A: float, f_rf: float = 0.0):
    """Standard (photon-number conserving) relaxation and pure dephasing."""
    a2 = A * A
    ce, sin2 = _cos_sin2(bias)
    s_gap = spectral_density_q(env, AtGap(bias.delta_n, f_rf))
    rel = a2 * sin2 * s_gap
    phi = a2 * ce * ce * spectral_density_q(env, Zero())
    return rel, phi


def _bessel_pair(m: int, bias: BiasPoint):
    n = bias.n_res
    return bessel_j(m - n, bias.alpha), bessel_j(-(m + n), bias.alpha)


def gamma_m(m: int, bias: BiasPoint, env: EnvironmentSpectrum):
    """(relaxation, excitation, dephasing) for transitions exchanging m photons."""
    if m < 1:
        raise ValueError("m must be >= 1")
    b_m = bias.e_j**2 * spectral_density_q(env, Harmonic(m)) / (m * bias.f_mu) ** 2
    jp, jm = _bessel_pair(m, bias)
    ce, sin2 = _cos_sin2(bias)
    # cos^2(eta/2) jp + sin^2(eta/2) jm, written through cos(eta)
    even, odd = 0.5 * (jp + jm), 0.5 * (jp - jm)
    rel = b_m * (even + ce * odd) ** 2
    exc = b_m * (even - ce * odd) ** 2
    phi = 0.25 * b_m * sin2 * (jp - jm) ** 2
    return rel, exc, phi


def gamma_phi_x(m: int, bias: BiasPoint, env: EnvironmentSpectrum) -> float:
    """Second-order pure dephasing through the effective sigma_x noise."""
    if m not in (0, 1):
        raise ValueError("only m = 0 and m = 1 contribute")
    jp, jm = _bessel_pair(m, bias)
    return _cos_sin2(bias)[1] * (jm + jp) ** 2 * spectral_density_x(env, m)


def effective_temperature(gamma_rel: float, gamma_exc: float, delta_n: float) -> float:
    """Signed temperature reproducing the steady-state populations [K].

    Equal rates give ``+inf``; a vanishing excitation (relaxation) rate gives
    ``+0.0`` (``-0.0``), i.e. exact ground state (exact inversion).
    """
    if gamma_rel < 0 or gamma_exc < 0:
        raise ValueError("rates must be >= 0")
    if gamma_rel == gamma_exc:
        return math.inf
    if gamma_exc == 0:
        return 0.0
    if gamma_rel == 0:
        return -0.0
    return delta_n / (KB_OVER_H * math.log(gamma_rel / gamma_exc))


def polarization(gamma_rel: float, gamma_exc: float) -> float:
    total = gamma_rel + gamma_exc
    if total <= 0:
        return 0.0
    return (gamma_rel - gamma_exc) / total


def boltzmann_factor(delta_n, t_bath):
    if t_bath <= 0:
        return np.zeros_like(np.asarray(delta_n, dtype=float))
    return np.exp(-np.asarray(delta_n, dtype=float) / (KB_OVER_H * t_bath))


def total_rates(
    bias: BiasPoint,
    env: EnvironmentSpectrum,
    m_max: int | None = None,
    f_rf: float = 0.0,
) -> RateSet:
    """Sum standard, m-photon and second-order terms at one bias point."""
    if m_max is None:
        m_max = default_m_max(bias.n_res)
    A = correction_factor_a(bias.alpha, bias.n_res, bias.e_j, bias.f_mu, m_max)
    rel_std, phi_std = gamma_std(bias, env, A, f_rf)

    per_m = []
    for m in range(1, m_max + 1):
        per_m.append((m, *gamma_m(m, bias, env)))
    terms = np.array([row[1:] for row in per_m])
    m_total = terms.sum()
    if m_total > 0 and terms[-3:].sum() > TAIL_TOLERANCE * m_total:
        raise ConvergenceError(
            f"m-sum not converged at m_max={m_max} (alpha={bias.alpha:.4g})"
        )
    rel = rel_std + terms[:, 0].sum()
    exc = terms[:, 1].sum()
    exc += rel * float(boltzmann_factor(bias.delta_n, env.t_bath))
    phi = phi_std + terms[:, 2].sum()
    phi += gamma_phi_x(0, bias, env) + gamma_phi_x(1, bias, env)
    g1 = rel + exc
    return RateSet(
        gamma_rel=rel,
        gamma_exc=exc,
        gamma_1=g1,
        gamma_phi_pure=phi,
        gamma_2=phi + 0.5 * g1,
        t_eff=effective_temperature(rel, exc, bias.delta_n),
        s_z0=polarization(rel, exc),
        per_m=per_m,
    )


@dataclass(frozen=True)
class DressedCoefficients:
    """Per-point rate coefficients (flat arrays).

    With ``s_gap`` the spectral density at the dressed gap:

    * ``gamma_rel = a_corr**2 sin^2(eta) s_gap + c_rel s_ohmic``
    * ``gamma_exc = c_exc s_ohmic`` (+ thermal term)
    * ``gamma_phi_pure = a_corr**2 cos^2(eta) s_phi0 + c_phi s_ohmic
      + x0 s_x0 + x1 s_x_mu``

    ``tail`` is the weight of the last three m-terms in the m-sum.
    """

    a_corr: np.ndarray
    c_rel: np.ndarray
    c_exc: np.ndarray
    c_phi: np.ndarray
    x0: np.ndarray
    x1: np.ndarray
    tail: np.ndarray
    m_max: int

    @property
    def converged(self) -> np.ndarray:
        return self.tail <= TAIL_TOLERANCE


def dressed_coefficients(bias: BiasArrays, e_j: float, f_mu: float, m_max: int | None = None):
    if m_max is None:
        m_max = default_m_max(int(bias.n_res.max(initial=0)))
    ce, sin2 = angle_terms(bias)
    out = _backend.dressed_coefficients(bias.alpha, ce, sin2, bias.n_res, e_j / f_mu, int(m_max))
    return DressedCoefficients(*out, m_max=int(m_max))


@dataclass(frozen=True)
class RateArrays:
    gamma_rel: np.ndarray
    gamma_exc: np.ndarray
    gamma_1: np.ndarray
    gamma_phi_pure: np.ndarray
    gamma_2: np.ndarray
    s_z0: np.ndarray

    def t_eff(self, delta_n) -> np.ndarray:
        return np.array([
            effective_temperature(r, e, d)
            for r, e, d in zip(self.gamma_rel, self.gamma_exc, np.broadcast_to(delta_n, self.gamma_rel.shape))
        ])


def rate_arrays(
    coef: DressedCoefficients,
    bias: BiasArrays,
    env: EnvironmentSpectrum,
    f_rf: float = 0.0,
) -> RateArrays:
    """Vectorised :func:`total_rates` from precomputed coefficients."""
    ce, sin2 = angle_terms(bias)
    cos2 = ce * ce
    a2 = coef.a_corr**2
    s_gap = env.rel_model.at(np.abs(bias.delta_n - f_rf))
    rel = a2 * sin2 * s_gap + coef.c_rel * env.s_ohmic
    exc = coef.c_exc * env.s_ohmic + rel * boltzmann_factor(bias.delta_n, env.t_bath)
    phi = (
        a2 * cos2 * env.s_phi0
        + coef.c_phi * env.s_ohmic
        + coef.x0 * env.s_x0
        + coef.x1 * env.s_x_mu
    )
    g1 = rel + exc
    s_z0 = np.divide(rel - exc, g1, out=np.zeros_like(g1), where=g1 > 0)
    return RateArrays(rel, exc, g1, phi, phi + 0.5 * g1, s_z0)
