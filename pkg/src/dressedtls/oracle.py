"""Brute-force Floquet check of the dressed-state gap and m-photon rates.

The driven two-level Hamiltonian (in Hz)

    H(t) = -(eps(t)/2) sz - (e_j/2) sx,   eps(t) = e_ch + alpha f_mu cos(2 pi f_mu t)

is propagated over one drive period.  Quasi-energies come from the
eigenphases of the monodromy matrix; the Floquet modes are sampled on the
integration grid and Fourier transformed to get the harmonic components of
the sigma_z matrix element, which feed a golden-rule rate per photon number.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import _backend
from .errors import ConvergenceError, UnitarityError
from .model import BiasPoint, EnvironmentSpectrum, Harmonic, dressed_gap, spectral_density_q
from .rates import gamma_m

MIN_STEPS = 1000
MONODROMY_TOL = 1e-10
UNITARITY_TOL = 1e-8
FOURIER_TAIL_TOL = 1e-6
_SZ = np.array([1.0, -1.0])


@dataclass
class FloquetSolution:
    """Quasi-energies [Hz] in (-f_mu/2, f_mu/2], ordered (lower, upper).

    ``modes[i, k]`` is the Fourier coefficient of harmonic ``k - K`` of the
    periodic mode ``i``; ``samples`` keeps the modes on the time grid.
    ``gap`` is the quasi-energy splitting folded into [0, f_mu/2].
    """

    quasi_energies: np.ndarray
    modes: np.ndarray
    monodromy: np.ndarray
    gap: float
    f_mu: float
    e_ch: float
    e_j: float
    alpha: float
    steps: int
    times: np.ndarray
    samples: np.ndarray

    @property
    def harmonics(self) -> np.ndarray:
        k = (self.modes.shape[1] - 1) // 2
        return np.arange(-k, k + 1)

    def reconstruct(self, t) -> np.ndarray:
        """Modes at times ``t`` from the truncated Fourier series, shape (len(t), 2, 2)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        phase = np.exp(2j * np.pi * self.f_mu * np.outer(t, self.harmonics))
        return np.einsum("tk,ikc->tic", phase, self.modes)


def _fold(e, f_mu):
    # reduce to (-f/2, f/2]
    r = -((-e + 0.5 * f_mu) % f_mu - 0.5 * f_mu)
    return np.where(r == -0.5 * f_mu, 0.5 * f_mu, r)


def _solve(e_ch, e_j, alpha, f_mu, steps, n_harm):
    us = _backend.magnus_propagate(float(e_ch), float(e_j), float(alpha), float(f_mu), int(steps))
    mono = us[-1]
    dev = np.abs(mono.conj().T @ mono - np.eye(2)).max()
    if dev > UNITARITY_TOL:
        raise UnitarityError(f"monodromy deviates from unitary by {dev:.3g} at {steps} steps")
    w, v = np.linalg.eig(mono)
    # Schmidt-orthonormalise the eigenvectors (degenerate monodromy guard)
    v[:, 0] /= np.linalg.norm(v[:, 0])
    v[:, 1] -= v[:, 0] * (v[:, 0].conj() @ v[:, 1])
    v[:, 1] /= np.linalg.norm(v[:, 1])
    e = -np.angle(w) / (2.0 * np.pi) * f_mu
    d = (e[0] - e[1]) % f_mu
    # pick representatives so that e_upper - e_lower = gap in [0, f/2]
    if d <= 0.5 * f_mu:
        up, lo, gap = 0, 1, d
    else:
        up, lo, gap = 1, 0, f_mu - d
    e_lo = float(e[lo])
    e_up = e_lo + gap
    times = np.arange(steps) / (steps * f_mu)
    vecs = v[:, [lo, up]]
    energies = np.array([e_lo, e_up])
    samples = np.einsum("tab,bi->tia", us[:-1], vecs) * np.exp(
        2j * np.pi * np.outer(times, energies)
    )[:, :, None]
    # Fourier coefficients c_k = <u(t) exp(-i k w t)>
    coeffs = np.fft.fft(samples, axis=0) / steps
    ks = np.arange(-n_harm, n_harm + 1)
    modes = np.transpose(coeffs[ks % steps], (1, 0, 2))
    qe = _fold(energies, f_mu)
    return mono, qe, gap, modes, times, samples


def propagate_period(e_ch: float, e_j: float, alpha: float, f_mu: float,
                     steps: int = MIN_STEPS, m_max: int = 20,
                     max_doublings: int = 12) -> FloquetSolution:
    """Floquet solution with step doubling until the monodromy settles.

    Raises :class:`ConvergenceError` if the monodromy still changes by more
    than ``MONODROMY_TOL`` after ``max_doublings`` doublings.
    """
    if steps < MIN_STEPS:
        raise ValueError(f"steps must be >= {MIN_STEPS}")
    n_harm = m_max + 10
    prev = _solve(e_ch, e_j, alpha, f_mu, steps, n_harm)
    for _ in range(max_doublings):
        steps *= 2
        cur = _solve(e_ch, e_j, alpha, f_mu, steps, n_harm)
        change = np.abs(cur[0] - prev[0]).max()
        prev = cur
        if change < MONODROMY_TOL:
            break
    else:
        raise ConvergenceError("monodromy did not settle under step doubling")
    mono, qe, gap, modes, times, samples = prev
    return FloquetSolution(qe, modes, mono, float(gap), f_mu, e_ch, e_j, alpha,
                           steps, times, samples)


def matrix_element_harmonics(sol: FloquetSolution, m_max: int):
    """Fourier components X_k of <u_lower| sz |u_upper>(t) for k = 0..K.

    Returns ``(down, up)``: ``down[k] = <M e^{+ik w t}>`` drives relaxation
    (emission of energy k f_mu + gap), ``up[k]`` uses the conjugate element.
    """
    u_lo = sol.samples[:, 0]
    u_up = sol.samples[:, 1]
    mel = np.einsum("ta,ta->t", u_lo.conj(), _SZ * u_up)
    n = len(mel)
    k_cut = (sol.modes.shape[1] - 1) // 2
    down_all = np.fft.ifft(mel)  # <M e^{+ikwt}> at index k
    up_all = np.fft.ifft(mel.conj())
    ks = np.arange(0, k_cut + 1)
    down, up = down_all[ks % n], up_all[ks % n]
    total = np.sum(np.abs(down) ** 2 + np.abs(up) ** 2)
    tail = np.sum(np.abs(down[m_max + 1:]) ** 2 + np.abs(up[m_max + 1:]) ** 2)
    if total > 0 and tail > FOURIER_TAIL_TOL * total:
        raise ConvergenceError(f"Fourier tail {tail / total:.3g} beyond m_max={m_max}")
    return down[: m_max + 1], up[: m_max + 1]


def golden_rule_rates(sol: FloquetSolution, env: EnvironmentSpectrum, m_max: int = 20):
    """Per-m numeric (relaxation, excitation) rates, arrays indexed by m - 1."""
    down, up = matrix_element_harmonics(sol, m_max)
    rel = np.empty(m_max)
    exc = np.empty(m_max)
    for m in range(1, m_max + 1):
        s_q = spectral_density_q(env, Harmonic(m))
        rel[m - 1] = s_q * abs(down[m]) ** 2
        exc[m - 1] = s_q * abs(up[m]) ** 2
    return rel, exc


def locate_degeneracy(n: int, alpha: float, e_j: float, f_mu: float, steps: int = MIN_STEPS,
                      m_max: int = 20, max_doublings: int = 12):
    """Charging energy of the minimum Floquet gap near ``n f_mu``; returns (e_ch, gap)."""
    scale = max(abs(dressed_gap(n, alpha, e_j)), 1e-6 * e_j)

    def gap(x):
        sol = propagate_period(n * f_mu + x * scale, e_j, alpha, f_mu, steps, m_max, max_doublings)
        return sol.gap / scale

    res = minimize_scalar(gap, bracket=(-1.0, 0.0, 1.0), tol=1e-10)
    return n * f_mu + res.x * scale, res.fun * scale


@dataclass
class RateComparison:
    m: np.ndarray
    analytic_rel: np.ndarray
    analytic_exc: np.ndarray
    numeric_rel: np.ndarray
    numeric_exc: np.ndarray
    rel_error: np.ndarray
    exc_error: np.ndarray
    tolerance: float

    @property
    def max_error(self) -> float:
        errs = np.concatenate([self.rel_error, self.exc_error])
        errs = errs[np.isfinite(errs)]
        return float(errs.max()) if errs.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "m": self.m.tolist(),
            "analytic_rel": self.analytic_rel.tolist(),
            "analytic_exc": self.analytic_exc.tolist(),
            "numeric_rel": self.numeric_rel.tolist(),
            "numeric_exc": self.numeric_exc.tolist(),
            "rel_error": self.rel_error.tolist(),
            "exc_error": self.exc_error.tolist(),
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def _rel_err(a, b, floor):
    mask = np.maximum(np.abs(a), np.abs(b)) > floor
    out = np.full(a.shape, np.nan)
    out[mask] = np.abs(b[mask] - a[mask]) / np.abs(a[mask]).clip(min=floor)
    return out


def compare_rates(analytic_rel, analytic_exc, numeric_rel, numeric_exc,
                  tolerance: float, negligible: float = 1e-8) -> RateComparison:
    """Per-m relative errors; terms below ``negligible`` x the largest rate are skipped."""
    arel, aexc = np.asarray(analytic_rel, float), np.asarray(analytic_exc, float)
    nrel, nexc = np.asarray(numeric_rel, float), np.asarray(numeric_exc, float)
    floor = negligible * max(np.abs(arel).max(initial=0), np.abs(aexc).max(initial=0))
    return RateComparison(
        np.arange(1, len(arel) + 1), arel, aexc, nrel, nexc,
        _rel_err(arel, nrel, floor), _rel_err(aexc, nexc, floor), float(tolerance),
    )


def analytic_per_m(n, alpha, eta, e_j, f_mu, env, m_max):
    bias = BiasPoint.from_angle(n, alpha, eta, e_j, f_mu)
    terms = np.array([gamma_m(m, bias, env)[:2] for m in range(1, m_max + 1)])
    return terms[:, 0], terms[:, 1]


def oracle_check(n: int, alpha: float, e_j: float, f_mu: float, offset: float = 0.0,
                 m_max: int = 20, steps: int = MIN_STEPS, tol_coeff: float = 5.0,
                 max_doublings: int = 12):
    """Compare numeric and analytic per-m rates near the n-photon resonance.

    The comparison point sits at ``offset`` numeric gaps from the located
    degeneracy; the analytic mixing angle is taken from the same geometry.
    """
    env = EnvironmentSpectrum(s_ohmic=1.0)
    e_ch0, gap0 = locate_degeneracy(n, alpha, e_j, f_mu, steps, m_max, max_doublings)
    sol = propagate_period(e_ch0 + offset * gap0, e_j, alpha, f_mu, steps, m_max, max_doublings)
    n_rel, n_exc = golden_rule_rates(sol, env, m_max)
    eta = math.atan2(gap0, offset * gap0)
    a_rel, a_exc = analytic_per_m(n, alpha, eta, e_j, f_mu, env, m_max)
    r = e_j / f_mu
    cmp = compare_rates(a_rel, a_exc, n_rel, n_exc, tol_coeff * r * r)
    gap_analytic = abs(dressed_gap(n, alpha, e_j))
    return {
        "n": n, "alpha": alpha, "e_j": e_j, "f_mu": f_mu, "offset": offset,
        "e_ch_degeneracy": e_ch0, "gap_numeric": gap0, "gap_analytic": gap_analytic,
        "steps": sol.steps, "comparison": cmp.to_dict(),
    }


def gap_check(n: int, alpha: float, e_j: float, f_mu: float, steps: int = MIN_STEPS,
              max_doublings: int = 12):
    """Floquet gap at ``e_ch = n f_mu`` against ``E_J |J_n(alpha)|``."""
    sol = propagate_period(n * f_mu, e_j, alpha, f_mu, steps, max_doublings=max_doublings)
    ref = abs(dressed_gap(n, alpha, e_j))
    return sol.gap, ref, abs(sol.gap - ref) / ref


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def report_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
