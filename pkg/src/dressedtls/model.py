"""Device parameters, environment spectra and dressed-state geometry.

Units: energies are linear frequencies E/h in Hz, rates and spectral
densities are angular rates in 1/s, temperatures in K.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy import constants

from . import _backend
from .errors import DegenerateError, DomainError

H_PLANCK = constants.h
K_BOLTZMANN = constants.k
E_CHARGE = constants.e
#: k_B / h in Hz per kelvin
KB_OVER_H = constants.k / constants.h

BESSEL_MAX_ORDER = 1000
BESSEL_MAX_X = 100.0


@dataclass(frozen=True)
class TankParams:
    """Parallel LC readout tank.

    Attributes
    ----------
    f0 : float
        Resonance frequency [Hz].
    l_ind : float
        Inductance [H].
    q_int : float
        Internal quality factor; ``inf`` for a lossless tank.
    z0 : float
        Line impedance [Ohm].
    """

    f0: float = 0.65e9
    l_ind: float = 20e-9
    q_int: float = 1e4
    z0: float = 50.0

    def __post_init__(self):
        for name in ("f0", "l_ind", "q_int", "z0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tank {name} must be > 0")

    @property
    def c_osc(self) -> float:
        return 1.0 / ((2.0 * math.pi * self.f0) ** 2 * self.l_ind)

    @property
    def r_int(self) -> float:
        return self.q_int * math.sqrt(self.l_ind / self.c_osc)


@dataclass(frozen=True)
class DeviceParams:
    """Static device and drive constants.

    ``gamma_mu`` converts the generator amplitude to the microwave amplitude
    in units of 2e, ``n_mu = gamma_mu * a_mu``.  ``n_rf`` is the probe
    amplitude in units of 2e.
    """

    e_j: float = 2.6e9
    e_q: float = 62e9
    f_mu: float = 7e9
    f_rf: float = 0.65e9
    beta: float = 0.3
    gamma_mu: float = 1.0
    n_rf: float = 1e-5
    tank: TankParams = field(default_factory=TankParams)

    def __post_init__(self):
        for name in ("e_j", "e_q", "f_mu", "f_rf"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if not self.n_rf >= 0:
            raise ValueError("n_rf must be >= 0")
        if self.perturbation_parameter > 0.5:
            warnings.warn(
                f"e_j/f_mu = {self.perturbation_parameter:.3g} > 0.5; "
                "dressed-state expansion is unreliable",
                stacklevel=3,
            )

    @property
    def perturbation_parameter(self) -> float:
        return self.e_j / self.f_mu

    @property
    def c_sigma(self) -> float:
        """Island capacitance from E_Q = (2e)^2 / 2C [F]."""
        return (2.0 * E_CHARGE) ** 2 / (2.0 * H_PLANCK * self.e_q)

    @property
    def c_rf(self) -> float:
        return self.beta * self.c_sigma

    @property
    def v_rf(self) -> float:
        """Probe voltage amplitude 2e n_rf / C_rf [V]."""
        return 2.0 * E_CHARGE * self.n_rf / self.c_rf


@dataclass(frozen=True)
class PerSliceScalar:
    """S_Q at the dressed gap as a single number [1/s]."""

    s_rel: float

    def __post_init__(self):
        if not self.s_rel >= 0:
            raise ValueError("s_rel must be >= 0")

    def at(self, detuning):
        return np.zeros_like(np.asarray(detuning, dtype=float)) + self.s_rel


@dataclass(frozen=True)
class LorentzianPeak:
    """Background plus a Lorentzian oscillator peak (``width`` is the FWHM in Hz)."""

    s_bg: float
    s_peak: float
    width: float

    def __post_init__(self):
        if not (self.s_bg >= 0 and self.s_peak >= 0):
            raise ValueError("spectral values must be >= 0")
        if not self.width > 0:
            raise ValueError("Lorentzian width must be > 0")

    def at(self, detuning):
        x = 2.0 * np.asarray(detuning, dtype=float) / self.width
        return self.s_bg + self.s_peak / (1.0 + x * x)


RelModel = Union[PerSliceScalar, LorentzianPeak]


@dataclass(frozen=True)
class EnvironmentSpectrum:
    """Charge-noise model S_Q and effective sigma_x noise S_X.

    ``s_ohmic`` is S_Q at h f_mu; harmonics scale as ``S_Q(m h f_mu) = m s_ohmic``.
    """

    s_phi0: float = 1e6
    rel_model: RelModel = field(default_factory=lambda: PerSliceScalar(3.3e6))
    s_ohmic: float = 2e6
    s_x0: float = 0.0
    s_x_mu: float = 0.0
    t_bath: float = 0.0

    def __post_init__(self):
        for name in ("s_phi0", "s_ohmic", "s_x0", "s_x_mu", "t_bath"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")

    def with_params(self, **changes) -> "EnvironmentSpectrum":
        if "s_rel" in changes:
            changes["rel_model"] = PerSliceScalar(changes.pop("s_rel"))
        return replace(self, **changes)


@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class AtGap:
    """Dressed transition frequency ``delta`` [Hz]; ``f_rf`` centres a peak model."""

    delta: float
    f_rf: float = 0.0


@dataclass(frozen=True)
class Harmonic:
    m: int


def spectral_density_q(env: EnvironmentSpectrum, omega_class) -> float:
    if isinstance(omega_class, Zero):
        return env.s_phi0
    if isinstance(omega_class, AtGap):
        return float(env.rel_model.at(abs(omega_class.delta - omega_class.f_rf)))
    if isinstance(omega_class, Harmonic):
        if omega_class.m < 1:
            raise ValueError("harmonic index must be >= 1")
        return omega_class.m * env.s_ohmic
    raise TypeError(f"unknown frequency class {omega_class!r}")


def spectral_density_x(env: EnvironmentSpectrum, m: int) -> float:
    if m == 0:
        return env.s_x0
    if m == 1:
        return env.s_x_mu
    raise ValueError("S_X is only modelled for m in {0, 1}")


def bessel_j(order: int, x: float) -> float:
    """Bessel function of the first kind J_order(x) for integer order."""
    order = int(order)
    if abs(order) > BESSEL_MAX_ORDER:
        raise DomainError(f"|order| must be <= {BESSEL_MAX_ORDER}")
    if not 0.0 <= x <= BESSEL_MAX_X:
        raise DomainError(f"x must lie in [0, {BESSEL_MAX_X}]")
    k = abs(order)
    val = float(_backend.bessel_table(float(x), k)[k])
    if order < 0 and k % 2 == 1:
        return -val
    return val


def charging_energy(n_g, e_q):
    return e_q * (1.0 - 2.0 * n_g)


def normalized_amplitude(a_mu, gamma_mu, e_q, f_mu):
    if np.any(np.asarray(a_mu) < 0):
        raise ValueError("microwave amplitude must be >= 0")
    return 2.0 * e_q * (gamma_mu * a_mu) / f_mu


def resonance_index(e_ch: float, f_mu: float) -> int:
    """Photon number n of the nearest resonance E_Ch ~ n f_mu.

    A negative E_Ch is the mirror image (charge states swapped) of the
    positive one and selects the same n.  Ties round to the even index.
    """
    if not f_mu > 0:
        raise ValueError("f_mu must be > 0")
    return int(round(abs(e_ch) / f_mu))


def detuning(e_ch: float, f_mu: float, n: int) -> float:
    return abs(e_ch) - n * f_mu


def dressed_gap(n: int, alpha: float, e_j: float) -> float:
    if n < 0:
        raise ValueError("resonance index must be >= 0")
    return abs(e_j * bessel_j(n, alpha))


def mixing_angle(eps: float, delta_n: float) -> float:
    """Mixing angle in [0, pi]; pi/2 on resonance, 0 for large positive eps."""
    if eps == 0 and delta_n == 0:
        raise DegenerateError("mixing angle undefined for eps = delta_n = 0")
    eta = math.atan2(abs(delta_n), abs(eps))
    return math.pi - eta if eps < 0 else eta


def correction_factor_a(alpha: float, n: int, e_j: float, f_mu: float, m_max: int = 20) -> float:
    """Prefactor A of the standard rates, sum truncated at |m| <= m_max."""
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    total = 0.0
    for m in range(1, m_max + 1):
        total += (bessel_j(m - n, alpha) ** 2 + bessel_j(-m - n, alpha) ** 2) / (m * m)
    return 1.0 - (e_j / (2.0 * f_mu)) ** 2 * total


@dataclass(frozen=True)
class BiasPoint:
    """One (n_g, A_mu) point with its derived dressed-state quantities."""

    n_g: float
    a_mu: float
    e_ch: float
    alpha: float
    n_res: int
    eps: float
    delta_n: float
    eta: float
    e_j: float
    f_mu: float

    @property
    def splitting(self) -> float:
        """Dressed level splitting sqrt(eps^2 + delta_n^2) [Hz]."""
        return math.hypot(self.eps, self.delta_n)

    @classmethod
    def at(cls, n_g: float, a_mu: float, device: DeviceParams) -> "BiasPoint":
        e_ch = charging_energy(n_g, device.e_q)
        alpha = normalized_amplitude(a_mu, device.gamma_mu, device.e_q, device.f_mu)
        n = resonance_index(e_ch, device.f_mu)
        eps = detuning(e_ch, device.f_mu, n)
        delta = dressed_gap(n, alpha, device.e_j)
        return cls(n_g, a_mu, e_ch, alpha, n, eps, delta, mixing_angle(eps, delta),
                   device.e_j, device.f_mu)

    @classmethod
    def from_angle(cls, n: int, alpha: float, eta: float, e_j: float, f_mu: float) -> "BiasPoint":
        """Bias specified directly by resonance index, amplitude and mixing angle."""
        if not 0.0 <= eta <= math.pi:
            raise ValueError("eta must lie in [0, pi]")
        delta = dressed_gap(n, alpha, e_j)
        sin_eta = math.sin(eta)
        if sin_eta == 0.0 or delta == 0.0:
            eps = math.copysign(math.inf, math.cos(eta))
        else:
            eps = delta * math.cos(eta) / sin_eta
        e_ch = n * f_mu + eps
        return cls(math.nan, math.nan, e_ch, alpha, n, eps, delta, eta, e_j, f_mu)


def ladder_energy(N: int, branch: str, bias: BiasPoint) -> float:
    half = 0.5 * bias.splitting
    if branch == "excited":
        return N * bias.f_mu + half
    if branch == "ground":
        return N * bias.f_mu - half
    raise ValueError("branch must be 'excited' or 'ground'")


@dataclass(frozen=True)
class BiasArrays:
    """Vectorised bias quantities over a set of points (flat arrays)."""

    n_g: np.ndarray
    a_mu: np.ndarray
    e_ch: np.ndarray
    alpha: np.ndarray
    n_res: np.ndarray
    eps: np.ndarray
    delta_n: np.ndarray
    eta: np.ndarray
    degenerate: np.ndarray

    @property
    def splitting(self) -> np.ndarray:
        return np.hypot(self.eps, self.delta_n)


def bias_arrays(n_g, a_mu, device: DeviceParams) -> BiasArrays:
    n_g = np.asarray(n_g, dtype=float)
    a_mu = np.asarray(a_mu, dtype=float)
    n_g, a_mu = np.broadcast_arrays(n_g, a_mu)
    n_g = n_g.ravel()
    a_mu = a_mu.ravel()
    e_ch = charging_energy(n_g, device.e_q)
    alpha = normalized_amplitude(a_mu, device.gamma_mu, device.e_q, device.f_mu)
    if np.any(alpha > BESSEL_MAX_X):
        raise DomainError("normalised amplitude outside the Bessel domain")
    n = np.rint(np.abs(e_ch) / device.f_mu).astype(np.int64)
    eps = np.abs(e_ch) - n * device.f_mu
    kmax = int(n.max(initial=0))
    table = _backend.bessel_table_many(alpha, kmax)
    delta = np.abs(device.e_j * table[np.arange(n.size), n])
    degenerate = (eps == 0) & (delta == 0)
    eta = np.arctan2(delta, np.abs(eps))
    eta = np.where(eps < 0, np.pi - eta, eta)
    eta = np.where(degenerate, np.nan, eta)
    return BiasArrays(n_g, a_mu, e_ch, alpha, n, eps, delta, eta, degenerate)
