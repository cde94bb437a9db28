"""Dressed-state relaxation and rf readout of a strongly driven Cooper-pair box.

Modules
-------
model    device constants, spectra, Bessel functions, dressed geometry
rates    m-photon relaxation, excitation and dephasing rates
readout  Bloch steady state, effective load and tank reflection
sweep    S11 maps over gate charge and microwave amplitude
fit      noise-spectrum estimation from S11 maps
oracle   brute-force Floquet check of the analytic rates
"""
from . import _backend
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateError,
    DomainError,
    DressedError,
    GainDivergenceError,
    MeasurementFormatError,
    SingularError,
    UnitarityError,
)
from .model import (
    BiasPoint,
    DeviceParams,
    EnvironmentSpectrum,
    LorentzianPeak,
    PerSliceScalar,
    TankParams,
)
from .rates import RateSet, total_rates
from .readout import ResponsePoint, response_point
from .sweep import SimMap, SweepGrid, run_map

__version__ = "0.1.0"
BACKEND = _backend.NAME

__all__ = [
    "BACKEND", "BiasPoint", "ConfigError", "ConvergenceError", "DegenerateError",
    "DeviceParams", "DomainError", "DressedError", "EnvironmentSpectrum",
    "GainDivergenceError", "LorentzianPeak", "MeasurementFormatError", "PerSliceScalar",
    "RateSet", "ResponsePoint", "SimMap", "SingularError", "SweepGrid", "TankParams",
    "UnitarityError", "response_point", "run_map", "total_rates",
]
