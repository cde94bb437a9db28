"""JSON run configuration.

A config is one JSON object with optional sections ``device``, ``tank``,
``environment``, ``sweep`` and ``fit``.  Field names follow the dataclass
fields; anything unknown is rejected so typos never pass silently.

Example::

    {
      "device": {"e_j": 2.6e9, "e_q": 62e9, "f_mu": 7e9, "f_rf": 0.65e9},
      "environment": {"s_phi0": 1e6, "s_ohmic": 2e6,
                      "rel_model": {"kind": "per_slice_scalar", "s_rel": 3.3e6}},
      "sweep": {"ng_min": 0.43, "ng_max": 0.46, "ng_steps": 2001,
                "amp_min": 0.0, "amp_max": 0.3, "amp_steps": 101}
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .model import (
    DeviceParams,
    EnvironmentSpectrum,
    LorentzianPeak,
    PerSliceScalar,
    TankParams,
)
from .sweep import SweepGrid

SECTIONS = ("device", "tank", "environment", "sweep", "fit")
REL_MODELS = {"per_slice_scalar": PerSliceScalar, "lorentzian_peak": LorentzianPeak}


@dataclass(frozen=True)
class SweepOptions:
    grid: SweepGrid | None = None
    m_max: int | None = None
    diagnostics: bool = False


@dataclass(frozen=True)
class FitOptions:
    init: tuple = (1.5e6, 2.5e6, 3e6)
    max_evals: int = 2000
    restarts: int = 4
    rows: tuple | None = None
    global_init: tuple = (1e5, 1e5)


@dataclass(frozen=True)
class RunConfig:
    device: DeviceParams = field(default_factory=DeviceParams)
    environment: EnvironmentSpectrum = field(default_factory=EnvironmentSpectrum)
    sweep: SweepOptions = field(default_factory=SweepOptions)
    fit: FitOptions = field(default_factory=FitOptions)


def _check_keys(section: str, data, allowed):
    if not isinstance(data, dict):
        raise ConfigError(f"'{section}' must be an object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(unknown)}")


def _names(cls, exclude=()):
    return [f.name for f in fields(cls) if f.name not in exclude]


def _build(section, cls, data):
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{section}': {exc}") from None


def _rel_model(data):
    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigError("'environment.rel_model' needs a 'kind'")
    kind = data["kind"]
    if kind not in REL_MODELS:
        raise ConfigError(f"unknown rel_model kind {kind!r}; expected one of {sorted(REL_MODELS)}")
    params = {k: v for k, v in data.items() if k != "kind"}
    cls = REL_MODELS[kind]
    _check_keys("environment.rel_model", params, _names(cls))
    return _build("environment.rel_model", cls, params)


def parse_config(doc) -> RunConfig:
    """Validate a decoded JSON document and build the typed config."""
    _check_keys("config", doc, SECTIONS)

    tank_doc = doc.get("tank", {})
    _check_keys("tank", tank_doc, _names(TankParams))
    tank = _build("tank", TankParams, tank_doc)

    dev_doc = doc.get("device", {})
    _check_keys("device", dev_doc, _names(DeviceParams, exclude=("tank",)))
    device = _build("device", DeviceParams, {**dev_doc, "tank": tank})

    env_doc = dict(doc.get("environment", {}))
    _check_keys("environment", env_doc, _names(EnvironmentSpectrum))
    if "rel_model" in env_doc:
        env_doc["rel_model"] = _rel_model(env_doc["rel_model"])
    environment = _build("environment", EnvironmentSpectrum, env_doc)

    sw_doc = dict(doc.get("sweep", {}))
    grid_keys = _names(SweepGrid)
    _check_keys("sweep", sw_doc, grid_keys + ["m_max", "diagnostics"])
    grid = None
    grid_doc = {k: sw_doc.pop(k) for k in grid_keys if k in sw_doc}
    if grid_doc:
        missing = [k for k in grid_keys if k not in grid_doc]
        if missing:
            raise ConfigError(f"'sweep' is missing {', '.join(missing)}")
        grid = _build("sweep", SweepGrid, grid_doc)
    sweep = _build("sweep", SweepOptions, {"grid": grid, **sw_doc})

    fit_doc = dict(doc.get("fit", {}))
    _check_keys("fit", fit_doc, _names(FitOptions))
    for key, size in (("init", 3), ("global_init", 2)):
        if key in fit_doc:
            val = fit_doc[key]
            if not isinstance(val, list) or len(val) != size:
                raise ConfigError(f"'fit.{key}' must be a list of {size} numbers")
            fit_doc[key] = tuple(float(v) for v in val)
    if fit_doc.get("rows") is not None:
        fit_doc["rows"] = tuple(int(r) for r in fit_doc["rows"])
    fit = _build("fit", FitOptions, fit_doc)

    return RunConfig(device, environment, sweep, fit)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(doc)
