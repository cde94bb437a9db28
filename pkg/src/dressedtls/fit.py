"""Noise-spectrum estimation from S11 maps.

Per-slice fits vary (s_phi0, s_rel, s_ohmic) independently for each
microwave amplitude; the global fit then adjusts only the two sigma_x noise
levels (s_x0, s_x_mu) over the whole map with the slice parameters frozen.
Both minimise the complex least-squares misfit with a bounded Nelder-Mead
search (log or square-root reparametrisation keeps rates non-negative).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import DressedError, MeasurementFormatError
from .model import DeviceParams, EnvironmentSpectrum
from .sweep import CSV_COLUMNS, ForwardModel

SLICE_PARAMS = ("s_phi0", "s_rel", "s_ohmic")
GLOBAL_PARAMS = ("s_x0", "s_x_mu")


@dataclass
class MeasuredMap:
    ng_axis: np.ndarray
    amp_axis: np.ndarray
    s11: np.ndarray
    weights: np.ndarray | None = None
    source: str | None = None
    extras: dict = field(default_factory=dict)

    def row(self, j: int):
        w = None if self.weights is None else self.weights[j]
        return self.s11[j], w


def load_measurement(path) -> MeasuredMap:
    """Parse a map CSV (the sweep output format, optional ``weight`` column)."""
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise MeasurementFormatError(f"cannot read {path}: {exc.strerror}") from None
    header = None
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            if header is None:
                header = [c.strip() for c in line[1:].split(",")]
            continue
        if header is None:
            raise MeasurementFormatError(f"line {lineno}: data before header")
        parts = line.split(",")
        if len(parts) != len(header):
            raise MeasurementFormatError(
                f"line {lineno}: expected {len(header)} fields, got {len(parts)}"
            )
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise MeasurementFormatError(f"line {lineno}: {exc}") from None
        if any(math.isnan(v) for v in vals):
            raise MeasurementFormatError(f"line {lineno}: NaN field")
        rows.append((lineno, vals))
    if header is None or not rows:
        raise MeasurementFormatError(f"{path}: no data")
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise MeasurementFormatError(f"{path}: missing columns {missing}")
    col = {name: k for k, name in enumerate(header)}
    for lineno, vals in rows:
        for name in (*CSV_COLUMNS, "weight"):
            if name in col and not math.isfinite(vals[col[name]]):
                raise MeasurementFormatError(f"line {lineno}: non-finite {name}")

    data = np.array([v for _, v in rows])
    amps = data[:, col["amp"]]
    # amplitude is the slow index: contiguous blocks of equal amp
    breaks = np.flatnonzero(amps[1:] != amps[:-1]) + 1
    blocks = np.split(np.arange(len(rows)), breaks)
    ng_axis = data[blocks[0], col["ng"]]
    for b in blocks:
        if len(b) != len(ng_axis) or not np.array_equal(data[b, col["ng"]], ng_axis):
            raise MeasurementFormatError(
                f"{path}: ragged grid at line {rows[b[0]][0]}"
            )
    amp_axis = np.array([amps[b[0]] for b in blocks])
    if len(np.unique(amp_axis)) != len(amp_axis):
        raise MeasurementFormatError(f"{path}: amplitude rows are not contiguous")
    shape = (len(amp_axis), len(ng_axis))
    s11 = (data[:, col["re_s11"]] + 1j * data[:, col["im_s11"]]).reshape(shape)
    weights = data[:, col["weight"]].reshape(shape) if "weight" in col else None
    extras = {
        name: data[:, k].reshape(shape)
        for name, k in col.items()
        if name not in (*CSV_COLUMNS, "weight")
    }
    return MeasuredMap(ng_axis, amp_axis, s11, weights, str(path), extras)


class SliceProblem:
    """One amplitude row with its precomputed forward model."""

    def __init__(self, ng_axis, amp, measured, device: DeviceParams,
                 template: EnvironmentSpectrum | None = None, weights=None,
                 m_max: int | None = None):
        self.amp = float(amp)
        self.ng_axis = np.asarray(ng_axis, dtype=float)
        self.measured = np.asarray(measured, dtype=complex)
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        self.device = device
        self.template = template or EnvironmentSpectrum()
        self.model = ForwardModel(self.ng_axis, np.full(self.ng_axis.size, self.amp), device, m_max)

    @property
    def alpha(self) -> float:
        return float(self.model.bias.alpha[0])

    @property
    def delta_n(self) -> float:
        """Dressed gap of the resonance index that dominates the slice [Hz]."""
        n = np.bincount(self.model.bias.n_res).argmax()
        return float(np.median(self.model.bias.delta_n[self.model.bias.n_res == n]))

    def env(self, params3) -> EnvironmentSpectrum:
        s_phi0, s_rel, s_ohmic = (float(p) for p in params3)
        return self.template.with_params(s_phi0=s_phi0, s_rel=s_rel, s_ohmic=s_ohmic)

    def simulate(self, env: EnvironmentSpectrum):
        s11, bad, _ = self.model.evaluate(env)
        return s11, bad


def misfit(model_s11, measured, weights=None) -> float:
    r2 = np.abs(model_s11 - measured) ** 2
    if weights is not None:
        r2 = r2 * weights
    return float(r2.sum())


def objective(params3, problem: SliceProblem) -> float:
    """Weighted complex least-squares misfit; +inf where the model fails."""
    if any(not p >= 0 for p in params3):
        return math.inf
    try:
        s11, bad = problem.simulate(problem.env(params3))
    except (DressedError, ValueError, FloatingPointError):
        return math.inf
    if bad.any():
        return math.inf
    return misfit(s11, problem.measured, problem.weights)


@dataclass
class FitResult:
    slice_amp: float
    params: dict
    residual: float
    iterations: int
    converged: bool
    param_spread: dict
    evals: int
    alpha: float = math.nan
    delta_n: float = math.nan

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GlobalFitResult:
    s_x0: float
    s_x_mu: float
    residual: float
    iterations: int
    converged: bool
    param_spread: dict
    evals: int

    def to_dict(self) -> dict:
        return asdict(self)


def _nelder_mead(fun, x0, step, budget, xatol):
    dim = len(x0)
    simplex = np.vstack([x0] + [x0 + step * np.eye(dim)[k] for k in range(dim)])
    res = minimize(
        fun, x0, method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": xatol, "fatol": np.inf,
                 "maxfev": budget, "maxiter": budget},
    )
    return res


def _multistart(fun, x0, step, budget, restarts, seed, jitter, xatol):
    rng = np.random.default_rng(seed)
    starts = [np.asarray(x0, dtype=float)]
    starts += [starts[0] + jitter * rng.standard_normal(len(x0)) for _ in range(restarts)]
    best = None
    evals = iters = 0
    for start in starts:
        res = _nelder_mead(fun, start, step, budget, xatol)
        evals += res.nfev
        iters += res.nit
        if best is None or res.fun < best.fun:
            best = res
    # polish from the best point with a fresh simplex
    res = _nelder_mead(fun, best.x, 0.1 * step, budget, xatol)
    evals += res.nfev
    iters += res.nit
    if res.fun <= best.fun:
        best = res
    return best, evals, iters


def _quadratic_spread(fun, x_opt, f_opt, n_obs, n_par, to_params, h=1e-2):
    """Marginal 1-sigma per parameter from a local quadratic model of the objective.

    The Hessian comes from central differences in the search coordinates
    (off-diagonals included, so correlated parameters are not understated);
    ``cov = 2 sigma^2 H^-1`` with ``sigma^2 = f_opt / dof``.  Directions with
    no positive curvature report ``inf``.
    """
    dim = len(x_opt)
    sigma2 = f_opt / max(n_obs - n_par, 1)
    eye = np.eye(dim) * h
    hess = np.empty((dim, dim))
    for k in range(dim):
        hess[k, k] = (fun(x_opt + eye[k]) + fun(x_opt - eye[k]) - 2.0 * f_opt) / (h * h)
        for l in range(k):
            hess[k, l] = hess[l, k] = (
                fun(x_opt + eye[k] + eye[l]) - fun(x_opt + eye[k] - eye[l])
                - fun(x_opt - eye[k] + eye[l]) + fun(x_opt - eye[k] - eye[l])
            ) / (4.0 * h * h)
    spreads = [math.inf] * dim
    if not np.all(np.isfinite(hess)):
        return spreads
    try:
        cov = 2.0 * sigma2 * np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        return spreads
    for k in range(dim):
        if not (hess[k, k] > 0 and cov[k, k] >= 0):
            continue
        step = math.sqrt(cov[k, k]) * np.eye(dim)[k]
        lo, hi = to_params(x_opt - step), to_params(x_opt + step)
        spreads[k] = 0.5 * abs(float(hi[k]) - float(lo[k]))
    return spreads


def fit_slice(problem: SliceProblem, init: Sequence[float], max_evals: int = 2000,
              restarts: int = 4, seed: int = 0, jitter: float = 0.3) -> FitResult:
    """Fit (s_phi0, s_rel, s_ohmic) to one slice from ``init`` plus jittered restarts."""
    if problem.measured.size == 0:
        raise ValueError("empty slice")
    init = np.asarray(init, dtype=float)
    if np.any(init <= 0):
        raise ValueError("initial rates must be > 0 for the log parametrisation")

    def fun(x):
        return objective(np.exp(x), problem)

    best, evals, iters = _multistart(fun, np.log(init), 0.2, max_evals, restarts, seed, jitter, 1e-6)
    x_opt = best.x
    params = np.exp(x_opt)
    spread = _quadratic_spread(fun, x_opt, best.fun, 2 * problem.measured.size, 3, np.exp)
    return FitResult(
        slice_amp=problem.amp,
        params=dict(zip(SLICE_PARAMS, map(float, params))),
        residual=float(best.fun),
        iterations=int(iters),
        converged=bool(best.success),
        param_spread=dict(zip(SLICE_PARAMS, map(float, spread))),
        evals=int(evals),
        alpha=problem.alpha,
        delta_n=problem.delta_n,
    )


def slice_problems(mmap: MeasuredMap, device: DeviceParams,
                   template: EnvironmentSpectrum | None = None,
                   rows: Sequence[int] | None = None, m_max: int | None = None):
    rows = range(len(mmap.amp_axis)) if rows is None else rows
    out = []
    for j in rows:
        meas, w = mmap.row(j)
        out.append(SliceProblem(mmap.ng_axis, mmap.amp_axis[j], meas, device, template, w, m_max))
    return out


def fit_map_slices(mmap: MeasuredMap, device: DeviceParams, init, template=None,
                   rows=None, max_evals=2000, restarts=4, seed=0, threads=1):
    """Independent per-slice fits; results in row order."""
    problems = slice_problems(mmap, device, template, rows)
    seeds = [seed + k for k in range(len(problems))]

    def run(args):
        prob, s = args
        return fit_slice(prob, init, max_evals, restarts, s)

    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, zip(problems, seeds)))
    return [run(a) for a in zip(problems, seeds)]


def global_objective(params2, problems: Sequence[SliceProblem], slice_params) -> float:
    s_x0, s_x_mu = (float(p) for p in params2)
    if not (s_x0 >= 0 and s_x_mu >= 0):
        return math.inf
    total = 0.0
    for prob, p3 in zip(problems, slice_params):
        env = prob.env(p3).with_params(s_x0=s_x0, s_x_mu=s_x_mu)
        try:
            s11, bad = prob.simulate(env)
        except (DressedError, ValueError, FloatingPointError):
            return math.inf
        if bad.any():
            return math.inf
        total += misfit(s11, prob.measured, prob.weights)
    return total


def fit_global_dephasing(mmap: MeasuredMap, device: DeviceParams, slice_params,
                         init: Sequence[float] = (1e5, 1e5), template=None,
                         max_evals: int = 2000, restarts: int = 4, seed: int = 0,
                         scale: float | None = None) -> GlobalFitResult:
    """Fit (s_x0, s_x_mu) over the whole map with per-slice relaxation fixed.

    ``slice_params`` holds one (s_phi0, s_rel, s_ohmic) triple per row, or a
    single triple used for every row.
    """
    problems = slice_problems(mmap, device, template)
    slice_params = np.asarray(slice_params, dtype=float)
    if slice_params.ndim == 1:
        slice_params = np.tile(slice_params, (len(problems), 1))
    if len(slice_params) != len(problems):
        raise ValueError("need one parameter triple per map row")
    init = np.asarray(init, dtype=float)
    if scale is None:
        scale = float(max(init.max(), 1.0))

    def to_params(x):
        return scale * np.asarray(x) ** 2

    def fun(x):
        return global_objective(to_params(x), problems, slice_params)

    x0 = np.sqrt(np.maximum(init, 0.0) / scale)
    best, evals, iters = _multistart(fun, x0, 0.2, max_evals, restarts, seed, 0.2, 1e-6)
    x_opt = np.abs(best.x)
    n_obs = 2 * sum(p.measured.size for p in problems)
    spread = _quadratic_spread(fun, x_opt, best.fun, n_obs, 2, to_params)
    p = to_params(x_opt)
    return GlobalFitResult(
        s_x0=float(p[0]), s_x_mu=float(p[1]), residual=float(best.fun),
        iterations=int(iters), converged=bool(best.success),
        param_spread=dict(zip(GLOBAL_PARAMS, map(float, spread))), evals=int(evals),
    )


def report_json(results) -> str:
    if isinstance(results, (FitResult, GlobalFitResult)):
        doc = results.to_dict()
    else:
        doc = {"slices": [r.to_dict() for r in results]}
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


__all__ = [
    "MeasuredMap", "load_measurement", "SliceProblem", "objective", "fit_slice",
    "fit_map_slices", "fit_global_dephasing", "global_objective", "FitResult",
    "GlobalFitResult", "report_json",
]
