"""Full-pipeline evaluation over an (n_g, A_mu) grid and map CSV output."""
from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import (
    DeviceParams,
    EnvironmentSpectrum,
    bias_arrays,
    charging_energy,
    normalized_amplitude,
)
from .rates import default_m_max, dressed_coefficients, rate_arrays
from .readout import load_arrays, reflection_arrays

CSV_COLUMNS = ("ng", "amp", "re_s11", "im_s11")
DIAGNOSTIC_COLUMNS = ("t_eff", "s_z0", "delta_n")


@dataclass(frozen=True)
class SweepGrid:
    ng_min: float
    ng_max: float
    ng_steps: int
    amp_min: float
    amp_max: float
    amp_steps: int

    def __post_init__(self):
        if self.ng_steps < 2 or self.amp_steps < 2:
            raise ValueError("grid needs at least 2 steps per axis")
        if not self.ng_min < self.ng_max:
            raise ValueError("ng_min must be < ng_max")
        if not self.amp_min <= self.amp_max:
            raise ValueError("amp_min must be <= amp_max")

    @staticmethod
    def _axis(lo, hi, steps):
        # closed form per sample: refining (steps -> 2 steps - 1) keeps old samples bit-identical
        return np.array([lo + (hi - lo) * (i / (steps - 1)) for i in range(steps)])

    @property
    def ng_axis(self) -> np.ndarray:
        return self._axis(self.ng_min, self.ng_max, self.ng_steps)

    @property
    def amp_axis(self) -> np.ndarray:
        return self._axis(self.amp_min, self.amp_max, self.amp_steps)


@dataclass
class SimMap:
    grid: SweepGrid
    s11: np.ndarray
    diagnostics: dict | None = None
    defects: list = field(default_factory=list)

    @property
    def ng_axis(self):
        return self.grid.ng_axis

    @property
    def amp_axis(self):
        return self.grid.amp_axis

    def to_csv(self, path_or_buf=None) -> str:
        return write_map_csv(self.ng_axis, self.amp_axis, self.s11, path_or_buf, self.diagnostics)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_map_csv(ng_axis, amp_axis, s11, path_or_buf=None, diagnostics=None) -> str:
    """Serialise a map, amplitude as the slow index; returns the text."""
    cols = list(CSV_COLUMNS)
    if diagnostics is not None:
        cols += DIAGNOSTIC_COLUMNS
    buf = io.StringIO()
    buf.write("# " + ",".join(cols) + "\n")
    for j, amp in enumerate(amp_axis):
        for i, ng in enumerate(ng_axis):
            z = s11[j, i]
            row = [_fmt(ng), _fmt(amp), _fmt(z.real), _fmt(z.imag)]
            if diagnostics is not None:
                row += [_fmt(diagnostics[k][j, i]) for k in DIAGNOSTIC_COLUMNS]
            buf.write(",".join(row) + "\n")
    text = buf.getvalue()
    if path_or_buf is not None:
        if isinstance(path_or_buf, (str, os.PathLike)):
            with open(path_or_buf, "w", newline="\n") as fh:
                fh.write(text)
        else:
            path_or_buf.write(text)
    return text


class ForwardModel:
    """Bias geometry and rate coefficients for a fixed set of points.

    Everything that does not depend on the environment is computed once;
    :meth:`evaluate` then costs a handful of vector operations.
    """

    def __init__(self, n_g, a_mu, device: DeviceParams, m_max: int | None = None):
        self.device = device
        self.bias = bias_arrays(n_g, a_mu, device)
        if m_max is None:
            m_max = auto_m_max(int(self.bias.n_res.max(initial=0)),
                               float(self.bias.alpha.max(initial=0.0)))
        self.coef = dressed_coefficients(self.bias, device.e_j, device.f_mu, m_max)

    def evaluate(self, env: EnvironmentSpectrum, diagnostics: bool = False):
        """Return ``(s11, bad, info)``; ``bad`` marks points that failed."""
        rates = rate_arrays(self.coef, self.bias, env, self.device.f_rf)
        c_eff, g_eff, singular = load_arrays(self.bias, rates, self.device)
        s11, diverged = reflection_arrays(c_eff, g_eff, self.device.tank, self.device.f_rf)
        unconverged = ~self.coef.converged
        bad = singular | diverged | unconverged
        s11 = np.where(bad, np.nan + 0j, s11)
        info = {"singular": singular, "diverged": diverged, "unconverged": unconverged,
                "rates": rates, "c_eff": c_eff, "g_eff": g_eff}
        if diagnostics:
            info["t_eff"] = rates.t_eff(self.bias.delta_n)
            info["s_z0"] = rates.s_z0
            info["delta_n"] = self.bias.delta_n
        return s11, bad, info


def _defect_reasons(info, idx):
    reasons = []
    if info["singular"][idx]:
        reasons.append("bloch-singular")
    if info["diverged"][idx]:
        reasons.append("gain-divergence")
    if info["unconverged"][idx]:
        reasons.append("m-sum-unconverged")
    return "+".join(reasons)


def auto_m_max(n_top: int, alpha_top: float) -> int:
    """m-sum cutoff covering resonance index ``n_top`` and amplitude ``alpha_top``.

    The Bessel factors J_{m -+ n}(alpha) are negligible once m - n exceeds
    alpha by a margin, so the cutoff grows with the drive amplitude.
    """
    return max(default_m_max(n_top), n_top + int(math.ceil(alpha_top)) + 20)


def grid_m_max(grid: SweepGrid, device: DeviceParams) -> int:
    """m-sum cutoff fixed by the grid bounds, independent of partitioning."""
    e_ch = charging_energy(np.array([grid.ng_min, grid.ng_max, 0.5]), device.e_q)
    n_top = int(np.rint(np.abs(e_ch) / device.f_mu).max())
    amp_top = max(abs(grid.amp_min), abs(grid.amp_max))
    alpha_top = normalized_amplitude(amp_top, device.gamma_mu, device.e_q, device.f_mu)
    return auto_m_max(n_top, alpha_top)


def run_map(
    grid: SweepGrid,
    device: DeviceParams,
    env: EnvironmentSpectrum,
    m_max: int | None = None,
    diagnostics: bool = False,
    threads: int = 1,
) -> SimMap:
    """Evaluate S11 on every grid point; failed points are NaN and listed in ``defects``."""
    ng = grid.ng_axis
    amps = grid.amp_axis
    if m_max is None:
        m_max = grid_m_max(grid, device)
    if threads == 0:
        threads = os.cpu_count() or 1
    threads = max(1, min(int(threads), len(amps)))

    def run_rows(rows):
        ng_pts = np.tile(ng, len(rows))
        amp_pts = np.repeat(amps[rows], len(ng))
        model = ForwardModel(ng_pts, amp_pts, device, m_max)
        return rows, model.evaluate(env, diagnostics)

    chunks = [list(c) for c in np.array_split(np.arange(len(amps)), threads) if len(c)]
    if threads == 1:
        results = [run_rows(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_rows, chunks))

    shape = (len(amps), len(ng))
    s11 = np.empty(shape, dtype=complex)
    diag = {k: np.empty(shape) for k in DIAGNOSTIC_COLUMNS} if diagnostics else None
    defects = []
    for rows, (vals, bad, info) in results:
        block = vals.reshape(len(rows), len(ng))
        s11[rows] = block
        if diagnostics:
            for k in DIAGNOSTIC_COLUMNS:
                diag[k][rows] = np.asarray(info[k]).reshape(len(rows), len(ng))
        for flat in np.flatnonzero(bad):
            r, i = divmod(int(flat), len(ng))
            defects.append((rows[r], i, _defect_reasons(info, flat)))
    defects.sort()
    return SimMap(grid, s11, diag, defects)


def add_noise(s11: np.ndarray, rel_noise: float, seed: int) -> np.ndarray:
    """Additive complex Gaussian noise with std ``rel_noise * |s11|`` per point."""
    rng = np.random.Generator(np.random.Philox(int(seed)))
    noise = rng.standard_normal(s11.shape) + 1j * rng.standard_normal(s11.shape)
    return s11 + rel_noise * np.abs(s11) * noise / np.sqrt(2.0)
