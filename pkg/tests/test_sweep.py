import io
import math

import numpy as np
import pytest

from dressedtls.model import DeviceParams, EnvironmentSpectrum
from dressedtls.readout import reflection_coefficient
from dressedtls.sweep import (
    CSV_COLUMNS,
    DIAGNOSTIC_COLUMNS,
    ForwardModel,
    grid_m_max,
    SweepGrid,
    add_noise,
    run_map,
    write_map_csv,
)

SMALL = SweepGrid(0.40, 0.47, 61, 0.0, 0.3, 5)


def test_grid_validation():
    with pytest.raises(ValueError):
        SweepGrid(0.4, 0.5, 1, 0.0, 1.0, 3)
    with pytest.raises(ValueError):
        SweepGrid(0.5, 0.5, 3, 0.0, 1.0, 3)
    with pytest.raises(ValueError):
        SweepGrid(0.4, 0.5, 3, 1.0, 0.0, 3)
    # a single amplitude is allowed as a degenerate axis
    assert np.all(SweepGrid(0.4, 0.5, 3, 0.2, 0.2, 2).amp_axis == 0.2)


def test_axes_hit_endpoints():
    ng = SMALL.ng_axis
    assert ng[0] == SMALL.ng_min and ng[-1] == SMALL.ng_max
    assert ng.shape == (SMALL.ng_steps,)


def test_map_shape(device, env):
    sim = run_map(SMALL, device, env)
    assert sim.s11.shape == (SMALL.amp_steps, SMALL.ng_steps)
    assert sim.defects == []
    assert np.all(np.isfinite(sim.s11))


def test_vanishing_coupling_gives_flat_map(env):
    dev = DeviceParams(e_j=1e-3)
    sim = run_map(SMALL, dev, env)
    bare = reflection_coefficient(0.0, math.inf, dev.tank, dev.f_rf)
    np.testing.assert_allclose(sim.s11, bare, rtol=0, atol=1e-12)


def test_undriven_row_only_shows_zero_photon_anticrossing(device, env):
    grid = SweepGrid(0.40, 0.60, 201, 0.0, 0.0, 2)
    sim = run_map(grid, device, env)
    bare = reflection_coefficient(0.0, math.inf, device.tank, device.f_rf)
    ng = grid.ng_axis
    dev_from_bare = np.abs(sim.s11[0] - bare)
    n0_region = np.abs(62e9 * (1 - 2 * ng)) < device.f_mu / 2
    assert np.all(dev_from_bare[~n0_region] < 1e-12)
    assert dev_from_bare[n0_region].max() > 1e-3


def test_mirror_symmetry(device, env):
    # dyadic offsets keep n_g and 1 - n_g exact in binary
    offsets = np.arange(1, 129) / 1024.0
    amps = np.full(offsets.size, 0.15)
    left = ForwardModel(0.5 - offsets, amps, device).evaluate(env)[0]
    right = ForwardModel(0.5 + offsets, amps, device).evaluate(env)[0]
    np.testing.assert_allclose(np.abs(left), np.abs(right), rtol=1e-13)


def test_determinism(device, env):
    a = run_map(SMALL, device, env, diagnostics=True).to_csv()
    b = run_map(SMALL, device, env, diagnostics=True).to_csv()
    assert a == b


def test_refinement_keeps_samples(device, env):
    fine_grid = SweepGrid(SMALL.ng_min, SMALL.ng_max, 2 * SMALL.ng_steps - 1,
                          SMALL.amp_min, SMALL.amp_max, SMALL.amp_steps)
    coarse = run_map(SMALL, device, env)
    fine = run_map(fine_grid, device, env)
    assert np.array_equal(fine_grid.ng_axis[::2], SMALL.ng_axis)
    np.testing.assert_allclose(fine.s11[:, ::2], coarse.s11, rtol=1e-14, atol=0)


@pytest.mark.parametrize("threads", [2, 3, 0])
def test_partitioning_invariance(device, env, threads):
    one = run_map(SMALL, device, env, threads=1)
    many = run_map(SMALL, device, env, threads=threads)
    assert one.to_csv() == many.to_csv()


def test_unconverged_points_are_defects(device, env):
    grid = SweepGrid(0.42, 0.44, 5, 0.0, 2.0, 3)
    sim = run_map(grid, device, env, m_max=5)
    assert sim.defects, "large amplitude with a short m-sum must flag points"
    for row, col, reason in sim.defects:
        assert "m-sum-unconverged" in reason
        assert np.isnan(sim.s11[row, col])
    assert np.all(np.isfinite(sim.s11[0]))


def test_csv_layout(device, env):
    grid = SweepGrid(0.43, 0.44, 3, 0.0, 0.1, 2)
    sim = run_map(grid, device, env, diagnostics=True)
    lines = sim.to_csv().splitlines()
    assert lines[0] == "# " + ",".join(CSV_COLUMNS + DIAGNOSTIC_COLUMNS)
    assert len(lines) == 1 + 6
    rows = [ln.split(",") for ln in lines[1:]]
    # amplitude is the slow index
    assert [float(r[1]) for r in rows] == [0.0] * 3 + [0.1] * 3
    assert [float(r[0]) for r in rows[:3]] == list(grid.ng_axis)
    z = complex(float(rows[4][2]), float(rows[4][3]))
    assert z == sim.s11[1, 1]
    plain = write_map_csv(grid.ng_axis, grid.amp_axis, sim.s11)
    assert plain.splitlines()[0] == "# ng,amp,re_s11,im_s11"


def test_csv_to_file(tmp_path, device, env):
    sim = run_map(SMALL, device, env)
    path = tmp_path / "map.csv"
    text = sim.to_csv(path)
    assert path.read_text() == text
    buf = io.StringIO()
    sim.to_csv(buf)
    assert buf.getvalue() == text


def test_diagnostic_layers(device, env):
    sim = run_map(SMALL, device, env, diagnostics=True)
    assert set(sim.diagnostics) == set(DIAGNOSTIC_COLUMNS)
    for layer in sim.diagnostics.values():
        assert layer.shape == sim.s11.shape
    assert np.all(np.abs(sim.diagnostics["s_z0"]) <= 1.0)


def test_noise_is_seeded():
    z = np.exp(1j * np.linspace(0, 3, 50)).reshape(5, 10)
    a = add_noise(z, 0.01, 7)
    assert np.array_equal(a, add_noise(z, 0.01, 7))
    assert not np.array_equal(a, add_noise(z, 0.01, 8))
    rel = np.abs(a - z) / np.abs(z)
    assert 0.002 < rel.mean() < 0.02


def test_points_do_not_depend_on_batch(device, env):
    ng = np.array([0.43, 0.44, 0.45])
    amp = np.full(3, 0.05)
    alone = ForwardModel(ng, amp, device).evaluate(env)[0]
    # same points next to larger amplitudes and other resonance indices
    ng_mix = np.concatenate([ng, [0.30, 0.20]])
    amp_mix = np.concatenate([amp, [2.0, 1.5]])
    mixed = ForwardModel(ng_mix, amp_mix, device, m_max=60).evaluate(env)[0][:3]
    alone60 = ForwardModel(ng, amp, device, m_max=60).evaluate(env)[0]
    assert np.array_equal(mixed, alone60)
    np.testing.assert_allclose(alone, alone60, rtol=1e-14)


def test_cutoff_grows_with_amplitude(device, env):
    grid = SweepGrid(0.25, 0.50, 51, 0.0, 0.5, 11)
    assert grid_m_max(grid, device) > 20
    sim = run_map(grid, device, env)
    assert sim.defects == []
