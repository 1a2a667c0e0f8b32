"""温度扫描、消融场景与参考参数集的定性行为。"""

import json
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from core.errors import DegenerateSystem, InvalidInput
from core.rates import FULL_MODEL, DefaultRateLaws, ModelToggles
from core.spectrum import photon_energy
from core.sweep import (
    T_FLOOR,
    THREADS_ENV,
    Scenario,
    SweepRunner,
    SweepState,
    config_fingerprint,
    localization_dip_depth,
    prepare_temperatures,
    run_ablation,
    single_level_variant,
    temperature_sweep,
    thread_count,
)

REFERENCE_TEMPS = [float(t) for t in range(10, 301, 10)]


class FailingAt(DefaultRateLaws):
    def __init__(self, bad_temperature):
        self.bad_temperature = bad_temperature

    def widths(self, laws, branches, mu, temperature, toggles, constants):
        if temperature == self.bad_temperature:
            raise DegenerateSystem("人为失败")
        return super().widths(laws, branches, mu, temperature, toggles, constants)


def local_extrema(values):
    minima = [i for i in range(1, len(values) - 1)
              if values[i] < values[i - 1] and values[i] < values[i + 1]]
    maxima = [i for i in range(1, len(values) - 1)
              if values[i] > values[i - 1] and values[i] > values[i + 1]]
    return minima, maxima


@pytest.fixture(scope="module")
def reference_sweep(reference):
    return temperature_sweep(reference, REFERENCE_TEMPS)


# ── 温度序列 ──

def test_prepare_temperatures_clamps_zero():
    assert prepare_temperatures([0.0, 10.0]) == [T_FLOOR, 10.0]


@pytest.mark.parametrize("temps", [[], [10.0, 5.0], [-1.0, 10.0], [0.0, 0.05], [10.0, float("nan")]])
def test_prepare_temperatures_rejects(temps):
    with pytest.raises(InvalidInput):
        prepare_temperatures(temps)


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert thread_count() == 3
    monkeypatch.setenv(THREADS_ENV, "zero")
    assert thread_count() == min(8, os.cpu_count() or 1)
    monkeypatch.delenv(THREADS_ENV)
    assert thread_count() >= 1


def test_scenario_toggles():
    assert Scenario("full").toggles == FULL_MODEL
    assert not Scenario("no-gel").toggles.include_gel
    assert not Scenario("no-ep").toggles.include_ep
    assert not Scenario("frozen-ee").toggles.vary_ee


# ── 调度器 ──

def test_sweep_deterministic_across_threads(coarse):
    temps = [10.0, 60.0, 120.0, 240.0]
    serial = temperature_sweep(coarse, temps, threads=1)
    parallel = temperature_sweep(coarse, temps, threads=4)
    assert serial.observables == parallel.observables
    assert serial.temperatures == tuple(temps)
    for a, b in zip(serial.spectra, parallel.spectra):
        assert np.array_equal(a.intensity, b.intensity)


def test_sweep_normalized_to_lowest_temperature(coarse):
    sweep = temperature_sweep(coarse, [20.0, 200.0])
    assert sweep.spectra[0].intensity.max() == pytest.approx(1.0, rel=1e-12)


def test_failed_temperature_is_isolated(coarse):
    config = replace(coarse, strategy=FailingAt(200.0))
    sweep = temperature_sweep(config, [100.0, 200.0, 300.0], threads=2)
    assert [o.ok for o in sweep.observables] == [True, False, True]
    assert "人为失败" in sweep.failed[0].error
    assert np.isnan(sweep.peaks[1])
    assert sweep.spectra[1] is None


def test_failure_at_lowest_temperature_is_isolated(coarse):
    config = replace(coarse, strategy=FailingAt(10.0))
    sweep = temperature_sweep(config, [10.0, 100.0, 200.0], threads=1)
    assert [o.ok for o in sweep.observables] == [False, True, True]
    # 归一化落在第一个可算温度上
    assert sweep.spectra[1].intensity.max() == pytest.approx(1.0, rel=1e-12)


def test_all_temperatures_failing_keeps_unit_scale(coarse):
    config = replace(coarse, strategy=FailingAt(50.0))
    sweep = temperature_sweep(config, [50.0])
    assert sweep.scale == 1.0
    assert not sweep.observables[0].ok


def test_run_error_sets_error_state(coarse):
    runner = SweepRunner(coarse, threads=1)
    errors = []
    runner.on_error = errors.append
    with pytest.raises(InvalidInput):
        runner.run([100.0, 10.0])
    assert runner.state == SweepState.ERROR
    assert errors

    runner.start([10.0, 50.0])
    assert runner.wait(timeout=120) is not None
    assert runner.state == SweepState.COMPLETED


def test_window_keeps_successful_records(coarse):
    config = replace(coarse, strategy=FailingAt(200.0))
    sweep = temperature_sweep(config, [100.0, 200.0, 300.0])
    part = sweep.window(150.0, 350.0)
    assert part.temperatures == (300.0,)
    assert len(part.spectra) == 1


def test_callbacks_and_states(coarse):
    runner = SweepRunner(coarse, threads=2)
    progress, states = [], []
    runner.on_progress = lambda done, total, obs: progress.append((done, total))
    runner.on_state_change = states.append
    result = runner.run([10.0, 100.0, 200.0])
    assert progress[-1] == (3, 3)
    assert states == [SweepState.RUNNING, SweepState.COMPLETED]
    assert runner.result is result


def test_background_start_and_wait(coarse):
    runner = SweepRunner(coarse, threads=1)
    finished = []
    runner.on_complete = finished.append
    runner.start([10.0, 50.0])
    result = runner.wait(timeout=120)
    assert runner.state == SweepState.COMPLETED
    assert finished == [result]


def test_stop_and_resume_from_checkpoint(coarse, tmp_path):
    temps = [10.0, 50.0, 100.0, 150.0, 200.0]
    fingerprint = config_fingerprint(coarse, prepare_temperatures(temps))

    runner = SweepRunner(coarse, checkpoint_dir=str(tmp_path), threads=1)
    runner.on_progress = lambda done, total, obs: runner.stop()
    assert runner.run(temps) is None

    cp_path = runner.get_checkpoint_path(fingerprint)
    with open(cp_path, "r", encoding="utf-8") as f:
        saved = json.load(f)
    assert saved["fingerprint"] == fingerprint
    assert 1 <= len(saved["records"]) < len(temps)

    resumed = SweepRunner(coarse, checkpoint_dir=str(tmp_path), threads=1).run(temps, resume=True)
    fresh = temperature_sweep(coarse, temps)
    assert resumed.observables == fresh.observables
    assert not os.path.exists(cp_path)


def test_checkpoint_for_other_config_is_ignored(coarse, tmp_path):
    runner = SweepRunner(coarse, checkpoint_dir=str(tmp_path))
    runner.save_checkpoint("a" * 64, {})
    assert runner.load_checkpoint("b" * 64) is None


# ── 参考参数集 ──

def test_reference_sweep_runtime(reference):
    start = time.perf_counter()
    sweep = temperature_sweep(reference, REFERENCE_TEMPS, keep_spectra=False)
    assert time.perf_counter() - start < 10.0
    assert not sweep.failed


def test_reference_peak_is_s_shaped(reference_sweep):
    minima, maxima = local_extrema(reference_sweep.peaks)
    assert minima and maxima
    assert any(j > i for i in minima for j in maxima)


def test_reference_lifetime_peaks_below_100k(reference_sweep):
    tau = reference_sweep.column("decay_time")
    i = int(np.argmax(tau))
    assert 0 < i < len(tau) - 1
    assert REFERENCE_TEMPS[i] < 100.0


def test_reference_intensity_declines_at_high_temperature(reference_sweep):
    intensity = reference_sweep.window(150.0, 300.0).column("integrated_intensity")
    assert np.all(np.diff(intensity) <= 0)


def test_static_flat_model_keeps_peak_at_center(reference):
    config = replace(reference, laws=replace(reference.laws, gamma_R0=0.0)).with_toggles(
        ModelToggles(include_gel=False, include_ep=False, vary_ee=False))
    sweep = temperature_sweep(config, [10.0, 150.0, 300.0])
    assert np.allclose(sweep.peaks, 3.0, atol=1e-9)


def test_single_level_peak_curve(single_level):
    temps = [10.0, 100.0, 200.0, 300.0]
    sweep = temperature_sweep(single_level, temps)
    expected = [photon_energy(3.0, t, single_level) for t in temps]
    assert list(sweep.peaks) == pytest.approx(expected, rel=1e-14)
    assert np.all(np.diff(sweep.peaks) <= 0)


# ── 消融 ──

def test_no_gel_blueshifts(reference):
    sweep = run_ablation(reference, "no-gel", [50.0, 300.0])
    assert sweep.peaks[1] >= sweep.peaks[0]


def test_no_ep_intensity_and_lifetime_rise(reference):
    sweep = run_ablation(reference, Scenario.NO_EP, np.linspace(50.0, 300.0, 6))
    assert np.all(np.diff(sweep.column("integrated_intensity")) > 0)
    assert np.all(np.diff(sweep.column("decay_time")) > 0)


def test_frozen_ee_differs_at_low_temperature(reference):
    temps = [10.0, 20.0, 30.0, 40.0]
    full = run_ablation(reference, "full", temps)
    frozen = run_ablation(reference, "frozen-ee", temps)
    assert np.max(np.abs(full.peaks - frozen.peaks)) > 1e-6


def test_ablation_normalized_to_full_model(coarse):
    full = run_ablation(coarse, "full", [20.0, 100.0])
    no_ep = run_ablation(coarse, "no-ep", [20.0, 100.0])
    assert full.scale == no_ep.scale


# ── 局域化红移 ──

def test_dip_depth_collapses_with_variance(coarse):
    temps = [float(t) for t in range(10, 101, 10)]
    depths = []
    for sigma2 in (0.05, 0.04, 0.03, 0.02, 0.01, 0.0):
        config = replace(coarse, dos=replace(coarse.dos, variance_sigma2=sigma2))
        sweep = temperature_sweep(config, temps)
        single = temperature_sweep(single_level_variant(config), temps)
        depths.append(localization_dip_depth(sweep, single))
    assert all(b <= a for a, b in zip(depths, depths[1:]))
    assert depths[-1] == 0.0
    assert depths[0] > 0.0
