"""解析极限律：Huang–Rhys、Varshni、局域化红移上界、Arrhenius 与高温强度。"""

from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import linregress

from core.constants import SI
from core.errors import InvalidInput, PreconditionViolation
from core.limits import (
    HuangRhys,
    RedshiftBoundInputs,
    arrhenius_check,
    arrhenius_fit,
    arrhenius_model,
    bose_identity_grid,
    gel_hr_consistency,
    high_temp_intensity_check,
    huang_rhys_S,
    huang_rhys_factor_of,
    huang_rhys_variant,
    odonnell_chen_shift,
    redshift_bound,
    single_level_peak_curve,
    varshni,
    varshni_fit,
    xi,
    zeta,
)
from core.rates import ModelToggles, bose_occupation
from core.spectrum import GelMode
from core.sweep import run_ablation, temperature_sweep

VARSHNI_TEMPS = np.linspace(10.0, 350.0, 50)


def optical_only(reference, f, hw=0.03):
    """只含光学声子支、Huang–Rhys 因子为 f 的约化模型。"""
    variant = huang_rhys_variant(reference)
    w_sc = variant.path.weights()[0]
    base = f / (w_sc * variant.gel.t_lsc_fixed)
    return replace(variant, optical=replace(variant.optical, energy_hw=hw, base_width=base))


# ── Huang–Rhys / O'Donnell–Chen ──

def test_huang_rhys_S(reference):
    hr = HuangRhys(2.0, reference.optical)
    assert hr.S0 == 1.0
    assert huang_rhys_S(hr, 0.0) == 0.0
    expected = 2.0 * bose_occupation(reference.optical.energy_hw, 300.0)
    assert huang_rhys_S(hr, 300.0) == pytest.approx(expected, rel=1e-15)
    with pytest.raises(InvalidInput):
        HuangRhys(-1.0, reference.optical)


def test_odonnell_chen_shift():
    assert odonnell_chen_shift(1.0, 0.05, 0.0) == 0.0
    value = odonnell_chen_shift(0.7, 0.05, 250.0)
    assert value == pytest.approx(2 * 0.7 * 0.05 * bose_occupation(0.05, 250.0), rel=1e-12)
    with pytest.raises(InvalidInput):
        odonnell_chen_shift(1.0, -0.05, 10.0)


def test_bose_identity_grid():
    report = bose_identity_grid(points=16)
    assert report["points"] == 256
    assert report["passed"]


def test_bose_identity_grid_natural_units():
    natural = SI.natural()
    hw_range = (natural.energy(0.001), natural.energy(0.2))
    assert bose_identity_grid(points=12, hw_range=hw_range, constants=natural)["passed"]


def test_gel_matches_huang_rhys(reference):
    variant = huang_rhys_variant(reference)
    report = gel_hr_consistency(variant)
    assert report["passed"]
    assert report["f"] == pytest.approx(huang_rhys_factor_of(variant))
    assert report["f"] == pytest.approx(0.5 * 0.2 * 22.8)


def test_gel_consistency_preconditions(reference):
    with pytest.raises(PreconditionViolation):
        gel_hr_consistency(reference)
    variant = huang_rhys_variant(reference)
    with pytest.raises(PreconditionViolation):
        gel_hr_consistency(replace(variant, gel=replace(variant.gel, mode=GelMode.SELF_CONSISTENT)))
    with pytest.raises(PreconditionViolation):
        gel_hr_consistency(replace(variant, optical=replace(variant.optical, spontaneous_floor=0.01)))


# ── Varshni ──

def test_varshni_recovers_parameters():
    energies = varshni(VARSHNI_TEMPS, 3.40, 5e-4, 200.0)
    fit = varshni_fit(VARSHNI_TEMPS, energies)
    assert not fit.degenerate
    assert fit.E0_fit == pytest.approx(3.40, rel=1e-6)
    assert fit.gamma == pytest.approx(5e-4, rel=1e-6)
    assert fit.theta == pytest.approx(200.0, rel=1e-6)
    assert fit.rms_residual < 1e-9


def test_varshni_refit_is_stable():
    rng = np.random.default_rng(7)
    energies = varshni(VARSHNI_TEMPS, 3.2, 4e-4, 150.0) + 1e-4 * rng.standard_normal(VARSHNI_TEMPS.size)
    first = varshni_fit(VARSHNI_TEMPS, energies)
    again = varshni_fit(VARSHNI_TEMPS, varshni(VARSHNI_TEMPS, first.E0_fit, first.gamma, first.theta))
    assert again.E0_fit == pytest.approx(first.E0_fit, rel=1e-6)
    assert again.gamma == pytest.approx(first.gamma, rel=1e-5)
    assert again.theta == pytest.approx(first.theta, rel=1e-5)


def test_varshni_degenerate_curve():
    fit = varshni_fit(VARSHNI_TEMPS, np.full(VARSHNI_TEMPS.size, 3.0))
    assert fit.degenerate
    assert np.isnan(fit.theta)
    assert fit.gamma == 0.0


def test_varshni_input_validation():
    with pytest.raises(InvalidInput):
        varshni_fit([10.0, 20.0, 30.0], [3.0, 2.9, 2.8])
    with pytest.raises(InvalidInput):
        varshni_fit(VARSHNI_TEMPS[::-1], varshni(VARSHNI_TEMPS, 3.4, 5e-4, 200.0))


def test_varshni_form_emerges_from_single_level(reference):
    temps = np.linspace(50.0, 350.0, 31)
    curve = single_level_peak_curve(optical_only(reference, 2.0), temps)
    fit = varshni_fit(temps, curve)
    total_shift = curve[0] - curve[-1]
    assert total_shift > 0
    assert fit.rms_residual <= 0.03 * total_shift
    assert fit.gamma > 0
    # 最小二乘 θ 与 ħω/k_B 同量级
    hw_over_k = 0.03 / SI.k_B
    assert 0.5 * hw_over_k <= fit.theta <= 2.0 * hw_over_k


def test_varshni_gamma_linear_in_coupling(reference):
    temps = np.linspace(50.0, 350.0, 31)
    couplings = [0.5, 1.0, 2.0, 4.0]
    gammas = [varshni_fit(temps, single_level_peak_curve(optical_only(reference, f), temps)).gamma
              for f in couplings]
    assert linregress(couplings, gammas).rvalue ** 2 >= 0.999


# ── 局域化红移上界 ──

def test_redshift_bound_formula():
    inputs = RedshiftBoundInputs(xi=0.5, g=0.0, sigma2=0.01, T_e=50.0)
    assert redshift_bound(inputs) == pytest.approx(0.5 * 0.01 / (SI.k_B * 50.0), rel=1e-15)
    assert redshift_bound(replace(inputs, g=1.0)) == 0.0


@pytest.mark.parametrize("kwargs", [
    {"xi": 1.5, "g": 0.0, "sigma2": 0.01, "T_e": 50.0},
    {"xi": 0.5, "g": -0.1, "sigma2": 0.01, "T_e": 50.0},
    {"xi": 0.5, "g": 0.0, "sigma2": -0.01, "T_e": 50.0},
    {"xi": 0.5, "g": 0.0, "sigma2": 0.01, "T_e": 0.0},
])
def test_redshift_bound_inputs_validated(kwargs):
    with pytest.raises(InvalidInput):
        RedshiftBoundInputs(**kwargs)


@pytest.mark.parametrize("temperature", [10.0, 100.0, 300.0])
def test_zeta_and_xi(reference, temperature):
    x = xi(reference, temperature)
    assert 0.0 <= x <= 1.0
    assert zeta(reference, temperature) == pytest.approx(x / (1.0 - x), rel=1e-12)


# ── Arrhenius ──

def test_arrhenius_fit_recovers_synthetic():
    temps = np.linspace(10.0, 60.0, 11)
    values = arrhenius_model(temps, 2.0, 5.0, 3.0, 3.01)
    fit = arrhenius_fit(temps, values, 3.0, 3.01)
    assert fit.zeta0 == pytest.approx(5.0, rel=1e-5)
    assert fit.I0 == pytest.approx(2.0, rel=1e-6)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-9)


def test_arrhenius_fit_validation():
    with pytest.raises(InvalidInput):
        arrhenius_fit([10.0, 20.0, 30.0], [1.0, -1.0, 0.5], 3.0, 3.01)


def test_arrhenius_check_on_full_reference_model(reference):
    report = arrhenius_check(reference)
    assert report["passed"]
    assert report["r_squared"] >= 0.99
    assert report["window_K"] == [10.0, 60.0]


def test_arrhenius_check_ignores_ablation_toggles(reference):
    ablated = reference.with_toggles(ModelToggles(include_ep=False))
    assert arrhenius_check(ablated)["r_squared"] == arrhenius_check(reference)["r_squared"]


def test_arrhenius_check_on_two_level_reduction(two_level):
    assert arrhenius_check(two_level)["passed"]


# ── 高温强度 ──

def test_high_temperature_intensity_is_log_convex(coarse):
    sweep = temperature_sweep(coarse, np.linspace(200.0, 350.0, 16))
    report = high_temp_intensity_check(sweep)
    assert report["status"] == "PASS"
    assert report["decreasing"]


def test_high_temperature_check_not_applicable_without_phonons(coarse):
    sweep = run_ablation(coarse, "no-ep", [200.0, 250.0, 300.0, 350.0])
    report = high_temp_intensity_check(sweep)
    assert report["status"] == "NOT_APPLICABLE"
    assert report["passed"]
