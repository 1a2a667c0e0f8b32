"""内置自检：速率方程、守恒、时间积分恒等式、玻色恒等式、GEL–HR 对应、线形提取精度。"""

import logging
import time
from dataclasses import replace

import numpy as np
from scipy.integrate import quad

from core.analysis import extract_fwhm, integrated_intensity
from core.limits import bose_identity_grid, gel_hr_consistency
from core.rates import LevelWidths, occupancy_closed_form, occupancy_ode_oracle, re_excitation_count
from core.spectrum import (
    GelMode,
    GelSettings,
    Spectrum,
    channel_state,
    steady_state_intensity,
    time_resolved_intensity,
)

logger = logging.getLogger(__name__)

FWHM_FACTOR = 2.0 * np.sqrt(2.0 * np.log(2.0))


def random_widths(rng, n):
    g = rng.uniform(0.0, 10.0, size=(5, n))
    return LevelWidths(*g)


def check_rate_fidelity(seed=0, draws=1000):
    """闭式解与 RK4 数值解逐点比较，并检查 σ_aa + σ_bb = 1。"""
    rng = np.random.default_rng(seed)
    widths = random_widths(rng, draws)
    X = widths.X
    t = rng.uniform(0.0, 1.0, size=draws) * 10.0 / X
    start = time.perf_counter()
    exact = occupancy_closed_form(widths, t)
    oracle = occupancy_ode_oracle(widths, t, 0.01 / X)
    elapsed = time.perf_counter() - start

    err = max(float(np.max(np.abs(exact.sigma_aa - oracle.sigma_aa))),
              float(np.max(np.abs(exact.sigma_bb - oracle.sigma_bb))))
    drift = max(float(np.max(np.abs(exact.sigma_aa + exact.sigma_bb - 1.0))),
                float(np.max(np.abs(oracle.sigma_aa + oracle.sigma_bb - 1.0))))
    return [
        {"check": "rate_equation_fidelity", "draws": draws,
         "max_abs_error": err, "seconds": elapsed, "passed": err <= 1e-9},
        {"check": "conservation", "max_deviation": drift,
         "passed": drift <= 1e-12},
    ]


def check_integral_identity(config, temperatures=(10.0, 300.0), points=64):
    """∫₀^{50/𝒳} 𝒥_t-r dt 与 𝒥_ss 的相对误差（p 取 p̄）。"""
    dos = config.dos
    half = 5.0 * dos.sigma
    mus = np.linspace(dos.center_E0 - half, dos.center_E0 + half, points)
    max_err = 0.0
    for temperature in temperatures:
        re_mean = re_excitation_count(config.laws, config.optical, temperature, config.constants)
        for mu in mus:
            mu = float(mu)
            _, eff = channel_state(mu, temperature, config)
            horizon = 50.0 / float(eff.chi)
            value, _ = quad(
                lambda t: float(time_resolved_intensity(mu, temperature, t, config, re_mean)),
                0.0, horizon, epsabs=0.0, epsrel=1e-11, limit=200)
            steady = float(steady_state_intensity(mu, temperature, config))
            max_err = max(max_err, abs(value - steady) / steady)
    return {"check": "time_integral_identity", "points": points,
            "max_relative_error": max_err, "passed": max_err <= 1e-6}


def random_hr_configs(config, rng, count):
    """满足 GEL–HR 对应前提的随机配置。"""
    for _ in range(count):
        optical = replace(config.optical, energy_hw=rng.uniform(0.01, 0.1),
                          base_width=rng.uniform(0.01, 1.0), spontaneous_floor=0.0)
        acoustic = replace(config.acoustic, base_width=0.0, spontaneous_floor=0.0)
        path = replace(config.path, t_tr=rng.uniform(0.1, 2.0), t_sc=rng.uniform(0.1, 2.0),
                       t_p=rng.uniform(0.1, 2.0), t_re=rng.uniform(0.1, 2.0))
        gel = GelSettings(GelMode.FIXED, t_lsc_fixed=rng.uniform(1.0, 50.0))
        yield replace(config, optical=optical, acoustic=acoustic, path=path, gel=gel)


def check_gel_hr(config, seed=0, count=100):
    rng = np.random.default_rng(seed)
    worst = max(gel_hr_consistency(c)["max_relative_error"]
                for c in random_hr_configs(config, rng, count))
    return {"check": "gel_huang_rhys", "configs": count,
            "max_relative_error": worst, "passed": worst <= 1e-12}


def check_line_extraction(sigma_e=0.05, center=3.0, points=2001):
    energy = np.linspace(center - 5 * sigma_e, center + 5 * sigma_e, points)
    line = Spectrum(energy, np.exp(-(energy - center) ** 2 / (2 * sigma_e ** 2)), 300.0)
    fwhm_err = abs(extract_fwhm(line) / (FWHM_FACTOR * sigma_e) - 1.0)
    area_err = abs(integrated_intensity(line) / (sigma_e * np.sqrt(2 * np.pi)) - 1.0)
    return {"check": "line_extraction",
            "fwhm_relative_error": fwhm_err, "integral_relative_error": area_err,
            "passed": fwhm_err <= 1e-3 and area_err <= 1e-4}


def run_selftest(config, seed=0):
    """依次执行全部自检，返回检查结果列表。"""
    checks = []
    checks.extend(check_rate_fidelity(seed))
    checks.append(check_integral_identity(config))
    checks.append(bose_identity_grid())
    checks.append(check_gel_hr(config, seed))
    checks.append(check_line_extraction())
    for c in checks:
        status = "通过" if c["passed"] else "未通过"
        logger.info(f"[自检] {c['check']}: {status}")
    return checks
