"""解析极限律：Huang–Rhys 因子、O'Donnell–Chen 一致性、Varshni 拟合、
局域化红移上界、低温 Arrhenius 形式与高温强度检查。
"""

import logging
import math
from collections import namedtuple
from dataclasses import dataclass, replace

import numpy as np

from core.constants import SI
from core.errors import InvalidInput, PreconditionViolation
from core.fitting import nelder_mead_minimize
from core.rates import FULL_MODEL, PhononBranch, bose_occupation
from core.spectrum import GelMode, channel_state, gel_shift, photon_energy
from core.sweep import localization_dip_depth, single_level_variant, temperature_sweep

logger = logging.getLogger(__name__)

DEGENERATE_SHIFT = 1e-6     # eV
IDENTITY_TOLERANCE = 1e-12
# 低于此量级的值按 0 处理（次正规数不参与相对误差）
NEGLIGIBLE = 1e-290


@dataclass(frozen=True)
class HuangRhys:
    f: float
    branch: PhononBranch

    def __post_init__(self):
        if not math.isfinite(self.f) or self.f < 0:
            raise InvalidInput(f"f 必须为非负有限值: {self.f}")

    @property
    def S0(self):
        return self.f / 2.0


@dataclass(frozen=True)
class VarshniFit:
    E0_fit: float
    gamma: float
    theta: float
    rms_residual: float
    degenerate: bool = False


@dataclass(frozen=True)
class RedshiftBoundInputs:
    xi: float
    g: float
    sigma2: float
    T_e: float

    def __post_init__(self):
        if not 0.0 <= self.xi <= 1.0:
            raise InvalidInput(f"xi 必须在 [0,1]: {self.xi}")
        if not 0.0 <= self.g <= 1.0:
            raise InvalidInput(f"g 必须在 [0,1]: {self.g}")
        if self.sigma2 < 0:
            raise InvalidInput(f"sigma2 不能为负: {self.sigma2}")
        if not self.T_e > 0:
            raise InvalidInput(f"T_e 必须为正: {self.T_e}")


ArrheniusFit = namedtuple("ArrheniusFit", ["zeta0", "I0", "r_squared"])


def _relative_error(value, reference):
    if abs(reference) < NEGLIGIBLE and abs(value) < NEGLIGIBLE:
        return 0.0
    return abs(value - reference) / max(abs(reference), abs(value))


# ── Huang–Rhys / O'Donnell–Chen ──

def huang_rhys_S(hr, temperature, constants=SI):
    """𝒮(T) = f·n̄(ω, T)。"""
    return hr.f * bose_occupation(hr.branch.energy_hw, temperature, constants)


def odonnell_chen_shift(S0, hw, temperature, constants=SI):
    """S₀·ħω·(coth(ħω/2k_BT) − 1)，以 2e^{−2y}/(1 − e^{−2y}) 计算避免抵消误差。"""
    hw_arr = np.asarray(hw, dtype=float)
    t_arr = np.asarray(temperature, dtype=float)
    if np.any(hw_arr <= 0) or np.any(t_arr < 0):
        raise InvalidInput("要求 hw > 0 且 T ≥ 0")
    positive = t_arr > 0
    with np.errstate(over="ignore", divide="ignore", under="ignore"):
        two_y = hw_arr / (constants.k_B * np.where(positive, t_arr, 1.0))
        value = np.where(positive, 2.0 * np.exp(-two_y) / -np.expm1(-two_y), 0.0)
    shift = S0 * hw_arr * value
    return float(shift) if shift.ndim == 0 else shift


def bose_identity_grid(points=64, hw_range=(0.001, 0.2), t_range=(1.0, 500.0), constants=SI):
    """O'Donnell–Chen 项与 2S₀ħω·n̄ 在 (ħω, T) 网格上的最大相对误差。"""
    max_err = 0.0
    for hw in np.linspace(*hw_range, points):
        for t in np.linspace(*t_range, points):
            oc = odonnell_chen_shift(1.0, hw, t, constants)
            hr = 2.0 * hw * bose_occupation(hw, t, constants)
            max_err = max(max_err, _relative_error(oc, hr))
    return {
        "check": "bose_identity",
        "points": points * points,
        "max_relative_error": max_err,
        "passed": max_err <= IDENTITY_TOLERANCE,
    }


def huang_rhys_factor_of(config):
    """GEL 与 Huang–Rhys 对应时的 f = w_sc·Γ_phO,0·t_lsc。"""
    w_sc = config.path.weights()[0]
    return w_sc * config.optical.base_width * config.gel.t_lsc_fixed


def huang_rhys_variant(config):
    """满足 GEL–Huang–Rhys 对应前提的约化：仅光学声子、无自发宽度、Fixed t̄_lsc、全模型开关。"""
    gel = config.gel
    if gel.mode is not GelMode.FIXED:
        gel = replace(gel, mode=GelMode.FIXED)
    return replace(
        config.with_toggles(FULL_MODEL),
        optical=replace(config.optical, spontaneous_floor=0.0),
        acoustic=replace(config.acoustic, base_width=0.0, spontaneous_floor=0.0),
        gel=gel,
    )


def gel_hr_consistency(config, mus=None, temperatures=None):
    """在 (μ, T) 网格上验证 gel_shift = 𝒮(T)·ħω。

    前提：Fixed t̄_lsc、仅光学声子支、无自发宽度、GEL 与 e-p 开启。
    """
    if config.gel.mode is not GelMode.FIXED:
        raise PreconditionViolation("GEL–Huang–Rhys 对应要求 Fixed t̄_lsc 模式")
    if config.acoustic.base_width != 0 or config.acoustic.spontaneous_floor != 0:
        raise PreconditionViolation("GEL–Huang–Rhys 对应要求只有光学声子支")
    if config.optical.spontaneous_floor != 0:
        raise PreconditionViolation("GEL–Huang–Rhys 对应要求 spontaneous_floor = 0")
    if not (config.toggles.include_gel and config.toggles.include_ep):
        raise PreconditionViolation("GEL–Huang–Rhys 对应要求 GEL 与 e-p 开启")

    hr = HuangRhys(f=huang_rhys_factor_of(config), branch=config.optical)
    if mus is None:
        mus = np.linspace(config.dos.center_E0 - 0.2, config.dos.center_E0 + 0.2, 9)
    if temperatures is None:
        temperatures = [0.0, 10.0, 50.0, 100.0, 200.0, 300.0, 400.0]

    max_err = 0.0
    for t in temperatures:
        expected = huang_rhys_S(hr, t, config.constants) * config.optical.energy_hw
        for mu in mus:
            _, eff = channel_state(float(mu), t, config)
            shift = gel_shift(float(mu), t, eff, config.branches, config.gel, config.toggles)
            max_err = max(max_err, _relative_error(float(shift), expected))
    return {
        "check": "gel_huang_rhys",
        "f": hr.f,
        "max_relative_error": max_err,
        "passed": max_err <= IDENTITY_TOLERANCE,
    }


# ── Varshni ──

def varshni(temperatures, E0, gamma, theta):
    t = np.asarray(temperatures, dtype=float)
    return E0 - gamma * t * t / (theta + t)


def _varshni_linear(temps, energies, theta):
    """给定 θ，E(0) 与 γ 的线性最小二乘解。"""
    basis = temps * temps / (theta + temps)
    design = np.column_stack([np.ones_like(temps), -basis])
    (e0, gamma), *_ = np.linalg.lstsq(design, energies, rcond=None)
    residual = energies - (e0 - gamma * basis)
    return e0, gamma, residual


def varshni_fit(temperatures, peak_energies):
    """拟合 E(T) = E(0) − γT²/(θ+T)。

    θ 由无导数单纯形法搜索，E(0)、γ 在每个 θ 处线性求解。
    """
    temps = np.asarray(temperatures, dtype=float)
    energies = np.asarray(peak_energies, dtype=float)
    if temps.size < 5 or temps.size != energies.size:
        raise InvalidInput("Varshni 拟合至少需要 5 个点")
    if not (np.all(np.isfinite(temps)) and np.all(np.isfinite(energies))):
        raise InvalidInput("Varshni 拟合数据含非有限值")
    if np.any(np.diff(temps) <= 0):
        raise InvalidInput("温度必须严格递增")

    span = float(energies.max() - energies.min())
    if span < DEGENERATE_SHIFT:
        rms = float(np.sqrt(np.mean((energies - energies.mean()) ** 2)))
        logger.info(f"总位移 {span:.3e} eV 过小，θ 不可辨识")
        return VarshniFit(float(energies.mean()), 0.0, float("nan"), rms, degenerate=True)

    def objective(x):
        _, _, residual = _varshni_linear(temps, energies, x[0])
        return float(np.mean(residual * residual)) / (span * span)

    grid = np.logspace(0, 4, 41)
    theta0 = min(grid, key=lambda th: objective([th]))
    result = nelder_mead_minimize(objective, [theta0], [(1e-3, 1e6)])
    theta = float(result.x[0])
    e0, gamma, residual = _varshni_linear(temps, energies, theta)
    rms = float(np.sqrt(np.mean(residual * residual)))
    logger.debug(f"Varshni 拟合: E0={e0:.6f} γ={gamma:.4e} θ={theta:.3f} rms={rms:.3e}")
    return VarshniFit(float(e0), float(gamma), theta, rms, degenerate=False)


def single_level_peak_curve(config, temperatures):
    """单能级模型的峰位曲线 E₀ − ΔE_GEL(E₀, T)。"""
    single = single_level_variant(config)
    return np.array([float(photon_energy(config.dos.center_E0, t, single))
                     for t in temperatures])


# ── 局域化红移上界 ──

def redshift_bound(inputs, constants=SI):
    """ΔE_LTR < ξ·(1−g)·σ²/(k_B·T_e)。"""
    return inputs.xi * (1.0 - inputs.g) * inputs.sigma2 / (constants.k_B * inputs.T_e)


def redshift_bound_check(sweep, single_level_sweep, inputs, window=100.0, constants=SI):
    depth = localization_dip_depth(sweep, single_level_sweep, window)
    bound = redshift_bound(inputs, constants)
    return {
        "check": "redshift_bound",
        "dip_depth_eV": depth,
        "bound_eV": bound,
        "g": inputs.g,
        "T_e": inputs.T_e,
        "passed": depth <= bound,
    }


def _primed_at_center(config, temperature):
    _, eff = channel_state(config.dos.center_E0, temperature, config)
    return eff


def zeta(config, temperature):
    """ζ(T) = Γ_L′/(Γ_R′+Γ_P′+Γ_phO′+Γ_phA′)，在 E₀ 处求值。"""
    eff = _primed_at_center(config, temperature)
    losses = float(eff.chi - eff.gamma_L_eff)
    if losses <= 0:
        return float("inf")
    return float(eff.gamma_L_eff) / losses


def xi(config, temperature):
    """ξ = Γ_L′/𝒳，在 E₀ 处求值，取值于 [0, 1]。"""
    eff = _primed_at_center(config, temperature)
    chi = float(eff.chi)
    return float(eff.gamma_L_eff) / chi if chi > 0 else 0.0


# ── Arrhenius ──

def arrhenius_model(temperatures, I0, zeta0, E0, Ea, constants=SI):
    t = np.asarray(temperatures, dtype=float)
    return I0 / (1.0 + zeta0 * np.exp((E0 - Ea) / (constants.k_B * t)))


def arrhenius_fit(temperatures, intensities, E0, Ea, constants=SI):
    """拟合 I(T) = I₀/[1 + ζ₀e^{(E₀−E_a)/k_BT}]，ζ₀ 在窗口内视为常数。

    I₀ 对每个 ζ₀ 取闭式最优缩放，只对 ζ₀ ≥ 0 做一维搜索。
    """
    temps = np.asarray(temperatures, dtype=float)
    values = np.asarray(intensities, dtype=float)
    if temps.size < 3 or temps.size != values.size:
        raise InvalidInput("Arrhenius 拟合至少需要 3 个点")
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise InvalidInput("Arrhenius 拟合要求强度为正")
    if np.any(temps <= 0):
        raise InvalidInput("Arrhenius 拟合要求 T > 0")

    factor = np.exp((E0 - Ea) / (constants.k_B * temps))
    norm = float(np.dot(values, values))

    def shape(z):
        return 1.0 / (1.0 + z * factor)

    def best_scale(m):
        return float(np.dot(m, values) / np.dot(m, m))

    def objective(x):
        m = shape(x[0])
        r = best_scale(m) * m - values
        return float(np.dot(r, r)) / norm

    candidates = np.concatenate([[0.0], np.logspace(-6, 12, 73)])
    zeta_start = min(candidates, key=lambda z: objective([z]))
    result = nelder_mead_minimize(objective, [zeta_start], [(0.0, 1e15)])
    zeta0 = float(result.x[0])
    m = shape(zeta0)
    I0 = best_scale(m)
    ss_res = float(np.sum((I0 * m - values) ** 2))
    ss_tot = float(np.sum((values - values.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return ArrheniusFit(zeta0, I0, r_squared)


def two_level_variant(config):
    """低温 Arrhenius 形式成立的两能级约化：单能级、β_ee = 0、无再激发、无声学声子。"""
    reduced = single_level_variant(config)
    return replace(
        reduced,
        laws=replace(config.laws, beta_ee=0.0, re_excite_base=0.0, re_excite_kappa=0.0),
        acoustic=replace(config.acoustic, base_width=0.0, spontaneous_floor=0.0),
    )


def arrhenius_check(config, t_min=10.0, t_max=60.0, points=11, min_r_squared=0.99):
    """全模型在低温窗口内的积分强度对 I0/(1+ζ0·e^{(E0−Ea)/kT}) 的拟合优度。"""
    full = config.with_toggles(FULL_MODEL)
    temps = np.linspace(t_min, t_max, points)
    sweep = temperature_sweep(full, temps, keep_spectra=False, threads=1)
    ok = [o for o in sweep.observables if o.ok]
    fit = arrhenius_fit([o.temperature for o in ok], [o.integrated_intensity for o in ok],
                        config.dos.center_E0, config.laws.E_a, config.constants)
    return {
        "check": "arrhenius",
        "window_K": [t_min, t_max],
        "zeta0": fit.zeta0,
        "zeta_at_center": [zeta(full, t) for t in (t_min, t_max)],
        "r_squared": fit.r_squared,
        "passed": fit.r_squared >= min_r_squared,
    }


# ── 高温强度 ──

def high_temp_intensity_check(sweep, t_min=200.0, t_max=350.0):
    """高温窗口内 log I 递减且为凸（或线性）。强度不递减时返回 NOT_APPLICABLE。"""
    part = sweep.window(t_min, t_max)
    temps = np.array(part.temperatures)
    intensity = part.column("integrated_intensity")
    if temps.size < 3 or np.any(intensity <= 0):
        return {"check": "high_temp_intensity", "status": "NOT_APPLICABLE",
                "reason": "窗口内有效点不足", "passed": True}

    log_i = np.log(intensity)
    slopes = np.diff(log_i) / np.diff(temps)
    decreasing = bool(np.all(slopes < 0))
    if not decreasing:
        return {"check": "high_temp_intensity", "status": "NOT_APPLICABLE",
                "reason": "强度不随温度递减", "passed": True}

    tolerance = 1e-9 * float(np.max(np.abs(slopes)))
    convex = bool(np.all(np.diff(slopes) >= -tolerance))
    return {
        "check": "high_temp_intensity",
        "status": "PASS" if convex else "FAIL",
        "decreasing": decreasing,
        "convex_or_linear": convex,
        "passed": convex,
    }
