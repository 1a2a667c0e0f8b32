"""高斯局域态系综上的时间分辨 / 稳态发光谱，含 GEL 光子能量修正。"""

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from core.constants import SI, PhysicalConstants
from core.errors import (
    DegenerateSystem,
    EnergyFoldError,
    InvalidInput,
    SingleLevelMode,
)
from core.rates import (
    DEFAULT_LAWS,
    FULL_MODEL,
    ModelToggles,
    PathProfile,
    PhononBranch,
    RateLaws,
    effective_widths,
    evaluate_widths,
    re_excitation_count,
)

logger = logging.getLogger(__name__)

MIN_GRID_POINTS = 16


@dataclass(frozen=True)
class GaussianDos:
    center_E0: float        # eV
    variance_sigma2: float  # eV²，0 表示单能级
    density_Nl: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.variance_sigma2) or self.variance_sigma2 < 0:
            raise InvalidInput(f"方差不能为负: {self.variance_sigma2}")
        if not math.isfinite(self.density_Nl) or self.density_Nl <= 0:
            raise InvalidInput(f"N_l 必须为正: {self.density_Nl}")

    @property
    def sigma(self):
        return math.sqrt(self.variance_sigma2)

    @property
    def single_level(self):
        return self.variance_sigma2 == 0


class GelMode(enum.Enum):
    FIXED = "Fixed"
    SELF_CONSISTENT = "SelfConsistent"


@dataclass(frozen=True)
class GelSettings:
    mode: GelMode = GelMode.FIXED
    t_lsc_fixed: float = 1.0   # ps
    alpha: float = 1.0

    def __post_init__(self):
        if self.mode is GelMode.FIXED and not self.t_lsc_fixed > 0:
            raise InvalidInput(f"Fixed 模式要求 t_lsc > 0: {self.t_lsc_fixed}")
        if self.mode is GelMode.SELF_CONSISTENT and not self.alpha > 0:
            raise InvalidInput(f"SelfConsistent 模式要求 alpha > 0: {self.alpha}")

    def t_lsc(self, chi):
        """平均末次散射时间 t̄_lsc (ps)。"""
        if self.mode is GelMode.FIXED:
            return self.t_lsc_fixed
        return self.alpha / chi


class SpectrumKind(enum.Enum):
    STEADY_STATE = "SteadyState"
    TIME_RESOLVED = "TimeResolvedSnapshot"


@dataclass(frozen=True, eq=False)
class Spectrum:
    energy_grid: np.ndarray
    intensity: np.ndarray
    temperature: float
    kind: SpectrumKind = SpectrumKind.STEADY_STATE

    def __post_init__(self):
        grid = np.asarray(self.energy_grid, dtype=float)
        values = np.asarray(self.intensity, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1 or grid.size == 0:
            raise InvalidInput("能量网格与强度长度不一致")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise InvalidInput("能量网格必须严格递增")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidInput("强度必须为有限非负值")
        object.__setattr__(self, "energy_grid", grid)
        object.__setattr__(self, "intensity", values)

    def scaled(self, factor):
        return replace(self, intensity=self.intensity * factor)

    def __len__(self):
        return self.energy_grid.size


@dataclass(frozen=True)
class ModelConfig:
    """一次计算所需的全部模型参数。"""

    laws: RateLaws
    optical: PhononBranch
    acoustic: PhononBranch
    dos: GaussianDos
    path: PathProfile
    gel: GelSettings = GelSettings()
    toggles: ModelToggles = FULL_MODEL
    constants: PhysicalConstants = SI
    mu_points: int = 2001
    mu_half_width_sigmas: float = 5.0
    strategy: object = field(default=DEFAULT_LAWS, compare=False, repr=False)

    @property
    def branches(self):
        return self.optical, self.acoustic

    def with_toggles(self, toggles):
        return replace(self, toggles=toggles)


# ── 基本算子 ──

def mu_grid(dos, points=2001, half_width_sigmas=5.0):
    """默认 μ 网格 E₀ ± 5σ；单能级模式只有一个通道。"""
    if dos.single_level:
        return np.array([dos.center_E0])
    if points < MIN_GRID_POINTS:
        raise InvalidInput(f"μ 网格至少需要 {MIN_GRID_POINTS} 个点")
    half = half_width_sigmas * dos.sigma
    return np.linspace(dos.center_E0 - half, dos.center_E0 + half, points)


def dos_density(dos, mu):
    """N_l/(σ√(2π))·exp(−(μ−E₀)²/(2σ²))。"""
    if dos.single_level:
        raise SingleLevelMode("σ² = 0，应使用单能级路径")
    s2 = dos.variance_sigma2
    diff = np.asarray(mu, dtype=float) - dos.center_E0
    return dos.density_Nl / math.sqrt(2.0 * math.pi * s2) * np.exp(-diff * diff / (2.0 * s2))


def channel_state(mu, temperature, config):
    """(μ, T) 处的能级宽度与有效宽度。"""
    widths = evaluate_widths(config.laws, config.branches, mu, temperature,
                             config.toggles, config.constants, config.strategy)
    return widths, effective_widths(widths, config.path, config.laws.C)


def gel_shift(mu, temperature, eff, branches, settings, toggles=FULL_MODEL):
    """GEL 能量损失 ΔE = (ħω_O·Γ_phO′ + ħω_A·Γ_phA′)·t̄_lsc (eV)。

    宽度以速率 (1/ps) 存储，t̄_lsc 以 ps 计，乘积直接为 eV。
    mu、temperature 的依赖已包含在 eff 中。
    """
    if not toggles.include_gel:
        return np.zeros_like(np.asarray(mu, dtype=float)) if np.ndim(mu) else 0.0
    optical, acoustic = branches
    loss = optical.energy_hw * eff.gamma_phO_eff + acoustic.energy_hw * eff.gamma_phA_eff
    shift = loss * settings.t_lsc(eff.chi)
    if np.ndim(mu) and np.ndim(shift) == 0:
        shift = np.full(np.shape(mu), shift)
    return shift


def photon_energy(mu, temperature, config):
    _, eff = channel_state(mu, temperature, config)
    return mu - gel_shift(mu, temperature, eff, config.branches, config.gel, config.toggles)


def radiative_probability(eff, re_count):
    """p = (Γ_P′/(Γ_P′+Γ_phO′+Γ_phA′))^Re，Re 可为非整数平均值 Re̅。"""
    if re_count < 0:
        raise InvalidInput(f"再激发次数不能为负: {re_count}")
    gp = np.asarray(eff.gamma_P_eff, dtype=float)
    denom = gp + np.asarray(eff.phonon_eff, dtype=float)
    if re_count == 0:
        p = np.ones(np.broadcast(gp, denom).shape)
    else:
        if np.any(denom <= 0):
            raise DegenerateSystem("Γ_P′ + Γ_ph′ = 0 且 Re > 0")
        p = (gp / denom) ** re_count
    return float(p) if p.ndim == 0 else p


def _emission_weight(mu, config):
    if config.dos.single_level:
        return config.dos.density_Nl
    return dos_density(config.dos, mu)


def steady_state_intensity(mu, temperature, config):
    """𝒥_ss = p̄·N_l·ρ(μ)/𝒳；N_l 已包含在 ρ 中，单能级时为 N_l。"""
    _, eff = channel_state(mu, temperature, config)
    chi = eff.chi
    if np.any(np.asarray(chi) <= 0):
        raise DegenerateSystem("有效速率 𝒳 为 0")
    re_mean = re_excitation_count(config.laws, config.optical, temperature, config.constants)
    return radiative_probability(eff, re_mean) * _emission_weight(mu, config) / chi


def time_resolved_intensity(mu, temperature, t, config, re_count=None):
    """𝒥_t-r = p·N_l·ρ(μ)·exp(−𝒳t)；默认 Re 取路径中的整数次数。"""
    if not math.isfinite(t) or t < 0:
        raise InvalidInput(f"时间必须为非负有限值: {t}")
    _, eff = channel_state(mu, temperature, config)
    if re_count is None:
        re_count = config.path.n_re
    p = radiative_probability(eff, re_count)
    return p * _emission_weight(mu, config) * np.exp(-eff.chi * t)


def decay_trace(config, temperature, mu, times):
    """固定 μ 通道的时间分辨强度曲线。"""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise InvalidInput("时间必须非负")
    _, eff = channel_state(mu, temperature, config)
    p = radiative_probability(eff, config.path.n_re)
    return p * _emission_weight(mu, config) * np.exp(-eff.chi * times)


# ── 谱合成 ──

def resolve_mu_grid(config, mu):
    if mu is None:
        return mu_grid(config.dos, config.mu_points, config.mu_half_width_sigmas)
    mu = np.asarray(mu, dtype=float)
    if config.dos.single_level:
        return np.array([config.dos.center_E0])
    if mu.ndim != 1 or mu.size < MIN_GRID_POINTS:
        raise InvalidInput(f"μ 网格至少需要 {MIN_GRID_POINTS} 个点")
    if not np.all(np.diff(mu) > 0):
        raise InvalidInput("μ 网格必须严格递增")
    return mu


def _to_energy_axis(mu, values, temperature, config, kind):
    energy = np.atleast_1d(photon_energy(mu, temperature, config))
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if energy.size == 1:
        return Spectrum(energy, values, temperature, kind)

    if not np.all(np.diff(energy) > 0):
        raise EnergyFoldError(f"T={temperature} K 时 μ→E 映射不单调")
    uniform = np.linspace(energy[0], energy[-1], energy.size)
    resampled = np.interp(uniform, energy, values)
    return Spectrum(uniform, np.clip(resampled, 0.0, None), temperature, kind)


def steady_state_spectrum(temperature, config, mu=None):
    mu = resolve_mu_grid(config, mu)
    values = steady_state_intensity(mu, temperature, config)
    return _to_energy_axis(mu, values, temperature, config, SpectrumKind.STEADY_STATE)


def time_resolved_spectrum(temperature, t, config, mu=None, re_count=None):
    mu = resolve_mu_grid(config, mu)
    values = time_resolved_intensity(mu, temperature, t, config, re_count)
    return _to_energy_axis(mu, values, temperature, config, SpectrumKind.TIME_RESOLVED)


def normalization_factor(config, temperature):
    """使全模型在 temperature 处的稳态谱峰值为 1 的缩放因子。"""
    reference = steady_state_spectrum(temperature, config.with_toggles(FULL_MODEL))
    peak = float(reference.intensity.max())
    if peak <= 0:
        raise DegenerateSystem(f"T={temperature} K 参考谱强度为 0")
    return 1.0 / peak
