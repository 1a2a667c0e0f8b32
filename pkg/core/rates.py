"""能级宽度、两态密度矩阵速率方程与路径加权有效速率 𝒳。

所有函数都是输入的纯函数；mu 可以是标量或 numpy 数组（谱计算按 μ 向量化）。
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from core.constants import SI
from core.errors import (
    DegeneratePath,
    DegenerateSystem,
    InvalidInput,
    StepTooLarge,
)

logger = logging.getLogger(__name__)

# Γ_L 的 e-e 线性律以 300 K 为参考温度
EE_REFERENCE_T = 300.0


class ChannelKind(enum.Enum):
    LAUNCH = "launch"
    RECEIVE = "receive"
    RADIATIVE = "radiative"
    OPTICAL_PHONON = "optical_phonon"
    ACOUSTIC_PHONON = "acoustic_phonon"


@dataclass(frozen=True)
class CouplingChannel:
    rho: float              # 1/eV
    omega_coupling: float   # eV
    kind: ChannelKind


@dataclass(frozen=True)
class PhononBranch:
    energy_hw: float                 # eV
    base_width: float                # 1/ps
    spontaneous_floor: float = 0.0   # 1/ps

    def __post_init__(self):
        if not (math.isfinite(self.energy_hw) and self.energy_hw > 0):
            raise InvalidInput(f"声子能量必须为正: {self.energy_hw}")
        if self.base_width < 0 or self.spontaneous_floor < 0:
            raise InvalidInput("声子宽度不能为负")


@dataclass(frozen=True)
class RateLaws:
    gamma_L0: float
    gamma_R0: float
    gamma_P0: float
    beta_ee: float
    C: float
    E_a: float
    E_F_launch: float
    E_F_receive: float
    re_excite_base: float = 0.0
    re_excite_kappa: float = 0.0

    def __post_init__(self):
        for name in ("gamma_L0", "gamma_R0", "gamma_P0", "C",
                     "re_excite_base", "re_excite_kappa"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidInput(f"{name} 必须为非负有限值: {value}")

    @classmethod
    def from_channels(cls, channels, **kwargs):
        """由耦合通道（ρ, Ω）计算 Γ_L0、Γ_R0、Γ_P0，其余字段由 kwargs 给出。"""
        by_kind = {ch.kind: channel_width(ch) for ch in channels}
        return cls(
            gamma_L0=by_kind.get(ChannelKind.LAUNCH, 0.0),
            gamma_R0=by_kind.get(ChannelKind.RECEIVE, 0.0),
            gamma_P0=by_kind.get(ChannelKind.RADIATIVE, 0.0),
            **kwargs,
        )


@dataclass(frozen=True)
class ModelToggles:
    include_gel: bool = True
    include_ep: bool = True
    vary_ee: bool = True


FULL_MODEL = ModelToggles()


@dataclass(frozen=True)
class LevelWidths:
    gamma_L: object
    gamma_R: object
    gamma_P: object
    gamma_phO: object
    gamma_phA: object

    def __post_init__(self):
        for value in (self.gamma_L, self.gamma_R, self.gamma_P,
                      self.gamma_phO, self.gamma_phA):
            if np.any(np.asarray(value) < 0):
                raise InvalidInput("能级宽度不能为负")

    @property
    def X(self):
        return self.gamma_L + self.gamma_R + self.gamma_P + self.gamma_phO + self.gamma_phA


@dataclass(frozen=True)
class PathProfile:
    n_tr: float
    n_sc: float
    n_p: float
    n_re: float
    t_tr: float
    t_sc: float
    t_p: float
    t_re: float

    def __post_init__(self):
        for name, value in vars(self).items():
            if not math.isfinite(value) or value < 0:
                raise InvalidInput(f"路径参数 {name} 必须为非负有限值: {value}")

    @property
    def total_time(self):
        return (self.n_tr * self.t_tr + self.n_sc * self.t_sc
                + self.n_p * self.t_p + self.n_re * self.t_re)

    def weights(self):
        """返回 (w_sc, w_re, w_tr, w_p)。"""
        t_e = self.total_time
        if t_e <= 0:
            raise DegeneratePath("路径总时间为 0")
        re = self.n_re * self.t_re
        return (
            (self.n_sc * self.t_sc + re) / t_e,
            re / t_e,
            self.n_tr * self.t_tr / t_e,
            (self.n_p * self.t_p + re) / t_e,
        )


@dataclass(frozen=True)
class EffectiveWidths:
    gamma_L_eff: object
    gamma_R_eff: object
    gamma_P_eff: object
    gamma_phO_eff: object
    gamma_phA_eff: object
    w_sc: float
    w_re: float
    w_tr: float
    w_p: float

    @property
    def chi(self):
        return (self.gamma_L_eff + self.gamma_R_eff + self.gamma_P_eff
                + self.gamma_phO_eff + self.gamma_phA_eff)

    @property
    def phonon_eff(self):
        return self.gamma_phO_eff + self.gamma_phA_eff


@dataclass(frozen=True)
class Occupancy:
    sigma_aa: float
    sigma_bb: float


# ── 基本量 ──

def bose_occupation(hw, temperature, constants=SI):
    """玻色占据数 n̄ = 1/(exp(ħω/k_BT) − 1)，T = 0 时取解析极限 0。"""
    hw_arr = np.asarray(hw, dtype=float)
    t_arr = np.asarray(temperature, dtype=float)
    if not (np.all(np.isfinite(hw_arr)) and np.all(np.isfinite(t_arr))):
        raise InvalidInput(f"非有限输入: hw={hw}, T={temperature}")
    if np.any(hw_arr <= 0) or np.any(t_arr < 0):
        raise InvalidInput(f"要求 hw > 0 且 T ≥ 0: hw={hw}, T={temperature}")

    positive = t_arr > 0
    with np.errstate(over="ignore", divide="ignore"):
        x = hw_arr / (constants.k_B * np.where(positive, t_arr, 1.0))
        n = np.where(positive, 1.0 / np.expm1(x), 0.0)
    return float(n) if n.ndim == 0 else n


def channel_width(channel):
    """Γ = 2πρ|Ω|²。"""
    if not math.isfinite(channel.rho) or channel.rho < 0:
        raise InvalidInput(f"通道态密度不能为负: {channel.rho}")
    return 2.0 * math.pi * channel.rho * abs(channel.omega_coupling) ** 2


def activation_factor(mu, E_a, temperature, constants=SI):
    """exp(−max(E_a−μ, 0)/k_BT)；T = 0 时对束缚态取 0，对 μ ≥ E_a 取 1。"""
    gap = np.maximum(E_a - np.asarray(mu, dtype=float), 0.0)
    if temperature <= 0:
        return np.where(gap > 0, 0.0, 1.0)
    return np.exp(-gap / (constants.k_B * temperature))


def re_excitation_count(laws, optical, temperature, constants=SI):
    """Re̅(T) = Re̅₀ + κ·n̄(ω_O, T)。"""
    return laws.re_excite_base + laws.re_excite_kappa * bose_occupation(
        optical.energy_hw, temperature, constants)


# ── 温度律 ──

class RateLawStrategy(Protocol):
    def widths(self, laws, branches, mu, temperature, toggles, constants): ...


class DefaultRateLaws:
    """默认温度律：

    Γ_L = Γ_L0·max(1 + β_ee·T/300K, 0)
    Γ_R = Γ_R0·exp(−max(E_a−μ, 0)/k_BT)
    Γ_P 为常数
    Γ_phX = Γ_phX,0·n̄(ω_X, T) + spontaneous_floor
    """

    def launch(self, laws, temperature, toggles):
        if not toggles.vary_ee:
            return laws.gamma_L0
        return laws.gamma_L0 * max(1.0 + laws.beta_ee * temperature / EE_REFERENCE_T, 0.0)

    def receive(self, laws, mu, temperature, toggles, constants):
        # e-e 冻结时 Γ_R 保持 T=0 的取值
        t_eff = temperature if toggles.vary_ee else 0.0
        return laws.gamma_R0 * activation_factor(mu, laws.E_a, t_eff, constants)

    def phonon(self, branch, temperature, toggles, constants):
        if not toggles.include_ep:
            return 0.0
        return (branch.base_width * bose_occupation(branch.energy_hw, temperature, constants)
                + branch.spontaneous_floor)

    def widths(self, laws, branches, mu, temperature, toggles, constants):
        optical, acoustic = branches
        gamma_R = self.receive(laws, mu, temperature, toggles, constants)
        if np.ndim(gamma_R) == 0:
            gamma_R = float(gamma_R)
        return LevelWidths(
            gamma_L=self.launch(laws, temperature, toggles),
            gamma_R=gamma_R,
            gamma_P=laws.gamma_P0,
            gamma_phO=self.phonon(optical, temperature, toggles, constants),
            gamma_phA=self.phonon(acoustic, temperature, toggles, constants),
        )


DEFAULT_LAWS = DefaultRateLaws()


def evaluate_widths(laws, branches, mu, temperature, toggles=FULL_MODEL,
                    constants=SI, strategy=DEFAULT_LAWS):
    """按温度律计算 (μ, T) 处的各通道宽度。"""
    if not math.isfinite(temperature) or temperature < 0:
        raise InvalidInput(f"温度必须为非负有限值: {temperature}")
    return strategy.widths(laws, branches, mu, temperature, toggles, constants)


# ── 速率方程 ──

def occupancy_closed_form(widths, t):
    """方程组在 σ_aa(0)=1、σ_bb(0)=0 下的解析解。"""
    X = np.asarray(widths.X, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(X <= 0):
        raise DegenerateSystem("总宽度 X 为 0")
    if np.any(t < 0):
        raise InvalidInput(f"时间不能为负: {t}")
    sigma_bb = (np.asarray(widths.gamma_L, dtype=float) / X) * -np.expm1(-t * X)
    if sigma_bb.ndim == 0:
        sigma_bb = float(sigma_bb)
    return Occupancy(sigma_aa=1.0 - sigma_bb, sigma_bb=sigma_bb)


def occupancy_ode_oracle(widths, t, step):
    """定步长四阶 Runge–Kutta 直接积分速率方程，作为解析解的对照。

    步长超过 0.1/X 时精度约定失效，抛出 StepTooLarge。宽度、t、step 可为等长数组，
    此时所有样本按相同步数同时积分，每个样本的实际步长不超过其 step。
    """
    gl = np.asarray(widths.gamma_L, dtype=float)
    out = np.asarray(widths.gamma_R + widths.gamma_P + widths.gamma_phO + widths.gamma_phA,
                     dtype=float)
    t = np.asarray(t, dtype=float)
    step = np.asarray(step, dtype=float)
    if np.any(step <= 0) or np.any(t < 0):
        raise InvalidInput(f"要求 step > 0 且 t ≥ 0: step={step}, t={t}")
    X = gl + out
    limit = np.where(X > 0, 0.1 / np.where(X > 0, X, 1.0), np.inf)
    if np.any(step > limit):
        raise StepTooLarge(f"步长 {step} 超过 0.1/X = {limit}")

    def rhs(aa, bb):
        flow = gl * aa - out * bb
        return -flow, flow

    n_steps = max(1, math.ceil(float(np.max(t / step))))
    h = t / n_steps
    shape = np.broadcast(gl, out, t).shape
    aa, bb = np.ones(shape), np.zeros(shape)
    for _ in range(n_steps):
        k1a, k1b = rhs(aa, bb)
        k2a, k2b = rhs(aa + 0.5 * h * k1a, bb + 0.5 * h * k1b)
        k3a, k3b = rhs(aa + 0.5 * h * k2a, bb + 0.5 * h * k2b)
        k4a, k4b = rhs(aa + h * k3a, bb + h * k3b)
        aa = aa + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        bb = bb + h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
    if aa.ndim == 0:
        return Occupancy(sigma_aa=float(aa), sigma_bb=float(bb))
    return Occupancy(sigma_aa=aa, sigma_bb=bb)


def effective_widths(widths, path, C):
    """路径加权的带撇宽度与 𝒳。C·w_tr 项并入 Γ_R′。"""
    w_sc, w_re, w_tr, w_p = path.weights()
    return EffectiveWidths(
        gamma_L_eff=w_sc * widths.gamma_L,
        gamma_R_eff=w_re * widths.gamma_R + C * w_tr,
        gamma_P_eff=w_p * widths.gamma_P,
        gamma_phO_eff=w_sc * widths.gamma_phO,
        gamma_phA_eff=w_sc * widths.gamma_phA,
        w_sc=w_sc, w_re=w_re, w_tr=w_tr, w_p=w_p,
    )
