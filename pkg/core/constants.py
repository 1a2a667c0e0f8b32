"""物理常数。内部计算统一使用 (eV, K, ps)。"""

from dataclasses import dataclass

K_B_EV_PER_K = 8.617333262e-5
HBAR_EV_PS = 6.582119569e-4


@dataclass(frozen=True)
class PhysicalConstants:
    """物理常数集合。

    natural_units=True 时取 ħ = k_B = 1：能量以开尔文计（E/k_B），
    时间以 ħ/(k_B·1K) 计。仅用于极限律恒等式的检查，无量纲比 ħω/k_BT
    在两种模式下一致。
    """

    k_B: float = K_B_EV_PER_K
    hbar: float = HBAR_EV_PS
    natural_units: bool = False

    @classmethod
    def natural(cls):
        return cls(k_B=1.0, hbar=1.0, natural_units=True)

    def energy(self, value_ev):
        """把 eV 表示的能量换算到本单位制。"""
        if self.natural_units:
            return value_ev / K_B_EV_PER_K
        return value_ev

    def time(self, value_ps):
        """把 ps 表示的时间换算到本单位制。"""
        if self.natural_units:
            return value_ps * K_B_EV_PER_K / HBAR_EV_PS
        return value_ps

    def reduced_energy(self, hw, temperature):
        """ħω/(k_B·T)，hw 按本单位制给出。"""
        return hw / (self.k_B * temperature)


SI = PhysicalConstants()
