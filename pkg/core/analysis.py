"""光谱观测量提取：峰位、半高宽、积分强度、衰减时间。"""

import logging
import math
from collections import namedtuple
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from core.errors import DegenerateSystem, EnergyFoldError, NoPeak, OutOfRange, TruncatedLine
from core.spectrum import resolve_mu_grid, channel_state, photon_energy, steady_state_spectrum

logger = logging.getLogger(__name__)

PeakEstimate = namedtuple("PeakEstimate", ["energy", "intensity", "at_boundary"])


@dataclass(frozen=True)
class SpectralObservables:
    temperature: float
    peak_E: float
    fwhm: float
    integrated_intensity: float
    decay_time: float
    peak_at_boundary: bool = False
    error: Optional[str] = None

    @property
    def ok(self):
        return self.error is None

    @classmethod
    def failed(cls, temperature, message):
        nan = float("nan")
        return cls(temperature, nan, nan, nan, nan, error=message)


def extract_peak(spectrum):
    """三点抛物线插值求峰位；最大值落在边界时不插值并置 at_boundary。"""
    energy = spectrum.energy_grid
    values = spectrum.intensity
    i = int(np.argmax(values))
    if not values[i] > 0:
        raise NoPeak(f"T={spectrum.temperature} K 的谱强度全为 0")

    if values.size == 1:
        return PeakEstimate(float(energy[0]), float(values[0]), False)
    if i == 0 or i == values.size - 1:
        return PeakEstimate(float(energy[i]), float(values[i]), True)

    x = energy[i - 1:i + 2] - energy[i]
    a, b, c = np.polyfit(x, values[i - 1:i + 2], 2)
    if a >= 0:
        return PeakEstimate(float(energy[i]), float(values[i]), False)
    offset = -b / (2.0 * a)
    return PeakEstimate(float(energy[i] + offset), float(c - b * b / (4.0 * a)), False)


def _crossing(e0, e1, y0, y1, level):
    return e0 + (level - y0) * (e1 - e0) / (y1 - y0)


def extract_fwhm(spectrum):
    """半高处最外侧两个线性插值交点之间的距离。单能级谱返回 0。"""
    peak = extract_peak(spectrum)
    energy = spectrum.energy_grid
    values = spectrum.intensity
    if values.size == 1:
        return 0.0

    half = 0.5 * peak.intensity
    above = np.nonzero(values >= half)[0]
    lo, hi = int(above[0]), int(above[-1])
    if lo == 0 or hi == values.size - 1:
        raise TruncatedLine(f"T={spectrum.temperature} K 的谱线一侧未降到半高")

    left = _crossing(energy[lo - 1], energy[lo], values[lo - 1], values[lo], half)
    right = _crossing(energy[hi], energy[hi + 1], values[hi], values[hi + 1], half)
    return float(right - left)


def integrated_intensity(spectrum):
    if len(spectrum) == 1:
        return float(spectrum.intensity[0])
    return float(trapezoid(spectrum.intensity, spectrum.energy_grid))


def _inverse_energy(energy, mu, target, temperature):
    if energy.size == 1:
        return float(mu[0])
    if not np.all(np.diff(energy) > 0):
        raise EnergyFoldError(f"T={temperature} K 时 μ→E 映射不单调")
    if not energy[0] <= target <= energy[-1]:
        raise OutOfRange("detect_at", f"{target} eV 超出谱支撑 [{energy[0]}, {energy[-1]}]")
    return float(np.interp(target, energy, mu))


def decay_time(temperature, config, detect_at=None):
    """探测能量处的寿命 1/𝒳(μ*, T)，μ* 由 μ→E 映射反解。

    detect_at 为 None 时在稳态谱峰位探测。
    """
    mu = resolve_mu_grid(config, None)
    energy = np.atleast_1d(photon_energy(mu, temperature, config))
    if detect_at is None:
        detect_at = extract_peak(steady_state_spectrum(temperature, config, mu)).energy
    return _lifetime(_inverse_energy(energy, mu, detect_at, temperature), temperature, config)


def _lifetime(mu_star, temperature, config):
    _, eff = channel_state(mu_star, temperature, config)
    chi = float(eff.chi)
    if chi <= 0:
        raise DegenerateSystem("有效速率 𝒳 为 0")
    return 1.0 / chi


def observe_temperature(temperature, config, scale=1.0):
    """单个温度的完整观测量，返回 (SpectralObservables, 已缩放的稳态谱)。"""
    mu = resolve_mu_grid(config, None)
    spectrum = steady_state_spectrum(temperature, config, mu).scaled(scale)
    peak = extract_peak(spectrum)
    energy = np.atleast_1d(photon_energy(mu, temperature, config))
    tau = _lifetime(_inverse_energy(energy, mu, peak.energy, temperature), temperature, config)

    observables = SpectralObservables(
        temperature=temperature,
        peak_E=peak.energy,
        fwhm=extract_fwhm(spectrum),
        integrated_intensity=integrated_intensity(spectrum),
        decay_time=tau,
        peak_at_boundary=peak.at_boundary,
    )
    if peak.at_boundary:
        logger.warning(f"T={temperature} K 峰值落在网格边界 {peak.energy:.6f} eV")
    if not math.isfinite(observables.decay_time):
        raise DegenerateSystem(f"T={temperature} K 寿命非有限")
    return observables, spectrum
