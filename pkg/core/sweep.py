"""温度扫描调度器：线程池并行、断点续传、可停止；以及消融场景。"""

import enum
import hashlib
import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, replace
from datetime import datetime

import numpy as np

from core.analysis import SpectralObservables, observe_temperature
from core.errors import InvalidInput, LseError
from core.rates import FULL_MODEL, ModelToggles
from core.spectrum import Spectrum, SpectrumKind, normalization_factor

logger = logging.getLogger(__name__)

T_FLOOR = 0.1
THREADS_ENV = "LSE_THREADS"


class SweepState:
    """扫描状态枚举。"""
    IDLE = "idle"
    RUNNING = "running"
    STOPPING = "stopping"
    COMPLETED = "completed"
    ERROR = "error"


class Scenario(enum.Enum):
    FULL = "full"
    NO_GEL = "no-gel"
    NO_EP = "no-ep"
    FROZEN_EE = "frozen-ee"

    @property
    def toggles(self):
        return {
            Scenario.FULL: FULL_MODEL,
            Scenario.NO_GEL: ModelToggles(include_gel=False),
            Scenario.NO_EP: ModelToggles(include_ep=False),
            Scenario.FROZEN_EE: ModelToggles(vary_ee=False),
        }[self]


@dataclass(frozen=True)
class SweepResult:
    temperatures: tuple
    observables: tuple
    toggles: ModelToggles
    spectra: tuple = ()
    scale: float = 1.0

    def column(self, name):
        return np.array([getattr(o, name) for o in self.observables], dtype=float)

    @property
    def peaks(self):
        return self.column("peak_E")

    @property
    def failed(self):
        return [o for o in self.observables if not o.ok]

    def window(self, t_min, t_max):
        """[t_min, t_max] 内成功记录的子集。"""
        keep = [i for i, o in enumerate(self.observables)
                if o.ok and t_min <= o.temperature <= t_max]
        return replace(
            self,
            temperatures=tuple(self.temperatures[i] for i in keep),
            observables=tuple(self.observables[i] for i in keep),
            spectra=tuple(self.spectra[i] for i in keep) if self.spectra else (),
        )


def thread_count():
    """LSE_THREADS 指定的线程数，未设置时取 CPU 数（最多 8）。"""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
            if value > 0:
                return value
        except ValueError:
            pass
        logger.warning(f"{THREADS_ENV}={raw!r} 无效，使用默认线程数")
    return min(8, os.cpu_count() or 1)


def prepare_temperatures(temperatures):
    """校验温度序列；T=0 提升到 0.1 K。"""
    temps = [float(t) for t in temperatures]
    if not temps:
        raise InvalidInput("温度列表为空")
    for t in temps:
        if not np.isfinite(t) or t < 0:
            raise InvalidInput(f"温度必须为非负有限值: {t}")
    if any(b <= a for a, b in zip(temps, temps[1:])):
        raise InvalidInput("温度必须严格递增")
    clamped = []
    for t in temps:
        if t < T_FLOOR:
            logger.warning(f"T={t} K 低于下限，按 {T_FLOOR} K 计算")
            t = T_FLOOR
        clamped.append(t)
    if len(set(clamped)) != len(clamped):
        raise InvalidInput(f"提升到 {T_FLOOR} K 后温度重复")
    return clamped


def config_fingerprint(config, temperatures):
    text = repr((config, tuple(temperatures)))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class SweepRunner:
    """温度扫描调度器。

    每个温度独立计算，结果按温度下标装配，与完成顺序无关。
    单个温度失败只标记该记录，不中断扫描。
    """

    def __init__(self, config, reference=None, checkpoint_dir=None, threads=None,
                 keep_spectra=True):
        self.config = config
        # 归一化基准：全模型在最低（可算）温度处峰值为 1
        self.reference = reference if reference is not None else config.with_toggles(FULL_MODEL)
        self.checkpoint_dir = checkpoint_dir
        if checkpoint_dir:
            os.makedirs(checkpoint_dir, exist_ok=True)
        self.threads = threads or thread_count()
        self.keep_spectra = keep_spectra

        self.state = SweepState.IDLE
        self.result = None
        self._thread = None
        self._lock = threading.Lock()

        # 回调函数
        self.on_progress = None      # (done, total, observables)
        self.on_complete = None      # (SweepResult)
        self.on_error = None         # (error_message)
        self.on_state_change = None  # (new_state)
        self.on_log = None           # (message)

    def _set_state(self, state):
        self.state = state
        if self.on_state_change:
            self.on_state_change(state)

    def _log(self, msg):
        logger.info(msg)
        if self.on_log:
            self.on_log(msg)

    # ── 断点 ──

    def get_checkpoint_path(self, fingerprint):
        return os.path.join(self.checkpoint_dir, f"sweep_{fingerprint[:16]}_checkpoint.json")

    def load_checkpoint(self, fingerprint):
        """加载断点数据，指纹不一致或文件损坏时返回 None。"""
        if not self.checkpoint_dir:
            return None
        cp_path = self.get_checkpoint_path(fingerprint)
        if not os.path.exists(cp_path):
            return None
        try:
            with open(cp_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, ValueError) as e:
            logger.warning(f"加载checkpoint失败: {e}")
            return None
        if data.get("fingerprint") != fingerprint:
            logger.warning("checkpoint 与当前配置不一致，忽略")
            return None
        return data

    def save_checkpoint(self, fingerprint, records):
        if not self.checkpoint_dir:
            return
        data = {
            "fingerprint": fingerprint,
            "timestamp": datetime.now().isoformat(),
            "records": {str(i): rec for i, rec in records.items()},
        }
        cp_path = self.get_checkpoint_path(fingerprint)
        tmp_path = cp_path + ".tmp"
        with open(tmp_path, "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=False, indent=2)
        os.replace(tmp_path, cp_path)

    def delete_checkpoint(self, fingerprint):
        if not self.checkpoint_dir:
            return
        cp_path = self.get_checkpoint_path(fingerprint)
        if os.path.exists(cp_path):
            os.remove(cp_path)

    # ── 运行控制 ──

    def start(self, temperatures, resume=False):
        """在后台线程中启动扫描。"""
        if self.state == SweepState.RUNNING:
            return
        self._thread = threading.Thread(
            target=self._run_safely, args=(temperatures, resume), daemon=True)
        self._thread.start()

    def wait(self, timeout=None):
        if self._thread:
            self._thread.join(timeout)
        return self.result

    def stop(self):
        if self.state == SweepState.RUNNING:
            self._set_state(SweepState.STOPPING)
            self._log("正在停止扫描...")

    def _run_safely(self, temperatures, resume):
        try:
            self.run(temperatures, resume)
        except Exception:
            # run() 已记录异常并置 ERROR 状态
            pass

    def _evaluate(self, temperature, scale):
        try:
            obs, spectrum = observe_temperature(temperature, self.config, scale)
        except LseError as e:
            logger.warning(f"T={temperature} K 计算失败: {e}")
            return SpectralObservables.failed(temperature, str(e)), None
        return obs, spectrum if self.keep_spectra else None

    def _normalization(self, temps):
        """以第一个全模型谱可算的温度归一化；全部失败时缩放取 1。"""
        for t in temps:
            try:
                return normalization_factor(self.reference, t)
            except LseError as e:
                logger.warning(f"T={t} K 无法作为归一化基准: {e}")
        logger.warning("没有可用的归一化基准温度，缩放因子取 1")
        return 1.0

    def run(self, temperatures, resume=False):
        """同步执行扫描并返回 SweepResult。被 stop() 中断时返回 None。"""
        try:
            return self._run(temperatures, resume)
        except Exception as e:
            if isinstance(e, LseError):
                logger.error(f"扫描失败: {e}")
            else:
                logger.exception("扫描过程发生异常")
            self._set_state(SweepState.ERROR)
            if self.on_error:
                self.on_error(str(e))
            raise

    def _run(self, temperatures, resume):
        temps = prepare_temperatures(temperatures)
        self._set_state(SweepState.RUNNING)
        fingerprint = config_fingerprint(self.config, temps)
        scale = self._normalization(temps)

        records = {}
        if resume:
            cp = self.load_checkpoint(fingerprint)
            if cp:
                records = {int(i): rec for i, rec in cp["records"].items()}
                self._log(f"从断点恢复，已完成 {len(records)} 个温度")

        observables = [None] * len(temps)
        spectra = [None] * len(temps)
        for i, rec in records.items():
            observables[i], spectra[i] = _record_to_result(rec, temps[i])

        pending = [i for i in range(len(temps)) if observables[i] is None]
        total = len(temps)
        done = total - len(pending)
        self._log(f"开始扫描 {total} 个温度，线程数 {self.threads}")

        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            futures = {pool.submit(self._evaluate, temps[i], scale): i for i in pending}
            for future in as_completed(futures):
                i = futures[future]
                obs, spectrum = future.result()
                with self._lock:
                    observables[i] = obs
                    spectra[i] = spectrum
                    records[i] = _result_to_record(obs, spectrum)
                    done += 1
                    self.save_checkpoint(fingerprint, records)
                if self.on_progress:
                    self.on_progress(done, total, obs)
                if self.state == SweepState.STOPPING:
                    for f in futures:
                        f.cancel()
                    self._log(f"扫描已停止，已完成 {done}/{total}")
                    self._set_state(SweepState.IDLE)
                    return None

        self.result = SweepResult(
            temperatures=tuple(temps),
            observables=tuple(observables),
            toggles=self.config.toggles,
            spectra=tuple(spectra) if self.keep_spectra else (),
            scale=scale,
        )
        failed = len(self.result.failed)
        self._log(f"扫描完成，共 {total} 个温度，失败 {failed} 个")
        self.delete_checkpoint(fingerprint)
        self._set_state(SweepState.COMPLETED)
        if self.on_complete:
            self.on_complete(self.result)
        return self.result


def _result_to_record(obs, spectrum):
    rec = {"observables": asdict(obs)}
    if spectrum is not None:
        rec["spectrum"] = {
            "energy": spectrum.energy_grid.tolist(),
            "intensity": spectrum.intensity.tolist(),
        }
    return rec


def _record_to_result(rec, temperature):
    obs = SpectralObservables(**rec["observables"])
    spectrum = None
    if "spectrum" in rec:
        spectrum = Spectrum(np.array(rec["spectrum"]["energy"]),
                            np.array(rec["spectrum"]["intensity"]),
                            temperature, SpectrumKind.STEADY_STATE)
    return obs, spectrum


# ── 便捷入口 ──

def temperature_sweep(config, temperatures, **runner_options):
    return SweepRunner(config, **runner_options).run(temperatures)


def run_ablation(config, scenario, temperatures, **runner_options):
    """按消融场景切换开关后扫描；归一化仍以全模型为基准。"""
    scenario = Scenario(scenario)
    ablated = config.with_toggles(scenario.toggles)
    runner = SweepRunner(ablated, reference=config.with_toggles(FULL_MODEL), **runner_options)
    return runner.run(temperatures)


def single_level_variant(config):
    """σ² = 0 的单能级模型，其它参数不变。"""
    return replace(config, dos=replace(config.dos, variance_sigma2=0.0))


def localization_dip_depth(sweep, single_level_sweep, window=100.0):
    """低温局域化红移深度：max_{T ≤ window} [E_peak,单能级(T) − E_peak(T)]，不小于 0。"""
    reference = {o.temperature: o.peak_E for o in single_level_sweep.observables if o.ok}
    depth = 0.0
    for obs in sweep.observables:
        if obs.ok and obs.temperature <= window and obs.temperature in reference:
            depth = max(depth, reference[obs.temperature] - obs.peak_E)
    return depth
