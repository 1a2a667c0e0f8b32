"""无导数参数拟合：有界 Nelder–Mead、多曲线目标函数与合成数据回收检验。"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from core.analysis import observe_temperature
from core.data_io import CurveKind, ObservedCurve
from core.errors import Diverged, InvalidInput, InvalidStart, LseError
from core.spectrum import steady_state_spectrum

logger = logging.getLogger(__name__)

REFLECT = 1.0
EXPAND = 2.0
CONTRACT = 0.5
SHRINK = 0.5
MAX_EVALUATIONS = 20000

# 合成回收检验中扰动的四个参数
RECOVERY_PARAMETERS = (
    "laws.gamma_R0",
    "laws.beta_ee",
    "dos.variance_sigma2",
    "optical.base_width",
)
FIT_SECTIONS = ("laws", "optical", "acoustic", "dos", "path", "gel")
LOG_SPACE_RANGE = 100.0
NOISY_XTOL = 1e-4
NOISY_FTOL = 1e-8


@dataclass(frozen=True)
class FitResult:
    x: tuple
    objective_value: float
    n_evaluations: int
    converged: bool
    names: tuple = ()
    per_curve_residuals: dict = field(default_factory=dict)
    best_history: tuple = ()

    @property
    def best_parameters(self):
        if self.names:
            return dict(zip(self.names, self.x))
        return tuple(self.x)


# ── Nelder–Mead ──

def nelder_mead_minimize(objective, start, bounds=None, max_evaluations=MAX_EVALUATIONS,
                         xtol=1e-10, ftol=1e-12):
    """有界 Nelder–Mead 最小化，越界坐标裁剪回边界。

    Args:
        objective: 接收参数向量、返回标量的函数；非有限值视为 +inf
        start: 初始点，需在边界内
        bounds: [(lower, upper), ...]，None 表示无界
        max_evaluations: 目标函数最大调用次数
        xtol: 单纯形直径相对容差（相对 max(|x|, 1)）
        ftol: 单纯形函数值极差容差

    Returns:
        FitResult，x 为最优点；两个容差同时满足时 converged 为 True
    """
    x0 = np.asarray(start, dtype=float).ravel()
    dim = x0.size
    if dim < 1:
        raise InvalidInput("参数维数至少为 1")
    if bounds is None:
        bounds = [(-math.inf, math.inf)] * dim
    lower = np.array([b[0] for b in bounds], dtype=float)
    upper = np.array([b[1] for b in bounds], dtype=float)
    if lower.size != dim or np.any(lower >= upper):
        raise InvalidInput("边界必须满足 lower < upper 且与参数维数一致")
    if np.any(x0 < lower) or np.any(x0 > upper):
        raise InvalidInput(f"初始点 {x0.tolist()} 不在边界内")

    n_eval = 0

    def clip(x):
        return np.minimum(np.maximum(x, lower), upper)

    def evaluate(x):
        nonlocal n_eval
        n_eval += 1
        value = objective(x.copy())
        return float(value) if np.isfinite(value) else math.inf

    f0 = evaluate(x0)
    if not math.isfinite(f0):
        raise InvalidStart(f"初始点目标函数非有限: {x0.tolist()}")

    simplex = [x0]
    for i in range(dim):
        step = 0.05 * x0[i] if x0[i] != 0 else 0.00025
        vertex = x0.copy()
        vertex[i] += step
        vertex = clip(vertex)
        if vertex[i] == x0[i]:
            vertex[i] = x0[i] - step
            vertex = clip(vertex)
        simplex.append(vertex)
    sim = np.array(simplex)
    fvals = np.array([f0] + [evaluate(v) for v in sim[1:]])

    history = []
    converged = False
    first = True
    while True:
        order = np.argsort(fvals, kind="stable")
        sim, fvals = sim[order], fvals[order]
        if not np.any(np.isfinite(fvals)):
            raise Diverged("单纯形所有顶点目标函数均非有限")
        history.append(float(fvals[0]))

        spread = fvals[-1] - fvals[0]
        if first and spread == 0:
            converged = True
            break
        first = False
        diameter = float(np.max(np.abs(sim[1:] - sim[0])))
        scale = max(float(np.max(np.abs(sim[0]))), 1.0)
        if diameter <= xtol * scale and spread <= ftol:
            converged = True
            break
        if n_eval >= max_evaluations:
            break

        centroid = sim[:-1].mean(axis=0)
        worst = sim[-1]
        xr = clip(centroid + REFLECT * (centroid - worst))
        fr = evaluate(xr)
        if fr < fvals[0]:
            xe = clip(centroid + EXPAND * (centroid - worst))
            fe = evaluate(xe)
            if fe < fr:
                sim[-1], fvals[-1] = xe, fe
            else:
                sim[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            sim[-1], fvals[-1] = xr, fr
            continue

        if fr < fvals[-1]:
            xc = clip(centroid + CONTRACT * (xr - centroid))
            fc = evaluate(xc)
            if fc <= fr:
                sim[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = clip(centroid + CONTRACT * (worst - centroid))
            fc = evaluate(xc)
            if fc < fvals[-1]:
                sim[-1], fvals[-1] = xc, fc
                continue

        # 收缩
        for i in range(1, dim + 1):
            sim[i] = clip(sim[0] + SHRINK * (sim[i] - sim[0]))
            fvals[i] = evaluate(sim[i])

    if not converged:
        logger.warning(f"Nelder–Mead 达到最大调用次数 {max_evaluations} 仍未收敛")
    return FitResult(
        x=tuple(float(v) for v in sim[0]),
        objective_value=float(fvals[0]),
        n_evaluations=n_eval,
        converged=converged,
        best_history=tuple(history),
    )


# ── 拟合问题 ──

@dataclass(frozen=True)
class FreeParameter:
    name: str      # 如 "laws.gamma_R0"
    lower: float
    upper: float
    initial: float

    def __post_init__(self):
        section, _, attr = self.name.partition(".")
        if section not in FIT_SECTIONS or not attr:
            raise InvalidInput(f"无法识别的拟合参数: {self.name}")
        if not self.lower < self.upper:
            raise InvalidInput(f"{self.name}: 要求 lower < upper")
        if not self.lower <= self.initial <= self.upper:
            raise InvalidInput(f"{self.name}: 初值 {self.initial} 不在边界内")


@dataclass(frozen=True)
class FitProblem:
    config: object
    free_parameters: tuple
    targets: tuple
    weights: tuple = ()
    toggles: object = None

    def __post_init__(self):
        if not self.targets:
            raise InvalidInput("至少需要一条目标曲线")
        if not any(len(t) >= 3 for t in self.targets):
            raise InvalidInput("至少一条目标曲线需要 3 个以上的点")
        weights = self.weights or (1.0,) * len(self.targets)
        if len(weights) != len(self.targets) or any(w < 0 for w in weights):
            raise InvalidInput("曲线权重必须非负且与曲线数一致")
        object.__setattr__(self, "weights", tuple(weights))
        names = [p.name for p in self.free_parameters]
        if len(set(names)) != len(names):
            raise InvalidInput("拟合参数重复")

    @property
    def names(self):
        return tuple(p.name for p in self.free_parameters)

    @property
    def start(self):
        return [p.initial for p in self.free_parameters]

    @property
    def bounds(self):
        return [(p.lower, p.upper) for p in self.free_parameters]

    def model_config(self):
        if self.toggles is None:
            return self.config
        return self.config.with_toggles(self.toggles)


def get_parameter(config, name):
    section, _, attr = name.partition(".")
    return getattr(getattr(config, section), attr)


def apply_parameters(config, values):
    """把 {"section.field": value} 写回配置，返回新配置。"""
    updates = {}
    for name, value in values.items():
        section, _, attr = name.partition(".")
        if section not in FIT_SECTIONS:
            raise InvalidInput(f"无法识别的拟合参数: {name}")
        target = updates.get(section, getattr(config, section))
        if not hasattr(target, attr):
            raise InvalidInput(f"无法识别的拟合参数: {name}")
        updates[section] = replace(target, **{attr: float(value)})
    return replace(config, **updates)


def scale_match(model, observed):
    """argmin_c Σ(c·model − observed)² 的闭式解。"""
    model = np.asarray(model, dtype=float)
    observed = np.asarray(observed, dtype=float)
    denom = float(np.dot(model, model))
    if denom == 0:
        return 0.0
    return float(np.dot(model, observed)) / denom


def _curve_range(values):
    span = float(values.max() - values.min())
    if span > 0:
        return span
    return max(float(np.max(np.abs(values))), 1.0)


def _log_space(values):
    """强度跨越两个数量级以上时在对数空间比较。"""
    return bool(np.all(values > 0) and values.max() / values.min() > LOG_SPACE_RANGE)


def curve_residual(curve, model):
    """单条曲线归一化后的均方残差。强度类曲线先做最优缩放。"""
    obs = curve.values
    model = np.asarray(model, dtype=float)
    if not np.all(np.isfinite(model)):
        return math.inf

    if curve.kind in (CurveKind.INTENSITY, CurveKind.SPECTRUM):
        if curve.kind is CurveKind.INTENSITY and _log_space(obs):
            if np.any(model <= 0):
                return math.inf
            log_obs, log_model = np.log(obs), np.log(model)
            offset = float(np.mean(log_obs - log_model))
            r = (log_model + offset - log_obs) / _curve_range(log_obs)
        else:
            r = (scale_match(model, obs) * model - obs) / _curve_range(obs)
    else:
        r = (model - obs) / _curve_range(obs)
    return float(np.mean(r * r))


def model_curves(problem, config):
    """在给定配置下计算每条目标曲线对应的模型值。"""
    temps = sorted({float(t) for c in problem.targets if c.kind is not CurveKind.SPECTRUM
                    for t in c.abscissa})
    observed = {t: observe_temperature(t, config)[0] for t in temps}

    curves = []
    for curve in problem.targets:
        if curve.kind is CurveKind.SPECTRUM:
            spectrum = steady_state_spectrum(curve.temperature, config)
            curves.append(np.interp(curve.abscissa, spectrum.energy_grid,
                                    spectrum.intensity, left=0.0, right=0.0))
        else:
            attr = curve.kind.observable
            curves.append(np.array([getattr(observed[float(t)], attr) for t in curve.abscissa]))
    return curves


def evaluate_curves(problem, x):
    """返回每条曲线的残差；模型计算失败时全部为 +inf。"""
    try:
        config = apply_parameters(problem.model_config(), dict(zip(problem.names, x)))
        curves = model_curves(problem, config)
    except LseError as e:
        logger.debug(f"参数点 {list(x)} 模型计算失败: {e}")
        return [math.inf] * len(problem.targets)
    return [curve_residual(c, m) for c, m in zip(problem.targets, curves)]


def build_objective(problem):
    def objective(x):
        residuals = evaluate_curves(problem, x)
        return sum(w * r for w, r in zip(problem.weights, residuals) if w > 0)
    return objective


def _residual_table(problem, x):
    return {
        (c.label or f"{c.kind.value}_{i}"): r
        for i, (c, r) in enumerate(zip(problem.targets, evaluate_curves(problem, x)))
    }


def fit_problem(problem, max_evaluations=MAX_EVALUATIONS, restarts=2, xtol=1e-10, ftol=1e-12):
    """求解拟合问题。收敛后从最优点重启，直到目标函数不再下降。"""
    objective = build_objective(problem)
    if not problem.free_parameters:
        value = objective([])
        return FitResult(x=(), objective_value=value, n_evaluations=1, converged=True,
                         per_curve_residuals=_residual_table(problem, []))

    result = nelder_mead_minimize(objective, problem.start, problem.bounds, max_evaluations,
                                 xtol, ftol)
    total = result.n_evaluations
    history = list(result.best_history)
    for _ in range(restarts):
        budget = max_evaluations - total
        if budget <= 0:
            break
        again = nelder_mead_minimize(objective, result.x, problem.bounds, budget, xtol, ftol)
        total += again.n_evaluations
        history.extend(min(h, result.objective_value) for h in again.best_history)
        improved = again.objective_value < result.objective_value
        if improved:
            result = again
        if not improved or result.objective_value == 0:
            break

    logger.info(f"拟合结束: 目标函数 {result.objective_value:.6e}，调用 {total} 次")
    return FitResult(
        x=result.x,
        objective_value=result.objective_value,
        n_evaluations=total,
        converged=result.converged,
        names=problem.names,
        per_curve_residuals=_residual_table(problem, result.x),
        best_history=tuple(history),
    )


def default_free_parameters(config, names=RECOVERY_PARAMETERS, spread=0.5):
    """以当前值为初值、±spread 为边界的自由参数。"""
    params = []
    for name in names:
        value = get_parameter(config, name)
        lo, hi = sorted((value * (1 - spread), value * (1 + spread)))
        if lo == hi:
            lo, hi = value - spread, value + spread
        params.append(FreeParameter(name, lo, hi, value))
    return tuple(params)


# ── 合成数据回收 ──

def _add_noise(kind, clean, noise_sigma, rng):
    z = rng.standard_normal(clean.size)
    if kind is CurveKind.INTENSITY and _log_space(clean):
        log_clean = np.log(clean)
        return np.exp(log_clean + noise_sigma * _curve_range(log_clean) * z)
    return clean + noise_sigma * _curve_range(clean) * z


def synthetic_recovery(config, noise_sigma=0.0, seed=0, temperatures=None,
                       parameters=RECOVERY_PARAMETERS, perturbation=0.3, mu_points=801,
                       max_evaluations=MAX_EVALUATIONS):
    """用已知配置生成观测量，加高斯噪声，扰动参数后重新拟合并报告回收误差。

    噪声标准差为 noise_sigma 乘以曲线在其拟合空间中的极差，与 curve_residual
    的归一化一致；在对数空间拟合的强度曲线按对数极差加乘性噪声。
    """
    if noise_sigma < 0:
        raise InvalidInput(f"noise_sigma 不能为负: {noise_sigma}")
    truth = replace(config, mu_points=mu_points)
    if temperatures is None:
        temperatures = np.linspace(10.0, 300.0, 12)
    temps = np.asarray(temperatures, dtype=float)
    rng = np.random.default_rng(seed)

    observations = [observe_temperature(float(t), truth)[0] for t in temps]
    targets = []
    for kind in (CurveKind.PEAK, CurveKind.FWHM, CurveKind.INTENSITY, CurveKind.LIFETIME):
        clean = np.array([getattr(o, kind.observable) for o in observations])
        noisy = _add_noise(kind, clean, noise_sigma, rng)
        targets.append(ObservedCurve(kind, temps, noisy, label=kind.value))

    true_values = {name: get_parameter(truth, name) for name in parameters}
    signs = rng.choice([-1.0, 1.0], size=len(parameters))
    start = {name: true_values[name] * (1.0 + s * perturbation)
             for name, s in zip(parameters, signs)}
    free = []
    for name in parameters:
        lo, hi = sorted((true_values[name] * 0.5, true_values[name] * 1.5))
        free.append(FreeParameter(name, lo, hi, start[name]))

    problem = FitProblem(apply_parameters(truth, start), tuple(free), tuple(targets))
    if noise_sigma > 0:
        # 有噪声时收敛到噪声尺度即可
        result = fit_problem(problem, max_evaluations, xtol=NOISY_XTOL, ftol=NOISY_FTOL)
    else:
        result = fit_problem(problem, max_evaluations)
    fitted = result.best_parameters if parameters else {}
    errors = {name: abs(fitted[name] - true_values[name]) / abs(true_values[name])
              for name in parameters}
    tolerance = 1e-4 if noise_sigma == 0 else 0.05
    worst = max(errors.values(), default=0.0)
    logger.info(f"合成回收 seed={seed} noise={noise_sigma}: 最大相对误差 {worst:.3e}")
    return {
        "seed": seed,
        "noise_sigma": noise_sigma,
        "truth": true_values,
        "start": start,
        "fitted": fitted,
        "relative_errors": errors,
        "objective_value": result.objective_value,
        "n_evaluations": result.n_evaluations,
        "converged": result.converged,
        "tolerance": tolerance,
        "passed": worst <= tolerance,
    }
