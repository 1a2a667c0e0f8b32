"""命令行入口。

子命令：simulate（单条光谱）、sweep（温度扫描）、ablate（消融扫描）、
fit（参数拟合）、limits（极限律检查）、selftest（内置自检）。

退出码：0 成功，1 参数错误，2 输入错误，3 数值失败，4 检查未通过。
"""

import argparse
import logging
import os
import sys

import numpy as np

from cli.report import print_checks, print_observables, write_report
from core.config_io import config_hash, load_config
from core.data_io import (
    CurveKind,
    load_observed_csv,
    sha256_file,
    write_observables_csv,
    write_spectrum_csv,
)
from core.errors import CheckFailed, DegenerateSystem, LseError, OutOfRange, UsageError
from core.fitting import MAX_EVALUATIONS, FitProblem, fit_problem, synthetic_recovery
from core.limits import (
    HuangRhys,
    RedshiftBoundInputs,
    arrhenius_check,
    bose_identity_grid,
    gel_hr_consistency,
    high_temp_intensity_check,
    huang_rhys_factor_of,
    huang_rhys_S,
    huang_rhys_variant,
    redshift_bound_check,
    single_level_peak_curve,
    varshni_fit,
    xi,
)
from core.rates import FULL_MODEL
from core.selftest import run_selftest
from core.spectrum import normalization_factor, steady_state_spectrum, time_resolved_spectrum
from core.sweep import (
    Scenario,
    SweepRunner,
    prepare_temperatures,
    single_level_variant,
    temperature_sweep,
)
from core.workbook import write_sweep_workbook

logger = logging.getLogger(__name__)

OBSERVABLES_FILE = "observables.csv"
# 极限律检查使用的温度窗口 (K)
REDSHIFT_WINDOW = 100.0
VARSHNI_WINDOW = (50.0, 350.0, 31)
HIGH_T_WINDOW = (200.0, 350.0, 16)


class ArgumentParser(argparse.ArgumentParser):
    """参数错误抛出 UsageError，而不是直接退出进程。"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ── 参数解析 ──

def parse_temperature_list(text):
    try:
        temps = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"无法解析温度列表: {text!r}") from None
    if not temps:
        raise UsageError("温度列表为空")
    return sorted(set(temps))


def sweep_temperatures(args, run):
    """--temps 优先，其次 --t-min/--t-max/--t-steps，最后取配置中的温度网格。"""
    if args.temps:
        return parse_temperature_list(args.temps)
    given = [args.t_min is not None, args.t_max is not None, args.t_steps is not None]
    if any(given):
        if not all(given):
            raise UsageError("--t-min、--t-max、--t-steps 必须同时给出")
        if args.t_steps < 1 or args.t_max < args.t_min:
            raise UsageError("要求 t_steps ≥ 1 且 t_max ≥ t_min")
        if args.t_steps == 1:
            return [args.t_min]
        return sorted(set(np.linspace(args.t_min, args.t_max, args.t_steps).tolist()))
    return list(run.temperatures)


def parse_data_arg(text):
    """解析 "kind=path" 或 "spectrum@T=path"。"""
    kind_part, sep, path = text.partition("=")
    if not sep or not path:
        raise UsageError(f"--data 格式应为 kind=path: {text!r}")
    kind_text, _, temp_text = kind_part.partition("@")
    try:
        kind = CurveKind(kind_text.strip())
    except ValueError:
        choices = ", ".join(k.value for k in CurveKind)
        raise UsageError(f"未知曲线类型 {kind_text!r}，可选: {choices}") from None
    temperature = None
    if kind is CurveKind.SPECTRUM:
        try:
            temperature = float(temp_text)
        except ValueError:
            raise UsageError("谱曲线需写成 spectrum@温度=path") from None
    return kind, temperature, path


def build_parser(default_config):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=default_config, help="JSON 配置文件路径")
    common.add_argument("--verbose", action="store_true", help="输出调试日志")
    common.add_argument("--quiet", action="store_true", help="只输出警告与错误")

    sweep_opts = argparse.ArgumentParser(add_help=False)
    sweep_opts.add_argument("--temps", help="逗号分隔的温度 (K)，如 10,100,200,300")
    sweep_opts.add_argument("--t-min", type=float)
    sweep_opts.add_argument("--t-max", type=float)
    sweep_opts.add_argument("--t-steps", type=int)
    sweep_opts.add_argument("--out", default="output", help="输出目录")
    sweep_opts.add_argument("--xlsx", help="同时生成 Excel 报告")
    sweep_opts.add_argument("--resume", action="store_true", help="从断点继续")

    parser = ArgumentParser(prog="lse", description="局域态系综发光模型")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="计算单条光谱")
    p.add_argument("--temp", type=float, required=True, help="温度 (K)")
    p.add_argument("--time", type=float, help="时间分辨快照时刻 (ps)，缺省为稳态谱")
    p.add_argument("--out", required=True, help="输出 CSV")

    sub.add_parser("sweep", parents=[common, sweep_opts], help="温度扫描")

    p = sub.add_parser("ablate", parents=[common, sweep_opts], help="消融扫描")
    p.add_argument("--scenario", required=True, choices=[s.value for s in Scenario])

    p = sub.add_parser("fit", parents=[common], help="拟合实验曲线")
    p.add_argument("--data", action="append", default=[],
                   help="kind=path，kind 为 peak/fwhm/intensity/lifetime，谱曲线写作 spectrum@T=path")
    p.add_argument("--out", required=True, help="JSON 报告路径")
    p.add_argument("--seed", type=int, help="随机种子，缺省取配置中的 fit.seed")
    p.add_argument("--max-evaluations", type=int, default=MAX_EVALUATIONS)
    p.add_argument("--synthetic", action="store_true", help="用配置生成合成数据并检验参数回收")
    p.add_argument("--noise", type=float, default=0.0, help="合成数据噪声，按各曲线极差的比例")

    p = sub.add_parser("limits", parents=[common], help="极限律检查")
    p.add_argument("--g", type=float, default=0.0, help="红移上界中的 g，取值 [0, 1]")
    p.add_argument("--te", type=float, default=50.0, help="红移上界中的 T_e (K)")
    p.add_argument("--out", help="JSON 报告路径")

    p = sub.add_parser("selftest", parents=[common], help="内置自检")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON 报告路径")
    return parser


def configure_verbosity(args):
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)


# ── 子命令 ──

def cmd_simulate(args, run):
    model = run.model
    temperature = prepare_temperatures([args.temp])[0]
    if args.time is None:
        # 与 sweep 相同的归一化：全模型在配置最低温度处峰值为 1
        reference_t = prepare_temperatures(run.temperatures[:1])[0]
        spectrum = steady_state_spectrum(temperature, model).scaled(
            normalization_factor(model, reference_t))
    else:
        if args.time < 0:
            raise OutOfRange("time", "时刻不能为负")
        spectrum = time_resolved_spectrum(temperature, args.time, model)
    write_spectrum_csv(args.out, spectrum)
    print(f"T={temperature:g} K，{len(spectrum)} 个能量点，已写入 {args.out}")
    return 0


def write_sweep_outputs(out_dir, sweep):
    os.makedirs(out_dir, exist_ok=True)
    write_observables_csv(os.path.join(out_dir, OBSERVABLES_FILE), sweep)
    for spectrum in sweep.spectra:
        if spectrum is None:
            continue
        name = f"spectrum_{spectrum.temperature:g}K.csv"
        write_spectrum_csv(os.path.join(out_dir, name), spectrum)


def run_sweep(args, run, scenario=None):
    temps = sweep_temperatures(args, run)
    model = run.model
    target = model if scenario is None else model.with_toggles(scenario.toggles)
    runner = SweepRunner(target, reference=model.with_toggles(FULL_MODEL),
                         checkpoint_dir=args.out)
    runner.on_progress = lambda done, total, obs: logger.info(
        f"进度 {done}/{total}: T={obs.temperature:g} K")
    sweep = runner.run(temps, resume=args.resume)

    write_sweep_outputs(args.out, sweep)
    if args.xlsx:
        name = scenario.value if scenario else "sweep"
        write_sweep_workbook({name: sweep}, args.xlsx)
    print_observables(sweep)
    if len(sweep.failed) == len(sweep.observables):
        raise DegenerateSystem("所有温度均计算失败")
    return 0


def cmd_sweep(args, run):
    return run_sweep(args, run)


def cmd_ablate(args, run):
    return run_sweep(args, run, Scenario(args.scenario))


def cmd_fit(args, run):
    seed = run.fit_seed if args.seed is None else args.seed
    if args.synthetic:
        report = synthetic_recovery(run.model, noise_sigma=args.noise, seed=seed,
                                    max_evaluations=args.max_evaluations)
        report["config_hash"] = config_hash(run)
        write_report(args.out, report)
        print_checks("合成数据回收", [{"check": "synthetic_recovery", **report}])
        return 0 if report["passed"] else CheckFailed.exit_code

    if not args.data:
        raise UsageError("至少需要一个 --data，或使用 --synthetic")
    curves, sources = [], []
    for text in args.data:
        kind, temperature, path = parse_data_arg(text)
        label = f"{kind.value}:{os.path.basename(path)}"
        curves.append(load_observed_csv(path, kind, temperature, label=label))
        sources.append({"kind": kind.value, "temperature_K": temperature,
                        "path": path, "sha256": sha256_file(path)})

    problem = FitProblem(run.model, run.fit_parameters, tuple(curves))
    result = fit_problem(problem, args.max_evaluations)
    if not result.converged:
        logger.warning(f"拟合在 {result.n_evaluations} 次调用内未收敛")

    fitted = result.best_parameters
    parameters = [
        {"name": p.name, "lower": p.lower, "upper": p.upper,
         "initial": p.initial, "fitted": fitted[p.name]}
        for p in run.fit_parameters
    ]
    report = {
        "config_hash": config_hash(run),
        "data": sources,
        "seed": seed,
        "max_evaluations": args.max_evaluations,
        "parameters": parameters,
        "objective_value": result.objective_value,
        "n_evaluations": result.n_evaluations,
        "converged": result.converged,
        "per_curve_residuals": result.per_curve_residuals,
    }
    write_report(args.out, report)

    print(f"{'参数':<24} {'初值':>14} {'拟合值':>14}")
    for p in parameters:
        print(f"{p['name']:<24} {p['initial']:14.6g} {p['fitted']:14.6g}")
    print(f"目标函数 {result.objective_value:.6e}，调用 {result.n_evaluations} 次，"
          f"{'已收敛' if result.converged else '未收敛'}")
    return 0


def cmd_limits(args, run):
    if not args.te > 0:
        raise OutOfRange("te", "T_e 必须为正")
    model = run.model
    temps = prepare_temperatures(run.temperatures)
    units = run.constants
    hw_range = (units.energy(0.001), units.energy(0.2))
    checks = [bose_identity_grid(hw_range=hw_range, constants=units)]

    hr_config = huang_rhys_variant(model)
    checks.append(gel_hr_consistency(hr_config))

    low = [t for t in temps if t <= REDSHIFT_WINDOW] or temps[:1]
    full_sweep = temperature_sweep(model, low, keep_spectra=False)
    single_sweep = temperature_sweep(single_level_variant(model), low, keep_spectra=False,
                                     reference=model.with_toggles(FULL_MODEL))
    inputs = RedshiftBoundInputs(xi=xi(model, args.te), g=args.g,
                                 sigma2=model.dos.variance_sigma2, T_e=args.te)
    checks.append(redshift_bound_check(full_sweep, single_sweep, inputs,
                                       window=REDSHIFT_WINDOW, constants=model.constants))

    checks.append(arrhenius_check(model))
    high = temperature_sweep(model.with_toggles(FULL_MODEL), np.linspace(*HIGH_T_WINDOW),
                             keep_spectra=False)
    checks.append(high_temp_intensity_check(high))

    hr = HuangRhys(f=huang_rhys_factor_of(hr_config), branch=hr_config.optical)
    hr_table = [{"T_K": t, "S": huang_rhys_S(hr, t, model.constants)} for t in temps]
    v_temps = np.linspace(*VARSHNI_WINDOW)
    v_fit = varshni_fit(v_temps, single_level_peak_curve(model, v_temps))

    report = {
        "config_hash": config_hash(run),
        "checks": checks,
        "huang_rhys": {"f": hr.f, "S0": hr.S0, "table": hr_table},
        "varshni": v_fit,
    }
    if args.out:
        write_report(args.out, report)
    passed = print_checks("极限律检查", checks)
    print(f"单能级 Varshni 拟合: E0={v_fit.E0_fit:.6f} eV γ={v_fit.gamma:.4e} eV/K "
          f"θ={v_fit.theta:.2f} K rms={v_fit.rms_residual:.2e} eV")
    return 0 if passed else CheckFailed.exit_code


def cmd_selftest(args, run):
    checks = run_selftest(run.model, seed=args.seed)
    if args.out:
        write_report(args.out, {"config_hash": config_hash(run), "seed": args.seed,
                                "checks": checks})
    passed = print_checks("自检", checks)
    return 0 if passed else CheckFailed.exit_code


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "ablate": cmd_ablate,
    "fit": cmd_fit,
    "limits": cmd_limits,
    "selftest": cmd_selftest,
}


def main(argv=None, default_config="config.json"):
    """解析参数并执行子命令，返回进程退出码。"""
    parser = build_parser(default_config)
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        logger.error(f"参数错误: {e}")
        return e.exit_code
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else 0
    configure_verbosity(args)

    try:
        run = load_config(args.config)
        return COMMANDS[args.command](args, run)
    except LseError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"文件读写失败: {e}")
        return 2
    except Exception:
        logger.exception("运行过程发生未预期的错误")
        return 3
