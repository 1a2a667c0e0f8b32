"""JSON 配置的严格解析与规范化输出。

键名带单位后缀（_eV、_eV2、_K、_ps、_per_ps），错误信息中的字段名使用去掉后缀的
"节.字段" 形式，例如 MissingKey("rate_laws.E_a")。
"""

import hashlib
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass

from core.constants import SI, PhysicalConstants
from core.errors import ConfigError, InvalidInput, MissingKey, OutOfRange, UnitMismatch, UnknownKey
from core.fitting import FreeParameter, default_free_parameters
from core.rates import ModelToggles, PathProfile, PhononBranch, RateLaws
from core.spectrum import GaussianDos, GelMode, GelSettings, ModelConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# 约束
NONNEG = "nonneg"
POSITIVE = "positive"
ANY = "any"
BOOL = "bool"
INT16 = "int16"      # ≥ 16 的整数


@dataclass(frozen=True)
class Field:
    stem: str
    suffix: str = ""
    rule: str = ANY
    default: object = None    # None 表示必填

    @property
    def key(self):
        return f"{self.stem}_{self.suffix}" if self.suffix else self.stem


SCHEMA = {
    "dos": (
        Field("center_E0", "eV"),
        Field("variance_sigma2", "eV2", NONNEG),
        Field("density_Nl", "", POSITIVE, 1.0),
    ),
    "rate_laws": (
        Field("gamma_L0", "per_ps", NONNEG),
        Field("gamma_R0", "per_ps", NONNEG),
        Field("gamma_P0", "per_ps", NONNEG),
        Field("beta_ee"),
        Field("C", "per_ps", NONNEG),
        Field("E_a", "eV"),
        Field("E_F_launch", "eV"),
        Field("E_F_receive", "eV"),
        Field("re_excite_base", "", NONNEG, 0.0),
        Field("re_excite_kappa", "", NONNEG, 0.0),
    ),
    "phonons.optical": (
        Field("energy_hw", "eV", POSITIVE),
        Field("base_width", "per_ps", NONNEG),
        Field("spontaneous_floor", "per_ps", NONNEG, 0.0),
    ),
    "phonons.acoustic": (
        Field("energy_hw", "eV", POSITIVE),
        Field("base_width", "per_ps", NONNEG),
        Field("spontaneous_floor", "per_ps", NONNEG, 0.0),
    ),
    "path": (
        Field("n_tr", "", NONNEG),
        Field("n_sc", "", NONNEG),
        Field("n_p", "", NONNEG),
        Field("n_re", "", NONNEG),
        Field("t_tr", "ps", NONNEG),
        Field("t_sc", "ps", NONNEG),
        Field("t_p", "ps", NONNEG),
        Field("t_re", "ps", NONNEG),
    ),
    "gel": (
        Field("mode"),
        Field("t_lsc_fixed", "ps", POSITIVE),
        Field("alpha", "", POSITIVE, 1.0),
    ),
    "toggles": (
        Field("include_gel", "", BOOL, True),
        Field("include_ep", "", BOOL, True),
        Field("vary_ee", "", BOOL, True),
    ),
    "grid": (
        Field("mu_points", "", INT16, 2001),
        Field("mu_half_width_sigmas", "", POSITIVE, 5.0),
        Field("temperatures", "K", ANY, tuple(float(t) for t in range(10, 301, 10))),
    ),
    # 只作用于 limits 的 Bose 恒等式网格；模型计算始终使用 SI
    "constants": (
        Field("natural_units", "", BOOL, False),
    ),
}
OPTIONAL_SECTIONS = ("toggles", "grid", "constants", "fit")
TOP_LEVEL = ("schema_version", "dos", "rate_laws", "phonons", "path", "gel",
             "toggles", "grid", "constants", "fit")


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    temperatures: tuple
    natural_units: bool = False
    fit_parameters: tuple = ()
    fit_seed: int = 0

    @property
    def constants(self):
        return PhysicalConstants.natural() if self.natural_units else SI


# ── 解析 ──

def _check_value(path, entry, value):
    if entry.rule == BOOL:
        if not isinstance(value, bool):
            raise OutOfRange(path, "必须为 true/false")
        return value
    if entry.stem == "temperatures":
        if not isinstance(value, list) or not value:
            raise OutOfRange(path, "必须为非空数组")
        temps = tuple(_check_number(path, v) for v in value)
        if any(t < 0 for t in temps) or any(b <= a for a, b in zip(temps, temps[1:])):
            raise OutOfRange(path, "温度必须非负且严格递增")
        return temps
    if entry.stem == "mode":
        try:
            return GelMode(value)
        except ValueError:
            raise OutOfRange(path, f"未知模式 {value!r}") from None
    number = _check_number(path, value)
    if entry.rule == NONNEG and number < 0:
        raise OutOfRange(path, f"不能为负: {number}")
    if entry.rule == POSITIVE and not number > 0:
        raise OutOfRange(path, f"必须为正: {number}")
    if entry.rule == INT16:
        if number != int(number) or number < 16:
            raise OutOfRange(path, f"必须为不小于 16 的整数: {number}")
        return int(number)
    return number


def _check_number(path, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise OutOfRange(path, f"必须为数值: {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise OutOfRange(path, f"必须为有限值: {value}")
    return value


def _parse_section(name, data):
    if not isinstance(data, dict):
        raise ConfigError(f"{name} 必须为对象")
    entries = SCHEMA[name]
    by_key = {s.key: s for s in entries}
    for key in data:
        if key in by_key:
            continue
        stems = [s for s in entries if key == s.stem or key.startswith(s.stem + "_")]
        if stems:
            raise UnitMismatch(f"{name}.{stems[0].stem}", found=key)
        raise UnknownKey(f"{name}.{key}")

    values = {}
    for entry in entries:
        path = f"{name}.{entry.stem}"
        if entry.key not in data:
            if entry.default is None:
                raise MissingKey(path)
            values[entry.stem] = entry.default
            continue
        values[entry.stem] = _check_value(path, entry, data[entry.key])
    return values


def _parse_fit(data, model):
    if data is None:
        return default_free_parameters(model), 0
    if not isinstance(data, dict):
        raise ConfigError("fit 必须为对象")
    for key in data:
        if key not in ("free_parameters", "seed"):
            raise UnknownKey(f"fit.{key}")
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise OutOfRange("fit.seed", "必须为非负整数")
    if "free_parameters" not in data:
        return default_free_parameters(model), seed
    params = []
    for entry in data["free_parameters"]:
        try:
            params.append(FreeParameter(
                name=entry["name"],
                lower=_check_number("fit.free_parameters", entry["lower"]),
                upper=_check_number("fit.free_parameters", entry["upper"]),
                initial=_check_number("fit.free_parameters", entry["initial"]),
            ))
        except KeyError as e:
            raise MissingKey(f"fit.free_parameters.{e.args[0]}") from None
        except OutOfRange:
            raise
        except InvalidInput as e:
            raise OutOfRange("fit.free_parameters", str(e)) from None
    return tuple(params), seed


def parse_config(data):
    """把已解码的 JSON 对象解析为 RunConfig。"""
    if not isinstance(data, dict):
        raise ConfigError("配置顶层必须为对象")
    for key in data:
        if key not in TOP_LEVEL:
            raise UnknownKey(key)
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise OutOfRange("schema_version", f"不支持的版本 {version}")

    def section(name):
        node = data
        for part in name.split("."):
            if part not in node:
                if name in OPTIONAL_SECTIONS:
                    return _parse_section(name, {})
                raise MissingKey(name)
            node = node[part]
        return _parse_section(name, node)

    phonons = data.get("phonons")
    if isinstance(phonons, dict):
        for key in phonons:
            if key not in ("optical", "acoustic"):
                raise UnknownKey(f"phonons.{key}")

    dos = section("dos")
    laws = section("rate_laws")
    optical = section("phonons.optical")
    acoustic = section("phonons.acoustic")
    path = section("path")
    gel = section("gel")
    toggles = section("toggles")
    grid = section("grid")
    constants = section("constants")

    try:
        profile = PathProfile(**path)
    except InvalidInput as e:
        raise OutOfRange("path", str(e)) from None
    if profile.total_time <= 0:
        raise OutOfRange("path", "路径总时间必须为正")

    model = ModelConfig(
        laws=RateLaws(**laws),
        optical=PhononBranch(**optical),
        acoustic=PhononBranch(**acoustic),
        dos=GaussianDos(**dos),
        path=profile,
        gel=GelSettings(**gel),
        toggles=ModelToggles(**toggles),
        mu_points=grid["mu_points"],
        mu_half_width_sigmas=grid["mu_half_width_sigmas"],
    )
    fit_parameters, seed = _parse_fit(data.get("fit"), model)
    return RunConfig(
        model=model,
        temperatures=grid["temperatures"],
        natural_units=constants["natural_units"],
        fit_parameters=fit_parameters,
        fit_seed=seed,
    )


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"配置文件不存在: {path}") from None
    except ValueError as e:
        raise ConfigError(f"配置文件不是合法 JSON: {e}") from None
    run = parse_config(data)
    logger.info(f"已加载配置 {path}")
    return run


# ── 输出 ──

def _section_dict(entries, obj):
    out = {}
    for entry in entries:
        value = getattr(obj, entry.stem)
        if isinstance(value, GelMode):
            value = value.value
        elif isinstance(value, bool):
            pass
        elif isinstance(value, (int, float)):
            value = float(value)
        out[entry.key] = value
    return out


def config_to_dict(run):
    model = run.model
    grid = {
        "mu_points": int(model.mu_points),
        "mu_half_width_sigmas": float(model.mu_half_width_sigmas),
        "temperatures_K": [float(t) for t in run.temperatures],
    }
    return {
        "schema_version": SCHEMA_VERSION,
        "dos": _section_dict(SCHEMA["dos"], model.dos),
        "rate_laws": _section_dict(SCHEMA["rate_laws"], model.laws),
        "phonons": {
            "optical": _section_dict(SCHEMA["phonons.optical"], model.optical),
            "acoustic": _section_dict(SCHEMA["phonons.acoustic"], model.acoustic),
        },
        "path": _section_dict(SCHEMA["path"], model.path),
        "gel": _section_dict(SCHEMA["gel"], model.gel),
        "toggles": _section_dict(SCHEMA["toggles"], model.toggles),
        "grid": grid,
        "constants": {"natural_units": run.natural_units},
        "fit": {
            "free_parameters": [
                {"name": p.name, "lower": p.lower, "upper": p.upper, "initial": p.initial}
                for p in run.fit_parameters
            ],
            "seed": run.fit_seed,
        },
    }


def dump_config(run):
    """规范化 JSON 文本：indent=2、ensure_ascii=False、末尾换行。"""
    return json.dumps(config_to_dict(run), ensure_ascii=False, indent=2) + "\n"


def config_hash(run):
    return hashlib.sha256(dump_config(run).encode("utf-8")).hexdigest()


def write_text_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def save_config(path, run):
    write_text_atomic(path, dump_config(run))
    logger.info(f"配置已保存到 {path}")
