"""JSON 报告与控制台摘要。"""

import dataclasses
import enum
import json
import logging
import math

import numpy as np

from core.config_io import write_text_atomic

logger = logging.getLogger(__name__)


def to_jsonable(obj):
    """把 numpy 标量/数组、dataclass、枚举转换为 JSON 可写的结构；NaN 写为 null。"""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(dataclasses.asdict(obj))
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def write_report(path, report):
    text = json.dumps(to_jsonable(report), ensure_ascii=False, indent=2) + "\n"
    write_text_atomic(path, text)
    logger.info(f"报告已写入: {path}")


def print_checks(title, checks):
    """逐项打印检查结果，返回是否全部通过。"""
    print(f"== {title} ==")
    for c in checks:
        mark = "通过" if c.get("passed") else "未通过"
        status = c.get("status")
        suffix = f" ({status})" if status else ""
        print(f"  [{mark}] {c['check']}{suffix}")
    passed = all(c.get("passed") for c in checks)
    print(f"共 {len(checks)} 项，{'全部通过' if passed else '存在未通过项'}")
    return passed


def print_observables(sweep):
    print(f"{'T (K)':>8} {'峰位 (eV)':>12} {'FWHM (eV)':>12} {'强度':>12} {'寿命 (ps)':>12}")
    for o in sweep.observables:
        if o.ok:
            print(f"{o.temperature:8.1f} {o.peak_E:12.6f} {o.fwhm:12.6f} "
                  f"{o.integrated_intensity:12.5e} {o.decay_time:12.3f}")
        else:
            print(f"{o.temperature:8.1f}  计算失败: {o.error}")
