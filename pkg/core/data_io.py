"""CSV 读写：实验曲线导入、谱与观测量导出。

约定：UTF-8、LF 换行、首行为表头、数值以最短往返十进制表示，整文件原子写入。
"""

import csv
import enum
import hashlib
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.errors import DuplicateAbscissa, EmptyFile, InvalidInput, ParseError

logger = logging.getLogger(__name__)

SPECTRUM_HEADER = ("energy_eV", "intensity_au")
OBSERVABLES_HEADER = ("T_K", "peak_eV", "fwhm_eV", "intensity_au", "lifetime_ps")


class CurveKind(enum.Enum):
    PEAK = "peak"
    FWHM = "fwhm"
    INTENSITY = "intensity"
    LIFETIME = "lifetime"
    SPECTRUM = "spectrum"

    @property
    def column(self):
        """多列文件中对应的数值列名。"""
        return {
            CurveKind.PEAK: "peak_eV",
            CurveKind.FWHM: "fwhm_eV",
            CurveKind.INTENSITY: "intensity_au",
            CurveKind.LIFETIME: "lifetime_ps",
            CurveKind.SPECTRUM: "intensity_au",
        }[self]

    @property
    def observable(self):
        """SpectralObservables 中对应的字段名。"""
        return {
            CurveKind.PEAK: "peak_E",
            CurveKind.FWHM: "fwhm",
            CurveKind.INTENSITY: "integrated_intensity",
            CurveKind.LIFETIME: "decay_time",
        }.get(self)


@dataclass(frozen=True, eq=False)
class ObservedCurve:
    kind: CurveKind
    abscissa: np.ndarray   # K，谱曲线为 eV
    values: np.ndarray
    label: str = ""
    temperature: Optional[float] = None   # 仅谱曲线

    def __post_init__(self):
        x = np.asarray(self.abscissa, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise InvalidInput(f"曲线 {self.label} 横纵坐标长度不一致")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidInput(f"曲线 {self.label} 含非有限值")
        if np.any(np.diff(x) <= 0):
            raise InvalidInput(f"曲线 {self.label} 横坐标必须严格递增")
        if self.kind is CurveKind.SPECTRUM and self.temperature is None:
            raise InvalidInput("谱曲线需要给出温度")
        object.__setattr__(self, "abscissa", x)
        object.__setattr__(self, "values", y)

    def __len__(self):
        return self.abscissa.size


def format_number(value):
    return repr(float(value))


def _parse_number(text, line):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(line, f"无法解析数值 {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(line, f"非有限数值 {text!r}")
    return value


def read_numeric_csv(path):
    """严格读取带表头的数值 CSV，返回 (header, rows)。行号从表头 = 1 计。"""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyFile(f"文件为空: {path}") from None
        rows = []
        for line, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != len(header):
                raise ParseError(line, f"应有 {len(header)} 列，实际 {len(fields)} 列")
            rows.append([_parse_number(v.strip(), line) for v in fields])
    if not rows:
        raise EmptyFile(f"文件无数据行: {path}")
    return header, rows


def load_observed_csv(path, kind, temperature=None, label=None):
    """读取实验曲线。两列文件直接取第二列；多列文件按 kind 对应的列名取值。"""
    kind = CurveKind(kind)
    header, rows = read_numeric_csv(path)
    if len(header) < 2:
        raise ParseError(1, "至少需要两列")
    if len(header) == 2:
        col = 1
    elif kind.column in header:
        col = header.index(kind.column)
    else:
        raise ParseError(1, f"缺少列 {kind.column}")

    pairs = sorted((row[0], row[col]) for row in rows)
    for (a, _), (b, _) in zip(pairs, pairs[1:]):
        if a == b:
            raise DuplicateAbscissa(a)
    curve = ObservedCurve(
        kind=kind,
        abscissa=np.array([p[0] for p in pairs]),
        values=np.array([p[1] for p in pairs]),
        label=label or os.path.basename(path),
        temperature=temperature,
    )
    logger.info(f"读取了 {len(curve)} 个点 ({kind.value}, 从 {path})")
    return curve


# ── 写出 ──

def write_csv_atomic(path, header, rows):
    """先写临时文件再替换，保证目标文件要么完整要么不变。"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_number(v) for v in row])
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_spectrum_csv(path, spectrum):
    write_csv_atomic(path, SPECTRUM_HEADER,
                     zip(spectrum.energy_grid, spectrum.intensity))


def observables_rows(sweep):
    """成功记录的观测量行；失败温度不写入 CSV。"""
    return [
        (o.temperature, o.peak_E, o.fwhm, o.integrated_intensity, o.decay_time)
        for o in sweep.observables if o.ok
    ]


def write_observables_csv(path, sweep):
    write_csv_atomic(path, OBSERVABLES_HEADER, observables_rows(sweep))


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
