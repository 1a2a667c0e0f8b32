"""扫描结果的 Excel 报告。"""

import logging
import os
import tempfile

from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

logger = logging.getLogger(__name__)

OBSERVABLE_HEADERS = ["温度 (K)", "峰位 (eV)", "半高宽 (eV)", "积分强度 (a.u.)", "寿命 (ps)", "备注"]
SPECTRUM_HEADERS = ["能量 (eV)", "强度 (a.u.)"]

HEADER_FILL = PatternFill(start_color="4472C4", end_color="4472C4", fill_type="solid")
HEADER_FONT = Font(bold=True, color="FFFFFF", size=11)
RED_FILL = PatternFill(start_color="FFC7CE", end_color="FFC7CE", fill_type="solid")
YELLOW_FILL = PatternFill(start_color="FFEB9C", end_color="FFEB9C", fill_type="solid")
THIN_BORDER = Border(
    left=Side(style="thin"),
    right=Side(style="thin"),
    top=Side(style="thin"),
    bottom=Side(style="thin"),
)


def _write_header(ws, headers, widths):
    for col, header in enumerate(headers, start=1):
        cell = ws.cell(row=1, column=col, value=header)
        cell.fill = HEADER_FILL
        cell.font = HEADER_FONT
        cell.alignment = Alignment(horizontal="center")
        cell.border = THIN_BORDER
    for i, w in enumerate(widths, start=1):
        ws.column_dimensions[get_column_letter(i)].width = w
    # 冻结首行
    ws.freeze_panes = "A2"


def _write_observables(ws, sweep):
    _write_header(ws, OBSERVABLE_HEADERS, [10, 14, 14, 16, 14, 40])
    for row_idx, obs in enumerate(sweep.observables, start=2):
        if obs.ok:
            note = "峰值在网格边界" if obs.peak_at_boundary else ""
            row = [obs.temperature, obs.peak_E, obs.fwhm,
                   obs.integrated_intensity, obs.decay_time, note]
        else:
            row = [obs.temperature, None, None, None, None, f"计算失败: {obs.error}"]
        for col, val in enumerate(row, start=1):
            cell = ws.cell(row=row_idx, column=col, value=val)
            cell.border = THIN_BORDER
            cell.alignment = Alignment(vertical="top")

        # 失败标红，边界峰标黄
        fill = RED_FILL if not obs.ok else YELLOW_FILL if obs.peak_at_boundary else None
        if fill:
            for col in range(1, len(OBSERVABLE_HEADERS) + 1):
                ws.cell(row=row_idx, column=col).fill = fill


def _write_spectrum(ws, spectrum):
    _write_header(ws, SPECTRUM_HEADERS, [14, 16])
    for row_idx, (e, i) in enumerate(zip(spectrum.energy_grid, spectrum.intensity), start=2):
        ws.cell(row=row_idx, column=1, value=float(e))
        ws.cell(row=row_idx, column=2, value=float(i))


def write_sweep_workbook(sweeps, output_path):
    """生成扫描报告。

    Args:
        sweeps: {场景名: SweepResult}，每个场景一张观测量表
        output_path: 输出 .xlsx 路径
    """
    wb = Workbook()
    wb.remove(wb.active)

    for name, sweep in sweeps.items():
        ws = wb.create_sheet(title=f"观测量 {name}"[:31])
        _write_observables(ws, sweep)

    for name, sweep in sweeps.items():
        for spectrum in sweep.spectra:
            if spectrum is None:
                continue
            ws = wb.create_sheet(title=f"{name} {spectrum.temperature:g}K"[:31])
            _write_spectrum(ws, spectrum)

    directory = os.path.dirname(os.path.abspath(output_path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    os.close(fd)
    try:
        wb.save(tmp_path)
        os.replace(tmp_path, output_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    finally:
        wb.close()
    logger.info(f"Excel 报告已生成: {output_path}")
