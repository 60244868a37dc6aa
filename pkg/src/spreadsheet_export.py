"""Excel (.xlsx) export of a run's sweep, trial rows and energy sections."""

import math
from typing import Any, Dict, List, Sequence

from openpyxl import Workbook
from openpyxl.styles import Font
from openpyxl.utils import get_column_letter


def _autosize(ws):
    for col in ws.columns:
        max_length = 0
        col_letter = get_column_letter(col[0].column)
        for cell in col:
            if cell.value is not None:
                max_length = max(max_length, len(str(cell.value)))
        ws.column_dimensions[col_letter].width = max(12, min(max_length + 2, 40))


def _sheet(wb: Workbook, title: str, header: List[str], rows: Sequence[Sequence[Any]], first: bool = False):
    ws = wb.active if first else wb.create_sheet()
    ws.title = title
    ws.append(header)
    for cell in ws[1]:
        cell.font = Font(bold=True)
    for row in rows:
        # NaN cells are left empty
        ws.append([None if isinstance(v, float) and math.isnan(v) else v for v in row])
    ws.freeze_panes = "A2"
    _autosize(ws)
    return ws


def export_run_xlsx(sweep, trial_rows: List[Dict[str, Any]],
                    energy_sections: List[Dict[str, Any]], path: str) -> None:
    """
    Write a workbook with Sweep, Trials and Energy sheets.

    Args:
        sweep: SweepCell records
        trial_rows: Rows as written to trials.csv
        energy_sections: Flat energy/area dicts from the report
        path: Destination .xlsx file
    """
    wb = Workbook()
    _sheet(wb, "Sweep", ["M", "mode", "metric", "mean_dB", "std_dB", "trials"],
           [[c.m, c.mode, c.metric, c.mean_db, c.std_db, c.trials] for c in sweep], first=True)

    if trial_rows:
        header = list(trial_rows[0])
        _sheet(wb, "Trials", header, [[row[name] for name in header] for row in trial_rows])

    if energy_sections:
        header = list(energy_sections[0])
        _sheet(wb, "Energy", header, [[section[name] for name in header] for section in energy_sections])

    wb.save(path)
