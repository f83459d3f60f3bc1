"""
Excel export service for the FairRec marketing-bias lab
Writes the consolidated comparison table as a one-sheet workbook
"""

from io import BytesIO

import openpyxl
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

TEXT_COLUMNS = ('model', 'dataset')
METRIC_FORMAT = '0.000'
MAX_COLUMN_WIDTH = 40


class ExcelExportService:
    """Service for exporting result tables to Excel"""

    @staticmethod
    def create_workbook(title):
        """New workbook whose only sheet is named `title`"""
        wb = openpyxl.Workbook()
        wb.active.title = title[:31]
        return wb

    @staticmethod
    def style_header_row(ws, row_num, columns):
        """Bold header on grey with a rule underneath"""
        font = Font(bold=True)
        fill = PatternFill(start_color="D9D9D9", end_color="D9D9D9", fill_type="solid")
        border = Border(bottom=Side(style="thin"))

        for col_num, header in enumerate(columns, 1):
            cell = ws.cell(row=row_num, column=col_num, value=header)
            cell.font = font
            cell.fill = fill
            cell.border = border
            cell.alignment = Alignment(horizontal="left" if header in TEXT_COLUMNS else "right")

    @staticmethod
    def auto_adjust_columns(ws):
        """Width of the longest rendered value, capped"""
        for column in ws.columns:
            lengths = [len(str(cell.value)) for cell in column if cell.value is not None]
            width = max(lengths, default=8) + 2
            ws.column_dimensions[get_column_letter(column[0].column)].width = min(width, MAX_COLUMN_WIDTH)

    @staticmethod
    def format_number(value):
        """Numeric text ('0.123') becomes a float; '<0.001' and labels stay text"""
        if value is None or value == '':
            return None
        try:
            return float(value)
        except (ValueError, TypeError):
            return value

    @staticmethod
    def set_metric(cell, value):
        """Numbers get three decimals; text such as '<0.001' is right-aligned as-is"""
        cell.value = ExcelExportService.format_number(value)
        if isinstance(cell.value, float):
            cell.number_format = METRIC_FORMAT
        cell.alignment = Alignment(horizontal="right")
        return cell

    @staticmethod
    def export_comparison_table(rows, columns, title="Comparison"):
        """Workbook bytes: header row, then one row per model report"""
        wb = ExcelExportService.create_workbook(title)
        ws = wb.active

        ExcelExportService.style_header_row(ws, 1, columns)
        for row_num, row in enumerate(rows, 2):
            for col_num, column in enumerate(columns, 1):
                cell = ws.cell(row=row_num, column=col_num)
                if column in TEXT_COLUMNS:
                    cell.value = row.get(column)
                else:
                    ExcelExportService.set_metric(cell, row.get(column))

        ws.freeze_panes = 'B2'
        ExcelExportService.auto_adjust_columns(ws)

        output = BytesIO()
        wb.save(output)
        output.seek(0)
        return output
