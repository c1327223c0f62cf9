"""CSV and summary emission.

Dialect: comma separator, '.' decimal point, mandatory header row, complex
values as paired _re/_im columns.  Bodies contain no timestamps, so a rerun
with the same config and seed is byte identical; provenance comments (seed,
config echo) go into '#' header lines above the column row.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

__all__ = ["format_value", "write_csv", "write_summary", "mixing_report_table"]


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Fraction):
        return repr(float(v))
    if v is None:
        return ""
    s = str(v)
    if "," in s or '"' in s:
        s = '"' + s.replace('"', '""') + '"'
    return s


def write_csv(
    path: Path,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    comments: Sequence[str] = (),
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def write_summary(path: Path, lines: Sequence[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for line in lines:
            fh.write(line + "\n")


def mixing_report_table(report) -> tuple[list[str], list[list]]:
    """Long-format rows for a mixing report: functional, M, n, value, residual."""
    columns = ["functional", "M", "n", "value_re", "value_im", "residual"]
    rows = []
    for m, n, value, residual in report.rows:
        rows.append([report.functional, m, n, value.real, value.imag, residual])
    return columns, rows
