"""
Result tables written as CSV (machine) and Markdown (human)
"""

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Sequence, Union


def format_cell(value: Any, digits: int = 4) -> str:
    """Deterministic text for a cell: fixed-point floats, empty for None"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


@dataclass
class Table:
    name: str
    title: str
    columns: List[str]
    rows: List[List[Any]] = field(default_factory=list)
    digits: int = 4

    def add_row(self, row: Sequence[Any]) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"{self.name}: row has {len(row)} cells, expected {len(self.columns)}")
        self.rows.append(list(row))

    def text_rows(self) -> List[List[str]]:
        return [[format_cell(v, self.digits) for v in row] for row in self.rows]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.text_rows())
        return buffer.getvalue()

    def to_markdown(self) -> str:
        lines = [f"### {self.title}", "", "| " + " | ".join(self.columns) + " |",
                 "|" + "|".join("---" for _ in self.columns) + "|"]
        for row in self.text_rows():
            lines.append("| " + " | ".join(row) + " |")
        if not self.rows:
            lines.append("| " + " | ".join("" for _ in self.columns) + " |")
        return "\n".join(lines) + "\n"

    def write(self, directory: Union[str, Path]) -> List[Path]:
        """Write <name>.csv and <name>.md; returns both paths"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path = directory / f"{self.name}.csv"
        md_path = directory / f"{self.name}.md"
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        md_path.write_text(self.to_markdown(), encoding="utf-8")
        return [csv_path, md_path]


def read_csv_rows(path: Union[str, Path]) -> List[List[str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))
