"""Tabular scenario output with an embedded, reproducible metadata block."""

import io
from dataclasses import dataclass, field

import numpy as np


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


@dataclass
class PlotHint:
    x: str
    y: tuple
    group: str = None
    logx: bool = False
    logy: bool = False
    title: str = ""


@dataclass
class ResultTable:
    columns: list
    units: list
    rows: list
    metadata: list = field(default_factory=list)  # (key, value) pairs, in order
    plot: PlotHint = None

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def to_csv_text(self):
        buf = io.StringIO()
        for key, value in self.metadata:
            buf.write(f"# {key} = {value}\n")
        buf.write("# units: " + ",".join(self.units) + "\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(format_value(v) for v in row) + "\n")
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv_text())
