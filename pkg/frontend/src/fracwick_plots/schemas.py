"""CSV schemas of the experiment outputs and strict parsing.

Rows are kept as raw strings: the data-echo sidecar written next to every
figure must reproduce the input bytes' content exactly, so no numeric
round-trip is allowed to touch the stored values.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

SCHEMAS = {
    "convergence": ["K", "l1_error", "std_err", "n", "sigma_defect_phi"],
    "bound": ["p", "p1", "p2", "K", "s", "t", "lhs", "lhs_ci", "C", "rhs", "ratio", "pass"],
    "fp": ["testfn", "residual", "std_err", "bins", "pass"],
    "gronwall": ["t", "estimate", "envelope", "pass"],
}


class SchemaError(ValueError):
    """Input CSV does not match the declared figure kind."""


@dataclass(frozen=True)
class Table:
    kind: str
    config_hash: str
    columns: list[str]
    rows: list[list[str]]  # raw string cells, order preserved

    def column(self, name: str) -> list[str]:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def floats(self, name: str) -> list[float]:
        return [float(v) for v in self.column(name)]


def load_table(path: str | Path, kind: str) -> Table:
    if kind not in SCHEMAS:
        raise SchemaError(f"unknown figure kind {kind!r}; known: {sorted(SCHEMAS)}")
    lines = Path(path).read_text().splitlines()
    config_hash = ""
    if lines and lines[0].startswith("#"):
        comment = lines.pop(0)
        if "config_hash=" in comment:
            config_hash = comment.split("config_hash=", 1)[1].strip()
    if not lines:
        raise SchemaError("missing header row")
    columns = lines[0].split(",")
    expected = SCHEMAS[kind]
    missing = [c for c in expected if c not in columns]
    if missing:
        raise SchemaError(f"missing column(s) {missing} for kind {kind!r}")
    extra = [c for c in columns if c not in expected]
    if extra:
        raise SchemaError(f"unexpected column(s) {extra} for kind {kind!r}")
    if columns != expected:
        raise SchemaError(f"column order {columns} does not match schema {expected}")
    rows = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(columns):
            raise SchemaError(f"row {ln} has {len(cells)} cells, expected {len(columns)}")
        rows.append(cells)
    return Table(kind, config_hash, columns, rows)
