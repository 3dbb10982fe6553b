"""CSV ingestion and output, plus run manifests.

CSV is the single interchange format. Input tables are row-per-sample and get
transposed to the internal column-per-sample layout on load. Every output
file starts with '#'-prefixed header lines naming the producing command and
version; numeric cells are written with shortest round-trip precision so
downstream consumers reproduce internal values exactly. Manifests are plain
'key = value' text.
"""
from __future__ import annotations

import csv
import datetime
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    NonNumericCellError,
    ParseError,
    RaggedRowsError,
    UnknownLabelColumnError,
)
from .evaluation import LabeledDataset
from .types import DataMatrix


def _fmt(value: float) -> str:
    return repr(float(value))


def ingest_csv(
    path: str | Path,
    has_header: bool = False,
    label_column: str | int | None = None,
) -> DataMatrix | LabeledDataset:
    """Load a row-per-sample CSV as a DataMatrix, or a LabeledDataset when a
    label column (header name or 0-based index) is given.

    Label values are mapped to dense integer codes in first-appearance order.
    '#'-prefixed lines and blank lines are skipped.
    """
    path = Path(path)
    with open(path, newline="") as handle:
        rows = []
        line_numbers = []
        for lineno, row in enumerate(csv.reader(handle), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                continue
            rows.append([cell.strip() for cell in row])
            line_numbers.append(lineno)
    if not rows:
        raise ParseError("no data rows found", path=str(path))

    header: list[str] | None = None
    if has_header:
        header = rows.pop(0)
        line_numbers.pop(0)
        if not rows:
            raise ParseError("no data rows after the header", path=str(path))

    width = len(rows[0])
    for row, lineno in zip(rows, line_numbers):
        if len(row) != width:
            raise RaggedRowsError(
                f"expected {width} fields, found {len(row)}", path=str(path), line=lineno
            )

    label_index: int | None = None
    if label_column is not None:
        if isinstance(label_column, str) and not label_column.lstrip("+-").isdigit():
            if header is None or label_column not in header:
                raise UnknownLabelColumnError(
                    f"label column {label_column!r} not found"
                    + ("" if header else " (file has no header)"),
                    path=str(path),
                )
            label_index = header.index(label_column)
        else:
            label_index = int(label_column)
            if not -width <= label_index < width:
                raise UnknownLabelColumnError(
                    f"label column index {label_index} out of range for {width} columns",
                    path=str(path),
                )
            label_index %= width
        if width < 2:
            raise ParseError("a labeled table needs at least one feature column",
                             path=str(path))

    labels: list[int] = []
    label_codes: dict[str, int] = {}
    data = np.empty((len(rows), width - (label_index is not None)), dtype=np.float64)
    for i, (row, lineno) in enumerate(zip(rows, line_numbers)):
        j = 0
        for col, cell in enumerate(row):
            if col == label_index:
                labels.append(label_codes.setdefault(cell, len(label_codes)))
                continue
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise NonNumericCellError(
                    f"cannot parse {cell!r} as a number",
                    path=str(path), line=lineno, column=col + 1,
                ) from None
            j += 1

    matrix = DataMatrix(data.T)  # row-per-sample file to column-per-sample layout
    if label_index is None:
        return matrix
    return LabeledDataset(matrix, np.asarray(labels))


def _header_lines(command: str, extra: list[str] | None = None) -> list[str]:
    lines = [f"# produced by: ewca {command} (version {__version__})"]
    if extra:
        lines.extend(f"# {text}" for text in extra)
    return lines


def write_matrix_csv(
    path: str | Path,
    matrix: np.ndarray,
    command: str,
    extra_header: list[str] | None = None,
) -> None:
    """Write a matrix with full round-trip precision, one CSV row per matrix row."""
    arr = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w", newline="") as handle:
        for line in _header_lines(command, extra_header):
            handle.write(line + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        for row in arr:
            writer.writerow([_fmt(v) for v in row])


def read_matrix_csv(path: str | Path) -> np.ndarray:
    """Read a matrix written by write_matrix_csv (comment lines skipped)."""
    loaded = ingest_csv(path, has_header=False, label_column=None)
    return loaded.values.T  # undo the sample-layout transpose


def write_table_csv(
    path: str | Path,
    columns: list[str],
    rows: list[list],
    command: str,
    extra_header: list[str] | None = None,
) -> None:
    """Write a report table: header comments, column-name row, data rows."""
    with open(path, "w", newline="") as handle:
        for line in _header_lines(command, extra_header):
            handle.write(line + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [_fmt(v) if isinstance(v, float) else str(v) for v in row]
            )


def write_manifest(path: str | Path, entries: dict) -> None:
    """Write a run manifest as 'key = value' lines."""
    with open(path, "w") as handle:
        handle.write(f"# ewca run manifest (version {__version__})\n")
        handle.write(f"version = {__version__}\n")
        handle.write(
            f"created = {datetime.datetime.now(datetime.timezone.utc).isoformat()}\n"
        )
        for key, value in entries.items():
            if isinstance(value, float):
                value = _fmt(value)
            handle.write(f"{key} = {value}\n")


def read_manifest(path: str | Path) -> dict[str, str]:
    """Parse a manifest back into a string-to-string mapping."""
    entries: dict[str, str] = {}
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("manifest line is not 'key = value'",
                                 path=str(path), line=lineno)
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    return entries
