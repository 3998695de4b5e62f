"""CSV ingestion and whole-file, atomic output helpers."""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetParseError

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


@dataclass(frozen=True)
class DatasetFile:
    """Where a dataset lives and how its columns are laid out.

    ``label_column`` and ``mask_column`` are header names, or 0-based
    column positions (negative counts from the end).
    """

    path: str | os.PathLike
    delimiter: str = ","
    has_header: bool = False
    label_column: str | int | None = None
    mask_column: str | int | None = None


@dataclass
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None
    mask: np.ndarray | None
    header: list | None
    digest: str


def file_digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _resolve_column(col, header, width, what):
    if col is None:
        return None
    if header is not None and str(col) in header:
        return header.index(str(col))
    try:
        pos = int(col)
    except (TypeError, ValueError):
        raise DatasetParseError(f"{what} column {col!r} not found in header") from None
    if not -width <= pos < width:
        raise DatasetParseError(f"{what} column {pos} out of range for {width} columns")
    return pos % width


def _parse_mask(cell, row, col):
    text = cell.strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise DatasetParseError(f"mask cell {cell!r} is not a boolean", row, col)


def load_dataset(spec: DatasetFile) -> Dataset:
    """Read a delimited text file into coordinates plus optional labels and mask.

    Label and mask columns are removed from the coordinates. Labels are kept
    as strings, so class names such as ``Iris-setosa`` work as-is. Parse errors
    carry the 1-based file row and column of the offending cell.
    """
    raw = Path(spec.path).read_bytes()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise DatasetParseError(f"{spec.path}: not UTF-8 text: {exc}") from None
    rows = [(i, r) for i, r in enumerate(csv.reader(io.StringIO(text), delimiter=spec.delimiter), start=1)
            if r and any(c.strip() for c in r)]
    header = None
    if spec.has_header:
        if not rows:
            raise DatasetParseError(f"{spec.path}: empty file, expected a header row")
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    if not rows:
        raise DatasetParseError(f"{spec.path}: no data rows")

    width = len(header) if header is not None else len(rows[0][1])
    label_at = _resolve_column(spec.label_column, header, width, "label")
    mask_at = _resolve_column(spec.mask_column, header, width, "mask")
    if label_at is not None and label_at == mask_at:
        raise DatasetParseError("label and mask columns are the same column")
    coord_cols = [j for j in range(width) if j not in (label_at, mask_at)]
    if not coord_cols:
        raise DatasetParseError(f"{spec.path}: no coordinate columns left")

    points = np.empty((len(rows), len(coord_cols)), dtype=np.float64)
    labels = [] if label_at is not None else None
    mask = [] if mask_at is not None else None
    for r, (lineno, cells) in enumerate(rows):
        if len(cells) != width:
            raise DatasetParseError(f"expected {width} columns, found {len(cells)}", lineno)
        for out_j, j in enumerate(coord_cols):
            try:
                val = float(cells[j])
            except ValueError:
                raise DatasetParseError(f"non-numeric cell {cells[j]!r}", lineno, j + 1) from None
            if not math.isfinite(val):
                raise DatasetParseError(f"non-finite cell {cells[j]!r}", lineno, j + 1)
            points[r, out_j] = val
        if labels is not None:
            labels.append(cells[label_at].strip())
        if mask is not None:
            mask.append(_parse_mask(cells[mask_at], lineno, mask_at + 1))
    return Dataset(points,
                   None if labels is None else np.array(labels),
                   None if mask is None else np.array(mask, dtype=bool),
                   header, file_digest(raw))


def read_labels(path, column=None) -> np.ndarray:
    """Read one labeling from a CSV file.

    Files written by ``acev segment`` (header ``index,component,manifold``)
    yield one id per (component, manifold) pair. Otherwise ``column`` picks
    the column (name or position, default the last one), and a header row is
    detected by a non-numeric first cell in that column.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DatasetParseError(f"{path}: no rows")
    head = [c.strip() for c in rows[0]]
    if column is None and head[:3] == ["index", "component", "manifold"]:
        return np.array([f"{r[1].strip()}:{r[2].strip()}" for r in rows[1:]])
    width = len(head)
    has_header = column is not None and not str(column).lstrip("-").isdigit()
    col = _resolve_column(column if column is not None else -1, head if has_header else None,
                          width, "label")
    if not has_header:
        try:
            float(head[col])
        except ValueError:
            has_header = True
    body = rows[1:] if has_header else rows
    out = []
    for lineno, r in enumerate(body, start=2 if has_header else 1):
        if len(r) != width:
            raise DatasetParseError(f"expected {width} columns, found {len(r)}", lineno)
        out.append(r[col].strip())
    if not out:
        raise DatasetParseError(f"{path}: no data rows")
    return np.array(out)


def atomic_write(path, data: str | bytes):
    """Write a whole file through a temporary sibling and a rename."""
    path = Path(path)
    payload = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def labels_csv(component, manifold) -> str:
    lines = ["index,component,manifold"]
    lines += [f"{i},{c},{m}" for i, (c, m) in enumerate(zip(component.tolist(), manifold.tolist()))]
    return "\n".join(lines) + "\n"


def scene_csv(points, truth=None, mask=None) -> str:
    """Coordinates (shortest round-trip repr), then optional truth and mask columns."""
    pts = np.asarray(points, dtype=np.float64)
    head = [f"x{j}" for j in range(pts.shape[1])]
    if truth is not None:
        head.append("truth")
    if mask is not None:
        head.append("mask")
    lines = [",".join(head)]
    for i, row in enumerate(pts.tolist()):
        cells = [repr(v) for v in row]
        if truth is not None:
            cells.append(str(truth[i]))
        if mask is not None:
            cells.append("1" if mask[i] else "0")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
