"""Ingestion of the labelled reference (golden) corpus from delimited text."""

from __future__ import annotations

import csv
import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from ..errors import ColumnNotFound, ParseError
from ..labels import GOLDEN_EMOTIONS
from .records import GoldenRecord


@dataclass(frozen=True)
class GoldenIngestSpec:
    """Where the text and label live and how source labels map onto the golden set.

    An empty ``label_map`` accepts source labels that are already members of
    ``emotion_set``. A column may be given by name or by 0-based index.
    """

    path: str | Path
    delimiter: str = ","
    text_column: str | int = "text"
    label_column: str | int = "label"
    label_map: Mapping[str, str] = field(default_factory=dict)
    emotion_set: tuple[str, ...] = GOLDEN_EMOTIONS
    has_header: bool = True

    def __post_init__(self) -> None:
        if len(self.delimiter) != 1:
            raise ValueError("delimiter must be a single character")
        bad = sorted({v for v in self.label_map.values() if v not in self.emotion_set})
        if bad:
            raise ValueError(f"label_map targets outside the golden set: {bad}")

    def map_label(self, raw: str) -> str | None:
        key = raw.strip()
        if self.label_map:
            return self.label_map.get(key)
        return key if key in self.emotion_set else None


@dataclass
class IngestSummary:
    rows_in: int
    records_out: int
    skipped: int
    skipped_labels: dict[str, int]

    def to_dict(self) -> dict[str, object]:
        return {
            "rows_in": self.rows_in,
            "records_out": self.records_out,
            "skipped": self.skipped,
            "skipped_labels": dict(sorted(self.skipped_labels.items())),
        }


def _column_index(header: list[str] | None, column: str | int, path) -> int:
    if isinstance(column, int):
        if header is not None and not 0 <= column < len(header):
            raise ColumnNotFound(f"{path}: column index {column} out of range")
        return column
    if header is None:
        raise ColumnNotFound(f"{path}: column {column!r} needs a header row")
    try:
        return header.index(column)
    except ValueError:
        raise ColumnNotFound(f"{path}: no column {column!r} in header {header}") from None


def _golden_id(row_no: int, text: str) -> str:
    digest = hashlib.sha256(f"{row_no}\x00{text}".encode("utf-8")).hexdigest()[:16]
    return f"golden-{row_no:06d}-{digest}"


def ingest_golden(spec: GoldenIngestSpec) -> tuple[list[GoldenRecord], IngestSummary]:
    """Read every data row; rows whose label does not map are counted and skipped.

    Always ``rows_in == records_out + skipped``.
    """
    path = Path(spec.path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=spec.delimiter, strict=True)
        try:
            header = [h.strip() for h in next(reader)] if spec.has_header else None
        except StopIteration:
            raise ParseError(f"{path}: file is empty") from None
        except csv.Error as exc:
            raise ParseError(f"{path}:1: {exc}") from exc
        ti = _column_index(header, spec.text_column, path)
        li = _column_index(header, spec.label_column, path)
        records: list[GoldenRecord] = []
        skipped: Counter[str] = Counter()
        rows_in = 0
        try:
            for row in reader:
                if not row or all(not cell.strip() for cell in row):
                    continue
                rows_in += 1
                if max(ti, li) >= len(row):
                    skipped["<missing column>"] += 1
                    continue
                raw_label = row[li].strip()
                label = spec.map_label(raw_label)
                text = row[ti].strip()
                if label is None or not text:
                    skipped[raw_label if label is None else "<empty text>"] += 1
                    continue
                records.append(GoldenRecord(_golden_id(rows_in, text), text, label, raw_label))
        except csv.Error as exc:
            raise ParseError(f"{path}:{reader.line_num}: {exc}") from exc
    summary = IngestSummary(rows_in, len(records), sum(skipped.values()), dict(skipped))
    return records, summary
