"""Line-delimited JSON record files.

Every line is one self-describing record with a ``kind`` field
(``persona``, ``sample``, ``golden`` or ``embedding``). Keys are written
sorted so equal records always serialize to equal bytes.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from ..embedding import EmbeddedCorpus
from ..errors import MalformedRecord
from ..llm.types import EmotionSample
from ..persona import Persona

RECORD_KINDS = ("persona", "sample", "golden", "embedding")


@dataclass
class GoldenRecord:
    """One labelled text from the reference corpus."""

    id: str
    text: str
    label: str
    source_label: str
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.extra,
            "kind": "golden",
            "id": self.id,
            "text": self.text,
            "label": self.label,
            "source_label": self.source_label,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GoldenRecord":
        known = {"kind", "id", "text", "label", "source_label"}
        return cls(
            id=str(data["id"]),
            text=str(data["text"]),
            label=str(data["label"]),
            source_label=str(data.get("source_label", data["label"])),
            extra={k: v for k, v in data.items() if k not in known},
        )


@dataclass
class EmbeddingRecord:
    sample_id: str
    label: str
    provider_tag: str
    vector: list[float]
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def id(self) -> str:
        return self.sample_id

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.extra,
            "kind": "embedding",
            "sample_id": self.sample_id,
            "label": self.label,
            "provider_tag": self.provider_tag,
            "dim": len(self.vector),
            "vector": [float(v) for v in self.vector],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EmbeddingRecord":
        known = {"kind", "sample_id", "label", "provider_tag", "dim", "vector"}
        vector = [float(v) for v in data["vector"]]
        if "dim" in data and int(data["dim"]) != len(vector):
            raise ValueError(f"dim {data['dim']} does not match vector length {len(vector)}")
        if not np.all(np.isfinite(vector)):
            raise ValueError("vector has non-finite entries")
        return cls(
            sample_id=str(data["sample_id"]),
            label=str(data["label"]),
            provider_tag=str(data["provider_tag"]),
            vector=vector,
            extra={k: v for k, v in data.items() if k not in known},
        )


DECODERS: dict[str, Callable[[Mapping[str, Any]], Any]] = {
    "persona": Persona.from_dict,
    "sample": EmotionSample.from_dict,
    "golden": GoldenRecord.from_dict,
    "embedding": EmbeddingRecord.from_dict,
}


def record_id(data: Mapping[str, Any]) -> str | None:
    rid = data.get("id", data.get("sample_id"))
    return None if rid is None else str(rid)


def encode(record: Any) -> str:
    """One JSON line (without the newline) for a record object or mapping."""
    data = record.to_dict() if hasattr(record, "to_dict") else dict(record)
    return json.dumps(data, ensure_ascii=False, sort_keys=True, separators=(",", ":"), allow_nan=False)


def decode(line: str, kind: str | None = None) -> Any:
    """Parse one line; typed object when ``kind`` is given, else the raw dict."""
    data = json.loads(line)
    if not isinstance(data, dict):
        raise ValueError("record is not a JSON object")
    found = data.get("kind")
    if found not in RECORD_KINDS:
        raise ValueError(f"unknown record kind {found!r}")
    if kind is not None and found != kind:
        raise ValueError(f"expected a {kind} record, found {found}")
    return DECODERS[found](data) if kind is not None else data


def append_records(path: str | Path, records: Iterable[Any]) -> int:
    """Append records, one ``write`` per line on an ``O_APPEND`` descriptor.

    Each line lands whole even when several processes append to the same file.
    """
    fd = os.open(path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
    n = 0
    try:
        for record in records:
            payload = (encode(record) + "\n").encode("utf-8")
            written = os.write(fd, payload)
            if written != len(payload):
                raise OSError(f"short write to {path}: {written} of {len(payload)} bytes")
            n += 1
    finally:
        os.close(fd)
    return n


def write_records(path: str | Path, records: Iterable[Any]) -> int:
    """Replace ``path`` with the given records (written to a temp file, then renamed)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [encode(r) + "\n" for r in records]
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(lines)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return len(lines)


@dataclass
class ReadResult:
    records: list[Any]
    malformed: list[tuple[int, str]] = field(default_factory=list)

    def __iter__(self) -> Iterator[Any]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def read_records(path: str | Path, kind: str | None = None, strict: bool = False) -> ReadResult:
    """Read a record file, skipping (and reporting) malformed lines.

    ``strict=True`` raises :class:`MalformedRecord` at the first bad line
    instead. Blank lines are ignored. A repeated id counts as malformed.
    """
    if kind is not None and kind not in RECORD_KINDS:
        raise ValueError(f"unknown record kind {kind!r}")
    result = ReadResult([])
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = decode(line, kind)
                data = record if isinstance(record, dict) else None
                rid = record_id(data) if data is not None else str(record.id)
                if rid is not None:
                    if rid in seen:
                        raise ValueError(f"duplicate id {rid}")
                    seen.add(rid)
            except (ValueError, KeyError, TypeError) as exc:
                reason = f"{type(exc).__name__}: {exc}"
                if strict:
                    raise MalformedRecord(reason, line_no) from exc
                result.malformed.append((line_no, reason))
                continue
            result.records.append(record)
    return result


def write_corpus(path: str | Path, corpus: EmbeddedCorpus) -> int:
    return write_records(path, corpus.to_records())


def read_corpus(path: str | Path, strict: bool = True) -> EmbeddedCorpus:
    records = read_records(path, "embedding", strict=strict).records
    return EmbeddedCorpus.from_records([r.to_dict() for r in records])


def load_typed(path: str | Path, kind: str, strict: bool = True) -> list[Any]:
    return read_records(path, kind, strict=strict).records


def dump_lines(records: Sequence[Any]) -> str:
    return "".join(encode(r) + "\n" for r in records)
