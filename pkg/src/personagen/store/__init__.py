"""Configuration, record files, golden-corpus ingestion and reports."""

from .config import RunConfig, config_from_dict, default_config_text, load_config
from .golden import GoldenIngestSpec, IngestSummary, ingest_golden
from .records import (
    RECORD_KINDS,
    EmbeddingRecord,
    GoldenRecord,
    ReadResult,
    append_records,
    decode,
    encode,
    read_corpus,
    read_records,
    write_corpus,
    write_records,
)
from .reports import read_report, write_report, write_table

__all__ = [
    "RECORD_KINDS",
    "EmbeddingRecord",
    "GoldenIngestSpec",
    "GoldenRecord",
    "IngestSummary",
    "ReadResult",
    "RunConfig",
    "append_records",
    "config_from_dict",
    "decode",
    "default_config_text",
    "encode",
    "ingest_golden",
    "load_config",
    "read_corpus",
    "read_records",
    "read_report",
    "write_corpus",
    "write_records",
    "write_report",
    "write_table",
]
