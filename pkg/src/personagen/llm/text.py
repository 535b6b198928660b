"""Sentence segmentation used to enforce the short-output constraint."""

from __future__ import annotations

import re

# A run of terminal punctuation plus any closing quotes/brackets that follow it.
_TERMINATOR = re.compile(r"[.!?…。！？]+[\"'”’»)\]」』]*")


def _segments(text: str) -> list[str]:
    pieces = []
    start = 0
    for m in _TERMINATOR.finditer(text):
        piece = text[start : m.end()]
        if _has_content(piece):
            pieces.append(piece)
        elif pieces:
            # stray punctuation after a sentence belongs to it
            pieces[-1] += piece
        start = m.end()
    tail = text[start:]
    if tail.strip():
        pieces.append(tail)
    elif pieces:
        pieces[-1] += tail
    return pieces


def _has_content(piece: str) -> bool:
    return bool(_TERMINATOR.sub("", piece).strip())


def count_sentences(text: str) -> int:
    """Number of sentences, segmenting on runs of '.', '!' and '?'.

    >>> count_sentences("I won! Really?")
    2
    >>> count_sentences("Wait... what")
    2
    """
    return sum(1 for p in _segments(text) if _has_content(p))


def truncate_sentences(text: str, limit: int) -> str:
    """Keep the first ``limit`` sentences of ``text``."""
    pieces = [p for p in _segments(text) if _has_content(p)]
    return "".join(pieces[:limit]).strip()
