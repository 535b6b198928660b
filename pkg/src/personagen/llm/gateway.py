"""Generation and judging calls over an :class:`LLMBackend`."""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from typing import Any, Callable, Iterable, TypeVar

from ..errors import EmptyCompletion, UnparsableJudgment
from ..labels import PlausibilityLabel
from ..persona import BasePersona, Persona, fresh_id
from ..scenario import ScenarioContext
from .backends import LLMBackend
from .prompts import (
    GENERATION_SYSTEM,
    PLAUSIBILITY_SYSTEM,
    RUBRIC_SYSTEM,
    build_prompt,
    length_retry_instruction,
    plausibility_prompt,
    rubric_prompt,
)
from .text import count_sentences, truncate_sentences
from .types import EmotionSample, GenerationRequest, RubricScore, utc_now

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def _messages(system: str, user: str) -> list[dict[str, str]]:
    return [{"role": "system", "content": system}, {"role": "user", "content": user}]


def generate_text(
    req: GenerationRequest,
    backend: LLMBackend,
    *,
    rng: Any = None,
    clock: Callable[[], datetime] = utc_now,
    empty_retries: int = 1,
) -> EmotionSample:
    """Generate one emotion text and enforce the sentence limit.

    An over-long reply gets one follow-up request asking for a shorter text;
    if that is still too long it is cut to the first ``max_sentences``
    sentences and the sample is marked ``truncated``.
    """
    messages = _messages(
        GENERATION_SYSTEM,
        build_prompt(req.persona, req.scenario, req.emotion, req.max_sentences),
    )
    text = ""
    for _ in range(empty_retries + 1):
        text = backend.complete(messages, model=req.model, temperature=req.temperature).strip()
        if text:
            break
    if not text:
        raise EmptyCompletion(f"blank completion for emotion {req.emotion!r}")

    truncated = False
    found = count_sentences(text)
    if found > req.max_sentences:
        retry = messages + [
            {"role": "assistant", "content": text},
            {"role": "user", "content": length_retry_instruction(found, req.max_sentences)},
        ]
        shorter = backend.complete(retry, model=req.model, temperature=req.temperature).strip()
        if shorter:
            text = shorter
        if count_sentences(text) > req.max_sentences:
            text = truncate_sentences(text, req.max_sentences)
            truncated = True
            logger.debug("truncated over-long completion to %d sentences", req.max_sentences)

    return EmotionSample(
        id=fresh_id(rng),
        persona_id=req.persona.id,
        scenario=req.scenario,
        emotion=req.emotion,
        text=text,
        model=req.model,
        temperature=req.temperature,
        created_at=clock(),
        truncated=truncated,
    )


_LABEL_LEXICON = (
    ("rare but plausible", PlausibilityLabel.RARE_BUT_PLAUSIBLE),
    ("implausible", PlausibilityLabel.IMPLAUSIBLE),
    ("natural", PlausibilityLabel.NATURAL),
)


def parse_plausibility(raw: str) -> PlausibilityLabel | None:
    """Map a judge reply to a label; None when zero or several labels appear."""
    norm = " ".join(re.sub(r"[\W_]+", " ", raw.lower()).split())
    found = set()
    for phrase, label in _LABEL_LEXICON:
        pattern = rf"\b{phrase}\b"
        if re.search(pattern, norm):
            found.add(label)
            norm = re.sub(pattern, " ", norm)
    return found.pop() if len(found) == 1 else None


def judge_plausibility(
    subject: Persona | BasePersona | tuple[Persona, ScenarioContext],
    backend: LLMBackend,
    *,
    model: str = "gpt-4.1-mini",
    temperature: float = 0.0,
) -> PlausibilityLabel:
    raw = ""
    for strict in (False, True):
        messages = _messages(PLAUSIBILITY_SYSTEM, plausibility_prompt(subject, strict=strict))
        raw = backend.complete(messages, model=model, temperature=temperature, task="plausibility")
        label = parse_plausibility(raw)
        if label is not None:
            return label
    raise UnparsableJudgment(f"no plausibility label in {raw[:80]!r}", raw=raw)


_QUAD = re.compile(r"(-?\d+)\s*[,;/]\s*(-?\d+)\s*[,;/]\s*(-?\d+)\s*[,;/]\s*(-?\d+)")


def parse_rubric(raw: str) -> RubricScore | None:
    m = _QUAD.search(raw)
    if not m:
        return None
    scores = [int(g) for g in m.groups()]
    if not all(1 <= s <= 5 for s in scores):
        return None
    return RubricScore(*scores)


def judge_rubric(
    sample: EmotionSample,
    backend: LLMBackend,
    *,
    model: str = "gpt-4o",
    temperature: float = 0.0,
) -> RubricScore:
    raw = ""
    for strict in (False, True):
        messages = _messages(RUBRIC_SYSTEM, rubric_prompt(sample.text, sample.emotion, strict=strict))
        raw = backend.complete(messages, model=model, temperature=temperature, task="rubric")
        score = parse_rubric(raw)
        if score is not None:
            return score
    raise UnparsableJudgment(f"no valid a,b,c,d score quadruple in {raw[:80]!r}", raw=raw)


def map_bounded(
    fn: Callable[[T], R],
    items: Iterable[T],
    max_in_flight: int = 8,
    return_exceptions: bool = False,
) -> list[R | BaseException]:
    """Apply ``fn`` concurrently with at most ``max_in_flight`` calls running.

    Results come back in submission order.
    """
    items = list(items)
    if max_in_flight <= 1 or len(items) <= 1:
        return [_call(fn, x, return_exceptions) for x in items]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = [pool.submit(fn, x) for x in items]
        out: list[R | BaseException] = []
        for fut in futures:
            exc = fut.exception()
            if exc is None:
                out.append(fut.result())
            elif return_exceptions:
                out.append(exc)
            else:
                raise exc
        return out


def _call(fn, x, return_exceptions):
    try:
        return fn(x)
    except Exception as exc:
        if not return_exceptions:
            raise
        return exc
