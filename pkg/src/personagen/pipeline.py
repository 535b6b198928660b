"""Stage orchestration: persona construction, sample generation and judging.

Every slot (one persona, one sample) draws from its own generator seeded by
``(run seed, stage, slot index)``, so results do not depend on how slots are
scheduled across threads.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Callable, Sequence

import numpy as np

from .embedding import EmbeddingProvider, MockEmbeddingProvider, RemoteEmbeddingProvider
from .errors import UnparsableJudgment
from .labels import PlausibilityLabel
from .llm import (
    RUBRIC_CRITERIA,
    EmotionSample,
    GenerationRequest,
    LLMBackend,
    MockBackend,
    OpenAIChatBackend,
    generate_text,
    judge_plausibility,
    judge_rubric,
    map_bounded,
)
from .llm.types import utc_now
from .persona import Persona, assemble_persona, sample_background, sample_base_persona
from .scenario import sample_scenario
from .store.config import RunConfig

logger = logging.getLogger(__name__)

PERSONA_STAGE = 1
GENERATION_STAGE = 2

# Timestamp stamped on every sample in mock runs so output files are byte-stable.
MOCK_TIMESTAMP = datetime(2000, 1, 1, tzinfo=timezone.utc)


def slot_rng(seed: int, stage: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, stage, index])


def make_backend(config: RunConfig, kind: str | None = None) -> LLMBackend:
    kind = kind or config.backend
    llm = config.llm
    if kind == "mock":
        return MockBackend(
            seed=config.seed,
            plausibility=llm.mock.plausibility,
            rubric=llm.mock.rubric,
            sentences=llm.mock.sentences,
        )
    return OpenAIChatBackend(
        base_url=llm.base_url,
        api_key_env=llm.api_key_env,
        timeout=llm.timeout,
        max_retries=llm.max_retries,
        backoff=llm.backoff,
    )


def make_embedding_provider(config: RunConfig, kind: str | None = None) -> EmbeddingProvider:
    emb = config.embedding
    kind = kind or emb.provider
    if kind == "mock":
        return MockEmbeddingProvider(dim=emb.dim, seed=emb.seed)
    return RemoteEmbeddingProvider(
        emb.model,
        base_url=emb.base_url,
        api_key_env=emb.api_key_env,
        timeout=emb.timeout,
        max_retries=emb.max_retries,
        batch_size=emb.batch_size,
        max_in_flight=emb.parallelism,
    )


def clock_for(backend: LLMBackend) -> Callable[[], datetime]:
    if isinstance(backend, MockBackend):
        return lambda: MOCK_TIMESTAMP
    return utc_now


@dataclass
class SlotFailure:
    slot: int
    reason: str

    def to_dict(self) -> dict[str, Any]:
        return {"slot": self.slot, "reason": self.reason}


@dataclass
class PersonaBatch:
    personas: list[Persona]
    judgments: Counter = field(default_factory=Counter)
    failures: list[SlotFailure] = field(default_factory=list)

    @property
    def rejected(self) -> int:
        return self.judgments.get(PlausibilityLabel.IMPLAUSIBLE.value, 0)


def _judge_counts(labels: Sequence[str]) -> Counter:
    counts: Counter = Counter({label.value: 0 for label in PlausibilityLabel})
    counts["unparsable"] = 0
    counts.update(labels)
    return counts


def build_persona_slot(config: RunConfig, backend: LLMBackend, index: int):
    """Sample and judge personas for one slot until one is kept or the cap is hit."""
    rng = slot_rng(config.seed, PERSONA_STAGE, index)
    ps = config.persona
    judge = config.llm.plausibility
    seen: list[str] = []
    for _ in range(config.llm.resample_cap):
        base = sample_base_persona(ps.base, ps.rules, rng)
        background = sample_background(base, ps.background, rng, ps.rules)
        persona = assemble_persona(base, background, rng)
        try:
            label = judge_plausibility(persona, backend, model=judge.model, temperature=judge.temperature)
        except UnparsableJudgment:
            seen.append("unparsable")
            continue
        seen.append(label.value)
        if label.keep:
            persona.validation = label
            return persona, seen
    return SlotFailure(index, f"no plausible persona in {config.llm.resample_cap} attempts"), seen


def build_personas(config: RunConfig, count: int, backend: LLMBackend) -> PersonaBatch:
    results = map_bounded(
        lambda i: build_persona_slot(config, backend, i), range(count), config.llm.parallelism
    )
    batch = PersonaBatch([])
    labels: list[str] = []
    for outcome, seen in results:
        labels.extend(seen)
        if isinstance(outcome, SlotFailure):
            batch.failures.append(outcome)
        else:
            batch.personas.append(outcome)
    batch.judgments = _judge_counts(labels)
    return batch


@dataclass(frozen=True)
class GenerationSlot:
    index: int
    emotion: str
    persona: Persona


def plan_generation(config: RunConfig, personas: Sequence[Persona]) -> list[GenerationSlot]:
    """Emotion-major slots; personas are assigned round-robin."""
    if not personas:
        raise ValueError("no personas to generate from")
    slots = []
    n = config.samples_per_emotion
    for j, emotion in enumerate(config.emotion_set):
        for k in range(n):
            index = j * n + k
            slots.append(GenerationSlot(index, emotion, personas[index % len(personas)]))
    return slots


@dataclass
class GenerationBatch:
    samples: list[EmotionSample]
    scene_judgments: Counter = field(default_factory=Counter)
    failures: list[SlotFailure] = field(default_factory=list)

    @property
    def truncated(self) -> int:
        return sum(s.truncated for s in self.samples)


def generate_slot(config: RunConfig, backend: LLMBackend, slot: GenerationSlot, clock=None):
    rng = slot_rng(config.seed, GENERATION_STAGE, slot.index)
    llm = config.llm
    seen: list[str] = []
    for _ in range(llm.resample_cap):
        ctx = sample_scenario(slot.persona, config.scenario, config.constraint, rng)
        label = None
        if llm.validate_scenarios:
            try:
                label = judge_plausibility(
                    (slot.persona, ctx),
                    backend,
                    model=llm.plausibility.model,
                    temperature=llm.plausibility.temperature,
                )
            except UnparsableJudgment:
                seen.append("unparsable")
                continue
            seen.append(label.value)
            if not label.keep:
                continue
        req = GenerationRequest(
            slot.persona,
            ctx,
            slot.emotion,
            llm.generation.model,
            llm.generation.temperature,
            llm.max_sentences,
        )
        sample = generate_text(req, backend, rng=rng, clock=clock or clock_for(backend))
        sample.plausibility = label
        return sample, seen
    return SlotFailure(slot.index, f"no plausible scenario in {llm.resample_cap} attempts"), seen


def generate_samples(
    config: RunConfig, personas: Sequence[Persona], backend: LLMBackend, clock=None
) -> GenerationBatch:
    slots = plan_generation(config, personas)
    results = map_bounded(
        lambda s: generate_slot(config, backend, s, clock), slots, config.llm.parallelism
    )
    batch = GenerationBatch([])
    labels: list[str] = []
    for outcome, seen in results:
        labels.extend(seen)
        if isinstance(outcome, SlotFailure):
            batch.failures.append(outcome)
        else:
            batch.samples.append(outcome)
    batch.scene_judgments = _judge_counts(labels)
    return batch


@dataclass
class JudgeBatch:
    """All input samples (unscored ones keep ``rubric=None``) plus the failures."""

    samples: list[EmotionSample]
    failures: list[SlotFailure] = field(default_factory=list)

    @property
    def failure_rate(self) -> float:
        return len(self.failures) / len(self.samples) if self.samples else 0.0

    def means(self) -> dict[str, float | None]:
        scored = [s.rubric for s in self.samples if s.rubric is not None]
        if not scored:
            return {c: None for c in RUBRIC_CRITERIA}
        table = np.array([r.as_tuple() for r in scored], dtype=float)
        return {c: float(m) for c, m in zip(RUBRIC_CRITERIA, table.mean(axis=0))}

    def distribution(self) -> list[dict[str, Any]]:
        """Count of each score (1 to 5) per criterion."""
        counts = {c: Counter() for c in RUBRIC_CRITERIA}
        for s in self.samples:
            if s.rubric is not None:
                for c, v in zip(RUBRIC_CRITERIA, s.rubric.as_tuple()):
                    counts[c][v] += 1
        return [{"criterion": c, **{str(v): counts[c][v] for v in range(1, 6)}} for c in RUBRIC_CRITERIA]


def judge_samples(config: RunConfig, samples: Sequence[EmotionSample], backend: LLMBackend) -> JudgeBatch:
    rubric = config.llm.rubric

    def score(sample: EmotionSample):
        return judge_rubric(sample, backend, model=rubric.model, temperature=rubric.temperature)

    results = map_bounded(score, samples, config.llm.parallelism, return_exceptions=True)
    batch = JudgeBatch([])
    for i, (sample, outcome) in enumerate(zip(samples, results)):
        if isinstance(outcome, UnparsableJudgment):
            batch.failures.append(SlotFailure(i, f"{sample.id}: {outcome}"))
            batch.samples.append(sample)
        elif isinstance(outcome, BaseException):
            raise outcome
        else:
            batch.samples.append(replace(sample, rubric=outcome))
    return batch
