from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Mapping

from ..labels import PlausibilityLabel
from ..persona import Persona
from ..scenario import ScenarioContext

RUBRIC_CRITERIA = ("emotion_match", "grammaticality", "lexical_diversity", "structure_logic")


@dataclass(frozen=True)
class GenerationRequest:
    persona: Persona
    scenario: ScenarioContext
    emotion: str
    model: str
    temperature: float = 1.2
    max_sentences: int = 2

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_sentences < 1:
            raise ValueError("max_sentences must be positive")


@dataclass(frozen=True)
class RubricScore:
    emotion_match: int
    grammaticality: int
    lexical_diversity: int
    structure_logic: int

    def __post_init__(self) -> None:
        for name in RUBRIC_CRITERIA:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or not 1 <= value <= 5:
                raise ValueError(f"{name} score {value!r} is not an integer in 1..5")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return tuple(getattr(self, n) for n in RUBRIC_CRITERIA)

    def to_dict(self) -> dict[str, int]:
        return {n: getattr(self, n) for n in RUBRIC_CRITERIA}


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass
class EmotionSample:
    id: str
    persona_id: str
    scenario: ScenarioContext
    emotion: str
    text: str
    model: str
    temperature: float
    plausibility: PlausibilityLabel | None = None
    rubric: RubricScore | None = None
    created_at: datetime = field(default_factory=utc_now)
    truncated: bool = False
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("sample text is empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.extra,
            "kind": "sample",
            "id": self.id,
            "persona_id": self.persona_id,
            "emotion": self.emotion,
            "text": self.text,
            "scenario": self.scenario.to_dict(),
            "model": self.model,
            "temperature": self.temperature,
            "plausibility": self.plausibility.value if self.plausibility else None,
            "rubric": self.rubric.to_dict() if self.rubric else None,
            "created_at": self.created_at.astimezone(timezone.utc).isoformat(),
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EmotionSample":
        known = {
            "kind", "id", "persona_id", "emotion", "text", "scenario", "model",
            "temperature", "plausibility", "rubric", "created_at", "truncated",
        }
        created = datetime.fromisoformat(data["created_at"])
        if created.tzinfo is None:
            created = created.replace(tzinfo=timezone.utc)
        return cls(
            id=str(data["id"]),
            persona_id=str(data["persona_id"]),
            scenario=ScenarioContext.from_dict(data["scenario"]),
            emotion=data["emotion"],
            text=data["text"],
            model=data["model"],
            temperature=float(data["temperature"]),
            plausibility=PlausibilityLabel(data["plausibility"]) if data.get("plausibility") else None,
            rubric=RubricScore(**data["rubric"]) if data.get("rubric") else None,
            created_at=created,
            truncated=bool(data.get("truncated", False)),
            extra={k: v for k, v in data.items() if k not in known},
        )
