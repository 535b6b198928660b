"""Plausibility labels and emotion sets shared by personas, scenarios and samples."""

from __future__ import annotations

import enum

GENERATION_EMOTIONS = ("joy", "anger", "sadness", "pleasure", "surprise", "fear", "neutral")
GOLDEN_EMOTIONS = ("joy", "anger", "sadness", "love", "surprise", "fear")


class PlausibilityLabel(str, enum.Enum):
    NATURAL = "natural"
    RARE_BUT_PLAUSIBLE = "rare_but_plausible"
    IMPLAUSIBLE = "implausible"

    @property
    def keep(self) -> bool:
        """Natural and rare-but-plausible subjects are retained."""
        return self is not PlausibilityLabel.IMPLAUSIBLE

    @property
    def phrase(self) -> str:
        return self.value.replace("_", " ")


def check_emotion(label: str, emotion_set) -> str:
    if label not in emotion_set:
        raise ValueError(f"emotion {label!r} is not in the active set {list(emotion_set)}")
    return label
