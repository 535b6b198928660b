from ..labels import PlausibilityLabel
from .backends import LLMBackend, MockBackend, OpenAIChatBackend
from .gateway import (
    generate_text,
    judge_plausibility,
    judge_rubric,
    map_bounded,
    parse_plausibility,
    parse_rubric,
)
from .prompts import build_prompt
from .text import count_sentences, truncate_sentences
from .types import RUBRIC_CRITERIA, EmotionSample, GenerationRequest, RubricScore

__all__ = [
    "EmotionSample",
    "GenerationRequest",
    "LLMBackend",
    "MockBackend",
    "OpenAIChatBackend",
    "PlausibilityLabel",
    "RUBRIC_CRITERIA",
    "RubricScore",
    "build_prompt",
    "count_sentences",
    "generate_text",
    "judge_plausibility",
    "judge_rubric",
    "map_bounded",
    "parse_plausibility",
    "parse_rubric",
    "truncate_sentences",
]
