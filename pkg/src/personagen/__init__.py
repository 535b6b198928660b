"""PersonaGen: persona-conditioned synthetic emotion text, with evaluation metrics."""

from .errors import PersonaGenError
from .labels import GENERATION_EMOTIONS, GOLDEN_EMOTIONS, PlausibilityLabel
from .persona import (
    BackgroundProfile,
    BasePersona,
    CategoricalDistribution,
    ConditionalDistributionTable,
    Persona,
    RuleFilter,
    check_rules,
    sample_background,
    sample_base_persona,
    sample_categorical,
)
from .scenario import ScenarioContext, ScenarioConstraint, render_scene_summary, sample_scenario

__version__ = "0.1.0"

__all__ = [
    "BackgroundProfile",
    "BasePersona",
    "CategoricalDistribution",
    "ConditionalDistributionTable",
    "GENERATION_EMOTIONS",
    "GOLDEN_EMOTIONS",
    "Persona",
    "PersonaGenError",
    "PlausibilityLabel",
    "RuleFilter",
    "ScenarioConstraint",
    "ScenarioContext",
    "check_rules",
    "render_scene_summary",
    "sample_background",
    "sample_base_persona",
    "sample_categorical",
    "sample_scenario",
]
