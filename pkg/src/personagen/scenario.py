"""Situational scene and language-style sampling for a persona."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import InfeasibleConstraints
from .persona import (
    CategoricalDistribution,
    ConditionalDistributionTable,
    Persona,
    RandomSource,
    sample_categorical,
)

SCENE_ELEMENTS = ("location", "activity", "interlocutor", "medium")
STYLE_DIMENSIONS = ("tone", "register", "slang", "modality")


@dataclass(frozen=True)
class ScenarioContext:
    location: str
    activity: str
    interlocutor: str
    medium: str
    style: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "style", tuple(self.style))
        if not self.style:
            raise ValueError("a scenario needs at least one style descriptor")

    def labels(self) -> list[str]:
        return [getattr(self, e) for e in SCENE_ELEMENTS] + list(self.style)

    def to_dict(self) -> dict[str, Any]:
        return {**{e: getattr(self, e) for e in SCENE_ELEMENTS}, "style": list(self.style)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScenarioContext":
        return cls(**{e: data[e] for e in SCENE_ELEMENTS}, style=tuple(data["style"]))


ElementDistribution = CategoricalDistribution | ConditionalDistributionTable


@dataclass(frozen=True)
class ScenarioConfig:
    """Distributions for the four scene elements and each style dimension.

    Any entry may be a flat distribution or a table conditioned on a persona
    attribute (e.g. occupation).
    """

    elements: Mapping[str, ElementDistribution]
    style: Mapping[str, ElementDistribution]

    def categories(self, name: str) -> tuple[str, ...]:
        dist = self.elements.get(name) or self.style.get(name)
        if dist is None:
            raise KeyError(name)
        return dist.categories

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.elements) + tuple(self.style)


@dataclass(frozen=True)
class ScenarioConstraint:
    """Allowed subsets per scene element or style dimension."""

    restrict: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        fixed = {k: frozenset(v) for k, v in self.restrict.items()}
        for name, allowed in fixed.items():
            if not allowed:
                raise ValueError(f"restriction for {name!r} is empty")
        object.__setattr__(self, "restrict", fixed)

    def problems(self, config: ScenarioConfig) -> list[str]:
        out = []
        for name, allowed in self.restrict.items():
            if name not in config.names:
                out.append(f"constraint names unknown scenario element {name!r}")
                continue
            extra = sorted(allowed - set(config.categories(name)))
            if extra:
                out.append(f"constraint on {name!r} lists unconfigured categories {extra}")
        return out


def _select(dist: ElementDistribution, persona: Persona | None) -> CategoricalDistribution:
    if isinstance(dist, ConditionalDistributionTable):
        return dist.select(persona.attributes() if persona is not None else {})
    return dist


def sample_scenario(
    persona: Persona | None,
    config: ScenarioConfig,
    constraint: ScenarioConstraint | None,
    rng: RandomSource,
) -> ScenarioContext:
    restrict = constraint.restrict if constraint is not None else {}
    drawn: dict[str, str] = {}
    style: list[str] = []
    for group, target in ((config.elements, None), (config.style, style)):
        for name, raw in group.items():
            dist = _select(raw, persona)
            if name in restrict:
                allowed = restrict[name]
                if not allowed & set(dist.support):
                    raise InfeasibleConstraints(
                        f"restriction on {name!r} leaves no probability mass"
                    )
                dist = dist.restricted(allowed)
            label = sample_categorical(dist, rng)
            if target is None:
                drawn[name] = label
            else:
                target.append(label)
    return ScenarioContext(**{e: drawn[e] for e in SCENE_ELEMENTS}, style=tuple(style))


def render_scene_summary(ctx: ScenarioContext) -> str:
    """One-line English description of the scene, e.g. for prompts and reports."""
    styles = ", ".join(ctx.style)
    return (
        f"{ctx.activity} with {ctx.interlocutor} via {ctx.medium} "
        f"at {ctx.location}; language style: {styles}."
    )

