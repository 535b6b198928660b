"""Layered persona construction: demographic base attributes plus background.

Base attributes (age, gender, occupation, mbti) are drawn from categorical
distributions in a fixed order; a rule filter removes forbidden combinations
before each draw and the remaining mass is renormalized. Background
attributes are drawn from tables whose rows are selected by an attribute that
has already been assigned (usually age).
"""

from __future__ import annotations

import math
import re
import uuid
import warnings
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Protocol, Sequence

from .errors import EmptyDistribution, InfeasibleConstraints, UnknownAttribute
from .labels import PlausibilityLabel

BASE_ATTRIBUTES = ("age", "gender", "occupation", "mbti")
BACKGROUND_ATTRIBUTES = (
    "education",
    "prefecture",
    "location",
    "family",
    "religion",
    "values",
    "income",
)
PERSONA_ATTRIBUTES = BASE_ATTRIBUTES + BACKGROUND_ATTRIBUTES

MBTI_TYPES = tuple(
    f"{a}{b}{c}{d}-{v}"
    for a in "IE"
    for b in "SN"
    for c in "TF"
    for d in "JP"
    for v in "AT"
)
_MBTI_RE = re.compile(r"^[A-Z]{4}-[AT]$")

NORMALIZATION_WARN_TOL = 1e-6
SUM_TOL = 1e-9


class RandomSource(Protocol):
    def random(self) -> float: ...


class ProbabilityNormalizationWarning(UserWarning):
    pass


def fresh_id(rng: Any = None) -> str:
    """Return a new UUID string, drawn from ``rng`` when one is supplied.

    Drawing ids from the run's random source keeps seeded runs byte-identical.
    """
    if rng is None:
        return str(uuid.uuid4())
    if hasattr(rng, "bytes"):
        raw = rng.bytes(16)
    elif hasattr(rng, "getrandbits"):
        raw = rng.getrandbits(128).to_bytes(16, "big")
    else:
        return str(uuid.uuid4())
    return str(uuid.UUID(bytes=raw, version=4))


@dataclass(frozen=True)
class CategoricalDistribution:
    name: str
    entries: Sequence[tuple[str, float]]
    _cumulative: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        entries = tuple((str(c), float(p)) for c, p in self.entries)
        object.__setattr__(self, "entries", entries)
        seen = set()
        for label, prob in entries:
            if not label.strip():
                raise ValueError(f"{self.name}: empty category label")
            if "\n" in label or "\r" in label:
                raise ValueError(f"{self.name}: category label {label!r} spans lines")
            if label in seen:
                raise ValueError(f"{self.name}: duplicate category {label!r}")
            seen.add(label)
            if not (math.isfinite(prob) and 0.0 <= prob <= 1.0):
                raise ValueError(f"{self.name}: probability {prob} for {label!r} outside [0, 1]")
        if entries:
            total = math.fsum(p for _, p in entries)
            if abs(total - 1.0) > SUM_TOL:
                raise ValueError(f"{self.name}: probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "_cumulative", _cumulative(entries))

    @classmethod
    def from_mapping(
        cls, name: str, weights: Mapping[str, float] | Iterable[tuple[str, float]]
    ) -> "CategoricalDistribution":
        """Build a distribution from raw weights, normalizing them to sum to one.

        A :class:`ProbabilityNormalizationWarning` is emitted when the raw
        weights deviate from 1 by more than 1e-6.
        """
        pairs = list(weights.items()) if isinstance(weights, Mapping) else list(weights)
        raw = [(str(c), float(p)) for c, p in pairs]
        for label, p in raw:
            if not math.isfinite(p) or p < 0:
                raise ValueError(f"{name}: weight {p} for {label!r} must be finite and >= 0")
        total = math.fsum(p for _, p in raw)
        if raw and total <= 0:
            raise ValueError(f"{name}: weights sum to zero")
        if raw and abs(total - 1.0) > NORMALIZATION_WARN_TOL:
            warnings.warn(
                f"{name}: probabilities sum to {total:.6g}; normalized",
                ProbabilityNormalizationWarning,
                stacklevel=2,
            )
        if raw and total != 1.0:
            raw = [(c, p / total) for c, p in raw]
        return cls(name, raw)

    @property
    def categories(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.entries)

    @property
    def support(self) -> tuple[str, ...]:
        return tuple(c for c, p in self.entries if p > 0)

    def probability(self, category: str) -> float:
        for c, p in self.entries:
            if c == category:
                return p
        return 0.0

    def restricted(self, allowed: Iterable[str]) -> "CategoricalDistribution":
        """Condition the distribution on ``allowed`` and renormalize."""
        allowed = set(allowed)
        kept = [(c, p) for c, p in self.entries if c in allowed]
        mass = math.fsum(p for _, p in kept)
        if mass <= 0:
            raise InfeasibleConstraints(
                f"{self.name}: no probability mass left among {sorted(allowed)}"
            )
        return CategoricalDistribution(self.name, [(c, p / mass) for c, p in kept])

    def to_dict(self) -> dict[str, float]:
        return dict(self.entries)


def _cumulative(entries: Sequence[tuple[str, float]]) -> tuple[float, ...]:
    cum = []
    acc = 0.0
    for _, p in entries:
        acc += p
        cum.append(acc)
    # Pin the last positive-mass bound to 1 so rounding never leaves a gap.
    last = max((i for i, (_, p) in enumerate(entries) if p > 0), default=None)
    if last is not None:
        for i in range(last, len(cum)):
            cum[i] = 1.0
    return tuple(cum)


def sample_categorical(dist: CategoricalDistribution, rng: RandomSource) -> str:
    """Draw one category by inverting the cumulative distribution."""
    if not dist.entries:
        raise EmptyDistribution(f"{dist.name}: distribution has no entries")
    u = rng.random()
    idx = bisect_right(dist._cumulative, u)
    return dist.entries[min(idx, len(dist.entries) - 1)][0]


@dataclass(frozen=True)
class ConditionalDistributionTable:
    """Distribution of one attribute, selected by the value of another.

    ``condition_key=None`` makes the table flat: ``default`` is always used.
    """

    attribute: str
    default: CategoricalDistribution
    condition_key: str | None = None
    rows: Mapping[str, CategoricalDistribution] = field(default_factory=dict)

    def select(self, assigned: Mapping[str, str]) -> CategoricalDistribution:
        if self.condition_key is None:
            return self.default
        value = assigned.get(self.condition_key)
        return self.rows.get(value, self.default) if value is not None else self.default

    @property
    def categories(self) -> tuple[str, ...]:
        out = list(self.default.categories)
        for dist in self.rows.values():
            out.extend(c for c in dist.categories if c not in out)
        return tuple(out)


Distribution = CategoricalDistribution | ConditionalDistributionTable


@dataclass(frozen=True)
class BasePersona:
    age: str
    gender: str
    occupation: str
    mbti: str

    def __post_init__(self) -> None:
        if not _MBTI_RE.match(self.mbti):
            raise ValueError(f"mbti {self.mbti!r} does not look like XXXX-A or XXXX-T")

    def as_dict(self) -> dict[str, str]:
        return {a: getattr(self, a) for a in BASE_ATTRIBUTES}


@dataclass(frozen=True)
class BackgroundProfile:
    education: str
    prefecture: str
    location: str
    family: str
    religion: str
    values: str
    income: str

    def as_dict(self) -> dict[str, str]:
        return {a: getattr(self, a) for a in BACKGROUND_ATTRIBUTES}


@dataclass
class Persona:
    id: str
    base: BasePersona
    background: BackgroundProfile
    validation: PlausibilityLabel | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def validated(self) -> bool:
        return self.validation is not None and self.validation.keep

    def attributes(self) -> dict[str, str]:
        return {**self.base.as_dict(), **self.background.as_dict()}

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.extra,
            "kind": "persona",
            "id": self.id,
            "base": self.base.as_dict(),
            "background": self.background.as_dict(),
            "validation": self.validation.value if self.validation else "pending",
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Persona":
        known = {"kind", "id", "base", "background", "validation"}
        validation = data.get("validation", "pending")
        return cls(
            id=str(data["id"]),
            base=BasePersona(**data["base"]),
            background=BackgroundProfile(**data["background"]),
            validation=None if validation == "pending" else PlausibilityLabel(validation),
            extra={k: v for k, v in data.items() if k not in known},
        )


Pair = tuple[tuple[str, str], tuple[str, str]]


def _canonical(pair) -> Pair:
    (a1, v1), (a2, v2) = pair
    if a1 == a2:
        raise ValueError(f"rule pair {pair!r} names the same attribute twice")
    first, second = sorted([(str(a1), str(v1)), (str(a2), str(v2))])
    return first, second


@dataclass(frozen=True)
class RuleFilter:
    """Pairwise co-occurrence rules over persona attributes.

    ``blocked_pairs`` are hard exclusions. When ``allowed_pairs`` lists any
    combination for an attribute pair, only listed combinations of that pair
    are permitted.
    """

    blocked_pairs: Sequence[Pair] = ()
    allowed_pairs: Sequence[Pair] = ()

    def __post_init__(self) -> None:
        blocked = tuple(_canonical(p) for p in self.blocked_pairs)
        allowed = tuple(_canonical(p) for p in self.allowed_pairs)
        both = set(blocked) & set(allowed)
        if both:
            raise ValueError(f"pairs both blocked and allowed: {sorted(both)}")
        object.__setattr__(self, "blocked_pairs", blocked)
        object.__setattr__(self, "allowed_pairs", allowed)
        whitelist: dict[tuple[str, str], set[tuple[str, str]]] = {}
        for (a1, v1), (a2, v2) in allowed:
            whitelist.setdefault((a1, a2), set()).add((v1, v2))
        object.__setattr__(self, "_blocked", frozenset(blocked))
        object.__setattr__(self, "_whitelist", whitelist)

    @property
    def attributes(self) -> set[str]:
        names = set()
        for (a1, _), (a2, _) in self.blocked_pairs + self.allowed_pairs:
            names.update((a1, a2))
        return names

    def violations(self, assignment: Mapping[str, str], involving: str | None = None) -> list[Pair]:
        """Every rule pair broken by ``assignment``.

        With ``involving`` set, only pairs that touch that attribute are checked.
        """
        found: list[Pair] = []
        for pair in self.blocked_pairs:
            (a1, v1), (a2, v2) = pair
            if involving is not None and involving not in (a1, a2):
                continue
            if assignment.get(a1) == v1 and assignment.get(a2) == v2:
                found.append(pair)
        for (a1, a2), combos in self._whitelist.items():
            if involving is not None and involving not in (a1, a2):
                continue
            if a1 in assignment and a2 in assignment:
                combo = (assignment[a1], assignment[a2])
                if combo not in combos:
                    found.append(((a1, combo[0]), (a2, combo[1])))
        return found


@dataclass(frozen=True)
class RuleCheck:
    passed: bool
    violations: list[Pair]

    def __bool__(self) -> bool:
        return self.passed


def check_rules(
    candidate: BasePersona | Persona | Mapping[str, str],
    rules: RuleFilter,
    attributes: Iterable[str] = PERSONA_ATTRIBUTES,
) -> RuleCheck:
    if isinstance(candidate, Persona):
        assignment = candidate.attributes()
    elif isinstance(candidate, BasePersona):
        assignment = candidate.as_dict()
    else:
        assignment = dict(candidate)
    known = set(attributes)
    unknown = sorted(set(assignment) - known)
    if unknown:
        raise UnknownAttribute(f"unconfigured attribute(s): {', '.join(unknown)}")
    found = rules.violations(assignment)
    return RuleCheck(passed=not found, violations=found)


def _filtered(
    dist: CategoricalDistribution,
    attribute: str,
    assigned: Mapping[str, str],
    rules: RuleFilter | None,
) -> CategoricalDistribution:
    if rules is None:
        return dist
    keep = [
        c for c in dist.support if not rules.violations({**assigned, attribute: c}, involving=attribute)
    ]
    if len(keep) == len(dist.support):
        return dist
    if not keep:
        context = ", ".join(f"{k}={v}" for k, v in assigned.items())
        raise InfeasibleConstraints(f"no admissible {attribute} given {context}")
    return dist.restricted(keep)


def sample_base_persona(
    distributions: Mapping[str, CategoricalDistribution],
    rules: RuleFilter | None,
    rng: RandomSource,
) -> BasePersona:
    assigned: dict[str, str] = {}
    for attribute in BASE_ATTRIBUTES:
        dist = _filtered(distributions[attribute], attribute, assigned, rules)
        assigned[attribute] = sample_categorical(dist, rng)
    return BasePersona(**assigned)


def sample_background(
    base: BasePersona,
    tables: Mapping[str, ConditionalDistributionTable],
    rng: RandomSource,
    rules: RuleFilter | None = None,
) -> BackgroundProfile:
    """Draw the seven background attributes for ``base``.

    Attributes are drawn in declaration order, so a table may condition on
    any base attribute or on a background attribute drawn before it.
    """
    assigned = base.as_dict()
    for attribute in BACKGROUND_ATTRIBUTES:
        dist = tables[attribute].select(assigned)
        dist = _filtered(dist, attribute, assigned, rules)
        assigned[attribute] = sample_categorical(dist, rng)
    return BackgroundProfile(**{a: assigned[a] for a in BACKGROUND_ATTRIBUTES})


def assemble_persona(base: BasePersona, background: BackgroundProfile, rng: Any = None) -> Persona:
    return Persona(id=fresh_id(rng), base=base, background=background, validation=None)
