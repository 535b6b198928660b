"""Run configuration: schema, loading and cross-reference validation.

The configuration is a single YAML document (see ``data/default_config.yaml``
for the shipped defaults). :func:`load_config` reports malformed YAML as a
:class:`ParseError` carrying the line number, and every schema or
consistency problem at once as a :class:`ValidationError`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..classify import Hyperparams, SplitSpec
from ..errors import ParseError, ValidationError
from ..labels import GENERATION_EMOTIONS, GOLDEN_EMOTIONS
from ..persona import (
    BACKGROUND_ATTRIBUTES,
    BASE_ATTRIBUTES,
    MBTI_TYPES,
    PERSONA_ATTRIBUTES,
    CategoricalDistribution,
    ConditionalDistributionTable,
    RuleFilter,
)
from ..scenario import SCENE_ELEMENTS, STYLE_DIMENSIONS, ScenarioConfig, ScenarioConstraint

DEFAULT_CONFIG_NAME = "default_config.yaml"
BACKENDS = ("mock", "remote")


@dataclass(frozen=True)
class TaskModel:
    model: str
    temperature: float


@dataclass(frozen=True)
class MockSettings:
    plausibility: str | list[str] = "natural"
    rubric: str | list[str] = "5,5,5,5"
    sentences: int = 2


@dataclass(frozen=True)
class LLMSettings:
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 30.0
    max_retries: int = 3
    backoff: float = 0.5
    parallelism: int = 8
    resample_cap: int = 10
    validate_scenarios: bool = True
    max_sentences: int = 2
    generation: TaskModel = TaskModel("gpt-4.1-mini", 1.2)
    plausibility: TaskModel = TaskModel("gpt-4.1-mini", 0.0)
    rubric: TaskModel = TaskModel("gpt-4o", 0.0)
    mock: MockSettings = MockSettings()


@dataclass(frozen=True)
class EmbeddingSettings:
    provider: str = "mock"
    dim: int = 32
    seed: int = 0
    model: str = "all-MiniLM-L6-v2"
    base_url: str = "http://localhost:8000/v1"
    api_key_env: str = "OPENAI_API_KEY"
    batch_size: int = 64
    parallelism: int = 8
    timeout: float = 30.0
    max_retries: int = 3


@dataclass(frozen=True)
class MetricSettings:
    k_clusters: int = 20
    k_bins: int = 20
    beta: float = 8.0
    epsilon: float = 1e-6
    seed: int = 0


@dataclass(frozen=True)
class ClassifySettings:
    split: SplitSpec = SplitSpec()
    hyperparams: Hyperparams = Hyperparams()


@dataclass(frozen=True)
class GoldenSettings:
    emotion_set: tuple[str, ...] = GOLDEN_EMOTIONS
    text_column: str = "text"
    label_column: str = "label"
    delimiter: str = ","
    label_map: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class PersonaSettings:
    base: Mapping[str, CategoricalDistribution]
    background: Mapping[str, ConditionalDistributionTable]
    rules: RuleFilter = RuleFilter()

    def categories(self, attribute: str) -> tuple[str, ...]:
        if attribute in self.base:
            return self.base[attribute].categories
        return self.background[attribute].categories


@dataclass(frozen=True)
class RunConfig:
    seed: int
    emotion_set: tuple[str, ...]
    samples_per_emotion: int
    backend: str
    persona: PersonaSettings
    scenario: ScenarioConfig
    constraint: ScenarioConstraint
    llm: LLMSettings = LLMSettings()
    embedding: EmbeddingSettings = EmbeddingSettings()
    metrics: MetricSettings = MetricSettings()
    classify: ClassifySettings = ClassifySettings()
    judge_failure_threshold: float = 0.1
    golden: GoldenSettings = GoldenSettings()
    source: str = "<memory>"


# --- reading helpers ---------------------------------------------------------


class _Problems(list):
    def add(self, where: str, message: str) -> None:
        self.append(f"{where}: {message}" if where else message)


def _section(data: Any, where: str, problems: _Problems) -> dict:
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        problems.add(where, f"expected a mapping, got {type(data).__name__}")
        return {}
    return dict(data)


def _unknown_keys(data: Mapping, allowed, where: str, problems: _Problems) -> None:
    for key in data:
        if key not in allowed:
            problems.add(where, f"unknown key {key!r}")


def _number(data, key, default, where, problems, *, kind=float, low=None, high=None, open_low=False):
    value = data.get(key, default)
    label = f"{where}.{key}" if where else key
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.add(label, f"expected a number, got {value!r}")
        return default
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            problems.add(label, f"expected an integer, got {value!r}")
            return default
        value = int(value)
    else:
        value = float(value)
        if not math.isfinite(value):
            problems.add(label, "must be finite")
            return default
    if low is not None and (value < low or (open_low and value == low)):
        problems.add(label, f"must be {'>' if open_low else '>='} {low}, got {value}")
        return default
    if high is not None and value > high:
        problems.add(label, f"must be <= {high}, got {value}")
        return default
    return value


def _text(data, key, default, where, problems) -> str:
    value = data.get(key, default)
    if not isinstance(value, str) or not value:
        problems.add(f"{where}.{key}", f"expected a non-empty string, got {value!r}")
        return default
    return value


def _flag(data, key, default, where, problems) -> bool:
    value = data.get(key, default)
    if not isinstance(value, bool):
        problems.add(f"{where}.{key}", f"expected true/false, got {value!r}")
        return default
    return value


def _distribution(name: str, raw: Any, where: str, problems: _Problems) -> CategoricalDistribution | None:
    if not isinstance(raw, Mapping) or not raw:
        problems.add(where, "expected a non-empty mapping of category -> probability")
        return None
    for label, p in raw.items():
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            problems.add(where, f"probability for {label!r} is not a number: {p!r}")
            return None
    try:
        return CategoricalDistribution.from_mapping(name, {str(k): float(v) for k, v in raw.items()})
    except ValueError as exc:
        problems.add(where, str(exc))
        return None


def _is_table(raw: Any) -> bool:
    return isinstance(raw, Mapping) and ("condition_key" in raw or "rows" in raw)


def _table(name: str, raw: Any, where: str, problems: _Problems) -> ConditionalDistributionTable | None:
    if not _is_table(raw):
        dist = _distribution(name, raw, where, problems)
        return None if dist is None else ConditionalDistributionTable(name, dist)
    _unknown_keys(raw, ("condition_key", "rows", "default"), where, problems)
    key = raw.get("condition_key")
    if not isinstance(key, str) or not key:
        problems.add(where, f"condition_key must name an attribute, got {key!r}")
        return None
    rows_raw = raw.get("rows") or {}
    if not isinstance(rows_raw, Mapping):
        problems.add(f"{where}.rows", "expected a mapping of condition value -> distribution")
        return None
    if "default" not in raw:
        problems.add(where, "conditional table needs a default distribution")
        return None
    default = _distribution(name, raw["default"], f"{where}.default", problems)
    rows = {}
    for value, dist_raw in rows_raw.items():
        dist = _distribution(name, dist_raw, f"{where}.rows.{value}", problems)
        if dist is not None:
            rows[str(value)] = dist
    if default is None:
        return None
    return ConditionalDistributionTable(name, default, key, rows)


def _check_condition(
    table: ConditionalDistributionTable,
    available: Mapping[str, tuple[str, ...]],
    where: str,
    problems: _Problems,
) -> None:
    """``available`` maps each attribute the table may condition on to its categories."""
    key = table.condition_key
    if key is None:
        return
    if key not in available:
        options = ", ".join(sorted(available)) or "none"
        problems.add(where, f"condition_key {key!r} is not a configured attribute available here ({options})")
        return
    known = set(available[key])
    for value in table.rows:
        if value not in known:
            problems.add(where, f"row {value!r} is not a category of {key!r}")


# --- sections ----------------------------------------------------------------


def _persona(data: Any, problems: _Problems) -> PersonaSettings | None:
    sec = _section(data, "persona", problems)
    _unknown_keys(sec, ("base", "background", "rules"), "persona", problems)
    base_raw = _section(sec.get("base"), "persona.base", problems)
    bg_raw = _section(sec.get("background"), "persona.background", problems)
    base: dict[str, CategoricalDistribution] = {}
    for attr in BASE_ATTRIBUTES:
        if attr not in base_raw:
            problems.add("persona.base", f"missing attribute {attr!r}")
            continue
        dist = _distribution(attr, base_raw[attr], f"persona.base.{attr}", problems)
        if dist is not None:
            base[attr] = dist
    _unknown_keys(base_raw, BASE_ATTRIBUTES, "persona.base", problems)
    if "mbti" in base:
        bad = sorted(set(base["mbti"].categories) - set(MBTI_TYPES))
        if bad:
            problems.add("persona.base.mbti", f"labels outside the 32 MBTI types: {bad}")

    available = {a: d.categories for a, d in base.items()}
    background: dict[str, ConditionalDistributionTable] = {}
    for attr in BACKGROUND_ATTRIBUTES:
        where = f"persona.background.{attr}"
        if attr not in bg_raw:
            problems.add("persona.background", f"missing attribute {attr!r}")
            continue
        table = _table(attr, bg_raw[attr], where, problems)
        if table is not None:
            # Background attributes are drawn in order, so only earlier ones can condition.
            _check_condition(table, available, where, problems)
            background[attr] = table
            available[attr] = table.categories
    _unknown_keys(bg_raw, BACKGROUND_ATTRIBUTES, "persona.background", problems)

    rules = _rules(sec.get("rules"), available, problems)
    if len(base) < len(BASE_ATTRIBUTES) or len(background) < len(BACKGROUND_ATTRIBUTES):
        return None
    return PersonaSettings(base, background, rules or RuleFilter())


def _rule_pairs(entries: Any, where: str, categories: Mapping[str, tuple[str, ...]], problems: _Problems):
    if entries is None:
        return []
    if not isinstance(entries, list):
        problems.add(where, "expected a list of {attribute: value(s), attribute: value(s)} entries")
        return []
    pairs = []
    for i, entry in enumerate(entries):
        at = f"{where}[{i}]"
        if not isinstance(entry, Mapping) or len(entry) != 2:
            problems.add(at, "each rule must name exactly two attributes")
            continue
        sides = []
        ok = True
        for attr, values in entry.items():
            values = values if isinstance(values, list) else [values]
            if attr not in PERSONA_ATTRIBUTES:
                problems.add(at, f"unknown attribute {attr!r}")
                ok = False
                continue
            known = set(categories.get(attr, ()))
            for v in values:
                if str(v) not in known:
                    problems.add(at, f"{v!r} is not a category of {attr!r}")
                    ok = False
            sides.append([(str(attr), str(v)) for v in values])
        if ok and len(sides) == 2:
            pairs.extend(itertools.product(sides[0], sides[1]))
    return pairs


def _rules(data: Any, categories: Mapping[str, tuple[str, ...]], problems: _Problems) -> RuleFilter | None:
    sec = _section(data, "persona.rules", problems)
    _unknown_keys(sec, ("blocked", "allowed"), "persona.rules", problems)
    blocked = _rule_pairs(sec.get("blocked"), "persona.rules.blocked", categories, problems)
    allowed = _rule_pairs(sec.get("allowed"), "persona.rules.allowed", categories, problems)
    try:
        return RuleFilter(blocked, allowed)
    except ValueError as exc:
        problems.add("persona.rules", str(exc))
        return None


def _scenario(data: Any, persona: PersonaSettings | None, problems: _Problems):
    sec = _section(data, "scenario", problems)
    _unknown_keys(sec, ("elements", "style", "constraint"), "scenario", problems)
    available: dict[str, tuple[str, ...]] = {}
    if persona is not None:
        available = {a: persona.categories(a) for a in PERSONA_ATTRIBUTES}
    groups = {}
    for group, names in (("elements", SCENE_ELEMENTS), ("style", STYLE_DIMENSIONS)):
        raw = _section(sec.get(group), f"scenario.{group}", problems)
        out = {}
        for name in names:
            where = f"scenario.{group}.{name}"
            if name not in raw:
                problems.add(f"scenario.{group}", f"missing {name!r}")
                continue
            table = _table(name, raw[name], where, problems)
            if table is None:
                continue
            if table.condition_key is None:
                out[name] = table.default
            else:
                if persona is not None:
                    _check_condition(table, available, where, problems)
                out[name] = table
        _unknown_keys(raw, names, f"scenario.{group}", problems)
        groups[group] = out
    config = ScenarioConfig(groups["elements"], groups["style"])

    constraint_raw = _section(sec.get("constraint"), "scenario.constraint", problems)
    restrict = {}
    for name, allowed in constraint_raw.items():
        allowed = allowed if isinstance(allowed, list) else [allowed]
        if not allowed:
            problems.add("scenario.constraint", f"restriction for {name!r} is empty")
            continue
        restrict[str(name)] = frozenset(str(a) for a in allowed)
    constraint = ScenarioConstraint(restrict)
    for msg in constraint.problems(config):
        problems.add("scenario.constraint", msg)
    return config, constraint


def _emotion_set(raw: Any, problems: _Problems) -> tuple[str, ...]:
    if raw in (None, "generation"):
        return GENERATION_EMOTIONS
    if raw == "golden":
        return GOLDEN_EMOTIONS
    if isinstance(raw, list) and raw and all(isinstance(e, str) and e.strip() for e in raw):
        if len(set(raw)) != len(raw):
            problems.add("emotion_set", "contains duplicate labels")
        return tuple(raw)
    problems.add("emotion_set", f"expected 'generation', 'golden' or a list of labels, got {raw!r}")
    return GENERATION_EMOTIONS


def _task(data: Any, where: str, default: TaskModel, problems: _Problems) -> TaskModel:
    sec = _section(data, where, problems)
    _unknown_keys(sec, ("model", "temperature", "max_sentences"), where, problems)
    return TaskModel(
        _text(sec, "model", default.model, where, problems),
        _number(sec, "temperature", default.temperature, where, problems, low=0.0, high=2.0),
    )


def _responder_spec(value: Any, default, where: str, problems: _Problems):
    if isinstance(value, str) and value:
        return value
    if isinstance(value, list) and value and all(isinstance(v, str) for v in value):
        return list(value)
    problems.add(where, f"expected a string or list of strings, got {value!r}")
    return default


def _llm(data: Any, problems: _Problems) -> LLMSettings:
    w = "llm"
    sec = _section(data, w, problems)
    d = LLMSettings()
    _unknown_keys(
        sec,
        ("base_url", "api_key_env", "timeout", "max_retries", "backoff", "parallelism",
         "resample_cap", "validate_scenarios", "generation", "plausibility", "rubric", "mock"),
        w,
        problems,
    )
    gen_raw = _section(sec.get("generation"), "llm.generation", problems)
    mock_raw = _section(sec.get("mock"), "llm.mock", problems)
    _unknown_keys(mock_raw, ("plausibility", "rubric", "sentences"), "llm.mock", problems)
    mock = MockSettings(
        _responder_spec(mock_raw.get("plausibility", "natural"), "natural", "llm.mock.plausibility", problems),
        _responder_spec(mock_raw.get("rubric", "5,5,5,5"), "5,5,5,5", "llm.mock.rubric", problems),
        _number(mock_raw, "sentences", 2, "llm.mock", problems, kind=int, low=1),
    )
    return LLMSettings(
        base_url=_text(sec, "base_url", d.base_url, w, problems),
        api_key_env=_text(sec, "api_key_env", d.api_key_env, w, problems),
        timeout=_number(sec, "timeout", d.timeout, w, problems, low=0.0, open_low=True),
        max_retries=_number(sec, "max_retries", d.max_retries, w, problems, kind=int, low=0),
        backoff=_number(sec, "backoff", d.backoff, w, problems, low=0.0),
        parallelism=_number(sec, "parallelism", d.parallelism, w, problems, kind=int, low=1),
        resample_cap=_number(sec, "resample_cap", d.resample_cap, w, problems, kind=int, low=1),
        validate_scenarios=_flag(sec, "validate_scenarios", d.validate_scenarios, w, problems),
        max_sentences=_number(gen_raw, "max_sentences", d.max_sentences, "llm.generation", problems, kind=int, low=1),
        generation=_task(gen_raw, "llm.generation", d.generation, problems),
        plausibility=_task(sec.get("plausibility"), "llm.plausibility", d.plausibility, problems),
        rubric=_task(sec.get("rubric"), "llm.rubric", d.rubric, problems),
        mock=mock,
    )


def _embedding(data: Any, problems: _Problems) -> EmbeddingSettings:
    w = "embedding"
    sec = _section(data, w, problems)
    d = EmbeddingSettings()
    _unknown_keys(sec, tuple(EmbeddingSettings.__dataclass_fields__), w, problems)
    provider = sec.get("provider", d.provider)
    if provider not in BACKENDS:
        problems.add("embedding.provider", f"expected one of {BACKENDS}, got {provider!r}")
        provider = d.provider
    return EmbeddingSettings(
        provider=provider,
        dim=_number(sec, "dim", d.dim, w, problems, kind=int, low=1),
        seed=_number(sec, "seed", d.seed, w, problems, kind=int),
        model=_text(sec, "model", d.model, w, problems),
        base_url=_text(sec, "base_url", d.base_url, w, problems),
        api_key_env=_text(sec, "api_key_env", d.api_key_env, w, problems),
        batch_size=_number(sec, "batch_size", d.batch_size, w, problems, kind=int, low=1),
        parallelism=_number(sec, "parallelism", d.parallelism, w, problems, kind=int, low=1),
        timeout=_number(sec, "timeout", d.timeout, w, problems, low=0.0, open_low=True),
        max_retries=_number(sec, "max_retries", d.max_retries, w, problems, kind=int, low=0),
    )


def _metrics(data: Any, problems: _Problems) -> MetricSettings:
    w = "metrics"
    sec = _section(data, w, problems)
    d = MetricSettings()
    _unknown_keys(sec, tuple(MetricSettings.__dataclass_fields__), w, problems)
    return MetricSettings(
        k_clusters=_number(sec, "k_clusters", d.k_clusters, w, problems, kind=int, low=1),
        k_bins=_number(sec, "k_bins", d.k_bins, w, problems, kind=int, low=1),
        beta=_number(sec, "beta", d.beta, w, problems, low=0.0, open_low=True),
        epsilon=_number(sec, "epsilon", d.epsilon, w, problems, low=0.0, open_low=True),
        seed=_number(sec, "seed", d.seed, w, problems, kind=int),
    )


def _classify(data: Any, problems: _Problems) -> ClassifySettings:
    w = "classify"
    sec = _section(data, w, problems)
    _unknown_keys(sec, ("train_fraction", "stratified", "seed", "learning_rate", "l2", "epochs"), w, problems)
    sd, hd = SplitSpec(), Hyperparams()
    fraction = _number(sec, "train_fraction", sd.train_fraction, w, problems, low=0.0, open_low=True)
    if fraction >= 1.0:
        problems.add("classify.train_fraction", "must be below 1")
        fraction = sd.train_fraction
    seed = _number(sec, "seed", sd.seed, w, problems, kind=int)
    return ClassifySettings(
        SplitSpec(fraction, seed, _flag(sec, "stratified", sd.stratified, w, problems)),
        Hyperparams(
            learning_rate=_number(sec, "learning_rate", hd.learning_rate, w, problems, low=0.0, open_low=True),
            l2=_number(sec, "l2", hd.l2, w, problems, low=0.0),
            epochs=_number(sec, "epochs", hd.epochs, w, problems, kind=int, low=1),
            seed=seed,
        ),
    )


def _golden(data: Any, problems: _Problems) -> GoldenSettings:
    w = "golden"
    sec = _section(data, w, problems)
    d = GoldenSettings()
    _unknown_keys(sec, ("emotion_set", "text_column", "label_column", "delimiter", "label_map"), w, problems)
    emotions = sec.get("emotion_set", list(d.emotion_set))
    if not (isinstance(emotions, list) and emotions and all(isinstance(e, str) for e in emotions)):
        problems.add("golden.emotion_set", f"expected a list of labels, got {emotions!r}")
        emotions = list(d.emotion_set)
    label_map = _section(sec.get("label_map"), "golden.label_map", problems)
    for source, target in label_map.items():
        if target not in emotions:
            problems.add("golden.label_map", f"{source!r} maps to {target!r}, outside the golden set")
    delimiter = sec.get("delimiter", d.delimiter)
    if not isinstance(delimiter, str) or len(delimiter) != 1:
        problems.add("golden.delimiter", f"expected a single character, got {delimiter!r}")
        delimiter = d.delimiter
    return GoldenSettings(
        emotion_set=tuple(emotions),
        text_column=_text(sec, "text_column", d.text_column, w, problems),
        label_column=_text(sec, "label_column", d.label_column, w, problems),
        delimiter=delimiter,
        label_map={str(k): str(v) for k, v in label_map.items()},
    )


TOP_LEVEL_KEYS = (
    "seed", "backend", "emotion_set", "samples_per_emotion", "persona", "scenario",
    "llm", "embedding", "metrics", "classify", "judge", "golden",
)


def config_from_dict(data: Any, source: str = "<memory>") -> RunConfig:
    """Validate an already-parsed configuration document."""
    problems = _Problems()
    top = _section(data, "", problems)
    _unknown_keys(top, TOP_LEVEL_KEYS, "", problems)
    seed = _number(top, "seed", 0, "", problems, kind=int)
    backend = top.get("backend", "mock")
    if backend not in BACKENDS:
        problems.add("backend", f"expected one of {BACKENDS}, got {backend!r}")
        backend = "mock"
    emotions = _emotion_set(top.get("emotion_set"), problems)
    per_emotion = _number(top, "samples_per_emotion", 500, "", problems, kind=int, low=1, open_low=False)
    persona = _persona(top.get("persona"), problems)
    scenario, constraint = _scenario(top.get("scenario"), persona, problems)
    llm = _llm(top.get("llm"), problems)
    embedding = _embedding(top.get("embedding"), problems)
    metrics = _metrics(top.get("metrics"), problems)
    classify = _classify(top.get("classify"), problems)
    judge = _section(top.get("judge"), "judge", problems)
    _unknown_keys(judge, ("failure_threshold",), "judge", problems)
    threshold = _number(judge, "failure_threshold", 0.1, "judge", problems, low=0.0, high=1.0)
    golden = _golden(top.get("golden"), problems)
    if problems:
        raise ValidationError(list(problems))
    assert persona is not None
    return RunConfig(
        seed=seed,
        emotion_set=emotions,
        samples_per_emotion=per_emotion,
        backend=backend,
        persona=persona,
        scenario=scenario,
        constraint=constraint,
        llm=llm,
        embedding=embedding,
        metrics=metrics,
        classify=classify,
        judge_failure_threshold=threshold,
        golden=golden,
        source=source,
    )


def default_config_text() -> str:
    return resources.files("personagen.data").joinpath(DEFAULT_CONFIG_NAME).read_text(encoding="utf-8")


def parse_yaml(text: str, source: str = "<string>") -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        where = f"{source}:{line}" if line is not None else source
        err = ParseError(f"{where}: {problem}")
        err.line = line
        raise err from exc


def load_config(path: str | Path | None = None) -> RunConfig:
    """Load and validate a run configuration; ``None`` loads the shipped default."""
    if path is None:
        return config_from_dict(parse_yaml(default_config_text(), DEFAULT_CONFIG_NAME), DEFAULT_CONFIG_NAME)
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return config_from_dict(parse_yaml(text, str(path)), str(path))
