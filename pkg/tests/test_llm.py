from __future__ import annotations

import json
import threading

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from personagen.errors import BackendUnavailable, EmptyCompletion, UnparsableJudgment
from personagen.labels import GENERATION_EMOTIONS, PlausibilityLabel
from personagen.llm import (
    EmotionSample,
    GenerationRequest,
    MockBackend,
    OpenAIChatBackend,
    RubricScore,
    build_prompt,
    count_sentences,
    generate_text,
    judge_plausibility,
    judge_rubric,
    map_bounded,
    parse_plausibility,
    parse_rubric,
    truncate_sentences,
)
from personagen.persona import BackgroundProfile, BasePersona, Persona
from personagen.scenario import ScenarioContext, render_scene_summary

PERSONA = Persona(
    "persona-1",
    BasePersona("Young Adults", "Female", "Freelancers", "ENFP-T"),
    BackgroundProfile("University", "Tokyo", "Urban area", "Single", "Atheist", "Progressive", "3M–5M JPY"),
)
SCENE = ScenarioContext("Café", "SNS posting", "Friend", "SNS", ("Casual tone", "Youth slang"))


def request(emotion="joy", **kw):
    return GenerationRequest(PERSONA, SCENE, emotion, "test-model", **kw)


# --- sentence counting ---------------------------------------------------------


@pytest.mark.parametrize(
    "text,expected",
    [
        ("", 0),
        ("   ", 0),
        ("I won! Really?", 2),
        ("Wait... what", 2),
        ("One sentence without a stop", 1),
        ('She said "yes." Then left.', 2),
        ("Really?!? No way.", 2),
        ("(Fine.) Okay!", 2),
        ("...", 0),
        ("Hi. . .", 1),
    ],
)
def test_count_sentences(text, expected):
    assert count_sentences(text) == expected


def test_truncate_keeps_leading_sentences():
    assert truncate_sentences("One. Two! Three? Four.", 2) == "One. Two!"
    assert count_sentences(truncate_sentences("A. B. C. D.", 2)) == 2


@settings(max_examples=200, deadline=None)
@given(st.lists(st.text(alphabet="abc xyz", min_size=1, max_size=8).filter(str.strip), min_size=0, max_size=8),
       st.lists(st.sampled_from([".", "!", "?", "...", "?!"]), min_size=8, max_size=8))
def test_count_matches_construction(words, stops):
    text = " ".join(w.strip() + s for w, s in zip(words, stops))
    assert count_sentences(text) == len(words)
    assert count_sentences(truncate_sentences(text, 2)) == min(2, len(words))


# --- prompt ---------------------------------------------------------------------


def test_prompt_contains_every_attribute_and_scene_label():
    prompt = build_prompt(PERSONA, SCENE, "surprise")
    for value in PERSONA.attributes().values():
        assert value in prompt
    for label in SCENE.labels():
        assert label in prompt
    assert render_scene_summary(SCENE) in prompt
    assert "surprise" in prompt
    assert "at most 2 short sentences" in prompt
    assert "Freelancers" in prompt
    assert prompt == build_prompt(PERSONA, SCENE, "surprise")


label = st.text(alphabet=st.characters(whitelist_categories=("L", "N"), whitelist_characters=" -"),
                min_size=1, max_size=15).filter(str.strip)


@settings(max_examples=60, deadline=None)
@given(attrs=st.lists(label, min_size=11, max_size=11), scene=st.lists(label, min_size=5, max_size=5),
       emotion=st.sampled_from(GENERATION_EMOTIONS))
def test_prompt_totality(attrs, scene, emotion):
    persona = Persona(
        "x", BasePersona(attrs[0], attrs[1], attrs[2], "ISTJ-A"), BackgroundProfile(*attrs[4:])
    )
    ctx = ScenarioContext(*scene[:4], style=(scene[4],))
    prompt = build_prompt(persona, ctx, emotion)
    for part in [*attrs[:3], "ISTJ-A", *attrs[4:], *scene, emotion]:
        assert part in prompt


# --- generation -----------------------------------------------------------------


def test_mock_generation_is_deterministic_and_tagged():
    a = generate_text(request(), MockBackend(seed=3), rng=np.random.default_rng(0))
    b = generate_text(request(), MockBackend(seed=3), rng=np.random.default_rng(0))
    assert a.text == b.text and a.id == b.id
    assert "joy" in a.text
    assert count_sentences(a.text) <= 2
    assert not a.truncated
    assert a.persona_id == PERSONA.id
    c = generate_text(request(), MockBackend(seed=4), rng=np.random.default_rng(0))
    assert c.text != a.text


def test_mock_text_carries_each_emotion():
    backend = MockBackend(seed=0)
    for emotion in GENERATION_EMOTIONS:
        assert emotion in generate_text(request(emotion), backend).text


def test_overlong_output_retried_then_truncated():
    backend = MockBackend(seed=1, sentences=4)
    sample = generate_text(request(), backend)
    assert sample.truncated
    assert count_sentences(sample.text) == 2
    assert [task for task, _ in backend.calls] == ["generate", "generate"]
    retry_messages = backend.calls[1][1]
    assert "at most 2" in retry_messages[-1]["content"]


def test_retry_that_fixes_length_is_not_truncated():
    replies = iter(["One. Two. Three. Four.", "Short and happy joy."])
    backend = MockBackend(generation=lambda _prompt: next(replies))
    sample = generate_text(request(), backend)
    assert sample.text == "Short and happy joy."
    assert not sample.truncated


def test_blank_completion_raises():
    with pytest.raises(EmptyCompletion):
        generate_text(request(), MockBackend(generation=lambda _p: "   "))


def test_request_validation():
    with pytest.raises(ValueError):
        request(temperature=2.5)
    with pytest.raises(ValueError):
        request(max_sentences=0)
    assert request().temperature == 1.2 and request().max_sentences == 2


# --- plausibility ---------------------------------------------------------------


@pytest.mark.parametrize(
    "raw,expected",
    [
        ("natural", PlausibilityLabel.NATURAL),
        ("IMPLAUSIBLE.", PlausibilityLabel.IMPLAUSIBLE),
        ("Rare-but-plausible!", PlausibilityLabel.RARE_BUT_PLAUSIBLE),
        ("  Label: rare but plausible ", PlausibilityLabel.RARE_BUT_PLAUSIBLE),
        ("This seems entirely reasonable to me", None),
        ("natural or implausible", None),
        ("unnatural", None),
    ],
)
def test_parse_plausibility(raw, expected):
    assert parse_plausibility(raw) is expected


def test_judge_natural():
    assert judge_plausibility(PERSONA, MockBackend(plausibility="natural")) is PlausibilityLabel.NATURAL


def test_judge_normalizes_noise():
    assert judge_plausibility(PERSONA, MockBackend(plausibility="IMPLAUSIBLE.")) is PlausibilityLabel.IMPLAUSIBLE


def test_judge_reprompts_once_then_fails():
    backend = MockBackend(plausibility="I think this person is fine overall")
    with pytest.raises(UnparsableJudgment):
        judge_plausibility(PERSONA, backend)
    assert len(backend.calls) == 2
    assert "ONLY" in backend.calls[1][1][-1]["content"]


def test_judge_recovers_on_strict_reprompt():
    backend = MockBackend(plausibility=["hmm, hard to say", "rare but plausible"])
    assert judge_plausibility(PERSONA, backend) is PlausibilityLabel.RARE_BUT_PLAUSIBLE


def test_scene_judgment_includes_persona_and_scene():
    backend = MockBackend()
    judge_plausibility((PERSONA, SCENE), backend)
    prompt = backend.calls[0][1][-1]["content"]
    assert "Freelancers" in prompt and "SNS posting" in prompt


# --- rubric ---------------------------------------------------------------------


def _sample(text="Such joy today!"):
    return EmotionSample("s1", PERSONA.id, SCENE, "joy", text, "m", 1.2)


def test_rubric_parse():
    assert judge_rubric(_sample(), MockBackend(rubric="5,5,5,5")) == RubricScore(5, 5, 5, 5)
    assert parse_rubric("Scores: 4, 3 ,5,2") == RubricScore(4, 3, 5, 2)
    assert parse_rubric("4/3/5/2") == RubricScore(4, 3, 5, 2)


@pytest.mark.parametrize("raw", ["0,5,5,5", "5,5,6,5", "5,5,5", "all good"])
def test_rubric_out_of_range_or_missing(raw):
    with pytest.raises(UnparsableJudgment):
        judge_rubric(_sample(), MockBackend(rubric=raw))


def test_rubric_score_type_guard():
    with pytest.raises(ValueError):
        RubricScore(0, 1, 2, 3)


def test_rubric_batch_mean_matches_hand_computation():
    replies = ["5,4,3,2", "3,4,5,4", "4,4,4,3"]
    backend = MockBackend(rubric=replies)
    scores = [judge_rubric(_sample(), backend) for _ in replies]
    means = np.mean([s.as_tuple() for s in scores], axis=0)
    assert means.tolist() == [4.0, 4.0, 4.0, 3.0]


# --- sample records -------------------------------------------------------------


def test_sample_round_trip():
    s = _sample()
    s.plausibility = PlausibilityLabel.NATURAL
    s.rubric = RubricScore(5, 4, 3, 2)
    s.extra["batch"] = 7
    data = json.loads(json.dumps(s.to_dict()))
    assert data["created_at"].endswith("+00:00")
    back = EmotionSample.from_dict(data)
    assert back == s


def test_sample_rejects_empty_text():
    with pytest.raises(ValueError):
        _sample("  ")


# --- wire protocol --------------------------------------------------------------


def _client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_chat_wire_format(monkeypatch):
    monkeypatch.setenv("PG_TEST_KEY", "sk-test")
    seen = {}

    def handler(req: httpx.Request) -> httpx.Response:
        seen["url"] = str(req.url)
        seen["auth"] = req.headers.get("authorization")
        seen["body"] = json.loads(req.content)
        return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": "Hello joy."}}]})

    backend = OpenAIChatBackend("http://llm.local/v1/", api_key_env="PG_TEST_KEY", client=_client(handler))
    out = backend.complete([{"role": "user", "content": "hi"}], model="m1", temperature=1.2)
    assert out == "Hello joy."
    assert seen["url"] == "http://llm.local/v1/chat/completions"
    assert seen["auth"] == "Bearer sk-test"
    assert seen["body"] == {"model": "m1", "temperature": 1.2, "messages": [{"role": "user", "content": "hi"}]}


def test_retries_on_server_errors_then_succeeds():
    statuses = iter([500, 429, 200])
    sleeps = []

    def handler(req):
        code = next(statuses)
        if code != 200:
            return httpx.Response(code)
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

    backend = OpenAIChatBackend("http://x", client=_client(handler), backoff=0.5, sleep=sleeps.append)
    assert backend.complete([], model="m", temperature=0) == "ok"
    assert sleeps == [0.5, 1.0]


def test_client_error_not_retried():
    calls = []

    def handler(req):
        calls.append(1)
        return httpx.Response(401, text="bad key")

    backend = OpenAIChatBackend("http://x", client=_client(handler), sleep=lambda s: None)
    with pytest.raises(BackendUnavailable):
        backend.complete([], model="m", temperature=0)
    assert len(calls) == 1


def test_unreachable_endpoint_bounded_retries():
    calls = []

    def handler(req):
        calls.append(1)
        raise httpx.ConnectError("refused", request=req)

    backend = OpenAIChatBackend("http://x", client=_client(handler), max_retries=3, sleep=lambda s: None)
    with pytest.raises(BackendUnavailable):
        generate_text(request(), backend)
    assert len(calls) == 4


def test_real_unreachable_socket():
    backend = OpenAIChatBackend("http://127.0.0.1:9/v1", timeout=0.5, max_retries=1, backoff=0.0)
    with pytest.raises(BackendUnavailable):
        backend.complete([{"role": "user", "content": "x"}], model="m", temperature=0)


def test_malformed_response():
    backend = OpenAIChatBackend("http://x", client=_client(lambda r: httpx.Response(200, json={"oops": 1})))
    with pytest.raises(BackendUnavailable):
        backend.complete([], model="m", temperature=0)


# --- concurrency ----------------------------------------------------------------


def test_map_bounded_preserves_order_and_limit():
    active = []
    peak = [0]
    lock = threading.Lock()

    def work(x):
        with lock:
            active.append(x)
            peak[0] = max(peak[0], len(active))
        with lock:
            active.remove(x)
        return x * x

    assert map_bounded(work, range(50), max_in_flight=4) == [x * x for x in range(50)]
    assert peak[0] <= 4


def test_map_bounded_exceptions():
    def work(x):
        if x == 3:
            raise ValueError("boom")
        return x

    out = map_bounded(work, range(5), 2, return_exceptions=True)
    assert isinstance(out[3], ValueError) and out[4] == 4
    with pytest.raises(ValueError):
        map_bounded(work, range(5), 2)
