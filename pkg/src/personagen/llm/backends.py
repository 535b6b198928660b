"""Chat-completion backends: an OpenAI-compatible HTTP client and an offline mock."""

from __future__ import annotations

import hashlib
import itertools
import re
import threading
import time
from typing import Callable, Protocol, Sequence

import httpx

from .._http import auth_headers, post_json
from ..errors import BackendUnavailable

Messages = list[dict[str, str]]


class LLMBackend(Protocol):
    def complete(
        self, messages: Messages, *, model: str, temperature: float, task: str = "generate"
    ) -> str:
        """Return the assistant reply for a single-turn conversation.

        ``task`` is a hint ("generate", "plausibility", "rubric") that remote
        backends ignore; the mock uses it to pick a responder.
        """
        ...


class OpenAIChatBackend:
    """Client for any server speaking the ``/chat/completions`` JSON protocol.

    The API key is read from the environment variable named by
    ``api_key_env``; it is never accepted as an argument.
    """

    def __init__(
        self,
        base_url: str = "https://api.openai.com/v1",
        api_key_env: str = "OPENAI_API_KEY",
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.5,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.api_key_env = api_key_env
        self.max_retries = max_retries
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep

    def complete(
        self, messages: Messages, *, model: str, temperature: float, task: str = "generate"
    ) -> str:
        payload = {"model": model, "temperature": temperature, "messages": messages}
        data = post_json(
            self._client,
            self.url,
            payload,
            auth_headers(self.api_key_env),
            max_retries=self.max_retries,
            backoff=self.backoff,
            sleep=self._sleep,
        )
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"malformed chat completion response: {exc!r}") from exc
        return content or ""


Responder = str | Sequence[str] | Callable[[str], str]

_OPENERS = ("Honestly", "Wow", "Well", "Right now", "Today", "Somehow", "Seriously", "Man")
_TEMPLATES = (
    "{opener}, I feel so much {emotion} here at {location}",
    "{opener}, this {emotion} is hard to hide while {activity}",
    "All this {emotion} came up while talking with {interlocutor}",
    "I can't shake the {emotion} I feel today",
    "{opener}, {emotion} is the only word for how I feel right now",
    "There is real {emotion} in every message I send on {medium}",
    "Nothing prepared me for this much {emotion}",
    "My {emotion} just keeps growing the longer I sit at {location}",
    "{opener}, I never expected to feel {emotion} over something this small",
    "It is pure {emotion}, and everyone at {location} can probably tell",
)
_ENDINGS = (".", "!", ".", ".", "!")
_FIELD_RE = {
    "emotion": re.compile(r"^Target emotion: (.+)$", re.M),
    "location": re.compile(r"^- Location: (.+)$", re.M),
    "activity": re.compile(r"^- Activity: (.+)$", re.M),
    "interlocutor": re.compile(r"^- Talking to: (.+)$", re.M),
    "medium": re.compile(r"^- Medium: (.+)$", re.M),
}
_TERMINALS = re.compile(r"[.!?…]+")


class MockBackend:
    """Deterministic offline stand-in for a chat model.

    Generation replies are a pure function of (seed, prompt) and always
    contain the target emotion label. Judge replies come from the configured
    responders: a fixed string, a sequence cycled call by call, or a callable
    receiving the prompt text.
    """

    def __init__(
        self,
        seed: int = 0,
        plausibility: Responder = "natural",
        rubric: Responder = "5,5,5,5",
        sentences: int = 2,
        generation: Callable[[str], str] | None = None,
    ):
        self.seed = seed
        self.sentences = sentences
        self._generation = generation
        self._responders = {
            "plausibility": _responder(plausibility),
            "rubric": _responder(rubric),
        }
        self.calls: list[tuple[str, Messages]] = []
        self._lock = threading.Lock()

    def complete(
        self, messages: Messages, *, model: str, temperature: float, task: str = "generate"
    ) -> str:
        with self._lock:
            self.calls.append((task, list(messages)))
        prompt = messages[-1]["content"]
        if task in self._responders:
            with self._lock:
                return self._responders[task](prompt)
        if self._generation is not None:
            return self._generation(prompt)
        # The first user turn carries the scene; retries append instructions.
        original = next(m["content"] for m in messages if m["role"] == "user")
        return self._generate(original)

    def _generate(self, prompt: str) -> str:
        fields = {}
        for name, rx in _FIELD_RE.items():
            m = rx.search(prompt)
            fields[name] = _TERMINALS.sub("", m.group(1)).strip() if m else "somewhere"
        fields["activity"] = fields["activity"].lower()
        digest = hashlib.sha256(f"{self.seed}\x00{prompt}".encode("utf-8")).digest()
        out = []
        for i in range(self.sentences):
            b = digest[(3 * i) % 30 : (3 * i) % 30 + 3]
            template = _TEMPLATES[b[0] % len(_TEMPLATES)]
            text = template.format(opener=_OPENERS[b[1] % len(_OPENERS)], **fields)
            out.append(text + _ENDINGS[b[2] % len(_ENDINGS)])
        return " ".join(out)


def _responder(spec: Responder) -> Callable[[str], str]:
    if callable(spec):
        return spec
    if isinstance(spec, str):
        return lambda _prompt: spec
    cycle = itertools.cycle(list(spec))
    return lambda _prompt: next(cycle)
