from __future__ import annotations

import logging
import os
import time
from typing import Any, Callable

import httpx

from .errors import BackendUnavailable

logger = logging.getLogger(__name__)


def auth_headers(api_key_env: str) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(api_key_env, "").strip()
    if key:
        headers["Authorization"] = f"Bearer {key}"
    return headers


def post_json(
    client: httpx.Client,
    url: str,
    payload: dict[str, Any],
    headers: dict[str, str],
    max_retries: int = 3,
    backoff: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> Any:
    """POST ``payload`` and return the decoded JSON body.

    Transport errors, 429 and 5xx responses are retried up to ``max_retries``
    times with exponential backoff; other 4xx responses fail immediately.
    """
    last_error: object = None
    for attempt in range(max_retries + 1):
        if attempt:
            sleep(backoff * 2 ** (attempt - 1))
        try:
            resp = client.post(url, json=payload, headers=headers)
        except httpx.TransportError as exc:
            last_error = exc
            logger.warning("POST %s failed (attempt %d): %s", url, attempt + 1, exc)
            continue
        if resp.status_code == 429 or resp.status_code >= 500:
            last_error = f"HTTP {resp.status_code}"
            logger.warning("POST %s got HTTP %d (attempt %d)", url, resp.status_code, attempt + 1)
            continue
        if resp.status_code >= 400:
            raise BackendUnavailable(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise BackendUnavailable(f"{url}: response is not JSON") from exc
    raise BackendUnavailable(f"{url} unreachable after {max_retries + 1} attempts: {last_error}")
