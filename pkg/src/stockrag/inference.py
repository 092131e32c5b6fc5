"""Chat-model clients, verdict parsing, and batch prediction.

Two providers share one client surface: a remote HTTP client with rate
limiting and jittered exponential backoff, and a scripted mock that
replays canned responses keyed by request key. With the mock,
predict_batch is a pure function of (bundles, script, seed).
"""
from __future__ import annotations

import json
import os
import random
import re
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import httpx

from .errors import BudgetExceededError, TransportError
from .prompting import PromptBundle, assemble_final, estimate_tokens

UP = "UP"
DOWN = "DOWN"
INVALID = "INVALID"

_BRACKETED = re.compile(r"\[(up|down)\]", re.IGNORECASE)
_BARE_WORD = re.compile(r"(?<![0-9A-Za-z])(up|down)(?![0-9A-Za-z])", re.IGNORECASE)


def parse_verdict(raw: str) -> str:
    """Extract UP or DOWN from a model response, else INVALID.

    Bracketed tokens like '[UP]' win over bare words; when both
    verdicts appear, the earliest occurrence decides. Matching is
    case-insensitive and whole-word, so 'upside' is not a verdict.
    """
    for pattern in (_BRACKETED, _BARE_WORD):
        match = pattern.search(raw)
        if match:
            return match.group(1).upper()
    return INVALID


@dataclass(frozen=True)
class ModelConfig:
    """Connection and sampling settings for one model under test."""

    provider: str  # "remote_chat" | "scripted_mock"
    model_name: str
    endpoint: str | None = None
    temperature: float = 0.7
    context_limit: int = 8192
    max_retries: int = 3
    requests_per_minute: int = 60
    max_concurrency: int = 1
    script_path: str | None = None
    api_key_env: str = "STOCKRAG_API_KEY"

    def __post_init__(self):
        if self.provider not in ("remote_chat", "scripted_mock"):
            raise ValueError(f"unknown provider {self.provider!r}")
        if self.context_limit < 1:
            raise ValueError("context_limit must be positive")
        if not (self.temperature >= 0):  # also rejects NaN
            raise ValueError("temperature must be a non-negative number")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")
        if self.requests_per_minute < 1:
            raise ValueError("requests_per_minute must be at least 1")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be at least 1")
        if self.provider == "remote_chat" and not self.endpoint:
            raise ValueError("remote_chat requires an endpoint")


class RateLimiter:
    """Sliding-window limiter: at most per_minute sends in any 60s window.

    Thread-safe; clock and sleep are injectable so tests can drive a
    virtual clock.
    """

    WINDOW_SECONDS = 60.0
    # Floor on each wait so progress is guaranteed even when rounding
    # makes the remaining window smaller than the clock's resolution.
    MIN_SLEEP_SECONDS = 0.001

    def __init__(
        self,
        per_minute: int,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if per_minute < 1:
            raise ValueError("per_minute must be at least 1")
        self.per_minute = per_minute
        self._clock = clock
        self._sleep = sleep
        self._sent: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        """Block until one more send is admissible, then record it."""
        while True:
            with self._lock:
                now = self._clock()
                while self._sent and now - self._sent[0] >= self.WINDOW_SECONDS:
                    self._sent.popleft()
                if len(self._sent) < self.per_minute:
                    self._sent.append(now)
                    return
                wait = self.WINDOW_SECONDS - (now - self._sent[0])
            self._sleep(max(wait, self.MIN_SLEEP_SECONDS))


def _check_budget(prompt: str, limit: int) -> None:
    estimate = estimate_tokens(prompt)
    if estimate > limit:
        raise BudgetExceededError(estimate=estimate, limit=limit)


class ScriptedMockClient:
    """Offline client replaying a {request_key: response} script.

    A key suffixed '#<run_index>' overrides the base key for that run,
    which lets fixtures vary responses across repeated runs. A missing
    key raises the same TransportError a failing endpoint would.
    """

    def __init__(self, config: ModelConfig, script: Mapping[str, str]):
        self.config = config
        self._script = dict(script)
        self.calls = 0

    def complete(
        self,
        prompt: str,
        *,
        request_key: str | None = None,
        run_index: int | None = None,
    ) -> str:
        _check_budget(prompt, self.config.context_limit)
        self.calls += 1
        if request_key is not None:
            if run_index is not None:
                keyed = f"{request_key}#{run_index}"
                if keyed in self._script:
                    return self._script[keyed]
            if request_key in self._script:
                return self._script[request_key]
        raise TransportError(f"no scripted response for key {request_key!r}")


class RemoteChatClient:
    """HTTP client for a chat-completions endpoint.

    Sends {"model", "messages", "temperature"} and reads the first
    choice's message content. Transient failures (connection errors,
    408/429/5xx) are retried up to max_retries with jittered exponential
    backoff (base 1s, factor 2); other HTTP errors fail immediately.
    Bearer auth is read from the configured environment variable.
    """

    RETRYABLE_STATUS = frozenset({408, 429, 500, 502, 503, 504})
    BACKOFF_BASE_SECONDS = 1.0

    def __init__(
        self,
        config: ModelConfig,
        *,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
        rng: random.Random | None = None,
        timeout: float = 60.0,
    ):
        self.config = config
        self._limiter = RateLimiter(config.requests_per_minute, clock=clock, sleep=sleep)
        self._sleep = sleep
        self._rng = rng if rng is not None else random.Random()
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def complete(
        self,
        prompt: str,
        *,
        request_key: str | None = None,
        run_index: int | None = None,
    ) -> str:
        _check_budget(prompt, self.config.context_limit)
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        headers = {}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"

        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            self._limiter.acquire()
            try:
                response = self._client.post(
                    str(self.config.endpoint), json=body, headers=headers
                )
            except httpx.HTTPError as exc:
                last_error = exc
            else:
                if response.status_code in self.RETRYABLE_STATUS:
                    last_error = TransportError(
                        f"endpoint returned status {response.status_code}"
                    )
                elif response.status_code >= 400:
                    raise TransportError(
                        f"request rejected with status {response.status_code}"
                    )
                else:
                    try:
                        return str(response.json()["choices"][0]["message"]["content"])
                    except (KeyError, IndexError, TypeError, ValueError) as exc:
                        raise TransportError(
                            f"malformed completion response: {exc}"
                        ) from exc
            if attempt < self.config.max_retries:
                jitter = 0.5 + self._rng.random()  # factor in [0.5, 1.5)
                self._sleep(self.BACKOFF_BASE_SECONDS * (2**attempt) * jitter)
        raise TransportError(
            f"request failed after {self.config.max_retries + 1} attempts: {last_error}"
        )


def make_client(
    config: ModelConfig,
    *,
    script: Mapping[str, str] | None = None,
    transport: httpx.BaseTransport | None = None,
    sleep: Callable[[float], None] = time.sleep,
    rng: random.Random | None = None,
):
    """Build the client matching config.provider."""
    if config.provider == "scripted_mock":
        if script is None:
            if not config.script_path:
                raise ValueError("scripted_mock requires a script or script_path")
            script = json.loads(Path(config.script_path).read_text(encoding="utf-8"))
        return ScriptedMockClient(config, script)
    return RemoteChatClient(config, transport=transport, sleep=sleep, rng=rng)


@dataclass(frozen=True)
class PredictionRecord:
    """One model response, parsed and tied back to its bundle."""

    bundle_id: str
    run_index: int
    raw_response: str
    verdict: str  # UP or DOWN; an unparseable double response is coerced to DOWN
    invalid: bool
    label: int
    latency_seconds: float
    model_name: str
    shots: int
    horizon_months: int

    def to_json_dict(self) -> dict:
        return {
            "bundle_id": self.bundle_id,
            "run_index": self.run_index,
            "raw_response": self.raw_response,
            "verdict": self.verdict,
            "invalid": self.invalid,
            "label": self.label,
            "latency_seconds": self.latency_seconds,
            "model_name": self.model_name,
            "shots": self.shots,
            "horizon": self.horizon_months,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PredictionRecord":
        return cls(
            bundle_id=data["bundle_id"],
            run_index=int(data["run_index"]),
            raw_response=data["raw_response"],
            verdict=data["verdict"],
            invalid=bool(data["invalid"]),
            label=int(data["label"]),
            latency_seconds=float(data["latency_seconds"]),
            model_name=data["model_name"],
            shots=int(data["shots"]),
            horizon_months=int(data["horizon"]),
        )


@dataclass(frozen=True)
class BatchFailure:
    """A (bundle, run) pair that produced no record, and why."""

    bundle_id: str
    run_index: int
    kind: str  # "transport" | "budget"
    message: str

    def to_json_dict(self) -> dict:
        return {
            "bundle_id": self.bundle_id,
            "run_index": self.run_index,
            "kind": self.kind,
            "message": self.message,
        }


@dataclass(frozen=True)
class PredictionBatch:
    records: tuple[PredictionRecord, ...]
    failures: tuple[BatchFailure, ...]


def predict_batch(
    config: ModelConfig,
    bundles: Sequence[PromptBundle],
    runs: int,
    seed: int | str,
    *,
    shots: int = 0,
    client=None,
    script: Mapping[str, str] | None = None,
    transport: httpx.BaseTransport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> PredictionBatch:
    """Run every labeled bundle `runs` times against one model.

    An INVALID response is re-asked once; a second INVALID coerces the
    verdict to DOWN with the invalid flag set. Transport and budget
    failures become BatchFailure entries instead of records, so
    len(records) + len(failures) == len(bundles) * runs. Records keep
    (run, bundle) order. Scripted-mock latencies are reported as 0.0 to
    keep replays byte-identical.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    for bundle in bundles:
        if bundle.label is None:
            raise ValueError(f"bundle {bundle.bundle_id} is unlabeled")
    if client is None:
        client = make_client(
            config,
            script=script,
            transport=transport,
            sleep=sleep,
            rng=random.Random(f"{seed}:backoff"),
        )

    prepared: list[str | BudgetExceededError] = []
    for bundle in bundles:
        try:
            prepared.append(assemble_final(bundle, bundle.exemplars, config.context_limit))
        except BudgetExceededError as exc:
            prepared.append(exc)

    def run_one(run_index: int, position: int) -> PredictionRecord | BatchFailure:
        bundle = bundles[position]
        final = prepared[position]
        if isinstance(final, BudgetExceededError):
            return BatchFailure(bundle.bundle_id, run_index, "budget", str(final))
        started = time.perf_counter()
        try:
            raw = client.complete(
                final, request_key=bundle.bundle_id, run_index=run_index
            )
            verdict = parse_verdict(raw)
            if verdict == INVALID:
                raw = client.complete(
                    final, request_key=bundle.bundle_id, run_index=run_index
                )
                verdict = parse_verdict(raw)
        except BudgetExceededError as exc:
            return BatchFailure(bundle.bundle_id, run_index, "budget", str(exc))
        except TransportError as exc:
            return BatchFailure(bundle.bundle_id, run_index, "transport", str(exc))
        elapsed = time.perf_counter() - started
        invalid = verdict == INVALID
        if invalid:
            verdict = DOWN
        return PredictionRecord(
            bundle_id=bundle.bundle_id,
            run_index=run_index,
            raw_response=raw,
            verdict=verdict,
            invalid=invalid,
            label=bundle.label.value,
            latency_seconds=0.0 if config.provider == "scripted_mock" else elapsed,
            model_name=config.model_name,
            shots=shots,
            horizon_months=bundle.horizon_months,
        )

    tasks = [(run, i) for run in range(runs) for i in range(len(bundles))]
    if config.max_concurrency > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=config.max_concurrency) as pool:
            outcomes = list(pool.map(lambda t: run_one(*t), tasks))
    else:
        outcomes = [run_one(run, i) for run, i in tasks]

    records = tuple(o for o in outcomes if isinstance(o, PredictionRecord))
    failures = tuple(o for o in outcomes if isinstance(o, BatchFailure))
    return PredictionBatch(records=records, failures=failures)
