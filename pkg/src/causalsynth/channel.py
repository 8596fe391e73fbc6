"""The realization channel: prompts, feedback, and realizers.

A skeleton is turned into a prompt whose numbered hard constraints
pin every variable's value.  Realizers produce candidate documents
from prompts: a deterministic template (ideal channel), a parametric
simulated channel with per-variable compliance (for studying repair
dynamics in closed form), and an HTTP client for chat-completion
endpoints.  Verification failures come back as feedback blocks
appended to the prompt; prompts are immutable values throughout.

Prompt wording is loaded from plain-text resource files under
``resources/prompts`` so it can be audited and swapped without code
changes.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources as _resources
from typing import Dict, Mapping, NamedTuple, Optional, Sequence, Tuple

from .errors import (
    AuthError,
    EmptyMismatchListError,
    MalformedResponseError,
    NetworkError,
    PriorMissingVariableError,
    RateLimitedError,
    SchemaMismatchError,
)
from .rng import RngStream
from .scm import Scm, Skeleton

CONSTRAINT_LINE = "[C{index}] {variable}: {state} --- You MUST include this exact value"
CANONICAL_LINE = "{variable} = {state}"
DOCUMENT_HEAD = "Record start. The facts below are fixed."
DOCUMENT_TAIL = "Record end."
MISSING_TEXT = "nothing"


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    path = _resources.files("causalsynth") / "resources" / "prompts" / name
    return path.read_text(encoding="utf-8").strip()


class ConstraintLine(NamedTuple):
    index: int
    variable: str
    state: str

    def render(self) -> str:
        return CONSTRAINT_LINE.format(
            index=self.index, variable=self.variable, state=self.state)


class Mismatch(NamedTuple):
    """One verification failure: expected vs extracted (None = absent)."""

    variable: str
    expected: str
    extracted: Optional[str]


@dataclass(frozen=True)
class Prompt:
    """Immutable prompt value.

    ``feedback_blocks`` holds one rendered block per failed attempt,
    so the attempt index is always ``len(feedback_blocks) + 1``.
    ``feedback_vars`` is bookkeeping derived from those blocks: the
    variables named in any prior feedback, in first-mention order.
    """

    system_text: str
    constraint_lines: Tuple[ConstraintLine, ...]
    cot_instruction: str
    feedback_blocks: Tuple[str, ...] = ()
    feedback_vars: Tuple[str, ...] = ()

    @property
    def attempt_index(self) -> int:
        return len(self.feedback_blocks) + 1

    def render_user(self) -> str:
        """The user-message text: constraints, instruction, feedback."""
        parts = ["Hard constraints:"]
        parts.extend(line.render() for line in self.constraint_lines)
        parts.append("")
        parts.append(self.cot_instruction)
        for block in self.feedback_blocks:
            parts.append("")
            parts.append(block)
        return "\n".join(parts)

    def render(self) -> str:
        """The full prompt text including the system preamble."""
        return self.system_text + "\n\n" + self.render_user()


@dataclass(frozen=True)
class CandidateDocument:
    """One realization attempt."""

    text: str
    attempt_index: int
    realizer_id: str


def construct_prompt(skeleton: Skeleton, schema) -> Prompt:
    """Build the attempt-1 prompt for a skeleton.

    ``schema`` is the model (or its variable declarations); constraint
    lines follow declaration order and cover exactly the skeleton's
    variables.

    Raises
    ------
    SchemaMismatchError
        If the skeleton's variables or states do not match the schema.
    """
    variables = schema.variables if isinstance(schema, Scm) else tuple(schema)
    names = [v.name for v in variables]
    if set(skeleton.v) != set(names):
        missing = sorted(set(names) - set(skeleton.v))
        extra = sorted(set(skeleton.v) - set(names))
        raise SchemaMismatchError(
            f"skeleton does not cover schema (missing {missing}, extra {extra})")
    for var in variables:
        if skeleton.v[var.name] not in var.states:
            raise SchemaMismatchError(
                f"{skeleton.v[var.name]!r} is not a state of {var.name!r}")
    lines = tuple(
        ConstraintLine(i + 1, var.name, skeleton.v[var.name])
        for i, var in enumerate(variables)
    )
    return Prompt(
        system_text=_template("system.txt"),
        constraint_lines=lines,
        cot_instruction=_template("cot.txt"),
    )


def append_feedback(prompt: Prompt, mismatches: Sequence[Mismatch]) -> Prompt:
    """New prompt with one more feedback block; the input is unchanged.

    Each mismatch becomes a diff-style correction line carrying the
    expected and extracted values verbatim.
    """
    mismatches = [Mismatch(*m) for m in mismatches]
    if not mismatches:
        raise EmptyMismatchListError("feedback requires at least one mismatch")
    lines = [_template("feedback_header.txt").format(count=len(mismatches))]
    for m in mismatches:
        wrote = MISSING_TEXT if m.extracted is None else f'"{m.extracted}"'
        lines.append(
            f'- {m.variable}: expected "{m.expected}", you wrote {wrote}.'
            " Rewrite accordingly.")
    block = "\n".join(lines)
    new_vars = list(prompt.feedback_vars)
    for m in mismatches:
        if m.variable not in new_vars:
            new_vars.append(m.variable)
    return Prompt(
        system_text=prompt.system_text,
        constraint_lines=prompt.constraint_lines,
        cot_instruction=prompt.cot_instruction,
        feedback_blocks=prompt.feedback_blocks + (block,),
        feedback_vars=tuple(new_vars),
    )


def _wrap_document(lines: Sequence[str]) -> str:
    return "\n".join([DOCUMENT_HEAD, *lines, DOCUMENT_TAIL])


def realize_template(prompt: Prompt, stream: Optional[RngStream] = None) -> CandidateDocument:
    """Ideal channel: every constraint rendered canonically, always.

    Deterministic given the prompt; the stream argument exists only so
    all realizers share a call shape.
    """
    lines = [
        CANONICAL_LINE.format(variable=c.variable, state=c.state)
        for c in prompt.constraint_lines
    ]
    return CandidateDocument(_wrap_document(lines), prompt.attempt_index, "template")


@dataclass(frozen=True)
class BackdoorChannelConfig:
    """Parametric simulated channel.

    Per constrained variable and attempt k, the channel emits the
    constrained state with probability

        c_i(k) = min(cap, c0 + gain * (k-1) * [i named in prior feedback])

    and otherwise falls back to its preferred state ``prior[i]``.
    Independence across variables makes every acceptance quantity
    available in closed form for oracles.
    """

    prior: Mapping[str, str]
    base_compliance: float = 0.6
    feedback_gain: float = 0.2
    compliance_cap: float = 0.99

    def __post_init__(self):
        object.__setattr__(self, "prior", dict(self.prior))
        if not 0.0 <= self.base_compliance <= 1.0:
            raise ValueError("base_compliance must lie in [0, 1]")
        if self.feedback_gain < 0.0:
            raise ValueError("feedback_gain must be nonnegative")
        if not 0.0 < self.compliance_cap <= 1.0:
            raise ValueError("compliance_cap must lie in (0, 1]")
        if self.base_compliance > self.compliance_cap:
            raise ValueError("base_compliance must not exceed compliance_cap")

    def compliance(self, variable: str, attempt_index: int, fed_back: bool) -> float:
        """c_i(k) for one variable at one attempt."""
        boost = self.feedback_gain * (attempt_index - 1) if fed_back else 0.0
        return min(self.compliance_cap, self.base_compliance + boost)


def realize_backdoor(prompt: Prompt, cfg: BackdoorChannelConfig,
                     stream: RngStream) -> CandidateDocument:
    """Simulated channel: per-variable compliance coin flips.

    One uniform is consumed per constraint line, in order, regardless
    of outcome, so document reproduction from a stream position is
    exact.

    Raises
    ------
    PriorMissingVariableError
        If a constrained variable has no preferred state configured.
    """
    fed_back = set(prompt.feedback_vars)
    k = prompt.attempt_index
    lines = []
    for c in prompt.constraint_lines:
        if c.variable not in cfg.prior:
            raise PriorMissingVariableError(
                f"channel prior lacks variable {c.variable!r}")
        comply = stream.uniform() < cfg.compliance(c.variable, k, c.variable in fed_back)
        state = c.state if comply else cfg.prior[c.variable]
        lines.append(CANONICAL_LINE.format(variable=c.variable, state=state))
    return CandidateDocument(_wrap_document(lines), k, "backdoor")


# --------------------------------------------------------------------------
# HTTP realizer


@dataclass(frozen=True)
class HttpEndpointConfig:
    """Chat-completion endpoint settings.

    The API key is read from the environment variable named by
    ``api_key_env`` at request time and never stored in files.
    """

    url: str
    model: str
    temperature: float = 0.7
    top_p: float = 0.95
    max_tokens: Optional[int] = None
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 0.5
    max_in_flight: int = 4
    rate_per_sec: Optional[float] = None
    api_key_env: str = "CAUSALSYNTH_API_KEY"


def _default_transport(url: str, headers: Dict[str, str], payload: dict,
                       timeout: float) -> Tuple[int, str]:
    import requests

    try:
        response = requests.post(url, headers=headers, json=payload, timeout=timeout)
    except requests.Timeout as exc:
        raise NetworkError(f"request timed out after {timeout}s") from exc
    except requests.RequestException as exc:
        raise NetworkError(str(exc)) from exc
    return response.status_code, response.text


def realize_http(prompt: Prompt, cfg: HttpEndpointConfig, *,
                 transport=None, api_key: Optional[str] = None,
                 sleep=time.sleep) -> CandidateDocument:
    """One realization via a chat-completion endpoint.

    Sends the system text and rendered user message; retries rate
    limiting and network failures with exponential backoff up to
    ``cfg.max_retries`` times, then surfaces the error.  ``transport``
    may be injected for testing; it returns (status_code, body_text).
    """
    import os

    if transport is None:
        transport = _default_transport
    if api_key is None:
        api_key = os.environ.get(cfg.api_key_env, "")
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    payload = {
        "model": cfg.model,
        "messages": [
            {"role": "system", "content": prompt.system_text},
            {"role": "user", "content": prompt.render_user()},
        ],
        "temperature": cfg.temperature,
        "top_p": cfg.top_p,
    }
    if cfg.max_tokens is not None:
        payload["max_tokens"] = cfg.max_tokens

    attempt = 0
    while True:
        try:
            status, body = transport(cfg.url, headers, payload, cfg.timeout)
            if status in (401, 403):
                raise AuthError(f"endpoint rejected credentials (HTTP {status})")
            if status == 429:
                raise RateLimitedError("endpoint rate limit (HTTP 429)")
            if status >= 500:
                raise NetworkError(f"endpoint failure (HTTP {status})")
            if status != 200:
                raise MalformedResponseError(f"unexpected HTTP status {status}")
            text = _parse_chat_body(body)
            return CandidateDocument(text, prompt.attempt_index, f"http:{cfg.model}")
        except (RateLimitedError, NetworkError) as exc:
            attempt += 1
            if attempt > cfg.max_retries:
                raise
            sleep(cfg.backoff_base * (2 ** (attempt - 1)))


def _parse_chat_body(body: str) -> str:
    try:
        doc = json.loads(body)
        content = doc["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponseError(f"unusable completion payload: {exc}") from exc
    if not isinstance(content, str) or not content.strip():
        raise MalformedResponseError("completion content is empty")
    return content


class _TokenBucket:
    """Simple thread-safe rate limiter: ``rate`` tokens per second."""

    def __init__(self, rate: float):
        self.rate = rate
        self.capacity = max(1.0, rate)
        self.tokens = self.capacity
        self.stamp = time.monotonic()
        self.lock = threading.Lock()

    def acquire(self, sleep=time.sleep):
        while True:
            with self.lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.stamp) * self.rate)
                self.stamp = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                needed = (1.0 - self.tokens) / self.rate
            sleep(needed)


class TemplateRealizer:
    """Adapter giving the template channel the common realizer shape."""

    realizer_id = "template"

    def realize(self, prompt: Prompt, stream: RngStream) -> CandidateDocument:
        return realize_template(prompt, stream)


class BackdoorRealizer:
    """Adapter binding a :class:`BackdoorChannelConfig`."""

    realizer_id = "backdoor"

    def __init__(self, cfg: BackdoorChannelConfig):
        self.cfg = cfg

    def realize(self, prompt: Prompt, stream: RngStream) -> CandidateDocument:
        return realize_backdoor(prompt, self.cfg, stream)


class HttpRealizer:
    """Adapter managing endpoint concurrency for the HTTP channel.

    Bounds in-flight requests with a semaphore and, when configured,
    paces them with a token bucket.  Safe to share across threads.
    """

    def __init__(self, cfg: HttpEndpointConfig, *, transport=None, sleep=time.sleep):
        self.cfg = cfg
        self.realizer_id = f"http:{cfg.model}"
        self._transport = transport
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(cfg.max_in_flight)
        self._bucket = _TokenBucket(cfg.rate_per_sec) if cfg.rate_per_sec else None

    def realize(self, prompt: Prompt, stream: RngStream) -> CandidateDocument:
        with self._slots:
            if self._bucket is not None:
                self._bucket.acquire(self._sleep)
            return realize_http(prompt, self.cfg, transport=self._transport,
                                sleep=self._sleep)
