"""Conditional moderation: classify, pass neutral text through untouched,
rewrite hate/offensive text via a pluggable backend.

Three backends: `stub` (deterministic marker transform, used by the test
suite), `lexicon` (single-pass whole-word replacement), and `remote_llm`
(an HTTPS completion API, exercised offline through recorded cassettes).
The rewrite backend always receives the ORIGINAL raw text, not the
cleaned form. Default failure mode is fail-closed: flagged text is never
passed through just because the backend is down.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, asdict

from .errors import BackendError, ConfigurationError, ValidationError
from .models import ModelHandle, predict
from .textprep import TokenizerAdapter, clean_text

DEFAULT_PROMPT = "Rewrite the following to be polite and non-offensive: "
DEFAULT_ENDPOINT = "https://api.openai.com/v1/completions"
DEFAULT_REMOTE_MODEL = "text-davinci-003"
API_KEY_ENV = "REWRITER_API_KEY"

BACKENDS = ("remote_llm", "lexicon", "stub")


@dataclass
class RewriterConfig:
    backend: str = "stub"
    prompt_template: str = DEFAULT_PROMPT
    max_tokens: int = 100
    temperature: float = 0.7
    timeout: float = 10.0
    retries: int = 2
    endpoint: str = DEFAULT_ENDPOINT
    remote_model: str = DEFAULT_REMOTE_MODEL
    lexicon_path: str | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigurationError(f"unknown rewriter backend {self.backend!r}")
        if self.retries < 0:
            raise ConfigurationError(f"retries must be >= 0: {self.retries}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Lexicon:
    """Offensive term -> neutral replacement, validated against rewrite loops."""

    entries: dict[str, str]

    def __post_init__(self):
        for term, replacement in self.entries.items():
            if not term or term != term.lower():
                raise ValidationError(f"lexicon keys must be lowercase and non-empty: {term!r}")
            hit = next((k for k in self.entries if k in replacement.lower()), None)
            if hit:
                raise ValidationError(
                    f"replacement {replacement!r} for {term!r} contains lexicon key {hit!r}"
                )


def load_lexicon(path: str) -> Lexicon:
    """Two-column (term<TAB>replacement) UTF-8 file; blank lines ignored."""
    entries = {}
    with open(path, "r", encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ValidationError(f"lexicon line {n} is not tab-separated: {line!r}")
            term, replacement = line.split("\t", 1)
            entries[term] = replacement
    return Lexicon(entries)


def rewrite_lexicon(text: str, lexicon: Lexicon) -> str:
    """Single left-to-right pass; whole whitespace-delimited tokens whose
    lowercase form is a key are replaced, everything else (including the
    original whitespace) is preserved. Replacements are never re-scanned."""
    import re

    parts = re.split(r"(\s+)", text)
    out = []
    for part in parts:
        if part and not part.isspace() and part.lower() in lexicon.entries:
            out.append(lexicon.entries[part.lower()])
        else:
            out.append(part)
    return "".join(out)


class StubRewriter:
    """Deterministic offline transform; keeps the whole pipeline reproducible."""

    name = "stub"

    def rewrite(self, text: str) -> str:
        return f"[neutralized] {text}"


class LexiconRewriter:
    name = "lexicon"

    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon

    def rewrite(self, text: str) -> str:
        return rewrite_lexicon(text, self.lexicon)


def _http_transport(url, headers, payload, timeout):
    import requests

    resp = requests.post(url, headers=headers, json=payload, timeout=timeout)
    try:
        body = resp.json()
    except ValueError:
        body = {"error": resp.text}
    return resp.status_code, body


class ReplayTransport:
    """Replays a recorded request/response cassette in order.

    Cassette format (JSON): a list of interactions, each
      {"request": {"url": ..., "payload": {...}},
       "response": {"status": int, "json": {...}}}
    The replayed request must match the recorded url and payload.
    """

    def __init__(self, cassette_path: str):
        with open(cassette_path, "r", encoding="utf-8") as fh:
            self.interactions = json.load(fh)
        self.cursor = 0

    def __call__(self, url, headers, payload, timeout):
        if self.cursor >= len(self.interactions):
            raise BackendError("cassette exhausted: unexpected extra request")
        rec = self.interactions[self.cursor]
        self.cursor += 1
        if rec["request"]["url"] != url or rec["request"]["payload"] != payload:
            raise BackendError(
                f"request does not match cassette entry {self.cursor - 1}: "
                f"{url} {payload!r}"
            )
        return rec["response"]["status"], rec["response"]["json"]


class RemoteRewriter:
    """HTTPS JSON completion backend with retry/backoff.

    Auth failures (401/403) are terminal; anything else retries with
    exponential backoff up to config.retries.
    """

    name = "remote_llm"

    def __init__(self, config: RewriterConfig, transport=None, sleep=time.sleep):
        self.config = config
        self.transport = transport or _http_transport
        self.sleep = sleep

    def rewrite(self, text: str) -> str:
        api_key = os.environ.get(API_KEY_ENV, "")
        if not api_key and self.transport is _http_transport:
            raise ConfigurationError(f"{API_KEY_ENV} is not set")
        headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
        payload = {
            "model": self.config.remote_model,
            "prompt": self.config.prompt_template + text,
            "max_tokens": self.config.max_tokens,
            "temperature": self.config.temperature,
        }
        last_error = None
        for attempt in range(self.config.retries + 1):
            try:
                status, body = self.transport(
                    self.config.endpoint, headers, payload, self.config.timeout
                )
            except BackendError:
                raise
            except Exception as exc:  # connection error / timeout
                last_error = f"{type(exc).__name__}: {exc}"
                status, body = None, None
            if status is not None:
                if status in (401, 403):
                    raise BackendError(f"authentication rejected (HTTP {status}); not retrying")
                if 200 <= status < 300:
                    try:
                        return body["choices"][0]["text"].strip()
                    except (KeyError, IndexError, TypeError) as exc:
                        raise BackendError(f"malformed completion response: {body!r}") from exc
                last_error = f"HTTP {status}: {body!r}"
            if attempt < self.config.retries:
                self.sleep(0.5 * (2**attempt))
        raise BackendError(f"rewriter backend failed after {self.config.retries + 1} attempts: {last_error}")


def make_rewriter(config: RewriterConfig, transport=None, sleep=time.sleep):
    if config.backend == "stub":
        return StubRewriter()
    if config.backend == "lexicon":
        if not config.lexicon_path:
            raise ConfigurationError("lexicon backend needs lexicon_path")
        return LexiconRewriter(load_lexicon(config.lexicon_path))
    return RemoteRewriter(config, transport=transport, sleep=sleep)


@dataclass
class ModerationResult:
    """Outcome of one moderation call.

    For clean results (error None): action == "pass" iff label == 2 iff
    rewritten is None. Backend failures yield action "error" (fail-closed,
    the default) or a flagged pass-through (fail-open).
    """

    original: str
    cleaned: str
    label: int
    probabilities: list[float]
    action: str
    backend: str
    latency: float
    rewritten: str | None = None
    error: str | None = None
    flagged_unrewritten: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.rewritten is None:
            d.pop("rewritten")
        if self.error is None:
            d.pop("error")
        return d


def classify(text: str, handle: ModelHandle, tokenizer: TokenizerAdapter):
    """clean -> tokenize -> forward -> softmax/argmax (lowest-index ties)."""
    cleaned = clean_text(text)
    seq = tokenizer.encode(cleaned, handle.spec.max_len)
    labels, probs = predict(handle, [seq.ids], [seq.attention_mask])
    return int(labels[0]), probs[0].tolist(), cleaned


def moderate(
    text: str,
    handle: ModelHandle,
    tokenizer: TokenizerAdapter,
    rewriter,
    fail_open: bool = False,
) -> ModerationResult:
    start = time.monotonic()
    label, probs, cleaned = classify(text, handle, tokenizer)
    backend = getattr(rewriter, "name", "unknown")

    if label == 2:
        return ModerationResult(
            original=text,
            cleaned=cleaned,
            label=label,
            probabilities=probs,
            action="pass",
            backend=backend,
            latency=time.monotonic() - start,
        )

    try:
        rewritten = rewriter.rewrite(text)
    except (BackendError, ConfigurationError) as exc:
        action = "pass" if fail_open else "error"
        return ModerationResult(
            original=text,
            cleaned=cleaned,
            label=label,
            probabilities=probs,
            action=action,
            backend=backend,
            latency=time.monotonic() - start,
            error=str(exc),
            flagged_unrewritten=True,
        )
    return ModerationResult(
        original=text,
        cleaned=cleaned,
        label=label,
        probabilities=probs,
        action="rewrite",
        backend=backend,
        latency=time.monotonic() - start,
        rewritten=rewritten,
    )
