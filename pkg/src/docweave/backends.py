"""Model backends: generation, entailment, and external search.

Each backend exists twice: an HTTP client speaking a small fixed JSON
wire format, and a deterministic mock for offline runs and tests. The
wire fields are part of the public interface and documented in the
README: generation takes {"prompt", "max_tokens", "temperature"} and
returns {"text"}; entailment takes {"premise", "hypothesis"} and
returns {"entailment", "neutral", "contradiction"} summing to one;
search takes {"query"} and returns {"result"}.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from dataclasses import dataclass, field

import requests

from .errors import BackendError, ConfigError, SearchUnavailableError
from . import prompts

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.1
DEFAULT_MAX_TOKENS = 4096
DEFAULT_TIMEOUT = 30.0
DEFAULT_RETRIES = 3
RETRY_BACKOFF = 0.2

MOCK_ENDPOINT = "mock"


@dataclass(frozen=True)
class GenerationRequest:
    system: str
    user: str
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = DEFAULT_TEMPERATURE

    @property
    def prompt(self) -> str:
        return f"{self.system}\n\n{self.user}"


@dataclass(frozen=True)
class EntailmentJudgment:
    entailment: float
    neutral: float
    contradiction: float

    def __post_init__(self) -> None:
        total = self.entailment + self.neutral + self.contradiction
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities must sum to 1, got {total!r}")
        for value in (self.entailment, self.neutral, self.contradiction):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"probability out of range: {value!r}")

    @property
    def label(self) -> str:
        best = max(
            ("entailment", self.entailment),
            ("neutral", self.neutral),
            ("contradiction", self.contradiction),
            key=lambda pair: pair[1],
        )
        return best[0]


def _post_json(url: str, payload: dict, timeout: float, retries: int) -> dict:
    last_error: Exception | None = None
    for attempt in range(1, retries + 1):
        try:
            response = requests.post(url, json=payload, timeout=timeout)
            response.raise_for_status()
            return response.json()
        except (requests.RequestException, ValueError) as exc:
            last_error = exc
            logger.warning("backend call %s failed (attempt %d/%d): %s", url, attempt, retries, exc)
            if attempt < retries:
                time.sleep(RETRY_BACKOFF * attempt)
    raise BackendError(f"backend unreachable after {retries} attempts: {url} ({last_error})")


class HttpGenerationClient:
    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT, retries: int = DEFAULT_RETRIES):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries

    def generate(self, request: GenerationRequest) -> str:
        payload = {
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        data = _post_json(self.endpoint, payload, self.timeout, self.retries)
        try:
            return str(data["text"])
        except (KeyError, TypeError) as exc:
            raise BackendError(f"generation response missing 'text': {data!r}") from exc


class HttpEntailmentClient:
    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT, retries: int = DEFAULT_RETRIES):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries

    def judge(self, premise: str, hypothesis: str) -> EntailmentJudgment:
        payload = {"premise": premise, "hypothesis": hypothesis}
        data = _post_json(self.endpoint, payload, self.timeout, self.retries)
        try:
            return EntailmentJudgment(
                entailment=float(data["entailment"]),
                neutral=float(data["neutral"]),
                contradiction=float(data["contradiction"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed entailment response: {data!r}") from exc


class HttpSearchClient:
    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT, retries: int = DEFAULT_RETRIES):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries

    def search(self, query: str) -> str:
        data = _post_json(self.endpoint, {"query": query}, self.timeout, self.retries)
        try:
            return str(data["result"])
        except (KeyError, TypeError) as exc:
            raise BackendError(f"search response missing 'result': {data!r}") from exc


# ---------------------------------------------------------------------------
# mocks


class MockGenerationClient:
    """Deterministic generation: a pure function of the request text.

    Recognizes the three prompt families by their markers. Action
    prompts are answered from the [STATE] block with a fixed policy:
    read the dependencies once, write the canned template (filled with
    the unit id and a request fingerprint), verify, rewrite on failure,
    finish on success. Self-evaluation prompts get fixed scores;
    claim-extraction prompts get the sentence split of the embedded
    document.
    """

    def __init__(self, self_scores: tuple[float, float, float] = (0.96, 0.94, 0.95)):
        self.self_scores = self_scores
        self.calls = 0

    def generate(self, request: GenerationRequest) -> str:
        self.calls += 1
        text = request.user
        if prompts.SELF_EVAL_MARKER in text:
            cons, comp, help_ = self.self_scores
            return json.dumps(
                {"consistency": cons, "completeness": comp, "helpfulness": help_}
            )
        if prompts.CLAIM_MARKER in text:
            document = prompts.extract_block(text) or ""
            return json.dumps(prompts.split_sentences(document))
        if prompts.ACTION_MARKER in text:
            return self._next_action(text)
        return f"offline generation {prompts.request_fingerprint(request.prompt)}"

    def _next_action(self, text: str) -> str:
        state = prompts.parse_state_block(text)
        unit = state.get("unit", "unknown")
        granularity = state.get("granularity", "component")
        kind = state.get("kind", "function")
        deps_field = state.get("dependencies", "")
        deps = [d.strip() for d in deps_field.split(",") if d.strip() and d.strip() != "(none)"]
        params_field = state.get("parameters", "")
        params = tuple(
            p.strip() for p in params_field.split(",") if p.strip() and p.strip() != "(none)"
        )
        reads = int(state.get("reads_performed", "0") or 0)
        draft = state.get("draft", "absent")
        verification = state.get("verification", "none")
        revisions = int(state.get("revisions_used", "0") or 0)

        if draft == "absent" and reads == 0 and deps:
            return (
                "THOUGHT: Read the related units before drafting.\n"
                "ACTION: READ\n"
                f"INTERNAL: {', '.join(deps)}"
            )
        if draft == "absent" or verification == "failed":
            revision = revisions if verification == "failed" else 0
            stub = prompts.render_stub_document(
                granularity,
                kind,
                unit,
                deps,
                prompts.request_fingerprint(text),
                revision=revision,
                parameters=params,
            )
            return (
                "THOUGHT: Produce the full draft from the template.\n"
                "ACTION: WRITE\n"
                f"DRAFT:\n{stub}"
            )
        if verification == "passed":
            return "THOUGHT: The draft passed verification.\nACTION: FINISH"
        return "THOUGHT: Check the draft before committing.\nACTION: VERIFY"


class ScriptedGenerationClient:
    """Replays a fixed list of responses; raises when exhausted."""

    def __init__(self, responses: list[str]):
        self.responses = list(responses)
        self.calls = 0

    def generate(self, request: GenerationRequest) -> str:
        if self.calls >= len(self.responses):
            raise BackendError("scripted generation client ran out of responses")
        response = self.responses[self.calls]
        self.calls += 1
        return response


_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]{2,}")
_STOPWORDS = frozenset(
    """the and for its this that with from are was has have not when where into
    over their them then than each own same other which while these those been
    being does did doing a an of in on to is it as by at or be""".split()
)


def _identifier_tokens(text: str) -> set[str]:
    return {
        token.rstrip(".")
        for token in _WORD_RE.findall(text)
        if token.lower() not in _STOPWORDS
    }


class MockEntailmentClient:
    """Identifier-overlap heuristic with fixed probability triples."""

    def judge(self, premise: str, hypothesis: str) -> EntailmentJudgment:
        if _identifier_tokens(premise) & _identifier_tokens(hypothesis):
            return EntailmentJudgment(entailment=0.82, neutral=0.13, contradiction=0.05)
        return EntailmentJudgment(entailment=0.10, neutral=0.82, contradiction=0.08)


class ScriptedEntailmentClient:
    """Maps exact (premise, hypothesis) pairs to fixed triples."""

    def __init__(
        self,
        table: dict[tuple[str, str], tuple[float, float, float]],
        default: tuple[float, float, float] = (0.10, 0.82, 0.08),
    ):
        self.table = dict(table)
        self.default = default

    def judge(self, premise: str, hypothesis: str) -> EntailmentJudgment:
        triple = self.table.get((premise, hypothesis), self.default)
        return EntailmentJudgment(
            entailment=triple[0], neutral=triple[1], contradiction=triple[2]
        )


class MockSearchClient:
    def search(self, query: str) -> str:
        digest = hashlib.sha256(query.encode("utf-8")).hexdigest()[:8]
        return f"Offline search digest {digest} for query: {query}"


class UnavailableSearchClient:
    """Placeholder that always reports search as unavailable."""

    def search(self, query: str) -> str:
        raise SearchUnavailableError(f"external search unavailable for: {query}")


# ---------------------------------------------------------------------------
# assembly


@dataclass
class Backends:
    generator: object
    entailment: object
    search: object = field(default_factory=UnavailableSearchClient)


def make_backends(
    generator_endpoint: str | None,
    entailment_endpoint: str | None,
    search_endpoint: str | None,
    offline: bool = False,
    timeout: float = DEFAULT_TIMEOUT,
    retries: int = DEFAULT_RETRIES,
) -> Backends:
    """Pick clients from the endpoint settings.

    An endpoint of "mock" selects the deterministic mock. Offline mode
    forces mock generation and entailment and makes external search
    unavailable (a cached result can still be served upstream) unless
    the search endpoint is explicitly "mock".
    """
    if offline:
        generator = MockGenerationClient()
        entailment = MockEntailmentClient()
        if search_endpoint == MOCK_ENDPOINT:
            search = MockSearchClient()
        else:
            search = UnavailableSearchClient()
        return Backends(generator=generator, entailment=entailment, search=search)

    def pick(endpoint: str | None, mock_cls, http_cls, label: str):
        if endpoint == MOCK_ENDPOINT:
            return mock_cls()
        if endpoint:
            return http_cls(endpoint, timeout=timeout, retries=retries)
        raise ConfigError(
            f"no {label} endpoint configured; pass one or run with --offline"
        )

    generator = pick(generator_endpoint, MockGenerationClient, HttpGenerationClient, "generation")
    entailment = pick(entailment_endpoint, MockEntailmentClient, HttpEntailmentClient, "entailment")
    if search_endpoint == MOCK_ENDPOINT:
        search = MockSearchClient()
    elif search_endpoint:
        search = HttpSearchClient(search_endpoint, timeout=timeout, retries=retries)
    else:
        search = UnavailableSearchClient()
    return Backends(generator=generator, entailment=entailment, search=search)
