"""Draft verification: self-evaluation plus cross-document conflict checks.

A draft is scored on two routes that are always combined, never
collapsed: the generator grades its own draft on three axes, and the
draft's factual claims are checked by an entailment model against the
already-committed documents of trusted neighbor units. The final score
is the mean of the self score and (1 - conflict rate); a draft passes
when the score reaches the configured threshold.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass

from .backends import Backends, GenerationRequest
from .depgraph import DependencyGraph
from .errors import BackendError, VerifierError
from .memory import MemoryStore
from .metrics import word_mentions
from .source_model import MODULE, REPO
from . import prompts

logger = logging.getLogger(__name__)

TRUST_THRESHOLD = 0.9  # references must strictly exceed this
DEFAULT_VERIFY_THRESHOLD = 0.9  # drafts pass at or above this
DEFAULT_NLI_THRESHOLD = 0.5

_JSON_OBJECT_RE = re.compile(r"\{.*\}", re.DOTALL)
_JSON_ARRAY_RE = re.compile(r"\[.*\]", re.DOTALL)


@dataclass(frozen=True)
class SelfEvaluation:
    consistency: float
    completeness: float
    helpfulness: float

    def __post_init__(self) -> None:
        for value in (self.consistency, self.completeness, self.helpfulness):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"self-evaluation score out of range: {value!r}")

    @property
    def score(self) -> float:
        return (self.consistency + self.completeness + self.helpfulness) / 3.0


@dataclass(frozen=True)
class ConflictFinding:
    claim: str
    best_entailment: float
    nearest_reference: str


@dataclass(frozen=True)
class VerificationOutcome:
    unit_id: str
    self_eval: SelfEvaluation
    claims: tuple[str, ...]
    hypotheses: tuple[str, ...]
    reference_ids: tuple[str, ...]
    conflicts: tuple[ConflictFinding, ...]
    conflict_rate: float
    score: float
    passed: bool
    conflict_check_skipped: bool


def combine(self_eval: SelfEvaluation, conflict_rate: float, threshold: float) -> tuple[float, bool]:
    """Final verification score and pass decision.

    Mean of the self score and (1 - conflict rate); passing is
    inclusive at the threshold.
    """
    if not 0.0 <= conflict_rate <= 1.0:
        raise ValueError(f"conflict rate out of range: {conflict_rate!r}")
    score = 0.5 * (self_eval.score + (1.0 - conflict_rate))
    return score, score >= threshold


# ---------------------------------------------------------------------------
# route one: self-evaluation


def _generate_json(backends: Backends, system: str, user: str, pattern: re.Pattern):
    """One generation call with a single corrective reprompt."""
    request = GenerationRequest(system=system, user=user)
    for attempt in range(2):
        text = backends.generator.generate(request)
        try:
            return json.loads(text)
        except ValueError:
            match = pattern.search(text)
            if match:
                try:
                    return json.loads(match.group(0))
                except ValueError:
                    pass
        if attempt == 0:
            request = GenerationRequest(
                system=system,
                user=user + "\n\nYour previous reply was not valid JSON. Return only the JSON.",
            )
    raise VerifierError("backend did not return parseable JSON")


def self_evaluate(
    document: str, unit_id: str, granularity: str, backends: Backends
) -> SelfEvaluation:
    user = prompts.self_eval_prompt(document, unit_id, granularity)
    payload = _generate_json(backends, prompts.SYSTEM_PROMPT, user, _JSON_OBJECT_RE)
    try:
        return SelfEvaluation(
            consistency=float(payload["consistency"]),
            completeness=float(payload["completeness"]),
            helpfulness=float(payload["helpfulness"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise VerifierError(f"malformed self-evaluation payload: {payload!r}") from exc


# ---------------------------------------------------------------------------
# route two: conflict checking


def build_reference_set(
    unit_id: str,
    graph: DependencyGraph,
    memory: MemoryStore,
    trust_threshold: float = TRUST_THRESHOLD,
) -> list:
    """Trusted neighbor records to check the draft against.

    Components are checked against the records of the components they
    depend on; modules against their direct children; the repository
    against its root modules. Only records whose verification score
    strictly exceeds the trust threshold participate.
    """
    granularity = graph.granularity[unit_id]
    candidates = graph.successors(unit_id)
    if granularity == REPO:
        candidates = [c for c in candidates if graph.granularity[c] == MODULE]

    references = []
    for candidate in candidates:
        record = memory.peek(candidate)
        if record is None:
            continue
        if record.verification_score > trust_threshold:
            references.append(record)
    return references


def extract_claims(document: str, backends: Backends) -> list[str]:
    user = prompts.claim_extraction_prompt(document)
    payload = _generate_json(backends, prompts.SYSTEM_PROMPT, user, _JSON_ARRAY_RE)
    if not isinstance(payload, list) or not all(isinstance(c, str) for c in payload):
        raise VerifierError(f"claim extraction did not return a string array: {payload!r}")
    return [c.strip() for c in payload if c.strip()]


def _reference_names(record) -> list[str]:
    key = record.key
    if "/" in key:
        return [key, key.rsplit("/", 1)[-1]]
    if "." in key:
        return [key, key.rsplit(".", 1)[-1]]
    return [key]


def filter_hypotheses(claims: list[str], references: list) -> list[str]:
    """Claims that mention any reference unit by full id or bare name."""
    names: list[str] = []
    for record in references:
        names.extend(_reference_names(record))
    return [claim for claim in claims if any(word_mentions(claim, n) for n in names)]


def check_conflicts(
    hypotheses: list[str],
    references: list,
    backends: Backends,
    nli_threshold: float = DEFAULT_NLI_THRESHOLD,
    strict: bool = False,
) -> tuple[list[ConflictFinding], float]:
    """Entailment-check each hypothesis against every reference.

    Default rule: a hypothesis conflicts when its best entailment
    probability across all references falls below the threshold. Strict
    rule: it conflicts only when contradiction is the dominant label
    against every reference. Returns the findings and the conflict rate
    |conflicts| / |hypotheses| (zero when there are no hypotheses).
    """
    if not hypotheses:
        return [], 0.0
    findings: list[ConflictFinding] = []
    for hypothesis in hypotheses:
        judgments = []
        for record in references:
            judgment = backends.entailment.judge(record.document, hypothesis)
            judgments.append((record.key, judgment))
        best_key, best = max(judgments, key=lambda pair: pair[1].entailment)
        if strict:
            conflicting = all(j.label == "contradiction" for _, j in judgments)
        else:
            conflicting = best.entailment < nli_threshold
        if conflicting:
            findings.append(
                ConflictFinding(
                    claim=hypothesis,
                    best_entailment=best.entailment,
                    nearest_reference=best_key,
                )
            )
    return findings, len(findings) / len(hypotheses)


# ---------------------------------------------------------------------------
# orchestration


def verify_draft(
    document: str,
    unit_id: str,
    graph: DependencyGraph,
    memory: MemoryStore,
    backends: Backends,
    verify_threshold: float = DEFAULT_VERIFY_THRESHOLD,
    nli_threshold: float = DEFAULT_NLI_THRESHOLD,
    strict: bool = False,
) -> VerificationOutcome:
    """Run both verification routes on a draft.

    With no trusted references the conflict check is skipped and the
    conflict rate is zero; the self route always runs. Backend failures
    propagate as BackendError/VerifierError for the caller to absorb.
    """
    granularity = graph.granularity[unit_id]
    self_eval = self_evaluate(document, unit_id, granularity, backends)

    references = build_reference_set(unit_id, graph, memory)
    claims: list[str] = []
    hypotheses: list[str] = []
    conflicts: list[ConflictFinding] = []
    conflict_rate = 0.0
    skipped = not references
    if references:
        claims = extract_claims(document, backends)
        hypotheses = filter_hypotheses(claims, references)
        conflicts, conflict_rate = check_conflicts(
            hypotheses, references, backends, nli_threshold=nli_threshold, strict=strict
        )

    score, passed = combine(self_eval, conflict_rate, verify_threshold)
    return VerificationOutcome(
        unit_id=unit_id,
        self_eval=self_eval,
        claims=tuple(claims),
        hypotheses=tuple(hypotheses),
        reference_ids=tuple(r.key for r in references),
        conflicts=tuple(conflicts),
        conflict_rate=conflict_rate,
        score=score,
        passed=passed,
        conflict_check_skipped=skipped,
    )


def render_report(outcome: VerificationOutcome, threshold: float) -> str:
    """Observation text for the agent after a VERIFY action."""
    lines = [
        "verification {} with score {:.4f} (threshold {:.2f})".format(
            "passed" if outcome.passed else "failed", outcome.score, threshold
        ),
        "self-evaluation {:.4f} (consistency {:.2f}, completeness {:.2f}, helpfulness {:.2f})".format(
            outcome.self_eval.score,
            outcome.self_eval.consistency,
            outcome.self_eval.completeness,
            outcome.self_eval.helpfulness,
        ),
    ]
    if outcome.conflict_check_skipped:
        lines.append("conflict check skipped: no trusted reference documents")
    else:
        lines.append(
            "conflict rate {:.4f} over {} hypotheses against {} references".format(
                outcome.conflict_rate,
                len(outcome.hypotheses),
                len(outcome.reference_ids),
            )
        )
    for finding in outcome.conflicts:
        lines.append(
            'conflicting claim: "{}" (best entailment {:.2f}, nearest {})'.format(
                finding.claim, finding.best_entailment, finding.nearest_reference
            )
        )
    return "\n".join(lines)
