"""The documentation agent: one budgeted sub-task per unit, in order.

Each unit gets a fresh sub-task context: the injected task prompt, a
transcript of the turns taken so far, and a machine-readable state
block. Every turn the generator picks one action (READ, WRITE, VERIFY,
FINISH) which is executed here. Reads are memory-first; verification
delegates to the verifier; FINISH commits the verified draft to shared
memory. A unit that exhausts its step budget, or its revision budget,
is committed anyway with an explicit below-threshold flag so the run
always terminates with a complete record set.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass

from .backends import Backends, GenerationRequest
from .depgraph import DependencyGraph, TraversalOrder
from .errors import (
    BackendError,
    InputError,
    OrderingViolationError,
    SearchUnavailableError,
    VerifierError,
)
from .memory import ComponentRecord, MemoryStore, ModuleRecord, RepoRecord
from .source_model import (
    COMPONENT,
    MODULE,
    REPO,
    REPO_ID,
    RepoModel,
    component_parameters,
    component_raises,
)
from . import prompts, verifier

logger = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 10
DEFAULT_MAX_REVISIONS = 2


class ActionParseError(ValueError):
    pass


@dataclass(frozen=True)
class ReadAction:
    internal: tuple[str, ...] = ()
    external: tuple[str, ...] = ()

    label = "read"


@dataclass(frozen=True)
class WriteAction:
    draft: str

    label = "write"


@dataclass(frozen=True)
class VerifyAction:
    label = "verify"


@dataclass(frozen=True)
class FinishAction:
    label = "finish"


@dataclass(frozen=True)
class Turn:
    index: int
    thought: str
    action_label: str
    observation: str


@dataclass
class LoopConfig:
    max_steps: int = DEFAULT_MAX_STEPS
    max_revisions: int = DEFAULT_MAX_REVISIONS
    verify_threshold: float = verifier.DEFAULT_VERIFY_THRESHOLD
    nli_threshold: float = verifier.DEFAULT_NLI_THRESHOLD
    strict_conflicts: bool = False
    memory_enabled: bool = True
    throttle: float = 0.0


@dataclass
class SubTaskResult:
    unit_id: str
    record: object
    turns: tuple[Turn, ...]
    flagged: bool
    forced: bool


@dataclass
class TrajectorySummary:
    total_units: int
    generated: int
    resumed: int
    flagged: tuple[str, ...]
    codebase_reads: int
    memory_hits: int
    codebase_read_targets: tuple[str, ...]


class TrajectoryLogger:
    """One structured line per agent turn, appended to a log file."""

    def __init__(self, path: str | None):
        self._fh = None
        if path is not None:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            self._fh = open(path, "a", encoding="utf-8")

    def log(self, unit_id: str, turn: Turn, **extra) -> None:
        if self._fh is None:
            return
        digest = hashlib.sha256(turn.observation.encode("utf-8")).hexdigest()[:12]
        payload = {
            "unit": unit_id,
            "turn": turn.index,
            "thought": turn.thought,
            "action": turn.action_label,
            "observation_head": turn.observation[:160],
            "observation_sha": digest,
            "observation_len": len(turn.observation),
        }
        payload.update(extra)
        self._fh.write(json.dumps(payload, ensure_ascii=False) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


# ---------------------------------------------------------------------------
# action parsing


def parse_action(text: str) -> tuple[str, object]:
    """Parse one agent reply into (thought, action).

    Raises ActionParseError when there is no recognizable action, a
    READ carries no request, or a WRITE carries no draft.
    """
    lines = text.splitlines()
    thought = ""
    action_line = -1
    verb = ""
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not thought and stripped.upper().startswith("THOUGHT:"):
            thought = stripped[len("THOUGHT:") :].strip()
        if stripped.upper().startswith("ACTION:"):
            verb = stripped[len("ACTION:") :].strip().upper()
            action_line = i
            break
    if action_line < 0 or verb not in ("READ", "WRITE", "VERIFY", "FINISH"):
        raise ActionParseError(f"no valid ACTION line in reply: {text[:80]!r}")

    rest = lines[action_line + 1 :]
    if verb == "VERIFY":
        return thought, VerifyAction()
    if verb == "FINISH":
        return thought, FinishAction()
    if verb == "READ":
        internal: list[str] = []
        external: list[str] = []
        for line in rest:
            stripped = line.strip()
            if stripped.upper().startswith("INTERNAL:"):
                ids = stripped[len("INTERNAL:") :].split(",")
                internal.extend(u.strip() for u in ids if u.strip())
            elif stripped.upper().startswith("EXTERNAL:"):
                query = stripped[len("EXTERNAL:") :].strip()
                if query:
                    external.append(query)
        if not internal and not external:
            raise ActionParseError("READ carries no internal ids and no queries")
        return thought, ReadAction(internal=tuple(internal), external=tuple(external))
    # WRITE
    for j, line in enumerate(rest):
        stripped = line.strip()
        if stripped.upper().startswith("DRAFT:"):
            first = line.split(":", 1)[1].lstrip()
            chunks = ([first] if first else []) + rest[j + 1 :]
            draft = "\n".join(chunks).strip("\n")
            if not draft.strip():
                break
            return thought, WriteAction(draft=draft)
    raise ActionParseError("WRITE carries no draft text")


# ---------------------------------------------------------------------------
# sub-task machinery


class SubTask:
    """Mutable per-unit episode state. Thrown away when the unit commits."""

    def __init__(self, unit_id: str, model: RepoModel, graph: DependencyGraph, cfg: LoopConfig):
        self.unit_id = unit_id
        self.granularity = graph.granularity[unit_id]
        self.model = model
        self.graph = graph
        self.cfg = cfg
        self.dependencies = graph.successors(unit_id)
        self.reads_performed = 0
        self.draft: str | None = None
        self.draft_state = "none"  # verification status of the current draft
        self.last_outcome: verifier.VerificationOutcome | None = None
        self.claims: tuple[str, ...] = ()
        self.revisions_used = 0
        self.turns: list[Turn] = []

        self.display_id = unit_id
        self.parameters: tuple[str, ...] = ()
        if self.granularity == COMPONENT:
            comp = model.component_index[unit_id]
            self.kind = comp.kind
            self.task_prompt = prompts.component_prompt(comp)
            self.parameters = tuple(component_parameters(comp))
            self.has_args = bool(self.parameters)
            self.has_raises = component_raises(comp)
        elif self.granularity == MODULE:
            self.kind = "module"
            self.task_prompt = prompts.module_prompt(model.module_index[unit_id], model)
            self.has_args = False
            self.has_raises = False
        else:
            self.kind = "repo"
            self.display_id = model.repo.name
            self.task_prompt = prompts.repo_prompt(model.repo, model)
            self.has_args = False
            self.has_raises = False

    def state(self) -> dict[str, str]:
        state = {
            "unit": self.display_id,
            "granularity": self.granularity,
            "kind": self.kind,
            "dependencies": ", ".join(self.dependencies) or "(none)",
        }
        if self.granularity == COMPONENT:
            state["args"] = "present" if self.has_args else "none"
            state["parameters"] = ", ".join(self.parameters) or "(none)"
            state["raises"] = "present" if self.has_raises else "none"
        state.update(
            {
                "steps_used": str(len(self.turns)),
                "steps_max": str(self.cfg.max_steps),
                "reads_performed": str(self.reads_performed),
                "draft": "present" if self.draft is not None else "absent",
                "verification": self.draft_state,
                "revisions_used": str(self.revisions_used),
                "revisions_max": str(self.cfg.max_revisions),
            }
        )
        return state

    def transcript(self) -> str:
        parts = []
        for turn in self.turns:
            parts.append(
                f"--- turn {turn.index} ---\n"
                f"THOUGHT: {turn.thought}\n"
                f"ACTION: {turn.action_label.upper()}\n"
                f"OBSERVATION:\n{turn.observation}"
            )
        return "\n\n".join(parts)


def _source_note(unit_id: str, model: RepoModel) -> str:
    granularity = model.granularity_of(unit_id)
    if granularity == COMPONENT:
        comp = model.component_index[unit_id]
        return (
            f"file: {comp.path} (lines {comp.start_line}-{comp.end_line})\n"
            f"signature: {comp.signature}\n{comp.source}"
        )
    if granularity == MODULE:
        mod = model.module_index[unit_id]
        return f"module directory {mod.path} containing: " + ", ".join(mod.children)
    return f"repository {model.repo.name} with root units: " + ", ".join(model.repo.roots)


def execute_read(
    action: ReadAction,
    subtask: SubTask,
    memory: MemoryStore,
    backends: Backends,
) -> str:
    """Serve a READ memory-first and report what was found.

    Committed records and cached notes come from memory; anything else
    is retrieved from the codebase, cached, and counted. Module and
    repository sub-tasks additionally receive the documents of the
    children they did not explicitly ask for. External queries go to
    the search cache first, then the search backend; an unavailable
    backend becomes part of the observation, not a crash.
    """
    model = subtask.model
    cfg = subtask.cfg
    parts: list[str] = []

    for unit_id in action.internal:
        if cfg.memory_enabled:
            record = memory.get_document(unit_id)
            if record is not None:
                parts.append(
                    f"[memory] {unit_id} (score {record.verification_score:.2f}):\n"
                    f"{record.document}"
                )
                continue
            note = memory.source_lookup(unit_id)
            if note is not None:
                parts.append(f"[memory] {unit_id} (cached source):\n{note}")
                continue
        if model.granularity_of(unit_id) is None:
            parts.append(f"unknown unit id: {unit_id}")
            continue
        note = _source_note(unit_id, model)
        if cfg.memory_enabled:
            memory.source_put(unit_id, note)
        else:
            memory.note_codebase_read(unit_id)
        parts.append(f"[codebase] {unit_id}:\n{note}")

    for query in action.external:
        cached = memory.search_lookup(query)
        if cached is not None:
            parts.append(f"[cache] {query}:\n{cached}")
            continue
        try:
            result = backends.search.search(query)
        except SearchUnavailableError:
            parts.append(f"external search unavailable for: {query}")
            continue
        except BackendError as exc:
            parts.append(f"search failed for {query}: {exc}")
            continue
        memory.search_put(query, result)
        parts.append(f"[search] {query}:\n{result}")

    if subtask.granularity in (MODULE, REPO):
        asked = set(action.internal)
        remaining = [c for c in subtask.dependencies if c not in asked]
        if remaining:
            parts.append("documents of the remaining direct children:")
            if cfg.memory_enabled:
                for record in memory.children_docs(remaining):
                    parts.append(
                        f"[child] {record.key} (score {record.verification_score:.2f}):\n"
                        f"{record.document}"
                    )
            else:
                for child in remaining:
                    memory.note_codebase_read(child)
                    parts.append(f"[child source] {child}:\n{_source_note(child, model)}")

    return "\n\n".join(parts) if parts else "nothing to read"


def _build_record(subtask: SubTask, document: str, claims: tuple[str, ...], score: float, flagged: bool):
    model = subtask.model
    unit_id = subtask.unit_id
    if subtask.granularity == COMPONENT:
        comp = model.component_index[unit_id]
        return ComponentRecord(
            id=unit_id,
            path=comp.path,
            document=document,
            claims=claims,
            depends_on=tuple(subtask.dependencies),
            source_code=comp.source,
            kind=comp.kind,
            verification_score=score,
            below_threshold=flagged,
        )
    if subtask.granularity == MODULE:
        mod = model.module_index[unit_id]
        return ModuleRecord(
            path=unit_id,
            document=document,
            claims=claims,
            child_units=mod.children,
            verification_score=score,
            below_threshold=flagged,
        )
    return RepoRecord(
        name=model.repo.name,
        path=REPO_ID,
        document=document,
        claims=claims,
        child_units=model.repo.roots,
        verification_score=score,
        below_threshold=flagged,
    )


def run_subtask(
    unit_id: str,
    model: RepoModel,
    graph: DependencyGraph,
    memory: MemoryStore,
    backends: Backends,
    cfg: LoopConfig,
    trajectory: TrajectoryLogger | None = None,
) -> SubTaskResult:
    """Run one unit's episode to a committed record.

    The loop ends in one of three ways: FINISH commits a verified
    draft; the revision budget runs out and the current draft is
    committed with the below-threshold flag; or the step budget runs
    out and whatever draft exists (or a stub noting the failure) is
    committed flagged. The sub-task context is local and discarded.
    """
    subtask = SubTask(unit_id, model, graph, cfg)
    log = trajectory or TrajectoryLogger(None)

    def record_turn(thought: str, label: str, observation: str, **extra) -> Turn:
        turn = Turn(
            index=len(subtask.turns) + 1,
            thought=thought,
            action_label=label,
            observation=observation,
        )
        subtask.turns.append(turn)
        log.log(unit_id, turn, **extra)
        return turn

    def ask_for_action():
        user = prompts.selection_prompt(
            subtask.task_prompt, subtask.transcript(), subtask.state()
        )
        reply = backends.generator.generate(
            GenerationRequest(system=prompts.SYSTEM_PROMPT, user=user)
        )
        try:
            return parse_action(reply)
        except ActionParseError:
            corrective = (
                user
                + "\n\nYour previous reply was not a valid action block. "
                "Respond again with exactly one action block."
            )
            reply = backends.generator.generate(
                GenerationRequest(system=prompts.SYSTEM_PROMPT, user=corrective)
            )
            return parse_action(reply)

    while len(subtask.turns) < cfg.max_steps:
        try:
            thought, action = ask_for_action()
        except ActionParseError as exc:
            record_turn("", "noop", f"malformed action response: {exc}")
            continue
        except BackendError as exc:
            record_turn("", "noop", f"generation backend failed: {exc}")
            continue

        if isinstance(action, ReadAction):
            observation = execute_read(action, subtask, memory, backends)
            subtask.reads_performed += 1
            record_turn(thought, action.label, observation)
            continue

        if isinstance(action, WriteAction):
            subtask.draft = action.draft
            subtask.draft_state = "none"
            record_turn(
                thought, action.label, f"draft recorded ({len(action.draft)} characters)"
            )
            continue

        if isinstance(action, VerifyAction):
            if subtask.draft is None:
                record_turn(thought, action.label, "nothing to verify: no draft yet")
                continue
            if subtask.revisions_used >= cfg.max_revisions:
                record_turn(
                    thought,
                    action.label,
                    "revision budget exhausted; committing with below-threshold flag",
                    forced="revisions",
                )
                return _finalize(subtask, memory, flagged=True, forced=True)
            try:
                outcome = verifier.verify_draft(
                    subtask.draft,
                    unit_id,
                    graph,
                    memory,
                    backends,
                    verify_threshold=cfg.verify_threshold,
                    nli_threshold=cfg.nli_threshold,
                    strict=cfg.strict_conflicts,
                )
            except (BackendError, VerifierError) as exc:
                subtask.revisions_used += 1
                subtask.draft_state = "failed"
                record_turn(
                    thought,
                    action.label,
                    f"verification errored and counts as failed: {exc}",
                    revision=subtask.revisions_used,
                )
                continue
            subtask.last_outcome = outcome
            subtask.claims = outcome.claims
            observation = verifier.render_report(outcome, cfg.verify_threshold)
            if outcome.passed:
                subtask.draft_state = "passed"
                record_turn(thought, action.label, observation, score=outcome.score)
            else:
                subtask.revisions_used += 1
                subtask.draft_state = "failed"
                record_turn(
                    thought,
                    action.label,
                    observation,
                    score=outcome.score,
                    revision=subtask.revisions_used,
                )
            continue

        # FINISH
        if subtask.draft_state != "passed":
            record_turn(
                thought, action.label, "cannot finish: no draft has passed verification"
            )
            continue
        if not subtask.claims and subtask.draft:
            # first units have no references, so verification never
            # decomposed the draft; the record should still carry claims
            try:
                subtask.claims = tuple(verifier.extract_claims(subtask.draft, backends))
            except (BackendError, VerifierError) as exc:
                logger.warning("claim extraction at commit failed for %s: %s", unit_id, exc)
        record_turn(thought, action.label, "committing the verified draft")
        return _finalize(subtask, memory, flagged=False, forced=False)

    logger.warning("step budget exhausted for %s; committing flagged", unit_id)
    return _finalize(subtask, memory, flagged=True, forced=True)


def _finalize(subtask: SubTask, memory: MemoryStore, flagged: bool, forced: bool) -> SubTaskResult:
    if subtask.draft is not None:
        document = subtask.draft
    else:
        document = (
            f"# {subtask.unit_id}\n\nDocumentation was not produced for this unit "
            "within its step budget."
        )
    claims = subtask.claims
    score = subtask.last_outcome.score if subtask.last_outcome is not None else 0.0
    record = _build_record(subtask, document, claims, score, flagged)
    stored = memory.commit(record)
    return SubTaskResult(
        unit_id=subtask.unit_id,
        record=stored,
        turns=tuple(subtask.turns),
        flagged=flagged,
        forced=forced,
    )


# ---------------------------------------------------------------------------
# full trajectory


def doc_path(docs_dir: str, unit_id: str, granularity: str) -> str:
    if granularity == COMPONENT:
        return os.path.join(docs_dir, "components", unit_id + ".md")
    if granularity == MODULE:
        return os.path.join(docs_dir, "modules", unit_id.replace("/", os.sep) + ".md")
    return os.path.join(docs_dir, "repo.md")


def _write_doc(docs_dir: str, unit_id: str, granularity: str, document: str) -> None:
    path = doc_path(docs_dir, unit_id, granularity)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(document if document.endswith("\n") else document + "\n")


def run_trajectory(
    model: RepoModel,
    graph: DependencyGraph,
    order: TraversalOrder,
    memory: MemoryStore,
    backends: Backends,
    cfg: LoopConfig,
    docs_dir: str | None = None,
    trajectory: TrajectoryLogger | None = None,
) -> TrajectorySummary:
    """Document every unit in traversal order.

    Units that already hold a committed record (a resumed run) are
    skipped, with their document files re-emitted if missing. Every
    processed unit ends committed, so the committed set is always a
    prefix of the order and each unit starts only after all of its
    predecessors are stored.
    """
    if order.n_components == 0:
        raise InputError("the repository contains no documentable components")

    def record_for(unit_id: str):
        if unit_id == REPO_ID:
            return memory.repos.get(model.repo.name)
        return memory.peek(unit_id)

    generated = 0
    resumed = 0
    flagged: list[str] = []
    for unit_id in order.sequence:
        existing = record_for(unit_id)
        if existing is not None:
            resumed += 1
            if existing.below_threshold:
                flagged.append(unit_id)
            if docs_dir is not None:
                path = doc_path(docs_dir, unit_id, graph.granularity[unit_id])
                if not os.path.exists(path):
                    _write_doc(
                        docs_dir, unit_id, graph.granularity[unit_id], existing.document
                    )
            continue
        result = run_subtask(unit_id, model, graph, memory, backends, cfg, trajectory)
        generated += 1
        if result.flagged:
            flagged.append(unit_id)
        if docs_dir is not None:
            _write_doc(
                docs_dir, unit_id, graph.granularity[unit_id], result.record.document
            )
        if record_for(unit_id) is None:
            raise OrderingViolationError(f"unit finished without a commit: {unit_id}")
        if cfg.throttle > 0:
            time.sleep(cfg.throttle)

    counters = memory.counters
    return TrajectorySummary(
        total_units=len(order.sequence),
        generated=generated,
        resumed=resumed,
        flagged=tuple(flagged),
        codebase_reads=counters.codebase_reads,
        memory_hits=counters.memory_hits,
        codebase_read_targets=tuple(sorted(counters.codebase_read_targets)),
    )
