"""Prompt text: agent instructions, documentation formats, stub templates.

Everything the generation backend sees is assembled here, along with the
deterministic stand-in documents the offline mock emits. The action
prompts embed a machine-readable [STATE] block; real models get a
compact status summary out of it and the offline mock drives its policy
from the same lines.
"""

from __future__ import annotations

import hashlib
import posixpath
import re

from .source_model import (
    COMPONENT,
    MODULE,
    REPO,
    Component,
    ModuleUnit,
    RepoModel,
    RepoUnit,
    component_parameters,
    component_raises,
)

ACTION_MARKER = "[NEXT-ACTION]"
SELF_EVAL_MARKER = "[SELF-EVAL]"
CLAIM_MARKER = "[EXTRACT-CLAIMS]"

BLOCK_OPEN = "<<<"
BLOCK_CLOSE = ">>>"

SYSTEM_PROMPT = """You are a documentation agent working through one repository \
unit at a time. Respond with exactly one action per reply, in this shape:

THOUGHT: one or two sentences of reasoning
ACTION: READ | WRITE | VERIFY | FINISH

For READ add one or both of:
INTERNAL: comma-separated unit ids to retrieve
EXTERNAL: a web search query (repeat the line for more queries)

For WRITE put the complete markdown document after a DRAFT: line:
DRAFT:
<the full document>

READ returns stored documentation or source for the named units and \
search results for external queries. WRITE records the draft, replacing \
any earlier one. VERIFY scores the draft and checks its claims against \
trusted neighboring documents; failures report the conflicting claims. \
FINISH commits the verified draft and is refused until VERIFY has passed.

Ground every statement in the provided or retrieved material. Read the \
listed dependencies before writing. When VERIFY reports conflicts, \
rewrite the draft to resolve them and verify again."""


FUNCTION_FORMAT = """# <unit id>

## Summary:
- One line stating what the function does.

## Description:
- How it works and why it exists, in a short paragraph.
- Callers inside the repository and when they invoke it.

## Args:
- name (type): meaning, accepted values, default. Omit when the function takes no arguments.

## Returns:
- Type and meaning of the result, including sentinel values.

## Raises:
- Exception type: the condition that triggers it.

## Constraints:
- Preconditions, invariants, and complexity or performance notes.

## Side Effects:
- Files, globals, network, or process state the function touches.

## Control Flow:
- A mermaid flowchart of the main branches.

## Examples:
- A short runnable usage example. Include only for public, non-trivial functions."""

METHOD_FORMAT = FUNCTION_FORMAT.replace("the function", "the method") + """

## State Changes:
- Instance attributes read and written, and what each write means."""

CLASS_FORMAT = """# <unit id>

## Summary:
- One line stating what the class represents.

## Description:
- The class's responsibility and how it collaborates with its neighbors.

## State:
- Instance attributes with types and meaning, plus constructor arguments.

## Lifecycle:
- How instances are created, used, and disposed of.

## Method Map:
- One line per public method: name, purpose, key collaborators.

## Raises:
- Exception type: the condition that triggers it, for constructor and methods.

## Example:
- A short construction-and-use example."""

MODULE_FORMAT = """# <module path>

## Tree:
- The module's file and subdirectory tree.

## Role:
- The module's responsibility inside the repository, one or two lines.

## Description:
- How the module's pieces fit together.

## Components:
- One line per child unit: name and purpose.

## Public API:
- The names intended to be used from outside the module.

## Dependencies:
- Internal units and external packages the module relies on.

## Constraints:
- Invariants, ordering requirements, or environment assumptions."""

REPO_FORMAT = """# <repository name>

## Tree:
- The top levels of the repository layout.

## Purpose:
- What the project is for and who uses it.

## Architecture:
- The main subsystems and how data flows between them.

## Entry Points:
- Scripts, executables, or callables where execution starts.

## Core Features:
- The principal capabilities, one line each.

## Dependencies:
- Runtime and tooling dependencies.

## Configuration:
- Config files, environment variables, and flags. Include when the repository has any.

## Extension Points:
- Hooks, plugin seams, or intended subclassing points. Include when present."""


def format_for(granularity: str, kind: str) -> str:
    if granularity == MODULE:
        return MODULE_FORMAT
    if granularity == REPO:
        return REPO_FORMAT
    if kind == "class":
        return CLASS_FORMAT
    if kind == "method":
        return METHOD_FORMAT
    return FUNCTION_FORMAT


# ---------------------------------------------------------------------------
# sub-task injection prompts


def component_prompt(comp: Component) -> str:
    imports = "\n".join(comp.imports) if comp.imports else "(no imports)"
    return (
        f"Generate comprehensive documentation for the {comp.kind} `{comp.id}` "
        "using the provided source code and file path.\n\n"
        "The document must follow this format:\n\n"
        f"{format_for(COMPONENT, comp.kind)}\n\n"
        f"<FILE_PATH>\n{comp.path}\n</FILE_PATH>\n\n"
        f"<IMPORT_INFORMATION_IN_THE_FILE>\n{imports}\n</IMPORT_INFORMATION_IN_THE_FILE>\n\n"
        f"<SOURCE_CODE>\n{comp.source}\n</SOURCE_CODE>"
    )


def module_prompt(mod: ModuleUnit, model: RepoModel) -> str:
    return (
        f"Generate comprehensive documentation for the module `{mod.path}`, the "
        "repository directory rooted at that path. Documentation for every child "
        "unit is delivered alongside READ results.\n\n"
        "The document must follow this format:\n\n"
        f"{MODULE_FORMAT}\n\n"
        f"<MODULE_TREE>\n{render_module_tree(model, mod.path)}\n</MODULE_TREE>"
    )


def repo_prompt(repo: RepoUnit, model: RepoModel) -> str:
    return (
        f"Generate comprehensive documentation for the repository `{repo.name}` "
        "as a whole. Documentation for every top-level unit is delivered "
        "alongside READ results.\n\n"
        "The document must follow this format:\n\n"
        f"{REPO_FORMAT}\n\n"
        f"<REPO_TREE>\n{render_repo_tree(model)}\n</REPO_TREE>"
    )


def render_module_tree(model: RepoModel, path: str) -> str:
    lines = [posixpath.basename(path) + "/"]
    prefix = path + "/"
    entries = sorted({p[len(prefix) :] for p in model.file_paths if p.startswith(prefix)})
    seen_dirs: set[str] = set()
    for entry in entries:
        parts = entry.split("/")
        for depth in range(len(parts) - 1):
            d = "/".join(parts[: depth + 1])
            if d not in seen_dirs:
                seen_dirs.add(d)
                lines.append("    " * (depth + 1) + parts[depth] + "/")
        lines.append("    " * len(parts) + parts[-1])
    return "\n".join(lines)


def render_repo_tree(model: RepoModel, max_depth: int = 3) -> str:
    lines = [model.repo.name + "/"]
    seen_dirs: set[str] = set()
    for path in model.file_paths:
        parts = path.split("/")
        if len(parts) > max_depth:
            parts = parts[:max_depth]
            tail_is_dir = True
        else:
            tail_is_dir = False
        for depth in range(len(parts) - 1):
            d = "/".join(parts[: depth + 1])
            if d not in seen_dirs:
                seen_dirs.add(d)
                lines.append("    " * (depth + 1) + parts[depth] + "/")
        leaf = "    " * len(parts) + parts[-1] + ("/" if tail_is_dir else "")
        if tail_is_dir:
            d = "/".join(parts)
            if d in seen_dirs:
                continue
            seen_dirs.add(d)
        lines.append(leaf)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# state block


_STATE_RE = re.compile(r"\[STATE\]\n(.*?)\[/STATE\]", re.DOTALL)


def render_state_block(state: dict[str, str]) -> str:
    body = "".join(f"{key}: {value}\n" for key, value in state.items())
    return f"[STATE]\n{body}[/STATE]"


def parse_state_block(text: str) -> dict[str, str]:
    """Last [STATE] block in the text as a flat dict; empty if none."""
    matches = _STATE_RE.findall(text)
    if not matches:
        return {}
    state: dict[str, str] = {}
    for line in matches[-1].splitlines():
        if ":" in line:
            key, value = line.split(":", 1)
            state[key.strip()] = value.strip()
    return state


def selection_prompt(subtask_prompt: str, transcript: str, state: dict[str, str]) -> str:
    parts = [subtask_prompt]
    if transcript:
        parts.append("Transcript of this sub-task so far:\n\n" + transcript)
    parts.append(render_state_block(state))
    parts.append(f"{ACTION_MARKER} Respond with exactly one action block.")
    return "\n\n".join(parts)


def self_eval_prompt(document: str, unit_id: str, granularity: str) -> str:
    return (
        f"{SELF_EVAL_MARKER} Score this draft documentation for the "
        f"{granularity} `{unit_id}` on three axes, each in [0, 1]: "
        "consistency (agrees with the source and retrieved material), "
        "completeness (covers every section and behavior), and helpfulness "
        "(a newcomer could act on it). Return only a JSON object with keys "
        '"consistency", "completeness", "helpfulness".\n\n'
        f"Document:\n{BLOCK_OPEN}\n{document}\n{BLOCK_CLOSE}"
    )


def claim_extraction_prompt(document: str) -> str:
    return (
        f"{CLAIM_MARKER} You are a technical documentation analyst. Extract "
        "the atomic factual claims from the document below: statements about "
        "behavior, structure, types, values, or relationships that could be "
        "checked against other documents. Exclude subjective opinions, vague "
        "descriptions, and section headers. Return ONLY a JSON array of "
        "strings, one claim per element, no other text.\n\n"
        f"Document:\n{BLOCK_OPEN}\n{document}\n{BLOCK_CLOSE}"
    )


def extract_block(text: str) -> str | None:
    """Content between the last <<< / >>> pair (used by mock backends)."""
    start = text.rfind(BLOCK_OPEN)
    end = text.rfind(BLOCK_CLOSE)
    if start == -1 or end == -1 or end <= start:
        return None
    return text[start + len(BLOCK_OPEN) : end].strip("\n")


# ---------------------------------------------------------------------------
# deterministic stub documents for offline runs


def request_fingerprint(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:8]


def _dep_sentence(dependencies: list[str]) -> str:
    if not dependencies:
        return "It depends on no other internal units."
    return "It depends on " + ", ".join(dependencies) + "."


def render_stub_document(
    granularity: str,
    kind: str,
    unit_id: str,
    dependencies: list[str],
    fingerprint: str,
    revision: int = 0,
    parameters: tuple[str, ...] | list[str] = (),
) -> str:
    """Canned template filled with the unit id; offline WRITE drafts.

    Contains every section header the scoring schema can ask about for
    the granularity/kind, so schema-complete coverage is achievable
    without a live model.
    """
    name = unit_id.rsplit(".", 1)[-1] if granularity == COMPONENT else unit_id
    revision_note = (
        f" This is revision {revision} of the draft." if revision else ""
    )
    dep_line = _dep_sentence(dependencies)

    if granularity == COMPONENT:
        body = [
            f"# {unit_id}",
            "",
            "## Summary:",
            f"{name} is a {kind} of this repository documented offline.",
            "",
            "## Description:",
            f"The {kind} {unit_id} is documented from its source text. "
            f"{dep_line}{revision_note}",
            "",
            "## Args:",
            *(
                [f"- `{p}`: supplied by the caller." for p in parameters]
                or ["Arguments are described in the signature shown in the source."]
            ),
            "",
            "## Returns:",
            f"{name} returns the value its source computes.",
            "",
            "## Raises:",
            "Raised exceptions follow the raise statements in the source.",
            "",
            "## Constraints:",
            "No constraints beyond those visible in the source.",
            "",
            "## Side Effects:",
            "None recorded by the offline generator.",
            "",
            "## Control Flow:",
            "```mermaid",
            "flowchart TD",
            f"    entry --> {name.replace('__', 'x')}",
            "```",
            "",
            "## Examples:",
            f"See the source of {unit_id}.",
        ]
        if kind == "method":
            body += ["", "## State Changes:", "Attribute access follows the source."]
    elif granularity == MODULE:
        children = ", ".join(dependencies) if dependencies else "no children"
        body = [
            f"# {unit_id}",
            "",
            "## Tree:",
            "```",
            f"{posixpath.basename(unit_id)}/",
            "```",
            "",
            "## Role:",
            f"Module {unit_id} groups related units of this repository.",
            "",
            "## Description:",
            f"Module {unit_id} contains {children}.{revision_note}",
            "",
            "## Components:",
            f"Its child units are {children}.",
            "",
            "## Public API:",
            f"The public surface of {unit_id} is its child units.",
            "",
            "## Dependencies:",
            dep_line,
            "",
            "## Constraints:",
            "Children are documented before the module itself.",
        ]
    else:
        roots = ", ".join(dependencies) if dependencies else "no units"
        body = [
            f"# {unit_id}",
            "",
            "## Tree:",
            "```",
            f"{unit_id}/",
            "```",
            "",
            "## Purpose:",
            f"Repository {unit_id} is documented bottom-up from its units.{revision_note}",
            "",
            "## Architecture:",
            f"The repository is organized around {roots}.",
            "",
            "## Entry Points:",
            f"Entry points live among {roots}.",
            "",
            "## Core Features:",
            "Each top-level unit provides one feature area.",
            "",
            "## Dependencies:",
            dep_line,
            "",
            "## Configuration:",
            "No configuration recorded by the offline generator.",
            "",
            "## Extension Points:",
            "No extension points recorded by the offline generator.",
        ]

    if granularity == COMPONENT and kind == "class":
        insert_at = body.index("## Args:")
        class_sections = [
            "## State:",
            "Instance state follows the constructor in the source.",
            "",
            "## Lifecycle:",
            "Instances are constructed and used as in the source.",
            "",
            "## Method Map:",
            f"Methods of {name} are documented as their own units.",
            "",
        ]
        body[insert_at:insert_at] = class_sections
        body += ["", "## Example:", f"See the source of {unit_id}."]

    body += ["", f"<!-- generated offline {fingerprint} -->"]
    return "\n".join(body)


# ---------------------------------------------------------------------------
# sentence splitting shared by the mock claim extractor

_HEADER_LINE = re.compile(r"^\s*#")
_COMMENT_LINE = re.compile(r"^\s*<!--")
_LIST_PREFIX = re.compile(r"^\s*(?:[-*+]|\d+[.)])\s+")
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def split_sentences(document: str) -> list[str]:
    """Prose sentences of a markdown document.

    Skips headers, fenced code, and comment lines; strips list markers.
    The offline mock uses this as its claim decomposition.
    """
    sentences: list[str] = []
    in_fence = False
    for line in document.splitlines():
        stripped = line.strip()
        if stripped.startswith("```"):
            in_fence = not in_fence
            continue
        if in_fence or not stripped:
            continue
        if _HEADER_LINE.match(stripped) or _COMMENT_LINE.match(stripped):
            continue
        text = _LIST_PREFIX.sub("", stripped)
        for piece in _SENTENCE_SPLIT.split(text):
            piece = piece.strip()
            if piece and any(ch.isalpha() for ch in piece):
                sentences.append(piece)
    return sentences
