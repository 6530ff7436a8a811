"""Documentation completeness scoring.

Two halves, averaged: section presence (are the schema's required
sections there, plus any conditional sections that apply to this unit)
and entity coverage (which of the unit's code names the document
actually mentions). Header matching is case-insensitive and tolerant of
markdown level; the exact rule and the alias families live here and are
documented in the README, bit for bit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import InputError
from .source_model import (
    COMPONENT,
    MODULE,
    RepoModel,
    component_parameters,
    component_raises,
    extract_entities,
)

# Canonical section name -> accepted header spellings.
SECTION_ALIASES: dict[str, tuple[str, ...]] = {
    "Summary": ("summary",),
    "Description": ("description",),
    "Returns": ("returns", "return"),
    "Arguments": ("arguments", "args", "parameters", "params"),
    "Exceptions": ("exceptions", "raises"),
    "Side Effects": ("side effects",),
    "Control Flow": ("control flow",),
    "Usage Examples": ("usage examples", "examples", "example"),
    "Tree": ("tree", "module structure", "repository structure", "structure"),
    "Role": ("role",),
    "Components": ("components",),
    "Public API": ("public api",),
    "Dependencies": ("dependencies",),
    "Purpose": ("purpose",),
    "Architecture": ("architecture",),
    "Entry Points": ("entry points",),
    "Core Features": ("core features",),
    "Configuration": ("configuration",),
    "Extension Points": ("extension points",),
}


@dataclass(frozen=True)
class SectionSchema:
    required: tuple[str, ...]
    conditional: tuple[str, ...]


FUNCTION_SCHEMA = SectionSchema(
    required=("Summary", "Description", "Returns"),
    conditional=("Arguments", "Exceptions", "Side Effects", "Control Flow", "Usage Examples"),
)
CLASS_SCHEMA = SectionSchema(
    required=("Summary", "Description", "Returns"),
    conditional=("Arguments", "Exceptions", "Usage Examples", "Side Effects"),
)
MODULE_SCHEMA = SectionSchema(
    required=("Tree", "Role", "Description", "Components", "Public API", "Dependencies"),
    conditional=(),
)
REPO_SCHEMA = SectionSchema(
    required=("Tree", "Purpose", "Architecture", "Entry Points", "Core Features", "Dependencies"),
    conditional=("Configuration", "Extension Points"),
)


def schema_for(granularity: str, kind: str) -> SectionSchema:
    if granularity == COMPONENT:
        return CLASS_SCHEMA if kind == "class" else FUNCTION_SCHEMA
    if granularity == MODULE:
        return MODULE_SCHEMA
    return REPO_SCHEMA


# A header line: optional leading whitespace, up to six hashes, then the
# section name (any alias) with nothing else on the line except bold
# markers, whitespace, and at most one colon on either side of the
# closing markers.
def _header_pattern(canonical: str) -> re.Pattern:
    alternatives = "|".join(re.escape(a) for a in SECTION_ALIASES[canonical])
    return re.compile(
        r"^\s*#{0,6}[*\s]*(?:" + alternatives + r")[*\s]*:?[*\s]*$",
        re.IGNORECASE | re.MULTILINE,
    )


_HEADER_PATTERNS: dict[str, re.Pattern] = {
    name: _header_pattern(name) for name in SECTION_ALIASES
}


def section_present(document: str, canonical: str) -> bool:
    try:
        pattern = _HEADER_PATTERNS[canonical]
    except KeyError:
        raise InputError(f"unknown section name: {canonical}") from None
    return pattern.search(document) is not None


def word_mentions(text: str, name: str) -> bool:
    """Word-boundary match: identifier characters end the name cleanly.

    Dots are boundaries, so a qualified mention like pkg.b.g counts as
    mentioning the bare name g.
    """
    pattern = r"(?<![A-Za-z0-9_])" + re.escape(name) + r"(?![A-Za-z0-9_])"
    return re.search(pattern, text) is not None


@dataclass(frozen=True)
class CompletenessScore:
    unit_id: str
    granularity: str
    kind: str
    section_score: float
    coverage_score: float
    combined: float
    present_sections: tuple[str, ...]
    applicable_sections: tuple[str, ...]
    mentioned_entities: tuple[str, ...]
    total_entities: int


def applicable_sections(unit_id: str, model: RepoModel) -> tuple[str, ...]:
    """Required sections plus the conditional ones this unit triggers.

    Arguments applies when the component takes parameters (a class: its
    constructor), Exceptions when a raise statement appears in its
    source. The remaining conditional sections cannot be decided
    statically and never join the denominator.
    """
    granularity = model.granularity_of(unit_id)
    if granularity is None:
        raise InputError(f"unknown unit id: {unit_id}")
    kind = (
        model.component_index[unit_id].kind if granularity == COMPONENT else granularity
    )
    schema = schema_for(granularity, kind)
    sections = list(schema.required)
    if granularity == COMPONENT:
        comp = model.component_index[unit_id]
        if "Arguments" in schema.conditional and component_parameters(comp):
            sections.append("Arguments")
        if "Exceptions" in schema.conditional and component_raises(comp):
            sections.append("Exceptions")
    return tuple(sections)


def section_presence(document: str, unit_id: str, model: RepoModel) -> tuple[float, tuple[str, ...], tuple[str, ...]]:
    sections = applicable_sections(unit_id, model)
    present = tuple(s for s in sections if section_present(document, s))
    return len(present) / len(sections), present, sections


def entity_coverage(document: str, entities: frozenset[str] | set[str]) -> tuple[float, tuple[str, ...]]:
    """Fraction of entities the document mentions; 1.0 when none exist."""
    if not entities:
        return 1.0, ()
    mentioned = tuple(sorted(e for e in entities if word_mentions(document, e)))
    return len(mentioned) / len(entities), mentioned


def completeness(document: str, unit_id: str, model: RepoModel) -> CompletenessScore:
    granularity = model.granularity_of(unit_id)
    if granularity is None:
        raise InputError(f"unknown unit id: {unit_id}")
    kind = (
        model.component_index[unit_id].kind if granularity == COMPONENT else granularity
    )
    section_score, present, applicable = section_presence(document, unit_id, model)
    entities = extract_entities(unit_id, model).names
    coverage_score, mentioned = entity_coverage(document, entities)
    return CompletenessScore(
        unit_id=unit_id,
        granularity=granularity,
        kind=kind,
        section_score=section_score,
        coverage_score=coverage_score,
        combined=(section_score + coverage_score) / 2.0,
        present_sections=present,
        applicable_sections=applicable,
        mentioned_entities=mentioned,
        total_entities=len(entities),
    )
