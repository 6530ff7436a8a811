"""Completeness scoring: headers, aliases, applicability, coverage."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import build_tree, model_graph_order
from docweave import metrics
from docweave.errors import InputError
from docweave.source_model import REPO_ID, parse_repository


class TestSchemaSelection:
    def test_function_schema(self):
        schema = metrics.schema_for("component", "function")
        assert schema.required == ("Summary", "Description", "Returns")
        assert "Control Flow" in schema.conditional

    def test_method_uses_function_schema(self):
        assert metrics.schema_for("component", "method") == metrics.FUNCTION_SCHEMA

    def test_class_schema(self):
        schema = metrics.schema_for("component", "class")
        assert "Control Flow" not in schema.conditional

    def test_module_schema_all_required(self):
        schema = metrics.schema_for("module", "module")
        assert schema.conditional == ()
        assert len(schema.required) == 6

    def test_repo_schema(self):
        schema = metrics.schema_for("repo", "repo")
        assert "Entry Points" in schema.required
        assert "Configuration" in schema.conditional


class TestHeaderMatching:
    @pytest.mark.parametrize(
        "line",
        [
            "## Returns:",
            "### Returns",
            "# RETURNS:",
            "returns:",
            "Returns",
            "  ## Returns:  ",
            "**Returns:**",
            "## **Returns**:",
            "###### Return:",
        ],
    )
    def test_accepted_header_shapes(self, line):
        assert metrics.section_present(f"intro text\n{line}\nbody", "Returns")

    @pytest.mark.parametrize(
        "line",
        [
            "The function Returns: a value",  # not at line start
            "## Returnside:",  # alias must end the line
            "## Not Returns here",
        ],
    )
    def test_rejected_header_shapes(self, line):
        assert not metrics.section_present(f"{line}\nbody", "Returns")

    def test_alias_families(self):
        assert metrics.section_present("## Args:", "Arguments")
        assert metrics.section_present("## Parameters:", "Arguments")
        assert metrics.section_present("## Params", "Arguments")
        assert metrics.section_present("## Raises:", "Exceptions")
        assert metrics.section_present("## Examples", "Usage Examples")
        assert metrics.section_present("## Example:", "Usage Examples")
        assert metrics.section_present("## Module Structure:", "Tree")
        assert metrics.section_present("## Repository Structure", "Tree")

    def test_unknown_section_rejected(self):
        with pytest.raises(InputError):
            metrics.section_present("anything", "Nonexistent Section")


class TestWordMentions:
    def test_plain_word(self):
        assert metrics.word_mentions("the parser runs fast", "parser")

    def test_substring_rejected(self):
        assert not metrics.word_mentions("the parsers run fast", "parser")
        assert not metrics.word_mentions("reparse everything", "parse")

    def test_dotted_context_counts(self):
        assert metrics.word_mentions("calls pkg.b.g here", "g")
        assert metrics.word_mentions("calls pkg.b.g here", "pkg")

    def test_underscore_is_identifier_glue(self):
        assert not metrics.word_mentions("uses load_file", "load")
        assert metrics.word_mentions("uses load_file", "load_file")

    def test_backticks_and_punctuation(self):
        assert metrics.word_mentions("wraps `clean` nicely", "clean")
        assert metrics.word_mentions("calls clean().", "clean")


class TestApplicability:
    def test_function_without_parameters(self, tmp_path):
        repo = build_tree(tmp_path / "r", {"m.py": "def nop():\n    return 1\n"})
        model = parse_repository(repo)
        sections = metrics.applicable_sections("m.nop", model)
        assert "Arguments" not in sections
        assert "Exceptions" not in sections
        assert set(sections) == {"Summary", "Description", "Returns"}

    def test_function_with_parameters_and_raise(self, medium_repo):
        model = parse_repository(medium_repo)
        sections = metrics.applicable_sections("app.core.load", model)
        assert "Arguments" in sections
        assert "Exceptions" in sections

    def test_class_constructor_decides_arguments(self, medium_repo):
        model = parse_repository(medium_repo)
        sections = metrics.applicable_sections("util.fmt.Formatter", model)
        assert "Arguments" in sections
        # the raise lives in render, which is part of the class source
        assert "Exceptions" in sections

    def test_unknown_unit_rejected(self, medium_repo):
        model = parse_repository(medium_repo)
        with pytest.raises(InputError):
            metrics.applicable_sections("ghost.unit", model)


class TestCoverage:
    def test_empty_entity_set_scores_full(self):
        score, mentioned = metrics.entity_coverage("any text", frozenset())
        assert score == 1.0
        assert mentioned == ()

    def test_partial_coverage(self):
        entities = frozenset({"alpha", "beta", "gamma", "delta"})
        score, mentioned = metrics.entity_coverage(
            "alpha meets beta and gamma", entities
        )
        assert score == pytest.approx(0.75)
        assert mentioned == ("alpha", "beta", "gamma")


class TestCompleteness:
    def test_exact_fraction(self, tmp_path):
        # nop has 3 applicable sections and exactly one entity (its name)
        repo = build_tree(tmp_path / "r", {"m.py": "def nop():\n    return 1\n"})
        model = parse_repository(repo)
        document = "## Summary:\nnop does nothing.\n\n## Description:\nReally.\n"
        score = metrics.completeness(document, "m.nop", model)
        assert score.section_score == pytest.approx(2.0 / 3.0)
        assert score.coverage_score == pytest.approx(1.0)
        assert score.combined == pytest.approx((2.0 / 3.0 + 1.0) / 2.0)

    def test_known_mixed_fraction(self, medium_repo):
        model = parse_repository(medium_repo)
        # load: Summary, Description, Returns, Arguments, Exceptions applicable (5)
        # entities: load, path, fh (3)
        document = (
            "## Summary:\nload reads a file.\n\n"
            "## Description:\nUses the path argument.\n\n"
            "## Returns:\nfile text\n"
        )
        score = metrics.completeness(document, "app.core.load", model)
        assert score.applicable_sections == (
            "Summary", "Description", "Returns", "Arguments", "Exceptions",
        )
        assert score.section_score == pytest.approx(3.0 / 5.0)
        assert score.coverage_score == pytest.approx(2.0 / 3.0)
        assert score.combined == pytest.approx(0.5 * (3.0 / 5.0 + 2.0 / 3.0))

    def test_empty_document_scores_zero_sections(self, medium_repo):
        model = parse_repository(medium_repo)
        score = metrics.completeness("", "app.core.load", model)
        assert score.section_score == 0.0
        assert score.coverage_score == 0.0

    def test_repo_unit_scored(self, medium_repo):
        model = parse_repository(medium_repo)
        document = (
            "## Tree:\nlayout\n\n## Purpose:\nthings\n\n## Architecture:\napp util\n\n"
            "## Entry Points:\nrun\n\n## Core Features:\nmany\n\n## Dependencies:\nnone\n"
        )
        score = metrics.completeness(document, REPO_ID, model)
        assert score.section_score == 1.0
        assert score.coverage_score == 1.0

    @settings(max_examples=80, deadline=None)
    @given(st.text(max_size=300))
    def test_scores_always_in_range(self, medium_repo_text):
        # arbitrary document text never breaks the scorer
        entities = frozenset({"alpha", "beta"})
        score, _ = metrics.entity_coverage(medium_repo_text, entities)
        assert 0.0 <= score <= 1.0
