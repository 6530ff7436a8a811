"""Prompt assembly, state blocks, stub templates, sentence splitting."""

from __future__ import annotations

import pytest

from conftest import model_graph_order
from docweave import metrics, prompts
from docweave.source_model import parse_repository


class TestStateBlock:
    def test_round_trip(self):
        state = {"unit": "a.b", "draft": "absent", "revisions_used": "0"}
        block = prompts.render_state_block(state)
        assert prompts.parse_state_block("before\n" + block + "\nafter") == state

    def test_last_block_wins(self):
        first = prompts.render_state_block({"unit": "old"})
        second = prompts.render_state_block({"unit": "new"})
        parsed = prompts.parse_state_block(first + "\n" + second)
        assert parsed["unit"] == "new"

    def test_no_block_is_empty(self):
        assert prompts.parse_state_block("no block here") == {}


class TestExtractBlock:
    def test_last_pair_wins(self):
        text = (
            prompts.BLOCK_OPEN + "\nfirst\n" + prompts.BLOCK_CLOSE + "\n"
            + prompts.BLOCK_OPEN + "\nsecond\n" + prompts.BLOCK_CLOSE
        )
        assert prompts.extract_block(text) == "second"

    def test_missing_block_is_none(self):
        assert prompts.extract_block("nothing") is None


class TestTaskPrompts:
    def test_component_prompt_embeds_source(self, medium_repo):
        model = parse_repository(medium_repo)
        comp = model.component_index["app.core.process"]
        prompt = prompts.component_prompt(comp)
        assert "<SOURCE_CODE>" in prompt
        assert "def process" in prompt
        assert "app/core.py" in prompt

    def test_module_prompt_embeds_tree(self, medium_repo):
        model = parse_repository(medium_repo)
        prompt = prompts.module_prompt(model.module_index["app"], model)
        assert "<MODULE_TREE>" in prompt
        assert "core.py" in prompt

    def test_repo_prompt_embeds_tree(self, medium_repo):
        model = parse_repository(medium_repo)
        prompt = prompts.repo_prompt(model.repo, model)
        assert "<REPO_TREE>" in prompt
        assert "main.py" in prompt

    def test_selection_prompt_carries_marker_and_state(self):
        prompt = prompts.selection_prompt("task text", "transcript", {"unit": "a.b"})
        assert prompts.ACTION_MARKER in prompt
        assert "unit: a.b" in prompt


class TestStubTemplates:
    @pytest.mark.parametrize(
        "granularity,kind",
        [
            ("component", "function"),
            ("component", "method"),
            ("component", "class"),
            ("module", "module"),
            ("repo", "repo"),
        ],
    )
    def test_stub_satisfies_every_schema_section(self, granularity, kind):
        stub = prompts.render_stub_document(
            granularity, kind, "demo.unit", ["dep.one"], "cafebabe",
            parameters=("alpha",),
        )
        schema = metrics.schema_for(granularity, kind)
        for section in schema.required + schema.conditional:
            assert metrics.section_present(stub, section), (
                f"{granularity}/{kind} stub lacks {section}"
            )

    def test_stub_lists_parameters(self):
        stub = prompts.render_stub_document(
            "component", "function", "m.f", [], "00000000",
            parameters=("alpha", "beta"),
        )
        assert metrics.word_mentions(stub, "alpha")
        assert metrics.word_mentions(stub, "beta")

    def test_stub_names_dependencies(self):
        stub = prompts.render_stub_document(
            "component", "function", "m.f", ["x.y", "z.w"], "00000000"
        )
        assert "x.y" in stub
        assert "z.w" in stub

    def test_revision_note_appears_only_on_revisions(self):
        plain = prompts.render_stub_document("component", "function", "m.f", [], "0" * 8)
        revised = prompts.render_stub_document(
            "component", "function", "m.f", [], "0" * 8, revision=2
        )
        assert "revision" not in plain
        assert "revision 2" in revised

    def test_fingerprint_stability(self):
        assert prompts.request_fingerprint("abc") == prompts.request_fingerprint("abc")
        assert prompts.request_fingerprint("abc") != prompts.request_fingerprint("abd")


class TestSentenceSplitting:
    def test_basic_split(self):
        text = "First thing. Second thing! Third thing?"
        assert prompts.split_sentences(text) == [
            "First thing.", "Second thing!", "Third thing?"
        ]

    def test_headers_and_fences_skipped(self):
        text = (
            "## Summary:\nThe function works. It is fast.\n"
            "```python\nx = 1. 2\n```\nAfter fence."
        )
        sentences = prompts.split_sentences(text)
        assert "The function works." in sentences
        assert "After fence." in sentences
        assert all("x = 1" not in s for s in sentences)
        assert all(not s.startswith("#") for s in sentences)

    def test_list_markers_stripped(self):
        sentences = prompts.split_sentences("- `alpha`: supplied by the caller.")
        assert sentences == ["`alpha`: supplied by the caller."]

    def test_empty_text(self):
        assert prompts.split_sentences("") == []
