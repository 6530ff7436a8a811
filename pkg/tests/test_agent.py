"""Agent loop: action parsing, reads, budgets, forced commits, resume."""

from __future__ import annotations

import json

import pytest

from conftest import model_graph_order
from docweave import agent
from docweave.agent import (
    ActionParseError,
    FinishAction,
    LoopConfig,
    ReadAction,
    SubTask,
    VerifyAction,
    WriteAction,
    parse_action,
)
from docweave.backends import (
    Backends,
    MockEntailmentClient,
    MockGenerationClient,
    MockSearchClient,
    ScriptedGenerationClient,
    UnavailableSearchClient,
    make_backends,
)
from docweave.memory import MemoryStore
from docweave.source_model import REPO_ID


class TestParseAction:
    def test_read_internal(self):
        thought, action = parse_action(
            "THOUGHT: need context\nACTION: READ\nINTERNAL: a.b, c.d"
        )
        assert thought == "need context"
        assert action == ReadAction(internal=("a.b", "c.d"), external=())

    def test_read_external(self):
        _, action = parse_action(
            "THOUGHT: look it up\nACTION: READ\nEXTERNAL: what is a trie"
        )
        assert action == ReadAction(internal=(), external=("what is a trie",))

    def test_read_mixed(self):
        _, action = parse_action(
            "THOUGHT: both\nACTION: READ\nINTERNAL: a.b\nEXTERNAL: query"
        )
        assert action.internal == ("a.b",)
        assert action.external == ("query",)

    def test_read_empty_rejected(self):
        with pytest.raises(ActionParseError):
            parse_action("THOUGHT: hm\nACTION: READ")

    def test_write_multiline_draft(self):
        _, action = parse_action(
            "THOUGHT: drafting\nACTION: WRITE\nDRAFT:\n# Title\n\nBody text."
        )
        assert action == WriteAction(draft="# Title\n\nBody text.")

    def test_write_same_line_draft(self):
        _, action = parse_action("THOUGHT: quick\nACTION: WRITE\nDRAFT: one liner")
        assert action.draft == "one liner"

    def test_write_empty_rejected(self):
        with pytest.raises(ActionParseError):
            parse_action("THOUGHT: oops\nACTION: WRITE\nDRAFT:\n")

    def test_verify_and_finish(self):
        assert parse_action("THOUGHT: check\nACTION: VERIFY")[1] == VerifyAction()
        assert parse_action("THOUGHT: done\nACTION: FINISH")[1] == FinishAction()

    def test_case_insensitive_verb(self):
        _, action = parse_action("thought: x\naction: verify")
        assert action == VerifyAction()

    def test_missing_action_rejected(self):
        with pytest.raises(ActionParseError):
            parse_action("THOUGHT: thinking only")

    def test_unknown_verb_rejected(self):
        with pytest.raises(ActionParseError):
            parse_action("THOUGHT: x\nACTION: PONDER")


class TestExecuteRead:
    def make(self, repo, unit_id, memory_enabled=True):
        model, graph, order = model_graph_order(repo)
        cfg = LoopConfig(memory_enabled=memory_enabled)
        subtask = SubTask(unit_id, model, graph, cfg)
        return model, graph, subtask

    def test_committed_doc_is_a_memory_hit(self, medium_repo, tmp_path, mock_backends):
        model, graph, subtask = self.make(medium_repo, "app.core.process")
        memory = MemoryStore(str(tmp_path / "m.log"))
        run_one_unit(medium_repo, "app.helpers.clean", memory, mock_backends)
        observation = agent.execute_read(
            ReadAction(internal=("app.helpers.clean",), external=()),
            subtask, memory, mock_backends,
        )
        assert "[memory] app.helpers.clean" in observation
        assert memory.counters.memory_hits >= 1
        assert memory.counters.codebase_reads == 0

    def test_uncommitted_goes_to_codebase_then_cache(
        self, medium_repo, tmp_path, mock_backends
    ):
        model, graph, subtask = self.make(medium_repo, "app.core.process")
        memory = MemoryStore(str(tmp_path / "m.log"))
        action = ReadAction(internal=("app.helpers.clean",), external=())
        first = agent.execute_read(action, subtask, memory, mock_backends)
        assert "[codebase] app.helpers.clean" in first
        assert memory.counters.codebase_reads == 1
        second = agent.execute_read(action, subtask, memory, mock_backends)
        assert "(cached source)" in second
        assert memory.counters.codebase_reads == 1  # still one

    def test_unknown_id_reported(self, medium_repo, tmp_path, mock_backends):
        model, graph, subtask = self.make(medium_repo, "app.core.process")
        memory = MemoryStore(str(tmp_path / "m.log"))
        observation = agent.execute_read(
            ReadAction(internal=("no.such.unit",), external=()),
            subtask, memory, mock_backends,
        )
        assert "unknown unit id: no.such.unit" in observation

    def test_search_hits_backend_then_cache(self, medium_repo, tmp_path, mock_backends):
        model, graph, subtask = self.make(medium_repo, "app.core.process")
        memory = MemoryStore(str(tmp_path / "m.log"))
        action = ReadAction(internal=(), external=("what is ljust",))
        first = agent.execute_read(action, subtask, memory, mock_backends)
        assert "[search] what is ljust" in first
        second = agent.execute_read(action, subtask, memory, mock_backends)
        assert "[cache] what is ljust" in second

    def test_search_unavailable_is_observation(self, medium_repo, tmp_path):
        model, graph, subtask = self.make(medium_repo, "app.core.process")
        memory = MemoryStore(str(tmp_path / "m.log"))
        backends = Backends(
            generator=MockGenerationClient(),
            entailment=MockEntailmentClient(),
            search=UnavailableSearchClient(),
        )
        observation = agent.execute_read(
            ReadAction(internal=(), external=("anything",)), subtask, memory, backends
        )
        assert "external search unavailable for: anything" in observation

    def test_module_read_includes_remaining_children(
        self, medium_repo, tmp_path, mock_backends
    ):
        memory = MemoryStore(str(tmp_path / "m.log"))
        model, graph, order = model_graph_order(medium_repo)
        cfg = LoopConfig()
        for unit_id in order.sequence:
            if unit_id in ("app", "util", REPO_ID):
                continue
            agent.run_subtask(unit_id, model, graph, memory, mock_backends, cfg)
        subtask = SubTask("app", model, graph, cfg)
        observation = agent.execute_read(
            ReadAction(internal=("app.core.load",), external=()),
            subtask, memory, mock_backends,
        )
        assert "[memory] app.core.load" in observation
        assert "remaining direct children" in observation
        assert "[child] app.core.process" in observation

    def test_memory_disabled_reads_source_every_time(
        self, medium_repo, tmp_path, mock_backends
    ):
        model, graph, subtask = self.make(
            medium_repo, "app.core.process", memory_enabled=False
        )
        memory = MemoryStore(str(tmp_path / "m.log"))
        run_one_unit(medium_repo, "app.helpers.clean", memory, mock_backends)
        action = ReadAction(internal=("app.helpers.clean",), external=())
        observation = agent.execute_read(action, subtask, memory, mock_backends)
        assert "[codebase]" in observation
        agent.execute_read(action, subtask, memory, mock_backends)
        assert memory.counters.codebase_reads == 2
        assert memory.counters.memory_hits == 0


def run_one_unit(repo, unit_id, memory, backends, **cfg_overrides):
    model, graph, order = model_graph_order(repo)
    cfg = LoopConfig(**cfg_overrides)
    return agent.run_subtask(unit_id, model, graph, memory, backends, cfg)


class TestRunSubtask:
    def test_clean_episode_shape(self, minimal_repo, tmp_path, mock_backends):
        memory = MemoryStore(str(tmp_path / "m.log"))
        result = run_one_unit(minimal_repo, "solo.greet", memory, mock_backends)
        labels = [t.action_label for t in result.turns]
        assert labels == ["write", "verify", "finish"]
        assert not result.flagged
        assert not result.forced
        assert result.record.verification_score == pytest.approx(0.975)
        assert result.record.claims  # backfilled at commit
        assert memory.peek("solo.greet") is not None

    def test_dependent_unit_reads_first(self, medium_repo, tmp_path, mock_backends):
        memory = MemoryStore(str(tmp_path / "m.log"))
        run_one_unit(medium_repo, "app.helpers.clean", memory, mock_backends)
        result = run_one_unit(medium_repo, "app.core.process", memory, mock_backends)
        labels = [t.action_label for t in result.turns]
        assert labels == ["read", "write", "verify", "finish"]

    def test_failing_draft_burns_two_revisions_then_flagged(
        self, minimal_repo, tmp_path
    ):
        memory = MemoryStore(str(tmp_path / "m.log"))
        backends = Backends(
            generator=MockGenerationClient(self_scores=(0.5, 0.5, 0.5)),
            entailment=MockEntailmentClient(),
            search=MockSearchClient(),
        )
        result = run_one_unit(minimal_repo, "solo.greet", memory, backends)
        labels = [t.action_label for t in result.turns]
        assert labels == ["write", "verify", "write", "verify", "write", "verify"]
        assert result.flagged
        assert result.forced
        assert "revision budget exhausted" in result.turns[-1].observation
        record = memory.peek("solo.greet")
        assert record.below_threshold
        # the draft that was written is still committed, not a stub
        assert "solo.greet" in record.document

    def test_step_budget_exhaustion_commits_stub(self, minimal_repo, tmp_path):
        memory = MemoryStore(str(tmp_path / "m.log"))
        backends = Backends(
            generator=ScriptedGenerationClient(
                ["THOUGHT: stall\nACTION: VERIFY"] * 4
            ),
            entailment=MockEntailmentClient(),
            search=MockSearchClient(),
        )
        result = run_one_unit(
            minimal_repo, "solo.greet", memory, backends, max_steps=4
        )
        assert result.flagged
        assert len(result.turns) == 4
        assert all("nothing to verify" in t.observation for t in result.turns)
        record = memory.peek("solo.greet")
        assert record.below_threshold
        assert "was not produced" in record.document
        assert record.verification_score == 0.0

    def test_finish_refused_until_verified(self, minimal_repo, tmp_path):
        memory = MemoryStore(str(tmp_path / "m.log"))
        backends = Backends(
            generator=ScriptedGenerationClient(
                [
                    "THOUGHT: skip ahead\nACTION: FINISH",
                    "THOUGHT: draft\nACTION: WRITE\nDRAFT:\n# solo.greet doc",
                    "THOUGHT: now done\nACTION: FINISH",
                ]
            ),
            entailment=MockEntailmentClient(),
            search=MockSearchClient(),
        )
        result = run_one_unit(
            minimal_repo, "solo.greet", memory, backends, max_steps=3
        )
        finishes = [t for t in result.turns if t.action_label == "finish"]
        assert all("cannot finish" in t.observation for t in finishes)
        assert result.flagged  # budget ran out without a verified draft

    def test_malformed_reply_gets_one_corrective_reprompt(
        self, minimal_repo, tmp_path
    ):
        generator = ScriptedGenerationClient(
            [
                "this is not an action block",
                "THOUGHT: corrected\nACTION: WRITE\nDRAFT:\n# solo.greet",
                "THOUGHT: v\nACTION: VERIFY",
                json.dumps(
                    {"consistency": 0.96, "completeness": 0.94, "helpfulness": 0.95}
                ),
                "THOUGHT: f\nACTION: FINISH",
                json.dumps(["solo.greet greets."]),
            ]
        )
        memory = MemoryStore(str(tmp_path / "m.log"))
        backends = Backends(
            generator=generator,
            entailment=MockEntailmentClient(),
            search=MockSearchClient(),
        )
        result = run_one_unit(minimal_repo, "solo.greet", memory, backends)
        assert [t.action_label for t in result.turns] == ["write", "verify", "finish"]
        assert not result.flagged

    def test_double_malformed_becomes_noop_turn(self, minimal_repo, tmp_path):
        generator = ScriptedGenerationClient(
            ["garbage one", "garbage two"] + ["THOUGHT: stall\nACTION: VERIFY"] * 2
        )
        memory = MemoryStore(str(tmp_path / "m.log"))
        backends = Backends(
            generator=generator,
            entailment=MockEntailmentClient(),
            search=MockSearchClient(),
        )
        result = run_one_unit(
            minimal_repo, "solo.greet", memory, backends, max_steps=3
        )
        assert result.turns[0].action_label == "noop"
        assert "malformed action response" in result.turns[0].observation


class TestDocPaths:
    def test_shapes(self, tmp_path):
        docs = str(tmp_path / "docs")
        assert agent.doc_path(docs, "app.core.load", "component").endswith(
            "docs/components/app.core.load.md"
        )
        assert agent.doc_path(docs, "pkg/sub", "module").endswith(
            "docs/modules/pkg/sub.md"
        )
        assert agent.doc_path(docs, REPO_ID, "repo").endswith("docs/repo.md")


class TestRunTrajectory:
    def test_full_run_commits_every_unit(self, medium_repo, tmp_path, mock_backends):
        model, graph, order = model_graph_order(medium_repo)
        memory = MemoryStore(str(tmp_path / "m.log"))
        summary = agent.run_trajectory(
            model, graph, order, memory, mock_backends, LoopConfig(),
            docs_dir=str(tmp_path / "docs"),
        )
        assert summary.total_units == len(order.sequence)
        assert summary.generated == len(order.sequence)
        assert summary.resumed == 0
        assert summary.flagged == ()
        assert len(memory) == len(order.sequence)

    def test_resumed_run_skips_committed_units(
        self, medium_repo, tmp_path, mock_backends
    ):
        model, graph, order = model_graph_order(medium_repo)
        log = str(tmp_path / "m.log")
        memory = MemoryStore(log)
        agent.run_trajectory(
            model, graph, order, memory, mock_backends, LoopConfig(),
            docs_dir=str(tmp_path / "docs"),
        )
        memory.close()

        restored = MemoryStore.restore(log, attach=True)
        summary = agent.run_trajectory(
            model, graph, order, restored, mock_backends, LoopConfig(),
            docs_dir=str(tmp_path / "docs"),
        )
        assert summary.generated == 0
        assert summary.resumed == len(order.sequence)

    def test_resume_backfills_missing_doc_files(
        self, medium_repo, tmp_path, mock_backends
    ):
        import os

        model, graph, order = model_graph_order(medium_repo)
        log = str(tmp_path / "m.log")
        docs = str(tmp_path / "docs")
        memory = MemoryStore(log)
        agent.run_trajectory(
            model, graph, order, memory, mock_backends, LoopConfig(), docs_dir=docs
        )
        memory.close()
        victim = agent.doc_path(docs, "app.core.load", "component")
        os.remove(victim)

        restored = MemoryStore.restore(log, attach=True)
        agent.run_trajectory(
            model, graph, order, restored, mock_backends, LoopConfig(), docs_dir=docs
        )
        assert os.path.exists(victim)
