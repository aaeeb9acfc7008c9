from __future__ import annotations

import json

import pytest

from storyloom.backends import MockBackend, TransportError
from storyloom.engine import (
    Ablations,
    Engine,
    RunAborted,
    RunConfig,
    ablation_config,
    end_story,
    outline_alignment_step,
    run_re3,
    run_rolling,
)
from storyloom.story import Premise

PREMISE = Premise(
    "A harbor town wakes to find every boat gone, and the clerk who keeps the "
    "ledgers must find out who took them before the season turns."
)

FAST = RunConfig(
    outline_points=3,
    passages_per_leaf=2,
    continuation_tokens=48,
    max_context=512,
    rolling_truncate=256,
    rolling_total=192,
    num_candidates=3,
)


class TestAlignmentStep:
    def test_advance_on_large_drop(self):
        assert outline_alignment_step(-1.0, -1.6, 0.5) is True

    def test_stay_on_small_drop(self):
        assert outline_alignment_step(-1.0, -1.2, 0.5) is False

    def test_equal_threshold_stays(self):
        assert outline_alignment_step(-1.0, -1.5, 0.5) is False

    def test_threshold_must_be_positive(self):
        with pytest.raises(ValueError):
            outline_alignment_step(-1.0, -2.0, 0.0)


class TestRunConfig:
    def test_rolling_budget_must_fit_context(self):
        with pytest.raises(ValueError):
            RunConfig(rolling_truncate=900, continuation_tokens=256, max_context=1024)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            RunConfig(mode="other")


class TestFixedRun:
    def test_passage_count_is_points_times_per_leaf(self):
        artifact = run_re3(MockBackend(seed=5), PREMISE, FAST)
        assert len(artifact.passages) == 6  # 3 points x 2
        labels = [p["section_path"] for p in artifact.passages]
        assert labels == ["1", "1", "2", "2", "3", "3"]

    def test_passages_respect_token_cap(self):
        artifact = run_re3(MockBackend(seed=5), PREMISE, FAST)
        assert all(p["token_count"] <= FAST.continuation_tokens for p in artifact.passages)

    def test_final_text_ends_with_suffix(self):
        artifact = run_re3(MockBackend(seed=5), PREMISE, FAST)
        assert artifact.final_text.endswith("The End.")

    def test_prompts_respect_budget(self):
        artifact = run_re3(MockBackend(seed=5), PREMISE, FAST)
        budget = FAST.max_context - FAST.continuation_tokens
        assert all(log.prompt_tokens <= budget for log in artifact.step_logs)

    def test_byte_identical_across_runs(self):
        a = run_re3(MockBackend(seed=5), PREMISE, FAST)
        b = run_re3(MockBackend(seed=5), PREMISE, FAST)
        assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(
            b.to_dict(), sort_keys=True
        )

    def test_log_count_matches_passage_count(self):
        artifact = run_re3(MockBackend(seed=5), PREMISE, FAST)
        assert len(artifact.step_logs) == len(artifact.passages)


class TestRollingRun:
    def test_generates_until_total_then_ends(self):
        artifact = run_rolling(MockBackend(seed=5), PREMISE, FAST)
        total = sum(p["token_count"] for p in artifact.passages)
        assert total >= FAST.rolling_total
        assert artifact.final_text.endswith("The End.")

    def test_prompts_respect_rolling_budget(self):
        artifact = run_rolling(MockBackend(seed=5), PREMISE, FAST)
        assert all(
            log.prompt_tokens <= FAST.rolling_truncate for log in artifact.step_logs
        )

    def test_under_budget_prompt_is_untruncated(self):
        artifact = run_rolling(MockBackend(seed=5), PREMISE, FAST)
        first = artifact.step_logs[0].prompt
        assert first == PREMISE.text

    def test_late_prompts_lose_premise_head(self):
        from dataclasses import replace

        config = replace(FAST, rolling_total=384)  # enough steps to overflow
        backend = MockBackend(seed=5)
        artifact = run_rolling(backend, PREMISE, config)
        last = artifact.step_logs[-1].prompt
        first_words = " ".join(PREMISE.text.split()[:3])
        assert backend.count_tokens(last) <= config.rolling_truncate
        assert not last.startswith(first_words)


class TestBaselineEquivalence:
    def test_triple_ablation_matches_rolling_step_for_step(self):
        config = ablation_config(FAST, "baseline_equivalent")
        re3_artifact = run_re3(MockBackend(seed=9), PREMISE, config)
        rolling_artifact = run_rolling(MockBackend(seed=9), PREMISE, FAST)
        assert len(re3_artifact.step_logs) == len(rolling_artifact.step_logs)
        for a, b in zip(re3_artifact.step_logs, rolling_artifact.step_logs):
            assert a.prompt == b.prompt
            assert a.chosen_index == b.chosen_index
        assert [p["text"] for p in re3_artifact.passages] == [
            p["text"] for p in rolling_artifact.passages
        ]
        assert re3_artifact.final_text == rolling_artifact.final_text

    def test_no_plan_alone_still_reranks(self):
        config = ablation_config(FAST, "no_plan")
        artifact = run_re3(MockBackend(seed=9), PREMISE, config)
        scored = [
            c for log in artifact.step_logs for c in log.candidates
            if "composite" in c
        ]
        assert scored  # rewrite stayed active

    def test_no_rerank_accepts_first_candidate(self):
        config = ablation_config(FAST, "no_rerank")
        artifact = run_re3(MockBackend(seed=9), PREMISE, config)
        assert all(log.chosen_index == 0 for log in artifact.step_logs)
        assert all(len(log.candidates) == 1 for log in artifact.step_logs)


class _ScheduledScorer(MockBackend):
    """Relevance fixed at 1.0; coherence replays a schedule per call."""

    def __init__(self, schedule: list[float], **kw):
        super().__init__(**kw)
        self.schedule = list(schedule)
        self.position = 0

    def score_coherence(self, prefix, continuation):
        value = self.schedule[min(self.position, len(self.schedule) - 1)]
        self.position += 1
        return value

    def score_relevance(self, reference, passage):
        return 1.0


class TestAdaptiveMode:
    def make_config(self, threshold: float = 0.5) -> RunConfig:
        return RunConfig(
            outline_points=2,
            passages_per_leaf="adaptive",
            adaptive_min_per_leaf=1,
            adaptive_max_per_leaf=4,
            alignment_threshold=threshold,
            continuation_tokens=32,
            max_context=512,
            rolling_truncate=256,
            rolling_total=128,
            num_candidates=1,
        )

    def test_advances_exactly_at_scheduled_drops(self):
        import math

        # per-step coherence probabilities; with one candidate per step the
        # best log-prob is ln(p). Leaf 1: ln(.9) then ln(.9)*? drop to ln(.4):
        # ln(.9)-ln(.4)=0.81 > 0.5 -> advance at step 3 (discarded draft).
        schedule = [0.9, 0.9, 0.4, 0.8, 0.8]
        backend = _ScheduledScorer(schedule, seed=2, outline_points=2)
        artifact = Engine(backend, self.make_config(0.5)).run_re3(PREMISE)
        labels = [p["section_path"] for p in artifact.passages]
        # leaf "1" accepted twice (0.9, 0.9), the 0.4 draft was discarded,
        # leaf "2" accepted up to its max with the remaining schedule
        assert labels[:2] == ["1", "1"]
        assert set(labels[2:]) == {"2"}
        drop = math.log(0.9) - math.log(0.4)
        assert drop > 0.5

    def test_small_drops_never_advance_until_cap(self):
        schedule = [0.9] * 50
        backend = _ScheduledScorer(schedule, seed=2, outline_points=2)
        artifact = Engine(backend, self.make_config(0.5)).run_re3(PREMISE)
        labels = [p["section_path"] for p in artifact.passages]
        assert labels == ["1"] * 4 + ["2"] * 4  # max_per_leaf reached


class TestEndStory:
    def test_ending_appended(self):
        artifact = run_re3(MockBackend(seed=3), PREMISE, FAST)
        assert artifact.ending_text
        assert artifact.ending_text in artifact.final_text

    def test_insert_failure_degrades_to_bare_suffix(self):
        class NoInsert(MockBackend):
            def insert(self, prefix, suffix, params):
                raise TransportError("no insert capability")

        artifact = run_re3(NoInsert(seed=3), PREMISE, FAST)
        assert artifact.ending_text == ""
        assert artifact.final_text.endswith("The End.")
        assert artifact.status == "degraded"

    def test_prefix_budget_respected(self):
        captured = {}

        class Capturing(MockBackend):
            def insert(self, prefix, suffix, params):
                captured["prefix"] = prefix
                return super().insert(prefix, suffix, params)

        backend = Capturing(seed=3)
        run_re3(backend, PREMISE, FAST)
        budget = FAST.max_context - FAST.continuation_tokens
        assert backend.count_tokens(captured["prefix"]) <= budget


class TestAbort:
    def test_partial_artifact_on_hard_failure(self):
        class FailAfterTwo(MockBackend):
            calls = 0

            def complete(self, prompt, params):
                if "Full text below" in prompt:
                    FailAfterTwo.calls += 1
                    if FailAfterTwo.calls > 2:
                        raise TransportError("backend went away")
                return super().complete(prompt, params)

        FailAfterTwo.calls = 0
        with pytest.raises(RunAborted) as info:
            run_re3(FailAfterTwo(seed=1), PREMISE, FAST)
        artifact = info.value.artifact
        assert artifact.status == "aborted"
        assert artifact.error
        assert len(artifact.passages) >= 1  # partial history kept
