"""Acceptance gate: one test per acceptance criterion, mock backends only.

Each criterion prints a single PASS line on success (visible with `pytest -s`
or in captured output); a failure raises before the line prints. The
full-scale headline results from the original study environment (human
evaluation scores; detector ROC-AUC around 0.5-0.7 with hosted models) need
GPT-scale generators, trained scorers, and annotators, and are NOT
reproducible at desk scale; acceptance rests on the property and oracle
suites below.
"""

from __future__ import annotations

import json
import math
import random
import time
from pathlib import Path

import pytest

from storyloom.backends import MockBackend
from storyloom.consistency_eval import (
    build_methods,
    evaluate,
    generate_synthetic_tuples,
    roc_auc,
)
from storyloom.drafting import DraftConfig, PromptBudgetError, compose_prompt
from storyloom.editing import MergeOutcome, merge_attribute, render_attribute_sentence
from storyloom.engine import (
    Engine,
    RunConfig,
    ablation_config,
    run_re3,
    run_rolling,
)
from storyloom.planning import expand_outline
from storyloom.rewriting import FilterConfig, heuristic_filter
from storyloom.story import Passage, Premise, StoryState, flatten_outline
from .conftest import make_plan
from .test_editing import _DirectionalEntail, entry
from .test_eval import brute_force_auc
from .test_rewriting import FILTER_TABLE, person_filter_oracle

PREMISE = Premise(
    "A harbor town wakes to find every boat gone, and the clerk who keeps the "
    "ledgers must find out who took them before the season turns."
)

DEFAULT_CONFIG = RunConfig(seed=33)


def _passed(name: str) -> None:
    print(f"PASS: {name}")


class TestA1DeskScaleStatement:
    def test_non_reproducibility_statement_documented(self):
        readme = Path(__file__).resolve().parents[1] / "README.md"
        assert readme.exists(), "README.md must exist"
        raw = readme.read_text(encoding="utf-8").replace("*", "").lower()
        text = " ".join(raw.split())
        assert "not reproducible at desk scale" in text
        _passed(
            "desk-scale non-reproducibility statement documented; acceptance "
            "rests on the property and oracle suites"
        )


class TestA2EndToEndDeterminism:
    def test_default_run_is_deterministic_and_fast(self):
        started = time.monotonic()
        first = run_re3(MockBackend(seed=33), PREMISE, DEFAULT_CONFIG)
        second = run_re3(MockBackend(seed=33), PREMISE, DEFAULT_CONFIG)
        elapsed = time.monotonic() - started

        assert len(first.passages) == 12  # 3 outline points x 4 passages
        assert all(p["token_count"] <= 256 for p in first.passages)
        assert first.final_text.endswith("The End.")
        a = json.dumps(first.to_dict(), sort_keys=True).encode()
        b = json.dumps(second.to_dict(), sort_keys=True).encode()
        assert a == b, "two identically-seeded runs must be byte-identical"
        assert elapsed < 5.0, f"two runs took {elapsed:.2f}s (budget 5s)"
        _passed(
            f"end-to-end determinism: 12 passages <=256 tokens, byte-identical "
            f"runs, ends with the closing suffix, {elapsed:.2f}s"
        )


class TestA3BudgetInvariant:
    def test_run_prompts_and_randomized_composition(self):
        violations = 0

        artifact = run_re3(MockBackend(seed=33), PREMISE, DEFAULT_CONFIG)
        draft_budget = DEFAULT_CONFIG.max_context - DEFAULT_CONFIG.continuation_tokens
        for log in artifact.step_logs:
            if log.prompt_tokens > draft_budget:
                violations += 1

        rolling = run_rolling(MockBackend(seed=33), PREMISE, DEFAULT_CONFIG)
        for log in rolling.step_logs:
            if log.prompt_tokens > DEFAULT_CONFIG.rolling_truncate:
                violations += 1

        rng = random.Random(404)
        backend = MockBackend(seed=2)
        cfg = DraftConfig()  # 1024 budget, 256 reserved
        cases = 0
        while cases < 200:
            plan = make_plan()
            state = StoryState(plan=plan)
            for i in range(rng.randint(0, 6)):
                size = rng.randint(1, 400)
                text = " ".join(f"w{rng.randint(0, 9999)}" for _ in range(size))
                state.append_passage(Passage(text, "1", i, size))
            leaf = rng.randint(0, 2)
            try:
                _, rendered = compose_prompt(backend, plan, state, leaf, cfg)
            except PromptBudgetError:
                continue  # raising is legal; silently overflowing is not
            cases += 1
            if backend.count_tokens(rendered) > cfg.prompt_budget:
                violations += 1

        assert violations == 0
        _passed(
            "budget invariant: all run prompts and 200 randomized compositions "
            "within 1024-256 (draft) and 768 (rolling), zero violations"
        )


class TestA4FilterSuite:
    def test_constructed_table_and_person_oracle(self):
        assert len(FILTER_TABLE) >= 30
        cfg = FilterConfig()
        for text, prompt, expected in FILTER_TABLE:
            got = heuristic_filter(text, prompt, cfg)
            if expected is None:
                assert got is None, f"{text!r} unexpectedly failed with {got!r}"
            else:
                assert got is not None and got.startswith(expected), (
                    f"{text!r}: expected {expected!r}, got {got!r}"
                )

        rng = random.Random(77)
        quoted = ['"I see it," she said.', '"Do you mind?"', '"We will see."']
        clean = [
            "The tide turned early.", "Smoke rose from the kilns.",
            "Petra counted the crates.", "The road stayed empty.",
        ]
        dirty = [
            "I kept walking.", "Then we stopped.", "You could hear the bells.",
        ]
        checked = 0
        for _ in range(120):
            parts = [
                rng.choice(rng.choice([quoted, clean, dirty]))
                for _ in range(rng.randint(1, 4))
            ]
            text = " ".join(parts)
            got = heuristic_filter(text, "", cfg)
            oracle = person_filter_oracle(text)
            if got == "person":
                assert oracle, f"filter flagged person but oracle disagrees: {text!r}"
            elif got is None:
                assert not oracle, f"filter missed person drift: {text!r}"
            checked += 1
        assert checked >= 100
        _passed(
            f"filter suite: {len(FILTER_TABLE)} constructed verdicts exact; "
            f"person filter matches quote-stripping oracle on {checked} sentences"
        )


class TestA5RocAucOracle:
    def test_matches_brute_force_and_monotone_invariance(self):
        rng = random.Random(1212)
        for _ in range(1000):
            n = rng.randint(2, 50)
            labels = [rng.randint(0, 1) for _ in range(n)]
            if len(set(labels)) < 2:
                labels[0], labels[1] = 0, 1
            scores = [rng.choice([0.0, 0.2, 0.4, 0.6, 0.8, 1.0]) for _ in range(n)]
            fast = roc_auc(scores, labels)
            slow = brute_force_auc(scores, labels)
            assert abs(fast - slow) < 1e-12

        for _ in range(100):
            n = rng.randint(2, 40)
            labels = [rng.randint(0, 1) for _ in range(n)]
            if len(set(labels)) < 2:
                labels[0], labels[1] = 0, 1
            scores = [rng.random() for _ in range(n)]
            transformed = [math.tanh(2 * s) + 5 for s in scores]
            assert roc_auc(scores, labels) == pytest.approx(
                roc_auc(transformed, labels), abs=1e-12
            )
        _passed(
            "roc_auc equals brute-force pairwise counting within 1e-12 on 1000 "
            "instances and is invariant under monotone transforms on 100"
        )


class TestA6MergeTruthTable:
    TABLE = {
        ("entail", "entail"): MergeOutcome.KEPT_EXISTING,
        ("entail", "neutral"): MergeOutcome.KEPT_EXISTING,
        ("entail", "contradict"): MergeOutcome.KEPT_EXISTING,
        ("neutral", "entail"): MergeOutcome.REPLACED,
        ("neutral", "neutral"): MergeOutcome.KEPT_EXISTING,
        ("neutral", "contradict"): MergeOutcome.FLAGGED,
        ("contradict", "entail"): MergeOutcome.REPLACED,
        ("contradict", "neutral"): MergeOutcome.FLAGGED,
        ("contradict", "contradict"): MergeOutcome.FLAGGED,
    }

    def test_all_nine_cells(self):
        from storyloom.backends import make_verdict
        from storyloom.story import AttributeDictionary

        for (fwd, bwd), expected in self.TABLE.items():
            old_sentence = render_attribute_sentence("Ada", "role", "keeper")
            new_sentence = render_attribute_sentence("Ada", "role", "warden")
            backend = _DirectionalEntail({
                (old_sentence, new_sentence): make_verdict(fwd, 0.9),
                (new_sentence, old_sentence): make_verdict(bwd, 0.9),
            })
            dictionary = AttributeDictionary()
            dictionary.entries["role"] = entry("role", "keeper")
            result = merge_attribute(
                backend, dictionary, "Ada", "role", entry("role", "warden")
            )
            assert result.outcome == expected, f"cell ({fwd},{bwd})"
        _passed("merge truth table: all 9 directional-verdict cells exact")


class TestA7SyntheticDetectionSeparation:
    def test_oracle_uninformative_and_noisy_ordering(self):
        fixture = generate_synthetic_tuples(20, seed=0)
        names = ["entailment", "entailment-dpr", "structured"]

        oracle = fixture.oracle_backend(seed=0)
        results = evaluate(fixture.tuples, build_methods(oracle, names))
        assert results["structured"].auc == pytest.approx(1.0)
        assert results["entailment"].auc >= 0.9
        assert results["entailment-dpr"].auc >= 0.9

        flat = fixture.uninformative_backend(seed=0)
        constant = evaluate(fixture.tuples, build_methods(flat, names))
        for name in names:
            assert constant[name].auc == 0.5

        holds = 0
        for seed in range(10):
            noisy = fixture.noisy_backend(seed=seed)
            noisy_results = evaluate(fixture.tuples, build_methods(noisy, names))
            e = noisy_results["entailment"].auc
            d = noisy_results["entailment-dpr"].auc
            s = noisy_results["structured"].auc
            holds += s >= d >= e
        assert holds >= 8
        _passed(
            f"synthetic detection: oracle structured AUC 1.0, baselines >= 0.9, "
            f"uninformative all exactly 0.5, noisy ordering holds {holds}/10"
        )


class TestA8BaselineEquivalence:
    def test_triple_ablation_equals_rolling(self):
        config = ablation_config(DEFAULT_CONFIG, "baseline_equivalent")
        re3 = run_re3(MockBackend(seed=33), PREMISE, config)
        rolling = run_rolling(MockBackend(seed=33), PREMISE, DEFAULT_CONFIG)
        assert len(re3.step_logs) == len(rolling.step_logs)
        for a, b in zip(re3.step_logs, rolling.step_logs):
            assert a.prompt == b.prompt
        assert [p["text"] for p in re3.passages] == [p["text"] for p in rolling.passages]
        assert re3.final_text == rolling.final_text
        _passed(
            "baseline equivalence: no_plan+no_rerank+no_edit matches the rolling "
            "baseline step for step (identical prompts and outputs)"
        )


class _ScheduledScorer(MockBackend):
    def __init__(self, schedule, **kw):
        super().__init__(**kw)
        self.schedule = list(schedule)
        self.position = 0

    def score_coherence(self, prefix, continuation):
        value = self.schedule[min(self.position, len(self.schedule) - 1)]
        self.position += 1
        return value

    def score_relevance(self, reference, passage):
        return 1.0


class TestA9HierarchicalMode:
    def test_expansion_and_adaptive_alignment(self):
        plan = make_plan()
        expanded = expand_outline(MockBackend(seed=6), plan, target_depth=2)
        leaves = flatten_outline(expanded)
        assert len(leaves) >= 6

        config = RunConfig(
            outline_points=2,
            passages_per_leaf="adaptive",
            adaptive_min_per_leaf=1,
            adaptive_max_per_leaf=4,
            alignment_threshold=0.5,
            continuation_tokens=32,
            max_context=512,
            rolling_truncate=256,
            rolling_total=128,
            num_candidates=1,
        )
        # per-step coherence: drops from 0.9 to 0.4 (ln gap 0.81 > 0.5) exactly
        # once on leaf one, then stays flat on leaf two until its cap
        schedule = [0.9, 0.9, 0.4, 0.8, 0.8, 0.8, 0.8, 0.8]
        backend = _ScheduledScorer(schedule, seed=2, outline_points=2)
        artifact = Engine(backend, config).run_re3(PREMISE)
        labels = [p["section_path"] for p in artifact.passages]
        assert labels == ["1", "1", "2", "2", "2", "2"], labels
        _passed(
            f"hierarchical mode: expansion yields {len(leaves)} leaves; adaptive "
            f"run advanced exactly at the scheduled log-prob drop"
        )
