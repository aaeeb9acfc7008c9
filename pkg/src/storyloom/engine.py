"""Run orchestration: the full plan/draft/rewrite/edit loop, the rolling
baseline, ablations, adaptive outline advancement, and the ending step.

Every run produces a StoryArtifact holding the config, the plan, per-step
logs (prompt, candidates with verdicts and scores, chosen index, edit flags),
and the final text, so runs are auditable and reproducible.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Any

from .backends.base import Backend, BackendError, GenParams
from .drafting import DraftConfig, compose_prompt, generate_candidates, register_new_entities
from .editing import (
    BankExample,
    EditConfig,
    correct,
    detect,
    load_example_bank,
    seed_kb_from_plan,
)
from .planning import PlanConfig, build_plan, expand_outline
from .prompts import TemplateStore
from .rewriting import Candidate, RerankConfig, rerank
from .story import (
    OutlineNode,
    Passage,
    Plan,
    Premise,
    SCHEMA_VERSION,
    StoryState,
    assign_labels,
    flatten_outline,
    plan_to_dict,
    story_text,
)

logger = logging.getLogger(__name__)

ENDING_SUFFIX = "The End."

ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class Ablations:
    no_plan: bool = False
    no_rerank: bool = False
    no_edit: bool = False


@dataclass(frozen=True)
class RunConfig:
    mode: str = "re3"  # "re3" | "rolling"
    outline_points: int | None = 3
    outline_depth: int = 1
    passages_per_leaf: int | str = 4  # count, or "adaptive"
    continuation_tokens: int = 256
    max_context: int = 1024
    rolling_truncate: int = 768
    rolling_total: int = 3072
    alignment_threshold: float = 0.5
    adaptive_min_per_leaf: int = 1
    adaptive_max_per_leaf: int = 8
    num_candidates: int = 10
    ablations: Ablations = Ablations()
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("re3", "rolling"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.rolling_truncate + self.continuation_tokens > self.max_context:
            raise ValueError("rolling_truncate + continuation_tokens must fit max_context")
        for name in ("continuation_tokens", "max_context", "rolling_truncate",
                     "rolling_total", "num_candidates"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.passages_per_leaf != ADAPTIVE and int(self.passages_per_leaf) < 1:
            raise ValueError("passages_per_leaf must be >= 1 or 'adaptive'")
        if self.alignment_threshold <= 0:
            raise ValueError("alignment_threshold must be positive")

    def draft_config(self) -> DraftConfig:
        return DraftConfig(
            budget=self.max_context,
            reserved_generation=self.continuation_tokens,
            num_candidates=1 if self.ablations.no_rerank else self.num_candidates,
            continuation_tokens=self.continuation_tokens,
        )

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["ablations"] = asdict(self.ablations)
        return data


@dataclass
class StepLog:
    passage_index: int
    leaf_label: str
    prompt: str
    prompt_tokens: int
    candidates: list[dict[str, Any]]
    chosen_index: int
    degraded: bool = False
    flags: list[dict[str, Any]] = field(default_factory=list)
    corrections: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "passage_index": self.passage_index,
            "leaf_label": self.leaf_label,
            "prompt": self.prompt,
            "prompt_tokens": self.prompt_tokens,
            "candidates": self.candidates,
            "chosen_index": self.chosen_index,
            "degraded": self.degraded,
            "flags": self.flags,
            "corrections": self.corrections,
        }


@dataclass
class StoryArtifact:
    config: dict[str, Any]
    premise: str
    plan: dict[str, Any] | None
    passages: list[dict[str, Any]]
    step_logs: list[StepLog]
    final_text: str = ""
    ending_text: str = ""
    status: str = "success"  # success | degraded | aborted
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "premise": self.premise,
            "plan": self.plan,
            "passages": self.passages,
            "step_logs": [s.to_dict() for s in self.step_logs],
            "final_text": self.final_text,
            "ending_text": self.ending_text,
            "status": self.status,
            "error": self.error,
        }


class RunAborted(Exception):
    """A hard failure mid-run; carries the partial artifact."""

    def __init__(self, message: str, artifact: StoryArtifact):
        super().__init__(message)
        self.artifact = artifact


def outline_alignment_step(
    prev_best_lp: float, new_best_lp: float, threshold: float
) -> bool:
    """Advance to the next outline point when quality drops past the threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return (prev_best_lp - new_best_lp) > threshold


def end_story(
    backend: Backend, state: StoryState, config: RunConfig
) -> tuple[str, bool]:
    """Bridge the story tail to the closing suffix. Returns (ending, degraded)."""
    if not state.passages:
        raise ValueError("cannot end an empty story")
    budget = config.max_context - config.continuation_tokens
    prefix = backend.truncate_left(story_text(state), budget)
    params = GenParams(max_tokens=config.continuation_tokens, temperature=0.7,
                       num_samples=1)
    try:
        ending = backend.insert(prefix, ENDING_SUFFIX, params).strip()
        return ending, False
    except BackendError as exc:
        logger.warning("ending insertion failed (%s); closing with bare suffix", exc)
        return "", True


def _final_text(state: StoryState, ending: str) -> str:
    body = story_text(state)
    if ending:
        return f"{body}\n\n{ending}\n\n{ENDING_SUFFIX}"
    return f"{body}\n\n{ENDING_SUFFIX}"


def _placeholder_plan(premise: Premise) -> Plan:
    """Internal scaffold for unplanned (rolling-style) runs."""
    outline = [OutlineNode(text="the story follows the premise")]
    assign_labels(outline)
    return Plan(
        premise=premise,
        setting="The story is set where the premise leads.",
        characters=[],
        outline=outline,
    )


def _candidate_dicts(ranked: list[Candidate] | None, texts: list[str]) -> list[dict[str, Any]]:
    if ranked is None:
        return [{"sample_index": i, "text": t} for i, t in enumerate(texts)]
    by_index = {c.sample_index: c for c in ranked}
    out = []
    for i, t in enumerate(texts):
        c = by_index.get(i)
        if c is None:
            out.append({"sample_index": i, "text": t, "filter_reason": "not scored"})
        else:
            out.append({
                "sample_index": i,
                "text": t,
                "filter_reason": c.filter_reason,
                "coherence_lp": c.coherence_lp,
                "relevance_lp": c.relevance_lp,
                "composite": c.composite,
            })
    return out


class Engine:
    """Owns the backends, configs, and data needed to run stories end to end."""

    def __init__(
        self,
        backend: Backend,
        config: RunConfig | None = None,
        plan_cfg: PlanConfig | None = None,
        rerank_cfg: RerankConfig | None = None,
        edit_cfg: EditConfig | None = None,
        templates: TemplateStore | None = None,
        example_bank: list[BankExample] | None = None,
    ):
        self.backend = backend
        self.config = config or RunConfig()
        self.plan_cfg = plan_cfg or PlanConfig()
        self.rerank_cfg = rerank_cfg or RerankConfig()
        self.edit_cfg = edit_cfg or EditConfig()
        self.templates = templates or TemplateStore()
        self.example_bank = example_bank or load_example_bank()

    # -- public entry points -------------------------------------------------

    def run_re3(self, premise: Premise) -> StoryArtifact:
        config = self.config
        artifact = StoryArtifact(
            config=config.to_dict(), premise=premise.text, plan=None,
            passages=[], step_logs=[],
        )
        try:
            if config.ablations.no_plan:
                return self._run_unplanned(
                    premise, artifact,
                    use_rerank=not config.ablations.no_rerank,
                    use_edit=not config.ablations.no_edit,
                )
            plan = build_plan(
                self.backend, premise, config.outline_points,
                self.plan_cfg, self.templates,
            )
            if config.outline_depth > 1:
                plan = expand_outline(
                    self.backend, plan, config.outline_depth,
                    self.plan_cfg, self.templates,
                )
            artifact.plan = plan_to_dict(plan)
            state = StoryState(plan=plan)
            if not config.ablations.no_edit:
                seed_kb_from_plan(
                    self.backend, state, self.example_bank, self.edit_cfg, self.templates
                )
            self._generate_planned(state, artifact)
            self._finish(state, artifact)
            return artifact
        except RunAborted:
            raise
        except Exception as exc:
            artifact.status = "aborted"
            artifact.error = f"{type(exc).__name__}: {exc}"
            raise RunAborted(str(exc), artifact) from exc

    def run_rolling(self, premise: Premise) -> StoryArtifact:
        artifact = StoryArtifact(
            config=self.config.to_dict(), premise=premise.text, plan=None,
            passages=[], step_logs=[],
        )
        try:
            return self._run_unplanned(premise, artifact, use_rerank=False, use_edit=False)
        except RunAborted:
            raise
        except Exception as exc:
            artifact.status = "aborted"
            artifact.error = f"{type(exc).__name__}: {exc}"
            raise RunAborted(str(exc), artifact) from exc

    # -- planned generation ----------------------------------------------------

    def _generate_planned(self, state: StoryState, artifact: StoryArtifact) -> None:
        config = self.config
        leaves = flatten_outline(state.plan)
        adaptive = config.passages_per_leaf == ADAPTIVE
        for leaf_index, leaf in enumerate(leaves):
            state.current_leaf = leaf_index
            prev_lp: float | None = None
            step = 0
            limit = (
                config.adaptive_max_per_leaf
                if adaptive
                else int(config.passages_per_leaf)
            )
            while step < limit:
                best, log = self._draft_step(state, leaf_index, leaf.text, leaf.label)
                best_lp = best.composite if best.composite is not None else 0.0
                if (
                    adaptive
                    and prev_lp is not None
                    and step >= config.adaptive_min_per_leaf
                    and outline_alignment_step(prev_lp, best_lp, config.alignment_threshold)
                ):
                    # quality fell off: move to the next outline point and
                    # discard this draft
                    break
                self._accept(state, artifact, best, log, leaf.label)
                prev_lp = best_lp
                step += 1

    def _draft_step(
        self, state: StoryState, leaf_index: int, leaf_text: str, leaf_label: str
    ) -> tuple[Candidate, StepLog]:
        config = self.config
        draft_cfg = config.draft_config()
        spec, prompt = compose_prompt(
            self.backend, state.plan, state, leaf_index, draft_cfg, self.templates
        )
        prompt_tokens = self.backend.count_tokens(prompt)
        if prompt_tokens > draft_cfg.prompt_budget:
            raise AssertionError(
                f"composed prompt exceeds budget: {prompt_tokens} > {draft_cfg.prompt_budget}"
            )
        texts = generate_candidates(self.backend, prompt, draft_cfg)
        previous = state.passages[-1].text if state.passages else state.plan.premise.text
        if config.ablations.no_rerank:
            best = Candidate(text=texts[0], sample_index=0)
            candidates = _candidate_dicts(None, texts)
        else:
            best, ranked = rerank(
                self.backend, texts, prompt, previous, leaf_text, self.rerank_cfg
            )
            candidates = _candidate_dicts(ranked, texts)
        log = StepLog(
            passage_index=len(state.passages),
            leaf_label=leaf_label,
            prompt=prompt,
            prompt_tokens=prompt_tokens,
            candidates=candidates,
            chosen_index=best.sample_index,
            degraded=best.degraded,
        )
        return best, log

    def _accept(
        self,
        state: StoryState,
        artifact: StoryArtifact,
        best: Candidate,
        log: StepLog,
        leaf_label: str,
    ) -> None:
        config = self.config
        text = best.text
        if not config.ablations.no_edit:
            report = detect(
                self.backend, text, state, len(state.passages),
                self.example_bank, self.edit_cfg, self.templates,
            )
            for flag in report.flags:
                log.flags.append({
                    "character": flag.character,
                    "key": flag.key,
                    "old_value": flag.old.value,
                    "new_value": flag.new.value,
                    "p_contradict": flag.p_contradict,
                })
                result = correct(self.backend, text, flag, self.edit_cfg, self.templates)
                text = result.text
                log.corrections.append({
                    "key": flag.key,
                    "resolved": result.resolved,
                    "attempts": result.attempts,
                })
                if not result.resolved:
                    log.degraded = True
        passage = Passage(
            text=text,
            section_path=leaf_label,
            index=len(state.passages),
            token_count=self.backend.count_tokens(text),
        )
        state.append_passage(passage)
        register_new_entities(
            self.backend, text, passage.index, state,
            config.draft_config(), self.templates,
        )
        artifact.passages.append({
            "index": passage.index,
            "section_path": passage.section_path,
            "token_count": passage.token_count,
            "text": passage.text,
        })
        artifact.step_logs.append(log)
        if log.degraded:
            artifact.status = "degraded"

    # -- unplanned (rolling-window) generation ----------------------------------

    def _rolling_prompt(self, premise: Premise, state: StoryState) -> str:
        body = story_text(state)
        raw = f"{premise.text}\n\n{body}" if body else premise.text
        return self.backend.truncate_left(raw, self.config.rolling_truncate)

    def _run_unplanned(
        self,
        premise: Premise,
        artifact: StoryArtifact,
        use_rerank: bool,
        use_edit: bool,
    ) -> StoryArtifact:
        config = self.config
        state = StoryState(plan=_placeholder_plan(premise))
        generated = 0
        while generated < config.rolling_total:
            prompt = self._rolling_prompt(premise, state)
            prompt_tokens = self.backend.count_tokens(prompt)
            if prompt_tokens > config.rolling_truncate:
                raise AssertionError(
                    f"rolling prompt exceeds budget: {prompt_tokens} > {config.rolling_truncate}"
                )
            params = GenParams(
                max_tokens=config.continuation_tokens,
                temperature=0.9,
                num_samples=config.num_candidates if use_rerank else 1,
            )
            texts = self.backend.complete(prompt, params)
            if use_rerank:
                previous = state.passages[-1].text if state.passages else premise.text
                best, ranked = rerank(
                    self.backend, texts, prompt, previous, premise.text, self.rerank_cfg
                )
                candidates = _candidate_dicts(ranked, texts)
            else:
                best = Candidate(text=texts[0], sample_index=0)
                candidates = _candidate_dicts(None, texts)
            log = StepLog(
                passage_index=len(state.passages),
                leaf_label="1",
                prompt=prompt,
                prompt_tokens=prompt_tokens,
                candidates=candidates,
                chosen_index=best.sample_index,
                degraded=best.degraded,
            )
            text = best.text
            if use_edit:
                report = detect(
                    self.backend, text, state, len(state.passages),
                    self.example_bank, self.edit_cfg, self.templates,
                )
                for flag in report.flags:
                    result = correct(self.backend, text, flag, self.edit_cfg, self.templates)
                    text = result.text
                    log.corrections.append({
                        "key": flag.key,
                        "resolved": result.resolved,
                        "attempts": result.attempts,
                    })
                    if not result.resolved:
                        log.degraded = True
            passage = Passage(
                text=text,
                section_path="1",
                index=len(state.passages),
                token_count=self.backend.count_tokens(text),
            )
            state.append_passage(passage)
            if use_edit:
                register_new_entities(
                    self.backend, text, passage.index, state,
                    config.draft_config(), self.templates,
                )
            generated += passage.token_count
            artifact.passages.append({
                "index": passage.index,
                "section_path": passage.section_path,
                "token_count": passage.token_count,
                "text": passage.text,
            })
            artifact.step_logs.append(log)
            if log.degraded:
                artifact.status = "degraded"
        self._finish(state, artifact)
        return artifact

    def _finish(self, state: StoryState, artifact: StoryArtifact) -> None:
        ending, degraded = end_story(self.backend, state, self.config)
        artifact.ending_text = ending
        artifact.final_text = _final_text(state, ending)
        if degraded and artifact.status == "success":
            artifact.status = "degraded"


def run_re3(backend: Backend, premise: Premise, config: RunConfig | None = None,
            **kwargs: Any) -> StoryArtifact:
    return Engine(backend, config, **kwargs).run_re3(premise)


def run_rolling(backend: Backend, premise: Premise, config: RunConfig | None = None,
                **kwargs: Any) -> StoryArtifact:
    return Engine(backend, config, **kwargs).run_rolling(premise)


def ablation_config(config: RunConfig, name: str) -> RunConfig:
    """Named ablation presets used by the CLI and tests."""
    presets = {
        "full": Ablations(),
        "no_plan": Ablations(no_plan=True),
        "no_rerank": Ablations(no_rerank=True),
        "no_edit": Ablations(no_edit=True),
        "baseline_equivalent": Ablations(no_plan=True, no_rerank=True, no_edit=True),
    }
    if name not in presets:
        raise ValueError(f"unknown ablation {name!r}")
    return replace(config, ablations=presets[name])
