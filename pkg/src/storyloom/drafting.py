"""Continuation-prompt composition and candidate generation.

Each step recombines the plan and the story so far into one prompt: retrieved
plan context, a coarse summary of completed sections, a finer summary of the
passages just before the current one, the current outline point, and the most
recent passage verbatim. The rendered prompt must fit the context budget
minus the tokens reserved for generation; overflow is resolved by shrinking
context first, then the recent summary, and only then the verbatim tail.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .backends.base import Backend, BackendError, GenParams, relevance
from .prompts import TemplateStore
from .story import (
    AttributeDictionary,
    CharacterSheet,
    FlatLeaf,
    Plan,
    StoryState,
    flatten_outline,
    story_text,
)
from .textutil import first_sentence, lowercase_leading, name_tokens, names_match

logger = logging.getLogger(__name__)

SEGMENT_ORDER = (
    "relevant_context",
    "narration_note",
    "previous_outline",
    "recent_summary",
    "current_outline",
    "autoregressive_context",
)


class PromptBudgetError(Exception):
    """The prompt cannot fit the budget even after all shrinking steps."""


@dataclass(frozen=True)
class DraftConfig:
    budget: int = 1024
    reserved_generation: int = 256
    num_candidates: int = 10
    continuation_tokens: int = 256
    summary_span: int = 2
    summary_max_tokens: int = 96
    relevant_context_budget: int = 384
    description_max_tokens: int = 48
    gen_temperature: float = 0.9
    stop_sequences: tuple[str, ...] = ()

    @property
    def prompt_budget(self) -> int:
        return self.budget - self.reserved_generation


@dataclass
class PromptSpec:
    """Ordered role-tagged segments plus the budget they were rendered under."""

    segments: list[tuple[str, str]]
    budget: int = 1024
    reserved_generation: int = 256

    def rendered(self, separator: str = "\n\n") -> str:
        return separator.join(text for _, text in self.segments)

    def roles(self) -> list[str]:
        return [role for role, _ in self.segments]


def plan_context_items(plan: Plan, extra_sheets: list[CharacterSheet] | None = None) -> list[str]:
    """Premise, setting, and character descriptions, in plan order."""
    items = [plan.premise.text, plan.setting]
    items.extend(c.description for c in plan.characters)
    for sheet in extra_sheets or []:
        items.append(sheet.description)
    return [i for i in items if i.strip()]


def select_relevant_context(
    backend: Backend,
    plan: Plan,
    state: StoryState,
    budget_tokens: int,
) -> list[str]:
    """Plan items most relevant to the latest passage, in original plan order.

    An empty story selects everything (budget permitting, highest rank first);
    otherwise items are ranked by embedding relevance against the most recent
    passage and taken greedily until the budget stops the next-ranked item.
    Mid-story characters live in plan.characters too, so they compete here
    like the plan-time ones.
    """
    items = plan_context_items(plan)
    if not state.passages:
        ranked = list(range(len(items)))
    else:
        query = state.passages[-1].text
        vectors = backend.embed([query] + items)
        scores = [relevance(vectors[0], v) for v in vectors[1:]]
        ranked = sorted(
            range(len(items)), key=lambda i: (-scores[i], i)
        )
    selected: set[int] = set()
    used = 0
    for i in ranked:
        cost = backend.count_tokens(items[i])
        if used + cost > budget_tokens:
            break
        selected.add(i)
        used += cost
    return [items[i] for i in range(len(items)) if i in selected]


def summarize_recent(
    backend: Backend,
    state: StoryState,
    k_passages: int,
    cfg: DraftConfig | None = None,
    templates: TemplateStore | None = None,
) -> str:
    """Summary of the passages just before the final one (which goes verbatim)."""
    cfg = cfg or DraftConfig()
    templates = templates or TemplateStore()
    if len(state.passages) < 2 or k_passages < 1:
        return ""
    end = len(state.passages) - 1
    start = max(0, end - k_passages)
    excerpt = "\n\n".join(p.text for p in state.passages[start:end])
    if not excerpt.strip():
        return ""
    prompt = templates.render("summarize", excerpt=excerpt)
    params = GenParams(max_tokens=cfg.summary_max_tokens, temperature=0.3, num_samples=1)
    try:
        summary = backend.complete(prompt, params)[0].strip()
    except BackendError as exc:
        logger.warning("summary backend failed (%s); falling back to first sentences", exc)
        summary = " ".join(
            first_sentence(p.text) for p in state.passages[start:end] if p.text.strip()
        )
    return summary.split("\n\n")[0].strip()


def previous_outline_summary(plan: Plan, current_leaf: int) -> str:
    """Completed outline points before the current leaf, one string.

    With hierarchical outlines, a fully-completed top-level point collapses
    to its own text instead of listing each sub-point.
    """
    leaves = flatten_outline(plan)
    if current_leaf <= 0:
        return ""
    done_labels = [leaf.label for leaf in leaves[:current_leaf]]
    done = set(done_labels)
    parts: list[str] = []
    emitted_roots: set[str] = set()
    for node in plan.outline:
        node_leaves = [leaf.label for leaf in _node_leaf_labels(node)]
        if all(label in done for label in node_leaves):
            if node.label not in emitted_roots:
                parts.append(node.text)
                emitted_roots.add(node.label)
        else:
            for leaf in _node_leaf_labels(node):
                if leaf.label in done:
                    parts.append(leaf.text)
            break
    return " ".join(_ensure_period(p) for p in parts)


def _node_leaf_labels(node) -> list:
    return list(node.leaves())


def _ensure_period(text: str) -> str:
    text = text.strip()
    return text if text.endswith((".", "!", "?")) else text + "."


def compose_prompt(
    backend: Backend,
    plan: Plan,
    state: StoryState,
    leaf_index: int,
    cfg: DraftConfig | None = None,
    templates: TemplateStore | None = None,
) -> tuple[PromptSpec, str]:
    """Build the continuation prompt for the given outline leaf.

    An empty story gets the setup prompt (plan verbatim, "Chapter 1" tail);
    afterwards the labelled segments render in fixed order. Overflow is
    resolved by dropping relevant-context items, then shrinking the recent
    summary span, then left-truncating the verbatim passage.
    """
    cfg = cfg or DraftConfig()
    templates = templates or TemplateStore()
    leaves = flatten_outline(plan)
    if not 0 <= leaf_index < len(leaves):
        raise ValueError(f"leaf index {leaf_index} out of range")
    leaf = leaves[leaf_index]

    if not state.passages:
        return _compose_setup_prompt(backend, plan, leaf, cfg, templates)

    segment_templates, options = templates.draft_segments()
    separator = options.get("separator", "\n\n")
    final_suffix = options.get("final_leaf_suffix", "This is the end of the story.")
    is_final = leaf_index == len(leaves) - 1

    context_budget = min(cfg.relevant_context_budget, cfg.prompt_budget)
    summary_span = cfg.summary_span
    autoregressive = state.passages[-1].text

    protected = {t for c in plan.characters for t in name_tokens(c.name)}

    def build(context_budget: int, summary_span: int, tail: str) -> PromptSpec:
        segments: list[tuple[str, str]] = []
        items = select_relevant_context(backend, plan, state, context_budget)
        if items:
            segments.append(
                ("relevant_context",
                 segment_templates["relevant_context"].format(items="\n".join(items)))
            )
        segments.append(("narration_note", segment_templates["narration_note"]))
        outline_summary = previous_outline_summary(plan, leaf_index)
        if outline_summary:
            segments.append(
                ("previous_outline",
                 segment_templates["previous_outline"].format(summary=outline_summary))
            )
        recent = summarize_recent(backend, state, summary_span, cfg, templates)
        if recent:
            segments.append(
                ("recent_summary",
                 segment_templates["recent_summary"].format(summary=recent))
            )
        point = _ensure_period(lowercase_leading(leaf.text, protected))
        if is_final:
            point = f"{point} {final_suffix}"
        segments.append(
            ("current_outline", segment_templates["current_outline"].format(point=point))
        )
        segments.append(
            ("autoregressive_context",
             segment_templates["autoregressive_context"].format(passage=tail))
        )
        return PromptSpec(segments, cfg.budget, cfg.reserved_generation)

    spec = build(context_budget, summary_span, autoregressive)
    rendered = spec.rendered()
    while backend.count_tokens(rendered) > cfg.prompt_budget and context_budget > 0:
        context_budget = max(0, context_budget - 64)
        spec = build(context_budget, summary_span, autoregressive)
        rendered = spec.rendered()
    while backend.count_tokens(rendered) > cfg.prompt_budget and summary_span > 0:
        summary_span -= 1
        spec = build(context_budget, summary_span, autoregressive)
        rendered = spec.rendered()
    if backend.count_tokens(rendered) > cfg.prompt_budget:
        overflow = backend.count_tokens(rendered) - cfg.prompt_budget
        tail_tokens = backend.count_tokens(autoregressive)
        allowed = tail_tokens - overflow
        if allowed < 1:
            raise PromptBudgetError(
                f"prompt cannot fit budget {cfg.prompt_budget} even with an empty tail"
            )
        spec = build(context_budget, summary_span,
                     backend.truncate_left(autoregressive, allowed))
        rendered = spec.rendered()
        if backend.count_tokens(rendered) > cfg.prompt_budget:
            raise PromptBudgetError(
                f"prompt still over budget after truncation "
                f"({backend.count_tokens(rendered)} > {cfg.prompt_budget})"
            )
    return spec, rendered


def _compose_setup_prompt(
    backend: Backend,
    plan: Plan,
    leaf: FlatLeaf,
    cfg: DraftConfig,
    templates: TemplateStore,
) -> tuple[PromptSpec, str]:
    descriptions = [c.description for c in plan.characters]
    segment_templates, _ = templates.draft_segments()
    narration_note = segment_templates["narration_note"]
    while True:
        rendered = templates.render(
            "first_passage",
            premise=plan.premise.text,
            setting=plan.setting,
            characters="\n".join(descriptions),
            narration_note=narration_note,
            first_point=leaf.text,
        )
        if backend.count_tokens(rendered) <= cfg.prompt_budget or not descriptions:
            break
        descriptions = descriptions[:-1]  # shrink context: drop trailing characters
    if backend.count_tokens(rendered) > cfg.prompt_budget:
        raise PromptBudgetError("setup prompt exceeds budget with no characters left")
    spec = PromptSpec(
        [("header", rendered)], cfg.budget, cfg.reserved_generation
    )
    return spec, rendered


def generate_candidates(
    backend: Backend,
    prompt_text: str,
    cfg: DraftConfig | None = None,
) -> list[str]:
    """Sample the configured number of continuations in one call."""
    cfg = cfg or DraftConfig()
    params = GenParams(
        max_tokens=cfg.continuation_tokens,
        temperature=cfg.gen_temperature,
        num_samples=cfg.num_candidates,
        stop_sequences=cfg.stop_sequences,
    )
    return backend.complete(prompt_text, params)


def register_new_entities(
    backend: Backend,
    passage_text: str,
    passage_index: int,
    state: StoryState,
    cfg: DraftConfig | None = None,
    templates: TemplateStore | None = None,
) -> list[CharacterSheet]:
    """Add newly-mentioned person entities to the plan and knowledge base.

    A detected name that token-matches an existing character ("Karen" against
    "Karen Voss") is treated as that character, not a new one. Non-person
    entities are ignored. Description failures still register the character,
    with an empty description.
    """
    cfg = cfg or DraftConfig()
    templates = templates or TemplateStore()
    added: list[CharacterSheet] = []
    known = [c.name for c in state.plan.characters]
    for surface, is_person in backend.detect_entities(passage_text):
        if not is_person:
            continue
        if any(names_match(surface, name) for name in known):
            continue
        description = ""
        try:
            prompt = templates.render("describe_entity", passage=passage_text, name=surface)
            params = GenParams(
                max_tokens=cfg.description_max_tokens,
                temperature=0.7,
                num_samples=1,
                stop_sequences=("\n\n",),
            )
            completion = backend.complete(prompt, params)[0].strip()
            if completion:
                description = f"{surface} is {completion}"
        except BackendError as exc:
            logger.warning("description for new entity %r failed: %s", surface, exc)
        sheet = CharacterSheet(
            name=surface, description=description or surface, created_at=passage_index
        )
        state.plan.characters.append(sheet)
        state.kb.setdefault(surface, AttributeDictionary())
        known.append(surface)
        added.append(sheet)
    return added


def last_passage_suffix_ok(state: StoryState, rendered: str) -> bool:
    """The autoregressive segment must be a verbatim suffix of the last passage."""
    if not state.passages:
        return True
    tail = rendered.rsplit("Full text below:\n", 1)
    if len(tail) != 2:
        return False
    return state.passages[-1].text.endswith(tail[1]) or tail[1] in state.passages[-1].text


__all__ = [
    "DraftConfig",
    "PromptBudgetError",
    "PromptSpec",
    "SEGMENT_ORDER",
    "compose_prompt",
    "generate_candidates",
    "plan_context_items",
    "previous_outline_summary",
    "register_new_entities",
    "select_relevant_context",
    "summarize_recent",
    "story_text",
]
