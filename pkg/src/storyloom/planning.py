"""Plan construction: premise, setting, characters, and the numbered outline.

Character names are rejection-sampled through a pile of small filters; the
outline is parsed from a numbered list and resampled until well-formed (and,
when requested, until it has an exact point count). Outlines can then be
expanded one level at a time into minor plot points.
"""

from __future__ import annotations

import logging
import re
import string
from dataclasses import dataclass, field

from .backends.base import Backend, GenParams
from .prompts import TemplateStore
from .story import (
    CharacterSheet,
    OutlineNode,
    Plan,
    Premise,
    SETTING_PREFIX,
    assign_labels,
    outline_depth,
)
from .textutil import first_sentence, truncate_sentences

logger = logging.getLogger(__name__)

DEFAULT_BANNED_SUBSTRINGS = (
    # story roles and attribute words that are not names; the exact set is
    # a non-normative default and fully configurable
    "protagonist",
    "antagonist",
    "narrator",
    "character",
    "age",
    "gender",
    "name",
    "unknown",
    "unnamed",
)


class PlanError(Exception):
    """A plan-construction step exhausted its resampling budget."""


class SettingGenerationFailed(PlanError):
    pass


class NameSamplingExhausted(PlanError):
    pass


class OutlineGenerationFailed(PlanError):
    pass


@dataclass(frozen=True)
class NameFilterConfig:
    banned_substrings: tuple[str, ...] = DEFAULT_BANNED_SUBSTRINGS
    prefer_word_count: int = 2
    samples_per_round: int = 10
    max_rounds: int = 3

    def __post_init__(self) -> None:
        if self.samples_per_round < 1:
            raise ValueError("samples_per_round must be >= 1")


@dataclass(frozen=True)
class PlanConfig:
    name_filter: NameFilterConfig = NameFilterConfig()
    num_characters: int = 3
    setting_retries: int = 5
    outline_retries: int = 20
    description_retries: int = 3
    max_description_sentences: int = 3
    premise_temperature: float = 1.0
    gen_temperature: float = 0.7
    name_max_tokens: int = 8
    setting_max_tokens: int = 32
    description_max_tokens: int = 64
    outline_max_tokens: int = 196
    premise_max_tokens: int = 96


class Malformed:
    """Sentinel for unparseable numbered-list output."""

    def __repr__(self) -> str:  # pragma: no cover
        return "Malformed"


MALFORMED = Malformed()

_NUMBERED_LINE = re.compile(r"^\s*(\d+)[.)]\s*(.*\S)\s*$")


def parse_numbered_list(raw: str) -> list[str] | Malformed:
    """Parse "1. ... 2. ..." lines into their bodies; Malformed on any deviation.

    Well-formed means ascending consecutive numbering starting at 1 with a
    non-empty body on every line; blank lines between items are tolerated.
    """
    bodies: list[str] = []
    for line in raw.splitlines():
        if not line.strip():
            continue
        match = _NUMBERED_LINE.match(line)
        if not match:
            return MALFORMED
        if int(match.group(1)) != len(bodies) + 1:
            return MALFORMED
        bodies.append(match.group(2))
    if not bodies:
        return MALFORMED
    return bodies


def render_numbered_list(points: list[str]) -> str:
    return "\n".join(f"{i + 1}. {p}" for i, p in enumerate(points))


def generate_premises(
    backend: Backend,
    num: int,
    cfg: PlanConfig | None = None,
    templates: TemplateStore | None = None,
) -> list[Premise]:
    """Sample `num` premises with one high-temperature completion call."""
    if num < 1:
        raise ValueError("num must be >= 1")
    cfg = cfg or PlanConfig()
    templates = templates or TemplateStore()
    prompt = templates.render("premise")
    params = GenParams(
        max_tokens=cfg.premise_max_tokens,
        temperature=cfg.premise_temperature,
        num_samples=num,
    )
    return [Premise(t.strip()) for t in backend.complete(prompt, params)]


def generate_premise(
    backend: Backend,
    cfg: PlanConfig | None = None,
    templates: TemplateStore | None = None,
) -> Premise:
    return generate_premises(backend, 1, cfg, templates)[0]


def generate_setting(
    backend: Backend,
    premise: Premise,
    cfg: PlanConfig | None = None,
    templates: TemplateStore | None = None,
) -> str:
    """One-sentence setting beginning with the fixed prefix."""
    cfg = cfg or PlanConfig()
    templates = templates or TemplateStore()
    prompt = templates.render("setting", premise=premise.text)
    for attempt in range(cfg.setting_retries):
        params = GenParams(
            max_tokens=cfg.setting_max_tokens,
            temperature=cfg.gen_temperature,
            num_samples=attempt + 1,
        )
        completion = backend.complete(prompt, params)[attempt].strip()
        if completion:
            return first_sentence(f"{SETTING_PREFIX} {completion}")
    raise SettingGenerationFailed(
        f"backend returned empty settings {cfg.setting_retries} times"
    )


def _name_filter_flags(
    candidate: str,
    premise_and_setting: str,
    counts: dict[str, int],
    cfg: NameFilterConfig,
) -> bool:
    lowered = candidate.lower()
    if any(banned in lowered for banned in cfg.banned_substrings):
        return False
    if any(ch in string.punctuation for ch in candidate):
        return False
    appears_in_premise = lowered in premise_and_setting.lower()
    if not appears_in_premise and counts[candidate] > 1:
        return False
    return True


def filter_name_candidates(
    candidates: list[str],
    premise: Premise,
    setting: str,
    cfg: NameFilterConfig,
    taken: set[str] = frozenset(),
) -> list[str]:
    """Apply the rejection filters to one round of raw name samples.

    Filters, in order: banned substrings; punctuation; duplicated strings not
    found in the premise; names already assigned. Survivors are deduplicated
    preserving sample order.
    """
    cleaned = [c.strip() for c in candidates if c.strip()]
    counts: dict[str, int] = {}
    for c in cleaned:
        counts[c] = counts.get(c, 0) + 1
    source = f"{premise.text}\n{setting}"
    survivors: list[str] = []
    for c in cleaned:
        if c.lower() in taken:
            continue
        if c in survivors:
            continue
        if _name_filter_flags(c, source, counts, cfg):
            survivors.append(c)
    return survivors


def pick_preferred_name(survivors: list[str], cfg: NameFilterConfig) -> str | None:
    if not survivors:
        return None
    preferred = [s for s in survivors if len(s.split()) == cfg.prefer_word_count]
    return preferred[0] if preferred else survivors[0]


def sample_character_name(
    backend: Backend,
    premise: Premise,
    setting: str,
    prior_characters: list[CharacterSheet],
    cfg: NameFilterConfig | None = None,
    plan_cfg: PlanConfig | None = None,
    templates: TemplateStore | None = None,
) -> str:
    cfg = cfg or NameFilterConfig()
    plan_cfg = plan_cfg or PlanConfig()
    templates = templates or TemplateStore()
    prior_entries = _render_prior_entries(prior_characters, templates)
    prompt = templates.render(
        "character_name",
        premise=premise.text,
        setting=setting,
        prior_entries=prior_entries,
        index=str(len(prior_characters) + 1),
    )
    taken = {c.name.lower() for c in prior_characters}
    params = GenParams(
        max_tokens=plan_cfg.name_max_tokens,
        temperature=plan_cfg.gen_temperature,
        num_samples=cfg.samples_per_round,
        stop_sequences=("\n",),
    )
    for round_index in range(cfg.max_rounds):
        candidates = backend.complete(prompt, params)
        survivors = filter_name_candidates(candidates, premise, setting, cfg, taken)
        chosen = pick_preferred_name(survivors, cfg)
        if chosen is not None:
            return chosen
        logger.debug("name round %d filtered out all candidates", round_index + 1)
    raise NameSamplingExhausted(
        f"no acceptable name after {cfg.max_rounds} rounds of "
        f"{cfg.samples_per_round} samples"
    )


def _render_prior_entries(
    prior: list[CharacterSheet], templates: TemplateStore
) -> str:
    return "".join(
        templates.render(
            "character_entry",
            index=str(i + 1),
            name=sheet.name,
            description=sheet.description,
        )
        for i, sheet in enumerate(prior)
    )


def generate_character_description(
    backend: Backend,
    name: str,
    premise: Premise,
    setting: str,
    prior_sheets: list[CharacterSheet],
    cfg: PlanConfig | None = None,
    templates: TemplateStore | None = None,
) -> str:
    """Short description, truncated to the configured sentence cap.

    The prompt carries every prior name and description so each new
    character is written in context of those before it.
    """
    cfg = cfg or PlanConfig()
    templates = templates or TemplateStore()
    prompt = templates.render(
        "character_description",
        premise=premise.text,
        setting=setting,
        prior_entries=_render_prior_entries(prior_sheets, templates),
        index=str(len(prior_sheets) + 1),
        name=name,
    )
    for attempt in range(cfg.description_retries):
        params = GenParams(
            max_tokens=cfg.description_max_tokens,
            temperature=cfg.gen_temperature,
            num_samples=attempt + 1,
            stop_sequences=("\n\n",),
        )
        completion = backend.complete(prompt, params)[attempt].strip()
        if completion:
            return truncate_sentences(
                f"{name} is {completion}", cfg.max_description_sentences
            )
    raise PlanError(f"empty description for {name!r} after retries")


def generate_characters(
    backend: Backend,
    premise: Premise,
    setting: str,
    cfg: PlanConfig | None = None,
    templates: TemplateStore | None = None,
) -> list[CharacterSheet]:
    cfg = cfg or PlanConfig()
    sheets: list[CharacterSheet] = []
    for _ in range(cfg.num_characters):
        name = sample_character_name(
            backend, premise, setting, sheets, cfg.name_filter, cfg, templates
        )
        description = generate_character_description(
            backend, name, premise, setting, sheets, cfg, templates
        )
        sheets.append(CharacterSheet(name=name, description=description, created_at=0))
    return sheets


def generate_outline(
    backend: Backend,
    premise: Premise,
    setting: str,
    characters: list[CharacterSheet],
    required_points: int | None = None,
    cfg: PlanConfig | None = None,
    templates: TemplateStore | None = None,
) -> list[OutlineNode]:
    """Parse a numbered outline, resampling until well-formed (and exact count)."""
    cfg = cfg or PlanConfig()
    templates = templates or TemplateStore()
    prompt = templates.render(
        "outline",
        premise=premise.text,
        setting=setting,
        characters="\n".join(
            f"{i + 1}. {c.description}" for i, c in enumerate(characters)
        ),
    )
    for attempt in range(cfg.outline_retries):
        # request one extra sample per retry and take the newest one, so a
        # deterministic backend does not replay the same malformed output
        params = GenParams(
            max_tokens=cfg.outline_max_tokens,
            temperature=cfg.gen_temperature,
            num_samples=attempt + 1,
        )
        raw = backend.complete(prompt, params)[attempt]
        points = parse_numbered_list(raw)
        if isinstance(points, Malformed):
            continue
        if required_points is not None and len(points) != required_points:
            continue
        nodes = [OutlineNode(text=p) for p in points]
        assign_labels(nodes)
        return nodes
    raise OutlineGenerationFailed(
        f"no well-formed outline after {cfg.outline_retries} attempts"
    )


def expand_outline(
    backend: Backend,
    plan: Plan,
    target_depth: int,
    cfg: PlanConfig | None = None,
    templates: TemplateStore | None = None,
) -> Plan:
    """Grow every leaf shallower than `target_depth` with >= 2 sub-points."""
    cfg = cfg or PlanConfig()
    templates = templates or TemplateStore()
    current = outline_depth(plan.outline)
    if target_depth < current:
        raise ValueError(
            f"target_depth {target_depth} is below current depth {current}"
        )

    def expand(node: OutlineNode, depth: int) -> None:
        if depth >= target_depth:
            return
        if not node.children:
            node.children = [
                OutlineNode(text=p) for p in _expand_point(backend, plan, node, cfg, templates)
            ]
        for child in node.children:
            expand(child, depth + 1)

    for node in plan.outline:
        expand(node, 1)
    assign_labels(plan.outline)
    return plan


def _expand_point(
    backend: Backend,
    plan: Plan,
    node: OutlineNode,
    cfg: PlanConfig,
    templates: TemplateStore,
) -> list[str]:
    prompt = templates.render(
        "expand_outline", premise=plan.premise.text, point=node.text
    )
    for attempt in range(cfg.outline_retries):
        params = GenParams(
            max_tokens=cfg.outline_max_tokens,
            temperature=cfg.gen_temperature,
            num_samples=attempt + 1,
        )
        raw = backend.complete(prompt, params)[attempt]
        points = parse_numbered_list(raw)
        # a single sub-point adds no structure; treat it as malformed
        if not isinstance(points, Malformed) and len(points) >= 2:
            return points
    raise OutlineGenerationFailed(
        f"could not expand outline point {node.label or node.text!r}"
    )


def build_plan(
    backend: Backend,
    premise: Premise,
    required_points: int | None = 3,
    cfg: PlanConfig | None = None,
    templates: TemplateStore | None = None,
) -> Plan:
    """Run the full planning pass for a premise."""
    cfg = cfg or PlanConfig()
    templates = templates or TemplateStore()
    setting = generate_setting(backend, premise, cfg, templates)
    characters = generate_characters(backend, premise, setting, cfg, templates)
    outline = generate_outline(
        backend, premise, setting, characters, required_points, cfg, templates
    )
    return Plan(premise=premise, setting=setting, characters=characters, outline=outline)
