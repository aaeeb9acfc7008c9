"""Character-attribute knowledge base: extraction, merging, and contradiction repair.

Each character carries a compact key -> value dictionary instead of raw text.
New passages are mined for facts, facts for attribute keys, keys for values;
conflicting values for the same key are resolved by an entailment model, and
genuine contradictions produce edit instructions against the passage.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .backends.base import Backend, BackendError, GenParams, relevance
from .prompts import TemplateStore
from .story import AttributeDictionary, AttributeEntry, Fact, StoryState
from .textutil import name_in_text, names_match, norm_phrase, split_sentences

logger = logging.getLogger(__name__)

_DATA_PACKAGE = "storyloom.data"


class MergeOutcome:
    ADDED = "added"
    KEPT_EXISTING = "kept_existing"
    REPLACED = "replaced"
    FLAGGED = "flagged"


@dataclass(frozen=True)
class ContradictionFlag:
    character: str
    key: str
    old: AttributeEntry
    new: AttributeEntry
    p_contradict: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_contradict <= 1.0:
            raise ValueError("p_contradict must be in [0, 1]")


@dataclass(frozen=True)
class MergeResult:
    outcome: str
    flag: ContradictionFlag | None = None


@dataclass(frozen=True)
class EditConfig:
    entail_threshold: float = 0.5
    contradict_threshold: float = 0.5
    qa_threshold: float = 0.5
    fact_samples: int = 3
    value_samples: int = 3
    example_top_m: int = 5
    edit_retries: int = 3
    edit_length_ratio: float = 1.5
    fact_max_tokens: int = 128
    value_max_tokens: int = 12


@dataclass(frozen=True)
class BankExample:
    character: str
    fact: str
    lines: tuple[str, ...]


def load_example_bank(path: str | Path | None = None) -> list[BankExample]:
    """Parse the few-shot bank of Context/fact/attribute-line blocks."""
    if path is None:
        text = (
            resources.files(_DATA_PACKAGE)
            .joinpath("attribute_examples.txt")
            .read_text("utf-8")
        )
    else:
        text = Path(path).read_text(encoding="utf-8")
    examples: list[BankExample] = []
    for block in text.split("----"):
        lines = [l for l in (s.strip() for s in block.splitlines()) if l and not l.startswith("#")]
        if not lines:
            continue
        match = re.match(r"^Context \((?P<char>[^)]+)\): (?P<fact>.+)$", lines[0])
        if not match:
            continue
        examples.append(
            BankExample(match.group("char"), match.group("fact"), tuple(lines[1:]))
        )
    return examples


# --- numbered fact lists -------------------------------------------------------

_NUMBERED = re.compile(r"^\s*\d+[.)]\s*(.+\S)\s*$")


def _parse_fact_lines(raw: str) -> list[str]:
    facts = []
    for line in raw.splitlines():
        match = _NUMBERED.match(line)
        if match:
            facts.append(match.group(1).strip())
    return facts


def list_facts(
    backend: Backend,
    passage: str,
    character: str,
    passage_index: int,
    cfg: EditConfig | None = None,
    templates: TemplateStore | None = None,
) -> list[Fact]:
    """Facts about the character agreed on by multiple sampled lists.

    A fact survives when it appears (after normalization) in at least two of
    the sampled outputs, or when some fact from a different output entails it.
    """
    cfg = cfg or EditConfig()
    templates = templates or TemplateStore()
    prompt = templates.render("facts", passage=passage, character=character)
    params = GenParams(
        max_tokens=cfg.fact_max_tokens, temperature=0.7, num_samples=cfg.fact_samples
    )
    outputs = [_parse_fact_lines(raw) for raw in backend.complete(prompt, params)]
    outputs = [o for o in outputs if o]
    if not outputs:
        logger.warning("all fact lists malformed for %s", character)
        return []

    kept: list[str] = []
    seen: set[str] = set()
    for i, facts in enumerate(outputs):
        for fact in facts:
            key = norm_phrase(fact)
            if key in seen:
                continue
            occurrences = sum(
                1 for o in outputs if any(norm_phrase(f) == key for f in o)
            )
            agreed = occurrences >= 2
            if not agreed:
                for j, other in enumerate(outputs):
                    if j == i:
                        continue
                    for other_fact in other:
                        if norm_phrase(other_fact) == key:
                            continue
                        verdict = backend.entail(other_fact, fact)
                        if verdict.p_entail > cfg.entail_threshold:
                            agreed = True
                            break
                    if agreed:
                        break
            if agreed:
                seen.add(key)
                kept.append(fact)
    return [Fact(character=character, text=f, passage_index=passage_index) for f in kept]


# --- attribute key extraction ---------------------------------------------------

_POSSESSIVE_SUBJECT = re.compile(
    r"^(?P<subject>.+?) is (?P<possessor>[A-Z][\w'.-]*(?: [A-Z][\w'.-]*)*)'s "
    r"(?P<value>[\w -]+?)\.?$"
)


def parse_attribute_line(line: str, character: str) -> tuple[str, str] | None:
    """Rule-based (key, value) parse of one extraction line; None when it fails.

    Accepted shapes, with the subject required to match the character:
      "<char>'s <key> is <value>"
      "<char> is <Other>'s <value>"   -> key "<Other>'s"
    """
    line = line.strip()
    if not line:
        return None
    plain = re.match(rf"^(?P<subject>.+?)'s (?P<key>.+?) is (?P<value>.+?)\.?$", line)
    if plain and names_match(plain.group("subject"), character):
        key, value = plain.group("key").strip(), plain.group("value").strip()
        if key and value:
            return key, value
    possessive = _POSSESSIVE_SUBJECT.match(line)
    if possessive and names_match(possessive.group("subject"), character):
        possessor = possessive.group("possessor").strip()
        value = possessive.group("value").strip()
        if possessor and value:
            return f"{possessor}'s", value
    return None


def build_extraction_prompt(
    fact: Fact,
    bank: list[BankExample],
    backend: Backend,
    top_m: int,
    templates: TemplateStore,
) -> str:
    header = templates.render("attribute_extraction_header")
    vectors = backend.embed([fact.text] + [ex.fact for ex in bank])
    scores = [relevance(vectors[0], v) for v in vectors[1:]]
    order = sorted(range(len(bank)), key=lambda i: (-scores[i], i))[:top_m]
    shots = []
    for i in sorted(order):  # keep bank order for stable prompts
        ex = bank[i]
        shots.append(f"Context ({ex.character}): {ex.fact}\n" + "\n".join(ex.lines))
    tail = f"Context ({fact.character}): {fact.text}"
    return header + "\n----\n" + "\n----\n".join(shots + [tail])


def extract_attribute_keys(
    backend: Backend,
    fact: Fact,
    example_bank: list[BankExample],
    passage: str | None = None,
    cfg: EditConfig | None = None,
    templates: TemplateStore | None = None,
) -> list[str]:
    """Attribute keys named by the extraction model and confirmed by QA.

    Values produced at this stage are discarded; only keys that the QA
    backend can answer confidently (from the fact, or failing that from the
    passage) survive.
    """
    cfg = cfg or EditConfig()
    templates = templates or TemplateStore()
    if not example_bank:
        raise ValueError("example bank must be non-empty")
    prompt = build_extraction_prompt(
        fact, example_bank, backend, cfg.example_top_m, templates
    )
    raw = backend.complete(
        prompt, GenParams(max_tokens=64, temperature=0.2, num_samples=1)
    )[0]
    keys: list[str] = []
    for line in raw.splitlines():
        if not line.strip() or line.strip() == "----":
            continue
        parsed = parse_attribute_line(line, fact.character)
        if parsed is None:
            continue
        key, _ = parsed
        if key in keys:
            continue
        if _qa_confirms(backend, fact, key, passage, cfg, templates):
            keys.append(key)
    return keys


def _qa_confirms(
    backend: Backend,
    fact: Fact,
    key: str,
    passage: str | None,
    cfg: EditConfig,
    templates: TemplateStore,
) -> bool:
    question = templates.render("qa_question", character=fact.character, key=key)
    for context in filter(None, (fact.text, passage)):
        result = backend.answer(question, context)
        if not result.abstained and result.confidence >= cfg.qa_threshold:
            return True
    return False


# --- value inference ------------------------------------------------------------

def render_attribute_sentence(character: str, key: str, value: str) -> str:
    """Rule-based sentence for an attribute ("gender: female" -> "X's gender is female.")."""
    if key.endswith("'s"):
        return f"{character} is {key} {value}."
    return f"{character}'s {key} is {value}."


def infer_value(
    backend: Backend,
    fact: Fact,
    key: str,
    cfg: EditConfig | None = None,
    templates: TemplateStore | None = None,
) -> str | None:
    """Majority-or-entailed value for a key, gated by entailment from the fact."""
    cfg = cfg or EditConfig()
    templates = templates or TemplateStore()
    template = "value_possessive" if key.endswith("'s") else "value_plain"
    prompt = templates.render(
        template, fact=fact.text, character=fact.character, key=key
    )
    raw = backend.complete(
        prompt,
        GenParams(max_tokens=cfg.value_max_tokens, temperature=0.7,
                  num_samples=cfg.value_samples),
    )
    values = [_clean_value(r) for r in raw]
    values = [v for v in values if v]
    if not values:
        return None
    chosen = _agreed_value(backend, values, fact, key, cfg)
    if chosen is None:
        return None
    sentence = render_attribute_sentence(fact.character, key, chosen)
    verdict = backend.entail(fact.text, sentence)
    if verdict.p_entail > cfg.entail_threshold:
        return chosen
    return None


def _clean_value(raw: str) -> str:
    value = raw.strip().splitlines()[0] if raw.strip() else ""
    return value.strip().rstrip(".").strip()


def _agreed_value(
    backend: Backend,
    values: list[str],
    fact: Fact,
    key: str,
    cfg: EditConfig,
) -> str | None:
    counts: dict[str, int] = {}
    for v in values:
        counts[norm_phrase(v)] = counts.get(norm_phrase(v), 0) + 1
    for v in values:
        if counts[norm_phrase(v)] >= 2:
            return v
    # no majority: accept a value entailed by a different sample
    for i, v in enumerate(values):
        sentence = render_attribute_sentence(fact.character, key, v)
        for j, other in enumerate(values):
            if i == j or norm_phrase(v) == norm_phrase(other):
                continue
            other_sentence = render_attribute_sentence(fact.character, key, other)
            if backend.entail(other_sentence, sentence).p_entail > cfg.entail_threshold:
                return v
    return None


# --- dictionary merging ---------------------------------------------------------

def merge_attribute(
    backend: Backend,
    dictionary: AttributeDictionary,
    character: str,
    key: str,
    new_entry: AttributeEntry,
    cfg: EditConfig | None = None,
) -> MergeResult:
    """Fold one value into the dictionary under the one-value-per-key rule.

    A fresh key is added. On conflict, the entailment-preferred (more
    specific) value wins; a neutral relation keeps the existing value; a
    contradiction is flagged with its probability.
    """
    cfg = cfg or EditConfig()
    existing = dictionary.get(key)
    if existing is None:
        dictionary.entries[key] = new_entry
        return MergeResult(MergeOutcome.ADDED)
    if norm_phrase(existing.value) == norm_phrase(new_entry.value):
        return MergeResult(MergeOutcome.KEPT_EXISTING)

    old_sentence = render_attribute_sentence(character, key, existing.value)
    new_sentence = render_attribute_sentence(character, key, new_entry.value)
    old_to_new = backend.entail(old_sentence, new_sentence)
    new_to_old = backend.entail(new_sentence, old_sentence)

    best_entail = max(old_to_new.p_entail, new_to_old.p_entail)
    if best_entail > cfg.entail_threshold:
        # keep the entailing side: the more specific statement
        if old_to_new.p_entail >= new_to_old.p_entail:
            return MergeResult(MergeOutcome.KEPT_EXISTING)
        dictionary.entries[key] = new_entry
        return MergeResult(MergeOutcome.REPLACED)

    worst_contradict = max(old_to_new.p_contradict, new_to_old.p_contradict)
    if worst_contradict > cfg.contradict_threshold:
        flag = ContradictionFlag(
            character=character,
            key=key,
            old=existing,
            new=new_entry,
            p_contradict=worst_contradict,
        )
        return MergeResult(MergeOutcome.FLAGGED, flag)
    return MergeResult(MergeOutcome.KEPT_EXISTING)


def complete_relations(
    backend: Backend,
    kb: dict[str, AttributeDictionary],
    character: str,
    key: str,
    value: str,
    fact: Fact,
    cfg: EditConfig | None = None,
    templates: TemplateStore | None = None,
) -> list[tuple[str, str, str]]:
    """Reciprocal attribute additions implied by a relational key.

    For ("<Other>'s", value) keys naming another known character, asks the
    completion backend for the other side of the relation and emits name
    pointers both ways. Returned tuples are (character, key, value) and have
    already been merged.
    """
    cfg = cfg or EditConfig()
    templates = templates or TemplateStore()
    if not key.endswith("'s"):
        return []
    owner = key[:-2].strip()
    other = next((name for name in kb if names_match(owner, name)), None)
    if other is None or names_match(other, character):
        return []

    additions: list[tuple[str, str, str]] = []

    prompt = templates.render(
        "reciprocal", fact=fact.text, other=other, character=character
    )
    try:
        raw = backend.complete(
            prompt, GenParams(max_tokens=cfg.value_max_tokens, temperature=0.7,
                              num_samples=1)
        )[0]
    except BackendError as exc:
        logger.warning("reciprocal completion failed for %s/%s: %s", character, key, exc)
        return []
    reciprocal = _clean_value(raw)
    planned: list[tuple[str, str, str]] = []
    if reciprocal and reciprocal.lower() != "unknown":
        planned.append((other, f"{character}'s", reciprocal))
        # the character stands in the reciprocal relation's place for the other
        planned.append((character, f"{reciprocal}'s name", other))
    planned.append((other, f"{value}'s name", character))

    for target, t_key, t_value in planned:
        entry = AttributeEntry(key=t_key, value=t_value, source_fact=fact)
        result = merge_attribute(
            backend, kb.setdefault(target, AttributeDictionary()),
            target, t_key, entry, cfg,
        )
        if result.outcome in (MergeOutcome.ADDED, MergeOutcome.REPLACED):
            additions.append((target, t_key, t_value))
    return additions


# --- detection and correction ---------------------------------------------------

@dataclass
class DetectionReport:
    flags: list[ContradictionFlag] = field(default_factory=list)
    max_p_contradict: float = 0.0


def characters_in_passage(kb: dict[str, AttributeDictionary], passage: str) -> list[str]:
    return sorted(name for name in kb if name_in_text(name, passage))


def detect(
    backend: Backend,
    passage: str,
    state: StoryState,
    passage_index: int,
    example_bank: list[BankExample],
    cfg: EditConfig | None = None,
    templates: TemplateStore | None = None,
) -> DetectionReport:
    """Run the extraction pipeline for every character in the passage.

    Merges run in sorted character order so results are reproducible. A
    failure inside one fact's pipeline skips the fact, never the run.
    """
    cfg = cfg or EditConfig()
    templates = templates or TemplateStore()
    report = DetectionReport()
    for character in characters_in_passage(state.kb, passage):
        try:
            facts = list_facts(backend, passage, character, passage_index, cfg, templates)
        except BackendError as exc:
            logger.warning("fact listing failed for %s: %s", character, exc)
            continue
        for fact in facts:
            try:
                keys = extract_attribute_keys(
                    backend, fact, example_bank, passage, cfg, templates
                )
                for key in keys:
                    value = infer_value(backend, fact, key, cfg, templates)
                    if value is None:
                        continue
                    entry = AttributeEntry(key=key, value=value, source_fact=fact)
                    dictionary = state.kb.setdefault(character, AttributeDictionary())
                    result = merge_attribute(
                        backend, dictionary, character, key, entry, cfg
                    )
                    if result.outcome == MergeOutcome.FLAGGED and result.flag:
                        report.flags.append(result.flag)
                        report.max_p_contradict = max(
                            report.max_p_contradict, result.flag.p_contradict
                        )
                    elif result.outcome in (MergeOutcome.ADDED, MergeOutcome.REPLACED):
                        complete_relations(
                            backend, state.kb, character, key, value, fact, cfg, templates
                        )
            except BackendError as exc:
                logger.warning("skipping fact %r: %s", fact.text, exc)
    return report


def seed_kb_from_plan(
    backend: Backend,
    state: StoryState,
    example_bank: list[BankExample],
    cfg: EditConfig | None = None,
    templates: TemplateStore | None = None,
) -> None:
    """Initialize attribute dictionaries from the plan's character descriptions."""
    for sheet in state.plan.characters:
        state.kb.setdefault(sheet.name, AttributeDictionary())
    for sheet in state.plan.characters:
        if not sheet.description.strip():
            continue
        detect(backend, sheet.description, state, 0, example_bank, cfg, templates)


@dataclass(frozen=True)
class CorrectionResult:
    text: str
    resolved: bool
    attempts: int


def correct(
    backend: Backend,
    passage: str,
    flag: ContradictionFlag,
    cfg: EditConfig | None = None,
    templates: TemplateStore | None = None,
) -> CorrectionResult:
    """Apply the standing fact as an edit instruction to the flagged passage.

    Edits that change nothing or balloon past the length ratio are rejected
    and retried; exhaustion returns the passage unchanged so the run keeps
    its history (the flag is reported unresolved).
    """
    cfg = cfg or EditConfig()
    templates = templates or TemplateStore()
    instruction = templates.render("edit_instruction", fact=flag.old.source_fact.text)
    input_tokens = backend.count_tokens(passage)
    for attempt in range(1, cfg.edit_retries + 1):
        try:
            edited = backend.edit(passage, instruction)
        except BackendError as exc:
            logger.warning("edit call failed (attempt %d): %s", attempt, exc)
            continue
        if edited == passage:
            continue
        if backend.count_tokens(edited) > cfg.edit_length_ratio * input_tokens:
            logger.debug("edit rejected as overly lengthy (attempt %d)", attempt)
            continue
        return CorrectionResult(edited, True, attempt)
    logger.warning("edit unresolved for %s/%s after %d attempts",
                   flag.character, flag.key, cfg.edit_retries)
    return CorrectionResult(passage, False, cfg.edit_retries)
