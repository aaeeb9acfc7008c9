"""Core story domain types: premise, plan, outline tree, passages, and story state."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator

SETTING_PREFIX = "The story is set"
PASSAGE_SEPARATOR = "\n\n"

SCHEMA_VERSION = 1

_SUBLEVEL_LETTERS = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class Premise:
    """A one-paragraph story premise."""

    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("premise must be non-empty")
        if "\n\n" in self.text:
            raise ValueError("premise must be a single paragraph")


@dataclass(frozen=True)
class CharacterSheet:
    """A named character with a short description.

    `created_at` is the index of the passage that introduced the character;
    plan-time characters use 0.
    """

    name: str
    description: str
    created_at: int = 0

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise ValueError("character name must be non-empty")
        if "\n" in self.name:
            raise ValueError("character name must not contain line breaks")


@dataclass
class OutlineNode:
    """One plot point; interior nodes carry ordered children."""

    text: str
    children: list[OutlineNode] = field(default_factory=list)
    label: str = ""

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("outline point text must be non-empty")

    def depth(self) -> int:
        if not self.children:
            return 1
        return 1 + max(c.depth() for c in self.children)

    def leaves(self) -> Iterator[OutlineNode]:
        if not self.children:
            yield self
        else:
            for child in self.children:
                yield from child.leaves()


def assign_labels(outline: list[OutlineNode]) -> None:
    """Assign hierarchical labels in place: "1", "2", ... then "1.a", "1.b", ..."""

    def visit(node: OutlineNode, label: str) -> None:
        node.label = label
        for i, child in enumerate(node.children):
            if i >= len(_SUBLEVEL_LETTERS):
                raise ValueError(f"too many children under outline point {label}")
            visit(child, f"{label}.{_SUBLEVEL_LETTERS[i]}")

    for i, node in enumerate(outline):
        visit(node, str(i + 1))


def outline_depth(outline: list[OutlineNode]) -> int:
    return max((n.depth() for n in outline), default=0)


@dataclass
class Plan:
    """Premise plus the generated setting, character sheets, and outline."""

    premise: Premise
    setting: str
    characters: list[CharacterSheet]
    outline: list[OutlineNode]

    def __post_init__(self) -> None:
        if not self.setting.startswith(SETTING_PREFIX):
            raise ValueError(f"setting must begin with {SETTING_PREFIX!r}")
        if not self.outline:
            raise ValueError("outline must be non-empty")

    def character_names(self) -> list[str]:
        return [c.name for c in self.characters]


@dataclass(frozen=True)
class FlatLeaf:
    """One outline leaf in reading order, with the texts of its ancestors."""

    label: str
    text: str
    ancestor_texts: tuple[str, ...]


def flatten_outline(plan: Plan) -> list[FlatLeaf]:
    """Depth-first leaves of the outline with ancestor texts for collapsing."""
    if not plan.outline:
        raise ValueError("outline must be non-empty")
    leaves: list[FlatLeaf] = []

    def visit(node: OutlineNode, ancestors: tuple[str, ...]) -> None:
        if not node.children:
            leaves.append(FlatLeaf(node.label, node.text, ancestors))
        else:
            for child in node.children:
                visit(child, ancestors + (node.text,))

    for node in plan.outline:
        visit(node, ())
    return leaves


def leaf_by_label(plan: Plan, label: str) -> FlatLeaf:
    for leaf in flatten_outline(plan):
        if leaf.label == label:
            return leaf
    raise KeyError(label)


@dataclass(frozen=True)
class Passage:
    """One accepted story continuation."""

    text: str
    section_path: str
    index: int
    token_count: int


@dataclass
class AttributeEntry:
    """A single attribute value with the fact it came from."""

    key: str
    value: str
    source_fact: "Fact"
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if not self.key.strip() or "\n" in self.key:
            raise ValueError("attribute key must be non-empty and single-line")
        if not self.value.strip():
            raise ValueError("attribute value must be non-empty")


@dataclass(frozen=True)
class Fact:
    """A one-sentence statement about a character, tied to the passage it came from."""

    character: str
    text: str
    passage_index: int

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("fact text must be non-empty")


@dataclass
class AttributeDictionary:
    """Per-character attribute ledger; one value per key."""

    entries: dict[str, AttributeEntry] = field(default_factory=dict)

    def get(self, key: str) -> AttributeEntry | None:
        return self.entries.get(key)

    def render(self) -> str:
        """Human-readable "key: value" listing."""
        return "\n".join(f"{k}: {e.value}" for k, e in self.entries.items())


@dataclass
class StoryState:
    """Mutable state of one generation run: plan, accepted passages, character KB."""

    plan: Plan
    passages: list[Passage] = field(default_factory=list)
    kb: dict[str, AttributeDictionary] = field(default_factory=dict)
    current_leaf: int = 0

    def append_passage(self, passage: Passage) -> None:
        if passage.index != len(self.passages):
            raise ValueError(
                f"passage index {passage.index} breaks contiguity "
                f"(expected {len(self.passages)})"
            )
        self.passages.append(passage)

    def last_passage(self) -> Passage | None:
        return self.passages[-1] if self.passages else None


def story_text(state: StoryState, last_k: int | None = None) -> str:
    """Concatenate passage texts in order, blank-line separated.

    `last_k=None` means all passages.
    """
    passages = state.passages if last_k is None else state.passages[-last_k:]
    return PASSAGE_SEPARATOR.join(p.text for p in passages)


# --- JSON serialization -------------------------------------------------------

def outline_to_dict(node: OutlineNode) -> dict[str, Any]:
    return {
        "text": node.text,
        "label": node.label,
        "children": [outline_to_dict(c) for c in node.children],
    }


def outline_from_dict(data: dict[str, Any]) -> OutlineNode:
    return OutlineNode(
        text=data["text"],
        label=data.get("label", ""),
        children=[outline_from_dict(c) for c in data.get("children", [])],
    )


def plan_to_dict(plan: Plan) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "premise": plan.premise.text,
        "setting": plan.setting,
        "characters": [
            {"name": c.name, "description": c.description, "created_at": c.created_at}
            for c in plan.characters
        ],
        "outline": [outline_to_dict(n) for n in plan.outline],
    }


def plan_from_dict(data: dict[str, Any]) -> Plan:
    return Plan(
        premise=Premise(data["premise"]),
        setting=data["setting"],
        characters=[
            CharacterSheet(c["name"], c["description"], c.get("created_at", 0))
            for c in data["characters"]
        ],
        outline=[outline_from_dict(n) for n in data["outline"]],
    )


def fact_to_dict(fact: Fact) -> dict[str, Any]:
    return {
        "character": fact.character,
        "text": fact.text,
        "passage_index": fact.passage_index,
    }


def fact_from_dict(data: dict[str, Any]) -> Fact:
    return Fact(data["character"], data["text"], data["passage_index"])


def kb_to_dict(kb: dict[str, AttributeDictionary]) -> dict[str, Any]:
    return {
        name: {
            key: {
                "value": entry.value,
                "confidence": entry.confidence,
                "source_fact": fact_to_dict(entry.source_fact),
            }
            for key, entry in dictionary.entries.items()
        }
        for name, dictionary in kb.items()
    }


def kb_from_dict(data: dict[str, Any]) -> dict[str, AttributeDictionary]:
    kb: dict[str, AttributeDictionary] = {}
    for name, entries in data.items():
        dictionary = AttributeDictionary()
        for key, payload in entries.items():
            dictionary.entries[key] = AttributeEntry(
                key=key,
                value=payload["value"],
                source_fact=fact_from_dict(payload["source_fact"]),
                confidence=payload.get("confidence", 1.0),
            )
        kb[name] = dictionary
    return kb


def state_to_dict(state: StoryState) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "plan": plan_to_dict(state.plan),
        "passages": [
            {
                "text": p.text,
                "section_path": p.section_path,
                "index": p.index,
                "token_count": p.token_count,
            }
            for p in state.passages
        ],
        "kb": kb_to_dict(state.kb),
        "current_leaf": state.current_leaf,
    }


def state_from_dict(data: dict[str, Any]) -> StoryState:
    return StoryState(
        plan=plan_from_dict(data["plan"]),
        passages=[
            Passage(p["text"], p["section_path"], p["index"], p["token_count"])
            for p in data["passages"]
        ],
        kb=kb_from_dict(data.get("kb", {})),
        current_leaf=data.get("current_leaf", 0),
    )
