"""storyloom: plan/draft/rewrite/edit pipeline for long plot-coherent stories."""

from .story import (
    AttributeDictionary,
    AttributeEntry,
    CharacterSheet,
    Fact,
    OutlineNode,
    Passage,
    Plan,
    Premise,
    StoryState,
    flatten_outline,
    story_text,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeDictionary",
    "AttributeEntry",
    "CharacterSheet",
    "Fact",
    "OutlineNode",
    "Passage",
    "Plan",
    "Premise",
    "StoryState",
    "flatten_outline",
    "story_text",
    "__version__",
]
