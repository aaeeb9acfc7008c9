from __future__ import annotations

import pytest

from storyloom.backends import MockBackend
from storyloom.story import (
    CharacterSheet,
    OutlineNode,
    Plan,
    Premise,
    StoryState,
    assign_labels,
)


@pytest.fixture
def mock_backend() -> MockBackend:
    return MockBackend(seed=0)


class ScriptedCompletionBackend(MockBackend):
    """Mock backend whose complete() replays a scripted response queue.

    Each script entry is a list of samples for one call; when the queue is
    exhausted, calls fall through to the normal mock routing. Requests for
    more samples than an entry holds are padded with the entry's last item.
    """

    def __init__(self, script: list[list[str]], **kwargs):
        super().__init__(**kwargs)
        self.script = list(script)
        self.calls: list[str] = []

    def complete(self, prompt, params):
        self.calls.append(prompt)
        if self.script:
            entry = self.script.pop(0)
            samples = list(entry) + [entry[-1]] * (params.num_samples - len(entry))
            return samples[: params.num_samples]
        return super().complete(prompt, params)


def make_plan(
    premise: str = "A quiet harbor town wakes to find every boat missing.",
    points: tuple[str, ...] = (
        "The town discovers the empty harbor and starts asking questions",
        "A search up the coast uncovers who took the boats",
        "The boats come home and the town settles its debts",
    ),
    characters: tuple[tuple[str, str], ...] = (
        ("Mira Holloway", "Mira Holloway is a patient harbor clerk with a long memory."),
        ("Dorian Vance", "Dorian Vance is a restless ferry pilot who keeps his own counsel."),
        ("Petra Lindqvist", "Petra Lindqvist is a careful shipwright who trusts slowly."),
    ),
) -> Plan:
    outline = [OutlineNode(text=p) for p in points]
    assign_labels(outline)
    return Plan(
        premise=Premise(premise),
        setting="The story is set in a small harbor town at the end of summer.",
        characters=[CharacterSheet(n, d) for n, d in characters],
        outline=outline,
    )


@pytest.fixture
def plan() -> Plan:
    return make_plan()


@pytest.fixture
def empty_state(plan: Plan) -> StoryState:
    return StoryState(plan=plan)
