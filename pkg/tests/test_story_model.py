from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from storyloom.story import (
    CharacterSheet,
    OutlineNode,
    Passage,
    Plan,
    Premise,
    StoryState,
    assign_labels,
    flatten_outline,
    leaf_by_label,
    plan_from_dict,
    plan_to_dict,
    state_from_dict,
    state_to_dict,
    story_text,
)
from .conftest import make_plan


class TestPremise:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Premise("   ")

    def test_rejects_multiple_paragraphs(self):
        with pytest.raises(ValueError):
            Premise("First paragraph.\n\nSecond paragraph.")

    def test_accepts_single_paragraph(self):
        assert Premise("A story about a town.").text


class TestCharacterSheet:
    def test_rejects_empty_name(self):
        with pytest.raises(ValueError):
            CharacterSheet("", "someone")

    def test_rejects_line_break_in_name(self):
        with pytest.raises(ValueError):
            CharacterSheet("A\nB", "someone")


class TestFlattenOutline:
    def test_flat_outline_labels(self, plan):
        leaves = flatten_outline(plan)
        assert [l.label for l in leaves] == ["1", "2", "3"]
        assert all(l.ancestor_texts == () for l in leaves)

    def test_three_by_four_hierarchy(self):
        plan = make_plan()
        for node in plan.outline:
            node.children = [
                OutlineNode(text=f"{node.text} detail {i}") for i in range(4)
            ]
        assign_labels(plan.outline)
        leaves = flatten_outline(plan)
        assert len(leaves) == 12
        assert leaves[0].label == "1.a"
        assert leaves[-1].label == "3.d"
        assert leaves[4].ancestor_texts == (plan.outline[1].text,)

    def test_single_point_with_children(self):
        plan = make_plan(points=("Only point",))
        plan.outline[0].children = [
            OutlineNode(text="first half"), OutlineNode(text="second half"),
        ]
        assign_labels(plan.outline)
        leaves = flatten_outline(plan)
        assert [l.label for l in leaves] == ["1.a", "1.b"]
        assert all(l.ancestor_texts == ("Only point",) for l in leaves)

    def test_label_lookup_is_bijective(self):
        plan = make_plan()
        plan.outline[1].children = [OutlineNode(text="a"), OutlineNode(text="b")]
        assign_labels(plan.outline)
        leaves = flatten_outline(plan)
        assert len({l.label for l in leaves}) == len(leaves)
        for leaf in leaves:
            assert leaf_by_label(plan, leaf.label).text == leaf.text

    @given(st.lists(st.integers(min_value=0, max_value=3), min_size=1, max_size=5))
    def test_leaf_count_matches_tree(self, child_counts):
        outline = []
        expected = 0
        for i, k in enumerate(child_counts):
            node = OutlineNode(text=f"point {i}")
            node.children = [OutlineNode(text=f"sub {i}.{j}") for j in range(k)]
            expected += max(k, 1)
            outline.append(node)
        assign_labels(outline)
        plan = make_plan()
        plan.outline = outline
        assert len(flatten_outline(plan)) == expected


class TestStoryText:
    def test_empty(self, empty_state):
        assert story_text(empty_state) == ""

    def test_last_k(self, empty_state, mock_backend):
        for i, text in enumerate(["one fish", "two fish", "red fish"]):
            empty_state.append_passage(
                Passage(text, "1", i, mock_backend.count_tokens(text))
            )
        assert story_text(empty_state, last_k=1) == "red fish"
        assert story_text(empty_state) == "one fish\n\ntwo fish\n\nred fish"

    def test_length_is_sum_plus_separators(self, empty_state):
        texts = ["alpha beta", "gamma", "delta epsilon zeta"]
        for i, t in enumerate(texts):
            empty_state.append_passage(Passage(t, "1", i, len(t.split())))
        joined = story_text(empty_state)
        assert len(joined) == sum(len(t) for t in texts) + 2 * len("\n\n")

    def test_append_only(self, empty_state):
        empty_state.append_passage(Passage("first", "1", 0, 1))
        before = empty_state.passages[0]
        empty_state.append_passage(Passage("second", "1", 1, 1))
        assert empty_state.passages[0] is before

    def test_rejects_gap_in_indices(self, empty_state):
        with pytest.raises(ValueError):
            empty_state.append_passage(Passage("first", "1", 3, 1))


class TestPlanInvariants:
    def test_setting_prefix_enforced(self, plan):
        with pytest.raises(ValueError):
            Plan(
                premise=plan.premise,
                setting="Somewhere else entirely.",
                characters=plan.characters,
                outline=plan.outline,
            )

    def test_outline_must_be_non_empty(self, plan):
        with pytest.raises(ValueError):
            Plan(
                premise=plan.premise,
                setting=plan.setting,
                characters=plan.characters,
                outline=[],
            )


class TestSerialization:
    def test_plan_round_trip(self, plan):
        plan.outline[0].children = [OutlineNode(text="x"), OutlineNode(text="y")]
        assign_labels(plan.outline)
        restored = plan_from_dict(plan_to_dict(plan))
        assert plan_to_dict(restored) == plan_to_dict(plan)

    def test_state_round_trip(self, empty_state):
        empty_state.append_passage(Passage("some text here", "1", 0, 3))
        empty_state.current_leaf = 1
        restored = state_from_dict(state_to_dict(empty_state))
        assert state_to_dict(restored) == state_to_dict(empty_state)
