"""Contradiction-detection evaluation harness.

Loads (setup, altered-setup, story, altered-story) tuples, expands them into
labeled consistent/contradictory pairs, scores them with two sentence-level
entailment baselines and the structured attribute detector, and reports
ROC-AUC per method. A synthetic tuple generator plus fixture-table builders
make the whole harness runnable offline with oracle mock backends.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .backends.base import Backend, EntailmentVerdict, relevance
from .backends.mock import MockBackend, make_verdict
from .editing import BankExample, EditConfig, detect, load_example_bank, seed_kb_from_plan
from .prompts import TemplateStore
from .story import (
    CharacterSheet,
    OutlineNode,
    Plan,
    Premise,
    StoryState,
    assign_labels,
)
from .textutil import norm_phrase, split_sentences

logger = logging.getLogger(__name__)

CONSISTENT = 0
CONTRADICTORY = 1


@dataclass(frozen=True)
class EvalTuple:
    id: str
    s: str
    s_prime: str
    t: str
    t_prime: str

    def __post_init__(self) -> None:
        for name in ("s", "s_prime", "t", "t_prime"):
            if not getattr(self, name).strip():
                raise ValueError(f"tuple field {name} must be non-empty")


@dataclass(frozen=True)
class LabeledPair:
    tuple_id: str
    setup: str
    story: str
    label: int  # CONSISTENT or CONTRADICTORY


def load_tuples(path: str | Path) -> list[EvalTuple]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        EvalTuple(str(d["id"]), d["s"], d["s_prime"], d["t"], d["t_prime"])
        for d in data
    ]


def save_tuples(tuples: list[EvalTuple], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(
            [
                {"id": t.id, "s": t.s, "s_prime": t.s_prime, "t": t.t, "t_prime": t.t_prime}
                for t in tuples
            ],
            indent=2,
        ),
        encoding="utf-8",
    )


def expand_tuples(tuples: list[EvalTuple]) -> list[LabeledPair]:
    """Four labeled pairs per tuple: matched pairs consistent, crossed pairs not."""
    pairs: list[LabeledPair] = []
    for t in tuples:
        pairs.append(LabeledPair(t.id, t.s, t.t, CONSISTENT))
        pairs.append(LabeledPair(t.id, t.s_prime, t.t_prime, CONSISTENT))
        pairs.append(LabeledPair(t.id, t.s, t.t_prime, CONTRADICTORY))
        pairs.append(LabeledPair(t.id, t.s_prime, t.t, CONTRADICTORY))
    return pairs


# --- baselines -------------------------------------------------------------------

def entailment_baseline(backend: Backend, setup: str, story: str) -> float:
    """Max contradiction probability over all setup x story sentence pairs."""
    setup_sentences = split_sentences(setup)
    story_sentences = split_sentences(story)
    best = 0.0
    for s in setup_sentences:
        for t in story_sentences:
            best = max(best, backend.entail(s, t).p_contradict)
    return best


def entailment_dpr_baseline(backend: Backend, setup: str, story: str) -> float:
    """Each story sentence is checked against only its most relevant setup sentence."""
    setup_sentences = split_sentences(setup)
    story_sentences = split_sentences(story)
    if not setup_sentences or not story_sentences:
        return 0.0
    vectors = backend.embed(setup_sentences + story_sentences)
    setup_vecs = vectors[: len(setup_sentences)]
    story_vecs = vectors[len(setup_sentences):]
    best = 0.0
    for t_idx, t in enumerate(story_sentences):
        scores = [relevance(story_vecs[t_idx], sv) for sv in setup_vecs]
        s_idx = max(range(len(scores)), key=lambda i: (scores[i], -i))
        best = max(best, backend.entail(setup_sentences[s_idx], t).p_contradict)
    return best


# --- structured detector -----------------------------------------------------------

def parse_setup(setup: str) -> Plan:
    """Read a plan-shaped setup: premise, setting, character descriptions.

    Paragraphs beginning with the setting prefix become the setting; ones
    starting with a capitalized name followed by "is" become character
    sheets; the first remaining paragraph is the premise.
    """
    import re

    premise_text = ""
    setting = ""
    characters: list[CharacterSheet] = []
    for block in setup.split("\n\n"):
        para = " ".join(block.split())
        if not para:
            continue
        if para.startswith("The story is set"):
            setting = para
            continue
        name_match = re.match(
            r"^(?P<name>[A-Z][\w'.-]*(?: [A-Z][\w'.-]*)*) is\b", para
        )
        if name_match:
            characters.append(
                CharacterSheet(name=name_match.group("name"), description=para)
            )
            continue
        if not premise_text:
            premise_text = para
    if not premise_text:
        premise_text = setup.strip().splitlines()[0]
    if not setting:
        setting = "The story is set where the premise leads."
    outline = [OutlineNode(text="the story follows the premise")]
    assign_labels(outline)
    return Plan(
        premise=Premise(premise_text),
        setting=setting,
        characters=characters,
        outline=outline,
    )


def structured_detector(
    backend: Backend,
    setup: str,
    story: str,
    example_bank: list[BankExample] | None = None,
    cfg: EditConfig | None = None,
    templates: TemplateStore | None = None,
) -> float:
    """Seed the KB from the setup, run detection over the story in
    probability mode, and return the largest contradiction probability."""
    cfg = cfg or EditConfig()
    templates = templates or TemplateStore()
    bank = example_bank or load_example_bank()
    try:
        plan = parse_setup(setup)
        state = StoryState(plan=plan)
        seed_kb_from_plan(backend, state, bank, cfg, templates)
        report = detect(backend, story, state, 1, bank, cfg, templates)
        return report.max_p_contradict
    except Exception as exc:
        logger.warning("structured detector degraded to 0.0: %s", exc)
        return 0.0


# --- ROC-AUC -------------------------------------------------------------------

def roc_auc(scores: list[float], labels: list[int]) -> float:
    """Probability a random positive outscores a random negative; ties count half.

    Computed with the rank-sum formulation over average ranks.
    """
    if len(scores) != len(labels):
        raise ValueError("scores and labels must have equal length")
    n_pos = sum(1 for y in labels if y == 1)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc is undefined without both classes")
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg_rank = (i + j) / 2 + 1  # 1-based average rank of the tie group
        for k in range(i, j + 1):
            ranks[order[k]] = avg_rank
        i = j + 1
    pos_rank_sum = sum(r for r, y in zip(ranks, labels) if y == 1)
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


# --- evaluation driver ------------------------------------------------------------

Method = Callable[[str, str], float]


@dataclass
class MethodResult:
    auc: float
    pairs_scored: int
    pairs_excluded: int


def build_methods(
    backend: Backend,
    names: list[str],
    example_bank: list[BankExample] | None = None,
    cfg: EditConfig | None = None,
) -> dict[str, Method]:
    available: dict[str, Method] = {
        "entailment": lambda s, t: entailment_baseline(backend, s, t),
        "entailment-dpr": lambda s, t: entailment_dpr_baseline(backend, s, t),
        "structured": lambda s, t: structured_detector(backend, s, t, example_bank, cfg),
    }
    unknown = [n for n in names if n not in available]
    if unknown:
        raise ValueError(f"unknown methods: {unknown}")
    return {n: available[n] for n in names}


def evaluate(
    tuples: list[EvalTuple],
    methods: dict[str, Method],
) -> dict[str, MethodResult]:
    """Score every labeled pair with every method and compute per-method AUC.

    A pair a method cannot score is excluded from that method's AUC and
    counted in the report.
    """
    if not tuples:
        raise ValueError("no tuples to evaluate")
    pairs = expand_tuples(tuples)
    results: dict[str, MethodResult] = {}
    for name, method in methods.items():
        scores: list[float] = []
        labels: list[int] = []
        excluded = 0
        for pair in pairs:
            try:
                scores.append(method(pair.setup, pair.story))
                labels.append(pair.label)
            except Exception as exc:
                excluded += 1
                logger.warning("method %s failed on pair %s: %s", name, pair.tuple_id, exc)
        results[name] = MethodResult(
            auc=roc_auc(scores, labels),
            pairs_scored=len(scores),
            pairs_excluded=excluded,
        )
    return results


def results_table(results: dict[str, MethodResult]) -> str:
    """Aligned-column text table of AUC results."""
    name_width = max(len("method"), *(len(n) for n in results))
    lines = [
        f"{'method'.ljust(name_width)}  {'roc_auc':>8}  {'pairs':>6}  {'excluded':>8}"
    ]
    for name, r in results.items():
        lines.append(
            f"{name.ljust(name_width)}  {r.auc:8.3f}  {r.pairs_scored:6d}  {r.pairs_excluded:8d}"
        )
    return "\n".join(lines)


# --- synthetic tuples and oracle fixtures -------------------------------------------

_SYNTH_PAIRS = [
    ("Beline Okafor", "Jonet Okafor"), ("Casta Weller", "Dorin Weller"),
    ("Erla Munsen", "Falk Munsen"), ("Gilda Pruett", "Haro Pruett"),
    ("Iska Rowen", "Jory Rowen"), ("Kesta Larkin", "Liv Larkin"),
    ("Mona Severin", "Nils Severin"), ("Orla Teague", "Pell Teague"),
    ("Quin Ashby", "Rena Ashby"), ("Sorel Vane", "Tilda Vane"),
    ("Una Marlowe", "Vesper Marlowe"), ("Wilda Crane", "Xan Crane"),
    ("Ysra Dalton", "Zeno Dalton"), ("Abey Foss", "Brin Foss"),
    ("Ceris Holt", "Dara Holt"), ("Evan Pike", "Fern Pike"),
    ("Gwen Salter", "Hollis Salter"), ("Ines Tobin", "Jud Tobin"),
    ("Kiva Unger", "Lars Unger"), ("Mera Voss", "Nico Voss"),
    ("Oria Webb", "Piers Webb"), ("Rhea Stone", "Soren Stone"),
    ("Tova Egan", "Ulric Egan"), ("Vada Finch", "Wynn Finch"),
    ("Xenia Gray", "York Gray"), ("Zola Hart", "Arno Hart"),
]

# (true relation, contradictory relation, reciprocal of true, reciprocal of alt)
_SYNTH_RELATIONS = [
    ("mother", "friend", "daughter", "friend"),
    ("teacher", "rival", "student", "rival"),
    ("sister", "boss", "sister", "assistant"),
    ("doctor", "cousin", "patient", "cousin"),
    ("neighbor", "aunt", "neighbor", "niece"),
]

_SYNTH_PREMISES = [
    "A long-awaited letter finally reaches the edge of the valley.",
    "A disputed harvest puts old agreements under strain.",
    "A stranger's arrival stirs up a settled routine.",
    "An heirloom changes hands and raises questions nobody wants.",
    "A sudden storm strands travelers at the crossing inn.",
]

_SYNTH_SETTINGS = [
    "The story is set in a small town in the lowlands.",
    "The story is set in a river port at the turn of the season.",
    "The story is set in a terraced village above the falls.",
]

_SYNTH_DISTRACTOR_SETUP = [
    "Rain kept the lanes quiet for most of the week.",
    "The market reopened after a long repair.",
    "Lanterns burned late over the counting house.",
]

_SYNTH_DISTRACTOR_STORY = [
    "The ferry ran twice before noon and once after.",
    "Smoke from the kilns drifted east all afternoon.",
    "A cart lost a wheel by the lower gate.",
]


@dataclass
class SyntheticFixture:
    """Synthetic tuples plus the oracle tables that encode their ground truth."""

    tuples: list[EvalTuple]
    entail_table: dict[tuple[str, str], EntailmentVerdict]
    qa_table: dict[str, Any]
    reciprocal_table: dict[str, str]

    def oracle_backend(self, seed: int = 0) -> MockBackend:
        return MockBackend(
            seed=seed,
            entail_table=dict(self.entail_table),
            qa_table=dict(self.qa_table),
            reciprocal_table=dict(self.reciprocal_table),
        )

    def uninformative_backend(self, seed: int = 0) -> MockBackend:
        return ConstantEntailmentBackend(seed=seed)

    def noisy_backend(self, seed: int, amplitude: float = 0.5) -> MockBackend:
        backend = NoisyEntailmentBackend(
            seed=seed,
            entail_table=dict(self.entail_table),
            qa_table=dict(self.qa_table),
            reciprocal_table=dict(self.reciprocal_table),
        )
        backend.noise_amplitude = amplitude
        return backend


class ConstantEntailmentBackend(MockBackend):
    """Uninformative oracle: one fixed verdict for every sentence pair."""

    def entail(self, premise_text: str, hypothesis: str) -> EntailmentVerdict:
        if not premise_text.strip() or not hypothesis.strip():
            raise ValueError("entail requires non-empty premise and hypothesis")
        return EntailmentVerdict(1 / 3, 1 / 3, 1 / 3)


class NoisyEntailmentBackend(MockBackend):
    """Oracle tables with deterministic per-pair noise on contradiction scores.

    Confident entailments (identical or subset pairs that gate the extraction
    pipeline) stay exact; every other verdict's contradiction probability is
    jittered, modelling an unreliable scorer.
    """

    noise_amplitude: float = 0.35

    def entail(self, premise_text: str, hypothesis: str) -> EntailmentVerdict:
        from .backends.mock import _digest

        base = super().entail(premise_text, hypothesis)
        if base.top() == "entail":
            return base
        rng = random.Random(
            _digest(self.seed, "noise", norm_phrase(premise_text), norm_phrase(hypothesis))
        )
        shift = rng.uniform(-self.noise_amplitude, self.noise_amplitude)
        p_c = min(0.999, max(0.001, base.p_contradict + shift))
        rest = 1.0 - p_c
        total_other = base.p_entail + base.p_neutral
        if total_other <= 0:
            return EntailmentVerdict(rest / 2, rest / 2, p_c)
        return EntailmentVerdict(
            rest * base.p_entail / total_other,
            rest * base.p_neutral / total_other,
            p_c,
        )


def generate_synthetic_tuples(n: int, seed: int = 0) -> SyntheticFixture:
    """Build n tuples in the plan-shaped setup format with oracle tables.

    Each tuple alters one character's relationship to another; the oracle
    entailment table marks the true/altered statements contradictory in both
    directions, and the QA table confirms the relational keys.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(seed)
    entail_table: dict[tuple[str, str], EntailmentVerdict] = {}
    qa_table: dict[str, Any] = {}
    reciprocal_table: dict[str, str] = {}
    tuples: list[EvalTuple] = []

    from .backends.base import QAResult

    for i in range(n):
        subject, anchor = _SYNTH_PAIRS[i % len(_SYNTH_PAIRS)]
        true_rel, alt_rel, true_recip, alt_recip = _SYNTH_RELATIONS[
            i % len(_SYNTH_RELATIONS)
        ]
        anchor_first = anchor.split()[0]
        premise = _SYNTH_PREMISES[i % len(_SYNTH_PREMISES)]
        setting = _SYNTH_SETTINGS[i % len(_SYNTH_SETTINGS)]
        distractor_setup = _SYNTH_DISTRACTOR_SETUP[i % len(_SYNTH_DISTRACTOR_SETUP)]
        distractor_story = _SYNTH_DISTRACTOR_STORY[i % len(_SYNTH_DISTRACTOR_STORY)]

        anchor_desc = f"{anchor} is a careful person with a long memory."
        true_fact = f"{subject} is {anchor_first}'s {true_rel}."
        alt_fact = f"{subject} is {anchor_first}'s {alt_rel}."

        setup = "\n\n".join([premise, setting, anchor_desc, f"{true_fact} {distractor_setup}"])
        setup_alt = "\n\n".join([premise, setting, anchor_desc, f"{alt_fact} {distractor_setup}"])
        story = "\n\n".join([
            f"The week began slowly. {true_fact}",
            distractor_story,
        ])
        story_alt = "\n\n".join([
            f"The week began slowly. {alt_fact}",
            distractor_story,
        ])

        entail_table[(norm_phrase(true_fact), norm_phrase(alt_fact))] = make_verdict(
            "contradict", 0.95
        )
        entail_table[(norm_phrase(alt_fact), norm_phrase(true_fact))] = make_verdict(
            "contradict", 0.95
        )
        question = f"What is {subject}'s {anchor_first}'s?"
        qa_table[norm_phrase(question)] = QAResult(true_rel, 0.9)
        reciprocal_table.setdefault(true_rel, true_recip)
        reciprocal_table.setdefault(alt_rel, alt_recip)

        # reciprocal statements can collide across directions; mark them too
        true_recip_fact = f"{anchor} is {subject.split()[0]}'s {true_recip}."
        alt_recip_fact = f"{anchor} is {subject.split()[0]}'s {alt_recip}."
        if norm_phrase(true_recip_fact) != norm_phrase(alt_recip_fact):
            entail_table[
                (norm_phrase(true_recip_fact), norm_phrase(alt_recip_fact))
            ] = make_verdict("contradict", 0.9)
            entail_table[
                (norm_phrase(alt_recip_fact), norm_phrase(true_recip_fact))
            ] = make_verdict("contradict", 0.9)
        qa_table[
            norm_phrase(f"What is {anchor}'s {subject.split()[0]}'s?")
        ] = QAResult(true_recip, 0.9)

        tuples.append(
            EvalTuple(
                id=f"synthetic-{seed}-{i}",
                s=setup,
                s_prime=setup_alt,
                t=story,
                t_prime=story_alt,
            )
        )
    return SyntheticFixture(tuples, entail_table, qa_table, reciprocal_table)
