"""Configuration loading: flat-key INI profiles mapped onto module configs."""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .backends import (
    Backend,
    HTTPBackend,
    MockBackend,
    RetryPolicy,
    load_edit_table,
    load_entail_table,
    load_qa_table,
)
from .drafting import DraftConfig
from .editing import EditConfig
from .engine import Ablations, RunConfig
from .planning import NameFilterConfig, PlanConfig
from .rewriting import FilterConfig, RerankConfig

_DATA_PACKAGE = "storyloom.data"


@dataclass(frozen=True)
class BackendSettings:
    profile: str = "mock"
    seed: int = 0
    retries: int = 3
    retry_base_delay: float = 0.5
    urls: dict = None  # capability -> base URL
    token_env: str = "STORYLOOM_API_TOKEN"
    mock_entail_table: str = ""
    mock_qa_table: str = ""
    mock_edit_table: str = ""


@dataclass
class AppConfig:
    backend: BackendSettings
    plan: PlanConfig
    draft: DraftConfig
    rerank: RerankConfig
    edit: EditConfig
    run: RunConfig
    example_bank_path: str = ""


def _split_list(raw: str) -> tuple[str, ...]:
    items = []
    for part in raw.split(","):
        part = part.strip().replace("\\n", "\n")
        if part:
            items.append(part)
    return tuple(items)


def _read_profile(path_or_name: str | Path | None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    default_text = (
        resources.files(_DATA_PACKAGE).joinpath("default.cfg").read_text("utf-8")
    )
    parser.read_string(default_text)
    if path_or_name and str(path_or_name) != "default":
        override = Path(path_or_name)
        if not override.exists():
            raise FileNotFoundError(f"config file not found: {override}")
        parser.read(override)
    return parser


def load_config(
    path_or_name: str | Path | None = None,
    seed: int | None = None,
    ablations: Ablations | None = None,
) -> AppConfig:
    """Build the full config from the default profile plus an optional override file."""
    cfg = _read_profile(path_or_name)

    b = cfg["backends"]
    backend = BackendSettings(
        profile=b.get("profile", "mock"),
        seed=seed if seed is not None else b.getint("seed", 0),
        retries=b.getint("retries", 3),
        retry_base_delay=b.getfloat("retry_base_delay", 0.5),
        urls={
            cap: b.get(f"{cap}_url", "").strip()
            for cap in ("complete", "insert", "edit", "embed", "entail", "qa", "ner", "score")
            if b.get(f"{cap}_url", "").strip()
        },
        token_env=b.get("token_env", "STORYLOOM_API_TOKEN"),
        mock_entail_table=b.get("mock_entail_table", "").strip(),
        mock_qa_table=b.get("mock_qa_table", "").strip(),
        mock_edit_table=b.get("mock_edit_table", "").strip(),
    )

    p = cfg["plan"]
    plan = PlanConfig(
        name_filter=NameFilterConfig(
            banned_substrings=_split_list(p.get("banned_substrings")),
            prefer_word_count=p.getint("prefer_word_count", 2),
            samples_per_round=p.getint("samples_per_round", 10),
            max_rounds=p.getint("name_rounds", 3),
        ),
        num_characters=p.getint("num_characters", 3),
        setting_retries=p.getint("setting_retries", 5),
        outline_retries=p.getint("outline_retries", 20),
        description_retries=p.getint("description_retries", 3),
        max_description_sentences=p.getint("max_description_sentences", 3),
        premise_temperature=p.getfloat("premise_temperature", 1.0),
        gen_temperature=p.getfloat("gen_temperature", 0.7),
    )

    d = cfg["draft"]
    draft = DraftConfig(
        budget=d.getint("budget", 1024),
        reserved_generation=d.getint("reserved_generation", 256),
        num_candidates=d.getint("num_candidates", 10),
        continuation_tokens=d.getint("continuation_tokens", 256),
        summary_span=d.getint("summary_span", 2),
        summary_max_tokens=d.getint("summary_max_tokens", 96),
        relevant_context_budget=d.getint("relevant_context_budget", 384),
    )

    r = cfg["rewrite"]
    rerank = RerankConfig(
        filters=FilterConfig(
            min_repeat_ngram=r.getint("min_repeat_ngram", 5),
            sentence_similarity_ratio=r.getfloat("sentence_similarity_ratio", 0.2),
            banned_strings_hard=_split_list(r.get("banned_strings_hard")),
            banned_strings_soft=_split_list(r.get("banned_strings_soft")),
            soft_banned_threshold=r.getint("soft_banned_threshold", 2),
            colon_head_window=r.getint("colon_head_window", 4),
        ),
        coherence_weight=r.getfloat("coherence_weight", 1.0),
        relevance_weight=r.getfloat("relevance_weight", 1.0),
        max_workers=r.getint("score_workers", 4),
    )

    e = cfg["edit"]
    edit = EditConfig(
        entail_threshold=e.getfloat("entail_threshold", 0.5),
        contradict_threshold=e.getfloat("contradict_threshold", 0.5),
        qa_threshold=e.getfloat("qa_threshold", 0.5),
        fact_samples=e.getint("fact_samples", 3),
        value_samples=e.getint("value_samples", 3),
        example_top_m=e.getint("example_top_m", 5),
        edit_retries=e.getint("edit_retries", 3),
        edit_length_ratio=e.getfloat("edit_length_ratio", 1.5),
    )

    rn = cfg["run"]
    points_raw = rn.get("outline_points", "3").strip()
    per_leaf_raw = rn.get("passages_per_leaf", "4").strip()
    run = RunConfig(
        mode=rn.get("mode", "re3"),
        outline_points=int(points_raw) if points_raw else None,
        outline_depth=rn.getint("outline_depth", 1),
        passages_per_leaf=(
            per_leaf_raw if per_leaf_raw == "adaptive" else int(per_leaf_raw)
        ),
        continuation_tokens=draft.continuation_tokens,
        max_context=draft.budget,
        rolling_truncate=rn.getint("rolling_truncate", 768),
        rolling_total=rn.getint("rolling_total", 3072),
        alignment_threshold=rn.getfloat("alignment_threshold", 0.5),
        adaptive_min_per_leaf=rn.getint("adaptive_min_per_leaf", 1),
        adaptive_max_per_leaf=rn.getint("adaptive_max_per_leaf", 8),
        num_candidates=draft.num_candidates,
        ablations=ablations or Ablations(),
        seed=backend.seed,
    )

    return AppConfig(
        backend=backend,
        plan=plan,
        draft=draft,
        rerank=rerank,
        edit=edit,
        run=run,
        example_bank_path=e.get("example_bank_path", "").strip(),
    )


def make_backend(settings: BackendSettings) -> Backend:
    if settings.profile == "mock":
        return MockBackend(
            seed=settings.seed,
            entail_table=(
                load_entail_table(settings.mock_entail_table)
                if settings.mock_entail_table
                else {}
            ),
            qa_table=(
                load_qa_table(settings.mock_qa_table) if settings.mock_qa_table else {}
            ),
            edit_table=(
                load_edit_table(settings.mock_edit_table)
                if settings.mock_edit_table
                else {}
            ),
        )
    if settings.profile == "http":
        return HTTPBackend(
            base_urls=dict(settings.urls or {}),
            token_env=settings.token_env,
            retry=RetryPolicy(
                max_attempts=settings.retries, base_delay=settings.retry_base_delay
            ),
        )
    raise ValueError(f"unknown backend profile {settings.profile!r}")
