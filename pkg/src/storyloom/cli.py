"""Command-line entry points: plan, generate, rolling, eval-edit, ablate.

Exit codes: 0 success, 1 aborted run, 2 degraded run (unresolved flags or
fallbacks), 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import AppConfig, load_config, make_backend
from .consistency_eval import (
    build_methods,
    evaluate,
    generate_synthetic_tuples,
    load_tuples,
    results_table,
    save_tuples,
)
from .editing import load_example_bank
from .engine import Engine, RunAborted, StoryArtifact, ablation_config
from .story import Premise

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ABORTED = 1
EXIT_DEGRADED = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="storyloom", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def common(p: argparse.ArgumentParser, premise: bool = True) -> None:
        p.add_argument("--config", default="default",
                       help="config profile name or path (default: built-in)")
        p.add_argument("--seed", type=int, default=None, help="override backend seed")
        p.add_argument("--output-dir", default=".", help="artifact directory")
        if premise:
            p.add_argument("--premise", help="inline premise text")
            p.add_argument("--premise-file", help="file containing the premise")

    p_plan = sub.add_parser("plan", help="generate only the plan for a premise")
    common(p_plan)
    p_plan.add_argument("--points", type=int, default=None,
                        help="require exactly this many outline points")

    p_gen = sub.add_parser("generate", help="full story generation run")
    common(p_gen)
    p_gen.add_argument("--dump-prompts", action="store_true",
                       help="also write every composed prompt to prompts.txt")
    p_gen.add_argument("--ablation", default="full",
                       choices=["full", "no_plan", "no_rerank", "no_edit",
                                "baseline_equivalent"])

    p_roll = sub.add_parser("rolling", help="rolling-window baseline run")
    common(p_roll)
    p_roll.add_argument("--dump-prompts", action="store_true")

    p_eval = sub.add_parser("eval-edit", help="contradiction-detection evaluation")
    common(p_eval, premise=False)
    p_eval.add_argument("--tuples", help="JSON file of (s, s_prime, t, t_prime) tuples")
    p_eval.add_argument("--synthetic", type=int, default=None,
                        help="generate this many synthetic tuples with oracle mocks")
    p_eval.add_argument("--methods", default="entailment,entailment-dpr,structured")

    p_abl = sub.add_parser("ablate", help="run several ablations on one premise")
    common(p_abl)
    p_abl.add_argument("--ablations", default="full,no_plan,no_rerank,no_edit")

    return parser


def _resolve_premise(args: argparse.Namespace) -> Premise:
    inline = getattr(args, "premise", None)
    from_file = getattr(args, "premise_file", None)
    if bool(inline) == bool(from_file):
        raise UsageError("exactly one of --premise / --premise-file is required")
    text = inline if inline else Path(from_file).read_text(encoding="utf-8").strip()
    return Premise(text)


def _write_artifact(
    artifact: StoryArtifact, out_dir: Path, name: str = "story",
    dump_prompts: bool = False,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{name}.json").write_text(
        json.dumps(artifact.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
    )
    (out_dir / f"{name}.txt").write_text(artifact.final_text, encoding="utf-8")
    if dump_prompts:
        records = []
        for log in artifact.step_logs:
            records.append(
                f"=== passage {log.passage_index} (leaf {log.leaf_label}, "
                f"{log.prompt_tokens} tokens) ===\n{log.prompt}\n"
            )
        (out_dir / f"{name}_prompts.txt").write_text("\n".join(records), encoding="utf-8")


def _summary_line(artifact: StoryArtifact) -> str:
    tokens = sum(p["token_count"] for p in artifact.passages)
    unresolved = sum(
        1
        for log in artifact.step_logs
        for c in log.corrections
        if not c.get("resolved", True)
    )
    return (
        f"{artifact.status}: {len(artifact.passages)} passages, "
        f"{tokens} tokens, {unresolved} unresolved flags"
    )


def _exit_code(artifact: StoryArtifact) -> int:
    return {"success": EXIT_OK, "degraded": EXIT_DEGRADED, "aborted": EXIT_ABORTED}[
        artifact.status
    ]


def _engine(app: AppConfig) -> Engine:
    backend = make_backend(app.backend)
    bank = load_example_bank(app.example_bank_path or None)
    return Engine(
        backend,
        config=app.run,
        plan_cfg=app.plan,
        rerank_cfg=app.rerank,
        edit_cfg=app.edit,
        example_bank=bank,
    )


def _cmd_plan(args: argparse.Namespace) -> int:
    from .planning import build_plan
    from .story import plan_to_dict

    app = load_config(args.config, seed=args.seed)
    premise = _resolve_premise(args)
    backend = make_backend(app.backend)
    points = args.points if args.points is not None else app.run.outline_points
    plan = build_plan(backend, premise, points, app.plan)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "plan.json").write_text(
        json.dumps(plan_to_dict(plan), indent=2, sort_keys=True), encoding="utf-8"
    )
    print(
        f"success: plan with {len(plan.characters)} characters, "
        f"{len(plan.outline)} outline points"
    )
    return EXIT_OK


def _cmd_generate(args: argparse.Namespace, rolling: bool = False) -> int:
    app = load_config(args.config, seed=args.seed)
    run_cfg = app.run
    if not rolling and args.ablation != "full":
        run_cfg = ablation_config(run_cfg, args.ablation)
    if rolling:
        run_cfg = replace(run_cfg, mode="rolling")
    app = replace(app, run=run_cfg)
    premise = _resolve_premise(args)
    engine = _engine(app)
    out_dir = Path(args.output_dir)
    try:
        artifact = (
            engine.run_rolling(premise) if rolling else engine.run_re3(premise)
        )
    except RunAborted as exc:
        _write_artifact(exc.artifact, out_dir, dump_prompts=args.dump_prompts)
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORTED
    _write_artifact(artifact, out_dir, dump_prompts=args.dump_prompts)
    print(_summary_line(artifact))
    return _exit_code(artifact)


def _cmd_eval(args: argparse.Namespace) -> int:
    app = load_config(args.config, seed=args.seed)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    method_names = [m.strip() for m in args.methods.split(",") if m.strip()]
    if args.tuples and args.synthetic is not None:
        raise UsageError("use either --tuples or --synthetic, not both")
    if args.tuples:
        tuples = load_tuples(args.tuples)
        backend = make_backend(app.backend)
    elif args.synthetic is not None:
        fixture = generate_synthetic_tuples(args.synthetic, seed=app.backend.seed)
        tuples = fixture.tuples
        backend = fixture.oracle_backend(seed=app.backend.seed)
        save_tuples(tuples, out_dir / "tuples.json")
    else:
        raise UsageError("eval-edit requires --tuples or --synthetic")
    methods = build_methods(backend, method_names, cfg=app.edit)
    results = evaluate(tuples, methods)
    table = results_table(results)
    (out_dir / "results.txt").write_text(table + "\n", encoding="utf-8")
    (out_dir / "results.json").write_text(
        json.dumps(
            {
                name: {
                    "roc_auc": r.auc,
                    "pairs_scored": r.pairs_scored,
                    "pairs_excluded": r.pairs_excluded,
                }
                for name, r in results.items()
            },
            indent=2,
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    print(table)
    return EXIT_OK


def _cmd_ablate(args: argparse.Namespace) -> int:
    app = load_config(args.config, seed=args.seed)
    premise = _resolve_premise(args)
    names = [n.strip() for n in args.ablations.split(",") if n.strip()]
    out_dir = Path(args.output_dir)

    def run_one(name: str) -> tuple[str, StoryArtifact | None, str]:
        cfg = ablation_config(app.run, name)
        engine = _engine(replace(app, run=cfg))
        try:
            return name, engine.run_re3(premise), ""
        except RunAborted as exc:
            return name, exc.artifact, str(exc)

    worst = EXIT_OK
    with ThreadPoolExecutor(max_workers=min(4, len(names))) as pool:
        for name, artifact, error in pool.map(run_one, names):
            _write_artifact(artifact, out_dir / name)
            status = f"{name}: {_summary_line(artifact)}"
            if error:
                status += f" (aborted: {error})"
            print(status)
            worst = max(worst, _exit_code(artifact))
    return worst


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        if args.command == "plan":
            return _cmd_plan(args)
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "rolling":
            return _cmd_generate(args, rolling=True)
        if args.command == "eval-edit":
            return _cmd_eval(args)
        if args.command == "ablate":
            return _cmd_ablate(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
