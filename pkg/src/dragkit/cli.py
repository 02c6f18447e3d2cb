"""Command-line entry points for the evaluation toolkit."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import game24, metrics, pipeline, report, sft, treedist
from .backend import Backend, ScriptedBackend
from .config import RunConfig
from .demo import demo_responder, build_demo_bank, demo_hard_bank, run_demo_suite
from .pipeline import EvalSetting, load_bank, load_records, parse_pattern, \
    save_bank, save_records


def _add_backend_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run-config file")
    p.add_argument("--backend", choices=["openai", "replay", "scripted-demo"],
                   help="override the backend kind")
    p.add_argument("--base-url", help="OpenAI-compatible server base URL")
    p.add_argument("--fixture", help="JSONL fixture for the replay backend")
    p.add_argument("--max-in-flight", type=int, default=None,
                   help="max concurrent requests (default 4)")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    _add_backend_args(p)
    p.add_argument("--bank", required=True, help="question bank JSONL")
    p.add_argument("--model", required=True, help="model name to evaluate")
    p.add_argument("--out", required=True, help="output records JSONL")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-samples", type=int, default=None,
                   help="samples per question (default from config, else 16)")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "backend", None):
        cfg = RunConfig(**{**cfg.__dict__, "backend": args.backend})
    if getattr(args, "base_url", None):
        cfg = RunConfig(**{**cfg.__dict__, "base_url": args.base_url})
    if getattr(args, "fixture", None):
        cfg = RunConfig(**{**cfg.__dict__, "fixture": args.fixture})
    return cfg


def _make_backend(cfg: RunConfig) -> Backend:
    if cfg.backend == "scripted-demo":
        return ScriptedBackend(demo_responder)
    return cfg.make_backend()


def _run_params(args, cfg: RunConfig) -> tuple[int, int]:
    n = args.n_samples if args.n_samples is not None else cfg.n_samples
    mif = args.max_in_flight if args.max_in_flight is not None else cfg.max_in_flight
    return n, mif


def cmd_direct(args) -> int:
    cfg = _load_config(args)
    bank = load_bank(args.bank)
    n, mif = _run_params(args, cfg)
    records = pipeline.run_direct(bank, args.model, _make_backend(cfg),
                                  sampling=cfg.sampling_for(args.model),
                                  n_samples=n, max_in_flight=mif)
    save_records(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_conditioned(args) -> int:
    cfg = _load_config(args)
    bank = load_bank(args.bank, args.pool)
    setting = EvalSetting("conditioned", parse_pattern(args.pattern),
                          args.variant.replace("-", "_"))
    n, mif = _run_params(args, cfg)
    records = pipeline.run_conditioned(bank, args.model, setting,
                                       _make_backend(cfg), seed=args.seed,
                                       sampling=cfg.sampling_for(args.model),
                                       n_samples=n, max_in_flight=mif)
    save_records(records, args.out)
    print(f"wrote {len(records)} records ({setting.label()}) to {args.out}")
    return 0


def cmd_refine(args) -> int:
    cfg = _load_config(args)
    bank = load_bank(args.bank)
    n, mif = _run_params(args, cfg)
    records = pipeline.iterative_refine(bank, args.model, _make_backend(cfg),
                                        iterations=args.iterations,
                                        trajectories=n, seed=args.seed,
                                        sampling=cfg.sampling_for(args.model),
                                        max_in_flight=mif)
    save_records(records, args.out)
    acc, vote = pipeline.refine_curves(bank, records)
    print(f"wrote {len(records)} records to {args.out}")
    print("per-iteration accuracy: " + ", ".join(f"{a:.3f}" for a in acc))
    print("cumulative-vote accuracy: " + ", ".join(f"{v:.3f}" for v in vote))
    return 0


def cmd_denoise(args) -> int:
    cfg = _load_config(args)
    bank = load_bank(args.bank, args.pool)
    n, mif = _run_params(args, cfg)
    records = pipeline.run_denoise(bank, args.model, args.method,
                                   _make_backend(cfg),
                                   pattern=parse_pattern(args.pattern),
                                   seed=args.seed,
                                   sampling=cfg.sampling_for(args.model),
                                   n_samples=n, max_in_flight=mif)
    save_records(records, args.out)
    print(f"wrote {len(records)} records ({args.method}) to {args.out}")
    return 0


def cmd_filter_hard(args) -> int:
    bank = load_bank(args.bank, args.pool)
    records = [r for path in args.records for r in load_records(path)]
    filtered = pipeline.filter_reasonably_hard(bank, records)
    save_bank(filtered, args.out, args.pool_out)
    print(f"kept {len(filtered)} of {len(bank)} questions -> {args.out}")
    return 0


def cmd_anchors(args) -> int:
    by_model: dict[str, list] = {}
    for path in args.records:
        for r in load_records(path):
            by_model.setdefault(r.model, []).append(r)
    anchors = pipeline.select_anchors(by_model, k=args.k)
    for model in anchors:
        acc = pipeline.mean_accuracy(by_model[model])
        print(f"{model}\t{acc:.4f}")
    return 0


def cmd_game24_gen(args) -> int:
    puzzles = game24.generate_puzzles(args.count, args.seed,
                                      solvable_only=args.solvable_only)
    for p in puzzles:
        print(p)
    return 0


def cmd_game24_solve(args) -> int:
    puzzle = game24.Puzzle.parse(args.numbers)
    solutions = game24.enumerate_solutions(puzzle)
    if not solutions:
        print("no solution")
        return 1
    for expr in solutions if args.all else solutions[:1]:
        print(game24.render(expr))
    return 0


def cmd_game24_verify(args) -> int:
    puzzle = game24.Puzzle.parse(args.numbers)
    try:
        expr = game24.parse_expression(args.expression)
    except game24.ParseError as exc:
        print(f"invalid expression: {exc}")
        return 1
    if game24.verify_solution(puzzle, expr):
        print("valid")
        return 0
    print("invalid")
    return 1


def cmd_ted(args) -> int:
    trees = [treedist.to_labeled_tree(game24.parse_expression(e))
             for e in args.expressions]
    if args.min:
        print(treedist.ted_min(trees[0], trees[1:]))
    elif len(trees) != 2:
        print("exactly two expressions expected (or use --min)", file=sys.stderr)
        return 2
    else:
        print(treedist.tree_edit_distance(trees[0], trees[1]))
    return 0


def cmd_report(args) -> int:
    records = [r for path in args.records for r in load_records(path)]
    curves = None
    ted_means = None
    bank = load_bank(args.bank, args.pool) if args.bank else None
    if bank is not None and any(r.setting.startswith("refine-t") for r in records):
        curves = pipeline.refine_curves(bank, records)
    if bank is not None and args.pool:
        g24 = {q.question_id for q in bank if q.kind == "game24"}
        direct = [r for r in records if r.setting == "direct" and r.question_id in g24]
        conditioned = [r for r in records
                       if r.setting not in ("direct",)
                       and not r.setting.startswith("refine-t")
                       and r.question_id in g24]
        if direct or conditioned:
            summary = metrics.ted_summary(bank, direct, conditioned)
            ted_means = {}
            if summary.mean_ted_direct is not None:
                ted_means["direct"] = summary.mean_ted_direct
            if summary.mean_ted_conditioned is not None:
                ted_means["conditioned"] = summary.mean_ted_conditioned
    payload = report.emit_report(records, args.out_dir, resamples=args.resamples,
                                 seed=args.seed, figures=args.figures,
                                 refine_curves=curves, ted_means=ted_means or None)
    print(f"wrote report for {len(payload['settings'])} settings to {args.out_dir}")
    return 0


def cmd_sft_synth(args) -> int:
    cfg = _load_config(args)
    bank = load_bank(args.bank, args.pool)
    mif = args.max_in_flight if args.max_in_flight is not None else cfg.max_in_flight
    examples = sft.synthesize_dataset(bank, args.model, _make_backend(cfg),
                                      target_per_label=args.target,
                                      solver_model=args.solver_model,
                                      neutral_format=args.neutral_format,
                                      sampling=cfg.sampling_for(args.model),
                                      max_in_flight=mif)
    sft.emit_jsonl(examples, args.out, require_balance=args.balance)
    print(f"wrote {len(examples)} training examples to {args.out}")
    return 0


def cmd_demo(args) -> int:
    bank = build_demo_bank()
    suite = run_demo_suite(bank, ScriptedBackend(demo_responder),
                           n_samples=args.n_samples, seed=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    hard = demo_hard_bank(bank, suite)
    save_bank(hard, out_dir / "bank.jsonl", out_dir / "pool.jsonl")
    all_records = [r for recs in suite.values() for r in recs]
    save_records(all_records, out_dir / "records.jsonl")
    curves = pipeline.refine_curves(hard, suite["refine"])
    report.emit_report(all_records, out_dir, resamples=args.resamples,
                       figures=args.figures, refine_curves=curves)
    print(f"demo suite complete: {len(all_records)} records, "
          f"{len(hard)} filtered questions -> {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dragkit",
        description="Draft-conditioned evaluation suites, Game-of-24 tooling, "
                    "tree-edit-distance analysis, and training-data synthesis.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("direct", help="clean-slate evaluation run")
    _add_run_args(p)
    p.set_defaults(fn=cmd_direct)

    p = sub.add_parser("conditioned", help="draft-conditioned evaluation run")
    _add_run_args(p)
    p.add_argument("--pool", required=True, help="draft pool JSONL")
    p.add_argument("--pattern", required=True,
                   help="draft correctness pattern, e.g. F, FF, TF")
    p.add_argument("--variant", default="base",
                   choices=["base", "pos", "ver", "external-error", "no-reuse"])
    p.set_defaults(fn=cmd_conditioned)

    p = sub.add_parser("refine", help="iterative self-refinement run")
    _add_run_args(p)
    p.add_argument("--iterations", type=int, required=True)
    p.set_defaults(fn=cmd_refine)

    p = sub.add_parser("denoise", help="draft-denoising run (revise or filter)")
    _add_run_args(p)
    p.add_argument("--pool", required=True, help="draft pool JSONL")
    p.add_argument("--method", required=True, choices=["revise", "filter"])
    p.add_argument("--pattern", default="F")
    p.set_defaults(fn=cmd_denoise)

    p = sub.add_parser("filter-hard",
                       help="keep questions with >=2 correct and >=2 incorrect "
                            "pooled responses")
    p.add_argument("--bank", required=True)
    p.add_argument("--pool", help="draft pool JSONL to carry through")
    p.add_argument("--records", nargs="+", required=True,
                   help="anchor-model record files")
    p.add_argument("--out", required=True, help="filtered bank JSONL")
    p.add_argument("--pool-out", help="filtered pool JSONL")
    p.set_defaults(fn=cmd_filter_hard)

    p = sub.add_parser("anchors", help="pick the top-k models by mean accuracy")
    p.add_argument("--records", nargs="+", required=True)
    p.add_argument("--k", type=int, default=3)
    p.set_defaults(fn=cmd_anchors)

    p = sub.add_parser("game24", help="puzzle generation, solving, verification")
    g24 = p.add_subparsers(dest="game24_command", required=True)

    g = g24.add_parser("gen", help="generate puzzles")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--solvable-only", action="store_true")
    g.set_defaults(fn=cmd_game24_gen)

    g = g24.add_parser("solve", help="solve a puzzle")
    g.add_argument("numbers", help='four numbers, e.g. "3 3 8 8"')
    g.add_argument("--all", action="store_true", help="print every solution")
    g.set_defaults(fn=cmd_game24_solve)

    g = g24.add_parser("verify", help="check an expression against a puzzle")
    g.add_argument("numbers")
    g.add_argument("expression")
    g.set_defaults(fn=cmd_game24_verify)

    p = sub.add_parser("ted", help="tree edit distance between expressions")
    p.add_argument("expressions", nargs="+")
    p.add_argument("--min", action="store_true",
                   help="minimum distance from the first expression to the rest")
    p.set_defaults(fn=cmd_ted)

    p = sub.add_parser("report", help="summarize record files into a report")
    p.add_argument("--records", nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--bank", help="bank JSONL (enables refinement curves)")
    p.add_argument("--pool", help="pool JSONL (enables tree-edit summaries)")
    p.add_argument("--resamples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--figures", action="store_true",
                   help="also render PNG charts into the output directory")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("sft-synth", help="synthesize verification training data")
    _add_backend_args(p)
    p.add_argument("--bank", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--model", required=True, help="verifier model")
    p.add_argument("--solver-model", help="clean-slate solver (default: verifier)")
    p.add_argument("--target", type=int, required=True,
                   help="examples per label")
    balance = p.add_mutually_exclusive_group()
    balance.add_argument("--balance", dest="balance", action="store_true",
                         default=True)
    balance.add_argument("--no-balance", dest="balance", action="store_false")
    p.add_argument("--neutral-format", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sft_synth)

    p = sub.add_parser("demo", help="run the bundled scripted world end to end")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-samples", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resamples", type=int, default=200)
    p.add_argument("--figures", action="store_true")
    p.set_defaults(fn=cmd_demo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
