"""Deterministic result reports: per-question CSV, per-setting JSON, a
Markdown summary table, and optional rendered figures.

The delimited outputs are byte-stable for a given set of records (fixed sort
orders, fixed float formatting). Figures are rendered with the matplotlib Agg
backend and are not part of any byte-level comparison.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path
from typing import Mapping, Sequence

from .metrics import accuracy_with_ci, pass_at_k
from .pipeline import GenerationRecord

SCHEMA_VERSION = 1

CSV_COLUMNS = ("question_id", "model", "setting", "n", "c", "accuracy", "pass_at_5")


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _question_rows(records: Sequence[GenerationRecord]) -> list[dict]:
    grouped: dict[tuple[str, str, str], list[GenerationRecord]] = defaultdict(list)
    for r in records:
        grouped[(r.model, r.setting, r.question_id)].append(r)
    rows = []
    for (model, setting, qid) in sorted(grouped):
        recs = grouped[(model, setting, qid)]
        n = len(recs)
        c = sum(1 for r in recs if r.is_correct)
        rows.append({
            "question_id": qid, "model": model, "setting": setting,
            "n": n, "c": c, "accuracy": _fmt(c / n),
            "pass_at_5": _fmt(pass_at_k(n, c, 5)) if n >= 5 else "",
        })
    return rows


def write_csv(records: Sequence[GenerationRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(_question_rows(records))


def _setting_summary(records: Sequence[GenerationRecord], *, resamples: int,
                     seed: int) -> list[dict]:
    by_setting: dict[tuple[str, str], list[GenerationRecord]] = defaultdict(list)
    for r in records:
        by_setting[(r.model, r.setting)].append(r)

    direct_acc: dict[str, float] = {}
    for (model, setting), recs in by_setting.items():
        if setting == "direct":
            direct_acc[model] = accuracy_with_ci(recs, resamples=resamples,
                                                 seed=seed).mean

    out = []
    for (model, setting) in sorted(by_setting, key=_setting_sort_key):
        recs = by_setting[(model, setting)]
        ci = accuracy_with_ci(recs, resamples=resamples, seed=seed)
        by_q: dict[str, list[bool]] = defaultdict(list)
        for r in recs:
            by_q[r.question_id].append(r.is_correct)
        p1 = _mean_pass(by_q, 1)
        p5 = _mean_pass(by_q, 5)
        entry = {
            "model": model, "setting": setting,
            "n_questions": ci.n_questions,
            "n_records": len(recs),
            "accuracy": round(ci.mean, 6),
            "ci_lo": round(ci.ci_lo, 6),
            "ci_hi": round(ci.ci_hi, 6),
            "pass_at_1": round(p1, 6) if p1 is not None else None,
            "pass_at_5": round(p5, 6) if p5 is not None else None,
            "delta_vs_direct": round(ci.mean - direct_acc[model], 6)
            if model in direct_acc and setting != "direct" else None,
        }
        out.append(entry)
    return out


def _setting_sort_key(key: tuple[str, str]) -> tuple[str, int, str]:
    model, setting = key
    return (model, 0 if setting == "direct" else 1, setting)


def _mean_pass(by_q: Mapping[str, Sequence[bool]], k: int) -> float | None:
    vals = []
    for outcomes in by_q.values():
        n = len(outcomes)
        if n < k:
            return None
        vals.append(pass_at_k(n, sum(outcomes), k))
    return sum(vals) / len(vals) if vals else None


def write_json(records: Sequence[GenerationRecord], path: str | Path, *,
               resamples: int = 1000, seed: int = 0) -> dict:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "settings": _setting_summary(records, resamples=resamples, seed=seed),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return payload


def write_markdown(payload: Mapping, path: str | Path) -> None:
    lines = ["# Evaluation summary", "",
             "| Model | Setting | Accuracy | 95% CI | Δ vs Direct |",
             "| --- | --- | --- | --- | --- |"]
    for entry in payload["settings"]:
        delta = entry["delta_vs_direct"]
        lines.append("| {model} | {setting} | {acc:.3f} | [{lo:.3f}, {hi:.3f}] | {d} |".format(
            model=entry["model"], setting=entry["setting"], acc=entry["accuracy"],
            lo=entry["ci_lo"], hi=entry["ci_hi"],
            d="—" if delta is None else f"{delta:+.3f}"))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def render_figures(payload: Mapping, out_dir: str | Path, *,
                   refine_curves: tuple[Sequence[float], Sequence[float]] | None = None,
                   ted_means: Mapping[str, float] | None = None) -> list[Path]:
    """Render PNG charts next to the delimited outputs.

    matplotlib is imported lazily so the delimited paths work without a
    display stack.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    entries = payload["settings"]
    if entries:
        labels = [f"{e['model']}\n{e['setting']}" for e in entries]
        accs = [e["accuracy"] for e in entries]
        err_lo = [e["accuracy"] - e["ci_lo"] for e in entries]
        err_hi = [e["ci_hi"] - e["accuracy"] for e in entries]
        fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(entries)), 4))
        ax.bar(range(len(entries)), accs, yerr=[err_lo, err_hi], capsize=3,
               color="#4878cf")
        ax.set_xticks(range(len(entries)))
        ax.set_xticklabels(labels, fontsize=8)
        ax.set_ylabel("Accuracy")
        ax.set_ylim(0, 1)
        ax.set_title("Accuracy by setting (95% bootstrap CI)")
        fig.tight_layout()
        target = out_dir / "accuracy_by_setting.png"
        fig.savefig(target)
        plt.close(fig)
        written.append(target)

    if refine_curves is not None:
        acc_curve, vote_curve = refine_curves
        fig, ax = plt.subplots(figsize=(6, 4))
        xs = range(len(acc_curve))
        ax.plot(xs, acc_curve, marker="o", label="Per-iteration accuracy")
        ax.plot(xs, vote_curve, marker="s", label="Cumulative majority vote")
        ax.set_xlabel("Refinement iteration")
        ax.set_ylabel("Accuracy")
        ax.set_ylim(0, 1.05)
        ax.legend()
        ax.set_title("Iterative refinement")
        fig.tight_layout()
        target = out_dir / "refine_curve.png"
        fig.savefig(target)
        plt.close(fig)
        written.append(target)

    if ted_means:
        fig, ax = plt.subplots(figsize=(5, 4))
        names = list(ted_means)
        ax.bar(range(len(names)), [ted_means[n] for n in names], color="#6acc65")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names)
        ax.set_ylabel("Mean min tree-edit distance to drafts")
        ax.set_title("Structural novelty of generations")
        fig.tight_layout()
        target = out_dir / "ted_by_setting.png"
        fig.savefig(target)
        plt.close(fig)
        written.append(target)

    return written


def emit_report(records: Sequence[GenerationRecord], out_dir: str | Path, *,
                resamples: int = 1000, seed: int = 0, figures: bool = False,
                refine_curves: tuple[Sequence[float], Sequence[float]] | None = None,
                ted_means: Mapping[str, float] | None = None) -> dict:
    """Write report.csv / report.json / report.md (and figures when asked)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(records, out_dir / "report.csv")
    payload = write_json(records, out_dir / "report.json", resamples=resamples,
                         seed=seed)
    write_markdown(payload, out_dir / "report.md")
    if figures:
        render_figures(payload, out_dir, refine_curves=refine_curves,
                       ted_means=ted_means)
    return payload
