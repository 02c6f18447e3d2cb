"""Training-data synthesis for draft-verification behavior.

The flow mirrors the evaluation stack: subsample hard questions from mixed
sources, collect clean-slate drafts from a panel of models, have a verifier
walk each draft and emit a verdict, keep only traces whose verdict matches the
ground-truth label, then assemble (prompt, completion) pairs where the
completion embeds the verification trace and either reuses the draft answer
(Correct) or pivots to a fresh correct solution (Incorrect).
"""

from __future__ import annotations

import json
import random
import re
from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import templates
from .backend import Backend, BackendError, ChatRequest, default_sampling, \
    generate_batch, SamplingConfig
from .parsing import answers_equal, extract_boxed, parse_verdicts, strip_think, \
    UnbalancedBraces, VERDICT_CORRECT, VERDICT_INCORRECT, VERDICT_MISSING
from .pipeline import Draft, GenerationRecord, Question, QuestionBank, \
    run_direct, stable_seed


class SftError(Exception):
    pass


class QuotaInfeasible(SftError):
    pass


class MissingCleanSlate(SftError):
    pass


class LabelMismatch(SftError):
    pass


class BalanceViolation(SftError):
    pass


# --- source mixture -----------------------------------------------------------

def balanced_mixture(available: Mapping[str, int], target: int) -> dict[str, int]:
    """Allocate a target count across sources as evenly as availability allows.

    Sources that cannot fill an equal share are taken whole; the remainder is
    split equally among the rest, with leftover units going one each to the
    largest sources first.
    """
    if target < 0:
        raise ValueError("target must be >= 0")
    for name, count in available.items():
        if count < 0:
            raise ValueError(f"negative availability for {name!r}")
    total = sum(available.values())
    if target > total:
        raise QuotaInfeasible(f"target {target} exceeds available {total}")

    quotas = {name: 0 for name in available}
    remaining = dict(available)
    budget = target
    while remaining and budget:
        fair = budget // len(remaining)
        exhausted = {name: count for name, count in remaining.items() if count <= fair}
        if not exhausted:
            break
        for name, count in exhausted.items():
            quotas[name] = count
            budget -= count
            del remaining[name]
    if remaining and budget:
        base, extra = divmod(budget, len(remaining))
        by_size = sorted(remaining, key=lambda n: (-remaining[n], n))
        for i, name in enumerate(by_size):
            quotas[name] = base + (1 if i < extra else 0)
    return quotas


def solve_rates(records: Iterable[GenerationRecord]) -> dict[str, float]:
    """Per-question fraction of correct pooled responses."""
    by_q: dict[str, list[bool]] = defaultdict(list)
    for r in records:
        if r.excluded_reason is None:
            by_q[r.question_id].append(r.is_correct)
    return {qid: sum(v) / len(v) for qid, v in by_q.items()}


def subsample_questions(questions: Sequence[Question],
                        rates: Mapping[str, float],
                        quotas: Mapping[str, int], seed: int = 0) -> list[Question]:
    """Per-source random subsample restricted to hard questions (solve rate
    strictly below 1/2). Selection is seeded per source over id-sorted pools."""
    by_source: dict[str, list[Question]] = defaultdict(list)
    for q in questions:
        if rates.get(q.question_id, 1.0) < 0.5:
            by_source[q.source].append(q)
    chosen: list[Question] = []
    for source in sorted(quotas):
        quota = quotas[source]
        pool = sorted(by_source.get(source, []), key=lambda q: q.question_id)
        if quota > len(pool):
            raise QuotaInfeasible(
                f"source {source!r}: quota {quota} exceeds {len(pool)} eligible questions")
        rng = random.Random(stable_seed(seed, source))
        chosen.extend(rng.sample(pool, quota))
    return sorted(chosen, key=lambda q: q.question_id)


# --- draft collection ---------------------------------------------------------

def collect_drafts(bank: QuestionBank, models: Sequence[str], backend: Backend, *,
                   n_per_model: int = 4, cap: int = 20,
                   sampling_for: Mapping[str, SamplingConfig] | None = None,
                   max_in_flight: int = 4) -> dict[str, list[Draft]]:
    """Clean-slate drafts from a panel of models, labeled against gold.

    Unextractable answers are kept as incorrect drafts with a reason; backend
    failures produce no draft. At most `cap` drafts survive per question, in
    (model, sample index) order.
    """
    pools: dict[str, list[Draft]] = defaultdict(list)
    for model in models:
        sampling = (sampling_for or {}).get(model) or default_sampling(model)
        records = run_direct(bank, model, backend, sampling=sampling,
                             n_samples=n_per_model, max_in_flight=max_in_flight,
                             setting_label="sft-drafts")
        for r in records:
            if r.excluded_reason is not None:
                continue
            reason = "unextractable_answer" if r.extracted_answer is None else None
            pools[r.question_id].append(Draft(
                r.question_id, model, r.sample_index, strip_think(r.raw_text),
                r.extracted_answer, r.is_correct, reason))
    for qid in pools:
        pools[qid] = sorted(pools[qid], key=lambda d: (d.model, d.sample_index))[:cap]
    return dict(pools)


# --- verification curation ----------------------------------------------------

_CONFIDENCE_RE = re.compile(
    r"<overall_confidence>\s*(high|medium|low)\s*</overall_confidence>",
    re.IGNORECASE)
_FIX_RE = re.compile(r"<fix>(.*?)</fix>", re.DOTALL | re.IGNORECASE)


@dataclass(frozen=True)
class VerificationTrace:
    question_id: str
    draft_id: str
    text: str  # reasoning portion, think-stripped, tags removed
    verdict: str
    confidence: str | None = None
    fix: str | None = None


def curate_verification(question: Question, draft: Draft,
                        raw_response: str) -> tuple[VerificationTrace | None, str]:
    """Keep a verification trace only when its verdict matches the draft's
    ground-truth label. Returns (trace_or_none, reason)."""
    stripped = strip_think(raw_response)
    verdict = parse_verdicts(stripped, 1)[0].value
    if verdict == VERDICT_MISSING:
        return None, "missing_verdict"
    oracle = VERDICT_CORRECT if draft.correct else VERDICT_INCORRECT
    if verdict != oracle:
        return None, "verdict_mismatch"
    cut = stripped.lower().find("<overall_verdict")
    reasoning = (stripped[:cut] if cut >= 0 else stripped).strip()
    if not reasoning:
        return None, "empty_trace"
    conf_matches = _CONFIDENCE_RE.findall(stripped)
    fix_matches = _FIX_RE.findall(stripped)
    return VerificationTrace(
        question.question_id, draft.draft_id, reasoning, verdict,
        conf_matches[-1].capitalize() if conf_matches else None,
        fix_matches[-1].strip() if fix_matches else None), "kept"


# --- trajectory assembly ------------------------------------------------------

@dataclass(frozen=True)
class TrainingExample:
    prompt: str
    completion: str
    label: str
    provenance: dict

    def to_dict(self) -> dict:
        return {"prompt": self.prompt, "completion": self.completion,
                "label": self.label, "provenance": self.provenance}


def synthesize_trajectory(question: Question, draft: Draft,
                          verification: VerificationTrace,
                          clean_slate: Draft | None = None, *,
                          neutral_format: bool = False) -> TrainingExample:
    """One (prompt, completion) pair: the prompt shows the question with the
    draft; the completion verifies, states the verdict, and ends with a boxed
    final answer — the draft's own answer when the draft is Correct, otherwise
    the answer from a correct clean-slate solution."""
    label = VERDICT_CORRECT if draft.correct else VERDICT_INCORRECT
    if verification.verdict != label:
        raise LabelMismatch(
            f"verification verdict {verification.verdict!r} vs draft label {label!r}")
    prompt = templates.render("one_f", templates.PromptBindings(
        problem=question.problem, drafts=[draft.text]))
    if label == VERDICT_CORRECT:
        if draft.answer is None:
            raise LabelMismatch("a Correct draft must carry an extractable answer")
        final_answer = f"\\boxed{{{draft.answer}}}"
        completion = templates.render("sft_trace_correct", templates.PromptBindings(
            verification_trace=verification.text, final_answer=final_answer))
        clean_id = None
    else:
        if clean_slate is None or not clean_slate.correct or clean_slate.answer is None:
            raise MissingCleanSlate(
                f"question {question.question_id}: no correct clean-slate solution")
        final_answer = f"\\boxed{{{clean_slate.answer}}}"
        completion = templates.render("sft_trace_incorrect", templates.PromptBindings(
            verification_trace=verification.text,
            clean_slate_trace=clean_slate.text, final_answer=final_answer))
        clean_id = clean_slate.draft_id
    if neutral_format:
        completion = templates.neutralize_markers(completion)
    provenance = {
        "question_id": question.question_id,
        "source": question.source,
        "draft_id": draft.draft_id,
        "draft_answer": draft.answer,
        "clean_slate_id": clean_id,
        "confidence": verification.confidence,
        "fix": verification.fix,
    }
    return TrainingExample(prompt, completion, label, provenance)


_COMPLETION_VERDICT_RE = re.compile(
    r"<overall_verdict_1>\s*(correct|incorrect)\s*</overall_verdict_1>",
    re.IGNORECASE)


def validate_example(example: TrainingExample) -> None:
    """Structural invariants every emitted pair must satisfy."""
    m = None
    for m in _COMPLETION_VERDICT_RE.finditer(example.completion):
        pass
    if m is None:
        raise LabelMismatch("completion is missing its verdict tag")
    if m.group(1).capitalize() != example.label:
        raise LabelMismatch(
            f"completion verdict {m.group(1)!r} contradicts label {example.label!r}")
    try:
        boxed = extract_boxed(example.completion)
    except UnbalancedBraces:
        boxed = None
    if boxed is None:
        raise LabelMismatch("completion is missing a boxed final answer")
    draft_answer = example.provenance.get("draft_answer")
    if example.label == VERDICT_CORRECT:
        if draft_answer is None or not answers_equal(boxed, draft_answer):
            raise LabelMismatch("a Correct completion must restate the draft answer")
    elif draft_answer is not None and answers_equal(boxed, draft_answer):
        raise LabelMismatch(
            "an Incorrect completion must not conclude with the draft answer")


def emit_jsonl(examples: Sequence[TrainingExample], path: str | Path, *,
               require_balance: bool = True) -> None:
    """Validate and write training pairs, one JSON object per line with keys
    prompt, completion, label, provenance (in that order)."""
    counts = defaultdict(int)
    for ex in examples:
        validate_example(ex)
        counts[ex.label] += 1
    if require_balance and counts[VERDICT_CORRECT] != counts[VERDICT_INCORRECT]:
        raise BalanceViolation(
            f"{counts[VERDICT_CORRECT]} Correct vs {counts[VERDICT_INCORRECT]} Incorrect")
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(ex.to_dict(), ensure_ascii=False) + "\n")


def load_jsonl(path: str | Path) -> list[TrainingExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                row = json.loads(line)
                out.append(TrainingExample(row["prompt"], row["completion"],
                                           row["label"], row["provenance"]))
    return out


# --- end-to-end synthesis -----------------------------------------------------

def synthesize_dataset(bank: QuestionBank, verifier_model: str, backend: Backend, *,
                       target_per_label: int, solver_model: str | None = None,
                       n_clean_slate: int = 4, neutral_format: bool = False,
                       sampling: SamplingConfig | None = None,
                       max_in_flight: int = 4) -> list[TrainingExample]:
    """Verify every pooled draft, keep label-consistent traces, attach clean
    slates where needed, and return an exactly balanced example list."""
    solver_model = solver_model or verifier_model
    sampling = sampling or default_sampling(verifier_model)
    units: list[tuple[Question, Draft]] = []
    for q in bank:
        for d in sorted(bank.pool_for(q.question_id),
                        key=lambda d: (d.model, d.sample_index)):
            units.append((q, d))
    reqs = [ChatRequest(verifier_model, templates.render(
        "verify_training", templates.PromptBindings(problem=q.problem,
                                                    drafts=[d.text])),
        replace(sampling, n_samples=1)) for q, d in units]
    results = generate_batch(backend, reqs, max_in_flight)

    kept: dict[str, list[tuple[Question, Draft, VerificationTrace]]] = \
        {VERDICT_CORRECT: [], VERDICT_INCORRECT: []}
    for (q, d), res in zip(units, results):
        if isinstance(res, BackendError):
            continue
        trace, _ = curate_verification(q, d, res.texts[0])
        if trace is not None:
            kept[trace.verdict].append((q, d, trace))

    needs_clean = sorted({q.question_id for q, _, _ in kept[VERDICT_INCORRECT]})
    clean_slates = _collect_clean_slates(bank, needs_clean, solver_model, backend,
                                         n_clean_slate, max_in_flight)

    examples: list[TrainingExample] = []
    for label in (VERDICT_CORRECT, VERDICT_INCORRECT):
        built = []
        for q, d, trace in sorted(kept[label],
                                  key=lambda t: (t[0].question_id, t[1].draft_id)):
            if label == VERDICT_INCORRECT and q.question_id not in clean_slates:
                continue
            built.append(synthesize_trajectory(
                q, d, trace, clean_slates.get(q.question_id),
                neutral_format=neutral_format))
            if len(built) == target_per_label:
                break
        if len(built) < target_per_label:
            raise QuotaInfeasible(
                f"only {len(built)} usable {label} examples (need {target_per_label})")
        examples.extend(built)
    return examples


def _collect_clean_slates(bank: QuestionBank, qids: Sequence[str], model: str,
                          backend: Backend, n_samples: int,
                          max_in_flight: int) -> dict[str, Draft]:
    """First correct clean-slate solve per question, as a Draft."""
    if not qids:
        return {}
    sub = bank.subset(qids)
    records = run_direct(sub, model, backend, n_samples=n_samples,
                         max_in_flight=max_in_flight,
                         setting_label="sft-clean-slate")
    out: dict[str, Draft] = {}
    for r in sorted(records, key=lambda r: (r.question_id, r.sample_index)):
        if r.question_id not in out and r.is_correct and r.excluded_reason is None:
            out[r.question_id] = Draft(r.question_id, model, r.sample_index,
                                       strip_think(r.raw_text),
                                       r.extracted_answer, True)
    return out
