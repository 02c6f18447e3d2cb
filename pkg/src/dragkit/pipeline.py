"""Evaluation pipelines: clean-slate and draft-conditioned runs, anchor
selection, reasonably-hard filtering, iterative refinement, context
denoising, and post-hoc self-detected filtering.

Suites fan out per-(question, sample) work units through a backend. Draft
resampling is per-sample and seeded by (run seed, question id, sample index),
so any run replays byte-identically against a recorded fixture regardless of
concurrency.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from . import game24, templates
from .backend import (Backend, BackendError, ChatRequest, ChatResponse,
                      default_sampling, generate_batch, SamplingConfig)
from .parsing import (answers_equal, extract_boxed, extract_game24_expression,
                      mc_letter, normalize_answer, parse_verdicts, strip_think,
                      UnbalancedBraces, Verdict, VERDICT_INCORRECT, VERDICT_MISSING)

TASK_KINDS = ("math", "mc", "game24", "code-input")

VARIANTS = ("base", "pos", "ver", "external_error", "no_reuse")


class PipelineError(Exception):
    pass


class InsufficientModels(PipelineError):
    pass


class InsufficientDrafts(PipelineError):
    def __init__(self, correctness: str, needed: int, available: int):
        super().__init__(f"need {needed} {correctness} draft(s), pool has {available}")
        self.correctness = correctness
        self.needed = needed
        self.available = available


class AllUnextractable(PipelineError):
    pass


# --- data model ---------------------------------------------------------------

@dataclass(frozen=True)
class Question:
    question_id: str
    problem: str
    gold: str
    kind: str = "math"
    source: str = ""

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")


@dataclass(frozen=True)
class Draft:
    question_id: str
    model: str
    sample_index: int
    text: str  # think-stripped
    answer: str | None
    correct: bool
    excluded_reason: str | None = None

    @property
    def draft_id(self) -> str:
        return f"{self.model}#{self.sample_index}"


RECORD_FIELDS = ("question_id", "model", "setting", "sample_index", "draft_ids",
                 "raw_text", "verdicts", "extracted_answer", "is_correct",
                 "excluded_reason")


@dataclass(frozen=True)
class GenerationRecord:
    question_id: str
    model: str
    setting: str
    sample_index: int
    draft_ids: tuple[str, ...]
    raw_text: str
    verdicts: tuple[str, ...]
    extracted_answer: str | None
    is_correct: bool
    excluded_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "model": self.model,
            "setting": self.setting,
            "sample_index": self.sample_index,
            "draft_ids": list(self.draft_ids),
            "raw_text": self.raw_text,
            "verdicts": list(self.verdicts),
            "extracted_answer": self.extracted_answer,
            "is_correct": self.is_correct,
            "excluded_reason": self.excluded_reason,
        }

    @classmethod
    def from_dict(cls, row: Mapping) -> "GenerationRecord":
        return cls(question_id=row["question_id"], model=row["model"],
                   setting=row["setting"], sample_index=int(row["sample_index"]),
                   draft_ids=tuple(row["draft_ids"]), raw_text=row["raw_text"],
                   verdicts=tuple(row["verdicts"]),
                   extracted_answer=row["extracted_answer"],
                   is_correct=bool(row["is_correct"]),
                   excluded_reason=row.get("excluded_reason"))


class QuestionBank:
    """Questions plus per-question draft pools (draft texts kept think-stripped)."""

    def __init__(self, questions: Iterable[Question] = (),
                 pools: Mapping[str, Sequence[Draft]] | None = None):
        self.questions: list[Question] = list(questions)
        self.pools: dict[str, list[Draft]] = {}
        ids = {q.question_id for q in self.questions}
        if len(ids) != len(self.questions):
            raise ValueError("duplicate question ids in bank")
        for qid, drafts in (pools or {}).items():
            self.pools[qid] = [replace(d, text=strip_think(d.text)) for d in drafts]

    def __len__(self) -> int:
        return len(self.questions)

    def __iter__(self):
        return iter(self.questions)

    def question(self, qid: str) -> Question:
        for q in self.questions:
            if q.question_id == qid:
                return q
        raise KeyError(qid)

    def pool_for(self, qid: str) -> list[Draft]:
        return self.pools.get(qid, [])

    def add_drafts(self, drafts: Iterable[Draft]) -> None:
        for d in drafts:
            self.pools.setdefault(d.question_id, []).append(replace(d, text=strip_think(d.text)))

    def subset(self, qids: Iterable[str]) -> "QuestionBank":
        keep = set(qids)
        return QuestionBank(
            [q for q in self.questions if q.question_id in keep],
            {qid: drafts for qid, drafts in self.pools.items() if qid in keep},
        )


# --- JSONL IO -----------------------------------------------------------------

def save_records(records: Iterable[GenerationRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")


def load_records(path: str | Path) -> list[GenerationRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(GenerationRecord.from_dict(json.loads(line)))
    return out


def save_bank(bank: QuestionBank, path: str | Path,
              pool_path: str | Path | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in bank:
            row = {"question_id": q.question_id, "problem": q.problem,
                   "gold": q.gold, "kind": q.kind, "source": q.source}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    if pool_path is not None:
        with open(pool_path, "w", encoding="utf-8") as fh:
            for q in bank:
                for d in bank.pool_for(q.question_id):
                    row = {"question_id": d.question_id, "model": d.model,
                           "sample_index": d.sample_index, "text": d.text,
                           "answer": d.answer, "correct": d.correct,
                           "excluded_reason": d.excluded_reason}
                    fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def load_bank(path: str | Path, pool_path: str | Path | None = None) -> QuestionBank:
    questions = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                row = json.loads(line)
                questions.append(Question(row["question_id"], row["problem"], row["gold"],
                                          row.get("kind", "math"), row.get("source", "")))
    bank = QuestionBank(questions)
    if pool_path is not None:
        drafts = []
        with open(pool_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    row = json.loads(line)
                    drafts.append(Draft(row["question_id"], row["model"],
                                        int(row["sample_index"]), row["text"],
                                        row.get("answer"), bool(row["correct"]),
                                        row.get("excluded_reason")))
        bank.add_drafts(drafts)
    return bank


# --- grading ------------------------------------------------------------------

def stable_seed(*parts) -> int:
    """Deterministic cross-process seed from arbitrary parts."""
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def extract_answer(kind: str, raw_text: str) -> str | None:
    """Final answer from a raw response: boxed content, or a rendered
    expression for Game-of-24 tasks."""
    if kind == "game24":
        expr = extract_game24_expression(raw_text)
        return game24.render(expr) if expr is not None else None
    try:
        return extract_boxed(strip_think(raw_text))
    except UnbalancedBraces:
        return None


def grade(kind: str, extracted: str | None, gold: str) -> bool:
    if extracted is None:
        return False
    if kind == "game24":
        try:
            expr = game24.parse_expression(extracted)
        except game24.ParseError:
            return False
        return game24.verify_solution(game24.Puzzle.parse(gold), expr)
    if kind == "mc":
        letter = mc_letter(extracted)
        return letter is not None and letter == mc_letter(gold)
    return answers_equal(extracted, gold)


# --- settings -----------------------------------------------------------------

def pattern_label(pattern: Sequence[bool]) -> str:
    t = sum(1 for p in pattern if p)
    f = len(pattern) - t
    parts = []
    if t:
        parts.append(f"{t}T")
    if f:
        parts.append(f"{f}F")
    return "".join(parts)


def parse_pattern(text: str) -> tuple[bool, ...]:
    """Parse a pattern like "F", "FF", "TF" (T = correct draft slot)."""
    out = []
    for ch in text.strip().upper():
        if ch == "T":
            out.append(True)
        elif ch == "F":
            out.append(False)
        else:
            raise ValueError(f"pattern may only contain T/F, got {text!r}")
    if not 1 <= len(out) <= 4:
        raise ValueError("pattern length must be in [1, 4]")
    return tuple(out)


@dataclass(frozen=True)
class EvalSetting:
    kind: str  # direct | conditioned | refine | denoise_revise | denoise_filter
    pattern: tuple[bool, ...] | None = None
    variant: str = "base"
    iterations: int = 1

    def __post_init__(self):
        if self.kind not in ("direct", "conditioned", "refine",
                             "denoise_revise", "denoise_filter"):
            raise ValueError(f"unknown setting kind {self.kind!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.kind in ("conditioned", "denoise_revise", "denoise_filter"):
            if self.pattern is None or not 1 <= len(self.pattern) <= 4:
                raise ValueError("conditioned settings need a pattern of length 1..4")
        if self.variant == "external_error" and self.pattern and any(self.pattern):
            raise ValueError("the external-error variant applies only to all-incorrect patterns")
        if self.variant in ("pos", "no_reuse", "external_error") and self.pattern \
                and len(self.pattern) != 1:
            raise ValueError(f"variant {self.variant!r} is defined for single-draft patterns only")
        if self.kind == "refine" and self.iterations < 1:
            raise ValueError("refine needs iterations >= 1")

    def label(self) -> str:
        if self.kind == "direct":
            return "direct"
        if self.kind == "refine":
            return "refine"
        base = pattern_label(self.pattern or ())
        if self.kind == "conditioned":
            suffix = {"base": "", "pos": "-pos", "ver": "-ver",
                      "external_error": "-external-error",
                      "no_reuse": "-no-reuse"}[self.variant]
            return base + suffix
        method = "revise" if self.kind == "denoise_revise" else "filter"
        return method if self.pattern == (False,) else f"{method}-{base}"


def conditioned_template_text(setting: EvalSetting) -> str:
    assert setting.pattern is not None
    k = len(setting.pattern)
    if setting.variant == "base":
        return templates.multi_draft_template(k)
    if setting.variant == "ver":
        return templates.solve_step_template(k)
    name = {"pos": "pos_1f", "external_error": "external_error_1f",
            "no_reuse": "one_f_no_reuse"}[setting.variant]
    return templates.load_template(name)


# --- direct -------------------------------------------------------------------

def run_direct(bank: QuestionBank, model: str, backend: Backend, *,
               sampling: SamplingConfig | None = None, n_samples: int = 16,
               max_in_flight: int = 4, setting_label: str = "direct") -> list[GenerationRecord]:
    """One clean-slate request per question with n_samples generations.

    Emits exactly len(bank) * n_samples records; backend failures become
    records with excluded_reason set.
    """
    sampling = sampling or default_sampling(model)
    sampling = replace(sampling, n_samples=n_samples)
    reqs = [ChatRequest(model, templates.render(
        "direct", templates.PromptBindings(problem=q.problem)), sampling)
        for q in bank]
    results = generate_batch(backend, reqs, max_in_flight)
    records = []
    for q, res in zip(bank, results):
        for s in range(n_samples):
            records.append(_make_record(q, model, setting_label, s, (), res,
                                        sample_of_response=s, n_drafts=0))
    return records


def _make_record(q: Question, model: str, setting: str, sample_index: int,
                 draft_ids: tuple[str, ...], result: ChatResponse | BackendError,
                 *, sample_of_response: int, n_drafts: int) -> GenerationRecord:
    if isinstance(result, BackendError):
        return GenerationRecord(q.question_id, model, setting, sample_index, draft_ids,
                                "", (VERDICT_MISSING,) * n_drafts, None, False,
                                excluded_reason=f"backend_error: {result}")
    raw = result.texts[sample_of_response]
    verdicts = tuple(v.value for v in parse_verdicts(strip_think(raw), n_drafts)) \
        if n_drafts else ()
    extracted = extract_answer(q.kind, raw)
    return GenerationRecord(q.question_id, model, setting, sample_index, draft_ids,
                            raw, verdicts, extracted,
                            grade(q.kind, extracted, q.gold))


# --- anchors and filtering ----------------------------------------------------

def mean_accuracy(records: Iterable[GenerationRecord]) -> float:
    """Mean over questions of per-question sample accuracy."""
    by_q: dict[str, list[bool]] = defaultdict(list)
    for r in records:
        by_q[r.question_id].append(r.is_correct)
    if not by_q:
        raise ValueError("no records")
    return sum(sum(v) / len(v) for v in by_q.values()) / len(by_q)


def select_anchors(direct_by_model: Mapping[str, Sequence[GenerationRecord]],
                   k: int = 3) -> list[str]:
    """Top-k models by mean accuracy on the original (unfiltered) dataset.

    Ties break lexicographically by model name.
    """
    if len(direct_by_model) < k:
        raise InsufficientModels(f"need {k} models, got {len(direct_by_model)}")
    scored = sorted(((-mean_accuracy(recs), model) for model, recs in direct_by_model.items()))
    return [model for _, model in scored[:k]]


def is_reasonably_hard(outcomes: Sequence[bool]) -> bool:
    """Definitional filter: at least 2 correct and 2 incorrect pooled responses."""
    correct = sum(1 for o in outcomes if o)
    return correct >= 2 and len(outcomes) - correct >= 2


def filter_reasonably_hard(bank: QuestionBank,
                           anchor_records: Iterable[GenerationRecord]) -> QuestionBank:
    """Keep questions whose pooled anchor responses pass is_reasonably_hard.

    Errored records (excluded_reason set) are not counted as responses.
    """
    outcomes: dict[str, list[bool]] = defaultdict(list)
    for r in anchor_records:
        if r.excluded_reason is None:
            outcomes[r.question_id].append(r.is_correct)
    keep = [q.question_id for q in bank if is_reasonably_hard(outcomes.get(q.question_id, []))]
    return bank.subset(keep)


# --- draft sampling and conditioned runs --------------------------------------

def sample_drafts(pool: Sequence[Draft], pattern: Sequence[bool], seed: int) -> list[Draft]:
    """Pick drafts matching the correctness pattern, uniformly without
    replacement within each correctness class."""
    ordered = sorted(pool, key=lambda d: (d.model, d.sample_index))
    corrects = [d for d in ordered if d.correct]
    incorrects = [d for d in ordered if not d.correct]
    n_true = sum(1 for p in pattern if p)
    n_false = len(pattern) - n_true
    if n_true > len(corrects):
        raise InsufficientDrafts("correct", n_true, len(corrects))
    if n_false > len(incorrects):
        raise InsufficientDrafts("incorrect", n_false, len(incorrects))
    rng = random.Random(seed)
    chosen_true = rng.sample(corrects, n_true)
    chosen_false = rng.sample(incorrects, n_false)
    out = []
    ti = fi = 0
    for slot in pattern:
        if slot:
            out.append(chosen_true[ti])
            ti += 1
        else:
            out.append(chosen_false[fi])
            fi += 1
    return out


def run_conditioned(bank: QuestionBank, model: str, setting: EvalSetting,
                    backend: Backend, *, seed: int = 0,
                    sampling: SamplingConfig | None = None, n_samples: int = 16,
                    max_in_flight: int = 4) -> list[GenerationRecord]:
    """Draft-conditioned evaluation; drafts are resampled per sample."""
    if setting.kind != "conditioned":
        raise ValueError("run_conditioned needs a conditioned setting")
    assert setting.pattern is not None
    sampling = sampling or default_sampling(model)
    sampling = replace(sampling, n_samples=1)
    template_text = conditioned_template_text(setting)
    label = setting.label()
    k = len(setting.pattern)

    reqs, meta = [], []
    for q in bank:
        for s in range(n_samples):
            drafts = sample_drafts(bank.pool_for(q.question_id), setting.pattern,
                                   stable_seed(seed, q.question_id, s))
            prompt = templates.render_text(template_text, templates.PromptBindings(
                problem=q.problem, drafts=[d.text for d in drafts]))
            reqs.append(ChatRequest(model, prompt, sampling))
            meta.append((q, s, tuple(d.draft_id for d in drafts)))
    results = generate_batch(backend, reqs, max_in_flight)
    return [_make_record(q, model, label, s, draft_ids, res,
                         sample_of_response=0, n_drafts=k)
            for (q, s, draft_ids), res in zip(meta, results)]


# --- majority vote and iterative refinement -----------------------------------

def majority_vote(answers: Sequence[str | None]) -> str:
    """Modal answer under the restricted normalizer.

    Unextractable answers (None) are excluded first; ties break to the
    lexicographically smallest canonical form.
    """
    present = [a for a in answers if a is not None]
    if not present:
        raise AllUnextractable("no extractable answers to vote on")
    counts: dict[str, int] = defaultdict(int)
    for a in present:
        counts[normalize_answer(a).canonical] += 1
    best = max(counts.values())
    return min(c for c, n in counts.items() if n == best)


def iterative_refine(bank: QuestionBank, model: str, backend: Backend, *,
                     iterations: int, trajectories: int = 16, seed: int = 0,
                     sampling: SamplingConfig | None = None,
                     max_in_flight: int = 4) -> list[GenerationRecord]:
    """Self-refinement: iteration 0 is Direct; iteration t >= 1 re-solves with
    the same trajectory's previous (think-stripped) output as the in-context
    draft, regardless of its correctness.

    Settings are labeled refine-t0, refine-t1, ...; sample_index is the
    trajectory index. A failed trajectory stops producing records but the
    others continue.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    sampling = sampling or default_sampling(model)
    records = list(run_direct(bank, model, backend, sampling=sampling,
                              n_samples=trajectories, max_in_flight=max_in_flight,
                              setting_label="refine-t0"))
    prev: dict[tuple[str, int], GenerationRecord] = {
        (r.question_id, r.sample_index): r for r in records
        if r.excluded_reason is None
    }
    one_shot = replace(sampling, n_samples=1)
    for t in range(1, iterations):
        label = f"refine-t{t}"
        reqs, meta = [], []
        for q in bank:
            for traj in range(trajectories):
                prev_rec = prev.get((q.question_id, traj))
                if prev_rec is None:
                    continue
                prompt = templates.render("one_f", templates.PromptBindings(
                    problem=q.problem, drafts=[strip_think(prev_rec.raw_text)]))
                reqs.append(ChatRequest(model, prompt, one_shot))
                meta.append((q, traj))
        results = generate_batch(backend, reqs, max_in_flight)
        prev = {}
        for (q, traj), res in zip(meta, results):
            rec = _make_record(q, model, label, traj, (f"refine-t{t - 1}#{traj}",), res,
                               sample_of_response=0, n_drafts=1)
            records.append(rec)
            if rec.excluded_reason is None:
                prev[(q.question_id, traj)] = rec
    return records


def refine_curves(bank: QuestionBank, records: Sequence[GenerationRecord]
                  ) -> tuple[list[float], list[float]]:
    """Per-iteration accuracy and cumulative majority-vote accuracy.

    The vote at step t is taken within each trajectory over its answers from
    iterations 0..t, then graded; both curves average over (question,
    trajectory) pairs present at iteration 0.
    """
    by_iter: dict[int, dict[tuple[str, int], GenerationRecord]] = defaultdict(dict)
    for r in records:
        if r.setting.startswith("refine-t"):
            by_iter[int(r.setting[8:])][(r.question_id, r.sample_index)] = r
    if not by_iter:
        return [], []
    iterations = max(by_iter) + 1
    units = sorted(by_iter[0])
    gold = {q.question_id: q for q in bank}
    acc_curve, vote_curve = [], []
    answers: dict[tuple[str, int], list[str | None]] = {u: [] for u in units}
    for t in range(iterations):
        correct = 0
        vote_correct = 0
        for u in units:
            rec = by_iter[t].get(u)
            answers[u].append(rec.extracted_answer if rec else None)
            if rec is not None and rec.is_correct:
                correct += 1
            q = gold[u[0]]
            try:
                vote = majority_vote(answers[u])
            except AllUnextractable:
                vote = None
            if vote is not None and grade(q.kind, vote, q.gold):
                vote_correct += 1
        acc_curve.append(correct / len(units))
        vote_curve.append(vote_correct / len(units))
    return acc_curve, vote_curve


# --- context denoising --------------------------------------------------------

def _chat_once(backend: Backend, model: str, prompt: str,
               sampling: SamplingConfig) -> str:
    res = backend.generate(ChatRequest(model, prompt, replace(sampling, n_samples=1)))
    return res.texts[0]


def _denoise_chain(q: Question, drafts: Sequence[Draft], model: str, method: str,
                   backend: Backend, sampling: SamplingConfig, label: str,
                   sample_index: int) -> GenerationRecord:
    """One denoised sample: revise = per-draft rewrite + solve (2 calls per
    draft count 1); filter = strategy + per-draft filter + solve."""
    draft_ids = tuple(d.draft_id for d in drafts)
    cleaned: list[str] = []
    dropped: list[str] = []
    try:
        if method == "filter":
            strategy = strip_think(_chat_once(backend, model, templates.render(
                "filter_strategy", templates.PromptBindings(problem=q.problem)), sampling))
        for d in drafts:
            try:
                if method == "revise":
                    step = templates.render("revise_step", templates.PromptBindings(
                        problem=q.problem, drafts=[d.text]))
                else:
                    step = templates.render("filter_filter", templates.PromptBindings(
                        problem=q.problem, drafts=[d.text], strategy=strategy))
                cleaned.append(strip_think(_chat_once(backend, model, step, sampling)))
            except BackendError as exc:
                dropped.append(f"{d.draft_id}: {exc}")
        if not cleaned:
            return GenerationRecord(q.question_id, model, label, sample_index, draft_ids,
                                    "", (), None, False,
                                    excluded_reason="all drafts failed step 1: "
                                                    + "; ".join(dropped))
        solve = templates.render_text(templates.solve_step_template(len(cleaned)),
                                      templates.PromptBindings(problem=q.problem,
                                                               drafts=cleaned))
        raw = _chat_once(backend, model, solve, sampling)
    except BackendError as exc:
        return GenerationRecord(q.question_id, model, label, sample_index, draft_ids,
                                "", (), None, False,
                                excluded_reason=f"backend_error: {exc}")
    extracted = extract_answer(q.kind, raw)
    reason = "; ".join(f"step 1 dropped {d}" for d in dropped) or None
    return GenerationRecord(q.question_id, model, label, sample_index, draft_ids,
                            raw, (), extracted, grade(q.kind, extracted, q.gold),
                            excluded_reason=reason)


def denoise_revise(q: Question, drafts: Sequence[Draft], model: str,
                   backend: Backend, *, sampling: SamplingConfig | None = None,
                   n_samples: int = 1, label: str = "revise") -> list[GenerationRecord]:
    sampling = sampling or default_sampling(model)
    return [_denoise_chain(q, drafts, model, "revise", backend, sampling, label, s)
            for s in range(n_samples)]


def denoise_filter(q: Question, drafts: Sequence[Draft], model: str,
                   backend: Backend, *, sampling: SamplingConfig | None = None,
                   n_samples: int = 1, label: str = "filter") -> list[GenerationRecord]:
    sampling = sampling or default_sampling(model)
    return [_denoise_chain(q, drafts, model, "filter", backend, sampling, label, s)
            for s in range(n_samples)]


def run_denoise(bank: QuestionBank, model: str, method: str, backend: Backend, *,
                pattern: Sequence[bool] = (False,), seed: int = 0,
                sampling: SamplingConfig | None = None, n_samples: int = 16,
                max_in_flight: int = 4) -> list[GenerationRecord]:
    """Denoised conditioned evaluation over a bank with per-sample resampling."""
    if method not in ("revise", "filter"):
        raise ValueError(f"method must be revise or filter, got {method!r}")
    setting = EvalSetting(f"denoise_{method}", tuple(pattern))
    label = setting.label()
    sampling = sampling or default_sampling(model)
    units = []
    for q in bank:
        for s in range(n_samples):
            drafts = sample_drafts(bank.pool_for(q.question_id), pattern,
                                   stable_seed(seed, q.question_id, s))
            units.append((q, s, drafts))
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = [pool.submit(_denoise_chain, q, drafts, model, method, backend,
                               sampling, label, s)
                   for q, s, drafts in units]
        return [f.result() for f in futures]


# --- post-hoc self-detected filtering -----------------------------------------

@dataclass(frozen=True)
class PosthocSummary:
    records: tuple[GenerationRecord, ...]
    total_records: int
    retained_records: int
    questions_total: int
    questions_retained: int


def posthoc_self_detected(records: Sequence[GenerationRecord]) -> PosthocSummary:
    """Keep single-incorrect-draft records whose own verdict flagged the draft
    Incorrect (the error was self-detected)."""
    kept = [r for r in records
            if r.verdicts and r.verdicts[0] == VERDICT_INCORRECT]
    questions = {r.question_id for r in records}
    kept_questions = {r.question_id for r in kept}
    return PosthocSummary(tuple(kept), len(records), len(kept),
                          len(questions), len(kept_questions))
