"""Accuracy metrics: unbiased pass@k, bootstrap confidence intervals, and
tree-edit-distance summaries for draft-conditioned generations."""

from __future__ import annotations

import math
import random
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from . import game24
from .pipeline import GenerationRecord, QuestionBank
from .treedist import ted_min, to_labeled_tree


class EmptyInput(ValueError):
    pass


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased pass@k estimator: 1 - C(n-c, k) / C(n, k), evaluated exactly
    before the final float conversion."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= c <= n:
        raise ValueError("need 0 <= c <= n")
    if k > n:
        raise ValueError("k must be <= n")
    if n - c < k:
        return 1.0
    return float(1 - Fraction(math.comb(n - c, k), math.comb(n, k)))


@dataclass(frozen=True)
class CiResult:
    mean: float
    ci_lo: float
    ci_hi: float
    n_questions: int
    resamples: int


def accuracy_with_ci(records: Sequence[GenerationRecord], *, resamples: int = 1000,
                     alpha: float = 0.05, seed: int = 0) -> CiResult:
    """Mean per-question accuracy with a percentile bootstrap over questions.

    Question order is fixed by sorting ids, so the interval is deterministic
    for a given seed. The interval is clamped to include the point estimate.
    """
    by_q: dict[str, list[bool]] = defaultdict(list)
    for r in records:
        by_q[r.question_id].append(r.is_correct)
    if not by_q:
        raise EmptyInput("no records to summarize")
    accs = [sum(v) / len(v) for _, v in sorted(by_q.items())]
    mean = sum(accs) / len(accs)
    rng = random.Random(seed)
    boots = sorted(sum(rng.choices(accs, k=len(accs))) / len(accs)
                   for _ in range(resamples))
    lo = boots[math.floor(alpha / 2 * (resamples - 1))]
    hi = boots[math.ceil((1 - alpha / 2) * (resamples - 1))]
    return CiResult(mean, min(lo, mean), max(hi, mean), len(accs), resamples)


# --- tree-edit-distance summaries ---------------------------------------------

@dataclass(frozen=True)
class TedSummary:
    mean_ted_direct: float | None
    mean_ted_conditioned: float | None
    pairs_direct: int
    pairs_conditioned: int
    excluded_direct: int
    excluded_conditioned: int


def _generation_ted(record: GenerationRecord,
                    draft_lookup: Mapping[str, Mapping[str, str]]) -> int | None:
    """Minimum TED from a generation's expression to its conditioning drafts.

    For Direct records the distance is to every parseable pooled draft for the
    question. Returns None when the generation or every draft is unparseable.
    """
    if record.extracted_answer is None:
        return None
    try:
        gen_tree = to_labeled_tree(game24.parse_expression(record.extracted_answer))
    except game24.ParseError:
        return None
    per_q = draft_lookup.get(record.question_id, {})
    if record.draft_ids:
        draft_texts = [per_q[d] for d in record.draft_ids if d in per_q]
    else:
        draft_texts = list(per_q.values())
    draft_trees = [to_labeled_tree(game24.parse_expression(t)) for t in draft_texts]
    if not draft_trees:
        return None
    return ted_min(gen_tree, draft_trees)


def _parses(text: str) -> bool:
    try:
        game24.parse_expression(text)
        return True
    except game24.ParseError:
        return False


def ted_summary(bank: QuestionBank,
                direct_records: Sequence[GenerationRecord],
                conditioned_records: Sequence[GenerationRecord]) -> TedSummary:
    """Structural-novelty comparison: mean minimum TED to the draft pool for
    clean-slate versus draft-conditioned Game-of-24 generations."""
    draft_lookup: dict[str, dict[str, str]] = {}
    for q in bank:
        per_q = {}
        for d in bank.pool_for(q.question_id):
            if d.answer is not None and _parses(d.answer):
                per_q[d.draft_id] = d.answer
        draft_lookup[q.question_id] = per_q

    def summarize(records):
        teds, excluded = [], 0
        for r in records:
            t = _generation_ted(r, draft_lookup)
            if t is None:
                excluded += 1
            else:
                teds.append(t)
        mean = sum(teds) / len(teds) if teds else None
        return mean, len(teds), excluded

    mean_d, n_d, ex_d = summarize(direct_records)
    mean_c, n_c, ex_c = summarize(conditioned_records)
    return TedSummary(mean_d, mean_c, n_d, n_c, ex_d, ex_c)
