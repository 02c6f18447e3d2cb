"""Metrics: unbiased pass@k, bootstrap confidence intervals, and
tree-edit-distance summaries of generated Game-of-24 expressions."""

import pytest

from dragkit.metrics import (accuracy_with_ci, CiResult, EmptyInput, pass_at_k,
                             ted_summary)
from dragkit.pipeline import Draft, GenerationRecord, Question, QuestionBank

from oracles import pass_at_k_oracle


def rec(qid, idx, correct, *, answer="x", setting="direct", draft_ids=()):
    return GenerationRecord(qid, "m", setting, idx, tuple(draft_ids),
                            "raw", (), answer, correct, None)


class TestPassAtK:
    def test_matches_exhaustive_oracle_for_small_n(self):
        for n in range(1, 9):
            for c in range(n + 1):
                for k in range(1, n + 1):
                    assert pass_at_k(n, c, k) == pytest.approx(
                        float(pass_at_k_oracle(n, c, k)), abs=1e-12), (n, c, k)

    def test_known_values(self):
        assert pass_at_k(16, 8, 1) == pytest.approx(0.5)
        assert pass_at_k(5, 2, 1) == pytest.approx(0.4)
        assert pass_at_k(4, 0, 2) == 0.0
        assert pass_at_k(4, 4, 2) == 1.0

    def test_certain_hit_when_k_exceeds_failures(self):
        assert pass_at_k(10, 8, 3) == 1.0

    def test_validation(self):
        for n, c, k in [(0, 0, 1), (4, -1, 1), (4, 5, 1), (4, 2, 0), (4, 2, 5)]:
            with pytest.raises(ValueError):
                pass_at_k(n, c, k)


class TestBootstrapCi:
    def records(self):
        out = []
        accs = {"q0": 4, "q1": 3, "q2": 2, "q3": 1, "q4": 0}
        for qid, n_correct in accs.items():
            for i in range(4):
                out.append(rec(qid, i, i < n_correct))
        return out

    def test_point_estimate_and_fields(self):
        r = accuracy_with_ci(self.records(), resamples=200, seed=5)
        assert r.mean == pytest.approx((1.0 + 0.75 + 0.5 + 0.25 + 0.0) / 5)
        assert r.n_questions == 5
        assert r.resamples == 200

    def test_interval_brackets_mean(self):
        r = accuracy_with_ci(self.records(), resamples=300, seed=9)
        assert r.ci_lo <= r.mean <= r.ci_hi
        assert r.ci_lo < r.ci_hi

    def test_deterministic_for_seed(self):
        a = accuracy_with_ci(self.records(), resamples=250, seed=11)
        b = accuracy_with_ci(self.records(), resamples=250, seed=11)
        assert a == b

    def test_record_order_does_not_matter(self):
        recs = self.records()
        a = accuracy_with_ci(recs, resamples=100, seed=3)
        b = accuracy_with_ci(list(reversed(recs)), resamples=100, seed=3)
        assert a == b

    def test_wider_confidence_widens_interval(self):
        tight = accuracy_with_ci(self.records(), resamples=400, seed=2, alpha=0.5)
        loose = accuracy_with_ci(self.records(), resamples=400, seed=2, alpha=0.05)
        assert loose.ci_lo <= tight.ci_lo
        assert loose.ci_hi >= tight.ci_hi

    def test_degenerate_all_correct(self):
        recs = [rec("a", i, True) for i in range(3)]
        r = accuracy_with_ci(recs, resamples=50)
        assert r == CiResult(1.0, 1.0, 1.0, 1, 50)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            accuracy_with_ci([])


class TestTedSummary:
    def bank(self):
        bank = QuestionBank([Question("g", "use 1 2 3 4", "1 2 3 4", "game24")])
        bank.add_drafts([
            Draft("g", "m", 0, "t0", "1+2+3+4", False),
            Draft("g", "m", 1, "t1", "1*2*3*4", True),
            Draft("g", "m", 2, "t2", "garbage", False),  # unparseable answer
        ])
        return bank

    def test_hand_computed_means_and_exclusions(self):
        direct = [
            rec("g", 0, False, answer="1+2+3+4"),        # min(0, 3) = 0
            rec("g", 1, True, answer="(1+2+3)*4"),       # min(1, 2) = 1
            rec("g", 2, False, answer="nonsense"),       # unparseable
            rec("g", 3, False, answer=None),             # no extraction
        ]
        conditioned = [
            rec("g", 0, False, answer="1+2+3+4", setting="1F",
                draft_ids=("m#1",)),                     # vs 1*2*3*4 only: 3
            rec("g", 1, False, answer="1+2+3+4", setting="1F",
                draft_ids=("m#2",)),                     # draft unparseable
        ]
        s = ted_summary(self.bank(), direct, conditioned)
        assert s.mean_ted_direct == pytest.approx(0.5)
        assert s.pairs_direct == 2
        assert s.excluded_direct == 2
        assert s.mean_ted_conditioned == pytest.approx(3.0)
        assert s.pairs_conditioned == 1
        assert s.excluded_conditioned == 1

    def test_all_excluded_gives_none(self):
        direct = [rec("g", 0, False, answer=None)]
        s = ted_summary(self.bank(), direct, [])
        assert s.mean_ted_direct is None
        assert s.mean_ted_conditioned is None
        assert s.pairs_direct == 0

    def test_conditioned_distance_ignores_other_drafts(self):
        # Same generation, conditioned on the identical draft: distance 0,
        # even though a farther draft exists in the pool.
        conditioned = [rec("g", 0, False, answer="1+2+3+4", setting="1F",
                           draft_ids=("m#0",))]
        s = ted_summary(self.bank(), [], conditioned)
        assert s.mean_ted_conditioned == pytest.approx(0.0)
