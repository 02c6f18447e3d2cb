"""Expression grammar, brute-force solving, and puzzle generation."""

import random
from collections import Counter
from fractions import Fraction

import pytest

from dragkit.game24 import (all_puzzles, BinOp, DivisionByZero,
                            enumerate_solutions, evaluate, generate_puzzles,
                            InsufficientPool, is_solvable, Leaf, leaves,
                            OutOfRangeLeaf, parse_expression, ParseError,
                            Puzzle, render, verify_solution)
from oracles import solvable_oracle


class TestPuzzle:
    def test_numbers_sorted_on_construction(self):
        assert Puzzle((8, 3, 8, 3)).numbers == (3, 3, 8, 8)

    def test_parse_accepts_spaces_and_commas(self):
        assert Puzzle.parse("8, 3 ,8  3").numbers == (3, 3, 8, 8)

    def test_str_round_trips(self):
        p = Puzzle((5, 1, 13, 2))
        assert Puzzle.parse(str(p)) == p

    @pytest.mark.parametrize("nums", [(0, 1, 2, 3), (1, 2, 3, 14), (1, 2, 3)])
    def test_rejects_out_of_range_or_wrong_count(self, nums):
        with pytest.raises(ValueError):
            Puzzle(nums)


class TestParser:
    def test_canonical_round_trip(self):
        expr = parse_expression("((1+2)*(3+5))")
        assert render(expr) == "((1+2)*(3+5))"

    def test_operator_spellings(self):
        for text in ["2×3", "2*3", "2x3", "2 x 3"]:
            assert evaluate(parse_expression(text)) == 6
        for text in ["8÷4", "8/4"]:
            assert evaluate(parse_expression(text)) == 2
        assert evaluate(parse_expression("8−3")) == 5  # unicode minus

    def test_trailing_equals_24_stripped(self):
        expr = parse_expression("(8/(3-8/3)) = 24")
        assert evaluate(expr) == 24
        assert evaluate(parse_expression("4*6=24")) == 24

    def test_precedence_and_associativity(self):
        assert evaluate(parse_expression("2+3*4")) == 14
        assert evaluate(parse_expression("8-3-2")) == 3
        assert evaluate(parse_expression("12/2/3")) == 2

    def test_nested_parens(self):
        assert evaluate(parse_expression("((((7))))")) == 7

    def test_parse_error_carries_position(self):
        with pytest.raises(ParseError) as exc:
            parse_expression("1+*2")
        assert exc.value.position == 2

    def test_trailing_garbage_rejected(self):
        with pytest.raises(ParseError):
            parse_expression("1+2)")

    def test_empty_rejected(self):
        with pytest.raises(ParseError):
            parse_expression("   ")

    def test_out_of_range_leaf(self):
        with pytest.raises(OutOfRangeLeaf) as exc:
            parse_expression("14+1+2+3")
        assert exc.value.value == 14
        with pytest.raises(OutOfRangeLeaf):
            parse_expression("0+1")

    def test_leaves_in_range_accepted(self):
        assert leaves(parse_expression("1+13")) == [1, 13]


class TestEvaluate:
    def test_exact_fractions(self):
        assert evaluate(parse_expression("8/(3-8/3)")) == Fraction(24)
        assert evaluate(parse_expression("1/3")) == Fraction(1, 3)

    def test_division_by_zero_raises(self):
        with pytest.raises(DivisionByZero):
            evaluate(parse_expression("1/(2-2)"))

    def test_render_fully_parenthesized(self):
        expr = BinOp("*", BinOp("+", Leaf(1), Leaf(2)), Leaf(3))
        assert render(expr) == "((1+2)*3)"


class TestVerify:
    def test_classic_solution(self):
        p = Puzzle((3, 3, 8, 8))
        assert verify_solution(p, parse_expression("8/(3-8/3)"))

    def test_wrong_value_rejected(self):
        p = Puzzle((1, 2, 3, 4))
        assert not verify_solution(p, parse_expression("1+2+3+4"))

    def test_reordered_multiset_accepted(self):
        p = Puzzle((1, 2, 3, 4))
        assert verify_solution(p, parse_expression("4*3*2*1"))

    def test_wrong_multiset_rejected(self):
        p = Puzzle((1, 2, 3, 4))
        # evaluates to 24 but uses numbers not in the puzzle
        assert not verify_solution(p, parse_expression("6*4*1*1"))

    def test_division_by_zero_is_invalid_not_an_error(self):
        p = Puzzle((2, 2, 4, 6))
        assert verify_solution(p, parse_expression("6/(2-2)*4")) is False


class TestEnumerate:
    def test_solutions_all_verify(self):
        p = Puzzle((3, 3, 8, 8))
        sols = enumerate_solutions(p)
        assert sols
        for expr in sols:
            assert verify_solution(p, expr)

    def test_solution_leaves_match_puzzle(self):
        p = Puzzle((2, 3, 5, 12))
        for expr in enumerate_solutions(p):
            assert Counter(leaves(expr)) == Counter(p.numbers)

    def test_unsolvable_has_no_solutions(self):
        assert enumerate_solutions(Puzzle((1, 1, 1, 1))) == []
        assert not is_solvable(Puzzle((1, 1, 1, 1)))

    def test_easy_puzzles_solvable(self):
        for nums in [(1, 2, 3, 4), (2, 2, 6, 1), (4, 6, 1, 1), (13, 13, 1, 11)]:
            assert is_solvable(Puzzle(nums)), nums

    def test_agrees_with_reduction_oracle_on_sample(self):
        rng = random.Random(20240817)
        universe = all_puzzles()
        for p in rng.sample(universe, 60):
            assert is_solvable(p) == solvable_oracle(p.numbers), p


class TestCensusBasics:
    def test_universe_size(self):
        universe = all_puzzles()
        assert len(universe) == 1820
        assert len(set(universe)) == 1820


class TestGenerate:
    def test_deterministic_for_seed(self):
        a = generate_puzzles(25, seed=5)
        b = generate_puzzles(25, seed=5)
        assert a == b
        assert generate_puzzles(25, seed=6) != a

    def test_solvable_only(self):
        for p in generate_puzzles(30, seed=1, solvable_only=True):
            assert is_solvable(p)

    def test_no_duplicates_within_draw(self):
        drawn = generate_puzzles(200, seed=2)
        assert len(set(drawn)) == len(drawn)

    def test_pool_exhaustion(self):
        with pytest.raises(InsufficientPool):
            generate_puzzles(5000, seed=0)
