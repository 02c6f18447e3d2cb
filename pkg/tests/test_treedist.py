"""Tree edit distance: construction, the DP itself against a brute-force
mapping oracle, cost configurations, and the draft-set minimum."""

import random

import pytest

from dragkit.game24 import parse_expression
from dragkit.treedist import (EditCosts, EmptyDraftSet, from_nested,
                              LabeledTree, ted_min, to_labeled_tree,
                              tree_edit_distance)
from oracles import random_expression, random_tree, ted_oracle


class TestConstruction:
    def test_postorder_layout(self):
        tree = to_labeled_tree(parse_expression("(1+2)*3"))
        assert tree.nodes == ("1", "2", "+", "3", "*")
        assert tree.lml == (0, 1, 0, 3, 0)
        assert tree.keyroots == (1, 3, 4)

    def test_single_node(self):
        tree = from_nested(("x", []))
        assert tree.nodes == ("x",)
        assert tree.lml == (0,)
        assert tree.keyroots == (0,)

    def test_three_children(self):
        tree = from_nested(("r", [("a", []), ("b", []), ("c", [])]))
        assert tree.nodes == ("a", "b", "c", "r")
        assert tree.lml == (0, 1, 2, 0)
        assert tree.keyroots == (1, 2, 3)

    def test_expression_inputs_accepted_directly(self):
        e1 = parse_expression("1+2")
        e2 = parse_expression("1+3")
        assert tree_edit_distance(e1, e2) == 1


class TestCosts:
    def test_defaults_are_unit(self):
        c = EditCosts()
        assert (c.insert, c.delete, c.relabel) == (1, 1, 1)

    def test_negative_costs_rejected(self):
        with pytest.raises(ValueError):
            EditCosts(insert=-1)


class TestDistance:
    def test_identical_trees(self):
        t = to_labeled_tree(parse_expression("(1+2)*(3+4)"))
        assert tree_edit_distance(t, t) == 0

    def test_single_relabel(self):
        a = to_labeled_tree(parse_expression("(1+2)*3"))
        b = to_labeled_tree(parse_expression("(1+2)*4"))
        assert tree_edit_distance(a, b) == 1

    def test_operator_relabel(self):
        a = to_labeled_tree(parse_expression("1+2"))
        b = to_labeled_tree(parse_expression("1*2"))
        assert tree_edit_distance(a, b) == 1

    def test_pure_insertions(self):
        small = from_nested(("a", []))
        big = from_nested(("a", [("b", []), ("c", [])]))
        assert tree_edit_distance(small, big) == 2
        assert tree_edit_distance(big, small) == 2

    def test_expensive_relabel_prefers_delete_insert(self):
        a = from_nested(("a", []))
        b = from_nested(("b", []))
        costs = EditCosts(relabel=5)
        assert tree_edit_distance(a, b, costs) == 2

    def test_relabel_cost_applied(self):
        a = from_nested(("a", []))
        b = from_nested(("b", []))
        assert tree_edit_distance(a, b, EditCosts(relabel=2)) == 2
        assert tree_edit_distance(a, b) == 1


class TestAgainstOracle:
    def test_random_small_trees(self):
        rng = random.Random(424242)
        for _ in range(150):
            a = random_tree(rng, 6)
            b = random_tree(rng, 6)
            assert tree_edit_distance(a, b) == ted_oracle(a, b), (a, b)

    def test_random_trees_with_custom_costs(self):
        rng = random.Random(99)
        costs = EditCosts(insert=2, delete=3, relabel=1)
        for _ in range(60):
            a = random_tree(rng, 5)
            b = random_tree(rng, 5)
            assert tree_edit_distance(a, b, costs) == ted_oracle(a, b, costs)

    def test_random_expressions(self):
        rng = random.Random(7)
        for _ in range(40):
            a = to_labeled_tree(random_expression(rng))
            b = to_labeled_tree(random_expression(rng))
            assert tree_edit_distance(a, b) == ted_oracle(a, b)


class TestMetricAxioms:
    def test_axioms_on_random_triples(self):
        rng = random.Random(31337)
        for _ in range(60):
            a = random_tree(rng, 6)
            b = random_tree(rng, 6)
            c = random_tree(rng, 6)
            dab = tree_edit_distance(a, b)
            dba = tree_edit_distance(b, a)
            dac = tree_edit_distance(a, c)
            dcb = tree_edit_distance(c, b)
            assert dab == dba
            assert dab >= 0
            assert tree_edit_distance(a, a) == 0
            assert dab <= dac + dcb

    def test_zero_iff_identical(self):
        rng = random.Random(5)
        for _ in range(40):
            a = random_tree(rng, 5)
            b = random_tree(rng, 5)
            d = tree_edit_distance(a, b)
            if a.nodes == b.nodes and a.lml == b.lml:
                assert d == 0
            else:
                assert d > 0


class TestTedMin:
    def test_minimum_over_drafts(self):
        gen = parse_expression("(1+2)*(3+4)")
        drafts = [parse_expression("(1+2)*(3+5)"),  # distance 1
                  parse_expression("1+2+3+4"),
                  parse_expression("(1+2)*(3+4)")]  # distance 0
        assert ted_min(gen, drafts) == 0
        assert ted_min(gen, drafts[:2]) == 1

    def test_empty_draft_set(self):
        with pytest.raises(EmptyDraftSet):
            ted_min(parse_expression("1+2"), [])

    def test_equals_min_of_pairwise(self):
        rng = random.Random(11)
        for _ in range(25):
            gen = random_expression(rng)
            drafts = [random_expression(rng) for _ in range(4)]
            expected = min(tree_edit_distance(gen, d) for d in drafts)
            assert ted_min(gen, drafts) == expected
