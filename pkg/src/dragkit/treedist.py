"""Ordered labeled tree edit distance (Zhang-Shasha) over expression trees.

Trees are stored as postorder label sequences with leftmost-leaf indices and
keyroots, which is the representation the Zhang-Shasha dynamic program runs
on directly. Unit costs by default; costs are configurable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .game24 import BinOp, Expression, Leaf


class EmptyDraftSet(ValueError):
    pass


@dataclass(frozen=True)
class EditCosts:
    insert: int = 1
    delete: int = 1
    relabel: int = 1

    def __post_init__(self):
        if min(self.insert, self.delete, self.relabel) < 0:
            raise ValueError("edit costs must be non-negative")


@dataclass(frozen=True)
class LabeledTree:
    """Postorder labels, leftmost-leaf index per node, and keyroot indices."""

    nodes: tuple[str, ...]
    lml: tuple[int, ...]
    keyroots: tuple[int, ...]


def _keyroots(lml: Sequence[int]) -> tuple[int, ...]:
    # i is a keyroot iff no j > i shares its leftmost leaf.
    seen: set[int] = set()
    roots = []
    for i in range(len(lml) - 1, -1, -1):
        if lml[i] not in seen:
            roots.append(i)
            seen.add(lml[i])
    return tuple(sorted(roots))


def from_nested(root) -> LabeledTree:
    """Build from nested (label, [children]) tuples."""
    nodes: list[str] = []
    lml: list[int] = []

    def walk(item) -> int:
        label, children = item
        child_idxs = [walk(c) for c in children]
        i = len(nodes)
        nodes.append(str(label))
        lml.append(lml[child_idxs[0]] if child_idxs else i)
        return i

    walk(root)
    return LabeledTree(tuple(nodes), tuple(lml), _keyroots(lml))


def _expr_to_nested(expr: Expression):
    if isinstance(expr, Leaf):
        return (str(expr.value), [])
    return (expr.op, [_expr_to_nested(expr.left), _expr_to_nested(expr.right)])


def to_labeled_tree(expr: Expression) -> LabeledTree:
    """Postorder labeling of an expression tree (leaves as decimal strings)."""
    return from_nested(_expr_to_nested(expr))


def _as_tree(t) -> LabeledTree:
    if isinstance(t, LabeledTree):
        return t
    return to_labeled_tree(t)


def tree_edit_distance(a, b, costs: EditCosts | None = None) -> int:
    """Zhang-Shasha edit distance between two ordered labeled trees.

    Accepts LabeledTree or Expression arguments.
    """
    costs = costs or EditCosts()
    ta, tb = _as_tree(a), _as_tree(b)
    m, n = len(ta.nodes), len(tb.nodes)
    if m == 0 or n == 0:
        raise ValueError("trees must be non-empty")
    td = [[0] * n for _ in range(m)]
    for i in ta.keyroots:
        for j in tb.keyroots:
            _treedist(i, j, ta, tb, td, costs)
    return td[m - 1][n - 1]


def _treedist(i: int, j: int, ta: LabeledTree, tb: LabeledTree,
              td: list[list[int]], c: EditCosts) -> None:
    al, bl = ta.lml, tb.lml
    ioff, joff = al[i], bl[j]
    m = i - ioff + 2
    n = j - joff + 2
    fd = [[0] * n for _ in range(m)]
    for x in range(1, m):
        fd[x][0] = fd[x - 1][0] + c.delete
    for y in range(1, n):
        fd[0][y] = fd[0][y - 1] + c.insert
    for x in range(1, m):
        ni = x + ioff - 1
        for y in range(1, n):
            nj = y + joff - 1
            if al[ni] == ioff and bl[nj] == joff:
                rcost = 0 if ta.nodes[ni] == tb.nodes[nj] else c.relabel
                fd[x][y] = min(fd[x - 1][y] + c.delete,
                               fd[x][y - 1] + c.insert,
                               fd[x - 1][y - 1] + rcost)
                td[ni][nj] = fd[x][y]
            else:
                p = al[ni] - ioff
                q = bl[nj] - joff
                fd[x][y] = min(fd[x - 1][y] + c.delete,
                               fd[x][y - 1] + c.insert,
                               fd[p][q] + td[ni][nj])


def ted_min(generation, drafts: Iterable, costs: EditCosts | None = None) -> int:
    """Minimum edit distance from a generation to any draft in the set."""
    drafts = list(drafts)
    if not drafts:
        raise EmptyDraftSet("need at least one draft")
    return min(tree_edit_distance(generation, d, costs) for d in drafts)
