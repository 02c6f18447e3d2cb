"""Game-of-24 puzzles: parsing, exact evaluation, verification, and brute-force solving.

All arithmetic is exact rational arithmetic, so division chains such as
8/(3-8/3) hit 24 with no epsilon tuning. A puzzle is a multiset of four
integers in [1, 13]; a solution is a binary expression tree that uses each
puzzle number exactly once and evaluates to exactly 24.
"""

from __future__ import annotations

import itertools
import random
import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Union

TARGET = Fraction(24)
MIN_VALUE = 1
MAX_VALUE = 13

# Operator spellings accepted on input, normalized to the four ASCII forms.
OP_ALIASES = {
    "+": "+",
    "-": "-",
    "−": "-",  # unicode minus
    "*": "*",
    "×": "*",  # multiplication sign
    "x": "*",
    "/": "/",
    "÷": "/",  # division sign
}
OPS = ("+", "-", "*", "/")

_TRAILING_24 = re.compile(r"\s*=\s*24\s*$")


class Game24Error(Exception):
    pass


class ParseError(Game24Error):
    """Raised when an expression string cannot be parsed."""

    def __init__(self, position: int, reason: str):
        super().__init__(f"parse error at index {position}: {reason}")
        self.position = position
        self.reason = reason


class OutOfRangeLeaf(ParseError):
    def __init__(self, position: int, value: int):
        super().__init__(position, f"leaf {value} outside [{MIN_VALUE}, {MAX_VALUE}]")
        self.value = value


class DivisionByZero(Game24Error):
    pass


class InsufficientPool(Game24Error):
    pass


@dataclass(frozen=True)
class Leaf:
    value: int


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


Expression = Union[Leaf, BinOp]


@dataclass(frozen=True)
class Puzzle:
    """A multiset of four integers in [1, 13], stored sorted ascending."""

    numbers: tuple[int, int, int, int]

    def __post_init__(self):
        nums = tuple(sorted(int(n) for n in self.numbers))
        if len(nums) != 4:
            raise ValueError(f"a puzzle needs exactly 4 numbers, got {len(nums)}")
        for n in nums:
            if not MIN_VALUE <= n <= MAX_VALUE:
                raise ValueError(f"puzzle number {n} outside [{MIN_VALUE}, {MAX_VALUE}]")
        object.__setattr__(self, "numbers", nums)

    @classmethod
    def parse(cls, text: str) -> "Puzzle":
        parts = [p for p in re.split(r"[\s,]+", text.strip()) if p]
        try:
            nums = tuple(int(p) for p in parts)
        except ValueError as exc:
            raise ValueError(f"cannot parse puzzle from {text!r}") from exc
        return cls(nums)  # type: ignore[arg-type]

    def __str__(self) -> str:
        return " ".join(str(n) for n in self.numbers)


class _Parser:
    """Recursive-descent parser for the expression grammar.

    expr   := term (('+'|'-') term)*
    term   := factor (mul-or-div factor)*
    factor := INT | '(' expr ')'

    Left-associative; accepts the spellings in OP_ALIASES.
    """

    def __init__(self, src: str):
        self.src = src
        self.pos = 0

    def skip_ws(self) -> None:
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str | None:
        self.skip_ws()
        if self.pos >= len(self.src):
            return None
        return self.src[self.pos]

    def expr(self) -> Expression:
        node = self.term()
        while True:
            ch = self.peek()
            if ch is not None and OP_ALIASES.get(ch) in ("+", "-"):
                self.pos += 1
                node = BinOp(OP_ALIASES[ch], node, self.term())
            else:
                return node

    def term(self) -> Expression:
        node = self.factor()
        while True:
            ch = self.peek()
            if ch is not None and OP_ALIASES.get(ch) in ("*", "/"):
                self.pos += 1
                node = BinOp(OP_ALIASES[ch], node, self.factor())
            else:
                return node

    def factor(self) -> Expression:
        ch = self.peek()
        if ch is None:
            raise ParseError(self.pos, "unexpected end of input")
        if ch == "(":
            self.pos += 1
            node = self.expr()
            if self.peek() != ")":
                raise ParseError(self.pos, "expected ')'")
            self.pos += 1
            return node
        if ch.isdigit():
            start = self.pos
            while self.pos < len(self.src) and self.src[self.pos].isdigit():
                self.pos += 1
            value = int(self.src[start:self.pos])
            if not MIN_VALUE <= value <= MAX_VALUE:
                raise OutOfRangeLeaf(start, value)
            return Leaf(value)
        raise ParseError(self.pos, f"expected integer or '(', got {ch!r}")


def parse_expression(text: str) -> Expression:
    """Parse an arithmetic expression; a trailing "= 24" is stripped first."""
    src = _TRAILING_24.sub("", text)
    if not src.strip():
        raise ParseError(0, "empty input")
    parser = _Parser(src)
    node = parser.expr()
    if parser.peek() is not None:
        raise ParseError(parser.pos, f"unexpected {parser.src[parser.pos]!r}")
    return node


def evaluate(expr: Expression) -> Fraction:
    """Exact value of an expression tree; raises DivisionByZero."""
    if isinstance(expr, Leaf):
        return Fraction(expr.value)
    left = evaluate(expr.left)
    right = evaluate(expr.right)
    if expr.op == "+":
        return left + right
    if expr.op == "-":
        return left - right
    if expr.op == "*":
        return left * right
    if right == 0:
        raise DivisionByZero(f"division by zero in {render(expr)}")
    return left / right


def render(expr: Expression) -> str:
    """Canonical fully parenthesized ASCII infix form, e.g. ((1+2)*(3+5))."""
    if isinstance(expr, Leaf):
        return str(expr.value)
    return f"({render(expr.left)}{expr.op}{render(expr.right)})"


def leaves(expr: Expression) -> list[int]:
    if isinstance(expr, Leaf):
        return [expr.value]
    return leaves(expr.left) + leaves(expr.right)


def verify_solution(puzzle: Puzzle, expr: Expression) -> bool:
    """True iff expr uses exactly the puzzle numbers and evaluates to 24."""
    if Counter(leaves(expr)) != Counter(puzzle.numbers):
        return False
    try:
        return evaluate(expr) == TARGET
    except DivisionByZero:
        return False


# --- brute-force enumeration -------------------------------------------------
#
# 5 binary tree shapes x distinct leaf orderings x 4^3 operator assignments,
# at most 5 * 24 * 64 = 7680 candidates. The inner loop works on raw
# (numerator, denominator) pairs for speed; expression objects are only built
# for candidates that hit 24.

_OP_TRIPLES = tuple(itertools.product(OPS, repeat=3))


def _apply(op: str, x, y):
    """Rational op on (num, den) pairs; None signals division by zero."""
    xn, xd = x
    yn, yd = y
    if op == "+":
        return (xn * yd + yn * xd, xd * yd)
    if op == "-":
        return (xn * yd - yn * xd, xd * yd)
    if op == "*":
        return (xn * yn, xd * yd)
    if yn == 0:
        return None
    return (xn * yd, xd * yn)


def _build(shape: int, perm: tuple[int, ...], ops: tuple[str, str, str]) -> Expression:
    a, b, c, d = (Leaf(n) for n in perm)
    p, q, r = ops
    if shape == 0:  # ((a p b) q c) r d
        return BinOp(r, BinOp(q, BinOp(p, a, b), c), d)
    if shape == 1:  # (a p (b q c)) r d
        return BinOp(r, BinOp(p, a, BinOp(q, b, c)), d)
    if shape == 2:  # (a p b) q (c r d)
        return BinOp(q, BinOp(p, a, b), BinOp(r, c, d))
    if shape == 3:  # a p ((b q c) r d)
        return BinOp(p, a, BinOp(r, BinOp(q, b, c), d))
    return BinOp(p, a, BinOp(q, b, BinOp(r, c, d)))  # a p (b q (c r d))


def _iter_solutions(puzzle: Puzzle) -> Iterator[Expression]:
    perms = tuple(dict.fromkeys(itertools.permutations(puzzle.numbers)))
    for shape in range(5):
        for perm in perms:
            a, b, c, d = ((n, 1) for n in perm)
            for p, q, r in _OP_TRIPLES:
                if shape == 0:
                    v = _apply(p, a, b)
                    if v is not None:
                        v = _apply(q, v, c)
                    if v is not None:
                        v = _apply(r, v, d)
                elif shape == 1:
                    v = _apply(q, b, c)
                    if v is not None:
                        v = _apply(p, a, v)
                    if v is not None:
                        v = _apply(r, v, d)
                elif shape == 2:
                    v = _apply(p, a, b)
                    if v is not None:
                        w = _apply(r, c, d)
                        v = _apply(q, v, w) if w is not None else None
                elif shape == 3:
                    v = _apply(q, b, c)
                    if v is not None:
                        v = _apply(r, v, d)
                    if v is not None:
                        v = _apply(p, a, v)
                else:
                    v = _apply(r, c, d)
                    if v is not None:
                        v = _apply(q, b, v)
                    if v is not None:
                        v = _apply(p, a, v)
                if v is not None and v[0] == 24 * v[1]:
                    yield _build(shape, perm, (p, q, r))


def enumerate_solutions(puzzle: Puzzle) -> list[Expression]:
    """All syntactically distinct solutions, in (shape, permutation, operator) order."""
    return list(_iter_solutions(puzzle))


@lru_cache(maxsize=4096)
def _solvable(numbers: tuple[int, int, int, int]) -> bool:
    return next(_iter_solutions(Puzzle(numbers)), None) is not None


def is_solvable(puzzle: Puzzle) -> bool:
    """True iff at least one expression over the puzzle reaches 24 (short-circuits)."""
    return _solvable(puzzle.numbers)


def all_puzzles() -> list[Puzzle]:
    """The 1820 multisets of four values in [1, 13], in sorted canonical order."""
    return [
        Puzzle(combo)  # type: ignore[arg-type]
        for combo in itertools.combinations_with_replacement(range(MIN_VALUE, MAX_VALUE + 1), 4)
    ]


def generate_puzzles(count: int, seed: int, solvable_only: bool = False) -> list[Puzzle]:
    """Deterministically sample distinct puzzles from the full pool."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    pool = all_puzzles()
    rng = random.Random(seed)
    order = list(range(len(pool)))
    rng.shuffle(order)
    out: list[Puzzle] = []
    for i in order:
        p = pool[i]
        if solvable_only and not is_solvable(p):
            continue
        out.append(p)
        if len(out) == count:
            return out
    raise InsufficientPool(f"requested {count} puzzles, pool holds only {len(out)}")
