"""Response parsing: think-span stripping, boxed-answer extraction, verdict tags,
and answer normalization/equality.

The normalizer is deliberately restricted: integers, a/b fractions,
\\frac{a}{b}, and terminating decimals become reduced rationals; everything
else is compared as a whitespace-collapsed symbolic string.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from . import game24

THINK_OPEN = "<think>"
_THINK_SPAN = re.compile(r"<think>.*?</think>", re.DOTALL)

VERDICT_CORRECT = "Correct"
VERDICT_INCORRECT = "Incorrect"
VERDICT_MISSING = "Missing"


class UnbalancedBraces(ValueError):
    pass


def strip_think(text: str) -> str:
    """Remove every <think>...</think> span; an unmatched opener removes to the end."""
    out = _THINK_SPAN.sub("", text)
    cut = out.find(THINK_OPEN)
    if cut != -1:
        out = out[:cut]
    return out


def extract_boxed(text: str) -> str | None:
    r"""Content of the last \boxed{...}, honoring nested braces.

    Returns None when no \boxed{ occurs; raises UnbalancedBraces when the last
    one opens but never balances.
    """
    marker = r"\boxed{"
    start = text.rfind(marker)
    if start == -1:
        return None
    depth = 1
    i = start + len(marker)
    while i < len(text):
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start + len(marker):i]
        i += 1
    raise UnbalancedBraces(f"\\boxed{{ at index {start} never closes")


@dataclass(frozen=True)
class Verdict:
    value: str  # Correct | Incorrect | Missing
    index: int  # 1-based draft index


def _verdict_pattern(suffix: str) -> re.Pattern:
    return re.compile(
        rf"<overall_verdict{suffix}>\s*(correct|incorrect)\s*</overall_verdict{suffix}>",
        re.IGNORECASE,
    )


def parse_verdicts(text: str, n_drafts: int) -> list[Verdict]:
    """Per-draft verdicts from <overall_verdict> (n=1) or <overall_verdict_i> tags.

    Case-insensitive on the Correct/Incorrect token, whitespace tolerated; a
    missing or malformed tag yields Missing. The last occurrence wins.
    """
    if n_drafts < 1:
        raise ValueError("n_drafts must be >= 1")
    out = []
    for i in range(1, n_drafts + 1):
        suffix = "" if n_drafts == 1 else f"_{i}"
        matches = _verdict_pattern(suffix).findall(text)
        value = matches[-1].capitalize() if matches else VERDICT_MISSING
        out.append(Verdict(value, i))
    return out


# --- answer normalization ----------------------------------------------------

_INT = re.compile(r"^[+-]?\d+$")
_SLASH_FRAC = re.compile(r"^([+-]?\d+)\s*/\s*(\d+)$")
_TEX_FRAC = re.compile(r"^([+-]?)\\[dt]?frac\{([+-]?\d+)\}\{(\d+)\}$")
_DECIMAL = re.compile(r"^[+-]?(\d+\.\d*|\.\d+)$")
_WRAPPER = re.compile(r"^\\(?:text|mathrm)\{(.*)\}$", re.DOTALL)
_MC_LETTER = re.compile(r"\b([A-J])\b")


@dataclass(frozen=True)
class NormalizedAnswer:
    kind: str  # rational | decimal-as-rational | symbolic-string
    canonical: str

    @property
    def is_rational(self) -> bool:
        return self.kind in ("rational", "decimal-as-rational")


def _strip_wrappers(s: str) -> str:
    s = s.strip()
    while len(s) >= 2 and s.startswith("$") and s.endswith("$"):
        s = s[1:-1].strip()
    while True:
        m = _WRAPPER.match(s)
        if not m:
            return s
        s = m.group(1).strip()


def normalize_answer(text: str) -> NormalizedAnswer:
    s = _strip_wrappers(text)
    if _INT.match(s):
        return NormalizedAnswer("rational", str(Fraction(int(s))))
    m = _SLASH_FRAC.match(s)
    if m and int(m.group(2)) != 0:
        return NormalizedAnswer("rational", str(Fraction(int(m.group(1)), int(m.group(2)))))
    m = _TEX_FRAC.match(s)
    if m and int(m.group(3)) != 0:
        sign = -1 if m.group(1) == "-" else 1
        return NormalizedAnswer("rational", str(sign * Fraction(int(m.group(2)), int(m.group(3)))))
    if _DECIMAL.match(s):
        return NormalizedAnswer("decimal-as-rational", str(Fraction(s)))
    return NormalizedAnswer("symbolic-string", " ".join(s.split()))


def answers_equal(a: str, b: str) -> bool:
    """Equality under the restricted normalizer (rationals by value)."""
    na, nb = normalize_answer(a), normalize_answer(b)
    if na.is_rational and nb.is_rational:
        return na.canonical == nb.canonical
    if na.is_rational or nb.is_rational:
        return False
    return na.canonical == nb.canonical


def mc_letter(text: str) -> str | None:
    """First standalone A-J letter, for multiple-choice grading."""
    m = _MC_LETTER.search(text)
    return m.group(1) if m else None


# --- Game-of-24 expression extraction ---------------------------------------

def _try_parse(text: str) -> game24.Expression | None:
    try:
        return game24.parse_expression(text)
    except game24.ParseError:
        return None


_EXPR_CHARS = re.compile(r"[0-9+\-−*×x/÷()=. ]{5,}")


def _operator_count(expr: game24.Expression) -> int:
    if isinstance(expr, game24.Leaf):
        return 0
    return 1 + _operator_count(expr.left) + _operator_count(expr.right)


def extract_game24_expression(text: str) -> game24.Expression | None:
    """Pull a candidate solution expression out of a model response.

    Prefers the last \\boxed{} content when it parses; otherwise scans lines
    bottom-up for the last parseable span with at least three operators.
    """
    stripped = strip_think(text)
    try:
        boxed = extract_boxed(stripped)
    except UnbalancedBraces:
        boxed = None
    if boxed is not None:
        expr = _try_parse(boxed)
        if expr is not None:
            return expr
    for line in reversed(stripped.splitlines()):
        candidates = [line] + _EXPR_CHARS.findall(line)
        for cand in candidates:
            expr = _try_parse(cand.strip().rstrip("."))
            if expr is not None and _operator_count(expr) >= 3:
                return expr
    return None
