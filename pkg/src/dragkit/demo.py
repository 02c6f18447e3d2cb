"""A fully deterministic scripted model for demos, fixtures, and tests.

The responder recognizes each prompt family by its instruction text, solves
the toy problems embedded in the demo bank (small sums and Game-of-24
puzzles), and emits realistic response shapes: think blocks, verdict tags,
boxed answers, occasional wrong answers, and occasional unextractable
responses. Everything is keyed on SHA-256 of (model, prompt, sample index),
so any run against it replays byte-identically.
"""

from __future__ import annotations

import hashlib
import re
from typing import Mapping, Sequence

from . import game24
from .backend import Backend
from .parsing import extract_boxed, UnbalancedBraces
from .pipeline import (Draft, EvalSetting, filter_reasonably_hard,
                       GenerationRecord, iterative_refine, Question,
                       QuestionBank, run_conditioned, run_denoise, run_direct)

_MATH_RE = re.compile(r"Compute (\d+)\+(\d+)\.")
_G24_RE = re.compile(r"Use the numbers (\d+), (\d+), (\d+) and (\d+)")
_DRAFT_BLOCK_RE = re.compile(
    r"-- beginning of [^\n]*draft[^\n]* --\n(.*?)\n-- end of", re.DOTALL)
_PROBLEM_BLOCK_RE = re.compile(
    r"-- beginning of (?:problem|question) --\n(.*?)\n-- end of", re.DOTALL)


def _hash(model: str, prompt: str, index: int) -> int:
    blob = f"{model}\x1f{prompt}\x1f{index}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def _extract_problem(prompt: str) -> str:
    if " Let's think step by step" in prompt:
        return prompt.split(" Let's think step by step", 1)[0]
    m = _PROBLEM_BLOCK_RE.search(prompt)
    if m is None:
        raise ValueError("scripted model could not locate the problem in the prompt")
    return m.group(1).strip()


def _extract_drafts(prompt: str) -> list[str]:
    return [m.strip() for m in _DRAFT_BLOCK_RE.findall(prompt)]


def _boxed_of(text: str) -> str | None:
    try:
        return extract_boxed(text)
    except UnbalancedBraces:
        return None


def _is_draft_correct(problem: str, draft: str) -> bool:
    boxed = _boxed_of(draft)
    if boxed is None:
        return False
    m = _MATH_RE.search(problem)
    if m:
        return boxed.strip() == str(int(m.group(1)) + int(m.group(2)))
    m = _G24_RE.search(problem)
    if m:
        puzzle = game24.Puzzle(tuple(int(g) for g in m.groups()))
        try:
            return game24.verify_solution(puzzle, game24.parse_expression(boxed))
        except game24.ParseError:
            return False
    return False


def _wrong_game24_expr(numbers: Sequence[int]) -> str:
    a, b, c, d = numbers
    candidates = [f"{a}+{b}+{c}+{d}", f"{a}*{b}-{c}-{d}", f"{a}+{b}+{c}-{d}",
                  f"({a}+{b})*({c}+{d})"]
    for cand in candidates:
        expr = game24.parse_expression(cand)
        try:
            if game24.evaluate(expr) != game24.TARGET:
                return game24.render(expr)
        except game24.DivisionByZero:
            continue
    return game24.render(game24.parse_expression(candidates[0]))


def _solve_text(problem: str, h: int) -> str:
    """A solve-family response body (no verdicts): think block plus answer."""
    bucket = h % 8
    m = _MATH_RE.search(problem)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        if bucket == 0:
            return ("<think>The sum is hard to pin down here.</think>"
                    "I could not settle on a final value for this sum.")
        if bucket in (1, 2):
            value = a + b + 1 + h % 3
            return (f"<think>Adding {a} and {b}, carrying quickly.</think>"
                    f"Adding the two terms gives {value}.\n"
                    f"The answer is \\boxed{{{value}}}.")
        return (f"<think>Adding {a} and {b} digit by digit.</think>"
                f"We compute {a}+{b} step by step.\n"
                f"The answer is \\boxed{{{a + b}}}.")
    m = _G24_RE.search(problem)
    if m:
        numbers = tuple(int(g) for g in m.groups())
        puzzle = game24.Puzzle(numbers)
        if bucket == 0:
            return ("<think>None of the pairings seem to work.</think>"
                    "I tried several combinations but could not commit to one.")
        if bucket in (1, 2):
            expr = _wrong_game24_expr(numbers)
            return (f"<think>Trying a simple combination first.</think>"
                    f"Combining the numbers directly:\n\\boxed{{{expr}}}")
        expr = game24.render(game24.enumerate_solutions(puzzle)[0])
        return (f"<think>Searching pairings until one hits 24.</think>"
                f"The following expression works:\n\\boxed{{{expr}}}")
    raise ValueError(f"scripted model does not know this problem: {problem!r}")


def _verdict_lines(problem: str, drafts: Sequence[str], h: int) -> str:
    lines = []
    for i, draft in enumerate(drafts, start=1):
        verdict = "Correct" if _is_draft_correct(problem, draft) else "Incorrect"
        if (h >> i) % 16 == 0:  # occasional misjudgement
            verdict = "Incorrect" if verdict == "Correct" else "Correct"
        if len(drafts) == 1:
            lines.append(f"<overall_verdict>{verdict}</overall_verdict>")
        else:
            lines.append(f"<overall_verdict_{i}>{verdict}</overall_verdict_{i}>")
    return "\n".join(lines)


def demo_responder(model: str, prompt: str, index: int) -> str:
    """Deterministic text for any prompt the toolkit can produce."""
    h = _hash(model, prompt, index)
    if "**NOT to solve the problem**" in prompt:
        return ("<think>Outlining without solving.</think>"
                "1. Identify the quantities involved.\n"
                "2. Combine them with elementary operations.\n"
                "3. Compare the result with the requested target.\n"
                "Checklist: every given number used, arithmetic double-checked.")
    if "Your task is to revise the draft" in prompt:
        problem = _extract_problem(prompt)
        draft = _extract_drafts(prompt)[0]
        if _is_draft_correct(problem, draft):
            return f"<think>The draft already holds up.</think>{draft}"
        solved = _solve_text(problem, h // 8 * 8 + 3)  # force the correct bucket
        return f"<think>Rewriting the flawed draft.</think>{solved.split('</think>', 1)[1]}"
    if "identify the useful components" in prompt:
        return ("<think>Selecting the salvageable steps.</think>"
                "1. Reading off the given values — matches the strategy's first step.\n"
                "2. Setting up the combination of the values — aligns with the plan.")
    if "**DO NOT ATTEMPT TO RESOLVE THE QUESTION**" in prompt:
        problem = _extract_problem(prompt)
        draft = _extract_drafts(prompt)[0]
        correct = _is_draft_correct(problem, draft)
        if h % 8 == 0:  # occasional misjudgement, rejected by curation
            correct = not correct
        verdict = "Correct" if correct else "Incorrect"
        fix = "No fix needed." if correct else "Recompute the final combination."
        return ("<think>Walking the draft line by line.</think>"
                "I walk through the draft sequentially and check each step against "
                "the problem statement. The setup reads the given values correctly, "
                "and the final combination is the step that decides the verdict.\n\n"
                f"<overall_verdict>{verdict}</overall_verdict>\n\n"
                "<overall_confidence>High</overall_confidence>\n\n"
                f"<fix>{fix}</fix>")
    # Solve-family prompts: clean-slate or draft-conditioned.
    problem = _extract_problem(prompt)
    drafts = _extract_drafts(prompt)
    body = _solve_text(problem, h)
    if drafts and "output an overall verdict" in prompt:
        think, rest = body.split("</think>", 1)
        return (f"{think}</think>{_verdict_lines(problem, drafts, h)}\n\n{rest}")
    return body


def degrading_responder(model: str, prompt: str, index: int) -> str:
    """A scripted refinement pathology: clean-slate answers are right, but
    every pass over a previous draft replaces its answer with a new wrong one."""
    drafts = _extract_drafts(prompt)
    if not drafts:
        return "<think>Direct solve.</think>The answer is \\boxed{1}."
    previous = _boxed_of(drafts[0])
    nxt = {"1": "3", "3": "4", "4": "5"}.get(previous or "", "5")
    return ("<think>Re-examining the draft.</think>"
            "<overall_verdict>Incorrect</overall_verdict>\n"
            f"On reflection the draft is off. The answer is \\boxed{{{nxt}}}.")


# --- demo worlds --------------------------------------------------------------

def build_demo_bank(n_math: int = 8, n_game24: int = 2, seed: int = 7) -> QuestionBank:
    """Toy questions the scripted model knows how to solve."""
    questions = []
    for i in range(n_math):
        a, b = 11 + 3 * i, 7 + 2 * i
        questions.append(Question(f"math-{i:03d}", f"Compute {a}+{b}.",
                                  str(a + b), "math", source=f"src{i % 3}"))
    for i, puzzle in enumerate(game24.generate_puzzles(n_game24, seed=seed,
                                                       solvable_only=True)):
        a, b, c, d = puzzle.numbers
        questions.append(Question(
            f"g24-{i:03d}",
            f"Use the numbers {a}, {b}, {c} and {d} exactly once with + - * / "
            "and parentheses to make 24.",
            str(puzzle), "game24", source="game24"))
    return QuestionBank(questions)


def records_to_drafts(records: Sequence[GenerationRecord]) -> list[Draft]:
    """Reuse clean-slate generations as a draft pool."""
    out = []
    for r in records:
        if r.excluded_reason is not None:
            continue
        reason = "unextractable_answer" if r.extracted_answer is None else None
        out.append(Draft(r.question_id, r.model, r.sample_index, r.raw_text,
                         r.extracted_answer, r.is_correct, reason))
    return out


DEMO_DRAFT_MODELS = ("demo-alpha", "demo-beta")
DEMO_EVAL_MODEL = "demo-alpha"


def run_demo_suite(bank: QuestionBank, backend: Backend, *, n_samples: int = 4,
                   seed: int = 0, max_in_flight: int = 4
                   ) -> dict[str, list[GenerationRecord]]:
    """The full pipeline against a (scripted or replayed) backend: clean-slate
    runs for two models, pooled-draft construction, the reasonably-hard filter,
    one- and two-draft conditioned runs, refinement, and both denoising chains.

    Returns records keyed by setting label; insertion order is the run order.
    """
    out: dict[str, list[GenerationRecord]] = {}
    direct_all: list[GenerationRecord] = []
    for model in DEMO_DRAFT_MODELS:
        recs = run_direct(bank, model, backend, n_samples=n_samples,
                          max_in_flight=max_in_flight)
        out[f"direct/{model}"] = recs
        direct_all.extend(recs)
    work = QuestionBank(bank.questions)
    work.add_drafts(records_to_drafts(direct_all))
    hard = filter_reasonably_hard(work, direct_all)

    model = DEMO_EVAL_MODEL
    out["1F"] = run_conditioned(hard, model, EvalSetting("conditioned", (False,)),
                                backend, seed=seed, n_samples=n_samples,
                                max_in_flight=max_in_flight)
    out["2F"] = run_conditioned(hard, model,
                                EvalSetting("conditioned", (False, False)),
                                backend, seed=seed, n_samples=n_samples,
                                max_in_flight=max_in_flight)
    out["refine"] = iterative_refine(hard, model, backend, iterations=3,
                                     trajectories=2, seed=seed,
                                     max_in_flight=max_in_flight)
    out["revise"] = run_denoise(hard, model, "revise", backend, seed=seed,
                                n_samples=2, max_in_flight=max_in_flight)
    out["filter"] = run_denoise(hard, model, "filter", backend, seed=seed,
                                n_samples=2, max_in_flight=max_in_flight)
    return out


def demo_hard_bank(bank: QuestionBank,
                   suite: Mapping[str, Sequence[GenerationRecord]]) -> QuestionBank:
    """Rebuild the pooled/filtered bank a suite run was evaluated on."""
    direct_all = [r for label, recs in suite.items()
                  if label.startswith("direct/") for r in recs]
    work = QuestionBank(bank.questions)
    work.add_drafts(records_to_drafts(direct_all))
    return filter_reasonably_hard(work, direct_all)


# --- training-data demo world -------------------------------------------------

def build_sft_world(n_questions: int = 50, seed: int = 3) -> QuestionBank:
    """Questions with one correct and one incorrect manufactured draft each."""
    questions, pools = [], {}
    for i in range(n_questions):
        a, b = 20 + 5 * i + seed, 9 + 4 * i
        qid = f"sft-{i:03d}"
        gold = a + b
        questions.append(Question(qid, f"Compute {a}+{b}.", str(gold), "math",
                                  source=f"src{i % 3}"))
        good = (f"I line up the terms and add.\n{a}+{b} = {gold}.\n"
                f"The answer is \\boxed{{{gold}}}.")
        bad = (f"I line up the terms but drop a carry.\n{a}+{b} = {gold + 1}.\n"
               f"The answer is \\boxed{{{gold + 1}}}.")
        pools[qid] = [Draft(qid, "demo-draft", 0, good, str(gold), True),
                      Draft(qid, "demo-draft", 1, bad, str(gold + 1), False)]
    return QuestionBank(questions, pools)
