"""Prompt template catalog and renderer.

Templates live as plain-text golden files under templates/ with placeholders
{problem}, {draft1}..{draft4}, {strategy}, {final_answer},
{verification_reasoning_trace}, {clean_slate_reasoning_trace}. Rendering is a
literal placeholder substitution — bound values are inserted verbatim (brace
and backslash safe), and the output is byte-identical to the golden file
outside the placeholder sites.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

_TEMPLATE_DIR = Path(__file__).parent / "templates"

TEMPLATE_IDS = (
    "direct",
    "one_f",
    "two_f",
    "pos_1f",
    "ver_single",
    "external_error_1f",
    "one_f_no_reuse",
    "revise_step",
    "revise_solve",
    "filter_strategy",
    "filter_filter",
    "filter_solve",
    "verify_training",
    "sft_trace_correct",
    "sft_trace_incorrect",
)

PLACEHOLDER_RE = re.compile(
    r"\{(problem|draft[1-4]|strategy|final_answer|"
    r"verification_reasoning_trace|clean_slate_reasoning_trace)\}"
)


class TemplateError(Exception):
    pass


class UnknownTemplate(TemplateError):
    pass


class MissingBinding(TemplateError):
    def __init__(self, name: str):
        super().__init__(f"no value bound for placeholder {{{name}}}")
        self.name = name


class ArityMismatch(TemplateError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"template takes {expected} draft(s), got {got}")
        self.expected = expected
        self.got = got


@dataclass
class PromptBindings:
    problem: str | None = None
    drafts: Sequence[str] = field(default_factory=tuple)
    strategy: str | None = None
    final_answer: str | None = None
    verification_trace: str | None = None
    clean_slate_trace: str | None = None


@lru_cache(maxsize=None)
def load_template(template_id: str) -> str:
    """Golden template text, LF-normalized."""
    if template_id not in TEMPLATE_IDS:
        raise UnknownTemplate(f"unknown template id {template_id!r}")
    raw = (_TEMPLATE_DIR / f"{template_id}.txt").read_text(encoding="utf-8")
    return raw.replace("\r\n", "\n")


def template_placeholders(template_id: str) -> list[str]:
    return PLACEHOLDER_RE.findall(load_template(template_id))


def draft_arity(template_id: str) -> int:
    return sum(1 for p in template_placeholders(template_id) if p.startswith("draft"))


def _binding_value(name: str, b: PromptBindings) -> str | None:
    if name.startswith("draft"):
        return b.drafts[int(name[5:]) - 1]
    return {
        "problem": b.problem,
        "strategy": b.strategy,
        "final_answer": b.final_answer,
        "verification_reasoning_trace": b.verification_trace,
        "clean_slate_reasoning_trace": b.clean_slate_trace,
    }[name]


def render_text(template_text: str, bindings: PromptBindings) -> str:
    """Substitute placeholders in raw template text (drafts arity-checked)."""
    arity = sum(1 for p in PLACEHOLDER_RE.findall(template_text) if p.startswith("draft"))
    if len(bindings.drafts) != arity:
        raise ArityMismatch(arity, len(bindings.drafts))

    def sub(m: re.Match) -> str:
        value = _binding_value(m.group(1), bindings)
        if value is None:
            raise MissingBinding(m.group(1))
        return value

    return PLACEHOLDER_RE.sub(sub, template_text)


def render(template_id: str, bindings: PromptBindings) -> str:
    return render_text(load_template(template_id), bindings)


# --- programmatic k-draft generalizations ------------------------------------

_NUM_WORDS = {2: "two", 3: "three", 4: "four"}
_ORDINALS = {1: "first", 2: "second", 3: "third", 4: "fourth"}


def _solution_listing(k: int) -> str:
    names = [f"Solution {i}" for i in range(1, k + 1)]
    return ", ".join(names[:-1]) + " and " + names[-1]


def _draft_blocks(k: int) -> str:
    blocks = []
    for i in range(1, k + 1):
        o = _ORDINALS[i]
        blocks.append(
            f"### Solution {i}:\n"
            f"-- beginning of the {o} draft --\n"
            f"{{draft{i}}}\n"
            f"-- end of the {o} draft --"
        )
    return "\n\n".join(blocks)


def multi_draft_template(k: int) -> str:
    """Raw k-draft evaluation template; k=1/k=2 are the golden texts."""
    if not 1 <= k <= 4:
        raise ValueError(f"draft count must be in [1, 4], got {k}")
    if k == 1:
        return load_template("one_f")
    if k == 2:
        return load_template("two_f")
    word = _NUM_WORDS[k]
    quantifier = "both" if k == 2 else "all"
    verdict_lines = "\n".join(
        f"<overall_verdict_{i}>[Correct / Incorrect]</overall_verdict_{i}>"
        for i in range(1, k + 1)
    )
    return (
        f"In this task, you will be provided with a problem and {word} draft solutions to "
        "that problem. For each draft, walk through the solution step-by-step and check for "
        "any fatal mistakes in the reasoning (for example: incorrect use of theorems or "
        "facts, incorrect calculations, etc.). Please note that once you spot a fatal error "
        "in a draft's reasoning, you **MUST** stop checking the remaining steps of that "
        "draft and move on to the next draft.\n"
        "\n"
        f"For each draft ({_solution_listing(k)}), output an overall verdict on the "
        "correctness of the draft using the following tag format:\n"
        "\n"
        f"{verdict_lines}\n"
        "\n"
        "While evaluating individual steps, be strict about algebra, logic, and correct "
        f"theorem application. If {quantifier} drafts are incorrect, write a complete, "
        "correct solution (you may reuse sound ideas from the drafts). If a draft is "
        "correct, you may adopt and polish it as the final solution.\n"
        "\n"
        "Conclude by presenting the final answer only inside \\boxed{} (i.e., the final "
        "answer should appear only inside a LaTeX `\\boxed{}`).\n"
        "\n"
        "The problem is as follows:\n"
        "-- beginning of problem --\n"
        "{problem}\n"
        "-- end of problem --\n"
        "\n"
        f"Here are the {word} draft solutions you need to consider:\n"
        "\n"
        f"{_draft_blocks(k)}\n"
        "\n"
        "Please:\n"
        f"1. Carefully evaluate the {word} draft solutions step-by-step. Once you spot a "
        "fatal error in a draft's reasoning, you **MUST** stop checking the remaining "
        "steps of that draft and move on to the next draft.\n"
        "2. Output the correctness verdicts for the drafts, respectively.\n"
        "3. Provide a correct solution to the problem with complete reasoning steps that "
        "lead to the answer.\n"
        "\n"
        "Remember: conclude with the final answer only in \\boxed{}."
    )


def render_multi_draft(k: int, correctness_slots: Sequence[bool],
                       bindings: PromptBindings) -> str:
    """Render the k-draft template; correctness_slots documents the T/F pattern."""
    if not 1 <= k <= 4:
        raise ValueError(f"draft count must be in [1, 4], got {k}")
    if len(correctness_slots) != k:
        raise ValueError(f"correctness_slots has {len(correctness_slots)} entries for k={k}")
    return render_text(multi_draft_template(k), bindings)


def solve_step_template(k: int) -> str:
    """Solve-without-verdict template used by denoising (and the VER ablation)."""
    if not 1 <= k <= 4:
        raise ValueError(f"draft count must be in [1, 4], got {k}")
    if k == 1:
        return load_template("ver_single")
    word = _NUM_WORDS[k]
    quantifier = "both" if k == 2 else "all"
    return (
        f"In this task, you will be provided with a problem and {word} draft solutions to "
        f"that problem. If {quantifier} drafts are incorrect, write a complete, correct "
        "solution (you may reuse sound ideas from the drafts). If a draft is correct, you "
        "may adopt and polish it as the final solution.\n"
        "\n"
        "Conclude by presenting the final answer only inside \\boxed{} (i.e., the final "
        "answer should appear only inside a LaTeX `\\boxed{}`).\n"
        "\n"
        "The problem is as follows:\n"
        "-- beginning of problem --\n"
        "{problem}\n"
        "-- end of problem --\n"
        "\n"
        f"Here are the {word} draft solutions you need to consider:\n"
        "\n"
        f"{_draft_blocks(k)}\n"
        "\n"
        "Please provide a correct solution to the problem with complete reasoning steps "
        "that lead to the answer.\n"
        "\n"
        "Remember: conclude with the final answer only in \\boxed{}."
    )


# Channel markers used by the trace-synthesis templates.
ANALYSIS_MARKER = "<|channel|>analysis<|message|>"
FINAL_MARKER = "<|end|><|start|>assistant<|channel|>final<|message|>"


def neutralize_markers(text: str) -> str:
    """Swap model-family channel markers for plain REASONING:/FINAL: markers."""
    return text.replace(ANALYSIS_MARKER, "REASONING: ").replace(FINAL_MARKER, "FINAL: ")
