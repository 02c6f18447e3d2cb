"""Toolkit for measuring how in-context draft solutions steer model reasoning:
draft-conditioned evaluation suites, Game-of-24 generation and verification,
tree-edit-distance analysis, and verification-trace training-data synthesis.
"""

__version__ = "0.1.0"

from .game24 import (enumerate_solutions, generate_puzzles, is_solvable,
                     parse_expression, Puzzle, verify_solution)
from .treedist import EditCosts, ted_min, to_labeled_tree, tree_edit_distance
from .parsing import (answers_equal, extract_boxed, normalize_answer,
                      parse_verdicts, strip_think)
from .templates import (multi_draft_template, PromptBindings, render_text,
                        solve_step_template)
from .metrics import accuracy_with_ci, pass_at_k, ted_summary

__all__ = [
    "__version__",
    "enumerate_solutions", "generate_puzzles", "is_solvable",
    "parse_expression", "Puzzle", "verify_solution",
    "EditCosts", "ted_min", "to_labeled_tree", "tree_edit_distance",
    "answers_equal", "extract_boxed", "normalize_answer", "parse_verdicts",
    "strip_think",
    "multi_draft_template", "PromptBindings", "render_text",
    "solve_step_template",
    "accuracy_with_ci", "pass_at_k", "ted_summary",
]
