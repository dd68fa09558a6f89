"""Typed GLP: parser, type automata, well-typing checker, interpreter and semantic checks."""

from __future__ import annotations

from .prelude import TypedProgram, load_prelude, load_program
from .runtime import run
from .syntax import GLPError, parse_goal, parse_program
from .verifier import verify_preservation
from .welltyping import check_program, is_subtype

__all__ = [
    "GLPError", "TypedProgram", "check_program", "is_subtype", "load_prelude", "load_program",
    "parse_goal", "parse_program", "run", "verify_preservation",
]
