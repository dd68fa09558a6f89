from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import pytest

from tglp.prelude import TypedProgram, load_program

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

EXAMPLE_PROGRAMS = ("merge", "monitor", "buffer", "coop", "dl_append", "channel", "lookup")


@lru_cache(maxsize=None)
def fixture_program(name: str) -> TypedProgram:
    return load_program((FIXTURES / f"{name}.glp").read_text(encoding="utf-8"))


@pytest.fixture
def program():
    return fixture_program
