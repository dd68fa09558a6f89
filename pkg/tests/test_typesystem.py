from __future__ import annotations

import pytest

from conftest import EXAMPLE_PROGRAMS, GOLDEN, fixture_program
from tglp.kernel import Const, Mode
from tglp.prelude import load_program
from tglp.syntax import parse_moded_term
from tglp.kernel import moded_paths
from tglp.typesystem import (
    ACCEPT,
    AliasOfPrimitiveUnion,
    DeterminismViolation,
    base_name,
    dual_name,
    is_wildcard,
    state_mode,
)


def test_state_names():
    assert dual_name("Stream") == "Stream?"
    assert dual_name("Stream?") == "Stream"
    assert state_mode("Stream?") is Mode.DOWN
    assert state_mode("merge/3") is Mode.UP
    assert base_name("Integer?") == "Integer"
    assert is_wildcard("_?")


@pytest.mark.parametrize("name", EXAMPLE_PROGRAMS)
def test_transitions_match_golden(name):
    got = sorted(fixture_program(name).automaton.dump_lines())
    want = sorted((GOLDEN / f"{name}.transitions").read_text(encoding="utf-8").splitlines())
    assert got == want


@pytest.mark.parametrize("name", EXAMPLE_PROGRAMS + ("fileop",))
def test_dual_closure_and_involution(name):
    fixture_program(name).automaton.check_invariants()


def test_single_state_dump():
    lines = fixture_program("merge").automaton.dump_lines("Stream")
    assert lines == [
        f"Stream --([],0,↑)--> {ACCEPT}",
        "Stream --(cons,2,1,↑)--> _",
        "Stream --(cons,2,2,↑)--> Stream",
    ]


def test_alternatives_must_have_distinct_functors():
    with pytest.raises(DeterminismViolation):
        load_program("T ::= f(Integer) ; f(String).\nprocedure p(T?).\np(X).\n")


def test_union_alias_of_primitive_rejected():
    with pytest.raises(AliasOfPrimitiveUnion):
        load_program("A ::= Integer ; String.\nprocedure p(A?).\np(X).\n")


def test_redefining_a_prelude_type_is_reported():
    p = load_program("Stream ::= foo.\nprocedure p(Integer?).\np(X).\n")
    assert any("Stream" in e.message for e in p.problems)


def test_same_prelude_definition_is_accepted():
    assert not fixture_program("merge").problems


def test_parametrised_type_instantiation():
    a = fixture_program("monitor").automaton
    assert a.step("Stream(CounterCall)?", next(l for l, _ in a.outgoing("Stream(CounterCall)?")
                                                 if l.functor == "." and l.index == 1)) == "CounterCall?"


def test_interactive_alternative_has_consumed_functor():
    a = fixture_program("coop").automaton
    modes = sorted(str(alt.mode) for alt in a.alternatives("CoopStream") if alt.functor == ".")
    assert modes == ["↑", "↓"]


def test_literal_leaves():
    a = fixture_program("monitor").automaton
    assert a.accepts_leaf("Integer", Const(3), Mode.UP)
    assert not a.accepts_leaf("Integer", Const("a"), Mode.UP)
    assert a.accepts_leaf("_", Const("a"), Mode.UP)


def test_accepts_moded_paths_of_well_typed_call():
    a = fixture_program("merge").automaton
    t = parse_moded_term("↓merge(↓[↓3|Xs?],Ys?,↑[↑3|Zs])")
    assert all(a.accepts_path("merge/3", p) for p in moded_paths(t))


def test_rejects_path_with_wrong_mode():
    a = fixture_program("merge").automaton
    t = parse_moded_term("↓merge(↑[↑3|Xs],Ys?,↑Zs)")
    assert not all(a.accepts_path("merge/3", p) for p in moded_paths(t))


def test_subtype_pair_automaton():
    a = fixture_program("fileop").automaton
    assert {l.functor for l, _ in a.outgoing("ReadOp")} == {"read"}
    assert {l.functor for l, _ in a.outgoing("FileOp")} == {"read", "write", "delete"}
