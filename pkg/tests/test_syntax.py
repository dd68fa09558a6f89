from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from tglp.kernel import NIL, Anonymous, Compound, Const, Reader, Writer, format_term, make_list
from tglp.syntax import (
    LexError,
    ParseError,
    PlacementError,
    UndefinedType,
    format_program,
    parse_goal,
    parse_moded_clause,
    parse_moded_term,
    parse_program,
    parse_term,
    parse_type,
    type_text,
)

MERGE = """\
Stream ::= [] ; [_|Stream].

procedure merge(Stream?, Stream?, Stream).
merge([X|Xs], Ys, [X?|Zs?]) :- merge(Ys?, Xs?, Zs).
merge(Xs, [Y|Ys], [Y?|Zs?]) :- merge(Xs?, Ys?, Zs).
merge(Xs, [], Xs?).
merge([], Ys, Ys?).
"""


def test_writer_and_reader_share_an_id():
    t = parse_term("f(X, X?, Y)")
    x, xr, y = t.args
    assert isinstance(x, Writer) and isinstance(xr, Reader)
    assert x.id == xr.id and x.id != y.id


def test_anonymous_variables_are_distinct():
    a, b = parse_term("f(_, _)").args
    assert isinstance(a, Anonymous) and isinstance(b, Anonymous)
    assert a.id != b.id


def test_list_syntax_builds_cons_cells():
    t = parse_term("[1, 2|T]")
    assert t == make_list([Const(1), Const(2)], t.args[1].args[1])
    assert parse_term("[]") == NIL


def test_constants_keep_their_kind():
    t = parse_term('f(1, 2.5, abc, "with space", [])')
    assert [a.kind for a in t.args] == ["int", "real", "str", "str", "nil"]


def test_operator_precedence():
    t = parse_term("X? + 3 * Y?")
    assert t.functor == "+"
    assert t.args[1] == Compound("*", (Const(3), t.args[1].args[1]))


def test_goal_conjunction():
    goals = parse_goal("copy([1,2|Xs?], Ys), merge(Ys?, Zs?, Out)")
    assert [g.functor for g in goals] == ["copy", "merge"]
    assert parse_goal("true") == []


def test_program_round_trip():
    prog = parse_program(MERGE)
    again = parse_program(format_program(prog))
    assert format_program(again) == format_program(prog)


def test_clause_sections():
    prog = parse_program("procedure p(Integer?, Integer).\np(X, Y?) :- X? > 0 | Y := X? - 1.\n")
    (clause,) = prog.clauses
    assert [g.functor for g in clause.guard] == [">"]
    assert [g.functor for g in clause.body] == [":="]


def test_syntax_error_reports_line_and_column():
    with pytest.raises(ParseError) as e:
        parse_program("procedure p(Integer?).\np(X :- q.\n")
    assert (e.value.line, e.value.col) == (2, 5)


def test_lex_error():
    with pytest.raises(LexError):
        parse_term("f(#)")


def test_declaration_must_precede_its_clauses():
    with pytest.raises(PlacementError):
        parse_program("procedure p(Integer?).\nq(1).\np(1).\n", require_declarations=False)


def test_clauses_must_be_contiguous():
    text = "procedure p(Integer?).\np(1).\nprocedure q(Integer?).\nq(1).\np(2).\n"
    with pytest.raises(PlacementError):
        parse_program(text)


def test_undeclared_procedure_rejected_when_declarations_required():
    with pytest.raises(PlacementError):
        parse_program("p(1).\n")
    assert parse_program("p(1).\n", require_declarations=False).clauses


def test_undefined_type_reference():
    with pytest.raises(UndefinedType):
        parse_program("procedure p(Missing?).\np(1).\n")


def test_type_expressions():
    assert type_text(parse_type("Stream(CounterCall)?")) == "Stream(CounterCall)?"
    assert type_text(parse_type("[_|Stream]")) == "[_|Stream]"


def test_moded_term_modes():
    t = parse_moded_term("↓merge(↓[↓3|Xs?], Ys?, ↑[↑3|Zs])")
    assert str(t.modes[()]) == "↓"
    assert str(t.modes[(3, 1)]) == "↑"


def test_moded_clause_drops_guard_and_true():
    head, body = parse_moded_clause("↓p(X?) :- X? > 0 | ↑q(X?).")
    assert head.term.functor == "p"
    assert [b.term.functor for b in body] == ["q"]


ints = st.integers(min_value=-50, max_value=50)
atoms = st.sampled_from(["a", "b", "foo", "[]"])


@st.composite
def ground_terms(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return Const(draw(st.one_of(ints, atoms)))
    n = draw(st.integers(1, 3))
    return Compound(draw(st.sampled_from(["f", "g", "."])), tuple(draw(ground_terms(depth - 1)) for _ in range(n)))


@given(ground_terms())
def test_format_then_parse_is_identity(t):
    assert parse_term(format_term(t)) == t
