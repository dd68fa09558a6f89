from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import fixture_program
from tglp.kernel import Compound, Const, FreshIds, Reader, Writer, check_so, format_term, list_items, make_list
from tglp.runtime import (
    DivisionByZero,
    EagerLeft,
    Fail,
    NotExp,
    NotGround,
    Reduced,
    RoundRobin,
    SeededRandom,
    StepLimitExceeded,
    Success,
    Suspend,
    UnknownGuard,
    conjoin,
    eval_exp,
    eval_guard,
    eval_guard_goal,
    match_terms,
    read_trace,
    reduce_goal,
    run,
    trace_records,
    write_trace,
    GuardVerdict,
)
from tglp.syntax import parse_goal, parse_term
from tglp.verifier import GoalGenerator, deref


def goal(text):
    (g,) = parse_goal(text)
    return g


# Matching


def test_match_binds_head_writers():
    g, h = parse_term("pair(f([1|Xs?], Y), f([X|T], Z?))").args
    r = match_terms(g, h)
    assert isinstance(r, Success)
    assert sorted(format_term(v) for v in r.subst.bindings.values()) == ["1", "Xs?", "Z?"]


def test_goal_writer_takes_head_value():
    r = match_terms(parse_term("f(Y)"), parse_term("f([A?|B?])"))
    assert isinstance(r, Success)
    assert format_term(next(iter(r.subst.bindings.values()))) == "[A?|B?]"


def test_goal_reader_against_head_structure_suspends():
    g = parse_term("f(Xs?)")
    r = match_terms(g, parse_term("f([H|T])"))
    assert isinstance(r, Suspend) and r.readers == {g.args[0].id}


@pytest.mark.parametrize(
    "g,h",
    [("f(X)", "f(Y)"), ("f(X?)", "f(Y?)"), ("f(a)", "f(Y?)"), ("f(a)", "f(b)"), ("f(g(1))", "f(h(1))")],
)
def test_match_failures(g, h):
    goal_term, head = parse_term(f"pair({g}, {h})").args
    assert isinstance(match_terms(goal_term, head), Fail)


# Arithmetic


def test_arithmetic():
    assert eval_exp(parse_term("1 + 2 * 3")) == 7
    assert eval_exp(parse_term("7 // 2")) == 3
    assert eval_exp(parse_term("-7 // 2")) == -3
    assert eval_exp(parse_term("-7 mod 2")) == 1
    assert eval_exp(parse_term("neg(4)")) == -4
    assert eval_exp(parse_term("3 / 2")) == 1.5


def test_arithmetic_errors():
    with pytest.raises(NotGround):
        eval_exp(parse_term("X? + 1"))
    with pytest.raises(DivisionByZero):
        eval_exp(parse_term("1 // 0"))
    with pytest.raises(NotExp):
        eval_exp(parse_term("a + 1"))


# Guards: succeed / suspend / fail per argument boundedness

R = Reader(1, "X")
W = Writer(2, "Y")
GUARD_MATRIX = [
    # guard, argument, verdict
    ("integer", Const(3), "succeed"), ("integer", Const(2.5), "fail"), ("integer", R, "suspend"),
    ("number", Const(2.5), "succeed"), ("number", Const("a"), "fail"), ("number", R, "suspend"),
    ("string", Const("a"), "succeed"), ("string", Const(1), "fail"), ("string", R, "suspend"),
    ("atom", Const("a"), "succeed"), ("atom", Const(1), "fail"), ("atom", R, "suspend"),
    ("constant", Const("[]"), "succeed"), ("constant", Compound("f", (Const(1),)), "fail"), ("constant", R, "suspend"),
    ("compound", Compound("f", (R,)), "succeed"), ("compound", Const(1), "fail"), ("compound", R, "suspend"),
    ("is_list", make_list([Const(1)]), "succeed"), ("is_list", make_list([Const(1)], R), "suspend"),
    ("is_list", Const(1), "fail"), ("is_list", R, "suspend"),
    ("ground", Compound("f", (Const(1),)), "succeed"), ("ground", Compound("f", (R,)), "suspend"),
    ("ground", Compound("f", (W,)), "fail"), ("ground", R, "suspend"),
    ("known", Const(1), "succeed"), ("known", Compound("f", (R,)), "succeed"), ("known", R, "suspend"),
    ("unknown", R, "succeed"), ("unknown", Const(1), "fail"),
]


@pytest.mark.parametrize("name,arg,verdict", GUARD_MATRIX)
def test_type_guard_matrix(name, arg, verdict):
    assert eval_guard_goal(Compound(name, (arg,))).outcome == verdict


@pytest.mark.parametrize(
    "text,verdict",
    [
        ("f(1, a) =?= f(1, a)", "succeed"), ("f(1, a) =?= f(1, b)", "fail"), ("f(X?, a) =?= f(1, a)", "suspend"),
        ("f(X?, a) =?= f(1, b)", "fail"), ("1 < 2", "succeed"), ("2 < 1", "fail"), ("X? < 1", "suspend"),
        ("2 > 1", "succeed"), ("1 =< 1", "succeed"), ("1 >= 2", "fail"), ("1 + 1 =:= 2", "succeed"),
        ("1 =\\= 1", "fail"), ("a < 1", "fail"),
    ],
)
def test_binary_guard_matrix(text, verdict):
    assert eval_guard_goal(parse_term(text)).outcome == verdict


VERDICTS = [GuardVerdict.succeed(), GuardVerdict.fail(), GuardVerdict.suspend({1}), GuardVerdict.suspend({2})]


@given(st.lists(st.sampled_from(VERDICTS), max_size=5))
def test_conjunction_semantics(vs):
    out = conjoin(vs)
    outcomes = [v.outcome for v in vs]
    if "fail" in outcomes:
        assert out.outcome == "fail"
    elif "suspend" in outcomes:
        assert out.outcome == "suspend"
        assert out.readers == frozenset().union(*(v.readers for v in vs if v.outcome == "suspend"))
    else:
        assert out.outcome == "succeed"


def test_otherwise_follows_earlier_clauses():
    assert eval_guard([Const("otherwise")]).outcome == "succeed"
    assert eval_guard([Const("otherwise")], frozenset({4})).readers == {4}


def test_unknown_guard_is_an_error():
    with pytest.raises(UnknownGuard):
        eval_guard_goal(parse_term("nonsense(1)"))


# Reduction


def test_reduce_commits_to_first_matching_clause():
    p = fixture_program("merge")
    r = reduce_goal(goal("merge([1|Xs?], [2|Ys?], Zs)"), p.clauses(("merge", 3)), FreshIds(1000))
    assert isinstance(r, Reduced) and r.clause_index == 0


def test_reduce_suspends_on_open_inputs():
    p = fixture_program("merge")
    g = goal("merge(Xs?, Ys?, Zs)")
    r = reduce_goal(g, p.clauses(("merge", 3)), FreshIds(1000))
    assert isinstance(r, Suspend) and r.readers == {g.args[0].id, g.args[1].id}


def test_reduce_fails_when_no_clause_applies():
    p = fixture_program("merge_no_base")
    r = reduce_goal(goal("merge([], [], Zs)"), p.clauses(("merge", 3)), FreshIds(1000))
    assert isinstance(r, Fail)


# Runs


def test_monitor_serves_requests():
    p = fixture_program("monitor")
    goals = parse_goal("monitor([add, add, read(A), clear, add, read(B)|More?])")
    res = run(p, goals, EagerLeft())
    assert res.status == "deadlock"
    reads = [t.args[0] for t in list_items(goals[0].args[0])[0] if isinstance(t, Compound)]
    assert [format_term(res.sigma.bindings[r.id]) for r in reads] == ["2", "1"]


def test_closed_request_stream_fails():
    p = fixture_program("monitor")
    assert run(p, parse_goal("monitor([add])")).status == "failure"


def test_bounded_buffer_pipeline():
    p = fixture_program("buffer")
    goals = parse_goal("consumer([X1?, X2? | Xs]), producer(1, [X1, X2 | Xs?])")
    res = run(p, goals, RoundRobin(), max_steps=40)
    assert res.status == "limit"
    got = [format_term(res.sigma.bindings[v.id]) for v in (goals[1].args[1].args[0], goals[1].args[1].args[1].args[0])]
    assert got == ["1", "2"]


def test_cooperative_stream_alternates():
    p = fixture_program("coop")
    goals = parse_goal("write(2, Xs), read(3, Xs?)")
    res = run(p, goals, EagerLeft(), max_steps=60)
    stream = deref(Writer(goals[0].args[1].id), res.config.sigma)
    items, _ = list_items(stream)
    assert [format_term(i) for i in items[:8]] == ["2", "2", "switch", "3", "3", "3", "switch", "2"]


def test_lookup_finds_value_and_default():
    p = fixture_program("lookup_fixed")
    for key, want in (('"b"', "2"), ('"z"', "0")):
        res = run(p, parse_goal(f'lookup({key}, V, [pair("a", 1), pair("b", 2)], L)'), EagerLeft())
        assert res.status == "success"
        assert format_term(next(iter(res.goal_sigma().bindings.values()))) == want


def test_system_predicates():
    p = fixture_program("merge")
    res = run(p, parse_goal("X = f(1), T =.. [g, 1, 2], L ..= h(a), N := 2 * 3"), EagerLeft())
    assert res.status == "success"
    assert sorted(format_term(t) for t in res.goal_sigma().bindings.values()) == ["6", "[h, a]", "f(1)", "g(1, 2)"]


def test_failure_stops_the_run():
    p = fixture_program("merge_no_base")
    res = run(p, parse_goal("merge([], [], Zs)"))
    assert res.status == "failure" and format_term(res.failed_goal) == "merge([], [], Zs)"


def test_step_limit():
    p = fixture_program("buffer")
    goals = parse_goal("consumer([X1?, X2? | Xs]), producer(1, [X1, X2 | Xs?])")
    assert run(p, goals, max_steps=5).status == "limit"
    with pytest.raises(StepLimitExceeded):
        run(p, goals, max_steps=5, raise_on_limit=True)


def test_trace_round_trip(tmp_path):
    p = fixture_program("copy_merge")
    goals = parse_goal("copy([1,2|Xs?], Ys), merge(Ys?, [a], Zs)")
    res = run(p, goals, EagerLeft())
    path = tmp_path / "run.jsonl"
    write_trace(path, trace_records(res, {"goal": "g"}))
    records = read_trace(path)
    assert records[0]["kind"] == "header"
    assert records[-1]["kind"] == "final" and records[-1]["status"] == res.status
    assert {r["kind"] for r in records[1:-1]} <= {"reduce", "communicate"}
    assert sum(r["kind"] == "reduce" for r in records) == res.steps


# Properties over random runs


def merge_outcome(xs, ys, seed):
    p = fixture_program("merge")
    g = Compound("merge", (make_list([Const(x) for x in xs]), make_list([Const(y) for y in ys]), Writer(1, "Zs")))
    res = run(p, [g], SeededRandom(seed))
    assert res.status == "success"
    items, tail = list_items(res.sigma.bindings[1])
    return [i.value for i in items]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 99), max_size=6), st.lists(st.integers(100, 199), max_size=6), st.integers(0, 10_000))
def test_merge_preserves_order_of_each_input(xs, ys, seed):
    out = merge_outcome(xs, ys, seed)
    assert [v for v in out if v < 100] == xs
    assert [v for v in out if v >= 100] == ys
    assert sorted(out) == sorted(xs + ys)


SO_FIXTURES = [("merge", ("merge", 3)), ("copy_merge", ("copy", 2)), ("monitor", ("monitor", 1)),
               ("buffer", ("producer", 2)), ("coop", ("write", 2)), ("dl_append", ("dl_append", 3)),
               ("channel", ("send", 3)), ("lookup_fixed", ("lookup", 4))]


def so_holds_each_step(program, goals, seed, max_steps=200) -> bool:
    ok = True

    def check(m):
        nonlocal ok
        if check_so([t for _, t in m.cfg.resolvent()]) is not None:
            ok = False

    run(program, goals, SeededRandom(seed), max_steps=max_steps, on_step=check, trace=False)
    return ok


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(SO_FIXTURES), st.integers(0, 100_000))
def test_single_occurrence_is_preserved(case, seed):
    name, key = case
    p = fixture_program(name)
    g = GoalGenerator(p.automaton, random.Random(seed)).goal(key)
    assert so_holds_each_step(p, [g], seed)


def monotone(program, goals, seed, max_steps=200) -> bool:
    """A goal that could reduce and was not chosen can still reduce later."""
    reducible: set[int] = set()
    ok = True
    probe = FreshIds(10**9)

    def can_reduce(m, gid):
        g = m.cfg.goals[gid]
        from tglp.runtime import BUILTINS
        from tglp.kernel import functor_of

        key = functor_of(g)
        r = BUILTINS[key](*g.args) if key in BUILTINS else reduce_goal(g, program.clauses(key), probe)
        return isinstance(r, Reduced)

    def check(m):
        nonlocal reducible, ok
        for gid in reducible:
            if gid in m.cfg.goals and not can_reduce(m, gid):
                ok = False
        reducible = {gid for gid in m.cfg.goals if can_reduce(m, gid)}

    run(program, goals, SeededRandom(seed), max_steps=max_steps, on_step=check, trace=False)
    return ok


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(SO_FIXTURES), st.integers(0, 100_000))
def test_monotonicity(case, seed):
    name, key = case
    p = fixture_program(name)
    g = GoalGenerator(p.automaton, random.Random(seed)).goal(key)
    assert monotone(p, [g], seed)
