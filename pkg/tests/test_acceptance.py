"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

from __future__ import annotations

import itertools
import random
import time

from conftest import EXAMPLE_PROGRAMS, FIXTURES, GOLDEN, fixture_program
from test_runtime import GUARD_MATRIX, VERDICTS, monotone, so_holds_each_step
from test_welltyping import SUBTYPE_FIXTURES, _type_states, open_witness, uncovered_inputs
from tglp.kernel import (
    Anonymous,
    Compound,
    Const,
    Mode,
    ModedTerm,
    Reader,
    Writer,
    canonical_moded,
    canonical_renaming,
    format_moded,
    format_term,
    list_items,
    make_list,
    map_vars,
    rename_apart,
    term_depth,
    var_ids,
)
from tglp.prelude import load_program
from tglp.runtime import EagerLeft, Fail, SeededRandom, conjoin, eval_guard_goal, match_terms, run
from tglp.syntax import VarScope, parse_goal, parse_moded_term, parse_term
from tglp.verifier import (
    GoalGenerator,
    contravariance_violations,
    covariance_violations,
    deref,
    moded_outcome,
    sample_semantics,
    verify_preservation,
)
from tglp.welltyping import check_input_coverage, check_program, is_subtype, moded_listing


def verdict(n: int, title: str, problems: list[str]) -> None:
    status = "PASS" if not problems else "FAIL"
    print(f"\n{status} criterion {n}: {title}")
    for p in problems:
        print(f"    {p}")
    assert not problems, f"criterion {n}: " + "; ".join(problems)


def load_fresh(name: str):
    return load_program((FIXTURES / f"{name}.glp").read_text(encoding="utf-8"))


def squash(line: str) -> str:
    return "".join(line.split())


# 1


def test_criterion_1_merge_static_check():
    problems = []
    start = time.perf_counter()
    good = check_program(load_fresh("merge"))
    bad = check_program(load_fresh("merge_bad_decl"))
    elapsed = time.perf_counter() - start
    if not good.well_typed:
        problems.append("merge is not reported well-typed")
    if bad.well_typed:
        problems.append("merge under merge(_,_,_) is not reported ill-typed")
    if elapsed >= 1.0:
        problems.append(f"took {elapsed:.2f}s")
    verdict(1, f"merge well-typed, wildcard declaration ill-typed ({elapsed:.3f}s)", problems)


# 2


def test_criterion_2_example_programs():
    problems = []
    start = time.perf_counter()
    for name in EXAMPLE_PROGRAMS:
        p = load_fresh(name)
        report = check_program(p)
        if not report.well_typed:
            for d in report.diagnostics:
                problems.append(f"{name}: {d.format()}")
            for g in report.coverage_gaps:
                problems.append(f"{name}: {g} (path {g.path})")
        got = sorted(p.automaton.dump_lines())
        want = sorted((GOLDEN / f"{name}.transitions").read_text(encoding="utf-8").splitlines())
        if got != want:
            problems.append(f"{name}: transitions differ: +{sorted(set(got) - set(want))} -{sorted(set(want) - set(got))}")
        got_m = [squash(l) for l in moded_listing(p, report)]
        want_m = [squash(l) for l in (GOLDEN / f"{name}.moded").read_text(encoding="utf-8").splitlines()]
        for i, (g, w) in enumerate(itertools.zip_longest(got_m, want_m), 1):
            if g != w:
                problems.append(f"{name}: moded clause {i}: got {g} want {w}")
    elapsed = time.perf_counter() - start
    if elapsed >= 5.0:
        problems.append(f"took {elapsed:.2f}s")
    verdict(2, f"seven example programs: verdicts, transitions, moded clauses ({elapsed:.3f}s)", problems)


# 3


def test_criterion_3_subtyping():
    problems = []
    a = fixture_program("fileop").automaton
    if is_subtype("ReadOp", "FileOp", a) is not True:
        problems.append("ReadOp <: FileOp is not true")
    if is_subtype("FileOp", "ReadOp", a) is not False:
        problems.append("FileOp <: ReadOp is not false")
    checked = 0
    for name in SUBTYPE_FIXTURES:
        a, states = _type_states(name)
        for q in states:
            checked += 1
            if not is_subtype(q, q, a):
                problems.append(f"{name}: {q} <: {q} fails")
    verdict(3, f"ReadOp <: FileOp, not FileOp <: ReadOp, reflexive on {checked} types", problems)


# 4

OUTCOME_EXAMPLE_GOAL = "copy([1,2,3|Xs?],Xs1), copy([a,b|Ys?],Ys1), merge(Xs1?,Ys1?,Zs)"
# Published forms, with the produced root mode that the listing leaves implicit.
OUTCOME_EXAMPLE_ZS = "[1,a,2,b,3|Zs1]"
OUTCOME_EXAMPLE_ATOMS = (
    "↑copy(↓[↓1,↓2,↓3|Xs?], ↑[↑1,↑2,↑3|Xs2])",
    "↑copy(↓[↓a,↓b|Ys?],↑[↑a,↑b|Ys2])",
    "↑merge(↓[↓1,↓2,↓3|Xs2?],↓[↓a,↓b|Ys2?],↑[↑1,↑a,↑2,↑b,↑3|Zs1])",
)
OUTCOME_EXAMPLE_RESOLVENT = ("↑copy(Xs?,Xs)", "↑copy(Ys?,Ys2)", "↑merge(Xs2?,Ys2?,Zs1)")


def _moded_group(texts) -> list[ModedTerm]:
    scope = VarScope(itertools.count(1))
    return canonical_moded(parse_moded_term(t, scope) for t in texts)


def test_criterion_4_moded_outcome_example():
    problems = []
    start = time.perf_counter()
    p = fixture_program("copy_merge")
    goals = parse_goal(OUTCOME_EXAMPLE_GOAL)
    res = run(p, goals, EagerLeft())
    zs = goals[2].args[2]
    got_zs = canonical_renaming([res.sigma.bindings[zs.id]])[0]
    want_zs = canonical_renaming([parse_term(OUTCOME_EXAMPLE_ZS)])[0]
    if got_zs != want_zs:
        problems.append(f"sigma: Zs := {format_term(got_zs)}, printed form {format_term(want_zs)}")
    out = moded_outcome(res, p)
    for label, got, want in (("moded-atoms outcome", out.moded_atoms, OUTCOME_EXAMPLE_ATOMS),
                             ("moded resolvent", out.moded_resolvent, OUTCOME_EXAMPLE_RESOLVENT)):
        got_c, want_c = canonical_moded(got), _moded_group(want)
        if got_c != want_c:
            problems.append(f"{label}: got {[format_moded(t) for t in got_c]} "
                            f"printed {[format_moded(t) for t in want_c]}")
    elapsed = time.perf_counter() - start
    if elapsed >= 1.0:
        problems.append(f"took {elapsed:.2f}s")
    verdict(4, f"copy/copy/merge under eager-left ({res.steps} steps, {elapsed:.3f}s)", problems)


# 5


def test_criterion_5_merge_order_preservation():
    problems = []
    p = fixture_program("copy_merge")
    for seed in range(100):
        rng = random.Random(seed)
        xs = [rng.randint(0, 99) for _ in range(rng.randint(0, 8))]
        ys = [rng.randint(100, 199) for _ in range(rng.randint(0, 8))]
        goals = [
            Compound("copy", (make_list([Const(x) for x in xs]), Writer(1, "Xs1"))),
            Compound("copy", (make_list([Const(y) for y in ys]), Writer(2, "Ys1"))),
            Compound("merge", (Reader(1, "Xs1"), Reader(2, "Ys1"), Writer(3, "Zs"))),
        ]
        res = run(p, goals, SeededRandom(seed), trace=False)
        items, tail = list_items(deref(Writer(3, "Zs"), res.config.sigma))
        out = [i.value for i in items]
        if res.status != "success" or tail != Const("[]"):
            problems.append(f"seed {seed}: status {res.status}")
        elif [v for v in out if v < 100] != xs or [v for v in out if v >= 100] != ys:
            problems.append(f"seed {seed}: order broken in {out}")
        elif sorted(out) != sorted(xs + ys):
            problems.append(f"seed {seed}: multiset differs")
    verdict(5, "merge keeps each input's order under 100 seeded schedules", problems)


# 6

RUN_FIXTURES = [("merge", ("merge", 3)), ("copy_merge", ("copy", 2)), ("copy_merge", ("merge", 3)),
                ("monitor", ("monitor", 1)), ("buffer", ("producer", 2)), ("buffer", ("consumer", 1)),
                ("coop", ("write", 2)), ("coop", ("read", 2)), ("dl_append", ("dl_append", 3)),
                ("channel", ("send", 3)), ("channel", ("receive", 3)), ("lookup_fixed", ("lookup", 4))]


def _random_goal(name, key, seed):
    p = fixture_program(name)
    return p, GoalGenerator(p.automaton, random.Random(seed)).goal(key)


def test_criterion_6_single_occurrence_preserved():
    problems = []
    fixture_goals = {
        "merge": "merge([1,2,3], [a,b], Zs)",
        "copy_merge": OUTCOME_EXAMPLE_GOAL,
        "monitor": "monitor([add, add, read(A), clear, add, read(B)|More?])",
        "buffer": "consumer([X1?, X2? | Xs]), producer(1, [X1, X2 | Xs?])",
        "coop": "write(2, Xs), read(3, Xs?)",
        "dl_append": "dl_append([1,2|B]\\B?, [3|C]\\C?, Out)",
        "channel": "new_channel(L, R), send(1, L?, L1), receive(X, R?, R1)",
        "lookup_fixed": 'lookup("b", V, [pair("a",1), pair("b",2)], L)',
    }
    for name, text in fixture_goals.items():
        p = fixture_program(name)
        goals = parse_goal(text)
        for policy_seed in range(3):
            if not so_holds_each_step(p, goals, policy_seed, max_steps=500):
                problems.append(f"{name}: {text} seed {policy_seed}")
    for i in range(1000):
        name, key = RUN_FIXTURES[i % len(RUN_FIXTURES)]
        p, g = _random_goal(name, key, i)
        if not so_holds_each_step(p, [g], i, max_steps=500):
            problems.append(f"{name} run {i}: {format_term(g)}")
    verdict(6, "single occurrence after every transition, fixtures plus 1000 random runs", problems)


# 7


def test_criterion_7_monotonicity():
    problems = []
    for i in range(300):
        name, key = RUN_FIXTURES[i % len(RUN_FIXTURES)]
        p, g = _random_goal(name, key, i)
        if not monotone(p, [g], i, max_steps=300):
            problems.append(f"{name} run {i}: {format_term(g)}")
    verdict(7, "no reducible goal becomes irreducible, 300 snapshotted runs", problems)


# 8

PRESERVATION_FIXTURES = tuple("lookup_fixed" if n == "lookup" else n for n in EXAMPLE_PROGRAMS) + ("copy_merge",)


def test_criterion_8_well_typing_preservation():
    problems = []
    start = time.perf_counter()
    total = 0
    for name in PRESERVATION_FIXTURES:
        p = fixture_program(name)
        keys = [k for k in p.user_procedures if k in p.decls]
        for i in range(100):
            key = keys[i % len(keys)]
            g = GoalGenerator(p.automaton, random.Random(i)).goal(key)
            rep = verify_preservation(p, [g], SeededRandom(i), max_steps=300)
            total += 1
            if not rep.ok:
                detail = rep.counterexample or rep.verdict
                problems.append(f"{name} run {i} {format_term(g)}: {detail}")
    elapsed = time.perf_counter() - start
    if elapsed >= 60.0:
        problems.append(f"took {elapsed:.1f}s")
    verdict(8, f"per-step preservation on {total} seeded runs ({elapsed:.1f}s)", problems)


# 9

SAMPLED = [("merge", ("merge", 3)), ("copy_merge", ("copy", 2)), ("lookup_fixed", ("lookup", 4))]


def test_criterion_9_covariance_and_contravariance():
    problems = []
    depths = []
    for name, key in SAMPLED:
        p = fixture_program(name)
        depth = max(term_depth(c.head) for c in p.clauses(key)) + 2
        depths.append(f"{key[0]}/{key[1]}@{depth}")
        proj = sample_semantics(p, key, 300, depth, seed=1)
        for x in covariance_violations(proj, key, p.automaton):
            problems.append(f"{name}: output path outside the type: {x}")
        for x in contravariance_violations(proj, key, p.automaton, depth):
            problems.append(f"{name}: input path never sampled: {x}")
    verdict(9, f"sampled paths agree with the automaton ({', '.join(depths)})", problems)


# 10


def _shape(t) -> str:
    return format_term(map_vars(t, lambda v: Anonymous(0)))


def test_criterion_10_coverage_gap_detection():
    problems = []
    p = fixture_program("merge_no_base")
    key = ("merge", 3)
    report = check_program(p)
    if report.well_typed:
        problems.append("merge without base clauses is reported well-typed")
    gap = check_input_coverage(key, p.clauses(key), p.automaton)
    brute = uncovered_inputs(p, key, depth=3)
    if gap is None:
        problems.append("no coverage gap reported")
    else:
        witness = open_witness(gap.witness.term, p.automaton)
        heads = [rename_apart(c, avoid=var_ids([witness])).head for c in p.clauses(key)]
        if not all(isinstance(match_terms(witness, h), Fail) for h in heads):
            problems.append(f"witness {format_term(witness)} is accepted by a clause")
        if _shape(witness) not in {_shape(b) for b in brute}:
            problems.append(f"witness {format_term(witness)} is not among the enumerated uncovered inputs")
    if not brute:
        problems.append("brute force finds no uncovered input")
    full = fixture_program("merge")
    if check_input_coverage(key, full.clauses(key), full.automaton) is not None or uncovered_inputs(full, key):
        problems.append("full merge disagrees with the oracle")
    path = gap.path if gap else None
    verdict(10, f"gap in merge without base clauses, path {path}, {len(brute)} uncovered inputs", problems)


# 11


def test_criterion_11_guard_semantics():
    problems = []
    for name, arg, want in GUARD_MATRIX:
        got = eval_guard_goal(Compound(name, (arg,))).outcome
        if got != want:
            problems.append(f"{name}({format_term(arg)}): {got}, expected {want}")
    combos = 0
    for n in range(5):
        for vs in itertools.product(VERDICTS, repeat=n):
            combos += 1
            outcomes = [v.outcome for v in vs]
            want = "fail" if "fail" in outcomes else "suspend" if "suspend" in outcomes else "succeed"
            got = conjoin(list(vs))
            if got.outcome != want:
                problems.append(f"conjunction of {outcomes}: {got.outcome}")
            elif want == "suspend":
                readers = frozenset().union(*(v.readers for v in vs if v.outcome == "suspend"))
                if got.readers != readers:
                    problems.append(f"conjunction of {outcomes}: readers {set(got.readers)}")
    verdict(11, f"{len(GUARD_MATRIX)} guard cases, {combos} conjunctions", problems)
