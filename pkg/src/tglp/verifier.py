"""Moded outcomes of runs and executable checks of well-typing preservation."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .kernel import (
    Anonymous,
    Compound,
    Const,
    FreshIds,
    FunctorLeaf,
    Mode,
    ModedPath,
    ModedTerm,
    Reader,
    Substitution,
    Term,
    Writer,
    apply_substitution_moded,
    functor_of,
    map_vars,
    moded_paths,
    positions,
    replace_at,
    var_ids,
    variables,
)
from .prelude import TypedProgram
from .runtime import Machine, Policy, RunResult, SeededRandom, run
from .typesystem import TypeAutomaton, is_wildcard, state_mode
from .welltyping import TypePath, annotate_call, paths_consistent, type_paths, well_typed_moded_term


@dataclass
class ModedOutcome:
    moded_atoms: list[ModedTerm]
    moded_resolvent: list[ModedTerm]


def deref(t: Term, sigma: dict[int, Term]) -> Term:
    """Apply every binding in ``sigma`` to both writers and readers, to completion."""

    def sub(v: Term) -> Term:
        if isinstance(v, (Writer, Reader)) and v.id in sigma:
            return deref(sigma[v.id], sigma)
        return v

    return map_vars(t, sub)


def moded_outcome(result: RunResult, program: TypedProgram) -> ModedOutcome:
    """Produced moded initial goals under σ, and the produced moded resolvent.

    Substituted values inherit the mode of the position they replace.
    """
    a = program.automaton
    sigma = result.sigma
    atoms = [apply_substitution_moded(annotate_call(g, a).moded, sigma) for g in result.initial_goals]
    resolvent = [annotate_call(g, a).moded for g in result.resolvent]
    return ModedOutcome(atoms, resolvent)


def typed_moded(t: Term, a: TypeAutomaton) -> ModedTerm:
    """Produced moded term whose modes follow the declared types."""
    return annotate_call(t, a).moded


def _fit_forms(t: ModedTerm, introduced: set[tuple]) -> ModedTerm:
    term = t.term
    for p, v in list(variables(term)):
        if p not in introduced or isinstance(v, Anonymous):
            continue
        m = t.modes.get(p)
        if (m is Mode.UP and isinstance(v, Reader)) or (m is Mode.DOWN and isinstance(v, Writer)):
            term = replace_at(term, p, v.pair())
    return ModedTerm(term, t.modes)


def typed_outcome_atom(goal: Term, sigma: dict[int, Term], a: TypeAutomaton) -> ModedTerm:
    """``goal`` under ``sigma`` with modes from the types.

    Variables brought in by substitution take the form that fits the mode of
    their position; variables of the original goal keep their form.
    """
    introduced: set[tuple] = set()
    term = goal
    for pos, v in list(variables(goal)):
        if isinstance(v, (Writer, Reader)) and v.id in sigma:
            value = deref(sigma[v.id], sigma)
            term = replace_at(term, pos, value)
            introduced |= {p for p, _ in positions(value, pos)}
    blank = term
    for p, v in list(variables(term)):
        if p in introduced:
            blank = replace_at(blank, p, Anonymous(0))
    modes = typed_moded(blank, a).modes
    return _fit_forms(ModedTerm(term, modes), introduced)


# ---------------------------------------------------------------------------
# Preservation


@dataclass
class StepVerdict:
    step: int
    ok: bool
    path: ModedPath | None = None
    term: ModedTerm | None = None
    part: str = ""

    def __str__(self) -> str:
        if self.ok:
            return f"step {self.step}: ok"
        return f"step {self.step}: {self.part} {self.term} has ill-typed path {self.path}"


@dataclass
class PreservationReport:
    verdict: str  # ok | counterexample | ill-typed-initial-goal
    steps: list[StepVerdict] = field(default_factory=list)
    result: RunResult | None = None

    @property
    def ok(self) -> bool:
        return self.verdict == "ok"

    @property
    def counterexample(self) -> StepVerdict | None:
        return next((s for s in self.steps if not s.ok), None)


def check_configuration(m: Machine, a: TypeAutomaton) -> StepVerdict:
    """Moded-atoms outcome and moded resolvent of the run so far."""
    sigma = m.cfg.sigma
    for g in m.initial:
        t = typed_outcome_atom(g, sigma, a)
        bad = well_typed_moded_term(t, a.procedure_state(*functor_of(g)), a)
        if bad is not None:
            return StepVerdict(m.steps, False, bad, t, "outcome atom")
    for _, g in m.cfg.resolvent():
        t = typed_moded(g, a)
        bad = well_typed_moded_term(t, a.procedure_state(*functor_of(g)), a)
        if bad is not None:
            return StepVerdict(m.steps, False, bad, t, "resolvent goal")
    return StepVerdict(m.steps, True)


def initial_goal_well_typed(goals: Iterable[Term], a: TypeAutomaton) -> bool:
    for g in goals:
        try:
            t = typed_moded(g, a)
        except Exception:
            return False
        if well_typed_moded_term(t, a.procedure_state(*functor_of(g)), a) is not None:
            return False
    return True


def verify_preservation(program: TypedProgram, goals: list[Term], policy: Policy | None = None,
                        max_steps: int = 500, stop_at_first: bool = True) -> PreservationReport:
    """Re-check well-typing of the outcome and resolvent after every step."""
    a = program.automaton
    if not initial_goal_well_typed(goals, a):
        return PreservationReport("ill-typed-initial-goal")
    verdicts: list[StepVerdict] = []

    class _Stop(Exception):
        pass

    def on_step(m: Machine) -> None:
        v = check_configuration(m, a)
        verdicts.append(v)
        if not v.ok and stop_at_first:
            raise _Stop

    try:
        res = run(program, goals, policy, max_steps=max_steps, on_step=on_step, trace=False)
    except _Stop:
        res = None
    ok = all(v.ok for v in verdicts)
    return PreservationReport("ok" if ok else "counterexample", verdicts, res)


# ---------------------------------------------------------------------------
# Goal generation and sampling


class GoalGenerator:
    """Random well-typed goals for a procedure, read off the automaton.

    Consumed positions get values drawn from the type, ending in an open
    reader with probability ``p_open``; produced positions get fresh
    writers.
    """

    STRINGS = ("a", "b", "c", "k")

    def __init__(self, a: TypeAutomaton, rng: random.Random, max_depth: int = 5, p_open: float = 0.3,
                 fresh: FreshIds | None = None):
        self.a = a
        self.rng = rng
        self.max_depth = max_depth
        self.p_open = p_open
        self.fresh = fresh or FreshIds(10_000)

    def _var(self, mode: Mode) -> Term:
        i = self.fresh()
        return Writer(i, f"W{i}") if mode is Mode.UP else Reader(i, f"W{i}")

    def _const(self, prim: str) -> Const:
        r = self.rng
        match prim:
            case "Integer":
                return Const(r.randint(0, 5))
            case "Real":
                return Const(r.choice([0.5, 1.5, 2.25]))
            case "Number":
                return Const(r.choice([r.randint(0, 5), 0.5]))
            case "String":
                return Const(r.choice(self.STRINGS))
        return Const(r.choice([r.randint(0, 5), *self.STRINGS]))

    def value(self, state: str, mode: Mode, depth: int) -> Term:
        if mode is Mode.UP:
            return self._var(Mode.UP)
        info = self.a.states[state]
        if depth >= self.max_depth or (depth > 0 and self.rng.random() < self.p_open):
            return self._var(Mode.DOWN)
        if info.kind == "wildcard":
            return self._const("_")
        if info.kind == "primitive":
            return self._const(state.rstrip("?"))
        choices: list = [alt for alt in info.alternatives if alt.mode is Mode.DOWN]
        choices += [p for p, m in info.primitives if m is Mode.DOWN]
        if not choices:
            return self._var(Mode.DOWN)
        pick = self.rng.choice(choices)
        if isinstance(pick, str):
            return self._const(pick)
        if pick.arity == 0:
            return Const(pick.functor)
        args = tuple(self.value(s, m, depth + 1) for m, s in pick.children)
        return Compound(pick.functor, args)

    def goal(self, key: tuple) -> Term:
        f, n = key
        proc = self.a.procedure_state(f, n)
        (alt,) = self.a.alternatives(proc)
        if n == 0:
            return Const(f)
        return Compound(f, tuple(self.value(s, m, 0) for m, s in alt.children))


@dataclass
class PathProjection:
    outputs: set[ModedPath] = field(default_factory=set)
    inputs: set[ModedPath] = field(default_factory=set)

    def add(self, t: ModedTerm, depth: int) -> None:
        for p in moded_paths(t):
            if not p.steps:
                continue
            p = _truncate(p, depth)
            (self.outputs if p.steps[0].mode is Mode.UP else self.inputs).add(p)


def _truncate(p: ModedPath, depth: int) -> ModedPath:
    if len(p.steps) <= depth:
        return p
    nxt = p.steps[depth]
    return ModedPath(p.root_mode, p.steps[:depth], FunctorLeaf(nxt.functor, nxt.arity))


def sample_semantics(program: TypedProgram, key: tuple, n_runs: int, depth: int, seed: int = 0,
                     max_steps: int = 200, generator: Callable[[random.Random], Term] | None = None) -> PathProjection:
    """Paths of moded-atom outcomes over ``n_runs`` random runs of ``key``."""
    a = program.automaton
    proj = PathProjection()
    for i in range(n_runs):
        rng = random.Random(seed * 1_000_003 + i)
        g = generator(rng) if generator else GoalGenerator(a, rng).goal(key)
        res = run(program, [g], SeededRandom(seed + i), max_steps=max_steps, trace=False)
        sigma = dict(res.config.sigma) if res.config else {}
        proj.add(typed_outcome_atom(g, sigma, a), depth)
    return proj


def covariance_violations(proj: PathProjection, key: tuple, a: TypeAutomaton) -> list[ModedPath]:
    """Sampled output paths consistent with no path of the declared type."""
    start = a.procedure_state(*key)
    return sorted((p for p in proj.outputs if not a.accepts_path(start, p)), key=str)


def input_type_paths(key: tuple, a: TypeAutomaton, depth: int) -> list[TypePath]:
    return type_paths(a, a.procedure_state(*key), depth, root_mode=Mode.UP, only_input=True)


def contravariance_violations(proj: PathProjection, key: tuple, a: TypeAutomaton, depth: int) -> list[TypePath]:
    """Input type paths up to ``depth`` consistent with no sampled input path."""
    missing = []
    for tp in input_type_paths(key, a, depth):
        if not any(paths_consistent(x, tp, a) for x in proj.inputs):
            missing.append(tp)
    return missing


__all__ = [
    "GoalGenerator", "ModedOutcome", "PathProjection", "PreservationReport", "StepVerdict",
    "check_configuration", "contravariance_violations", "covariance_violations", "deref",
    "initial_goal_well_typed", "input_type_paths", "moded_outcome", "sample_semantics",
    "typed_moded", "typed_outcome_atom", "verify_preservation",
]
