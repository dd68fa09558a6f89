"""Interpreter: matching, guards, committed-choice reduction and scheduling."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .kernel import (
    CONS,
    NIL,
    Anonymous,
    Compound,
    Const,
    FreshIds,
    Reader,
    Substitution,
    Term,
    Writer,
    format_term,
    functor_of,
    make_list,
    map_vars,
    rename_apart,
    var_ids,
    variables,
)
from .prelude import OTHERWISE, TypedProgram
from .syntax import Clause

DEFAULT_MAX_STEPS = 1_000_000


class RuntimeFault(Exception):
    pass


class UnknownGuard(RuntimeFault):
    pass


class UnknownProcedure(RuntimeFault):
    pass


class StepLimitExceeded(RuntimeFault):
    def __init__(self, result: RunResult):
        super().__init__(f"step limit reached after {result.steps} reductions")
        self.result = result


# ---------------------------------------------------------------------------
# Matching


@dataclass(frozen=True)
class Success:
    subst: Substitution


@dataclass(frozen=True)
class Suspend:
    readers: frozenset[int]


@dataclass(frozen=True)
class Fail:
    pass


MatchResult = Success | Suspend | Fail


def match_terms(goal: Term, head: Term) -> MatchResult:
    """Joint traversal of a goal term and a head term.

    Writers on either side are assigned the opposite subterm; a goal reader
    facing a head non-variable contributes to the suspension set.
    """
    assign: dict[int, Term] = {}
    readers: set[int] = set()
    stack = [(goal, head)]
    while stack:
        t1, t2 = stack.pop()
        if isinstance(t1, Anonymous) or isinstance(t2, Anonymous):
            continue
        match t1, t2:
            case Writer(), Writer():
                return Fail()
            case Writer(), _:
                assign[t1.id] = t2
            case Reader(), Writer():
                assign[t2.id] = t1
            case Reader(), Reader():
                return Fail()
            case Reader(), _:
                readers.add(t1.id)
            case _, Writer():
                assign[t2.id] = t1
            case _, Reader():
                return Fail()
            case Const(), Const():
                if t1 != t2:
                    return Fail()
            case Compound(), Compound():
                if t1.functor != t2.functor or t1.arity != t2.arity:
                    return Fail()
                stack.extend(zip(reversed(t1.args), reversed(t2.args)))
            case _:
                return Fail()
    if readers:
        return Suspend(frozenset(readers))
    return Success(Substitution(assign).resolved())


# ---------------------------------------------------------------------------
# Arithmetic


class ExpError(RuntimeFault):
    pass


class NotGround(ExpError):
    def __init__(self, readers: Iterable[int]):
        self.readers = frozenset(readers)
        super().__init__("expression is not ground")


class NotExp(ExpError):
    pass


class DivisionByZero(ExpError):
    pass


def unbound_readers(t: Term) -> set[int]:
    return {v.id for _, v in variables(t) if isinstance(v, Reader)}


def eval_exp(e: Term) -> int | float:
    """Value of a ground arithmetic expression.

    ``//`` truncates toward zero and ``mod`` takes the sign of the divisor.
    """
    waiting = unbound_readers(e)
    if waiting:
        raise NotGround(waiting)
    return _eval(e)


def _eval(e: Term) -> int | float:
    match e:
        case Const(kind="int" | "real"):
            return e.value
        case Compound(functor="neg" | "-", args=(x,)):
            return -_eval(x)
        case Compound(functor=op, args=(x, y)) if op in ("+", "-", "*", "/", "//", "mod"):
            a, b = _eval(x), _eval(y)
            match op:
                case "+":
                    return a + b
                case "-":
                    return a - b
                case "*":
                    return a * b
            if b == 0:
                raise DivisionByZero(f"division by zero in {format_term(e)}")
            match op:
                case "/":
                    return a / b
                case "//":
                    q = math.trunc(a / b) if isinstance(a, float) or isinstance(b, float) else abs(a) // abs(b) * (1 if (a >= 0) == (b >= 0) else -1)
                    return q
                case _:
                    return a % b
    raise NotExp(f"{format_term(e)} is not an arithmetic expression")


# ---------------------------------------------------------------------------
# Guards


@dataclass(frozen=True)
class GuardVerdict:
    outcome: str  # succeed | suspend | fail
    readers: frozenset[int] = frozenset()

    @staticmethod
    def succeed() -> GuardVerdict:
        return GuardVerdict("succeed")

    @staticmethod
    def fail() -> GuardVerdict:
        return GuardVerdict("fail")

    @staticmethod
    def suspend(readers: Iterable[int]) -> GuardVerdict:
        return GuardVerdict("suspend", frozenset(readers))


SUCCEED = GuardVerdict.succeed()
FAIL = GuardVerdict.fail()


def conjoin(verdicts: Iterable[GuardVerdict]) -> GuardVerdict:
    """Fail if any member fails, else suspend if any suspends, else succeed."""
    vs = list(verdicts)
    if any(v.outcome == "fail" for v in vs):
        return FAIL
    waiting = [v for v in vs if v.outcome == "suspend"]
    if waiting:
        return GuardVerdict.suspend(frozenset().union(*(v.readers for v in waiting)))
    return SUCCEED


def _type_test(t: Term, test: Callable[[Term], bool]) -> GuardVerdict:
    if isinstance(t, Reader):
        return GuardVerdict.suspend({t.id})
    return SUCCEED if test(t) else FAIL


def _is_list(t: Term) -> GuardVerdict:
    while True:
        if t == NIL:
            return SUCCEED
        if isinstance(t, Reader):
            return GuardVerdict.suspend({t.id})
        if isinstance(t, Compound) and t.functor == CONS and t.arity == 2:
            t = t.args[1]
            continue
        return FAIL


def _ground(t: Term) -> GuardVerdict:
    vs = [v for _, v in variables(t)]
    if any(not isinstance(v, Reader) for v in vs):
        return FAIL
    if vs:
        return GuardVerdict.suspend({v.id for v in vs})
    return SUCCEED


def _same(a: Term, b: Term) -> GuardVerdict:
    waiting: set[int] = set()
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if isinstance(x, Reader) or isinstance(y, Reader):
            waiting |= {v.id for v in (x, y) if isinstance(v, Reader)}
            continue
        if isinstance(x, (Writer, Anonymous)) or isinstance(y, (Writer, Anonymous)):
            return FAIL
        if isinstance(x, Const) or isinstance(y, Const):
            if x != y:
                return FAIL
            continue
        if x.functor != y.functor or x.arity != y.arity:
            return FAIL
        stack.extend(zip(x.args, y.args))
    return GuardVerdict.suspend(waiting) if waiting else SUCCEED


_COMPARE = {
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "=<": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "=:=": lambda a, b: a == b,
    "=\\=": lambda a, b: a != b,
}


def _compare(op: str, x: Term, y: Term) -> GuardVerdict:
    waiting = unbound_readers(x) | unbound_readers(y)
    if waiting:
        return GuardVerdict.suspend(waiting)
    try:
        return SUCCEED if _COMPARE[op](_eval(x), _eval(y)) else FAIL
    except ExpError:
        return FAIL


def eval_guard_goal(g: Term) -> GuardVerdict:
    """Three-valued verdict of one guard whose readers are already resolved."""
    f, n = functor_of(g)
    args = g.args if isinstance(g, Compound) else ()
    match (f, n):
        case ("integer", 1):
            return _type_test(args[0], lambda t: isinstance(t, Const) and t.kind == "int")
        case ("number", 1):
            return _type_test(args[0], lambda t: isinstance(t, Const) and t.is_number)
        case ("string" | "atom", 1):
            return _type_test(args[0], lambda t: isinstance(t, Const) and t.kind == "str")
        case ("constant", 1):
            return _type_test(args[0], lambda t: isinstance(t, Const))
        case ("compound", 1):
            return _type_test(args[0], lambda t: isinstance(t, Compound))
        case ("is_list", 1):
            return _is_list(args[0])
        case ("ground", 1):
            return _ground(args[0])
        case ("known", 1):
            return _type_test(args[0], lambda t: True)
        case ("unknown", 1):
            return SUCCEED if isinstance(args[0], (Reader, Writer, Anonymous)) else FAIL
        case ("=?=", 2):
            return _same(args[0], args[1])
        case (op, 2) if op in _COMPARE:
            return _compare(op, args[0], args[1])
    raise UnknownGuard(f"{f}/{n} is not a guard")


def eval_guard(guards: Iterable[Term], earlier_suspended: frozenset[int] | None = None) -> GuardVerdict:
    """Verdict of a guard conjunction.

    ``otherwise`` succeeds when every earlier clause failed; when some
    earlier clause suspended (``earlier_suspended`` non-empty) it suspends
    on the same readers.
    """
    out = []
    for g in guards:
        if functor_of(g) == OTHERWISE:
            out.append(GuardVerdict.suspend(earlier_suspended) if earlier_suspended else SUCCEED)
        else:
            out.append(eval_guard_goal(g))
    return conjoin(out)


# ---------------------------------------------------------------------------
# Reduction


@dataclass(frozen=True)
class Reduced:
    clause_index: int | str
    body: tuple[Term, ...]
    subst: Substitution  # writer mgu, resolved


ReduceResult = Reduced | Suspend | Fail


def _substitute_both(t: Term, bindings: dict[int, Term]) -> Term:
    return map_vars(t, lambda v: bindings.get(v.id, v) if isinstance(v, (Writer, Reader)) else v)


def reduce_goal(goal: Term, clauses: list[Clause], fresh: FreshIds) -> ReduceResult:
    """Try the clauses in order and commit to the first that succeeds."""
    waiting: set[int] = set()
    for idx, clause in enumerate(clauses):
        c = rename_apart(clause, fresh=fresh, tag_names=True)
        m = match_terms(goal, c.head)
        if isinstance(m, Fail):
            continue
        if isinstance(m, Suspend):
            waiting |= m.readers
            continue
        b = dict(m.subst.bindings)
        guards = [_substitute_both(g, b) for g in c.guard]
        verdict = eval_guard(guards, frozenset(waiting))
        if verdict.outcome == "succeed":
            body = tuple(_substitute_both(g, b) for g in c.body)
            return Reduced(idx, body, m.subst)
        if verdict.outcome == "suspend":
            waiting |= verdict.readers
    if waiting:
        return Suspend(frozenset(waiting))
    return Fail()


# builtins implemented natively


def _bind(writer: Term, value: Term) -> ReduceResult:
    if isinstance(writer, Anonymous):
        return Reduced("builtin", (), Substitution({}))
    if not isinstance(writer, Writer):
        return Fail()
    return Reduced("builtin", (), Substitution({writer.id: value}))


def _builtin_unify(x: Term, y: Term) -> ReduceResult:
    m = match_terms(x, y)
    if isinstance(m, Success):
        return Reduced("builtin", (), m.subst)
    if isinstance(m, Suspend):
        return m
    m = match_terms(y, x)
    if isinstance(m, Success):
        return Reduced("builtin", (), m.subst)
    return m


def _builtin_assign(x: Term, e: Term) -> ReduceResult:
    try:
        value = eval_exp(e)
    except NotGround as ng:
        return Suspend(ng.readers)
    except ExpError:
        return Fail()
    return _bind(x, Const(value))


def _builtin_compose(x: Term, lst: Term) -> ReduceResult:
    items = []
    t = lst
    while isinstance(t, Compound) and t.functor == CONS and t.arity == 2:
        items.append(t.args[0])
        t = t.args[1]
    if isinstance(t, Reader):
        return Suspend(frozenset({t.id}))
    if t != NIL or not items:
        return Fail()
    f = items[0]
    if isinstance(f, Reader):
        return Suspend(frozenset({f.id}))
    if not isinstance(f, Const):
        return Fail()
    if len(items) == 1:
        return _bind(x, f)
    if f.kind != "str":
        return Fail()
    return _bind(x, Compound(f.value, tuple(items[1:])))


def _builtin_decompose(x: Term, t: Term) -> ReduceResult:
    if isinstance(t, Reader):
        return Suspend(frozenset({t.id}))
    if isinstance(t, Const):
        return _bind(x, make_list([t]))
    if isinstance(t, Compound):
        return _bind(x, make_list([Const(t.functor)] + list(t.args)))
    return Fail()


BUILTINS: dict[tuple, Callable[..., ReduceResult]] = {
    ("=", 2): _builtin_unify,
    (":=", 2): _builtin_assign,
    ("=..", 2): _builtin_compose,
    ("..=", 2): _builtin_decompose,
}


# ---------------------------------------------------------------------------
# Scheduling


class Policy:
    name = "policy"

    def choose(self, active: list[int], cfg: Configuration) -> int:
        raise NotImplementedError


class RoundRobin(Policy):
    """Oldest active goal first; new and woken goals join the back."""

    name = "round-robin"

    def choose(self, active, cfg):
        return active[0]


class EagerLeft(Policy):
    """Leftmost active goal in resolvent order."""

    name = "eager-left"

    def choose(self, active, cfg):
        return min(active, key=lambda g: cfg.order[g])


class SeededRandom(Policy):
    name = "seeded-random"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = random.Random(seed)

    def choose(self, active, cfg):
        return self.rng.choice(active)


def make_policy(name: str, seed: int = 0) -> Policy:
    match name:
        case "round-robin":
            return RoundRobin()
        case "eager-left":
            return EagerLeft()
        case "seeded-random" | "random":
            return SeededRandom(seed)
    raise ValueError(f"unknown policy {name!r}")


POLICIES = ("round-robin", "eager-left", "seeded-random")


@dataclass
class Configuration:
    """Resolvent, readers substitution and suspension bookkeeping."""

    goals: dict[int, Term] = field(default_factory=dict)
    order: dict[int, tuple] = field(default_factory=dict)
    sigma: dict[int, Term] = field(default_factory=dict)
    suspensions: dict[int, set[int]] = field(default_factory=dict)
    suspended: dict[int, frozenset[int]] = field(default_factory=dict)
    active: dict[int, None] = field(default_factory=dict)
    readers_in: dict[int, set[int]] = field(default_factory=dict)
    status: str = "running"
    failed_goal: int | None = None
    fresh: FreshIds = field(default_factory=FreshIds)
    next_goal: int = 0

    def resolvent(self) -> list[tuple[int, Term]]:
        return sorted(self.goals.items(), key=lambda kv: self.order[kv[0]])

    def add_goal(self, t: Term, order: tuple) -> int:
        gid = self.next_goal
        self.next_goal += 1
        self.goals[gid] = t
        self.order[gid] = order
        self.active[gid] = None
        for rid in unbound_readers(t):
            self.readers_in.setdefault(rid, set()).add(gid)
        return gid

    def remove_goal(self, gid: int) -> None:
        t = self.goals.pop(gid)
        self.order.pop(gid)
        self.active.pop(gid, None)
        for rid in unbound_readers(t):
            s = self.readers_in.get(rid)
            if s:
                s.discard(gid)
        for rid in self.suspended.pop(gid, ()):
            s = self.suspensions.get(rid)
            if s:
                s.discard(gid)

    def copy(self) -> Configuration:
        return Configuration(
            dict(self.goals), dict(self.order), dict(self.sigma),
            {k: set(v) for k, v in self.suspensions.items()}, dict(self.suspended), dict(self.active),
            {k: set(v) for k, v in self.readers_in.items()}, self.status, self.failed_goal,
            self.fresh, self.next_goal,
        )


@dataclass
class RunResult:
    status: str
    steps: int
    initial_goals: list[Term]
    resolvent: list[Term]
    sigma: Substitution  # every binding made during the run, resolved
    trace: list[dict]
    failed_goal: Term | None = None
    config: Configuration | None = None

    def goal_sigma(self) -> Substitution:
        """Bindings of the initial goal's writers, resolved."""
        ids = var_ids(self.initial_goals)
        return Substitution({k: v for k, v in self.sigma.bindings.items() if k in ids})


class Machine:
    """Runs a goal against a typed program under a scheduling policy."""

    def __init__(self, program: TypedProgram, goals: list[Term], policy: Policy | None = None,
                 trace: bool = True):
        self.program = program
        self.policy = policy or RoundRobin()
        self.cfg = Configuration()
        self.trace_on = trace
        self.trace: list[dict] = []
        self.steps = 0
        ids = var_ids(goals)
        for cl in program.procedures.values():
            for c in cl:
                ids |= var_ids([c.head, *c.guard, *c.body])
        self.cfg.fresh.skip_past(ids)
        self.initial = list(goals)
        for i, g in enumerate(goals):
            self.cfg.add_goal(g, (i,))
        self._update_status()

    def _event(self, **kw) -> None:
        if self.trace_on:
            self.trace.append(kw)

    def _update_status(self) -> None:
        cfg = self.cfg
        if cfg.status == "failure":
            return
        if not cfg.goals:
            cfg.status = "success"
        elif not cfg.active:
            cfg.status = "deadlock"
        else:
            cfg.status = "running"

    def attempt(self, gid: int) -> ReduceResult:
        goal = self.cfg.goals[gid]
        key = functor_of(goal)
        if key in BUILTINS:
            return BUILTINS[key](*goal.args)
        clauses = self.program.clauses(key)
        if not clauses and key not in self.program.procedures:
            raise UnknownProcedure(f"no procedure {key[0]}/{key[1]}")
        return reduce_goal(goal, clauses, self.cfg.fresh)

    def step(self) -> bool:
        """Perform one Reduce; False when the run is over."""
        cfg = self.cfg
        while cfg.status == "running":
            gid = self.policy.choose(list(cfg.active), cfg)
            res = self.attempt(gid)
            if isinstance(res, Reduced):
                self._commit(gid, res)
                self._update_status()
                return True
            cfg.active.pop(gid)
            if isinstance(res, Suspend):
                cfg.suspended[gid] = res.readers
                for rid in res.readers:
                    cfg.suspensions.setdefault(rid, set()).add(gid)
            else:
                cfg.status = "failure"
                cfg.failed_goal = gid
                return False
            self._update_status()
        return False

    def _commit(self, gid: int, res: Reduced) -> None:
        cfg = self.cfg
        goal = cfg.goals[gid]
        order = cfg.order[gid]
        self.steps += 1
        cfg.remove_goal(gid)
        new = {}
        for i, b in enumerate(res.body):
            new[cfg.add_goal(b, order + (i,))] = b
        bindings = dict(res.subst.bindings)
        self._event(
            kind="reduce", step=self.steps, goal=gid, goal_text=format_term(goal),
            clause=res.clause_index,
            bindings={_vname(k, goal, v): format_term(v) for k, v in bindings.items()},
            body=[format_term(b) for b in res.body], new_goals=list(new),
        )
        cfg.sigma.update(bindings)
        for wid in bindings:
            self._communicate(wid)

    def _communicate(self, wid: int) -> None:
        cfg = self.cfg
        value = cfg.sigma[wid]
        for gid in sorted(cfg.readers_in.pop(wid, set())):
            if gid not in cfg.goals:
                continue
            t = map_vars(cfg.goals[gid], lambda v: value if isinstance(v, Reader) and v.id == wid else v)
            cfg.goals[gid] = t
            for rid in unbound_readers(value):
                cfg.readers_in.setdefault(rid, set()).add(gid)
            self._event(kind="communicate", step=self.steps, reader=wid, goal=gid, value=format_term(value))
        for gid in sorted(cfg.suspensions.pop(wid, set())):
            if gid in cfg.suspended:
                for rid in cfg.suspended.pop(gid):
                    if rid != wid and rid in cfg.suspensions:
                        cfg.suspensions[rid].discard(gid)
                cfg.active[gid] = None

    def result(self) -> RunResult:
        cfg = self.cfg
        sigma = Substitution(dict(cfg.sigma)).resolved()
        failed = None
        if cfg.failed_goal is not None:
            failed = cfg.goals.get(cfg.failed_goal)
        return RunResult(
            status=cfg.status, steps=self.steps, initial_goals=self.initial,
            resolvent=[t for _, t in cfg.resolvent()], sigma=sigma, trace=self.trace,
            failed_goal=failed, config=cfg,
        )


def _vname(vid: int, goal: Term, value: Term) -> str:
    for _, v in variables(goal):
        if isinstance(v, (Writer, Reader)) and v.id == vid and v.name:
            return v.name
    return f"_G{vid}"


def run(program: TypedProgram, goals: list[Term], policy: Policy | None = None,
        max_steps: int = DEFAULT_MAX_STEPS, trace: bool = True,
        on_step: Callable[[Machine], None] | None = None, raise_on_limit: bool = False) -> RunResult:
    """Run ``goals`` to success, deadlock, failure or the step limit.

    When the limit is hit the partial result has status ``limit``; with
    ``raise_on_limit`` it is raised inside StepLimitExceeded instead.
    """
    m = Machine(program, goals, policy, trace)
    if on_step:
        on_step(m)
    while m.cfg.status == "running":
        if m.steps >= max_steps:
            res = m.result()
            res.status = "limit"
            if raise_on_limit:
                raise StepLimitExceeded(res)
            return res
        if not m.step():
            break
        if on_step:
            on_step(m)
    return m.result()


# ---------------------------------------------------------------------------
# Trace files


def trace_records(result: RunResult, header: dict) -> list[dict]:
    names = {}
    for _, v in variables(Compound("goal", tuple(result.initial_goals)) if result.initial_goals else NIL):
        if isinstance(v, (Writer, Reader)):
            names[v.id] = v.name
    final = {
        "kind": "final",
        "status": result.status,
        "steps": result.steps,
        "sigma": {names.get(k) or f"_G{k}": format_term(v) for k, v in result.goal_sigma().bindings.items()},
        "resolvent": [format_term(t) for t in result.resolvent],
    }
    return [{"kind": "header", **header}] + result.trace + [final]


def write_trace(path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")


def read_trace(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


__all__ = [
    "BUILTINS", "Configuration", "DEFAULT_MAX_STEPS", "DivisionByZero", "EagerLeft", "Fail",
    "GuardVerdict", "Machine", "MatchResult", "NotExp", "NotGround", "POLICIES", "Policy",
    "Reduced", "RoundRobin", "RunResult", "SeededRandom", "StepLimitExceeded", "Success",
    "Suspend", "UnknownGuard", "UnknownProcedure", "conjoin", "eval_exp", "eval_guard",
    "eval_guard_goal", "make_policy", "match_terms", "read_trace", "reduce_goal", "run",
    "trace_records", "write_trace",
]
