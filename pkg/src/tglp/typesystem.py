"""Type environments and the deterministic type automaton.

States are plain strings:

* user types ``T`` and their duals ``T?`` (instantiated parametrised types
  are named by their applied form, e.g. ``Stream(CounterCall)``);
* procedure states ``p/n``;
* primitive states ``Integer``, ``Integer?``, ... and the wildcards ``_``
  and ``_?``;
* literal states ``'c'`` / ``'c'?`` for constants inside compound
  alternatives, and the accepting state ``✓``.

A state's mode is consume exactly when its name ends in ``?``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple

from .kernel import (
    CONS,
    Anonymous,
    Const,
    FunctorLeaf,
    Mode,
    ModedPath,
    Reader,
    Step,
    Writer,
    format_const,
)
from .syntax import (
    PRIMITIVE_TYPES,
    GLPError,
    ProcedureDecl,
    TCompound,
    TConst,
    TRef,
    TypeExpr,
    TypeRule,
    UndefinedType,
    type_text,
)

ACCEPT = "✓"
WILDCARD = "_"
CONSTANT_TYPES = frozenset({"Integer", "Real", "Number", "String", "Constant"})


class TypeError_(GLPError):
    """Base class for type environment errors."""


class CircularAlias(TypeError_):
    pass


class AliasOfPrimitiveUnion(TypeError_):
    pass


class DeterminismViolation(TypeError_):
    pass


class ArityMismatch(TypeError_):
    pass


class NonConcreteArgument(TypeError_):
    pass


# ---------------------------------------------------------------------------
# State names


def dual_name(state: str) -> str:
    if state == ACCEPT:
        return state
    return state[:-1] if state.endswith("?") else state + "?"


def state_mode(state: str) -> Mode:
    return Mode.DOWN if state.endswith("?") else Mode.UP


def base_name(state: str) -> str:
    return state[:-1] if state.endswith("?") else state


def is_wildcard(state: str) -> bool:
    return base_name(state) == WILDCARD


def is_literal_state(state: str) -> bool:
    return state.startswith("'")


def is_primitive_state(state: str) -> bool:
    return base_name(state) in CONSTANT_TYPES


def is_procedure_state(state: str) -> bool:
    head, _, tail = state.rpartition("/")
    return bool(head) and tail.isdigit()


def literal_state(c: Const, dual: bool = False) -> str:
    return f"'{format_const(c)}'" + ("?" if dual else "")


def fits_primitive(prim: str, c: Const) -> bool:
    match prim:
        case "Integer":
            return c.kind == "int"
        case "Real":
            return c.kind == "real"
        case "Number":
            return c.kind in ("int", "real")
        case "String":
            return c.kind == "str"
        case "Constant" | "_":
            return True
    return False


# ---------------------------------------------------------------------------
# Alias resolution and instantiation


def _flip(t: TypeExpr, dual: bool) -> TypeExpr:
    return replace(t, dual=t.dual != dual) if dual else t


def is_alias(rule: TypeRule) -> bool:
    return not rule.params and all(isinstance(a, TRef) for a in rule.alternatives)


@dataclass
class ResolvedTypeEnv:
    """Type rules with every alias replaced by its expansion."""

    rules: dict[tuple[str, int], TypeRule]
    procedures: dict[tuple[str, int], tuple[TypeExpr, ...]] = field(default_factory=dict)
    aliases: dict[str, TypeExpr] = field(default_factory=dict)

    def lookup(self, name: str, nargs: int = 0) -> TypeRule | None:
        return self.rules.get((name, nargs))


def substitute_aliases(t: TypeExpr, aliases: dict[str, TypeExpr]) -> TypeExpr:
    if isinstance(t, TRef):
        if not t.args and t.name in aliases:
            return _flip(aliases[t.name], t.dual)
        return replace(t, args=tuple(substitute_aliases(a, aliases) for a in t.args))
    if isinstance(t, TCompound):
        return replace(t, args=tuple(substitute_aliases(a, aliases) for a in t.args))
    return t


def resolve_aliases(rules: Iterable[TypeRule], decls: Iterable[ProcedureDecl] = ()) -> ResolvedTypeEnv:
    """Expand simple and union aliases, then check determinism.

    A simple alias has one type-reference alternative; a union alias has
    several, each naming a concrete (non-alias, non-primitive) rule.
    """
    rules = list(rules)
    by_name = {r.name: r for r in rules if not r.params}
    simple = {r.name: r.alternatives[0] for r in rules if is_alias(r) and len(r.alternatives) == 1}
    union = {r.name: r for r in rules if is_alias(r) and len(r.alternatives) > 1}

    resolved: dict[str, TypeExpr] = {}

    def chase(name: str, seen: tuple[str, ...]) -> TypeExpr:
        if name in resolved:
            return resolved[name]
        if name in seen:
            r = by_name[name]
            raise CircularAlias(f"circular alias chain {' -> '.join(seen + (name,))}", r.line, r.col)
        target = simple[name]
        if isinstance(target, TRef) and not target.args and target.name in simple:
            out = _flip(chase(target.name, seen + (name,)), target.dual)
        else:
            out = target
        resolved[name] = out
        return out

    for name in simple:
        chase(name, ())

    expanded: dict[tuple[str, int], TypeRule] = {}
    for r in rules:
        if r.name in simple and not r.params:
            continue
        if r.name in union and not r.params:
            alts: list[TypeExpr] = []
            for ref in r.alternatives:
                assert isinstance(ref, TRef)
                target = by_name.get(ref.name)
                if ref.name in PRIMITIVE_TYPES or ref.name in simple or ref.name in union or ref.args:
                    raise AliasOfPrimitiveUnion(
                        f"union alias {r.name} refers to {ref.name}, which is a primitive or an alias", r.line, r.col
                    )
                if target is None:
                    raise UndefinedType(f"type {ref.name} is not defined", r.line, r.col)
                alts.extend(_flip(a, ref.dual) for a in target.alternatives)
            r = replace(r, alternatives=tuple(alts))
        expanded[r.key] = r

    out: dict[tuple[str, int], TypeRule] = {}
    for key, r in expanded.items():
        alts = tuple(substitute_aliases(a, resolved) for a in r.alternatives)
        r = replace(r, alternatives=alts)
        bad = check_determinism(r)
        if bad is not None:
            raise DeterminismViolation(f"type {r.name} has two alternatives with functor {bad[0]}/{bad[1]}", r.line, r.col)
        out[key] = r
    procs = {d.key: tuple(substitute_aliases(t, resolved) for t in d.arg_types) for d in decls}
    return ResolvedTypeEnv(out, procs, resolved)


def alternative_key(alt: TypeExpr) -> tuple[object, int, Mode] | None:
    mode = Mode.DOWN if alt.dual else Mode.UP
    if isinstance(alt, TConst):
        return (alt.value, 0, mode)
    if isinstance(alt, TCompound):
        return (alt.functor, len(alt.args), mode)
    return None


def check_determinism(rule: TypeRule) -> tuple[object, int] | None:
    """Return the first repeated (functor, arity), or None if deterministic.

    Two alternatives may share a functor only when one is produced and the
    other consumed, since their transition labels then differ in mode.
    """
    seen = set()
    for alt in rule.alternatives:
        key = alternative_key(alt)
        if key is None:
            continue
        if key in seen:
            return key[:2]
        seen.add(key)
    return None


def substitute_params(t: TypeExpr, binding: dict[str, TypeExpr]) -> TypeExpr:
    if isinstance(t, TRef):
        if not t.args and t.name in binding:
            return _flip(binding[t.name], t.dual)
        return replace(t, args=tuple(substitute_params(a, binding) for a in t.args))
    if isinstance(t, TCompound):
        return replace(t, args=tuple(substitute_params(a, binding) for a in t.args))
    return t


def applied_name(name: str, args: Iterable[TypeExpr]) -> str:
    return f"{name}({', '.join(type_text(a) for a in args)})"


def instantiate_parametrised(rule: TypeRule, args: tuple[TypeExpr, ...], known: set[str] | None = None) -> TypeRule:
    """Monomorphic copy of ``rule`` named by its applied form.

    ``known`` lists the type names that count as concrete; when given, an
    argument naming anything else is rejected.
    """
    if len(args) != len(rule.params):
        raise ArityMismatch(f"type {rule.name} takes {len(rule.params)} arguments, got {len(args)}", rule.line, rule.col)
    if known is not None:
        for a in args:
            if isinstance(a, TRef) and a.name not in known and a.name not in PRIMITIVE_TYPES:
                raise NonConcreteArgument(f"type argument {a.name} is not a concrete type", rule.line, rule.col)
    binding = dict(zip(rule.params, args))
    alts = tuple(substitute_params(a, binding) for a in rule.alternatives)
    return TypeRule(applied_name(rule.name, args), (), alts, rule.line, rule.col)


# ---------------------------------------------------------------------------
# Automaton


class Label(NamedTuple):
    functor: object
    arity: int
    index: int  # 0 for constants
    mode: Mode

    def text(self) -> str:
        f = "cons" if self.functor == CONS else (format_const(Const(self.functor)) if not isinstance(self.functor, str) else self.functor)
        if self.arity == 0:
            return f"({f},0,{self.mode})"
        return f"({f},{self.arity},{self.index},{self.mode})"


@dataclass(frozen=True)
class Alternative:
    functor: object
    arity: int
    mode: Mode
    children: tuple[tuple[Mode, str], ...] = ()

    def dual(self) -> Alternative:
        return Alternative(
            self.functor,
            self.arity,
            self.mode.complement(),
            tuple((m.complement(), dual_name(s)) for m, s in self.children),
        )

    @property
    def key(self) -> tuple[object, int, Mode]:
        return (self.functor, self.arity, self.mode)

    def labels(self) -> list[tuple[Label, str]]:
        if self.arity == 0:
            return [(Label(self.functor, 0, 0, self.mode), ACCEPT)]
        return [(Label(self.functor, self.arity, i, m), s) for i, (m, s) in enumerate(self.children, 1)]


@dataclass
class StateInfo:
    name: str
    kind: str  # user dual-user procedure primitive wildcard literal accept
    alternatives: list[Alternative] = field(default_factory=list)
    primitives: list[tuple[str, Mode]] = field(default_factory=list)


class TypeAutomaton:
    def __init__(self) -> None:
        self.states: dict[str, StateInfo] = {}
        self.transitions: dict[tuple[str, Label], str] = {}
        self.user_types: list[str] = []
        self.user_procedures: list[str] = []

    # queries
    def dual(self, state: str) -> str:
        return dual_name(state)

    def kind(self, state: str) -> str:
        return self.states[state].kind

    def step(self, state: str, label: Label) -> str | None:
        return self.transitions.get((state, label))

    def alternatives(self, state: str) -> list[Alternative]:
        return self.states[state].alternatives

    def procedure_state(self, name: object, arity: int) -> str:
        return f"{name}/{arity}"

    def accepts_leaf(self, state: str, leaf: object, mode: Mode | None) -> bool:
        info = self.states.get(state)
        if info is None:
            return False
        if isinstance(leaf, Anonymous):
            return True
        if isinstance(leaf, Reader):
            return state_mode(state) is Mode.DOWN and info.kind != "procedure"
        if isinstance(leaf, Writer):
            return state_mode(state) is Mode.UP and info.kind != "procedure"
        if isinstance(leaf, FunctorLeaf):
            return info.kind == "wildcard" or any(
                a.functor == leaf.functor and a.arity == leaf.arity for a in info.alternatives
            )
        if isinstance(leaf, Const):
            if info.kind == "procedure":
                return any(a.functor == leaf.value and a.arity == 0 for a in info.alternatives)
            if info.kind == "wildcard":
                return mode is None or mode is state_mode(state)
            for a in info.alternatives:
                if a.arity == 0 and a.functor == leaf.value and Const(a.functor) == leaf and (mode is None or a.mode is mode):
                    return True
            return any(fits_primitive(p, leaf) and (mode is None or pm is mode) for p, pm in info.primitives)
        return False

    def accepts_path(self, start: str, path: ModedPath) -> bool:
        q = start
        if q not in self.states:
            return False
        for s in path.steps:
            if self.states[q].kind == "wildcard":
                return True
            q = self.transitions.get((q, Label(s.functor, s.arity, s.index, s.mode)))
            if q is None:
                return False
        if not path.steps and isinstance(path.leaf, Const):
            return self.accepts_leaf(q, path.leaf, path.root_mode)
        return self.accepts_leaf(q, path.leaf, path.leaf_mode)

    def run_path(self, start: str, steps: Iterable[Step]) -> str | None:
        """State reached by following ``steps``; wildcards absorb the rest."""
        q = start
        for s in steps:
            if q is None:
                return None
            if self.states[q].kind == "wildcard":
                return q
            q = self.transitions.get((q, Label(s.functor, s.arity, s.index, s.mode)))
        return q

    def outgoing(self, state: str) -> list[tuple[Label, str]]:
        out = []
        for a in self.states[state].alternatives:
            out.extend(a.labels())
        return out

    def reachable(self, roots: Iterable[str]) -> list[str]:
        seen: dict[str, None] = {}
        todo = deque(roots)
        while todo:
            q = todo.popleft()
            if q in seen or q not in self.states:
                continue
            seen[q] = None
            for _, t in self.outgoing(q):
                todo.append(t)
        return list(seen)

    def dump_lines(self, only: str | None = None) -> list[str]:
        """Transition listing, one ``State --label--> State`` per line."""
        if only is not None:
            states = [only]
        else:
            roots = self.user_procedures + self.user_types + [dual_name(t) for t in self.user_types]
            shown = ("user", "dual-user", "procedure")
            states = [q for q in self.reachable(roots) if self.states[q].kind in shown]
            closed = states + [dual_name(q) for q in states if self.states[q].kind != "procedure"]
            states = [q for q in self.reachable(closed) if self.states[q].kind in shown]
        lines = []
        for q in sorted(set(states)):
            if q not in self.states:
                raise UndefinedType(f"no state named {q}")
            for label, target in self.outgoing(q):
                shown = ACCEPT if is_literal_state(target) else target
                lines.append(f"{q} --{label.text()}--> {shown}")
        return lines

    def check_invariants(self) -> None:
        """Dual closure and involution, raising AssertionError on failure."""
        for (q, label), t in self.transitions.items():
            if self.states[q].kind == "procedure":
                continue
            d = self.transitions.get((dual_name(q), label._replace(mode=label.mode.complement())))
            assert d == dual_name(t), (q, label, t, d)
        for q in self.states:
            assert dual_name(dual_name(q)) == q


class AutomatonBuilder:
    """Builds states on demand from a resolved environment."""

    def __init__(self, env: ResolvedTypeEnv):
        self.env = env
        self.a = TypeAutomaton()
        self._pending: deque[str] = deque()
        self._defs: dict[str, tuple[TypeExpr, ...]] = {}
        self._add_fixed()

    def _add_fixed(self) -> None:
        a = self.a
        a.states[ACCEPT] = StateInfo(ACCEPT, "accept")
        a.states[WILDCARD] = StateInfo(WILDCARD, "wildcard")
        a.states[WILDCARD + "?"] = StateInfo(WILDCARD + "?", "wildcard")
        for p in sorted(CONSTANT_TYPES):
            a.states[p] = StateInfo(p, "primitive", primitives=[(p, Mode.UP)])
            a.states[p + "?"] = StateInfo(p + "?", "primitive", primitives=[(p, Mode.DOWN)])

    # state naming
    def state_of(self, t: TypeExpr) -> str:
        base = self._base_state(replace(t, dual=False))
        return dual_name(base) if t.dual else base

    def _base_state(self, t: TypeExpr) -> str:
        if isinstance(t, TConst):
            name = literal_state(Const(t.value))
            if name not in self.a.states:
                self._register(name, "literal", (t,))
            return name
        if isinstance(t, TCompound):
            name = type_text(t)
            if name not in self.a.states and name not in self._defs:
                self._register(name, "user", (t,))
            return name
        assert isinstance(t, TRef)
        if t.name in PRIMITIVE_TYPES and not t.args:
            return t.name
        if t.args:
            rule = self.env.lookup(t.name, len(t.args))
            if rule is None:
                raise UndefinedType(f"type {t.name}/{len(t.args)} is not defined")
            args = tuple(self._concrete(x) for x in t.args)
            name = applied_name(t.name, args)
            if name not in self.a.states and name not in self._defs:
                inst = instantiate_parametrised(rule, args)
                self._register(name, "user", inst.alternatives)
            return name
        rule = self.env.lookup(t.name)
        if rule is None:
            raise UndefinedType(f"type {t.name} is not defined")
        if t.name not in self.a.states and t.name not in self._defs:
            self._register(t.name, "user", rule.alternatives)
        return t.name

    def _concrete(self, t: TypeExpr) -> TypeExpr:
        """Type arguments naming no known type stand for the wildcard."""
        if isinstance(t, TRef) and not t.args and t.name not in PRIMITIVE_TYPES and self.env.lookup(t.name) is None:
            return TRef(WILDCARD, (), t.dual)
        if isinstance(t, TRef) and t.args:
            return replace(t, args=tuple(self._concrete(x) for x in t.args))
        if isinstance(t, TCompound):
            return replace(t, args=tuple(self._concrete(x) for x in t.args))
        return t

    def _register(self, name: str, kind: str, alts: tuple[TypeExpr, ...]) -> None:
        self._defs[name] = alts
        dual_kind = "dual-user" if kind == "user" else kind
        self.a.states[name] = StateInfo(name, kind)
        self.a.states[dual_name(name)] = StateInfo(dual_name(name), dual_kind)
        self._pending.append(name)

    # alternatives
    def _expand(self, name: str, alts: tuple[TypeExpr, ...], trail: tuple[str, ...] = ()) -> tuple[list[Alternative], list[tuple[str, Mode]]]:
        out: list[Alternative] = []
        prims: list[tuple[str, Mode]] = []
        for alt in alts:
            mode = Mode.DOWN if alt.dual else Mode.UP
            if isinstance(alt, TConst):
                out.append(Alternative(alt.value, 0, mode))
            elif isinstance(alt, TCompound):
                children = []
                for c in alt.args:
                    cm = Mode.DOWN if c.dual else Mode.UP
                    children.append((cm, self.state_of(c)))
                a = Alternative(alt.functor, len(alt.args), Mode.UP, tuple(children))
                out.append(a.dual() if alt.dual else a)
            elif isinstance(alt, TRef) and (alt.name in PRIMITIVE_TYPES) and not alt.args:
                prims.append((alt.name, mode))
            else:
                target = self._base_state(replace(alt, dual=False))
                if target in trail or target == name:
                    raise TypeError_(f"type {name} includes itself as an alternative")
                sub_alts, sub_prims = self._expand(target, self._defs[target], trail + (name,))
                if alt.dual:
                    sub_alts = [x.dual() for x in sub_alts]
                    sub_prims = [(p, m.complement()) for p, m in sub_prims]
                out.extend(sub_alts)
                prims.extend(sub_prims)
        return out, prims

    def _finish(self, name: str) -> None:
        alts, prims = self._expand(name, self._defs[name])
        keys = set()
        for x in alts:
            if x.key in keys:
                raise DeterminismViolation(f"type {name} has two alternatives with functor {x.functor}/{x.arity}")
            keys.add(x.key)
        self.a.states[name].alternatives = alts
        self.a.states[name].primitives = prims
        d = dual_name(name)
        self.a.states[d].alternatives = [x.dual() for x in alts]
        self.a.states[d].primitives = [(p, m.complement()) for p, m in prims]

    def add_type(self, name: str, user: bool = True) -> str:
        state = self.state_of(TRef(name))
        if user and state not in self.a.user_types:
            self.a.user_types.append(state)
        return state

    def add_procedure(self, name: object, arg_types: tuple[TypeExpr, ...], user: bool = True) -> str:
        state = f"{name}/{len(arg_types)}"
        children = tuple((Mode.DOWN if t.dual else Mode.UP, self.state_of(self._concrete(t))) for t in arg_types)
        alt = Alternative(name, len(arg_types), Mode.DOWN, children)
        self.a.states[state] = StateInfo(state, "procedure", [alt])
        if user and state not in self.a.user_procedures:
            self.a.user_procedures.append(state)
        return state

    def build(self) -> TypeAutomaton:
        while self._pending:
            self._finish(self._pending.popleft())
        a = self.a
        a.transitions.clear()
        for q, info in a.states.items():
            for alt in info.alternatives:
                for label, target in alt.labels():
                    prev = a.transitions.get((q, label))
                    if prev is not None and prev != target:
                        raise DeterminismViolation(f"state {q} has two transitions labelled {label.text()}")
                    a.transitions[(q, label)] = target
        return a


def build_automaton(
    env: ResolvedTypeEnv,
    user_types: Iterable[str] | None = None,
    user_procedures: Iterable[tuple[str, int]] | None = None,
) -> TypeAutomaton:
    """Automaton with states for every named type and declared procedure.

    ``user_types`` and ``user_procedures`` select what the dump shows; by
    default every rule and procedure of the environment counts.
    """
    b = AutomatonBuilder(env)
    ut = set(user_types) if user_types is not None else None
    up = set(user_procedures) if user_procedures is not None else None
    for (name, nparams), rule in env.rules.items():
        if nparams == 0:
            b.add_type(name, user=ut is None or name in ut)
    for key, types in env.procedures.items():
        b.add_procedure(key[0], types, user=up is None or key in up)
    return b.build()
