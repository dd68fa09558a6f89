"""Predefined types, guards and system predicates, and program assembly.

Every program is checked and run together with the prelude.  A user
program may restate a prelude type or procedure declaration verbatim (its
clauses then replace the prelude's), but may not change one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .syntax import (
    PRIMITIVE_TYPES,
    Clause,
    GLPError,
    ProcedureDecl,
    SourceProgram,
    TypeRule,
    parse_declarations,
    parse_program,
)
from .typesystem import (
    ResolvedTypeEnv,
    TypeAutomaton,
    build_automaton,
    is_alias,
    resolve_aliases,
)

PRELUDE_TYPES = """
Stream ::= [] ; [_|Stream].
DiffList ::= Stream \\ Stream?.
Channel ::= ch(Stream, Stream?).
Exp ::= Number ; +(Exp, Exp) ; -(Exp, Exp) ; *(Exp, Exp) ;
        /(Exp, Exp) ; //(Exp, Exp) ; mod(Exp, Exp) ; neg(Exp).
"""

PRELUDE_PROCEDURES = """
procedure dl_append(DiffList?, DiffList?, DiffList).
dl_append(A\\B?, B\\C?, A?\\C).

procedure dl_to_list(DiffList?, Stream).
dl_to_list(Xs\\[], Xs?).

procedure new_channel(Channel, Channel).
new_channel(ch(Xs?, Ys), ch(Ys?, Xs)).

procedure send(_?, Channel?, Channel).
send(X, ch(In, [X?|Out?]), ch(In?, Out)).

procedure receive(_, Channel?, Channel).
receive(X?, ch([X|In], Out?), ch(In?, Out)).
"""

# Implemented natively by the runtime.
SYSTEM_SIGNATURES = """
procedure =(_, _?).
procedure :=(Number, Exp?).
procedure =..(_, Stream?).
procedure ..=(Stream, _?).
"""

# (signature, success implies the arguments are ground)
TYPE_GUARDS = [
    ("procedure integer(Integer?).", True),
    ("procedure number(Number?).", True),
    ("procedure string(String?).", True),
    ("procedure atom(String?).", True),
    ("procedure constant(Constant?).", True),
    ("procedure compound(_?).", False),
    ("procedure is_list(Stream?).", False),
    ("procedure ground(_?).", True),
    ("procedure known(_?).", False),
    ("procedure unknown(_?).", False),
    ("procedure =?=(_?, _?).", True),
]

COMPARISON_GUARDS = [f"procedure {op}(Exp?, Exp?)." for op in ("<", ">", "=<", ">=", "=:=", "=\\=")]

OTHERWISE = ("otherwise", 0)


class PreludeRedefinition(GLPError):
    pass


@dataclass(frozen=True)
class GuardInfo:
    decl: ProcedureDecl
    ground: bool
    comparison: bool = False


@dataclass(frozen=True)
class Prelude:
    rules: tuple[TypeRule, ...]
    procedures: dict
    clauses: dict
    system: dict
    guards: dict


@lru_cache(maxsize=1)
def load_prelude() -> Prelude:
    types = parse_program(PRELUDE_TYPES)
    procs = parse_program(PRELUDE_PROCEDURES)
    clauses: dict = {}
    for c in procs.clauses:
        clauses.setdefault(c.key, []).append(c)
    system = {d.key: d for d in parse_declarations(SYSTEM_SIGNATURES)}
    guards = {}
    for sig, ground in TYPE_GUARDS:
        (d,) = parse_declarations(sig)
        guards[d.key] = GuardInfo(d, ground)
    for sig in COMPARISON_GUARDS:
        (d,) = parse_declarations(sig)
        guards[d.key] = GuardInfo(d, True, comparison=True)
    guards[OTHERWISE] = GuardInfo(ProcedureDecl("otherwise", ()), False)
    return Prelude(
        tuple(types.rules),
        {d.key: d for d in procs.declarations},
        {k: tuple(v) for k, v in clauses.items()},
        system,
        guards,
    )


@dataclass
class TypedProgram:
    """A user program merged with the prelude, aliases resolved."""

    source: SourceProgram
    env: ResolvedTypeEnv
    automaton: TypeAutomaton
    decls: dict[tuple, ProcedureDecl]
    procedures: dict[tuple, list[Clause]]
    user_procedures: list[tuple]
    user_types: list[str]
    guards: dict[tuple, GuardInfo]
    system: dict[tuple, ProcedureDecl]
    problems: list[GLPError] = field(default_factory=list)

    def is_guard(self, key: tuple) -> bool:
        return key in self.guards

    def is_system(self, key: tuple) -> bool:
        return key in self.system

    def signature(self, key: tuple) -> ProcedureDecl | None:
        if key in self.decls:
            return self.decls[key]
        if key in self.system:
            return self.system[key]
        g = self.guards.get(key)
        return g.decl if g else None

    def clauses(self, key: tuple) -> list[Clause]:
        return self.procedures.get(key, [])


def build_program(source: SourceProgram, with_prelude: bool = True) -> TypedProgram:
    pre = load_prelude() if with_prelude else Prelude((), {}, {}, {}, {})
    problems: list[GLPError] = []

    rules: dict[tuple, TypeRule] = {r.key: r for r in pre.rules}
    user_types = []
    for r in source.rules:
        old = rules.get(r.key)
        if old is not None and old in pre.rules:
            if old.alternatives != r.alternatives:
                problems.append(PreludeRedefinition(f"type {r.name} differs from the predefined type", r.line, r.col))
                continue
        rules[r.key] = r
        if not r.params and not is_alias(r):
            user_types.append(r.name)

    decls = dict(pre.procedures)
    procedures: dict[tuple, list[Clause]] = {k: list(v) for k, v in pre.clauses.items()}
    user_procs = []
    for d in source.declarations:
        if d.key in pre.system or d.key in pre.guards:
            problems.append(PreludeRedefinition(f"{d.name}/{d.arity} is a predefined predicate", d.line, d.col))
            continue
        old = pre.procedures.get(d.key)
        if old is not None and old.arg_types != d.arg_types:
            problems.append(PreludeRedefinition(f"declaration of {d.name}/{d.arity} differs from the predefined one", d.line, d.col))
            continue
        decls[d.key] = d
        procedures[d.key] = []
        user_procs.append(d.key)
    for c in source.clauses:
        key = c.key
        if key in pre.system or key in pre.guards:
            problems.append(PreludeRedefinition(f"clause for predefined predicate {key[0]}/{key[1]}", c.line, c.col))
            continue
        if key not in user_procs:
            if key in pre.clauses and key not in decls:
                continue
            if key in pre.clauses:
                procedures[key] = []
            user_procs.append(key)
        procedures.setdefault(key, []).append(c)

    builtin = list(pre.system.values()) + [g.decl for k, g in pre.guards.items() if k != OTHERWISE]
    env = resolve_aliases(rules.values(), list(decls.values()) + builtin)
    automaton = build_automaton(env, user_types=user_types, user_procedures=[k for k in user_procs if k in decls])
    return TypedProgram(
        source=source,
        env=env,
        automaton=automaton,
        decls=decls,
        procedures=procedures,
        user_procedures=user_procs,
        user_types=user_types,
        guards=dict(pre.guards),
        system=dict(pre.system),
        problems=problems,
    )


def load_program(text: str, require_declarations: bool = True, with_prelude: bool = True) -> TypedProgram:
    return build_program(parse_program(text, require_declarations=require_declarations), with_prelude)


def is_constant_type(t) -> bool:
    """Whether a declared type expression denotes ground constants."""
    from .syntax import TRef

    return isinstance(t, TRef) and not t.args and t.name in PRIMITIVE_TYPES - {"_"}


__all__ = [
    "GuardInfo", "OTHERWISE", "Prelude", "PreludeRedefinition", "TypedProgram",
    "build_program", "load_prelude", "load_program", "is_constant_type",
]
