"""Static well-typing: moded clauses, pair rules, input coverage, subtyping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .kernel import (
    Anonymous,
    Compound,
    Const,
    FunctorLeaf,
    Mode,
    ModedPath,
    ModedTerm,
    Reader,
    RelaxationContext,
    Step,
    Term,
    Writer,
    check_srsw,
    format_moded,
    functor_of,
    is_var,
    moded_paths,
    positions,
    variables,
)
from .prelude import OTHERWISE, TypedProgram
from .syntax import Clause, GLPError, ProcedureDecl, predicate_key
from .typesystem import (
    CONSTANT_TYPES,
    TypeAutomaton,
    base_name,
    dual_name,
    fits_primitive,
    is_wildcard,
    state_mode,
)


class UnknownProcedure(GLPError):
    pass


class StructuralMismatch(GLPError):
    pass


# ---------------------------------------------------------------------------
# Mode assignment


@dataclass
class Annotation:
    """Modes and automaton states assigned to every position of one term."""

    moded: ModedTerm
    states: dict[tuple, str | None]
    ok: bool


def _swap(v: Term) -> Term:
    return v.pair() if isinstance(v, (Writer, Reader)) else v


def _assign(t: Term, pos: tuple, mode: Mode, state: str | None, a: TypeAutomaton, flip: bool,
            modes: dict, states: dict) -> bool:
    modes[pos] = mode
    states[pos] = state
    if is_var(t):
        leaf = _swap(t) if flip else t
        return state is not None and a.accepts_leaf(state, leaf, mode)
    info = a.states.get(state) if state is not None else None
    if info is None or info.kind == "wildcard":
        for p, _ in positions(t, pos):
            modes[p] = mode
            states[p] = state
        return info is not None
    if isinstance(t, Const):
        return a.accepts_leaf(state, t, mode)
    candidates = [alt for alt in info.alternatives if alt.functor == t.functor and alt.arity == t.arity]
    if not candidates:
        for p, _ in positions(t, pos):
            modes.setdefault(p, mode)
            states.setdefault(p, None)
        return False
    first = None
    for alt in candidates:
        m2: dict = {}
        s2: dict = {}
        ok = True
        for i, (arg, (cm, cs)) in enumerate(zip(t.args, alt.children), 1):
            ok = _assign(arg, pos + (i,), cm, cs, a, flip, m2, s2) and ok
        if ok:
            modes.update(m2)
            states.update(s2)
            return True
        if first is None:
            first = (m2, s2)
    modes.update(first[0])
    states.update(first[1])
    return False


def annotate_call(goal: Term, a: TypeAutomaton, root_mode: Mode | None = None, head: bool = False) -> Annotation:
    """Assign modes to a call from its procedure's declaration.

    A head gets the mode of its first argument at the root and has every
    variable replaced by its pair; any other call is produced (root ``↑``).
    """
    f, n = functor_of(goal)
    proc = a.procedure_state(f, n)
    if proc not in a.states:
        raise UnknownProcedure(f"no declaration for {f}/{n}")
    if root_mode is None:
        if head:
            (alt,) = a.alternatives(proc)
            root_mode = alt.children[0][0] if alt.children else Mode.DOWN
        else:
            root_mode = Mode.UP
    modes: dict = {}
    states: dict = {}
    ok = _assign(goal, (), root_mode, proc, a, head, modes, states)
    term = _flip_vars(goal) if head else goal
    return Annotation(ModedTerm(term, modes), states, ok)


def _flip_vars(t: Term) -> Term:
    if is_var(t):
        return _swap(t)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_flip_vars(x) for x in t.args))
    return t


def build_moded_head(head: Term, decl: ProcedureDecl | None, a: TypeAutomaton) -> ModedTerm:
    f, n = functor_of(head)
    if decl is not None and decl.key != (f, n):
        raise StructuralMismatch(f"head {f}/{n} does not match declaration {decl.name}/{decl.arity}")
    return annotate_call(head, a, head=True).moded


def produced_moded(goal: Term, a: TypeAutomaton) -> ModedTerm:
    return annotate_call(goal, a).moded


# ---------------------------------------------------------------------------
# Path consistency


@dataclass(frozen=True)
class TypePath:
    """A path through the automaton: steps from a start state to an end.

    ``end`` is the state reached, or a constant when the last edge was a
    constant alternative.
    """

    root_mode: Mode
    steps: tuple[Step, ...]
    end: object
    end_mode: Mode

    def __str__(self) -> str:
        shown = ModedPath(self.root_mode, self.steps, Anonymous(0))
        text = str(shown)[:-1]
        return text + (str(self.end) if not isinstance(self.end, Const) else f"{self.end.value}")


def type_paths(a: TypeAutomaton, start: str, max_depth: int, root_mode: Mode = Mode.DOWN,
               only_input: bool = False) -> list[TypePath]:
    """Type paths from ``start`` up to ``max_depth`` edges.

    With ``only_input`` the first edge must be a consumed argument.  A path
    stops at a constant, a primitive, a wildcard, or the depth bound.
    """
    out: list[TypePath] = []

    def walk(q: str, steps: tuple[Step, ...], mode: Mode) -> None:
        info = a.states[q]
        if info.kind in ("wildcard", "primitive") or len(steps) >= max_depth:
            out.append(TypePath(root_mode, steps, q, mode))
            return
        for p, pm in info.primitives:
            out.append(TypePath(root_mode, steps, p + ("?" if pm is Mode.DOWN else ""), pm))
        for alt in info.alternatives:
            if alt.arity == 0:
                if info.kind != "procedure":
                    out.append(TypePath(root_mode, steps, Const(alt.functor), alt.mode))
                continue
            for i, (cm, cs) in enumerate(alt.children, 1):
                if only_input and not steps and cm is not Mode.DOWN:
                    continue
                walk(cs, steps + (Step(alt.functor, alt.arity, i, cm),), cm)

    walk(start, (), root_mode)
    return out


def paths_consistent(x: ModedPath, y: TypePath, a: TypeAutomaton) -> bool:
    """Consistency of a term path with a type path.

    The common prefix must agree on functor, arity, index and mode; the
    symbols at the shorter length must be compatible.
    """
    if x.root_mode != y.root_mode:
        return False
    k = min(len(x.steps), len(y.steps))
    if x.steps[:k] != y.steps[:k]:
        return False
    if len(x.steps) == len(y.steps):
        mode = x.leaf_mode
        if isinstance(y.end, Const):
            if isinstance(x.leaf, Const):
                return x.leaf == y.end and mode is y.end_mode
            return _var_fits_mode(x.leaf, y.end_mode)
        return a.accepts_leaf(y.end, x.leaf, mode)
    if len(x.steps) < len(y.steps):
        # the term stops where the type continues
        if isinstance(x.leaf, FunctorLeaf):
            return (x.leaf.functor, x.leaf.arity) == (y.steps[k].functor, y.steps[k].arity)
        return _var_fits_mode(x.leaf, x.leaf_mode)
    # the term continues where the type stops
    if isinstance(y.end, Const):
        return False
    if is_wildcard(y.end):
        return state_mode(y.end) is (x.steps[k - 1].mode if k else x.root_mode)
    nxt = x.steps[k]
    return any(alt.functor == nxt.functor and alt.arity == nxt.arity for alt in a.alternatives(y.end))


def _var_fits_mode(leaf: object, mode: Mode) -> bool:
    if isinstance(leaf, Anonymous):
        return True
    if isinstance(leaf, Reader):
        return mode is Mode.DOWN
    if isinstance(leaf, Writer):
        return mode is Mode.UP
    return False


def well_typed_moded_term(t: ModedTerm, start: str, a: TypeAutomaton) -> ModedPath | None:
    """None when ``t`` is well-typed from ``start``, else the least failing path.

    Besides path acceptance, a writer and its reader inside ``t`` must sit
    at dual states.
    """
    bad = [p for p in moded_paths(t) if not a.accepts_path(start, p)]
    if bad:
        return min(bad, key=str)
    seen: dict[int, list[tuple[Term, str | None, ModedPath]]] = {}
    for p in moded_paths(t):
        if isinstance(p.leaf, (Writer, Reader)):
            seen.setdefault(p.leaf.id, []).append((p.leaf, a.run_path(start, p.steps), p))
    for occ in seen.values():
        ws = [o for o in occ if isinstance(o[0], Writer)]
        rs = [o for o in occ if isinstance(o[0], Reader)]
        for w in ws:
            for r in rs:
                if w[1] is None or r[1] is None or w[1] != dual_name(r[1]):
                    if not (is_wildcard(w[1] or "") or is_wildcard(r[1] or "")):
                        return min(w[2], r[2], key=str)
    return None


# ---------------------------------------------------------------------------
# Subtyping

_WIDENS = {
    ("Integer", "Number"), ("Real", "Number"),
    ("Integer", "Exp"), ("Real", "Exp"), ("Number", "Exp"),
    ("Integer", "Constant"), ("Real", "Constant"), ("Number", "Constant"), ("String", "Constant"),
}


def widens(a: str, b: str) -> bool:
    """Whether every value of base type ``a`` is a value of base type ``b``."""
    return a == b or b == "_" or (a, b) in _WIDENS


def is_subtype(A: str, B: str, a: TypeAutomaton, _assumed: set | None = None) -> bool:
    """Coinductive subtyping between states of the automaton.

    Every alternative of ``A`` must occur in ``B`` with the same child
    modes.  Produced children recurse in the same direction, consumed
    children in the reverse one.  Pairs under examination are assumed to
    hold, which yields the greatest fixpoint.
    """
    if A == B:
        return True
    if state_mode(A) is not state_mode(B):
        return False
    if state_mode(A) is Mode.DOWN:
        return is_subtype(dual_name(B), dual_name(A), a, _assumed)
    if is_wildcard(B):
        return True
    assumed = set() if _assumed is None else _assumed
    if (A, B) in assumed:
        return True
    ia, ib = a.states.get(A), a.states.get(B)
    if ia is None or ib is None:
        return False
    if ia.kind == "wildcard":
        return False
    if ia.kind == "primitive":
        if ib.kind == "primitive":
            return widens(base_name(A), base_name(B))
        return any(widens(base_name(A), p) and m is Mode.UP for p, m in ib.primitives)
    if ia.kind == "literal":
        (alt,) = ia.alternatives
        return a.accepts_leaf(B, Const(alt.functor), alt.mode)
    assumed.add((A, B))
    by_key = {alt.key: alt for alt in ib.alternatives}
    for alt in ia.alternatives:
        other = by_key.get(alt.key)
        if other is None:
            if alt.arity == 0 and any(fits_primitive(p, Const(alt.functor)) and m is alt.mode for p, m in ib.primitives):
                continue
            return False
        for (ma, sa), (mb, sb) in zip(alt.children, other.children):
            if ma is not mb:
                return False
            if ma is Mode.UP:
                if not is_subtype(sa, sb, a, assumed):
                    return False
            elif not is_subtype(dual_name(sb), dual_name(sa), a, assumed):
                return False
    for p, m in ia.primitives:
        if not any(widens(p, q) and m is qm for q, qm in ib.primitives):
            return False
    return True


# ---------------------------------------------------------------------------
# Clauses


@dataclass(frozen=True)
class VarOccurrence:
    var: Term  # as written in the source clause
    section: str  # "head" or "body"; guards count as body
    goal: int  # -1 for the head
    pos: tuple
    state: str | None


@dataclass
class ModedClause:
    clause: Clause
    moded_head: ModedTerm
    moded_body: list[ModedTerm]
    body_keys: list[tuple]
    guard_count: int
    occurrences: list[VarOccurrence] = field(default_factory=list)

    @property
    def var_types(self) -> dict[tuple, str | None]:
        """Occurrence (section, goal, position) to the state at that position."""
        return {(o.section, o.goal, o.pos): o.state for o in self.occurrences}

    def var_table(self) -> dict[str, str]:
        """Variable form in the moded clause to its type, plus its pair's dual."""
        out: dict[str, str] = {}
        for o in self.occurrences:
            if isinstance(o.var, Anonymous) or o.state is None:
                continue
            form = _swap(o.var) if o.section == "head" else o.var
            out.setdefault(_name(form), o.state)
            out.setdefault(_name(_swap(form)), dual_name(o.state))
        return out

    def format(self, goals: Iterable[int] | None = None) -> str:
        idx = range(len(self.moded_body)) if goals is None else goals
        body = [format_moded(self.moded_body[i]) for i in idx]
        head = format_moded(self.moded_head)
        return f"{head} :- {', '.join(body)}." if body else f"{head}."


def _name(v: Term) -> str:
    return f"{v.name}?" if isinstance(v, Reader) else v.name


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    where: str
    reason: str

    def format(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.where}: {self.reason}"


def _integer_valued(expr: Term, int_vars: set[int]) -> bool:
    match expr:
        case Const(kind="int"):
            return True
        case Reader(id=vid):
            return vid in int_vars
        case Compound(functor="-" | "neg", args=(x,)):
            return _integer_valued(x, int_vars)
        case Compound(functor="+" | "-" | "*" | "//" | "mod", args=(x, y)):
            return _integer_valued(x, int_vars) and _integer_valued(y, int_vars)
    return False


def _checked_goals(clause: Clause) -> list[Term]:
    return [g for g in clause.guard if functor_of(g) != OTHERWISE] + list(clause.body)


def build_moded_clause(clause: Clause, p: TypedProgram) -> tuple[ModedClause, list[Annotation]]:
    a = p.automaton
    head = annotate_call(clause.head, a, head=True)
    goals = _checked_goals(clause)
    anns = [head]
    body = []
    for g in goals:
        ann = annotate_call(g, a)
        anns.append(ann)
        body.append(ann.moded)
    occ: list[VarOccurrence] = []
    for k, (ann, src) in enumerate(zip(anns, [clause.head] + goals)):
        section = "head" if k == 0 else "body"
        for pos, v in variables(src):
            occ.append(VarOccurrence(v, section, k - 1, pos, ann.states.get(pos)))
    occ = _refine_assignments(occ, goals)
    mc = ModedClause(clause, head.moded, body, [functor_of(g) for g in goals],
                     len([g for g in clause.guard if functor_of(g) != OTHERWISE]), occ)
    return mc, anns


def _refine_assignments(occ: list[VarOccurrence], goals: list[Term]) -> list[VarOccurrence]:
    """Type ``X := E`` results as Integer when ``E`` is integer-valued."""
    assigns = [(k, g) for k, g in enumerate(goals) if functor_of(g) == (":=", 2) and isinstance(g.args[0], Writer)]
    if not assigns:
        return occ
    refined: set[int] = set()
    while True:
        ints = {o.var.id for o in occ if isinstance(o.var, (Writer, Reader)) and o.state and base_name(o.state) == "Integer"}
        new = {g.args[0].id for _, g in assigns if _integer_valued(g.args[1], ints)} - refined
        if not new:
            return occ
        refined |= new
        occ = [
            VarOccurrence(o.var, o.section, o.goal, o.pos, "Integer")
            if isinstance(o.var, Writer) and o.var.id in new and o.section == "body" and o.pos == (1,)
            and functor_of(goals[o.goal]) == (":=", 2)
            else o
            for o in occ
        ]


def assign_variable_types(clause: Clause, p: TypedProgram) -> dict[str, str]:
    mc, _ = build_moded_clause(clause, p)
    return mc.var_table()


def _pair_ok(w: VarOccurrence, r: VarOccurrence, a: TypeAutomaton, subtyping: bool) -> bool:
    ws, rs = w.state, r.state
    if ws is None or rs is None:
        return False
    if w.section == "head" and r.section == "head":
        return ws == dual_name(rs)
    if w.section == "body" and r.section == "body":
        if subtyping:
            return is_subtype(ws, dual_name(rs), a)
        return ws == dual_name(rs)
    # head-body: the same type, where a consuming occurrence may widen
    if ws == rs:
        return True
    src, sink = (ws, rs) if w.section == "head" else (ws, rs)
    return state_mode(src) is state_mode(sink) and widens(base_name(src), base_name(sink))


@dataclass
class ClauseResult:
    moded: ModedClause | None
    diagnostics: list[Diagnostic]


def check_clause(clause: Clause, p: TypedProgram, subtyping: bool = True) -> ClauseResult:
    """Head, body goals and variable pairs of one clause."""
    a = p.automaton
    f, n = clause.key
    where = f"{f}/{n}"
    diags: list[Diagnostic] = []

    def report(reason: str) -> None:
        diags.append(Diagnostic(clause.line, clause.col, where, reason))

    try:
        mc, anns = build_moded_clause(clause, p)
    except UnknownProcedure as e:
        report(str(e))
        return ClauseResult(None, diags)
    starts = [a.procedure_state(f, n)] + [a.procedure_state(*k) for k in mc.body_keys]
    terms = [mc.moded_head] + mc.moded_body
    for k, (t, start) in enumerate(zip(terms, starts)):
        bad = well_typed_moded_term(t, start, a)
        if bad is not None:
            part = "head" if k == 0 else f"goal {format_moded(t)}"
            report(f"path {bad} of the {part} is not consistent with the declared types")
    by_id: dict[int, list[VarOccurrence]] = {}
    for o in mc.occurrences:
        if isinstance(o.var, (Writer, Reader)):
            by_id.setdefault(o.var.id, []).append(o)
    for vid, occ in by_id.items():
        ws = [o for o in occ if isinstance(o.var, Writer)]
        rs = [o for o in occ if isinstance(o.var, Reader)]
        for w in ws:
            for r in rs:
                if not _pair_ok(w, r, a, subtyping):
                    report(
                        f"{_name(w.var)}:{w.state} in the {w.section} and {_name(r.var)}:{r.state} "
                        f"in the {r.section} have incompatible types"
                    )
    return ClauseResult(mc, diags)


def relaxation_for(clause: Clause, mc: ModedClause | None, p: TypedProgram) -> RelaxationContext:
    constant: set[int] = set()
    if mc is not None:
        for o in mc.occurrences:
            if isinstance(o.var, (Writer, Reader)) and o.state and base_name(o.state) in CONSTANT_TYPES:
                constant.add(o.var.id)
    ground: set[int] = set()
    for g in clause.guard:
        info = p.guards.get(functor_of(g))
        if info is not None and info.ground:
            for _, v in variables(g):
                if isinstance(v, Reader):
                    ground.add(v.id)
    return RelaxationContext(frozenset(constant), frozenset(ground))


# ---------------------------------------------------------------------------
# Input coverage


@dataclass
class CoverageGap:
    procedure: tuple
    witness: ModedTerm
    path: ModedPath | None

    def __str__(self) -> str:
        return f"no clause of {self.procedure[0]}/{self.procedure[1]} accepts input {format_moded(self.witness)}"


def _var_at_or_above(t: Term, pos: tuple) -> bool:
    for i in pos:
        if is_var(t):
            return True
        if not isinstance(t, Compound) or i > t.arity:
            return False
        t = t.args[i - 1]
    return is_var(t)


def _node_at(t: Term, pos: tuple) -> Term | None:
    for i in pos:
        if not isinstance(t, Compound) or i > t.arity:
            return None
        t = t.args[i - 1]
    return t


def _fresh_literal(state: str, heads: list[Term], survivors: Iterable[int], pos: tuple) -> Const:
    used = [_node_at(heads[c], pos) for c in survivors]
    used = [u for u in used if isinstance(u, Const)]
    base = base_name(state)
    if base in ("Integer", "Number"):
        ints = [u.value for u in used if u.kind == "int"]
        return Const(max(ints) + 1 if ints else 0)
    if base == "Real":
        reals = [u.value for u in used if u.kind == "real"]
        return Const(max(reals) + 1.5 if reals else 0.5)
    names = {u.value for u in used if u.kind == "str"}
    k = 0
    while f"w{k}" in names:
        k += 1
    return Const(f"w{k}")


def check_input_coverage(key: tuple, clauses: list[Clause], a: TypeAutomaton) -> CoverageGap | None:
    """Find an input accepted by no clause head, or None when covered.

    Walks the consumed part of the declared type and the clause heads
    together.  The frontier holds input positions still to be decided; a
    position is dropped once every surviving clause has a variable at or
    above it.  Produced children are never explored.
    """
    proc = a.procedure_state(*key)
    (palt,) = a.alternatives(proc)
    heads = [c.head for c in clauses]
    start = tuple(((i,), s) for i, (m, s) in enumerate(palt.children, 1) if m is Mode.DOWN)
    seen: set = set()

    def explore(frontier: tuple, survivors: frozenset, chosen: dict) -> dict | None:
        if not survivors:
            return chosen
        frontier = tuple(f for f in frontier if not all(_var_at_or_above(heads[c], f[0]) for c in survivors))
        if not frontier:
            return None
        memo = (frontier, survivors, tuple(sorted(chosen.items(), key=lambda kv: kv[0])))
        if memo in seen:
            return None
        seen.add(memo)
        (pos, state), rest = frontier[0], frontier[1:]
        info = a.states[state]
        if info.kind in ("wildcard", "primitive"):
            lit = _fresh_literal(state, heads, survivors, pos)
            surv = frozenset(c for c in survivors if _var_at_or_above(heads[c], pos))
            return explore(rest, surv, {**chosen, pos: lit})
        for alt in info.alternatives:
            if alt.mode is not Mode.DOWN:
                continue
            surv = frozenset(c for c in survivors if _matches(heads[c], pos, alt.functor, alt.arity))
            new = tuple((pos + (i,), s) for i, (m, s) in enumerate(alt.children, 1) if m is Mode.DOWN)
            g = explore(rest + new, surv, {**chosen, pos: (alt.functor, alt.arity)})
            if g is not None:
                return g
        for prim, m in info.primitives:
            if m is not Mode.DOWN:
                continue
            lit = _fresh_literal(prim, heads, survivors, pos)
            surv = frozenset(c for c in survivors if _var_at_or_above(heads[c], pos))
            g = explore(rest, surv, {**chosen, pos: lit})
            if g is not None:
                return g
        return None

    chosen = explore(start, frozenset(range(len(heads))), {})
    if chosen is None:
        return None
    witness = _build_witness(key, chosen)
    ann = annotate_call(witness, a, root_mode=Mode.DOWN)
    last = max(chosen, key=lambda p: (len(p), p))
    path = next((pth for pth in moded_paths(ann.moded) if _path_pos(pth)[: len(last)] == last), None)
    return CoverageGap(key, ann.moded, path)


def _path_pos(p: ModedPath) -> tuple:
    return tuple(s.index for s in p.steps)


def _matches(head: Term, pos: tuple, functor: object, arity: int) -> bool:
    if _var_at_or_above(head, pos):
        return True
    node = _node_at(head, pos)
    if node is None:
        return False
    if arity == 0:
        return isinstance(node, Const) and node == Const(functor)
    return isinstance(node, Compound) and node.functor == functor and node.arity == arity


def _build_witness(key: tuple, chosen: dict) -> Term:
    f, n = key

    def build(pos: tuple, choice: object) -> Term:
        if isinstance(choice, Const):
            return choice
        if choice is None:
            return Anonymous(0)
        fn, ar = choice
        if ar == 0:
            return Const(fn)
        return Compound(fn, tuple(build(pos + (i,), chosen.get(pos + (i,))) for i in range(1, ar + 1)))

    if n == 0:
        return Const(f)
    return Compound(f, tuple(build((i,), chosen.get((i,))) for i in range(1, n + 1)))


# ---------------------------------------------------------------------------
# Programs


@dataclass
class CheckReport:
    diagnostics: list[Diagnostic] = field(default_factory=list)
    coverage_gaps: list[CoverageGap] = field(default_factory=list)
    moded: dict[tuple, list[ModedClause]] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "ill-typed" if self.diagnostics or self.coverage_gaps else "well-typed"

    @property
    def well_typed(self) -> bool:
        return self.verdict == "well-typed"


def check_program(p: TypedProgram, subtyping: bool = True) -> CheckReport:
    """Every check on the user's procedures, collecting all failures."""
    rep = CheckReport()
    for e in p.problems:
        rep.diagnostics.append(Diagnostic(e.line or 0, e.col or 0, "program", e.message))
    for key in p.user_procedures:
        where = f"{key[0]}/{key[1]}"
        clauses = p.clauses(key)
        decl = p.decls.get(key)
        if decl is None:
            for c in clauses:
                rep.diagnostics.append(Diagnostic(c.line, c.col, where, "procedure has no type declaration"))
            continue
        if not clauses:
            rep.diagnostics.append(Diagnostic(decl.line or 0, decl.col or 0, where, "procedure is declared but has no clauses"))
            continue
        mcs = []
        clean = True
        for c in clauses:
            res = check_clause(c, p, subtyping)
            srsw = check_srsw(c, relaxation_for(c, res.moded, p))
            if srsw is not None:
                rep.diagnostics.append(Diagnostic(c.line, c.col, where, f"SRSW violated: {srsw}"))
                clean = False
            if res.diagnostics:
                clean = False
            rep.diagnostics.extend(res.diagnostics)
            if res.moded is not None:
                mcs.append(res.moded)
        rep.moded[key] = mcs
        if clean:
            gap = check_input_coverage(key, clauses, p.automaton)
            if gap is not None:
                rep.coverage_gaps.append(gap)
    return rep


def listing_goals(mc: ModedClause, p: TypedProgram) -> list[int]:
    """Body goals that call user procedures, skipping guards and builtins."""
    return [
        i for i, k in enumerate(mc.body_keys)
        if i >= mc.guard_count and k in p.user_procedures
    ]


def moded_listing(p: TypedProgram, report: CheckReport | None = None) -> list[str]:
    """One line per clause: the moded head and its user-procedure goals."""
    report = report or check_program(p)
    lines = []
    for key in p.user_procedures:
        for mc in report.moded.get(key, []):
            lines.append(mc.format(listing_goals(mc, p)))
    return lines


__all__ = [
    "Annotation", "CheckReport", "ClauseResult", "CoverageGap", "Diagnostic", "ModedClause",
    "StructuralMismatch", "TypePath", "UnknownProcedure", "VarOccurrence",
    "annotate_call", "assign_variable_types", "build_moded_clause", "build_moded_head",
    "check_clause", "check_input_coverage", "check_program", "is_subtype", "listing_goals",
    "moded_listing", "paths_consistent", "predicate_key", "produced_moded", "type_paths",
    "well_typed_moded_term", "widens",
]
