"""Core term representation for GLP.

Terms are immutable trees.  A variable is identified by an integer ``id``;
a writer ``X`` and its reader ``X?`` share that id and differ only in their
class.  Anonymous variables get fresh ids and are never paired.

Positions inside a term are tuples of 1-based argument indices, so ``()``
is the root and ``(3, 2)`` is the second argument of the third argument.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Union

Position = tuple[int, ...]


class Mode(Enum):
    UP = "↑"
    DOWN = "↓"

    def complement(self) -> Mode:
        return Mode.DOWN if self is Mode.UP else Mode.UP

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> Mode:
        if text in ("↑", "^"):
            return cls.UP
        if text in ("↓", "v"):
            return cls.DOWN
        raise ValueError(f"not a mode annotation: {text!r}")


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Writer:
    id: int
    name: str = field(default="", compare=False)

    def pair(self) -> Reader:
        return Reader(self.id, self.name)


@dataclass(frozen=True)
class Reader:
    id: int
    name: str = field(default="", compare=False)

    def pair(self) -> Writer:
        return Writer(self.id, self.name)


@dataclass(frozen=True)
class Anonymous:
    id: int
    name: str = field(default="_", compare=False)

    def pair(self) -> Anonymous:
        return self


@dataclass(frozen=True)
class Const:
    """A constant: integer, real, string (atoms are strings) or ``[]``."""

    value: int | float | str
    kind: str = field(init=False)

    def __post_init__(self) -> None:
        v = self.value
        if isinstance(v, bool):
            raise TypeError("booleans are not GLP constants")
        if isinstance(v, int):
            kind = "int"
        elif isinstance(v, float):
            kind = "real"
        elif v == "[]":
            kind = "nil"
        else:
            kind = "str"
        object.__setattr__(self, "kind", kind)

    @property
    def is_number(self) -> bool:
        return self.kind in ("int", "real")

    @property
    def is_string(self) -> bool:
        return self.kind == "str"


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple[Term, ...]

    def __post_init__(self) -> None:
        if not self.args:
            raise ValueError("a compound term needs at least one argument")

    @property
    def arity(self) -> int:
        return len(self.args)


Term = Union[Writer, Reader, Anonymous, Const, Compound]
Variable = (Writer, Reader, Anonymous)

NIL = Const("[]")
CONS = "."


def is_var(t: Term) -> bool:
    return isinstance(t, Variable)


def cons(head: Term, tail: Term) -> Compound:
    return Compound(CONS, (head, tail))


def make_list(items: Iterable[Term], tail: Term = NIL) -> Term:
    out = tail
    for item in reversed(list(items)):
        out = cons(item, out)
    return out


def list_items(t: Term) -> tuple[list[Term], Term]:
    """Split a list term into its elements and its tail."""
    items = []
    while isinstance(t, Compound) and t.functor == CONS and t.arity == 2:
        items.append(t.args[0])
        t = t.args[1]
    return items, t


def functor_of(t: Term) -> tuple[object, int]:
    """(functor, arity) of a non-variable term; constants have arity 0."""
    if isinstance(t, Compound):
        return t.functor, t.arity
    if isinstance(t, Const):
        return t.value, 0
    raise TypeError(f"variables have no functor: {t!r}")


def subterm(t: Term, pos: Position) -> Term:
    for i in pos:
        if not isinstance(t, Compound):
            raise KeyError(pos)
        t = t.args[i - 1]
    return t


def positions(t: Term, prefix: Position = ()) -> Iterator[tuple[Position, Term]]:
    """All (position, subterm) pairs in depth-first, left-to-right order."""
    stack = [(prefix, t)]
    while stack:
        pos, s = stack.pop()
        yield pos, s
        if isinstance(s, Compound):
            for i in range(s.arity, 0, -1):
                stack.append((pos + (i,), s.args[i - 1]))


def variables(t: Term) -> Iterator[tuple[Position, Term]]:
    for pos, s in positions(t):
        if isinstance(s, Variable):
            yield pos, s


def var_ids(terms: Iterable[Term]) -> set[int]:
    out = set()
    for t in terms:
        for _, v in variables(t):
            out.add(v.id)
    return out


def is_ground(t: Term) -> bool:
    return not any(True for _ in variables(t))


def map_vars(t: Term, fn: Callable[[Term], Term]) -> Term:
    """Rebuild ``t`` with every variable leaf replaced by ``fn(leaf)``."""
    if isinstance(t, Variable):
        return fn(t)
    if isinstance(t, Compound):
        args = tuple(map_vars(a, fn) for a in t.args)
        if all(a is b for a, b in zip(args, t.args)):
            return t
        return Compound(t.functor, args)
    return t


def replace_at(t: Term, pos: Position, new: Term) -> Term:
    if not pos:
        return new
    assert isinstance(t, Compound)
    i = pos[0]
    args = list(t.args)
    args[i - 1] = replace_at(args[i - 1], pos[1:], new)
    return Compound(t.functor, tuple(args))


def term_depth(t: Term) -> int:
    if isinstance(t, Compound):
        return 1 + max(term_depth(a) for a in t.args)
    return 0


# ---------------------------------------------------------------------------
# Canonical text

_ATOM_RE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")
INFIX_OPS = {
    "=": 700, ":=": 700, "=..": 700, "..=": 700, "=?=": 700,
    "<": 700, ">": 700, "=<": 700, ">=": 700, "=:=": 700, "=\\=": 700,
    "\\": 600,
    "+": 500, "-": 500,
    "*": 400, "/": 400, "//": 400, "mod": 400,
}


def format_const(c: Const) -> str:
    v = c.value
    if c.kind == "int":
        return str(v)
    if c.kind == "real":
        return repr(v)
    if c.kind == "nil":
        return "[]"
    if _ATOM_RE.match(v):
        return v
    return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'


def var_text(v: Term) -> str:
    if isinstance(v, Writer):
        return v.name or f"_G{v.id}"
    if isinstance(v, Reader):
        return (v.name or f"_G{v.id}") + "?"
    return "_"


def format_term(t: Term) -> str:
    return _fmt(t, None, ())


def _fmt(t: Term, modes: Mapping[Position, Mode] | None, pos: Position, parent: Mode | None = None, tail: bool = False) -> str:
    mode = modes.get(pos) if modes is not None else None
    if isinstance(t, Variable):
        text = var_text(t)
        if mode is None or parent is None or tail or isinstance(t, Anonymous):
            return text
        # Argument variables of the root show their mode only when they are
        # the outputs of a consumed call; nested variables always show it.
        if len(pos) == 1 and not (parent is Mode.DOWN and mode is Mode.UP):
            return text
        return f"{mode}{text}"
    prefix = str(mode) if mode is not None else ""
    if isinstance(t, Const):
        # Constant arguments of a produced call read like its variables.
        if len(pos) == 1 and parent is Mode.UP:
            return format_const(t)
        return prefix + format_const(t)
    if t.functor == CONS and t.arity == 2:
        items = []
        tail: Term = t
        tpos = pos
        while isinstance(tail, Compound) and tail.functor == CONS and tail.arity == 2 and modes_get(modes, tpos) == mode:
            items.append(_fmt(tail.args[0], modes, tpos + (1,), mode))
            tail, tpos = tail.args[1], tpos + (2,)
        body = ", ".join(items)
        if tail != NIL or modes_get(modes, tpos) not in (None, mode):
            body += "|" + _fmt(tail, modes, tpos, mode, tail=True)
        return f"{prefix}[{body}]"
    if t.functor in INFIX_OPS and t.arity == 2:
        left = _fmt_operand(t.args[0], modes, pos + (1,), mode, INFIX_OPS[t.functor])
        right = _fmt_operand(t.args[1], modes, pos + (2,), mode, INFIX_OPS[t.functor])
        sep = "" if t.functor == "\\" else " "
        text = f"{left}{sep}{t.functor}{sep}{right}"
        return f"{prefix}({text})" if prefix else text
    args = ", ".join(_fmt(a, modes, pos + (i,), mode) for i, a in enumerate(t.args, 1))
    return f"{prefix}{_functor_text(t.functor)}({args})"


def modes_get(modes: Mapping[Position, Mode] | None, pos: Position) -> Mode | None:
    return modes.get(pos) if modes is not None else None


def _fmt_operand(t: Term, modes, pos, parent, prec) -> str:
    text = _fmt(t, modes, pos, parent)
    if isinstance(t, Compound) and t.functor in INFIX_OPS and t.arity == 2:
        if modes_get(modes, pos) is None and INFIX_OPS[t.functor] >= prec:
            return f"({text})"
    return text


def _functor_text(f: str) -> str:
    if _ATOM_RE.match(f) or f in INFIX_OPS:
        return f
    return format_const(Const(f))


# ---------------------------------------------------------------------------
# Single occurrence and SRSW


@dataclass(frozen=True)
class Occurrence:
    var: Term
    where: tuple  # (term index, position) or (section, index, position)


@dataclass(frozen=True)
class SOViolation:
    var: Term
    occurrences: tuple

    def __str__(self) -> str:
        return f"{var_text(self.var)} occurs {len(self.occurrences)} times"


def check_so(terms: Iterable[Term]) -> SOViolation | None:
    """Check the single-occurrence invariant over a goal or clause.

    Writers and readers are counted separately, anonymous variables are
    ignored.  Returns ``None`` when the invariant holds.
    """
    seen: dict[tuple[type, int], list] = {}
    first: dict[tuple[type, int], Term] = {}
    for k, t in enumerate(terms):
        for pos, v in variables(t):
            if isinstance(v, Anonymous):
                continue
            key = (type(v), v.id)
            seen.setdefault(key, []).append((k, pos))
            first.setdefault(key, v)
    for key, occ in seen.items():
        if len(occ) > 1:
            return SOViolation(first[key], tuple(occ))
    return None


@dataclass(frozen=True)
class RelaxationContext:
    """Facts that relax SRSW for particular variables of one clause.

    ``constant_vars`` holds ids whose type is a constant type; ``ground_vars``
    holds ids whose reader is tested by a groundness-implying guard.
    """

    constant_vars: frozenset[int] = frozenset()
    ground_vars: frozenset[int] = frozenset()


@dataclass(frozen=True)
class SRSWViolation:
    var: Term
    reason: str

    def __str__(self) -> str:
        return f"{var_text(self.var)}: {self.reason}"


def clause_terms(clause) -> list[tuple[str, Term]]:
    out = [("head", clause.head)]
    out += [("guard", g) for g in clause.guard]
    out += [("body", b) for b in clause.body]
    return out


def check_srsw(clause, relax: RelaxationContext = RelaxationContext()) -> SRSWViolation | None:
    """Check single-reader/single-writer for a clause, modulo relaxations.

    Anonymous variables are exempt.  Variables tested by a groundness guard
    may occur any number of times but must still be paired.  Variables of a
    constant type are exempt from both the count and the pairing rule, since
    their values carry no writers.
    """
    writers: dict[int, int] = {}
    readers: dict[int, int] = {}
    sample: dict[int, Term] = {}
    for _, t in clause_terms(clause):
        for _, v in variables(t):
            if isinstance(v, Anonymous):
                continue
            sample.setdefault(v.id, v)
            counts = writers if isinstance(v, Writer) else readers
            counts[v.id] = counts.get(v.id, 0) + 1
    for vid, v in sorted(sample.items()):
        if vid in relax.constant_vars:
            continue
        w, r = writers.get(vid, 0), readers.get(vid, 0)
        if vid not in relax.ground_vars:
            if w > 1:
                return SRSWViolation(v.pair() if isinstance(v, Reader) else v, f"writer occurs {w} times")
            if r > 1:
                return SRSWViolation(v if isinstance(v, Reader) else v.pair(), f"reader occurs {r} times")
        if w == 0:
            return SRSWViolation(v, "reader without its writer")
        if r == 0:
            return SRSWViolation(v, "writer without its reader")
    return None


# ---------------------------------------------------------------------------
# Renaming


class FreshIds:
    """Monotone source of fresh variable ids."""

    def __init__(self, start: int = 1):
        self._counter = itertools.count(start)

    def __call__(self) -> int:
        return next(self._counter)

    def skip_past(self, ids: Iterable[int]) -> None:
        top = max(ids, default=0)
        nxt = next(self._counter)
        self._counter = itertools.count(max(nxt, top + 1))


def rename_term(t: Term, mapping: dict[int, int], fresh: Callable[[], int], suffix: Callable[[int], str] | None = None) -> Term:
    def ren(v: Term) -> Term:
        if isinstance(v, Anonymous):
            return Anonymous(fresh())
        new = mapping.get(v.id)
        if new is None:
            new = mapping[v.id] = fresh()
        name = v.name if suffix is None else f"{v.name}{suffix(new)}"
        return type(v)(new, name)

    return map_vars(t, ren)


def rename_apart(clause, avoid: Iterable[int] = (), fresh: FreshIds | None = None, tag_names: bool = False):
    """Return a copy of ``clause`` whose variables avoid ``avoid``.

    Pairing is preserved because writer and reader share an id and the id
    map is applied to both.
    """
    avoid = set(avoid)
    if fresh is None:
        fresh = FreshIds()
        fresh.skip_past(avoid | var_ids(t for _, t in clause_terms(clause)))

    def next_id() -> int:
        while True:
            i = fresh()
            if i not in avoid:
                return i

    mapping: dict[int, int] = {}
    suffix = (lambda i: f"_{i}") if tag_names else None
    head = rename_term(clause.head, mapping, next_id, suffix)
    guard = tuple(rename_term(g, mapping, next_id, suffix) for g in clause.guard)
    body = tuple(rename_term(b, mapping, next_id, suffix) for b in clause.body)
    return replace(clause, head=head, guard=guard, body=body)


# ---------------------------------------------------------------------------
# Substitutions


@dataclass(frozen=True)
class Substitution:
    """Map from variable id to term.

    A ``writers`` substitution replaces writers ``X`` by ``X := T``; its
    readers counterpart replaces the paired readers ``X?``.
    """

    bindings: Mapping[int, Term]
    polarity: str = "writers"

    def __post_init__(self) -> None:
        if self.polarity not in ("writers", "readers"):
            raise ValueError(self.polarity)

    def readers_counterpart(self) -> Substitution:
        return Substitution(dict(self.bindings), "readers")

    def apply(self, t: Term) -> Term:
        target = Writer if self.polarity == "writers" else Reader

        def sub(v: Term) -> Term:
            if isinstance(v, target) and v.id in self.bindings:
                return self.bindings[v.id]
            return v

        return map_vars(t, sub)

    def resolved(self) -> Substitution:
        """Compose bindings with their readers counterpart until stable."""
        out: dict[int, Term] = {}

        def resolve(vid: int, active: frozenset[int]) -> Term:
            if vid in out:
                return out[vid]
            value = self.bindings[vid]

            def sub(v: Term) -> Term:
                if isinstance(v, Reader) and v.id in self.bindings and v.id not in active:
                    return resolve(v.id, active | {v.id})
                return v

            res = map_vars(value, sub)
            out[vid] = res
            return res

        for vid in self.bindings:
            resolve(vid, frozenset({vid}))
        return Substitution(out, self.polarity)

    def format(self, names: Mapping[int, str] | None = None) -> list[str]:
        lines = []
        for vid, t in self.bindings.items():
            name = (names or {}).get(vid) or f"_G{vid}"
            lines.append(f"{name} := {format_term(t)}")
        return lines


# ---------------------------------------------------------------------------
# Moded terms and paths


@dataclass(frozen=True, eq=False)
class ModedTerm:
    """A term with a mode at every position.

    Modes of non-variable positions are the annotations proper.  Variable
    leaves also carry the mode of the edge leading to them, which is what a
    moded path records for its last step.
    """

    term: Term
    modes: Mapping[Position, Mode | None]

    @property
    def root_mode(self) -> Mode | None:
        return self.modes.get(())

    def mode_at(self, pos: Position) -> Mode | None:
        return self.modes.get(pos)

    def annotation_key(self) -> tuple:
        """Structure used for equality: the term plus non-variable modes."""
        marks = tuple(sorted((p, self.modes.get(p)) for p, s in positions(self.term) if not is_var(s)))
        return (self.term, marks)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModedTerm):
            return NotImplemented
        return self.annotation_key() == other.annotation_key()

    def __hash__(self) -> int:
        return hash(self.annotation_key())

    def __str__(self) -> str:
        return format_moded(self)


def format_moded(t: ModedTerm) -> str:
    return _fmt(t.term, t.modes, (), None)


def uniform_moded(t: Term, mode: Mode, prefix: Position = ()) -> dict[Position, Mode]:
    return {prefix + p: mode for p, _ in positions(t)}


class Step(NamedTuple):
    functor: object
    arity: int
    index: int
    mode: Mode


@dataclass(frozen=True)
class FunctorLeaf:
    """Leaf of a path that stops at a compound node without descending."""

    functor: str
    arity: int


@dataclass(frozen=True)
class ModedPath:
    root_mode: Mode
    steps: tuple[Step, ...]
    leaf: object

    def __post_init__(self) -> None:
        for s in self.steps:
            if not 1 <= s.index <= s.arity:
                raise ValueError(f"argument index out of range in {s}")

    @property
    def leaf_mode(self) -> Mode:
        return self.steps[-1].mode if self.steps else self.root_mode

    @property
    def depth(self) -> int:
        return len(self.steps)

    def __str__(self) -> str:
        out = f"(0,{self.root_mode}) -->"
        for s in self.steps:
            out += f" {_path_functor(s.functor)}/{s.arity} --({s.index},{s.mode})-->"
        leaf = self.leaf
        if isinstance(leaf, Const):
            out += " " + format_const(leaf)
        elif isinstance(leaf, FunctorLeaf):
            out += f" {_path_functor(leaf.functor)}/{leaf.arity}"
        else:
            out += " " + var_text(leaf)
        return out


def _path_functor(f: object) -> str:
    if f == CONS:
        return '"."'
    return str(f)


def moded_paths(t: ModedTerm) -> list[ModedPath]:
    """One moded path per leaf of the term tree, left to right."""
    out: list[ModedPath] = []
    root = t.modes.get(())

    def walk(s: Term, pos: Position, steps: tuple[Step, ...]) -> None:
        if isinstance(s, Compound):
            for i, a in enumerate(s.args, 1):
                walk(a, pos + (i,), steps + (Step(s.functor, s.arity, i, t.modes.get(pos + (i,))),))
        else:
            out.append(ModedPath(root, steps, s))

    walk(t.term, (), ())
    return out


def _dual_var(v: Term) -> Term:
    return v.pair() if isinstance(v, (Writer, Reader)) else v


def dualize(x):
    """Complement every mode and swap every writer with its reader."""
    if isinstance(x, ModedTerm):
        return ModedTerm(map_vars(x.term, _dual_var), {p: (m.complement() if m else None) for p, m in x.modes.items()})
    if isinstance(x, ModedPath):
        leaf = _dual_var(x.leaf) if isinstance(x.leaf, Variable) else x.leaf
        steps = tuple(s._replace(mode=s.mode.complement()) for s in x.steps)
        return ModedPath(x.root_mode.complement(), steps, leaf)
    raise TypeError(type(x))


def apply_substitution_moded(t: ModedTerm, s: Substitution, max_rounds: int = 10_000) -> ModedTerm:
    """Replace bound variables by their values, to completion.

    A substituted value inherits the mode of the position it lands on, at
    every one of its positions.  Unbound variables inside a substituted value
    are shown in the form that fits that mode: a writer at a produced
    position, a reader at a consumed one.
    """
    term = t.term
    modes = dict(t.modes)
    introduced: set[Position] = set()
    bindings = s.bindings
    for _ in range(max_rounds):
        target = None
        for pos, v in variables(term):
            if isinstance(v, (Writer, Reader)) and v.id in bindings:
                target = (pos, v)
                break
        if target is None:
            break
        pos, v = target
        mode = modes.get(pos)
        value = bindings[v.id]
        term = replace_at(term, pos, value)
        for p in [p for p in modes if p[: len(pos)] == pos]:
            del modes[p]
        for p, sub in positions(value, pos):
            modes[p] = mode
            introduced.add(p)
    else:
        raise RuntimeError("substitution did not reach a fixpoint")

    def fit(p: Position, v: Term) -> Term:
        if p not in introduced or isinstance(v, Anonymous):
            return v
        m = modes.get(p)
        if m is Mode.UP and isinstance(v, Reader):
            return v.pair()
        if m is Mode.DOWN and isinstance(v, Writer):
            return v.pair()
        return v

    for p, v in list(variables(term)):
        new = fit(p, v)
        if new is not v:
            term = replace_at(term, p, new)
    return ModedTerm(term, modes)


def canonical_renaming(terms: Iterable[Term]) -> list[Term]:
    """Rename variables to V1, V2, ... in order of first occurrence."""
    mapping: dict[int, int] = {}

    def ren(v: Term) -> Term:
        if isinstance(v, Anonymous):
            return Anonymous(0)
        n = mapping.setdefault(v.id, len(mapping) + 1)
        return type(v)(n, f"V{n}")

    return [map_vars(t, ren) for t in terms]


def canonical_moded(terms: Iterable[ModedTerm]) -> list[ModedTerm]:
    terms = list(terms)
    renamed = canonical_renaming(t.term for t in terms)
    return [ModedTerm(r, t.modes) for r, t in zip(renamed, terms)]
