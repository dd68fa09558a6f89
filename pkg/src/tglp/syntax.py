"""Lexer and parser for GLP source text.

The concrete grammar:

* clauses end with ``.`` followed by whitespace, ``%`` or end of input;
* ``Head :- Guard | Body.`` with ``:-`` and ``|`` optional;
* ``Name ::= Alt ; Alt.`` introduces a type rule, ``Name(X) ::= ...`` a
  parametrised one;
* ``procedure p(T1, T2?).`` declares a procedure;
* ``%`` starts a comment that runs to the end of the line.

Operator precedence (lower binds tighter)::

    700 xfx   = := =.. ..= =?= < > =< >= =:= =\\=
    600 xfx   \\
    500 yfx   + -
    400 yfx   * / // mod

Postfix ``?`` binds tighter than any infix operator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Union

from .kernel import (
    CONS,
    NIL,
    Anonymous,
    Compound,
    Const,
    Mode,
    ModedTerm,
    Reader,
    Term,
    Writer,
    format_const,
    format_term,
    positions,
    var_text,
)

PRIMITIVE_TYPES = frozenset({"_", "Integer", "Real", "Number", "String", "Constant"})
PRELUDE_TYPES = frozenset({"Stream", "DiffList", "Channel", "Exp"})


# ---------------------------------------------------------------------------
# Errors


class GLPError(Exception):
    """Base class for diagnostics carrying a source location."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def format(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.line}:{self.col}: {type(self).__name__}: {self.message}"


class LexError(GLPError):
    pass


class ParseError(GLPError):
    pass


class PlacementError(GLPError):
    pass


class UndefinedType(GLPError):
    pass


# ---------------------------------------------------------------------------
# Lexer


@dataclass(frozen=True)
class Token:
    kind: str  # VAR ATOM STRING INT REAL OP QMARK MODE END EOF
    text: str
    line: int
    col: int
    spaced: bool  # whitespace (or start of input) precedes the token
    value: object = None


OPERATORS = sorted(
    [
        "::=", "=..", "..=", "=?=", "=:=", "=\\=", ":-", ":=", "=<", ">=", "//",
        "=", "<", ">", "+", "-", "*", "/", "\\", ";", "|", ",",
        "(", ")", "[", "]", "{", "}",
    ],
    key=len,
    reverse=True,
)

_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", "'": "'", '"': '"', "0": "\0"}


def tokenize(text: str, ascii_modes: bool = False) -> list[Token]:
    """Split ``text`` into tokens.

    With ``ascii_modes`` a ``v`` not followed by an identifier character is
    read as the consume mode, and ``^`` as the produce mode.
    """
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    spaced = True

    def advance(k: int) -> None:
        nonlocal i, line, col
        for ch in text[i : i + k]:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1
        i += k

    while i < n:
        ch = text[i]
        if ch.isspace():
            advance(1)
            spaced = True
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                advance(1)
            spaced = True
            continue
        start_line, start_col = line, col

        def emit(kind: str, length: int, value: object = None) -> None:
            nonlocal spaced
            toks.append(Token(kind, text[i : i + length], start_line, start_col, spaced, value))
            spaced = False
            advance(length)

        if ch in "↑↓":
            emit("MODE", 1, Mode.parse(ch))
            continue
        if ascii_modes and ch == "^":
            emit("MODE", 1, Mode.UP)
            continue
        if ascii_modes and ch == "v" and (i + 1 >= n or not (text[i + 1].isalnum() or text[i + 1] == "_")):
            emit("MODE", 1, Mode.DOWN)
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            kind = "ATOM" if ch.islower() else "VAR"
            emit(kind, j - i, text[i:j])
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j + 1 < n and text[j] == "." and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
                if j < n and text[j] in "eE":
                    k = j + 1
                    if k < n and text[k] in "+-":
                        k += 1
                    if k < n and text[k].isdigit():
                        j = k
                        while j < n and text[j].isdigit():
                            j += 1
                emit("REAL", j - i, float(text[i:j]))
            else:
                emit("INT", j - i, int(text[i:j]))
            continue
        if ch in "'\"":
            j = i + 1
            buf = []
            while True:
                if j >= n or text[j] == "\n":
                    raise LexError("unterminated string", start_line, start_col)
                c = text[j]
                if c == "\\":
                    if j + 1 >= n:
                        raise LexError("unterminated string", start_line, start_col)
                    esc = text[j + 1]
                    if esc not in _ESCAPES:
                        raise LexError(f"unknown escape \\{esc}", line, col + (j - i))
                    buf.append(_ESCAPES[esc])
                    j += 2
                    continue
                if c == ch:
                    break
                buf.append(c)
                j += 1
            emit("STRING", j + 1 - i, "".join(buf))
            continue
        if ch == "." and (i + 1 >= n or text[i + 1].isspace() or text[i + 1] == "%"):
            emit("END", 1)
            continue
        if ch == "?":
            emit("QMARK", 1)
            continue
        for op in OPERATORS:
            if text.startswith(op, i):
                emit("OP", len(op))
                break
        else:
            raise LexError(f"unexpected character {ch!r}", start_line, start_col)
    toks.append(Token("EOF", "", line, col, True))
    return toks


# ---------------------------------------------------------------------------
# Program items


@dataclass(frozen=True)
class TRef:
    """Reference to a named type, possibly applied to arguments."""

    name: str
    args: tuple[TypeExpr, ...] = ()
    dual: bool = False


@dataclass(frozen=True)
class TConst:
    value: object
    dual: bool = False


@dataclass(frozen=True)
class TCompound:
    functor: str
    args: tuple[TypeExpr, ...]
    dual: bool = False


TypeExpr = Union[TRef, TConst, TCompound]


def type_text(t: TypeExpr) -> str:
    mark = "?" if t.dual else ""
    if isinstance(t, TRef):
        if t.args:
            return f"{t.name}({', '.join(type_text(a) for a in t.args)}){mark}"
        return t.name + mark
    if isinstance(t, TConst):
        return format_const(Const(t.value)) + mark
    if t.functor == CONS and len(t.args) == 2:
        return f"[{type_text(t.args[0])}|{type_text(t.args[1])}]{mark}"
    if t.functor == "\\" and len(t.args) == 2:
        text = f"{type_text(t.args[0])} \\ {type_text(t.args[1])}"
        return f"({text}){mark}" if mark else text
    return f"{_functor(t.functor)}({', '.join(type_text(a) for a in t.args)}){mark}"


def _functor(f: str) -> str:
    from .kernel import _functor_text

    return _functor_text(f)


@dataclass(frozen=True)
class TypeRule:
    name: str
    params: tuple[str, ...]
    alternatives: tuple[TypeExpr, ...]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, len(self.params))


@dataclass(frozen=True)
class ProcedureDecl:
    name: str
    arg_types: tuple[TypeExpr, ...]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def arity(self) -> int:
        return len(self.arg_types)

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, self.arity)

    def is_input(self, i: int) -> bool:
        """Whether argument ``i`` (1-based) is an input."""
        return self.arg_types[i - 1].dual


@dataclass(frozen=True)
class Clause:
    head: Term
    guard: tuple[Term, ...] = ()
    body: tuple[Term, ...] = ()
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def key(self) -> tuple[object, int]:
        return predicate_key(self.head)


Item = Union[TypeRule, ProcedureDecl, Clause]


@dataclass(frozen=True)
class SourceProgram:
    items: tuple[Item, ...] = ()

    @property
    def rules(self) -> list[TypeRule]:
        return [x for x in self.items if isinstance(x, TypeRule)]

    @property
    def declarations(self) -> list[ProcedureDecl]:
        return [x for x in self.items if isinstance(x, ProcedureDecl)]

    @property
    def clauses(self) -> list[Clause]:
        return [x for x in self.items if isinstance(x, Clause)]


def predicate_key(goal: Term) -> tuple[object, int]:
    if isinstance(goal, Compound):
        return (goal.functor, goal.arity)
    if isinstance(goal, Const) and goal.kind == "str":
        return (goal.value, 0)
    raise ParseError(f"not a unit goal: {format_term(goal)}")


# ---------------------------------------------------------------------------
# Parser

INFIX = {
    "=": (700, "xfx"), ":=": (700, "xfx"), "=..": (700, "xfx"), "..=": (700, "xfx"),
    "=?=": (700, "xfx"), "<": (700, "xfx"), ">": (700, "xfx"), "=<": (700, "xfx"),
    ">=": (700, "xfx"), "=:=": (700, "xfx"), "=\\=": (700, "xfx"),
    "\\": (600, "xfx"),
    "+": (500, "yfx"), "-": (500, "yfx"),
    "*": (400, "yfx"), "/": (400, "yfx"), "//": (400, "yfx"), "mod": (400, "yfx"),
}
ARG_PREC = 999


# Intermediate syntax tree, shared by term, type and moded-term parsing.
@dataclass
class PVar:
    name: str
    reader: bool
    line: int
    col: int
    parenthesized: bool = False


@dataclass
class PConst:
    value: object
    list_cell: bool = False


@dataclass
class PComp:
    functor: str
    args: list
    is_list: bool = False
    list_cell: bool = False


@dataclass
class PDual:
    inner: object
    line: int
    col: int


@dataclass
class PMode:
    mode: Mode
    inner: object


class _Parser:
    def __init__(self, text: str, types: bool = False, moded: bool = False):
        self.toks = tokenize(text, ascii_modes=moded)
        self.pos = 0
        self.types = types
        self.moded = moded

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[min(self.pos, len(self.toks) - 1)]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.tok
        self.pos += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            want = text or kind
            t = self.tok
            raise ParseError(f"expected {want!r}, found {t.text or t.kind!r}", t.line, t.col)
        return self.next()

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        t = tok or self.tok
        return ParseError(msg, t.line, t.col)

    # expressions
    def infix_op(self) -> tuple[str, int, str] | None:
        t = self.tok
        name = None
        if t.kind == "OP" and t.text in INFIX:
            name = t.text
        elif t.kind == "ATOM" and t.text == "mod":
            name = "mod"
        if name is None:
            return None
        # an operator glued to "(" is a functor, not an infix use
        if self.peek().kind == "OP" and self.peek().text == "(" and not self.peek().spaced:
            return None
        prec, kind = INFIX[name]
        return name, prec, kind

    def expr(self, max_prec: int = ARG_PREC):
        left = self.primary()
        left_prec = 0
        while True:
            op = self.infix_op()
            if op is None:
                break
            name, prec, kind = op
            if prec > max_prec:
                break
            if (kind == "xfx" and left_prec >= prec) or left_prec > prec:
                raise self.error(f"operator priority clash at {name!r}")
            self.next()
            right = self.expr(prec - 1)
            left = PComp(name, [left, right])
            left_prec = prec
        return left

    def primary(self):
        t = self.tok
        if t.kind == "MODE":
            if not self.moded:
                raise self.error("mode annotation outside a moded term")
            self.next()
            inner = self.primary()
            if isinstance(inner, PMode):
                raise self.error("two mode annotations on one node", t)
            return PMode(t.value, inner)
        node = self.primary_base()
        while self.at("QMARK"):
            q = self.next()
            node = self._apply_qmark(node, q)
        return node

    def _apply_qmark(self, node, q: Token):
        if self.types:
            return PDual(node, q.line, q.col)
        if isinstance(node, PVar) and not node.reader and not node.parenthesized:
            if node.name.startswith("_"):
                raise ParseError("anonymous variables have no reader", q.line, q.col)
            node.reader = True
            return node
        if isinstance(node, PVar):
            raise ParseError("complement applied twice to a variable", q.line, q.col)
        raise ParseError("'?' may only follow a variable in a term", q.line, q.col)

    def primary_base(self):
        t = self.tok
        if t.kind == "VAR":
            self.next()
            if self.types and self.at("OP", "(") and not self.tok.spaced:
                self.next()
                args = self.arglist()
                return PComp(t.text, args)
            return PVar(t.text, False, t.line, t.col)
        if t.kind in ("INT", "REAL", "STRING"):
            self.next()
            if t.kind == "STRING" and self.at("OP", "(") and not self.tok.spaced:
                self.next()
                return PComp(t.value, self.arglist())
            return PConst(t.value)
        if t.kind == "OP" and t.text == "-" and self.peek().kind in ("INT", "REAL") and not self.peek().spaced:
            self.next()
            num = self.next()
            return PConst(-num.value)
        if t.kind == "ATOM" or (t.kind == "OP" and t.text in INFIX):
            self.next()
            if self.at("OP", "(") and not self.tok.spaced:
                self.next()
                return PComp(t.text, self.arglist())
            if t.kind == "OP":
                if t.text == "-":
                    return PComp("-", [self.expr(200)])
                raise self.error(f"unexpected operator {t.text!r}", t)
            return PConst(t.text)
        if t.kind == "OP" and t.text == "(":
            self.next()
            inner = self.expr(1200)
            self.expect("OP", ")")
            if isinstance(inner, PVar):
                inner.parenthesized = True
            return inner
        if t.kind == "OP" and t.text == "[":
            return self.list_expr()
        raise self.error(f"unexpected {t.text or t.kind!r}")

    def arglist(self) -> list:
        args = [self.expr()]
        while self.at("OP", ","):
            self.next()
            args.append(self.expr())
        self.expect("OP", ")")
        return args

    def list_expr(self):
        self.expect("OP", "[")
        if self.at("OP", "]"):
            self.next()
            return PConst("[]")
        items = [self.expr()]
        while self.at("OP", ","):
            self.next()
            items.append(self.expr())
        tail = PConst("[]")
        if self.at("OP", "|"):
            self.next()
            tail = self.expr()
        self.expect("OP", "]")
        out = tail
        for item in reversed(items):
            out = PComp(CONS, [item, out], is_list=True)
        return out

    def goals(self) -> list:
        gs = [self.expr(1200)]
        while self.at("OP", ","):
            self.next()
            gs.append(self.expr(1200))
        return gs


# ---------------------------------------------------------------------------
# Conversion from the intermediate tree


class VarScope:
    """Maps variable names to ids within one clause or goal."""

    def __init__(self, counter: Iterator[int]):
        self.counter = counter
        self.ids: dict[str, int] = {}

    def var(self, p: PVar) -> Term:
        if p.name.startswith("_"):
            return Anonymous(next(self.counter), p.name if p.name != "_" else "_")
        vid = self.ids.get(p.name)
        if vid is None:
            vid = self.ids[p.name] = next(self.counter)
        return Reader(vid, p.name) if p.reader else Writer(vid, p.name)


def to_term(p, scope: VarScope) -> Term:
    if isinstance(p, PVar):
        return scope.var(p)
    if isinstance(p, PConst):
        return Const(p.value)
    if isinstance(p, PComp):
        return Compound(p.functor, tuple(to_term(a, scope) for a in p.args))
    if isinstance(p, PMode):
        raise ParseError("mode annotation outside a moded term")
    raise ParseError("type complement inside a term")


def to_type(p) -> TypeExpr:
    if isinstance(p, PDual):
        inner = to_type(p.inner)
        return _with_dual(inner, not inner.dual)
    if isinstance(p, PVar):
        if p.reader:
            return TRef(p.name, (), True)
        return TRef("_" if p.name.startswith("_") else p.name)
    if isinstance(p, PConst):
        return TConst(p.value)
    if isinstance(p, PComp):
        args = tuple(to_type(a) for a in p.args)
        if p.functor[:1].isupper():
            return TRef(p.functor, args)
        return TCompound(p.functor, args)
    raise ParseError("mode annotation inside a type")


def _with_dual(t: TypeExpr, dual: bool) -> TypeExpr:
    from dataclasses import replace

    return replace(t, dual=dual)


def to_moded(p, scope: VarScope, modes: dict, pos: tuple = (), inherited: Mode | None = None) -> Term:
    """Build a term and fill ``modes``; list cells inherit the list's mode."""
    mode = None
    if isinstance(p, PMode):
        mode, p = p.mode, p.inner
    if mode is None and (isinstance(p, PVar) or getattr(p, "list_cell", False)):
        mode = inherited
    if isinstance(p, PVar):
        modes[pos] = mode
        return scope.var(p)
    if isinstance(p, PConst):
        modes[pos] = mode
        return Const(p.value)
    if isinstance(p, PComp):
        modes[pos] = mode
        args = []
        for i, a in enumerate(p.args, 1):
            if p.is_list and i == 2 and (isinstance(a, PComp) and a.is_list or isinstance(a, PConst) and a.value == "[]"):
                a.list_cell = True
            args.append(to_moded(a, scope, modes, pos + (i,), mode))
        return Compound(p.functor, tuple(args))
    raise ParseError("type complement inside a moded term")


# ---------------------------------------------------------------------------
# Entry points


def _counter() -> Iterator[int]:
    return itertools.count(1)


def parse_term(text: str, scope: VarScope | None = None) -> Term:
    p = _Parser(text)
    node = p.expr(1200)
    if p.at("END"):
        p.next()
    p.expect("EOF")
    return to_term(node, scope or VarScope(_counter()))


def parse_goal(text: str, counter: Iterator[int] | None = None) -> list[Term]:
    """Parse a conjunction of unit goals.  ``true`` is the empty goal."""
    p = _Parser(text)
    if p.at("EOF"):
        return []
    nodes = p.goals()
    if p.at("END"):
        p.next()
    p.expect("EOF")
    scope = VarScope(counter or _counter())
    goals = [to_term(n, scope) for n in nodes]
    if len(goals) == 1 and goals[0] == Const("true"):
        return []
    for g in goals:
        _check_unit_goal(g, p.tok)
    return goals


def _check_unit_goal(g: Term, tok: Token) -> None:
    if not (isinstance(g, Compound) or (isinstance(g, Const) and g.kind == "str")):
        raise ParseError(f"not a unit goal: {format_term(g)}", tok.line, tok.col)


def parse_type(text: str) -> TypeExpr:
    p = _Parser(text, types=True)
    node = p.expr()
    p.expect("EOF")
    return to_type(node)


def parse_moded_term(text: str, scope: VarScope | None = None) -> ModedTerm:
    p = _Parser(text, moded=True)
    node = p.expr(1200)
    p.expect("EOF")
    modes: dict = {}
    term = to_moded(node, scope or VarScope(_counter()), modes)
    return ModedTerm(term, modes)


def parse_moded_clause(text: str) -> tuple[ModedTerm, list[ModedTerm]]:
    """Parse ``H :- G | B.`` in moded notation; the guard part is dropped."""
    p = _Parser(text, moded=True)
    scope = VarScope(_counter())
    head_node = p.expr(1200)
    body_nodes: list = []
    if p.at("OP", ":-"):
        p.next()
        body_nodes = p.goals()
        if p.at("OP", "|"):
            p.next()
            body_nodes = p.goals()
    if p.at("END"):
        p.next()
    p.expect("EOF")
    out = []
    for node in [head_node] + body_nodes:
        modes: dict = {}
        term = to_moded(node, scope, modes)
        out.append(ModedTerm(term, modes))
    body = [m for m in out[1:] if m.term != Const("true")]
    return out[0], body


def parse_program(
    text: str,
    require_declarations: bool = True,
    check_types: bool = True,
    predefined: frozenset[str] = PRELUDE_TYPES,
    counter: Iterator[int] | None = None,
) -> SourceProgram:
    """Parse a whole program and enforce declaration placement.

    Type references must name a primitive, a predefined type, or a rule
    defined earlier (a rule may refer to itself and its parameters).
    """
    p = _Parser(text)
    counter = counter or _counter()
    items: list[Item] = []
    while not p.at("EOF"):
        start = p.tok
        if start.kind == "ATOM" and start.text == "procedure" and p.peek().kind in ("ATOM", "OP", "STRING"):
            items.append(_parse_decl(p))
        elif start.kind == "VAR" and (p.peek().kind == "OP" and p.peek().text in ("::=", "(")):
            items.append(_parse_rule(p))
        else:
            items.append(_parse_clause(p, counter))
    prog = SourceProgram(tuple(items))
    check_placement(prog, require_declarations)
    if check_types:
        check_type_references(prog, predefined)
    return prog


def _parse_decl(p: _Parser) -> ProcedureDecl:
    kw = p.next()
    name_tok = p.next()
    p.types = True
    args: list = []
    if p.at("OP", "(") and not p.tok.spaced:
        p.next()
        args = p.arglist()
    p.types = False
    p.expect("END")
    return ProcedureDecl(name_tok.value if name_tok.kind == "STRING" else name_tok.text, tuple(to_type(a) for a in args), kw.line, kw.col)


def _parse_rule(p: _Parser) -> TypeRule:
    name_tok = p.next()
    params: list[str] = []
    if p.at("OP", "("):
        p.next()
        params.append(p.expect("VAR").text)
        while p.at("OP", ","):
            p.next()
            params.append(p.expect("VAR").text)
        p.expect("OP", ")")
    p.expect("OP", "::=")
    p.types = True
    alts = [p.expr()]
    while p.at("OP", ";"):
        p.next()
        alts.append(p.expr())
    p.types = False
    p.expect("END")
    return TypeRule(name_tok.text, tuple(params), tuple(to_type(a) for a in alts), name_tok.line, name_tok.col)


def _parse_clause(p: _Parser, counter: Iterator[int]) -> Clause:
    start = p.tok
    scope = VarScope(counter)
    head_node = p.expr(1200)
    guard_nodes: list = []
    body_nodes: list = []
    if p.at("OP", ":-"):
        p.next()
        body_nodes = p.goals()
        if p.at("OP", "|"):
            p.next()
            guard_nodes = body_nodes
            body_nodes = p.goals()
    p.expect("END")
    head = to_term(head_node, scope)
    if not (isinstance(head, Compound) or (isinstance(head, Const) and head.kind == "str")):
        raise ParseError("clause head must be a compound term or a string", start.line, start.col)
    guard = [to_term(g, scope) for g in guard_nodes]
    body = [to_term(b, scope) for b in body_nodes]
    true = Const("true")
    if guard == [true]:
        guard = []
    if body == [true]:
        body = []
    for g in guard + body:
        _check_unit_goal(g, start)
    return Clause(head, tuple(guard), tuple(body), start.line, start.col)


def check_placement(prog: SourceProgram, require_declarations: bool = True) -> None:
    declared: set = set()
    finished: set = set()  # predicates whose clause block has ended
    current = None  # predicate of the clause block in progress
    pending = None  # declaration waiting for its first clause
    for item in prog.items:
        if pending is not None and not (isinstance(item, Clause) and item.key == pending.key):
            raise PlacementError(
                f"declaration of {pending.name}/{pending.arity} is not immediately followed by its clauses",
                pending.line,
                pending.col,
            )
        if isinstance(item, ProcedureDecl):
            if item.key in declared:
                raise PlacementError(f"duplicate declaration of {item.name}/{item.arity}", item.line, item.col)
            declared.add(item.key)
            if current is not None:
                finished.add(current)
            current = None
            pending = item
            continue
        if isinstance(item, TypeRule):
            if current is not None:
                finished.add(current)
            current = None
            continue
        key = item.key
        if pending is not None:
            pending = None
            current = key
            continue
        if key == current:
            continue
        name, arity = key
        if key in finished:
            raise PlacementError(f"clauses for {name}/{arity} are not contiguous", item.line, item.col)
        if key in declared:
            raise PlacementError(f"clause for {name}/{arity} is separated from its declaration", item.line, item.col)
        if require_declarations:
            raise PlacementError(f"clause for {name}/{arity} has no preceding procedure declaration", item.line, item.col)
        if current is not None:
            finished.add(current)
        current = key
    if pending is not None:
        raise PlacementError(
            f"declaration of {pending.name}/{pending.arity} is not followed by any clause", pending.line, pending.col
        )


def type_refs(t: TypeExpr) -> Iterator[TRef]:
    if isinstance(t, TRef):
        yield t
        for a in t.args:
            yield from type_refs(a)
    elif isinstance(t, TCompound):
        for a in t.args:
            yield from type_refs(a)


def check_type_references(prog: SourceProgram, predefined: frozenset[str] = PRELUDE_TYPES) -> None:
    known: set[tuple[str, int]] = {(n, 0) for n in PRIMITIVE_TYPES | predefined}
    for item in prog.items:
        if isinstance(item, TypeRule):
            local = known | {item.key} | {(x, 0) for x in item.params}
            for alt in item.alternatives:
                _check_refs(alt, local, item)
            known.add(item.key)
        elif isinstance(item, ProcedureDecl):
            for t in item.arg_types:
                _check_refs(t, known, item)


def _check_refs(t: TypeExpr, known: set, item) -> None:
    for ref in type_refs(t):
        if (ref.name, len(ref.args)) not in known:
            shown = ref.name if not ref.args else f"{ref.name}/{len(ref.args)}"
            raise UndefinedType(f"type {shown} is not defined before use", item.line, item.col)


# ---------------------------------------------------------------------------
# Pretty printing


def format_clause(c: Clause) -> str:
    text = format_term(c.head)
    if c.guard or c.body:
        text += " :- "
        if c.guard:
            text += ", ".join(format_term(g) for g in c.guard) + " | "
        text += ", ".join(format_term(b) for b in c.body) if c.body else "true"
    return text + "."


def format_item(item: Item) -> str:
    if isinstance(item, TypeRule):
        name = item.name + (f"({', '.join(item.params)})" if item.params else "")
        return f"{name} ::= {' ; '.join(type_text(a) for a in item.alternatives)}."
    if isinstance(item, ProcedureDecl):
        args = ", ".join(type_text(a) for a in item.arg_types)
        return f"procedure {_functor(item.name)}({args})." if args else f"procedure {_functor(item.name)}."
    return format_clause(item)


def format_program(prog: SourceProgram) -> str:
    return "\n".join(format_item(i) for i in prog.items) + ("\n" if prog.items else "")


__all__ = [
    "Clause", "GLPError", "LexError", "ParseError", "PlacementError", "ProcedureDecl",
    "SourceProgram", "TCompound", "TConst", "TRef", "Token", "TypeExpr", "TypeRule",
    "UndefinedType", "VarScope", "format_clause", "format_program", "parse_goal",
    "parse_declarations", "parse_moded_clause", "parse_moded_term", "parse_program", "parse_term", "parse_type",
    "predicate_key", "tokenize", "type_text", "var_text", "positions",
]


def parse_declarations(text: str) -> list[ProcedureDecl]:
    """Parse a sequence of procedure declarations with no clauses."""
    p = _Parser(text)
    out = []
    while not p.at("EOF"):
        if not p.at("ATOM", "procedure"):
            raise p.error("expected a procedure declaration")
        out.append(_parse_decl(p))
    return out
