"""Abstract syntax for kinds, types, expressions and processes.

Types compare equal up to renaming of bound variables: ``==`` and ``hash``
go through a nameless key, so ``alpha_eq(t, u)`` is just ``t == u``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping, Optional, Union


# ---------------------------------------------------------------- kinds


class Mult(Enum):
    UN = "un"
    LIN = "lin"

    def join(self, other: Mult) -> Mult:
        return Mult.LIN if Mult.LIN in (self, other) else Mult.UN

    def __le__(self, other: Mult) -> bool:
        return self is Mult.UN or other is Mult.LIN

    def __str__(self) -> str:
        return self.value


class Basic(Enum):
    MESSAGE = "M"
    SESSION = "S"
    TOP = "T"


@dataclass(frozen=True)
class Kind:
    basic: Basic
    mult: Mult

    def __str__(self) -> str:
        return self.basic.value + ("U" if self.mult is Mult.UN else "L")

    @staticmethod
    def parse(text: str) -> Kind:
        try:
            return _KINDS_BY_NAME[text]
        except KeyError:
            raise ValueError(f"unknown kind {text!r}") from None


MU = Kind(Basic.MESSAGE, Mult.UN)
ML = Kind(Basic.MESSAGE, Mult.LIN)
SU = Kind(Basic.SESSION, Mult.UN)
SL = Kind(Basic.SESSION, Mult.LIN)
TU = Kind(Basic.TOP, Mult.UN)
TL = Kind(Basic.TOP, Mult.LIN)
ALL_KINDS = (MU, ML, SU, SL, TU, TL)
_KINDS_BY_NAME = {str(k): k for k in ALL_KINDS}


# ---------------------------------------------------------------- names

_counter = itertools.count(1)


def base_name(name: str) -> str:
    """Strip the ``'n`` suffix added by :func:`fresh_name`."""
    head, sep, tail = name.rpartition("'")
    if sep and tail.isdigit() and head:
        return head
    return name


def fresh_name(hint: str = "a") -> str:
    return f"{base_name(hint)}'{next(_counter)}"


def _labelled(items, what: str) -> tuple:
    if isinstance(items, Mapping):
        items = items.items()
    pairs = tuple((str(k), v) for k, v in items)
    if not pairs:
        raise ValueError(f"{what} needs at least one label")
    labels = [k for k, _ in pairs]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate label in {what}: {labels}")
    return pairs


# ---------------------------------------------------------------- types


class Type:
    """Base class of the type AST."""

    def key(self):
        k = self.__dict__.get("_key")
        if k is None:
            k = _key(self, {}, 0)
            object.__setattr__(self, "_key", k)
        return k

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Type):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __str__(self) -> str:
        from .printer import show_type

        return show_type(self)


@dataclass(frozen=True, eq=False)
class Skip(Type):
    pass


@dataclass(frozen=True, eq=False)
class Message(Type):
    polarity: str  # "!" or "?"
    payload: Type

    def __post_init__(self):
        if self.polarity not in ("!", "?"):
            raise ValueError(f"bad polarity {self.polarity!r}")


@dataclass(frozen=True, eq=False)
class Choice(Type):
    view: str  # "+" internal, "&" external
    branches: tuple

    def __post_init__(self):
        if self.view not in ("+", "&"):
            raise ValueError(f"bad choice view {self.view!r}")
        object.__setattr__(self, "branches", _labelled(self.branches, "choice"))

    @property
    def branch_map(self) -> dict[str, Type]:
        return dict(self.branches)


@dataclass(frozen=True, eq=False)
class Seq(Type):
    left: Type
    right: Type


@dataclass(frozen=True, eq=False)
class Unit(Type):
    mult: Mult = Mult.UN


@dataclass(frozen=True, eq=False)
class Base(Type):
    name: str  # Int, Bool or Char

    def __post_init__(self):
        if self.name not in BASE_TYPES:
            raise ValueError(f"unknown base type {self.name!r}")


BASE_TYPES = ("Int", "Bool", "Char")


@dataclass(frozen=True, eq=False)
class Arrow(Type):
    mult: Mult
    dom: Type
    cod: Type


@dataclass(frozen=True, eq=False)
class Record(Type):
    fields: tuple

    def __post_init__(self):
        object.__setattr__(self, "fields", _labelled(self.fields, "record"))

    @property
    def field_map(self) -> dict[str, Type]:
        return dict(self.fields)


@dataclass(frozen=True, eq=False)
class Variant(Type):
    fields: tuple

    def __post_init__(self):
        object.__setattr__(self, "fields", _labelled(self.fields, "variant"))

    @property
    def field_map(self) -> dict[str, Type]:
        return dict(self.fields)


@dataclass(frozen=True, eq=False)
class Forall(Type):
    var: str
    kind: Kind
    body: Type


@dataclass(frozen=True, eq=False)
class Rec(Type):
    var: str
    kind: Kind
    body: Type


@dataclass(frozen=True, eq=False)
class TVar(Type):
    name: str


@dataclass(frozen=True, eq=False)
class TName(Type):
    """Surface only: a reference to a type abbreviation or datatype."""

    name: str


@dataclass(frozen=True, eq=False)
class Dualof(Type):
    """Surface only: ``dualof T``, computed away during elaboration."""

    type: Type


INT, BOOL, CHAR = Base("Int"), Base("Bool"), Base("Char")
UNIT = Unit(Mult.UN)


def pair_type(fst: Type, snd: Type) -> Record:
    return Record((("fst", fst), ("snd", snd)))


def seq_of(*parts: Type) -> Type:
    """Right-nested sequential composition; ``seq_of()`` is Skip."""
    if not parts:
        return Skip()
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = Seq(p, out)
    return out


def _key(t: Type, env: dict, depth: int):
    match t:
        case Skip():
            return ("skip",)
        case Message(pol, p):
            return ("msg", pol, _key(p, env, depth))
        case Choice(view, bs):
            return ("choice", view, frozenset((l, _key(b, env, depth)) for l, b in bs))
        case Seq(l, r):
            return ("seq", _key(l, env, depth), _key(r, env, depth))
        case Unit(m):
            return ("unit", m.value)
        case Base(n):
            return ("base", n)
        case Arrow(m, d, c):
            return ("arrow", m.value, _key(d, env, depth), _key(c, env, depth))
        case Record(fs):
            return ("record", frozenset((l, _key(b, env, depth)) for l, b in fs))
        case Variant(fs):
            return ("variant", frozenset((l, _key(b, env, depth)) for l, b in fs))
        case Forall(v, k, b) | Rec(v, k, b):
            tag = "forall" if isinstance(t, Forall) else "rec"
            inner = dict(env)
            inner[v] = depth + 1
            return (tag, str(k), _key(b, inner, depth + 1))
        case TVar(n):
            if n in env:
                return ("bound", depth - env[n])
            return ("free", n)
        case TName(n):
            return ("name", n)
        case Dualof(x):
            return ("dualof", _key(x, env, depth))
    raise TypeError(f"not a type: {t!r}")


def alpha_eq(t1: Type, t2: Type) -> bool:
    return t1.key() == t2.key()


def children(t: Type) -> Iterator[Type]:
    match t:
        case Message(_, p):
            yield p
        case Choice(_, bs):
            for _, b in bs:
                yield b
        case Seq(l, r):
            yield l
            yield r
        case Arrow(_, d, c):
            yield d
            yield c
        case Record(fs) | Variant(fs):
            for _, b in fs:
                yield b
        case Forall(_, _, b) | Rec(_, _, b):
            yield b
        case Dualof(x):
            yield x


def type_size(t: Type) -> int:
    return 1 + sum(type_size(c) for c in children(t))


def free_tvars(t: Type) -> set[str]:
    match t:
        case TVar(n):
            return {n}
        case Forall(v, _, b) | Rec(v, _, b):
            return free_tvars(b) - {v}
    out: set[str] = set()
    for c in children(t):
        out |= free_tvars(c)
    return out


def all_tvar_names(t: Type) -> set[str]:
    """Every variable name occurring in ``t``, bound or free."""
    match t:
        case TVar(n):
            return {n}
        case Forall(v, _, b) | Rec(v, _, b):
            return all_tvar_names(b) | {v}
    out: set[str] = set()
    for c in children(t):
        out |= all_tvar_names(c)
    return out


def map_children(t: Type, f) -> Type:
    """Rebuild ``t`` with ``f`` applied to each immediate subterm."""
    match t:
        case Message(pol, p):
            return Message(pol, f(p))
        case Choice(view, bs):
            return Choice(view, tuple((l, f(b)) for l, b in bs))
        case Seq(l, r):
            return Seq(f(l), f(r))
        case Arrow(m, d, c):
            return Arrow(m, f(d), f(c))
        case Record(fs):
            return Record(tuple((l, f(b)) for l, b in fs))
        case Variant(fs):
            return Variant(tuple((l, f(b)) for l, b in fs))
        case Forall(v, k, b):
            return Forall(v, k, f(b))
        case Rec(v, k, b):
            return Rec(v, k, f(b))
        case Dualof(x):
            return Dualof(f(x))
    return t


def subst_type(target: Type, var: str, replacement: Type) -> Type:
    """Capture-avoiding ``[replacement/var] target``."""
    return subst_many(target, {var: replacement})


def subst_many(target: Type, sigma: Mapping[str, Type]) -> Type:
    if not sigma:
        return target
    fv: set[str] = set()
    for r in sigma.values():
        fv |= free_tvars(r)
    return _subst(target, dict(sigma), fv)


def _subst(t: Type, sigma: dict, fv: set) -> Type:
    match t:
        case TVar(n):
            return sigma.get(n, t)
        case Forall(v, k, b) | Rec(v, k, b):
            inner = {x: r for x, r in sigma.items() if x != v}
            if not inner:
                return t
            if v in fv:
                nv = fresh_name(v)
                b = _subst(b, {v: TVar(nv)}, {nv})
                v = nv
            body = _subst(b, inner, fv)
            return type(t)(v, k, body)
    return map_children(t, lambda c: _subst(c, sigma, fv))


def rename_binders(t: Type) -> Type:
    """Give every binder in ``t`` a fresh name."""
    match t:
        case Forall(v, k, b) | Rec(v, k, b):
            nv = fresh_name(v)
            body = rename_binders(_subst(b, {v: TVar(nv)}, {nv}))
            return type(t)(nv, k, body)
    return map_children(t, rename_binders)


def binders(t: Type) -> list[str]:
    match t:
        case Forall(v, _, b) | Rec(v, _, b):
            return [v] + binders(b)
    out: list[str] = []
    for c in children(t):
        out += binders(c)
    return out


def unfold(t: Rec) -> Type:
    """One unfolding of a recursive type, with binders kept unique."""
    return rename_binders(subst_type(t.body, t.var, t))


# ---------------------------------------------------------------- expressions

Span = tuple  # (line, column)


@dataclass(frozen=True)
class Expr:
    pass


def _span_field():
    return field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Var(Expr):
    name: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Const(Expr):
    """A builtin constant: ``send``, ``receive``, ``fork``, ``unit`` or a primitive operator."""

    name: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Lit(Expr):
    value: Union[int, bool, str]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Abs(Expr):
    """``λ_m x:T. body``; ``annot`` is None only for branch functions of case/match."""

    mult: Mult
    var: str
    annot: Optional[Type]
    body: Expr
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class App(Expr):
    fun: Expr
    arg: Expr
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class TAbs(Expr):
    var: str
    kind: Kind
    body: Expr
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class TApp(Expr):
    expr: Expr
    type: Type
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class RecordExpr(Expr):
    fields: tuple  # ((label, Expr), ...)
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class LetRecord(Expr):
    binds: tuple  # ((label, var), ...)
    bound: Expr
    body: Expr
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class LetUnit(Expr):
    bound: Expr
    body: Expr
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Inject(Expr):
    label: str
    annot: Variant
    payload: Expr
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Case(Expr):
    scrutinee: Expr
    branches: tuple  # ((label, Expr), ...)
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class New(Expr):
    annot: Type
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Select(Expr):
    """``select k``; the annotation is filled in from the channel type when None."""

    label: str
    annot: Optional[Choice] = None
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Match(Expr):
    scrutinee: Expr
    branches: tuple  # ((label, Expr), ...)
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    orelse: Expr
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class RevApp(Expr):
    """``arg & fun``: evaluate ``arg``, then ``fun``, then apply."""

    arg: Expr
    fun: Expr
    span: Optional[Span] = _span_field()


# Surface-only expression forms, removed by elaboration.


@dataclass(frozen=True)
class Con(Expr):
    """A datatype constructor used as a value."""

    name: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Tuple(Expr):
    items: tuple
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Let(Expr):
    """``let p = bound in body`` where ``p`` is a name, a tuple of names or ``()``."""

    pattern: Union[str, tuple]
    bound: Expr
    body: Expr
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class MatchS(Expr):
    scrutinee: Expr
    branches: tuple  # ((label, var, body), ...)
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class CaseS(Expr):
    scrutinee: Expr
    branches: tuple  # ((constructor, (vars...), body), ...)
    span: Optional[Span] = _span_field()


SURFACE_EXPRS = (Con, Tuple, Let, MatchS, CaseS)


def pair_expr(a: Expr, b: Expr, span=None) -> RecordExpr:
    return RecordExpr((("fst", a), ("snd", b)), span=span)


def let_pair(x: str, y: str, bound: Expr, body: Expr, span=None) -> LetRecord:
    return LetRecord((("fst", x), ("snd", y)), bound, body, span=span)


UNIT_VALUE = Const("unit")


def expr_children(e: Expr) -> Iterator[Expr]:
    match e:
        case Abs(_, _, _, b) | TAbs(_, _, b):
            yield b
        case App(f, a):
            yield f
            yield a
        case TApp(x, _):
            yield x
        case RecordExpr(fs):
            for _, x in fs:
                yield x
        case LetRecord(_, b, body):
            yield b
            yield body
        case LetUnit(b, body):
            yield b
            yield body
        case Inject(_, _, p):
            yield p
        case Case(s, bs) | Match(s, bs):
            yield s
            for _, x in bs:
                yield x
        case If(c, t, o):
            yield c
            yield t
            yield o
        case RevApp(a, f):
            yield a
            yield f
        case Tuple(xs):
            yield from xs
        case Let(_, b, body):
            yield b
            yield body
        case MatchS(s, bs) | CaseS(s, bs):
            yield s
            for *_, x in bs:
                yield x


def expr_size(e: Expr) -> int:
    return 1 + sum(expr_size(c) for c in expr_children(e))


def free_vars(e: Expr) -> set[str]:
    match e:
        case Var(n):
            return {n}
        case Abs(_, x, _, b):
            return free_vars(b) - {x}
        case LetRecord(binds, b, body):
            return free_vars(b) | (free_vars(body) - {x for _, x in binds})
    out: set[str] = set()
    for c in expr_children(e):
        out |= free_vars(c)
    return out


def subst_expr(e: Expr, x: str, v: Expr) -> Expr:
    """``[v/x] e`` for a closed value ``v`` (channel ends aside)."""
    match e:
        case Var(n):
            return v if n == x else e
        case Const() | Lit() | New() | Select():
            return e
        case Abs(m, y, t, b):
            if y == x:
                return e
            return Abs(m, y, t, subst_expr(b, x, v), span=e.span)
        case LetRecord(binds, b, body):
            nb = subst_expr(b, x, v)
            if any(y == x for _, y in binds):
                return LetRecord(binds, nb, body, span=e.span)
            return LetRecord(binds, nb, subst_expr(body, x, v), span=e.span)
    return map_expr(e, lambda c: subst_expr(c, x, v))


def map_expr(e: Expr, f) -> Expr:
    """Rebuild ``e`` with ``f`` applied to every immediate subexpression."""
    match e:
        case Abs(m, y, t, b):
            return Abs(m, y, t, f(b), span=e.span)
        case TAbs(a, k, b):
            return TAbs(a, k, f(b), span=e.span)
        case App(g, a):
            return App(f(g), f(a), span=e.span)
        case TApp(x, t):
            return TApp(f(x), t, span=e.span)
        case RecordExpr(fs):
            return RecordExpr(tuple((l, f(x)) for l, x in fs), span=e.span)
        case LetRecord(binds, b, body):
            return LetRecord(binds, f(b), f(body), span=e.span)
        case LetUnit(b, body):
            return LetUnit(f(b), f(body), span=e.span)
        case Inject(l, t, p):
            return Inject(l, t, f(p), span=e.span)
        case Case(s, bs):
            return Case(f(s), tuple((l, f(x)) for l, x in bs), span=e.span)
        case Match(s, bs):
            return Match(f(s), tuple((l, f(x)) for l, x in bs), span=e.span)
        case If(c, t, o):
            return If(f(c), f(t), f(o), span=e.span)
        case RevApp(a, g):
            return RevApp(f(a), f(g), span=e.span)
    return e


def map_expr_types(e: Expr, g) -> Expr:
    """Apply ``g`` to every type annotation in ``e``. TAbs binders are left alone."""
    match e:
        case Abs(m, y, t, b):
            return Abs(m, y, None if t is None else g(t), map_expr_types(b, g), span=e.span)
        case TApp(x, t):
            return TApp(map_expr_types(x, g), g(t), span=e.span)
        case Inject(l, t, p):
            return Inject(l, g(t), map_expr_types(p, g), span=e.span)
        case New(t):
            return New(g(t), span=e.span)
        case Select(l, t):
            return Select(l, None if t is None else g(t), span=e.span)
    return map_expr(e, lambda c: map_expr_types(c, g))


def subst_type_in_expr(e: Expr, a: str, t: Type) -> Expr:
    """``[t/a] e`` over type annotations, respecting TAbs binders."""
    match e:
        case TAbs(b, k, body):
            if b == a:
                return e
            if b in free_tvars(t):
                nb = fresh_name(b)
                body = subst_type_in_expr(body, b, TVar(nb))
                b = nb
            return TAbs(b, k, subst_type_in_expr(body, a, t), span=e.span)
        case Abs(m, y, ann, b):
            ann = None if ann is None else subst_type(ann, a, t)
            return Abs(m, y, ann, subst_type_in_expr(b, a, t), span=e.span)
        case TApp(x, u):
            return TApp(subst_type_in_expr(x, a, t), subst_type(u, a, t), span=e.span)
        case Inject(l, u, p):
            return Inject(l, subst_type(u, a, t), subst_type_in_expr(p, a, t), span=e.span)
        case New(u):
            return New(subst_type(u, a, t), span=e.span)
        case Select(l, u):
            return Select(l, None if u is None else subst_type(u, a, t), span=e.span)
    return map_expr(e, lambda c: subst_type_in_expr(c, a, t))


def fresh_rename_expr(e: Expr) -> Expr:
    """Rename every type binder inside ``e`` (TAbs and annotation binders) apart."""
    match e:
        case TAbs(a, k, body):
            na = fresh_name(a)
            body = subst_type_in_expr(body, a, TVar(na))
            return TAbs(na, k, fresh_rename_expr(body), span=e.span)
    e = map_expr(e, fresh_rename_expr)
    return _map_local_types(e, rename_binders)


def _map_local_types(e: Expr, g) -> Expr:
    match e:
        case Abs(m, y, t, b):
            return Abs(m, y, None if t is None else g(t), b, span=e.span)
        case TApp(x, t):
            return TApp(x, g(t), span=e.span)
        case Inject(l, t, p):
            return Inject(l, g(t), p, span=e.span)
        case New(t):
            return New(g(t), span=e.span)
        case Select(l, t):
            return Select(l, None if t is None else g(t), span=e.span)
    return e


# ---------------------------------------------------------------- processes


@dataclass(frozen=True)
class Process:
    pass


@dataclass(frozen=True)
class Thread(Process):
    expr: Expr


@dataclass(frozen=True)
class Par(Process):
    left: Process
    right: Process


@dataclass(frozen=True)
class Nu(Process):
    x: str
    y: str
    body: Process

    def __post_init__(self):
        if self.x == self.y:
            raise ValueError("a channel needs two distinct end names")


def par_of(procs: Iterable[Process]) -> Process:
    procs = list(procs)
    if not procs:
        raise ValueError("empty parallel composition")
    out = procs[-1]
    for p in reversed(procs[:-1]):
        out = Par(p, out)
    return out


# ---------------------------------------------------------------- declarations


@dataclass
class Declaration:
    """A checked top-level binding: a name, its signature and its core body."""

    name: str
    type: Type
    body: Expr
    span: Optional[Span] = None


@dataclass
class CoreProgram:
    decls: dict[str, Declaration] = field(default_factory=dict)
    types: dict[str, Type] = field(default_factory=dict)

    @property
    def signatures(self) -> dict[str, Type]:
        return {n: d.type for n, d in self.decls.items()}


def fresh_rename(item):
    """Rename all type binders apart in a type, expression or program."""
    if isinstance(item, Type):
        return rename_binders(item)
    if isinstance(item, Expr):
        return fresh_rename_expr(item)
    if isinstance(item, CoreProgram):
        out = CoreProgram(types={n: rename_binders(t) for n, t in item.types.items()})
        for n, d in item.decls.items():
            out.decls[n] = Declaration(n, rename_binders(d.type), fresh_rename_expr(d.body), d.span)
        return out
    raise TypeError(f"cannot rename {item!r}")
