"""Random types and small programs for property tests.

Everything takes an explicit ``random.Random`` so a seed reproduces a sample.
"""

from __future__ import annotations

import random

from .duality import dual
from .kinding import KindError, kind_check
from .syntax import (
    ALL_KINDS, Abs, App, Arrow, BASE_TYPES, BOOL, Base, CHAR, Choice, Const, Expr, Forall, INT, If,
    LetRecord, Lit, Match, Message, Mult, New, Rec, Record, RecordExpr, SL, Select, Seq, Skip,
    TApp, TL, TVar, Type, UNIT, Unit, Var, Variant, expr_size, free_tvars, let_pair, pair_expr,
    pair_type, type_size,
)

LABELS = ("A", "B", "C")
PAYLOADS = (INT, BOOL, CHAR, UNIT)


# ---------------------------------------------------------------- session types


def _session(rng: random.Random, size: int, bound: list[str]) -> Type:
    if size <= 1:
        roll = rng.random()
        if bound and roll < 0.3:
            return TVar(rng.choice(bound))
        if roll < 0.45:
            return Skip()
        return Message(rng.choice("!?"), rng.choice(PAYLOADS))
    form = rng.choices(("seq", "choice", "rec", "msg"), (4, 2, 2, 1))[0]
    if form == "msg":
        return Message(rng.choice("!?"), rng.choice(PAYLOADS))
    if form == "seq":
        left = rng.randint(1, size - 1)
        return Seq(_session(rng, left, bound), _session(rng, size - left, bound))
    if form == "rec":
        a = f"x{len(bound)}"
        return Rec(a, SL, _session(rng, size - 1, bound + [a]))
    labels = rng.sample(LABELS, rng.randint(1, min(3, max(1, (size - 1)))))
    budget = max(1, (size - 1) // len(labels))
    return Choice(rng.choice("+&"), tuple((l, _session(rng, rng.randint(1, budget), bound))
                                          for l in labels))


def has_vacuous_rec(t: Type) -> bool:
    """Is there a ``rec a . T`` whose variable does not occur in ``T``?"""
    match t:
        case Rec(a, _, b):
            return a not in free_tvars(b) or has_vacuous_rec(b)
        case Seq(l, r):
            return has_vacuous_rec(l) or has_vacuous_rec(r)
        case Choice(_, bs):
            return any(has_vacuous_rec(b) for _, b in bs)
        case Forall(_, _, b):
            return has_vacuous_rec(b)
    return False


def well_kinded(t: Type, k=SL, delta=None) -> bool:
    try:
        kind_check(delta or {}, t, k)
        return True
    except KindError:
        return False


def random_session_type(rng: random.Random, max_size: int = 20) -> Type:
    """A closed, contractive session type of size at most ``max_size`` with no vacuous rec."""
    while True:
        t = _session(rng, rng.randint(1, max_size), [])
        if type_size(t) <= max_size and well_kinded(t) and not has_vacuous_rec(t):
            return t


def _positions(t: Type, path=()):
    yield path, t
    match t:
        case Seq(l, r):
            yield from _positions(l, path + (0,))
            yield from _positions(r, path + (1,))
        case Choice(_, bs):
            for i, (_, b) in enumerate(bs):
                yield from _positions(b, path + (i,))
        case Rec(_, _, b):
            yield from _positions(b, path + (0,))


def _replace(t: Type, path: tuple, new: Type) -> Type:
    if not path:
        return new
    i, rest = path[0], path[1:]
    match t:
        case Seq(l, r):
            return Seq(_replace(l, rest, new), r) if i == 0 else Seq(l, _replace(r, rest, new))
        case Choice(v, bs):
            return Choice(v, tuple((l, _replace(b, rest, new) if j == i else b)
                                   for j, (l, b) in enumerate(bs)))
        case Rec(a, k, b):
            return Rec(a, k, _replace(b, rest, new))
    raise ValueError(path)


def mutate_session_type(rng: random.Random, t: Type) -> Type:
    """A small local edit of ``t``: flip a polarity or view, swap a payload, or drop a branch."""
    sites = [(p, s) for p, s in _positions(t) if isinstance(s, (Message, Choice, Skip))]
    for _ in range(10):
        path, site = rng.choice(sites)
        match site:
            case Message(pol, p):
                if rng.random() < 0.5:
                    new = Message("?" if pol == "!" else "!", p)
                else:
                    new = Message(pol, rng.choice([q for q in PAYLOADS if q != p]))
            case Choice(view, bs):
                if len(bs) > 1 and rng.random() < 0.5:
                    new = Choice(view, bs[:-1])
                else:
                    new = Choice("&" if view == "+" else "+", bs)
            case _:
                new = Message(rng.choice("!?"), rng.choice(PAYLOADS))
        u = _replace(t, path, new)
        if well_kinded(u) and not has_vacuous_rec(u):
            return u
    return t


# ---------------------------------------------------------------- arbitrary types


def _any(rng: random.Random, size: int, bound: list[str]) -> Type:
    if size <= 1:
        roll = rng.random()
        if bound and roll < 0.25:
            return TVar(rng.choice(bound))
        if roll < 0.35:
            return TVar("free")  # occasionally ill-scoped on purpose
        if roll < 0.5:
            return Skip()
        if roll < 0.6:
            return Unit(rng.choice(list(Mult)))
        return Base(rng.choice(BASE_TYPES))
    form = rng.choice(("arrow", "record", "variant", "forall", "rec", "seq", "msg", "choice"))
    if form == "arrow":
        left = rng.randint(1, size - 1)
        return Arrow(rng.choice(list(Mult)), _any(rng, left, bound), _any(rng, size - left, bound))
    if form in ("record", "variant"):
        n = rng.randint(1, min(3, size - 1))
        fields = tuple((f"l{i}", _any(rng, max(1, (size - 1) // n), bound)) for i in range(n))
        return Record(fields) if form == "record" else Variant(fields)
    if form in ("forall", "rec"):
        a = f"y{len(bound)}"
        k = rng.choice(ALL_KINDS)
        body = _any(rng, size - 1, bound + [a])
        return Forall(a, k, body) if form == "forall" else Rec(a, k, body)
    if form == "seq":
        left = rng.randint(1, size - 1)
        return Seq(_any(rng, left, bound), _any(rng, size - left, bound))
    if form == "msg":
        return Message(rng.choice("!?"), _any(rng, size - 1, bound))
    n = rng.randint(1, min(3, size - 1))
    return Choice(rng.choice("+&"), tuple((LABELS[i], _any(rng, max(1, (size - 1) // n), bound))
                                          for i in range(n)))


def random_type(rng: random.Random, max_size: int = 12) -> Type:
    """Any type at all, well-formed or not; most are ill-kinded."""
    return _any(rng, rng.randint(1, max_size), [])


def random_well_kinded_type(rng: random.Random, max_size: int = 12) -> Type:
    while True:
        t = random_session_type(rng, max_size) if rng.random() < 0.4 else random_type(rng, max_size)
        if well_kinded(t, TL):
            return t


# ---------------------------------------------------------------- programs

PROTOCOLS = (
    Message("!", INT),
    Message("?", INT),
    Seq(Message("?", INT), Message("!", BOOL)),
    Seq(Message("!", INT), Message("?", INT)),
    Choice("+", (("A", Message("!", INT)), ("B", Skip()))),
    Choice("&", (("A", Message("?", INT)), ("B", Skip()))),
    Skip(),
)


class ProgramGen:
    """Type-directed generator of small terms over channel variables, with mutations."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.counter = 0

    def fresh(self, hint: str) -> str:
        self.counter += 1
        return f"{hint}{self.counter}"

    def int_expr(self, ints: list[str]) -> Expr:
        r = self.rng.random()
        if ints and r < 0.5:
            return Var(self.rng.choice(ints))
        if r < 0.7:
            return App(App(Const("+"), Lit(self.rng.randint(0, 9))),
                       Var(self.rng.choice(ints)) if ints else Lit(1))
        return Lit(self.rng.randint(0, 9))

    def consume(self, c: str, s: Type, ints: list[str]) -> Expr:
        """An Int-typed expression that runs protocol ``s`` on ``c``."""
        rng = self.rng
        match s:
            case Skip():
                return self.int_expr(ints)
            case Message(pol, p) | Seq(Message(pol, p), _):
                rest = s.right if isinstance(s, Seq) else Skip()
                c2 = self.fresh("c")
                if pol == "!":
                    payload = self.int_expr(ints) if p == INT else Lit(rng.random() < 0.5)
                    if rng.random() < 0.5:
                        op = App(App(Const("send"), payload), Var(c))
                    else:
                        op = App(TApp(App(TApp(Const("send"), p), payload), rest), Var(c))
                    return LetRecord((("it", c2),), _one(op), self.consume(c2, rest, ints))
                x = self.fresh("x")
                op = App(Const("receive"), Var(c)) if rng.random() < 0.5 else \
                    App(TApp(TApp(Const("receive"), p), rest), Var(c))
                more = ints + [x] if p == INT else ints
                return let_pair(x, c2, op, self.consume(c2, rest, more))
            case Choice("+", bs):
                label, cont = rng.choice(bs)
                c2 = self.fresh("c")
                return LetRecord((("it", c2),), _one(App(Select(label), Var(c))),
                                 self.consume(c2, cont, ints))
            case Choice("&", bs):
                branches = []
                for label, cont in bs:
                    c2 = self.fresh("c")
                    branches.append((label, Abs(Mult.LIN, c2, None,
                                                self.consume(c2, cont, ints))))
                return Match(Var(c), tuple(branches))
        raise ValueError(f"unsupported protocol {s}")

    def well_typed(self) -> tuple[dict, Expr, Type]:
        rng = self.rng
        s = rng.choice(PROTOCOLS)
        form = rng.choice(("open", "lambda", "new", "if"))
        c = self.fresh("c")
        if form == "open":
            return {c: s}, self.consume(c, s, []), INT
        if form == "lambda":
            body = self.consume(c, s, [])
            return {}, Abs(Mult.LIN, c, s, body), Arrow(Mult.LIN, s, INT)
        if form == "if":
            n = self.fresh("n")
            e = If(App(App(Const("=="), Var(n)), Lit(0)),
                   self.consume(c, s, [n]), self.consume(c, s, [n]))
            return {c: s, n: INT}, e, INT
        d = self.fresh("d")
        forked = App(Const("fork"), self.consume(d, dual(s), []))
        body = LetRecord((("it", self.fresh("u")),), _one(forked), self.consume(c, s, []))
        return {}, let_pair(c, d, New(s), body), INT

    def mutate(self, gamma: dict, e: Expr, t: Type) -> tuple[dict, Expr, Type]:
        """Perturb a well-typed sample; the result may or may not still type."""
        rng = self.rng
        roll = rng.randrange(6)
        if roll == 0 and gamma:
            x = rng.choice(sorted(gamma))
            return gamma, pair_expr(e, Var(x)), pair_type(t, gamma[x])
        if roll == 1 and gamma:
            extra = {self.fresh("c"): rng.choice(PROTOCOLS[:-1])}
            return {**gamma, **extra}, e, t
        if roll == 2 and isinstance(e, Abs):
            return gamma, Abs(Mult.UN if e.mult is Mult.LIN else Mult.LIN, e.var, e.annot, e.body), t
        if roll == 3 and gamma:
            x = rng.choice(sorted(gamma))
            gamma = {**gamma, x: rng.choice(PROTOCOLS)}
            return gamma, e, t
        if roll == 4:
            return gamma, e, rng.choice((BOOL, UNIT, Arrow(Mult.UN, INT, INT)))
        def un_wrap(inner: Expr) -> Expr:
            return Abs(Mult.UN, self.fresh("z"), INT, inner)
        return gamma, un_wrap(e), Arrow(Mult.UN, INT, t)

    def sample(self, max_nodes: int = 25) -> tuple[dict, Expr, Type]:
        while True:
            gamma, e, t = self.well_typed()
            if self.rng.random() < 0.5:
                gamma, e, t = self.mutate(gamma, e, t)
            if expr_size(e) <= max_nodes:
                return gamma, e, t


def _one(e: Expr) -> RecordExpr:
    return RecordExpr((("it", e),))
