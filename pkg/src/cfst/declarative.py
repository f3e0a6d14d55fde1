"""Brute-force declarative typing, used as an oracle for the algorithmic checker.

Every rule that splits the context tries all splits; leaves demand that
whatever is left over be unrestricted. Exponential, so only for small terms.
"""

from __future__ import annotations

from typing import Mapping, Optional

from .duality import dual, head_choice, head_message, normalise
from .equivalence import DEFAULT_BUDGET, EquivalenceUndecided, type_equiv
from .kinding import KindError, kind_check, kind_synth, subkind
from .syntax import (
    Abs, App, Arrow, BOOL, Case, Const, Expr, Forall, If, Inject, LetRecord, LetUnit, Lit, ML,
    Match, Message, Mult, New, Record, RecordExpr, RevApp, SL, Select, Seq, TAbs, TApp, TL, TU,
    TVar, Type, UNIT, Var, Variant, fresh_name, free_tvars, pair_type, subst_expr, subst_type,
    subst_type_in_expr,
)
from .typechecker import channel_op, ctx_split_oracle, is_linear, typeof_const, typeof_lit


class Declarative:
    """Derivability of ``Δ; Γ ⊢ e : T`` by exhaustive search."""

    def __init__(self, globals_: Optional[dict] = None, budget: int = DEFAULT_BUDGET):
        self.globals = dict(globals_ or {})
        self.budget = budget
        self._memo: dict = {}

    # -- helpers
    def _eq(self, delta, t: Type, u: Type) -> bool:
        try:
            return type_equiv(delta, t, u, self.budget)
        except EquivalenceUndecided:
            return False

    def _kinds(self, delta, t: Type, k) -> bool:
        try:
            kind_check(delta, t, k)
            return True
        except KindError:
            return False

    def _unrestricted(self, delta, gamma: dict) -> bool:
        return not any(is_linear(delta, t) for t in gamma.values())

    def _dedup(self, delta, types) -> list[Type]:
        out: list[Type] = []
        for t in types:
            if not any(self._eq(delta, t, u) for u in out):
                out.append(t)
        return out

    def _fresh(self, gamma: dict, x: str, body: Expr):
        if x in gamma or x in self.globals:
            y = fresh_name(x)
            return y, subst_expr(body, x, Var(y))
        return x, body

    def _splits(self, delta, gamma: dict, n: int):
        """All ways of dealing ``gamma`` out to ``n`` premises."""
        if n == 1:
            yield (gamma,)
            return
        for g1, rest in ctx_split_oracle(delta, gamma):
            for tail in self._splits(delta, rest, n - 1):
                yield (g1,) + tail

    # -- the judgement
    def check(self, delta: Mapping, gamma: dict, e: Expr, t: Type) -> bool:
        return any(self._eq(dict(delta), u, t) for u in self.types(delta, gamma, e))

    def types(self, delta: Mapping, gamma: dict, e: Expr) -> list[Type]:
        key = (tuple(sorted(delta.items(), key=lambda kv: kv[0])),
               frozenset(gamma.items()), e)
        if key not in self._memo:
            self._memo[key] = self._dedup(dict(delta), self._types(dict(delta), dict(gamma), e))
        return self._memo[key]

    def _types(self, delta: dict, gamma: dict, e: Expr):
        match e:
            case Var(x):
                if x in gamma:
                    rest = {y: t for y, t in gamma.items() if y != x}
                    if self._unrestricted(delta, rest):
                        yield gamma[x]
                elif x in self.globals and self._unrestricted(delta, gamma):
                    yield self.globals[x]
            case Const(c):
                if self._unrestricted(delta, gamma):
                    yield typeof_const(c)
            case Lit(v):
                if self._unrestricted(delta, gamma):
                    yield typeof_lit(v)
            case Abs(m, x, t1, body):
                if t1 is None or not self._kinds(delta, t1, TL):
                    return
                x, body = self._fresh(gamma, x, body)
                if m is Mult.UN and not self._unrestricted(delta, gamma):
                    return
                for t2 in self.types(delta, {**gamma, x: t1}, body):
                    yield Arrow(m, t1, t2)
            case App(f, a):
                yield from self._app(delta, gamma, f, a)
            case RevApp(a, f):
                yield from self._app(delta, gamma, f, a, reverse=True)
            case TAbs(a, k, body):
                if a in delta or any(a in free_tvars(t) for t in gamma.values()):
                    b = fresh_name(a)
                    body = subst_type_in_expr(body, a, TVar(b))
                    a = b
                for t in self.types({**delta, a: k}, gamma, body):
                    yield Forall(a, k, t)
            case TApp(x, t):
                for u in self.types(delta, gamma, x):
                    n = normalise(u)
                    if isinstance(n, Forall) and self._kinds(delta, t, n.kind):
                        yield subst_type(n.body, n.var, t)
            case RecordExpr(fs):
                if not fs:
                    return
                for parts in self._splits(delta, gamma, len(fs)):
                    yield from self._record(delta, parts, fs, ())
            case LetRecord(binds, bound, body):
                labels = {l for l, _ in binds}
                renamed = []
                for l, x in binds:
                    x, body = self._fresh(gamma, x, body)
                    renamed.append((l, x))
                binds = renamed
                for g1, g2 in ctx_split_oracle(delta, gamma):
                    for t1 in self.types(delta, g1, bound):
                        n = normalise(t1)
                        if not isinstance(n, Record) or set(n.field_map) != labels:
                            continue
                        inner = dict(g2)
                        for l, x in binds:
                            inner[x] = n.field_map[l]
                        yield from self.types(delta, inner, body)
            case LetUnit(bound, body):
                for g1, g2 in ctx_split_oracle(delta, gamma):
                    if self.check(delta, g1, bound, UNIT):
                        yield from self.types(delta, g2, body)
            case Inject(k, v, payload):
                n = normalise(v)
                if (self._kinds(delta, v, TL) and isinstance(n, Variant) and k in n.field_map
                        and self.check(delta, gamma, payload, n.field_map[k])):
                    yield v
            case Case(scrut, branches):
                for g1, g2 in ctx_split_oracle(delta, gamma):
                    for t in self.types(delta, g1, scrut):
                        n = normalise(t)
                        if isinstance(n, Variant):
                            yield from self._branches(delta, g2, n.field_map, branches)
            case Match(scrut, branches):
                for g1, g2 in ctx_split_oracle(delta, gamma):
                    for t in self.types(delta, g1, scrut):
                        ch = head_choice(t)
                        if ch is not None and ch.view == "&":
                            yield from self._branches(delta, g2, ch.branch_map, branches)
            case If(c, a, b):
                for g1, g2 in ctx_split_oracle(delta, gamma):
                    if not self.check(delta, g1, c, BOOL):
                        continue
                    for ta in self.types(delta, g2, a):
                        if self.check(delta, g2, b, ta):
                            yield ta
            case New(t):
                if (not free_tvars(t) and self._kinds({}, t, SL)
                        and self._unrestricted(delta, gamma)):
                    yield pair_type(t, dual(t))
            case Select(k, annot):
                if annot is None or not self._unrestricted(delta, gamma):
                    return
                ch = head_choice(annot)
                if self._kinds(delta, annot, SL) and ch is not None and ch.view == "+" \
                        and k in ch.branch_map:
                    yield Arrow(Mult.UN, annot, ch.branch_map[k])

    def _record(self, delta, parts, fs, acc):
        if not fs:
            yield Record(acc)
            return
        (l, x), g = fs[0], parts[0]
        for t in self.types(delta, g, x):
            yield from self._record(delta, parts[1:], fs[1:], acc + ((l, t),))

    def _branches(self, delta, gamma, fields: dict, branches):
        if {l for l, _ in branches} != set(fields):
            return
        results = None
        for l, br in branches:
            if isinstance(br, Abs) and br.annot is None:
                br = Abs(br.mult, br.var, fields[l], br.body)
            cods = []
            for t in self.types(delta, gamma, br):
                n = normalise(t)
                if isinstance(n, Arrow) and n.mult is Mult.LIN and self._eq(delta, n.dom, fields[l]):
                    cods.append(n.cod)
            if results is None:
                results = cods
            else:
                results = [u for u in results if any(self._eq(delta, u, v) for v in cods)]
        yield from results or ()

    def _app(self, delta, gamma, f, a, reverse=False):
        # the channel primitives may leave their type arguments implicit
        implicit = self._implicit(delta, gamma, f, a)
        if implicit is not None:
            yield from implicit
            return
        for g1, g2 in ctx_split_oracle(delta, gamma):
            fg, ag = (g2, g1) if reverse else (g1, g2)
            for tf in self.types(delta, fg, f):
                n = normalise(tf)
                if isinstance(n, Forall) and channel_op(f) in ("send", "receive"):
                    for ta in self.types(delta, ag, a):
                        u = _continuation(n, ta)
                        if u is not None and self._eq(delta, u.dom, ta):
                            yield u.cod
                elif isinstance(n, Arrow) and self.check(delta, ag, a, n.dom):
                    yield n.cod

    def _implicit(self, delta, gamma, f, a):
        match f:
            case App(Const("send"), v):
                out = []
                for gv, gc in ctx_split_oracle(delta, gamma):
                    for tv in self.types(delta, gv, v):
                        if not self._kinds(delta, tv, ML):
                            continue
                        for tc in self.types(delta, gc, a):
                            hm = head_message(tc)
                            if hm and hm[0] == "!" and self._eq(delta, hm[1], tv):
                                out.append(hm[2])
                return out
            case Const("receive"):
                out = []
                for tc in self.types(delta, gamma, a):
                    hm = head_message(tc)
                    if hm and hm[0] == "?":
                        out.append(pair_type(hm[1], hm[2]))
                return out
            case Select(k, None):
                out = []
                for tc in self.types(delta, gamma, a):
                    ch = head_choice(tc)
                    if ch is not None and ch.view == "+" and k in ch.branch_map:
                        out.append(ch.branch_map[k])
                return out
            case Const("fork"):
                return [UNIT for t in self.types(delta, gamma, a)
                        if subkind(kind_synth(delta, t), TU)][:1]
        return None


def _continuation(fa: Forall, arg: Type) -> Optional[Arrow]:
    """Instantiate ``∀b:SL. (μ;b) -> …`` with the continuation of a message-headed ``arg``."""
    body = fa.body
    if not (isinstance(body, Arrow) and isinstance(body.dom, Seq) and fa.kind == SL
            and body.dom.right == TVar(fa.var) and isinstance(body.dom.left, Message)
            and fa.var not in free_tvars(body.dom.left)):
        return None
    hm = head_message(arg)
    if hm is None or hm[0] != body.dom.left.polarity:
        return None
    return subst_type(body, fa.var, hm[2])


def declarative_check(gamma: dict, e: Expr, t: Type, globals_: Optional[dict] = None,
                      delta: Optional[dict] = None) -> bool:
    return Declarative(globals_).check(delta or {}, gamma, e, t)
