"""Bidirectional type checking with linear context threading.

``synth`` returns a type together with the part of the context that the
expression left untouched; ``check`` does the same against a known type.
Top-level names live in a separate unrestricted table.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .duality import dual, head_choice, head_message, normalise
from .equivalence import DEFAULT_BUDGET, Equivalence, EquivalenceUndecided
from .kinding import KindError, kind_check, kind_synth, subkind
from .printer import show_type, tidy
from .syntax import (
    Abs, App, Arrow, BOOL, CHAR, Case, Const, CoreProgram, Expr, Forall, INT, If, Inject,
    Kind, LetRecord, LetUnit, Lit, ML, Match, Message, Mult, New, Record, RecordExpr, RevApp,
    SL, Select, Seq, TAbs, TApp, TL, TU, TVar, Type, UNIT, Var, Variant, base_name,
    fresh_name, free_tvars, pair_type, rename_binders, subst_expr, subst_type,
    subst_type_in_expr,
)

Context = dict  # ordered: variable -> Type


# ---------------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    span: Optional[tuple]
    rule: str
    message: str

    def text(self, filename: str = "") -> str:
        where = ""
        if self.span:
            where = f"{self.span[0]}:{self.span[1]}: "
        prefix = f"{filename}:" if filename else ""
        if prefix and not where:
            prefix += " "
        return f"{prefix}{where}{self.severity}: {self.message}"

    def as_dict(self) -> dict:
        return {"severity": self.severity, "span": list(self.span) if self.span else None,
                "rule": self.rule, "message": self.message}

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


DIAGNOSTIC_SCHEMA = {
    "type": "object",
    "required": ["severity", "span", "rule", "message"],
    "properties": {
        "severity": {"enum": ["error", "warning"]},
        "span": {"anyOf": [{"type": "null"},
                           {"type": "array", "items": {"type": "integer"}, "minItems": 2,
                            "maxItems": 2}]},
        "rule": {"type": "string"},
        "message": {"type": "string"},
    },
    "additionalProperties": False,
}


def sort_diagnostics(ds) -> list[Diagnostic]:
    return sorted(ds, key=lambda d: d.span or (0, 0))


class CheckError(Exception):
    def __init__(self, rule: str, message: str, span=None):
        self.rule = rule
        self.message = message
        self.span = span
        super().__init__(message)

    def diagnostic(self) -> Diagnostic:
        return Diagnostic("error", self.span, self.rule, self.message)


class MonotonicityViolation(AssertionError):
    pass


# ---------------------------------------------------------------- constants

ARITH = ("+", "-", "*", "/", "%")
COMPARE = ("==", "/=", "<", ">", "<=", ">=")
LOGIC = ("&&", "||")


def typeof_const(name: str) -> Type:
    """Types of the builtin constants, with fresh bound variables."""
    if name == "send":
        a, b = fresh_name("a"), fresh_name("b")
        return Forall(a, ML, Arrow(Mult.UN, TVar(a), Forall(b, SL, Arrow(
            Mult.LIN, Seq(Message("!", TVar(a)), TVar(b)), TVar(b)))))
    if name == "receive":
        a, b = fresh_name("a"), fresh_name("b")
        return Forall(a, ML, Forall(b, SL, Arrow(
            Mult.UN, Seq(Message("?", TVar(a)), TVar(b)), pair_type(TVar(a), TVar(b)))))
    if name == "fork":
        a = fresh_name("a")
        return Forall(a, TU, Arrow(Mult.UN, TVar(a), UNIT))
    if name == "unit":
        return UNIT
    if name in ARITH:
        return Arrow(Mult.UN, INT, Arrow(Mult.UN, INT, INT))
    if name in COMPARE:
        return Arrow(Mult.UN, INT, Arrow(Mult.UN, INT, BOOL))
    if name in LOGIC:
        return Arrow(Mult.UN, BOOL, Arrow(Mult.UN, BOOL, BOOL))
    if name == "not":
        return Arrow(Mult.UN, BOOL, BOOL)
    raise KeyError(f"unknown constant {name}")


def typeof_lit(v) -> Type:
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    return CHAR


# ---------------------------------------------------------------- contexts


def is_linear(delta: Mapping[str, Kind], t: Type) -> bool:
    return kind_synth(delta, t).mult is Mult.LIN


def linear_part(delta, gamma: Context) -> dict:
    return {x: t for x, t in gamma.items() if is_linear(delta, t)}


def unrestricted_part(delta, gamma: Context) -> dict:
    return {x: t for x, t in gamma.items() if not is_linear(delta, t)}


def ctx_diff(delta: Mapping[str, Kind], gamma: Context, x: str) -> Context:
    """Remove ``x`` from ``gamma``; refuses when ``x`` is still bound at a linear type."""
    if x not in gamma:
        return gamma
    t = gamma[x]
    try:
        kind_check(delta, t, TU)
    except KindError:
        raise CheckError("ctx-diff", f"linear variable {base_name(x)} : {show(t)} is never used")
    out = dict(gamma)
    del out[x]
    return out


def ctx_split_oracle(delta: Mapping[str, Kind], gamma: Context):
    """Every declarative split of ``gamma``: unrestricted entries go both ways, linear ones pick a side."""
    lin = [x for x, t in gamma.items() if is_linear(delta, t)]
    for choice in itertools.product((0, 1), repeat=len(lin)):
        side = dict(zip(lin, choice))
        g1 = {x: t for x, t in gamma.items() if side.get(x, 0) == 0 or x not in side}
        g2 = {x: t for x, t in gamma.items() if side.get(x, 1) == 1 or x not in side}
        yield g1, g2


def show(t: Type, names=None) -> str:
    if names is not None:
        n = names(t)
        if n is not None:
            return n
    return show_type(tidy(t))


# ---------------------------------------------------------------- the checker


@dataclass
class Checker:
    """One checking session: global signatures, equivalence budget and bookkeeping."""

    globals: dict = field(default_factory=dict)
    budget: int = DEFAULT_BUDGET
    debug: bool = False
    type_names: Optional[dict] = None  # declared name -> type, for messages
    judgements: int = 0
    violations: list = field(default_factory=list)

    def __post_init__(self):
        self._equiv = Equivalence(budget=self.budget)

    # -- helpers
    def name_of(self, t: Type) -> Optional[str]:
        if not self.type_names:
            return None
        for n, u in self.type_names.items():
            if u == t:
                return n
        return None

    def show(self, t: Type) -> str:
        return show(t, self.name_of)

    def kind_out(self, delta, t: Type) -> Kind:
        try:
            return kind_synth(delta, t)
        except KindError as err:
            raise CheckError("kinding", f"ill-formed type {self.show(t)}: {_issues(err)}")

    def kind_in(self, delta, t: Type, k: Kind, what: str = "type") -> None:
        try:
            kind_check(delta, t, k)
        except KindError as err:
            raise CheckError("kinding", f"{what} {self.show(t)} does not have kind {k}: {_issues(err)}")

    def linear(self, delta, t: Type) -> bool:
        return self.kind_out(delta, t).mult is Mult.LIN

    def equiv(self, delta, t: Type, u: Type) -> bool:
        self._equiv.delta = dict(delta)
        self._equiv.last_trace = None
        try:
            return self._equiv.equiv(t, u)
        except EquivalenceUndecided:
            raise CheckError("TA-Eq", f"could not decide whether {self.show(t)} and {self.show(u)} "
                                      f"are equivalent within budget {self.budget}")

    def require_equiv(self, delta, expected: Type, found: Type, rule: str = "TA-Eq") -> None:
        if not self.equiv(delta, expected, found):
            msg = f"expected type {self.show(expected)}, found {self.show(found)}"
            if self._equiv.last_trace is not None:
                trace = " ".join(str(l) for l in self._equiv.last_trace)
                msg += f"; distinguished by: {trace}"
            raise CheckError(rule, msg)

    def ctx_equiv(self, delta, g1: Context, g2: Context, rule: str) -> None:
        if g1.keys() != g2.keys():
            extra = sorted(base_name(x) for x in g1.keys() ^ g2.keys())
            raise CheckError(rule, "branch contexts disagree on " + ", ".join(extra))
        for x in g1:
            if not self.equiv(delta, g1[x], g2[x]):
                raise CheckError(rule, f"branches leave {base_name(x)} at different types "
                                       f"{self.show(g1[x])} and {self.show(g2[x])}")

    def diff(self, delta, gamma: Context, x: str) -> Context:
        return ctx_diff(delta, gamma, x)

    def bind(self, gamma: Context, x: str, body: Expr, avoid=()):
        """Pick a binder name not already in ``gamma``, renaming it in ``body`` if needed."""
        if x in gamma or x in avoid:
            y = fresh_name(x)
            return y, subst_expr(body, x, Var(y))
        return x, body

    # -- judgements
    def synth(self, delta, gamma: Context, e: Expr) -> tuple[Type, Context]:
        try:
            t, out = self._synth(delta, gamma, e)
        except CheckError as err:
            if err.span is None:
                err.span = e.span
            raise
        self._monotone(delta, gamma, out, e)
        return t, out

    def check(self, delta, gamma: Context, e: Expr, t: Type) -> Context:
        try:
            out = self._check(delta, gamma, e, t)
        except CheckError as err:
            if err.span is None:
                err.span = e.span
            raise
        self._monotone(delta, gamma, out, e)
        return out

    def _monotone(self, delta, g_in: Context, g_out: Context, e: Expr) -> None:
        self.judgements += 1
        if not self.debug:
            return
        un_in, un_out = unrestricted_part(delta, g_in), unrestricted_part(delta, g_out)
        lin_in, lin_out = linear_part(delta, g_in), linear_part(delta, g_out)
        ok = un_in.keys() == un_out.keys() and all(un_in[x] == un_out[x] for x in un_in)
        ok = ok and all(x in lin_in and lin_in[x] == t for x, t in lin_out.items())
        if not ok:
            self.violations.append(e)
            raise MonotonicityViolation(f"context grew or lost unrestricted entries at {e}")

    def _check(self, delta, gamma: Context, e: Expr, t: Type) -> Context:
        match e:
            case If(c, a, b):
                g2 = self.check(delta, gamma, c, BOOL)
                g3 = self.check(delta, g2, a, t)
                g4 = self.check(delta, g2, b, t)
                self.ctx_equiv(delta, g3, g4, "TA-If")
                return g3
            case LetRecord(binds, bound, body):
                return self._let_record(delta, gamma, binds, bound, body,
                                        lambda g, b: (t, self.check(delta, g, b, t)))[1]
            case LetUnit(bound, body):
                g2 = self.check(delta, gamma, bound, UNIT)
                return self.check(delta, g2, body, t)
        u, out = self.synth(delta, gamma, e)
        self.require_equiv(delta, t, u)
        return out

    def _synth(self, delta, gamma: Context, e: Expr):
        match e:
            case Var(x):
                if x in gamma:
                    t = gamma[x]
                    if self.linear(delta, t):
                        out = dict(gamma)
                        del out[x]
                        return t, out
                    return t, gamma
                if x in self.globals:
                    return self.globals[x], gamma
                raise CheckError("TA-Var", f"variable {base_name(x)} is not in scope")
            case Const(c):
                try:
                    return typeof_const(c), gamma
                except KeyError:
                    raise CheckError("TA-Const", f"unknown constant {c}")
            case Lit(v):
                return typeof_lit(v), gamma
            case Abs(m, x, t1, body):
                if t1 is None:
                    raise CheckError("TA-Abs", "cannot synthesise the type of an unannotated function")
                self.kind_out(delta, t1)
                x, body = self.bind(gamma, x, body, self.globals)
                g1 = dict(gamma)
                g1[x] = t1
                t2, g2 = self.synth(delta, g1, body)
                out = self.diff(delta, g2, x)
                if m is Mult.UN and out.keys() != gamma.keys():
                    used = sorted(base_name(y) for y in gamma.keys() - out.keys())
                    raise CheckError("TA-UnAbs", "unrestricted function uses linear variable(s) "
                                     + ", ".join(used) + "; use -o")
                return Arrow(m, t1, t2), (gamma if m is Mult.UN else out)
            case App(f, arg):
                special = self._special_app(delta, gamma, f, arg)
                if special is not None:
                    return special
                tf, g2 = self.synth(delta, gamma, f)
                arg_type = None
                n = normalise(tf)
                if isinstance(n, Forall) and channel_op(f) in ("send", "receive"):
                    arg_type, g3 = self.synth(delta, g2, arg)
                    n = self._instantiate_cont(delta, n, arg_type)
                if not isinstance(n, Arrow):
                    raise CheckError("TA-App", f"expected a function, found {self.show(tf)}")
                if arg_type is None:
                    return n.cod, self.check(delta, g2, arg, n.dom)
                self.require_equiv(delta, n.dom, arg_type)
                return n.cod, g3
            case TAbs(a, k, body):
                if a in delta:
                    b = fresh_name(a)
                    body = subst_type_in_expr(body, a, TVar(b))
                    a = b
                inner = dict(delta)
                inner[a] = k
                t, g2 = self.synth(inner, gamma, body)
                for x, u in g2.items():
                    if a in free_tvars(u):
                        raise CheckError("TA-TAbs", f"type variable {a} escapes through {base_name(x)}")
                return Forall(a, k, t), g2
            case TApp(x, t):
                u, g2 = self.synth(delta, gamma, x)
                n = normalise(u)
                if not isinstance(n, Forall):
                    raise CheckError("TA-TApp", f"type application to a non-polymorphic {self.show(u)}")
                self.kind_in(delta, t, n.kind, "type argument")
                return rename_binders(subst_type(n.body, n.var, t)), g2
            case RecordExpr(fs):
                out, g = [], gamma
                for l, x in fs:
                    t, g = self.synth(delta, g, x)
                    out.append((l, t))
                return Record(tuple(out)), g
            case LetRecord(binds, bound, body):
                return self._let_record(delta, gamma, binds, bound, body,
                                        lambda g, b: self.synth(delta, g, b))
            case LetUnit(bound, body):
                g2 = self.check(delta, gamma, bound, UNIT)
                return self.synth(delta, g2, body)
            case Inject(k, v, payload):
                self.kind_in(delta, v, TL, "variant")
                n = normalise(v)
                if not isinstance(n, Variant):
                    raise CheckError("TA-Variant", f"{self.show(v)} is not a variant type")
                fm = n.field_map
                if k not in fm:
                    raise CheckError("TA-Variant", f"constructor {k} not in {self.show(v)}")
                return v, self.check(delta, gamma, payload, fm[k])
            case Case(scrut, branches):
                t, g2 = self.synth(delta, gamma, scrut)
                n = normalise(t)
                if not isinstance(n, Variant):
                    raise CheckError("TA-Case", f"case over a non-variant type {self.show(t)}")
                return self._branches(delta, g2, n.field_map, branches, "TA-Case", t)
            case Match(scrut, branches):
                t, g2 = self.synth(delta, gamma, scrut)
                ch = head_choice(t)
                if ch is None or ch.view != "&":
                    raise CheckError("TA-Match", f"match on a channel of type {self.show(t)}, "
                                                 "which does not offer an external choice")
                return self._branches(delta, g2, ch.branch_map, branches, "TA-Match", t)
            case New(t):
                if free_tvars(t):
                    raise CheckError("TA-New", f"channel type {self.show(t)} must be closed "
                                               "(new is checked under an empty kinding context)")
                self.kind_in({}, t, SL, "channel type")
                return pair_type(t, dual(t)), gamma
            case Select(k, annot):
                if annot is None:
                    raise CheckError("TA-Sel", f"select {k} needs a channel to read its choice type from")
                self.kind_in(delta, annot, SL, "choice")
                ch = head_choice(annot)
                if ch is None or ch.view != "+":
                    raise CheckError("TA-Sel", f"{self.show(annot)} is not an internal choice")
                if k not in ch.branch_map:
                    raise CheckError("TA-Sel", f"branch {k} not present in internal choice type "
                                               f"{self.show(annot)}")
                return Arrow(Mult.UN, annot, ch.branch_map[k]), gamma
            case If(c, a, b):
                g2 = self.check(delta, gamma, c, BOOL)
                ta, g3 = self.synth(delta, g2, a)
                g4 = self.check(delta, g2, b, ta)
                self.ctx_equiv(delta, g3, g4, "TA-If")
                return ta, g3
            case RevApp(arg, f):
                ta, g2 = self.synth(delta, gamma, arg)
                return self._apply_to(delta, g2, f, ta)
        raise CheckError("TA", f"no typing rule for {type(e).__name__}")

    def _let_record(self, delta, gamma, binds, bound, body, then):
        t1, g2 = self.synth(delta, gamma, bound)
        n = normalise(t1)
        labels = [l for l, _ in binds]
        if not isinstance(n, Record) or set(n.field_map) != set(labels):
            want = "pair" if labels == ["fst", "snd"] else "record {" + ", ".join(labels) + "}"
            raise CheckError("TA-Proj", f"expected a {want}, found {self.show(t1)}")
        g3 = dict(g2)
        names = []
        fm = n.field_map
        for l, x in binds:
            y, body = self.bind(g3, x, body, self.globals)
            g3[y] = fm[l]
            names.append(y)
        u, g4 = then(g3, body)
        for y in names:
            g4 = self.diff(delta, g4, y)
        return u, g4

    def _branches(self, delta, gamma, fields: dict, branches, rule: str, scrut_type):
        got = [l for l, _ in branches]
        if set(got) != set(fields):
            missing = sorted(set(fields) - set(got))
            extra = sorted(set(got) - set(fields))
            parts = []
            if missing:
                parts.append("missing " + ", ".join(missing))
            if extra:
                parts.append(", ".join(extra) + " not in " + self.show(scrut_type))
            raise CheckError(rule, "branches do not match the type: " + "; ".join(parts))
        results = []
        for l, br in branches:
            if isinstance(br, Abs) and br.annot is None:
                br = Abs(br.mult, br.var, fields[l], br.body, span=br.span)
            tb, gb = self.synth(delta, gamma, br)
            n = normalise(tb)
            if not isinstance(n, Arrow) or n.mult is not Mult.LIN:
                raise CheckError(rule, f"branch {l} must be a linear function, found {self.show(tb)}")
            self.require_equiv(delta, fields[l], n.dom, rule)
            results.append((l, n.cod, gb))
        _, u0, g0 = results[0]
        for l, u, g in results[1:]:
            if not self.equiv(delta, u0, u):
                raise CheckError(rule, f"branch {l} has type {self.show(u)}, "
                                       f"but branch {results[0][0]} has {self.show(u0)}")
            self.ctx_equiv(delta, g0, g, rule)
        return u0, g0

    # -- implicit instantiation for channel operations
    def _special_app(self, delta, gamma, f: Expr, arg: Expr):
        match f:
            case App(Const("send"), v):
                tv, g2 = self.synth(delta, gamma, v)
                tc, g3 = self.synth(delta, g2, arg)
                return self._send(delta, tv, tc), g3
            case Const("receive"):
                tc, g2 = self.synth(delta, gamma, arg)
                return self._receive(delta, tc), g2
            case Select(k, None):
                tc, g2 = self.synth(delta, gamma, arg)
                return self._select(delta, k, tc), g2
            case Const("fork"):
                t, g2 = self.synth(delta, gamma, arg)
                self.kind_in(delta, t, TU, "forked expression of type")
                return UNIT, g2
        return None

    def _apply_to(self, delta, gamma, f: Expr, ta: Type):
        """Type ``f`` applied to an argument of type ``ta`` that was already checked."""
        match f:
            case App(Const("send"), v):
                tv, g2 = self.synth(delta, gamma, v)
                return self._send(delta, tv, ta), g2
            case Const("receive"):
                return self._receive(delta, ta), gamma
            case Select(k, None):
                return self._select(delta, k, ta), gamma
        tf, g2 = self.synth(delta, gamma, f)
        n = normalise(tf)
        if isinstance(n, Forall) and channel_op(f) in ("send", "receive"):
            n = self._instantiate_cont(delta, n, ta)
        if not isinstance(n, Arrow):
            raise CheckError("TA-App", f"expected a function after &, found {self.show(tf)}")
        self.require_equiv(delta, n.dom, ta)
        return n.cod, g2

    def _send(self, delta, tv: Type, tc: Type) -> Type:
        self.kind_in(delta, tv, ML, "sent value of type")
        hm = head_message(tc)
        if hm is None or hm[0] != "!":
            raise CheckError("TA-App", f"send on a channel of type {self.show(tc)}, "
                                       "which does not start with an output")
        self.require_equiv(delta, hm[1], tv)
        self.kind_in(delta, hm[2], SL, "continuation")
        return hm[2]

    def _receive(self, delta, tc: Type) -> Type:
        hm = head_message(tc)
        if hm is None or hm[0] != "?":
            raise CheckError("TA-App", f"receive on a channel of type {self.show(tc)}, "
                                       "which does not start with an input")
        self.kind_in(delta, hm[1], ML, "received value of type")
        return pair_type(hm[1], hm[2])

    def _select(self, delta, k: str, tc: Type) -> Type:
        ch = head_choice(tc)
        if ch is None or ch.view != "+":
            raise CheckError("TA-Sel", f"select {k} on a channel of type {self.show(tc)}, "
                                       "which does not offer an internal choice")
        bm = ch.branch_map
        if k not in bm:
            raise CheckError("TA-Sel", f"branch {k} not present in internal choice type {self.show(tc)}")
        return bm[k]

    def _instantiate_cont(self, delta, fa: Forall, arg: Type) -> Type:
        """Read the continuation variable of ``∀b:SL. (μ;b) -> …`` off a message-headed argument."""
        body = fa.body
        if not (isinstance(body, Arrow) and isinstance(body.dom, Seq)
                and body.dom.right == TVar(fa.var) and isinstance(body.dom.left, Message)
                and fa.kind == SL and fa.var not in free_tvars(body.dom.left)):
            return fa
        hm = head_message(arg)
        if hm is None or hm[0] != body.dom.left.polarity:
            return fa
        return rename_binders(subst_type(body, fa.var, hm[2]))

    # -- programs
    def check_decl(self, name: str, sig: Type, body: Expr) -> None:
        self.kind_out({}, sig)
        if not subkind(self.kind_out({}, sig), TU):
            raise CheckError("T-Decl", f"top-level {name} must have an unrestricted type, "
                                       f"not {self.show(sig)}")
        out = self.check({}, {}, body, sig)
        for x, t in out.items():
            if self.linear({}, t):
                raise CheckError("T-Decl", f"linear variable {base_name(x)} left unused")


def spine(e: Expr) -> tuple[Expr, list[Expr], int]:
    """Head, term arguments, and number of type arguments of an application spine."""
    args, ntypes = [], 0
    while True:
        if isinstance(e, App):
            args.append(e.arg)
            e = e.fun
        elif isinstance(e, TApp):
            ntypes += 1
            e = e.expr
        else:
            return e, args[::-1], ntypes


def channel_op(e: Expr) -> Optional[str]:
    head = spine(e)[0]
    if isinstance(head, Const) and head.name in ("send", "receive", "fork"):
        return head.name
    if isinstance(head, Select):
        return "select"
    return None


def _issues(err: KindError) -> str:
    return "; ".join(f"{i.message} ({i.rule})" for i in err.issues)


def check_program(prog: CoreProgram, *, budget: int = DEFAULT_BUDGET, debug: bool = False,
                  type_names=None, checker: Optional[Checker] = None) -> list[Diagnostic]:
    """Check every declaration against its signature; at most one error per declaration."""
    chk = checker or Checker(dict(prog.signatures), budget, debug, type_names)
    diags = []
    for name, d in prog.decls.items():
        try:
            chk.check_decl(name, d.type, d.body)
        except CheckError as err:
            if err.span is None:
                err.span = d.span
            diags.append(err.diagnostic())
    return sort_diagnostics(diags)
