"""From parsed source to core declarations.

Type names are expanded into closed μ-types, pairs and plain ``let`` become
record forms, constructors become injection functions, and ``dualof`` is
computed on the spot. The result is renamed apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .duality import DualityError, dual
from .equivalence import is_session_type
from .kinding import KindError, kind_check, kind_of
from .parser import Binding, DataDecl, Signature, SourceProgram, TypeAbbrev, parse, parse_type
from .syntax import (
    Abs, App, Arrow, CaseS, Case, Choice, Con, Const, CoreProgram, Declaration, Dualof, Expr, Forall,
    If, Inject, Let, LetRecord, LetUnit, Lit, Match, MatchS, Message, Mult, New, Rec, Record,
    RecordExpr, RevApp, Select, Seq, Skip, SL, TAbs, TApp, TL, TName, TU, TVar, Tuple, Type, UNIT,
    UNIT_VALUE, Var, Variant, fresh_name, fresh_rename, free_tvars, let_pair, map_children,
    pair_expr, rename_binders, subst_type,
)

LET_LABEL = "it"  # the single field of the record a plain ``let`` desugars to


class ElabError(Exception):
    def __init__(self, message: str, span=None):
        self.message = message
        self.span = span
        where = f"{span[0]}:{span[1]}: " if span else ""
        super().__init__(where + message)


@dataclass
class Elaboration:
    program: CoreProgram
    type_names: dict[str, Type] = field(default_factory=dict)  # name -> closed core type
    constructors: dict[str, tuple] = field(default_factory=dict)  # ctor -> (datatype, arity)

    def name_of(self, t: Type) -> Optional[str]:
        """The declared name of a type, if ``t`` is (alpha-equal to) one."""
        for n, u in self.type_names.items():
            if u == t:
                return n
        return None


def field_label(i: int) -> str:
    return f"_{i}"


def is_value(e: Expr) -> bool:
    """Syntactic values in the sense of the value restriction."""
    match e:
        case Var() | Const() | Lit() | Abs() | Select() | Con():
            return True
        case TAbs(_, _, b):
            return is_value(b)
        case RecordExpr(fs):
            return all(is_value(x) for _, x in fs)
        case Tuple(xs):
            return all(is_value(x) for x in xs)
        case Inject(_, _, p):
            return is_value(p)
        case TApp(Const("send" | "receive"), _):
            return True
        case TApp(TApp(Const("receive"), _), _):
            return True
        case App(TApp(Const("send"), _), v) | TApp(App(TApp(Const("send"), _), v), _):
            return is_value(v)
    return False


class Elaborator:
    def __init__(self, src: SourceProgram):
        self.src = src
        self.abbrevs: dict[str, TypeAbbrev] = {}
        self.datas: dict[str, DataDecl] = {}
        self.ctors: dict[str, tuple] = {}  # name -> (datatype, field types)
        for d in src.decls:
            if isinstance(d, (TypeAbbrev, DataDecl)):
                if d.name in self.abbrevs or d.name in self.datas:
                    raise ElabError(f"type {d.name} declared twice", d.span)
                (self.abbrevs if isinstance(d, TypeAbbrev) else self.datas)[d.name] = d
            if isinstance(d, DataDecl):
                for c, fs in d.constructors:
                    if c in self.ctors:
                        raise ElabError(f"constructor {c} declared twice", d.span)
                    self.ctors[c] = (d.name, fs)
        self.closed: dict[str, Type] = {}
        self.ctor_terms: dict[str, Expr] = {}

    # -- types
    def type(self, t: Type, span=None) -> Type:
        return self._type(t, {}, span)

    def _type(self, t: Type, active: dict, span) -> Type:
        match t:
            case TName(n):
                if n in active:
                    return TVar(active[n])
                if n in self.abbrevs or n in self.datas:
                    return self._close(n, active, span)
                raise ElabError(f"unknown type {n}", span)
            case Dualof(x):
                inner = self._type(x, active, span)
                if free_tvars(inner):
                    raise ElabError(f"dualof needs a closed session type, got {inner}", span)
                try:
                    return dual(inner)
                except DualityError as err:
                    raise ElabError(str(err), span) from None
            case Rec(v, k, b):
                body = self._type(b, active, span)
                if v not in free_tvars(body):
                    return body
                if k is None:
                    k = SL if _session_shaped(body) else TL
                return Rec(v, k, body)
        return map_children(t, lambda c: self._type(c, active, span))

    def _close(self, name: str, active: dict, span) -> Type:
        if not active and name in self.closed:
            return self.closed[name]
        v = fresh_name(name.lower())
        inner = dict(active)
        inner[name] = v
        if name in self.abbrevs:
            a = self.abbrevs[name]
            body = self._type(a.type, inner, a.span)
            kind = a.kind
            if kind is None:
                kind = SL if is_session_type({}, body) else TL
        else:
            body = self._variant(self.datas[name], inner)
            kind = TL
        out = body
        if v in free_tvars(body):
            out = Rec(v, kind, body)
            if name in self.datas and _kinds_at(Rec(v, TU, body), TU):
                out = Rec(v, TU, body)
        if not active:
            self.closed[name] = out
        return out

    def _variant(self, d: DataDecl, active: dict) -> Variant:
        fields = []
        for c, fs in d.constructors:
            ts = [self._type(f, active, d.span) for f in fs]
            fields.append((c, _payload_type(ts)))
        return Variant(tuple(fields))

    # -- expressions
    def expr(self, e: Expr, scope: frozenset) -> Expr:
        sp = e.span
        match e:
            case Var(n):
                if n in scope or n in self.globals:
                    return e
                raise ElabError(f"unbound variable {n}", sp)
            case Con(n):
                return self.constructor(n, sp)
            case Const() | Lit() | Select():
                return e
            case New(t):
                return New(self.type(t, sp), span=sp)
            case Abs(m, x, t, b):
                return Abs(m, x, self.type(t, sp), self.expr(b, scope | {x}), span=sp)
            case App(f, a):
                return App(self.expr(f, scope), self.expr(a, scope), span=sp)
            case TApp(x, t):
                return TApp(self.expr(x, scope), self.type(t, sp), span=sp)
            case If(c, a, b):
                return If(self.expr(c, scope), self.expr(a, scope), self.expr(b, scope), span=sp)
            case RevApp(a, f):
                return RevApp(self.expr(a, scope), self.expr(f, scope), span=sp)
            case Tuple(xs):
                items = [self.expr(x, scope) for x in xs]
                out = items[-1]
                for x in reversed(items[:-1]):
                    out = pair_expr(x, out, span=sp)
                return out
            case Let(pat, bound, body):
                b = self.expr(bound, scope)
                if pat == ():
                    return LetUnit(b, self.expr(body, scope), span=sp)
                if isinstance(pat, tuple):
                    x, y = pat
                    if x == y:
                        raise ElabError(f"variable {x} bound twice in pattern", sp)
                    return let_pair(x, y, b, self.expr(body, scope | {x, y}), span=sp)
                rec = RecordExpr(((LET_LABEL, b),), span=sp)
                return LetRecord(((LET_LABEL, pat),), rec, self.expr(body, scope | {pat}), span=sp)
            case MatchS(s, bs):
                branches = tuple((l, Abs(Mult.LIN, x, None, self.expr(b, scope | {x}), span=sp))
                                 for l, x, b in bs)
                return Match(self.expr(s, scope), branches, span=sp)
            case CaseS(s, bs):
                return Case(self.expr(s, scope), tuple(self.case_branch(c, xs, b, scope, sp)
                                                       for c, xs, b in bs), span=sp)
        raise ElabError(f"cannot elaborate {type(e).__name__}", sp)

    def case_branch(self, con: str, xs: tuple, body: Expr, scope, sp):
        if con not in self.ctors:
            raise ElabError(f"unknown constructor {con}", sp)
        arity = len(self.ctors[con][1])
        if len(xs) != arity:
            raise ElabError(f"constructor {con} has {arity} fields, pattern binds {len(xs)}", sp)
        if len(set(xs)) != len(xs):
            raise ElabError(f"repeated variable in pattern for {con}", sp)
        inner = self.expr(body, scope | set(xs))
        if arity == 0:
            return con, Abs(Mult.LIN, fresh_name("u"), None, inner, span=sp)
        if arity == 1:
            return con, Abs(Mult.LIN, xs[0], None, inner, span=sp)
        p = fresh_name("fields")
        binds = tuple((field_label(i + 1), x) for i, x in enumerate(xs))
        return con, Abs(Mult.LIN, p, None, LetRecord(binds, Var(p, span=sp), inner, span=sp), span=sp)

    def constructor(self, name: str, sp) -> Expr:
        if name not in self.ctors:
            raise ElabError(f"unknown constructor {name}", sp)
        if name in self.ctor_terms:
            return self.ctor_terms[name]
        dname, _ = self.ctors[name]
        vt = self._close(dname, {}, sp)
        unfolded = vt.body if isinstance(vt, Rec) else vt
        payload = unfolded.field_map[name]
        if isinstance(vt, Rec):
            payload = subst_type(payload, vt.var, vt)
        n = len(self.ctors[name][1])
        if n == 0:
            term = Inject(name, vt, UNIT_VALUE, span=sp)
        elif n == 1:
            x = fresh_name("x")
            term = Abs(Mult.UN, x, payload, Inject(name, vt, Var(x), span=sp), span=sp)
        else:
            ts = [t for _, t in payload.fields]
            xs = [fresh_name("x") for _ in ts]
            inner: Expr = Inject(name, vt, RecordExpr(tuple(
                (field_label(i + 1), Var(x)) for i, x in enumerate(xs))), span=sp)
            for i in reversed(range(n)):
                captured = ts[:i]
                m = Mult.LIN if any(_linear(t) for t in captured) else Mult.UN
                inner = Abs(m, xs[i], ts[i], inner, span=sp)
            term = inner
        self.ctor_terms[name] = term
        return term

    # -- declarations
    def run(self) -> Elaboration:
        sigs: dict[str, Signature] = {}
        binds: dict[str, Binding] = {}
        for d in self.src.decls:
            if isinstance(d, Signature):
                if d.name in sigs:
                    raise ElabError(f"signature for {d.name} given twice", d.span)
                sigs[d.name] = d
            elif isinstance(d, Binding):
                if d.name in binds:
                    raise ElabError(f"{d.name} defined twice", d.span)
                binds[d.name] = d
        for n, b in binds.items():
            if n not in sigs:
                raise ElabError(f"{n} has no type signature", b.span)
        for n, s in sigs.items():
            if n not in binds:
                raise ElabError(f"{n} has a signature but no definition", s.span)
        self.globals = set(binds)
        prog = CoreProgram()
        for name in self.abbrevs.keys() | self.datas.keys():
            prog.types[name] = self._close(name, {}, None)
        for n, b in binds.items():
            sig = self.type(sigs[n].type, sigs[n].span)
            body = self.expr(b.body, frozenset(b.params))
            prog.decls[n] = Declaration(n, sig, self.wrap(sig, list(b.params), body, b.span), b.span)
        names = dict(prog.types)
        out = fresh_rename(prog)
        ctors = {c: (d, len(fs)) for c, (d, fs) in self.ctors.items()}
        return Elaboration(out, names, ctors)

    def wrap(self, sig: Type, params: list, body: Expr, span) -> Expr:
        """Turn ``f x y = e`` into nested type and term abstractions following ``sig``."""
        if len(set(params)) != len(params):
            raise ElabError("repeated parameter name", span)
        frames = []
        t = sig
        while True:
            if isinstance(t, Forall):
                frames.append(("tabs", t.var, t.kind))
                t = t.body
            elif params and isinstance(t, Arrow):
                frames.append(("abs", t.mult, params.pop(0), t.dom))
                t = t.cod
            elif params:
                raise ElabError(f"more parameters than the signature {sig} allows", span)
            else:
                break
        out = body
        for i in reversed(range(len(frames))):
            f = frames[i]
            if f[0] == "tabs":
                if not is_value(out):
                    raise ElabError("type abstraction over a non-value (value restriction)", span)
                out = TAbs(f[1], f[2], out, span=span)
            else:
                out = Abs(f[1], f[2], f[3], out, span=span)
        return out


def _payload_type(ts: list[Type]) -> Type:
    if not ts:
        return UNIT
    if len(ts) == 1:
        return ts[0]
    return Record(tuple((field_label(i + 1), t) for i, t in enumerate(ts)))


def _session_shaped(t: Type) -> bool:
    """Is ``t`` built by a session constructor at the top, looking through nested recs?"""
    while isinstance(t, Rec):
        t = t.body
    return isinstance(t, (Skip, Message, Choice, Seq))


def _kinds_at(t: Type, k) -> bool:
    try:
        kind_check({}, t, k)
        return True
    except KindError:
        return False


def _linear(t: Type) -> bool:
    k = kind_of({}, t)
    return k is None or k.mult is Mult.LIN


def elaborate(src: SourceProgram) -> Elaboration:
    return Elaborator(src).run()


def load(text: str) -> Elaboration:
    return elaborate(parse(text))


def load_type(text: str, context: Optional[SourceProgram] = None) -> Type:
    """Parse and elaborate a type, resolving names against ``context`` if given."""
    return rename_binders(Elaborator(context or SourceProgram([])).type(parse_type(text)))
