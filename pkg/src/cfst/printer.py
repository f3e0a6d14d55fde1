"""Rendering of types and core expressions in surface syntax."""

from __future__ import annotations

from .syntax import (
    Abs, App, Arrow, Base, Case, CaseS, Choice, Con, Const, Dualof, Expr, Forall, If, Inject, LetRecord,
    Let, LetUnit, Lit, Match, MatchS, Message, Mult, New, Rec, Record, RecordExpr, RevApp,
    Select, Seq, Skip, TAbs, TApp, TName, TVar, Tuple, Type, Unit, Var, Variant, base_name,
    free_tvars, map_children, subst_type,
)

INFIX_OPS = {"+": 6, "-": 6, "*": 7, "/": 7, "%": 7, "==": 4, "/=": 4, "<": 4, ">": 4, "<=": 4, ">=": 4,
             "&&": 3, "||": 2}


def _is_pair(fields) -> bool:
    return [l for l, _ in fields] == ["fst", "snd"]


def show_type(t: Type, level: int = 0) -> str:
    """Print ``t``; ``level`` 0 admits arrows and binders, 1 sequences, 2 prefixes only."""
    match t:
        case Skip():
            return "Skip"
        case Base(n):
            return n
        case Unit(m):
            return "()" if m is Mult.UN else "LinUnit"
        case TVar(n) | TName(n):
            return n
        case Dualof(x):
            return "dualof " + show_type(x, 2)
        case Message(pol, p):
            s = pol + show_type(p, 2)
            return s
        case Choice(view, bs):
            inner = ", ".join(f"{l}: {show_type(b)}" for l, b in bs)
            return f"{view}{{{inner}}}"
        case Record(fs):
            if _is_pair(fs):
                return f"({show_type(fs[0][1])}, {show_type(fs[1][1])})"
            return "{" + ", ".join(f"{l}: {show_type(b)}" for l, b in fs) + "}"
        case Variant(fs):
            return "[" + ", ".join(f"{l}: {show_type(b)}" for l, b in fs) + "]"
        case Seq(l, r):
            s = f"{show_type(l, 2)};{show_type(r, 1)}"
            return s if level <= 1 else f"({s})"
        case Arrow(m, d, c):
            op = "->" if m is Mult.UN else "-o"
            s = f"{show_type(d, 1)} {op} {show_type(c, 0)}"
            return s if level == 0 else f"({s})"
        case Forall(v, k, b) | Rec(v, k, b):
            word = "forall" if isinstance(t, Forall) else "rec"
            s = f"{word} {v}:{k} . " if k is not None else f"{word} {v} . "
            s += show_type(b, 0)
            return s if level == 0 else f"({s})"
    raise TypeError(f"not a type: {t!r}")


def tidy(t: Type) -> Type:
    """Rename bound variables back to their source spelling where that is unambiguous."""

    def go(t: Type, taken: frozenset) -> Type:
        match t:
            case Forall(v, k, b) | Rec(v, k, b):
                want = base_name(v)
                cand, i = want, 1
                avoid = taken | free_tvars(b) - {v}
                while cand in avoid:
                    i += 1
                    cand = f"{want}{i}"
                body = subst_type(b, v, TVar(cand)) if cand != v else b
                return type(t)(cand, k, go(body, taken | {cand}))
        return map_children(t, lambda c: go(c, taken))

    return go(t, frozenset(free_tvars(t)))


CHAR_ESCAPES = {"\\": "\\\\", "'": "\\'", "\n": "\\n", "\t": "\\t"}


def show_lit(v) -> str:
    if isinstance(v, bool):
        return "True" if v else "False"
    if isinstance(v, int):
        return str(v)
    return "'" + CHAR_ESCAPES.get(v, v) + "'"


def _binop(e: Expr):
    if isinstance(e, App) and isinstance(e.fun, App) and isinstance(e.fun.fun, Const):
        if e.fun.fun.name in INFIX_OPS:
            return e.fun.fun.name, e.fun.arg, e.arg
    return None


def show_expr(e: Expr, level: int = 0) -> str:
    """Levels: 0 open forms (let, lambda, if), 1 ``&``, 2 operators, 9 application, 10 atoms."""
    b = _binop(e)
    if b is not None:
        op, l, r = b
        p = INFIX_OPS[op]
        s = f"{show_expr(l, p)} {op} {show_expr(r, p + 1)}"
        return s if level <= p else f"({s})"
    match e:
        case Var(n) | Const(n):
            if n == "unit":
                return "()"
            if n in INFIX_OPS:
                return f"({n})"
            return n
        case Lit(v):
            s = show_lit(v)
            return f"({s})" if s.startswith("-") and level >= 9 else s
        case Abs(m, x, t, body):
            arrow = "->" if m is Mult.UN else "-o"
            ann = "" if t is None else f":{show_type(t, 1)}"
            s = f"\\{x}{ann} {arrow} {show_expr(body)}"
            return s if level == 0 else f"({s})"
        case TAbs(a, k, body):
            s = f"/\\{a}:{k} . {show_expr(body)}"
            return s if level == 0 else f"({s})"
        case App(f, a):
            s = f"{show_expr(f, 9)} {show_expr(a, 10)}"
            return s if level <= 9 else f"({s})"
        case TApp(x, t):
            s = f"{show_expr(x, 9)} [{show_type(t)}]"
            return s if level <= 9 else f"({s})"
        case RecordExpr(fs):
            if _is_pair(fs):
                return f"({show_expr(fs[0][1])}, {show_expr(fs[1][1])})"
            return "{" + ", ".join(f"{l} = {show_expr(x)}" for l, x in fs) + "}"
        case LetRecord(binds, bound, body):
            if _is_pair(binds):
                pat = f"({binds[0][1]}, {binds[1][1]})"
            else:
                pat = "{" + ", ".join(f"{l} = {x}" for l, x in binds) + "}"
            s = f"let {pat} = {show_expr(bound)} in {show_expr(body)}"
            return s if level == 0 else f"({s})"
        case LetUnit(bound, body):
            s = f"let () = {show_expr(bound)} in {show_expr(body)}"
            return s if level == 0 else f"({s})"
        case Inject(l, _, p):
            s = f"{l} {show_expr(p, 10)}"
            return s if level <= 9 else f"({s})"
        case Case(s_, bs) | Match(s_, bs):
            head = "case" if isinstance(e, Case) else "match"
            kw = "of" if isinstance(e, Case) else "with"
            inner = ", ".join(f"{l} -> {show_expr(x)}" for l, x in bs)
            s = f"{head} {show_expr(s_)} {kw} {{{inner}}}"
            return s if level == 0 else f"({s})"
        case New(t):
            s = f"new {show_type(t, 2)}"
            return s if level <= 9 else f"({s})"
        case Select(l, _):
            s = f"select {l}"
            return s if level <= 9 else f"({s})"
        case If(c, t, o):
            s = f"if {show_expr(c)} then {show_expr(t)} else {show_expr(o)}"
            return s if level == 0 else f"({s})"
        case RevApp(a, f):
            s = f"{show_expr(a, 1)} & {show_expr(f, 2)}"
            return s if level <= 1 else f"({s})"
        case Con(n):
            return n
        case Tuple(xs):
            return "(" + ", ".join(show_expr(x) for x in xs) + ")"
        case Let(pat, bound, body):
            s = f"let {show_pattern(pat)} = {show_expr(bound)} in {show_expr(body)}"
            return s if level == 0 else f"({s})"
        case MatchS(s_, bs):
            inner = ", ".join(f"{l} {x} -> {show_expr(b)}" for l, x, b in bs)
            s = f"match {show_expr(s_)} with {{{inner}}}"
            return s if level == 0 else f"({s})"
        case CaseS(s_, bs):
            inner = ", ".join(" ".join([l, *xs]) + f" -> {show_expr(b)}" for l, xs, b in bs)
            s = f"case {show_expr(s_)} of {{{inner}}}"
            return s if level == 0 else f"({s})"
    raise TypeError(f"not an expression: {e!r}")


def show_pattern(pat) -> str:
    if isinstance(pat, str):
        return pat
    return "(" + ", ".join(pat) + ")"


def summarise(e: Expr, width: int = 60) -> str:
    s = show_expr(e)
    return s if len(s) <= width else s[: width - 3] + "..."
