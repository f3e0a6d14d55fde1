"""Lexer and recursive-descent parser for ``.fst`` source files.

Top-level declarations begin in the first column; anything indented continues
the declaration above it. That is the only use of layout.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .printer import INFIX_OPS, show_expr, show_type
from .syntax import (
    Abs, App, Arrow, Base, CaseS, Choice, Con, Const, Dualof, Expr, Forall, If, Kind, Let, Lit,
    MatchS, Message, Mult, New, Rec, Record, RevApp, Select, Seq, Skip, TApp, TL, TName, TVar,
    Tuple, Type, Unit, Var, Variant, UNIT_VALUE, BASE_TYPES,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int, expected=()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = sorted(set(expected))
        text = f"{line}:{col}: {message}"
        if self.expected:
            text += " (expected " + ", ".join(self.expected) + ")"
        super().__init__(text)


# ---------------------------------------------------------------- lexer

KEYWORDS = {
    "type", "data", "let", "in", "match", "with", "case", "of", "select", "new",
    "forall", "rec", "dualof", "if", "then", "else",
}
BUILTINS = {"send", "receive", "fork", "not"}
SYMBOLS = sorted(
    ["->", "-o", "==", "/=", "<=", ">=", "&&", "||", "+", "-", "*", "/", "%", "<", ">", "=",
     ";", ":", ",", ".", "(", ")", "{", "}", "[", "]", "\\", "!", "?", "&", "|"],
    key=len, reverse=True,
)
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_CHAR = re.compile(r"'(\\.|[^\\'])'")
_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", "'": "'"}


@dataclass(frozen=True)
class Token:
    kind: str  # lower, upper, int, char, kw, sym, eof
    text: str
    line: int
    col: int

    @property
    def span(self):
        return (self.line, self.col)

    def describe(self) -> str:
        return "end of input" if self.kind == "eof" else repr(self.text)


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(k: int):
        nonlocal i, line, col
        for ch in text[i:i + k]:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1
        i += k

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        if text.startswith("--", i):
            j = text.find("\n", i)
            advance((n if j < 0 else j) - i)
            continue
        if text.startswith("{-", i):
            j = text.find("-}", i + 2)
            if j < 0:
                raise ParseError("unterminated block comment", line, col)
            advance(j + 2 - i)
            continue
        start = (line, col)
        m = _IDENT.match(text, i)
        if m:
            word = m.group()
            if word in KEYWORDS:
                kind = "kw"
            elif word[0].isupper():
                kind = "upper"
            else:
                kind = "lower"
            out.append(Token(kind, word, *start))
            advance(len(word))
            continue
        if ch.isdigit():
            m = re.compile(r"\d+").match(text, i)
            out.append(Token("int", m.group(), *start))
            advance(len(m.group()))
            continue
        if ch == "'":
            m = _CHAR.match(text, i)
            if not m:
                raise ParseError("bad character literal", *start)
            body = m.group(1)
            if body.startswith("\\"):
                if body[1] not in _ESCAPES:
                    raise ParseError(f"unknown escape {body!r}", *start)
                body = _ESCAPES[body[1]]
            out.append(Token("char", body, *start))
            advance(len(m.group()))
            continue
        for sym in SYMBOLS:
            if text.startswith(sym, i):
                if sym == "-o" and i + 2 < n and (text[i + 2].isalnum() or text[i + 2] in "_'"):
                    continue
                out.append(Token("sym", sym, *start))
                advance(len(sym))
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", *start)
    out.append(Token("eof", "", line, col))
    return out


# ---------------------------------------------------------------- surface program


@dataclass
class TypeAbbrev:
    name: str
    kind: Optional[Kind]
    type: Type
    span: tuple = field(default=None, compare=False)


@dataclass
class DataDecl:
    name: str
    constructors: list  # [(name, [Type, ...]), ...]
    span: tuple = field(default=None, compare=False)


@dataclass
class Signature:
    name: str
    type: Type
    span: tuple = field(default=None, compare=False)


@dataclass
class Binding:
    name: str
    params: list
    body: Expr
    span: tuple = field(default=None, compare=False)


@dataclass
class SourceProgram:
    """Declarations in source order, before any name resolution."""

    decls: list = field(default_factory=list)

    def _of(self, cls):
        return [d for d in self.decls if isinstance(d, cls)]

    @property
    def abbrevs(self) -> list[TypeAbbrev]:
        return self._of(TypeAbbrev)

    @property
    def datatypes(self) -> list[DataDecl]:
        return self._of(DataDecl)

    @property
    def signatures(self) -> list[Signature]:
        return self._of(Signature)

    @property
    def bindings(self) -> list[Binding]:
        return self._of(Binding)


# ---------------------------------------------------------------- parser

_CMP = ("==", "/=", "<", ">", "<=", ">=")
_LEVELS = [("||",), ("&&",), _CMP, ("+", "-"), ("*", "/", "%")]


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0
        self.fenced = False  # inside a declaration: column-1 tokens end it

    # -- token access
    def peek(self, k: int = 0) -> Token:
        t = self.toks[min(self.pos + k, len(self.toks) - 1)]
        if self.fenced and t.col == 1 and t.kind != "eof":
            # hide the start of the next declaration
            return Token("eof", "", t.line, t.col)
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def at_sym(self, *syms: str) -> bool:
        t = self.peek()
        return t.kind == "sym" and t.text in syms

    def at_kw(self, *kws: str) -> bool:
        t = self.peek()
        return t.kind == "kw" and t.text in kws

    def next(self) -> Token:
        t = self.peek()
        if t.kind != "eof":
            self.pos += 1
        return t

    def fail(self, expected, what: str | None = None):
        t = self.peek()
        raise ParseError(what or f"unexpected {t.describe()}", t.line, t.col, expected)

    def expect_sym(self, sym: str) -> Token:
        if not self.at_sym(sym):
            self.fail([repr(sym)])
        return self.next()

    def expect_kw(self, kw: str) -> Token:
        if not self.at_kw(kw):
            self.fail([repr(kw)])
        return self.next()

    def expect(self, kind: str, what: str) -> Token:
        if not self.at(kind):
            self.fail([what])
        return self.next()

    def label(self) -> str:
        if self.at("upper") or self.at("lower"):
            return self.next().text
        self.fail(["label"])

    def end(self):
        if not self.at("eof"):
            self.fail(["end of input"])

    # -- kinds and types
    def kind(self) -> Kind:
        t = self.expect("upper", "kind")
        try:
            return Kind.parse(t.text)
        except ValueError:
            raise ParseError(f"unknown kind {t.text!r}", t.line, t.col,
                             ["MU", "ML", "SU", "SL", "TU", "TL"]) from None

    def type(self) -> Type:
        if self.at_kw("forall"):
            self.next()
            groups = []
            while not self.at_sym("."):
                names = [self.expect("lower", "type variable").text]
                while self.at("lower"):
                    names.append(self.next().text)
                k = TL
                if self.at_sym(":"):
                    self.next()
                    k = self.kind()
                groups += [(n, k) for n in names]
            if not groups:
                self.fail(["type variable"])
            self.expect_sym(".")
            body = self.type()
            for n, k in reversed(groups):
                body = Forall(n, k, body)
            return body
        if self.at_kw("rec"):
            self.next()
            v = self.expect("lower", "type variable").text
            k = None  # settled during elaboration
            if self.at_sym(":"):
                self.next()
                k = self.kind()
            self.expect_sym(".")
            return Rec(v, k, self.type())
        left = self.seq_type()
        if self.at_sym("->", "-o"):
            m = Mult.UN if self.next().text == "->" else Mult.LIN
            return Arrow(m, left, self.type())
        return left

    def seq_type(self) -> Type:
        left = self.prefix_type()
        if self.at_sym(";"):
            self.next()
            return Seq(left, self.seq_type())
        return left

    def prefix_type(self) -> Type:
        if self.at_kw("rec", "forall"):
            return self.type()  # a binder extends as far right as possible
        if self.at_sym("!", "?"):
            pol = self.next().text
            return Message(pol, self.prefix_type())
        if self.at_kw("dualof"):
            self.next()
            return Dualof(self.prefix_type())
        return self.atom_type()

    def atom_type(self) -> Type:
        t = self.peek()
        if t.kind == "upper":
            self.next()
            if t.text == "Skip":
                return Skip()
            if t.text in BASE_TYPES:
                return Base(t.text)
            if t.text == "LinUnit":
                return Unit(Mult.LIN)
            return TName(t.text)
        if t.kind == "lower":
            self.next()
            return TVar(t.text)
        if self.at_sym("+", "&"):
            view = self.next().text
            self.expect_sym("{")
            return Choice(view, self.type_fields("}"))
        if self.at_sym("{"):
            self.next()
            return self.checked(Record, self.type_fields("}"), t)
        if self.at_sym("["):
            self.next()
            return self.checked(Variant, self.type_fields("]"), t)
        if self.at_sym("("):
            self.next()
            if self.at_sym(")"):
                self.next()
                return Unit(Mult.UN)
            items = [self.type()]
            while self.at_sym(","):
                self.next()
                items.append(self.type())
            self.expect_sym(")")
            out = items[-1]
            for x in reversed(items[:-1]):
                out = Record((("fst", x), ("snd", out)))
            return out
        self.fail(["type"])

    def checked(self, cls, fields, tok):
        try:
            return cls(fields)
        except ValueError as err:
            raise ParseError(str(err), tok.line, tok.col) from None

    def type_fields(self, close: str) -> tuple:
        start = self.peek()
        out = []
        while True:
            lab = self.label()
            self.expect_sym(":")
            out.append((lab, self.type()))
            if self.at_sym(","):
                self.next()
                continue
            break
        self.expect_sym(close)
        labels = [l for l, _ in out]
        if len(set(labels)) != len(labels):
            raise ParseError(f"duplicate label in {labels}", start.line, start.col)
        return tuple(out)

    def type_args(self) -> list[Type]:
        self.expect_sym("[")
        out = [self.type()]
        while self.at_sym(","):
            self.next()
            out.append(self.type())
        self.expect_sym("]")
        return out

    # -- expressions
    def expr(self) -> Expr:
        t = self.peek()
        if self.at_kw("let"):
            self.next()
            pat = self.pattern()
            self.expect_sym("=")
            bound = self.expr()
            self.expect_kw("in")
            return Let(pat, bound, self.expr(), span=t.span)
        if self.at_kw("if"):
            self.next()
            c = self.expr()
            self.expect_kw("then")
            a = self.expr()
            self.expect_kw("else")
            return If(c, a, self.expr(), span=t.span)
        if self.at_kw("match"):
            self.next()
            s = self.expr()
            self.expect_kw("with")
            branches = self.branches(lambda: self.expect("lower", "variable").text)
            return MatchS(s, branches, span=t.span)
        if self.at_kw("case"):
            self.next()
            s = self.expr()
            self.expect_kw("of")
            branches = self.branches(self.binders)
            return CaseS(s, branches, span=t.span)
        if self.at_sym("\\"):
            self.next()
            x = self.expect("lower", "variable").text
            self.expect_sym(":")
            annot = self.seq_type()
            if not self.at_sym("->", "-o"):
                self.fail(["'->'", "'-o'"])
            m = Mult.UN if self.next().text == "->" else Mult.LIN
            return Abs(m, x, annot, self.expr(), span=t.span)
        return self.revapp()

    def binders(self) -> tuple:
        out = []
        while self.at("lower"):
            out.append(self.next().text)
        return tuple(out)

    def branches(self, after_label) -> tuple:
        self.expect_sym("{")
        out, seen = [], set()
        while True:
            tok = self.expect("upper", "label")
            if tok.text in seen:
                raise ParseError(f"duplicate branch {tok.text}", tok.line, tok.col)
            seen.add(tok.text)
            bound = after_label()
            self.expect_sym("->")
            out.append((tok.text, bound, self.expr()))
            if self.at_sym(","):
                self.next()
                continue
            break
        self.expect_sym("}")
        return tuple(out)

    def pattern(self):
        if self.at_sym("("):
            self.next()
            if self.at_sym(")"):
                self.next()
                return ()
            x = self.expect("lower", "variable").text
            self.expect_sym(",")
            y = self.expect("lower", "variable").text
            self.expect_sym(")")
            return (x, y)
        return self.expect("lower", "variable or pattern").text

    def revapp(self) -> Expr:
        e = self.binary(0)
        while self.at_sym("&"):
            tok = self.next()
            e = RevApp(e, self.binary(0), span=tok.span)
        return e

    def binary(self, level: int) -> Expr:
        if level == len(_LEVELS):
            return self.unary()
        e = self.binary(level + 1)
        while self.at_sym(*_LEVELS[level]):
            tok = self.next()
            r = self.binary(level + 1)
            e = App(App(Const(tok.text, span=tok.span), e, span=tok.span), r, span=tok.span)
        return e

    def unary(self) -> Expr:
        if self.at_sym("-") and self.peek(1).kind == "int":
            tok = self.next()
            num = self.next()
            return Lit(-int(num.text), span=tok.span)
        return self.application()

    def application(self) -> Expr:
        start = self.peek().span
        e = self.atom()
        while True:
            if self.at_sym("["):
                for t in self.type_args():
                    e = TApp(e, t, span=start)
            elif self.starts_atom():
                e = App(e, self.atom(), span=start)
            else:
                return e

    def starts_atom(self) -> bool:
        t = self.peek()
        return (t.kind in ("lower", "upper", "int", "char")
                or self.at_sym("(") or self.at_kw("select", "new"))

    def atom(self) -> Expr:
        t = self.peek()
        if t.kind == "lower":
            self.next()
            if t.text in BUILTINS:
                return Const(t.text, span=t.span)
            return Var(t.text, span=t.span)
        if t.kind == "upper":
            self.next()
            if t.text in ("True", "False"):
                return Lit(t.text == "True", span=t.span)
            return Con(t.text, span=t.span)
        if t.kind == "int":
            self.next()
            return Lit(int(t.text), span=t.span)
        if t.kind == "char":
            self.next()
            return Lit(t.text, span=t.span)
        if self.at_kw("select"):
            self.next()
            return Select(self.expect("upper", "label").text, span=t.span)
        if self.at_kw("new"):
            self.next()
            return New(self.prefix_type(), span=t.span)
        if self.at_sym("("):
            self.next()
            if self.at_sym(")"):
                self.next()
                return Const(UNIT_VALUE.name, span=t.span)
            if self.peek().kind == "sym" and self.peek().text in INFIX_OPS and \
                    self.peek(1).kind == "sym" and self.peek(1).text == ")":
                op = self.next()
                self.next()
                return Const(op.text, span=t.span)
            items = [self.expr()]
            while self.at_sym(","):
                self.next()
                items.append(self.expr())
            self.expect_sym(")")
            if len(items) == 1:
                return items[0]
            return Tuple(tuple(items), span=t.span)
        self.fail(["expression"])

    # -- declarations
    def program(self) -> SourceProgram:
        prog = SourceProgram()
        while not self.at("eof"):
            t = self.peek()
            if t.col != 1:
                raise ParseError("declarations must start in the first column", t.line, t.col)
            self.next()
            self.fenced = True
            try:
                prog.decls.append(self.declaration(t))
            finally:
                self.fenced = False
            if not self.toks[self.pos].kind == "eof" and self.toks[self.pos].col != 1:
                self.fenced = True
                self.fail(["new declaration"])
        return prog

    def declaration(self, first: Token):
        if first.kind == "kw" and first.text == "type":
            name = self.expect("upper", "type name").text
            k = None
            if self.at_sym(":"):
                self.next()
                k = self.kind()
            self.expect_sym("=")
            return TypeAbbrev(name, k, self.type(), first.span)
        if first.kind == "kw" and first.text == "data":
            name = self.expect("upper", "type name").text
            self.expect_sym("=")
            cons = [self.constructor()]
            while self.at_sym("|"):
                self.next()
                cons.append(self.constructor())
            names = [c for c, _ in cons]
            if len(set(names)) != len(names):
                raise ParseError(f"duplicate constructor in {name}", first.line, first.col)
            return DataDecl(name, cons, first.span)
        if first.kind == "lower" and first.text not in BUILTINS:
            if self.at_sym(":"):
                self.next()
                return Signature(first.text, self.type(), first.span)
            params = []
            while self.at("lower"):
                params.append(self.next().text)
            self.expect_sym("=")
            return Binding(first.text, params, self.expr(), first.span)
        raise ParseError(f"unexpected {first.describe()} at start of declaration",
                         first.line, first.col, ["'type'", "'data'", "name"])

    def constructor(self):
        name = self.expect("upper", "constructor").text
        fields = []
        while self.at("upper") or self.at("lower") or self.at_sym("(", "{", "[", "+", "&"):
            fields.append(self.atom_type())
        return name, fields


def parse(text: str) -> SourceProgram:
    return Parser(text).program()


def parse_type(text: str) -> Type:
    p = Parser(text)
    t = p.type()
    p.end()
    return t


def parse_expr(text: str) -> Expr:
    p = Parser(text)
    e = p.expr()
    p.end()
    return e


# ---------------------------------------------------------------- printing


def show_decl(d) -> str:
    match d:
        case TypeAbbrev(name, k, t):
            ann = "" if k is None else f":{k}"
            return f"type {name}{ann} = {show_type(t)}"
        case DataDecl(name, cons):
            parts = [" ".join([c] + [show_type(f, 2) if _atomic(f) else f"({show_type(f)})"
                                     for f in fs]) for c, fs in cons]
            return f"data {name} = " + " | ".join(parts)
        case Signature(name, t):
            return f"{name} : {show_type(t)}"
        case Binding(name, params, body):
            return " ".join([name, *params, "="]) + "\n  " + show_expr(body)
    raise TypeError(f"not a declaration: {d!r}")


def _atomic(t: Type) -> bool:
    return not isinstance(t, (Message, Dualof, Seq, Arrow, Forall, Rec))


def show_source(prog: SourceProgram) -> str:
    """Print a program so that parsing the result gives back the same declarations."""
    return "\n\n".join(show_decl(d) for d in prog.decls) + "\n"
