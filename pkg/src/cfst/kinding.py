"""Kinding: terminated types, contractivity, subkinding and kind synthesis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .syntax import (
    ALL_KINDS, Arrow, Base, Basic, Choice, Forall, Kind, Message, ML, Mult, Rec,
    Record, SL, SU, Seq, Skip, TL, TU, TVar, Type, Unit, Variant,
)

KindCtx = Mapping[str, Kind]


@dataclass(frozen=True)
class KindIssue:
    rule: str
    message: str
    subterm: Type

    def __str__(self) -> str:
        return f"[{self.rule}] {self.message}: {self.subterm}"


class KindError(Exception):
    def __init__(self, issues: list[KindIssue]):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


def is_terminated(t: Type) -> bool:
    match t:
        case Skip():
            return True
        case Seq(l, r):
            return is_terminated(l) and is_terminated(r)
        case Rec(_, _, b):
            return is_terminated(b)
    return False


def is_contractive(poly: frozenset | set, a: str, t: Type) -> bool:
    """Does every occurrence of ``a`` in ``t`` sit behind a communication or functional constructor?"""
    match t:
        case TVar(b):
            return b not in poly and b != a
        case Seq(l, r):
            return is_contractive(poly, a, r) if is_terminated(l) else is_contractive(poly, a, l)
        case Rec(b, _, body) | Forall(b, _, body):
            return True if b == a else is_contractive(poly, a, body)
    return True


def subkind(k1: Kind, k2: Kind) -> bool:
    if not k1.mult <= k2.mult:
        return False
    return k1.basic == k2.basic or k2.basic is Basic.TOP


def kind_join(kinds) -> Mult:
    m = Mult.UN
    for k in kinds:
        m = m.join(k.mult)
    return m


def minimal_kinds(k: Kind) -> list[Kind]:
    """All kinds above ``k``."""
    return [j for j in ALL_KINDS if subkind(k, j)]


class _Kinder:
    def __init__(self):
        self.issues: list[KindIssue] = []

    def fail(self, rule: str, message: str, t: Type, fallback: Kind = TL) -> Kind:
        self.issues.append(KindIssue(rule, message, t))
        return fallback

    def synth(self, delta: dict, poly: frozenset, t: Type) -> Kind:
        match t:
            case Skip():
                return SU
            case Message(_, p):
                self.check(delta, poly, p, ML, "AK-Msg")
                return SL
            case Choice(_, bs):
                for _, b in bs:
                    self.check(delta, poly, b, SL, "AK-Choice")
                return SL
            case Seq(l, r):
                kl = self.check(delta, poly, l, SL, "AK-Seq")
                kr = self.check(delta, poly, r, SL, "AK-Seq")
                return Kind(Basic.SESSION, kl.mult.join(kr.mult))
            case Unit(m):
                return Kind(Basic.MESSAGE, m)
            case Base():
                return Kind(Basic.MESSAGE, Mult.UN)
            case Arrow(m, d, c):
                self.synth(delta, poly, d)
                self.synth(delta, poly, c)
                return Kind(Basic.TOP, m)
            case Record(fs) | Variant(fs):
                ks = [self.synth(delta, poly, b) for _, b in fs]
                return Kind(Basic.TOP, kind_join(ks))
            case Forall(v, k, b):
                inner = dict(delta)
                inner[v] = k
                kb = self.synth(inner, poly | {v}, b)
                return Kind(Basic.TOP, kb.mult)
            case Rec(v, k, b):
                if not is_contractive(poly, v, b):
                    self.fail("AK-Rec", f"type variable {v} is not contractive", t)
                inner = dict(delta)
                inner[v] = k
                self.check(inner, poly, b, k, "AK-Rec")
                return k
            case TVar(n):
                if n not in delta:
                    return self.fail("AK-Var", f"unbound type variable {n}", t)
                return delta[n]
        raise TypeError(f"not a type: {t!r}")

    def check(self, delta, poly, t: Type, k: Kind, rule: str = "AK-Against") -> Kind:
        before = len(self.issues)
        got = self.synth(delta, poly, t)
        if len(self.issues) == before and not subkind(got, k):
            self.fail(rule, f"expected kind {k}, found {got}", t)
            return k
        return got if subkind(got, k) else k


def kind_synth(delta: KindCtx, t: Type) -> Kind:
    """The least kind of ``t`` under ``delta``; raises :class:`KindError` listing every problem."""
    kinder = _Kinder()
    k = kinder.synth(dict(delta), frozenset(delta), t)
    if kinder.issues:
        raise KindError(kinder.issues)
    return k


def kind_check(delta: KindCtx, t: Type, k: Kind) -> None:
    kinder = _Kinder()
    kinder.check(dict(delta), frozenset(delta), t, k)
    if kinder.issues:
        raise KindError(kinder.issues)


def kind_of(delta: KindCtx, t: Type) -> Kind | None:
    """Like :func:`kind_synth` but returns None for ill-formed types."""
    try:
        return kind_synth(delta, t)
    except KindError:
        return None


def is_session(delta: KindCtx, t: Type) -> bool:
    k = kind_of(delta, t)
    return k is not None and k.basic is Basic.SESSION


def is_unrestricted(delta: KindCtx, t: Type) -> bool:
    k = kind_of(delta, t)
    return k is not None and subkind(k, TU)
