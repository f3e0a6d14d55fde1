"""Type equivalence: bisimilarity for sessions, congruence plus coinduction elsewhere."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .bpa import BisimResult, Verdict, check_recursion, drop_vacuous_rec, session_bisim
from .lts import Label
from .syntax import (
    Arrow, Base, Basic, Choice, Forall, Kind, Message, Rec, Record, Seq, Skip, TVar,
    Type, Unit, Variant, fresh_name, subst_type,
)

DEFAULT_BUDGET = 10_000


class EquivalenceUndecided(Exception):
    """The bisimulation search ran out of budget."""

    def __init__(self, t: Type, u: Type, budget: int):
        self.types = (t, u)
        super().__init__(f"equivalence undecided within budget {budget}: {t} vs {u}")


def is_session_type(delta: Mapping[str, Kind], t: Type) -> bool:
    """Does ``t`` have a session kind? Reads the head only; assumes ``t`` is well formed."""
    match t:
        case Skip() | Message() | Choice() | Seq():
            return True
        case Rec(_, k, _):
            return k.basic is Basic.SESSION
        case TVar(n):
            k = delta.get(n)
            return k is not None and k.basic is Basic.SESSION
    return False


@dataclass
class Equivalence:
    """One equivalence query context: kinding context, budget and memo tables."""

    delta: dict = field(default_factory=dict)
    budget: int = DEFAULT_BUDGET
    memo: dict = field(default_factory=dict)
    last_trace: Optional[list[Label]] = None

    def equiv(self, t: Type, u: Type) -> bool:
        return self._eq(dict(self.delta), t, u, frozenset())

    def sessions(self, t: Type, u: Type) -> BisimResult:
        key = (t, u)
        hit = self.memo.get(key)
        if hit is None:
            t2, u2 = drop_vacuous_rec(t), drop_vacuous_rec(u)
            for x in (t2, u2):
                check_recursion(x)
            hit = session_bisim(t2, u2, self.budget)
            self.memo[key] = hit
        return hit

    def _eq(self, delta: dict, t: Type, u: Type, theta: frozenset) -> bool:
        if t == u:
            return True
        st, su = is_session_type(delta, t), is_session_type(delta, u)
        if st and su:
            r = self.sessions(t, u)
            if r.verdict is Verdict.UNKNOWN:
                raise EquivalenceUndecided(t, u, self.budget)
            if r.verdict is Verdict.NOT_EQUIVALENT:
                self.last_trace = r.trace
                return False
            return True
        # a recursive type kinded above the session kinds unfolds, even next to a session type
        rt, ru = isinstance(t, Rec) and not st, isinstance(u, Rec) and not su
        if rt or ru:
            if (t, u) in theta:
                return True
            theta = theta | {(t, u)}
            if rt:
                return self._eq(delta, subst_type(t.body, t.var, t), u, theta)
            return self._eq(delta, t, subst_type(u.body, u.var, u), theta)
        if st or su:
            return False
        match t, u:
            case Unit(m1), Unit(m2):
                return m1 == m2
            case Base(a), Base(b):
                return a == b
            case Arrow(m1, d1, c1), Arrow(m2, d2, c2):
                return m1 == m2 and self._eq(delta, d1, d2, theta) and self._eq(delta, c1, c2, theta)
            case Record(f1), Record(f2):
                return self._fields(delta, dict(f1), dict(f2), theta)
            case Variant(f1), Variant(f2):
                return self._fields(delta, dict(f1), dict(f2), theta)
            case Forall(a, k1, b1), Forall(b, k2, b2):
                if k1 != k2:
                    return False
                c = fresh_name(a)
                inner = dict(delta)
                inner[c] = k1
                return self._eq(inner, subst_type(b1, a, TVar(c)), subst_type(b2, b, TVar(c)), theta)
            case TVar(a), TVar(b):
                return a == b
        return False

    def _fields(self, delta, f1: dict, f2: dict, theta) -> bool:
        if f1.keys() != f2.keys():
            return False
        return all(self._eq(delta, f1[l], f2[l], theta) for l in f1)


def type_equiv(delta: Mapping[str, Kind], t: Type, u: Type, budget: int = DEFAULT_BUDGET) -> bool:
    return Equivalence(dict(delta), budget).equiv(t, u)


def explain(delta: Mapping[str, Kind], t: Type, u: Type, budget: int = DEFAULT_BUDGET):
    """``(equal, trace)``; the trace is set when two session types part ways."""
    e = Equivalence(dict(delta), budget)
    ok = e.equiv(t, u)
    return ok, (None if ok else e.last_trace)
