"""Labelled transitions of session types and a depth-bounded bisimulation check."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .kinding import is_terminated
from .printer import show_type
from .syntax import Choice, Message, Rec, Seq, Skip, TVar, Type, subst_type


class Label:
    """A transition label: a message, a choice label or a polymorphic variable."""


@dataclass(frozen=True)
class Out(Label):
    payload: Type

    def __str__(self):
        return "!" + show_type(self.payload, 2)


@dataclass(frozen=True)
class In(Label):
    payload: Type

    def __str__(self):
        return "?" + show_type(self.payload, 2)


@dataclass(frozen=True)
class SelectLabel(Label):
    label: str

    def __str__(self):
        return "+" + self.label


@dataclass(frozen=True)
class BranchLabel(Label):
    label: str

    def __str__(self):
        return "&" + self.label


@dataclass(frozen=True)
class PolyVar(Label):
    name: str

    def __str__(self):
        return self.name


def message_label(polarity: str, payload: Type) -> Label:
    return Out(payload) if polarity == "!" else In(payload)


def choice_label(view: str, label: str) -> Label:
    return SelectLabel(label) if view == "+" else BranchLabel(label)


def lts_step(t: Type) -> dict[Label, Type]:
    """Successors of ``t``; free variables are read as polymorphic."""
    match t:
        case Skip():
            return {}
        case Message(pol, p):
            return {message_label(pol, p): Skip()}
        case Choice(view, bs):
            return {choice_label(view, l): b for l, b in bs}
        case TVar(a):
            return {PolyVar(a): Skip()}
        case Seq(l, r):
            if is_terminated(l):
                return lts_step(r)
            return {lab: _then(nl, r) for lab, nl in lts_step(l).items()}
        case Rec(v, _, b):
            return lts_step(subst_type(b, v, t))
    raise ValueError(f"no transitions defined for non-session type {t}")


def _then(t: Type, u: Type) -> Type:
    # Skip;U and U have the same transitions; dropping the Skip keeps states small.
    return u if isinstance(t, Skip) else Seq(t, u)


def bounded_bisim(t: Type, u: Type, depth: int) -> bool:
    """True iff no difference in enabled labels shows up within ``depth`` steps."""
    seen: dict[tuple, int] = {}

    def go(t: Type, u: Type, d: int) -> bool:
        if d <= 0 or t == u:
            return True
        key = (t, u)
        if seen.get(key, -1) >= d:
            return True
        st, su = lts_step(t), lts_step(u)
        if st.keys() != su.keys():
            return False
        for lab, nt in st.items():
            if not go(nt, su[lab], d - 1):
                return False
        seen[key] = d
        return True

    return go(t, u, depth)


def parting_label(sa: Mapping, sb: Mapping) -> Label:
    """A label enabled on exactly one side, chosen deterministically."""
    return min(sa.keys() ^ sb.keys(), key=str)


def distinguishing_trace(t: Type, u: Type, depth: int) -> list[Label] | None:
    """A shortest trace whose last label only one of ``t`` and ``u`` can take."""
    frontier = [(t, u, [])]
    visited = set()
    for _ in range(depth):
        nxt = []
        for a, b, trace in frontier:
            if (a, b) in visited:
                continue
            visited.add((a, b))
            sa, sb = lts_step(a), lts_step(b)
            if sa.keys() != sb.keys():
                return trace + [parting_label(sa, sb)]
            for lab, na in sa.items():
                nxt.append((na, sb[lab], trace + [lab]))
        frontier = nxt
    return None
