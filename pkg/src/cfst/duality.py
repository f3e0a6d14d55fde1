"""Session duality, type concatenation and normalisation."""

from __future__ import annotations

from .kinding import is_terminated
from .syntax import Choice, Message, Rec, Seq, Skip, TVar, Type, rename_binders, subst_type


class DualityError(Exception):
    pass


_FLIP = {"!": "?", "?": "!", "+": "&", "&": "+"}


def dual(t: Type) -> Type:
    """The other end of a channel of type ``t``."""
    match t:
        case Skip() | TVar():
            return t
        case Message(pol, p):
            return Message(_FLIP[pol], p)
        case Choice(view, bs):
            return Choice(_FLIP[view], tuple((l, dual(b)) for l, b in bs))
        case Seq(l, r):
            return Seq(dual(l), dual(r))
        case Rec(v, k, b):
            return Rec(v, k, dual(b))
    raise DualityError(f"duality is defined on session types only, not on {t}")


def append(t: Type, u: Type) -> Type:
    """Concatenation that keeps sequences right-nested and drops a trailing Skip."""
    if isinstance(u, Skip):
        return t
    if isinstance(t, Seq):
        return Seq(t.left, append(t.right, u))
    return Seq(t, u)


def normalise(t: Type) -> Type:
    """Expose the head constructor: unfold μ, drop terminated prefixes, reassociate."""
    match t:
        case Seq(l, r):
            if is_terminated(l):
                return normalise(r)
            return append(normalise(l), r)
        case Rec(v, k, b):
            nb = normalise(b)
            return rename_binders(subst_type(nb, v, Rec(v, k, nb)))
    return t


def head_message(t: Type):
    """Split a normalised channel type into ``(polarity, payload, continuation)`` or None."""
    n = normalise(t)
    match n:
        case Message(pol, p):
            return pol, p, Skip()
        case Seq(Message(pol, p), rest):
            return pol, p, rest
    return None


def head_choice(t: Type) -> Choice | None:
    """The choice at the head of ``t``, with the continuation distributed into each branch."""
    n = normalise(t)
    match n:
        case Choice():
            return n
        case Seq(Choice(view, bs), rest):
            return Choice(view, tuple((l, append_seq(b, rest)) for l, b in bs))
    return None


def append_seq(t: Type, rest: Type) -> Type:
    if isinstance(rest, Skip):
        return t
    if isinstance(t, Skip):
        return rest
    return Seq(t, rest)
