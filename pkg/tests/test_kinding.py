import random

import pytest
from hypothesis import given, settings, strategies as st

from cfst.kinding import KindError, is_contractive, is_terminated, kind_check, kind_synth, subkind
from cfst.randgen import random_session_type, random_type
from cfst.syntax import (
    ALL_KINDS, INT, ML, MU, Message, Mult, Rec, SL, SU, Seq, Skip, TL, TU, TVar, subst_type,
)
from conftest import T

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_terminated():
    assert is_terminated(Skip())
    assert is_terminated(Seq(Skip(), Skip()))
    assert not is_terminated(Message("!", INT))
    assert is_terminated(Rec("a", SL, Seq(Skip(), Skip())))
    assert not is_terminated(TVar("a"))


def test_contractivity():
    assert is_contractive(frozenset(), "a", Seq(TVar("b"), TVar("a")))
    assert not is_contractive(frozenset({"b"}), "a", Seq(TVar("b"), TVar("a")))
    assert not is_contractive(frozenset(), "a", Seq(Skip(), TVar("a")))
    assert is_contractive(frozenset(), "a", Seq(Message("!", INT), TVar("a")))


def test_subkind_lattice():
    assert subkind(SU, TL) and subkind(SU, SL) and not subkind(TL, SU)
    assert subkind(MU, ML) and subkind(MU, TU) and subkind(ML, TL)
    assert not subkind(SL, TU) and not subkind(ML, SL)
    for k in ALL_KINDS:
        assert subkind(k, k) and subkind(k, TL)


def test_kind_synth_examples():
    assert kind_synth({}, Skip()) == SU
    assert kind_synth({}, T("!Int;?Bool")) == SL
    assert kind_synth({}, T("() -> Int")) == TU
    assert kind_synth({}, T("Int -o Int")) == TL
    assert kind_synth({}, T("LinUnit")) == ML


def test_polymorphic_variable_breaks_contractivity():
    with pytest.raises(KindError, match="contractive"):
        kind_synth({}, T("forall a:SL . rec b:SL . a;b"))


def test_kind_check_examples():
    kind_check({}, Skip(), TL)
    with pytest.raises(KindError):
        kind_check({}, T("!Int"), SU)
    kind_check({"a": MU}, Seq(Message("?", TVar("a")), Skip()), SL)


def test_errors_name_the_rule():
    with pytest.raises(KindError) as info:
        kind_synth({}, Seq(T("() -> ()"), Skip()))
    assert "AK-Seq" in str(info.value)
    with pytest.raises(KindError):
        kind_synth({}, TVar("nowhere"))


def _synth(t):
    try:
        return kind_synth({}, t)
    except KindError:
        return None


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_synthesised_kind_is_least(seed):
    t = random_type(random.Random(seed))
    k = _synth(t)
    for target in ALL_KINDS:
        try:
            kind_check({}, t, target)
            ok = True
        except KindError:
            ok = False
        assert ok == (k is not None and subkind(k, target))


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_terminated_sessions_are_unrestricted(seed):
    t = random_session_type(random.Random(seed))
    if is_terminated(t):
        assert kind_synth({}, t).mult is Mult.UN


@settings(max_examples=200, deadline=None)
@given(seeds, seeds)
def test_contractivity_survives_substitution(s1, s2):
    rng = random.Random(s1)
    t = random_session_type(rng)
    body = Seq(t, TVar("v")) if rng.random() < 0.5 else Seq(TVar("v"), t)
    u = random_session_type(random.Random(s2))
    for a in ("x0", "x1"):
        if is_contractive(frozenset(), a, body):
            assert is_contractive(frozenset(), a, subst_type(body, "v", u))
