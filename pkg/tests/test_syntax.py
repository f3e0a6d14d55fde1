from hypothesis import given, settings, strategies as st
import random

from cfst.randgen import random_type
from cfst.syntax import (
    INT, Arrow, Mult, Rec, SL, Seq, Skip, TVar, Message, Forall, alpha_eq, binders, free_tvars,
    fresh_rename, subst_type,
)
from conftest import T

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_free_tvars():
    assert free_tvars(Skip()) == set()
    assert free_tvars(Rec("a", SL, Seq(TVar("a"), TVar("b")))) == {"b"}
    assert free_tvars(Forall("a", SL, Seq(Message("!", INT), TVar("a")))) == set()


def test_subst_simple():
    out = Message("!", INT)
    assert subst_type(TVar("a"), "a", out) == out
    body = Rec("b", SL, Seq(TVar("a"), TVar("b")))
    assert subst_type(body, "a", out) == Rec("b", SL, Seq(out, TVar("b")))


def test_subst_avoids_capture():
    # substituting the free name a under a binder named a must rename the binder
    t = Rec("a", SL, Seq(TVar("a"), TVar("b")))
    r = subst_type(t, "b", TVar("a"))
    assert free_tvars(r) == {"a"}
    assert isinstance(r, Rec) and r.var != "a"
    assert alpha_eq(r, Rec("c", SL, Seq(TVar("c"), TVar("a"))))


def test_alpha_eq_examples():
    mu = lambda v, pol: Rec(v, SL, Seq(Message(pol, INT), TVar(v)))
    assert alpha_eq(mu("a", "!"), mu("b", "!"))
    assert not alpha_eq(mu("a", "!"), mu("a", "?"))
    idf = lambda v: Forall(v, SL, Arrow(Mult.UN, TVar(v), TVar(v)))
    assert alpha_eq(idf("a"), idf("b"))


def test_fresh_rename_separates_copies():
    mu = Rec("a", SL, Seq(Message("!", INT), TVar("a")))
    r = fresh_rename(Seq(mu, mu))
    bs = binders(r)
    assert len(bs) == 2 and len(set(bs)) == 2
    assert alpha_eq(r, Seq(mu, mu))


def test_fresh_rename_idempotent_up_to_alpha():
    t = T("forall a:SL . (rec b . !Int;b;a) -> a")
    assert alpha_eq(fresh_rename(t), t)


def test_rename_after_duplicating_substitution():
    t = Rec("a", SL, Seq(TVar("x"), TVar("x")))
    inner = Rec("b", SL, Seq(Message("!", INT), TVar("b")))
    r = fresh_rename(subst_type(t, "x", inner))
    bs = binders(r)
    assert len(bs) == len(set(bs)) == 3


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_identity_substitution(seed):
    t = random_type(random.Random(seed))
    assert alpha_eq(subst_type(t, "y0", TVar("y0")), t)


@settings(max_examples=200, deadline=None)
@given(seeds, seeds, seeds)
def test_alpha_eq_is_an_equivalence(s1, s2, s3):
    t, u = random_type(random.Random(s1)), random_type(random.Random(s2))
    v = random_type(random.Random(s3))
    r = fresh_rename(t)
    assert alpha_eq(t, t)
    assert alpha_eq(t, r) and alpha_eq(r, t)
    assert alpha_eq(t, u) == alpha_eq(u, t)
    if alpha_eq(t, u) and alpha_eq(u, v):
        assert alpha_eq(t, v)


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_rename_gives_unique_binders(seed):
    t = random_type(random.Random(seed))
    r = fresh_rename(t)
    bs = binders(r)
    assert len(bs) == len(set(bs))
    assert not set(bs) & free_tvars(r)
