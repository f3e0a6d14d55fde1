import random

from hypothesis import given, settings, strategies as st

from cfst.declarative import declarative_check
from cfst.randgen import ProgramGen
from cfst.syntax import INT, Abs, App, Const, Lit, Mult, Skip, Var, pair_expr, pair_type
from cfst.typechecker import CheckError, Checker
from conftest import T

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_linear_variable_used_once():
    c = T("!Int")
    assert declarative_check({"c": c}, Var("c"), c)
    assert not declarative_check({"c": c}, pair_expr(Var("c"), Var("c")), pair_type(c, c))


def test_unused_linear_variable_rejected():
    assert not declarative_check({"c": T("!Int")}, Lit(1), INT)
    assert declarative_check({"n": INT}, Lit(1), INT)


def test_split_feeds_each_side():
    gamma = {"a": T("!Int"), "b": T("?Int")}
    e = pair_expr(Var("b"), Var("a"))
    assert declarative_check(gamma, e, pair_type(T("?Int"), T("!Int")))


def test_implicit_send():
    e = App(App(Const("send"), Lit(1)), Var("c"))
    assert declarative_check({"c": T("!Int")}, e, Skip())
    assert not declarative_check({"c": T("?Int")}, e, Skip())


def test_unrestricted_abstraction_over_linear_context():
    e = Abs(Mult.UN, "x", INT, Var("c"))
    assert not declarative_check({"c": T("!Int")}, e, T("Int -> !Int"))
    assert declarative_check({"c": T("!Int")}, Abs(Mult.LIN, "x", INT, Var("c")), T("Int -o !Int"))


def _algorithmic(gamma, e, t) -> bool:
    chk = Checker()
    try:
        rest = chk.check({}, dict(gamma), e, t)
    except CheckError:
        return False
    return not any(chk.linear({}, u) for u in rest.values())


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_agrees_with_algorithmic_checker(seed):
    gamma, e, t = ProgramGen(random.Random(seed)).sample()
    assert _algorithmic(gamma, e, t) == declarative_check(gamma, e, t)
