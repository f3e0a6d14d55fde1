import random

import pytest
from hypothesis import given, settings, strategies as st

from cfst.elaborate import load
from cfst.randgen import PROTOCOLS, ProgramGen
from cfst.syntax import (
    INT, Abs, App, Arrow, Const, Forall, If, Lit, ML, Message, Mult, SL, Seq, Skip, TApp, TVar,
    UNIT, Var, pair_type,
)
from cfst.typechecker import (
    CheckError, Checker, check_program, ctx_diff, ctx_split_oracle, typeof_const,
)
from conftest import T, corpus_program

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_constant_types():
    send = Forall("a", ML, Arrow(Mult.UN, TVar("a"), Forall("b", SL, Arrow(
        Mult.LIN, Seq(Message("!", TVar("a")), TVar("b")), TVar("b")))))
    receive = Forall("a", ML, Forall("b", SL, Arrow(
        Mult.UN, Seq(Message("?", TVar("a")), TVar("b")), pair_type(TVar("a"), TVar("b")))))
    assert typeof_const("send") == send
    assert typeof_const("receive") == receive
    assert typeof_const("unit") == UNIT
    assert typeof_const("fork") == T("forall a:TU . a -> ()")
    assert typeof_const("+") == T("Int -> Int -> Int")


def test_ctx_diff():
    assert ctx_diff({}, {"x": UNIT}, "x") == {}
    assert ctx_diff({}, {}, "x") == {}
    with pytest.raises(CheckError, match="never used"):
        ctx_diff({}, {"x": T("!Int")}, "x")


def test_ctx_split_oracle():
    assert list(ctx_split_oracle({}, {})) == [({}, {})]
    assert list(ctx_split_oracle({}, {"x": UNIT})) == [({"x": UNIT}, {"x": UNIT})]
    c = T("!Int")
    assert sorted(ctx_split_oracle({}, {"x": c}), key=lambda s: len(s[0])) == \
        [({}, {"x": c}), ({"x": c}, {})]


def test_every_split_sends_linear_entries_one_way():
    gamma = {"a": T("!Int"), "b": T("?Int"), "n": INT}
    splits = list(ctx_split_oracle({}, gamma))
    assert len(splits) == 4
    for g1, g2 in splits:
        assert "n" in g1 and "n" in g2
        for x in ("a", "b"):
            assert (x in g1) != (x in g2)


def test_synth_unit():
    assert Checker().synth({}, {}, Const("unit")) == (UNIT, {})


def test_synth_send_with_explicit_type_arguments():
    e = App(TApp(App(TApp(Const("send"), INT), Lit(5)), Skip()), Var("c"))
    t, out = Checker().synth({}, {"c": Seq(Message("!", INT), Skip())}, e)
    assert t == Skip() and out == {}


def test_synth_send_with_inferred_arguments():
    e = App(App(Const("send"), Lit(5)), Var("c"))
    t, out = Checker().synth({}, {"c": T("!Int;?Bool")}, e)
    assert t == T("?Bool") and out == {}


def test_check_unit():
    assert Checker().check({}, {}, Const("unit"), UNIT) == {}
    with pytest.raises(CheckError) as info:
        Checker().check({}, {}, Const("unit"), T("!Int"))
    assert "()" in info.value.message and "!Int" in info.value.message


def test_mismatch_reports_distinguishing_trace():
    with pytest.raises(CheckError, match="distinguished by: !Int !Char"):
        Checker().check({}, {"c": T("!Int;!Char")}, Var("c"), T("!Int;?Char"))


def test_conditional_branches_must_agree_on_context():
    gamma = {"a": T("!Int"), "b": T("!Int")}
    e = If(Lit(True), App(App(Const("send"), Lit(1)), Var("a")),
           App(App(Const("send"), Lit(1)), Var("b")))
    with pytest.raises(CheckError, match="branch contexts disagree"):
        Checker().check({}, gamma, e, Skip())


def test_unrestricted_lambda_cannot_capture_linear():
    e = Abs(Mult.UN, "x", INT, Var("c"))
    with pytest.raises(CheckError):
        Checker().synth({}, {"c": T("!Int")}, e)


def test_new_needs_a_closed_session_type():
    from cfst.syntax import New
    with pytest.raises(CheckError, match="closed"):
        Checker().synth({"a": SL}, {}, New(Seq(Message("!", INT), TVar("a"))))


GOOD = ["stack.fst", "encrypted.fst", "payload.fst", "tree.fst", "deadlock.fst", "bpa_example.fst"]


@pytest.mark.parametrize("name", GOOD)
def test_corpus_checks_cleanly(name):
    el = corpus_program(name)
    assert check_program(el.program, type_names=el.type_names) == []


def test_bad_stack_client_rejected_once_at_select():
    el = corpus_program("bad_stack.fst")
    diags = check_program(el.program, type_names=el.type_names)
    assert len(diags) == 1
    d = diags[0]
    assert "Pop" in d.message and "EStack" in d.message
    assert d.span == (7, 11)


def test_signatures_must_be_unrestricted():
    el = load("c : !Int\nc = c\n")
    assert check_program(el.program)


def test_leftover_linear_argument_is_reported():
    el = load("f : !Int -> Int\nf c = 1\n")
    [d] = check_program(el.program)
    assert "never used" in d.message


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_weakening(seed):
    rng = random.Random(seed)
    gen = ProgramGen(rng)
    gamma, e, t = gen.well_typed()
    extra = rng.choice(PROTOCOLS + (INT, UNIT))
    try:
        _, out = Checker().synth({}, gamma, e)
    except CheckError:
        return
    _, out2 = Checker().synth({}, {**gamma, "untouched": extra}, e)
    assert out2 == {**out, "untouched": extra}


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_monotonicity_on_random_programs(seed):
    gen = ProgramGen(random.Random(seed))
    gamma, e, t = gen.sample()
    chk = Checker(debug=True)
    try:
        chk.check({}, gamma, e, t)
    except CheckError:
        pass
    assert chk.violations == []


def test_debug_flag_catches_a_growing_context():
    from cfst.typechecker import MonotonicityViolation
    chk = Checker(debug=True)
    with pytest.raises(MonotonicityViolation):
        chk._monotone({}, {}, {"c": T("!Int")}, Const("unit"))
    with pytest.raises(MonotonicityViolation):
        Checker(debug=True)._monotone({}, {"n": INT}, {}, Const("unit"))
