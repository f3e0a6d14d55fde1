import random

from hypothesis import given, settings, strategies as st

from cfst.bpa import (
    EPS, Action, BpaSystem, Cat, ProcVar, Verdict, assign_vars, bpa_bisim, bpa_step, check_trace,
    equations, is_guarded, mu_subterms, session_bisim, translate, unravel,
)
from cfst.duality import normalise
from cfst.equivalence import EquivalenceUndecided, Equivalence, type_equiv
from cfst.kinding import is_terminated
from cfst.lts import Out, In, SelectLabel, bounded_bisim, distinguishing_trace, lts_step
from cfst.randgen import random_session_type
from cfst.syntax import INT, SL, Message, Seq, Skip, TVar
from conftest import T

seeds = st.integers(min_value=0, max_value=2**32 - 1)

WORKED = "!Char; rec a2 . (Skip; rec a1 . (!Int;a1;?Bool;a2))"


def _system(text):
    t = T(text)
    v = assign_vars(mu_subterms(t))
    return t, v, equations(t, v)


def test_lts_step_examples():
    assert lts_step(T("!Int")) == {Out(INT): Skip()}
    step = lts_step(T("+{Push: !Int};?Bool"))
    assert list(step) == [SelectLabel("Push")]
    assert bounded_bisim(step[SelectLabel("Push")], T("!Int;?Bool"), 12)
    assert lts_step(T("Skip;Skip")) == {}
    assert lts_step(TVar("a")) != {}


def test_bounded_bisim_examples():
    mu = T("rec a . !Int;a")
    assert bounded_bisim(T("Skip;!Int;?Bool"), T("!Int;?Bool"), 12)
    assert not bounded_bisim(T("!Int"), T("?Int"), 1)
    assert bounded_bisim(mu, Seq(Message("!", INT), mu), 12)


def test_bounded_bisim_depth_zero_refutes_nothing():
    assert bounded_bisim(T("!Int"), T("?Int"), 0)


def test_mu_subterms():
    assert mu_subterms(T("!Int")) == []
    assert len(mu_subterms(T(WORKED))) == 2
    assert len(mu_subterms(T("rec a . !Int;a"))) == 1


def test_unravel():
    t = T("Skip; rec a1 . !Int;a1")
    u = unravel(t)
    assert isinstance(u, Seq) and u.left == Message("!", INT)
    assert unravel(T("!Int")) == Message("!", INT)
    u = unravel(T("rec a . Skip;(!Int;a)"))
    assert isinstance(u, Seq) and u.left == Message("!", INT)


def test_translate():
    assert translate(Skip(), {}) == EPS
    t, v, _ = _system(WORKED)
    assert str(translate(t, v)) == "!Char·X2"
    assert translate(T("!Int;Skip"), {}) == Action(Out(INT))


def test_worked_example_equations():
    _, _, g = _system(WORKED)
    assert {x: str(p) for x, p in g.equations.items()} == {
        "X1": "!Int·X1·?Bool·X2", "X2": "!Int·X1·?Bool·X2"}
    assert is_guarded(g)


def test_equations_small():
    assert equations(T("!Int")).equations == {}
    _, _, g = _system("rec a . !Int;a")
    assert {x: str(p) for x, p in g.equations.items()} == {"X1": "!Int·X1"}
    assert is_guarded(g)


def test_bpa_step():
    g = BpaSystem()
    assert bpa_step(g, Action(Out(INT))) == {(Out(INT), EPS)}
    assert bpa_step(g, Cat(Action(Out(INT)), ProcVar("X2"))) == {(Out(INT), ProcVar("X2"))}
    _, _, g = _system(WORKED)
    [(label, rest)] = bpa_step(g, ProcVar("X1"))
    assert label == Out(INT) and str(rest) == "X1·?Bool·X2"


def test_bpa_bisim_examples():
    _, _, g = _system(WORKED)
    assert bpa_bisim(g, ProcVar("X1"), ProcVar("X2")).verdict is Verdict.EQUIVALENT
    r = bpa_bisim(BpaSystem(), Action(Out(INT)), Action(In(INT)))
    assert r.verdict is Verdict.NOT_EQUIVALENT and r.trace == [Out(INT)]
    g = BpaSystem({"X": Cat(Action(Out(INT)), ProcVar("X"))})
    assert bpa_bisim(g, ProcVar("X"), Cat(Action(Out(INT)), ProcVar("X"))).verdict is Verdict.EQUIVALENT


def test_witness_trace_is_checkable():
    t, u = T("!Int;?Bool;!Char"), T("!Int;?Bool;?Char")
    joint = session_bisim(t, u)
    assert joint.verdict is Verdict.NOT_EQUIVALENT
    assert [str(l) for l in joint.trace] == ["!Int", "?Bool", "!Char"]
    assert distinguishing_trace(t, u, 12) == joint.trace
    g, v = equations(t), assign_vars(mu_subterms(t))
    assert check_trace(g, translate(t, v), translate(u, {}), joint.trace)
    assert not check_trace(g, translate(t, v), translate(u, {}), joint.trace[:-1])


def test_unknown_only_when_budget_runs_out():
    t, u = T("rec a . +{A: !Int;a;a, B: Skip}"), T("rec b . +{A: !Int;b;b, B: Skip}")
    assert session_bisim(t, u, budget=10_000).verdict is Verdict.EQUIVALENT


TREE = "rec tc . +{Leaf: Skip, Node: tc;!Int;tc}"


def test_choice_distributes_over_sequence():
    tc = f"({TREE})"
    lhs = T(f"+{{Leaf: Skip, Node: {tc};!Int;{tc}}};a")
    rhs = T(f"+{{Leaf: Skip;a, Node: {tc};!Int;{tc};a}}")
    assert type_equiv({"a": SL}, lhs, rhs)


def test_unit_multiplicity_matters():
    assert not type_equiv({}, T("() -> ()"), T("() -> LinUnit"))


def test_functional_recursion_unfolds():
    fix = T("rec a:TU . () -> a")
    assert type_equiv({}, fix, T("() -> rec a:TU . () -> a"))
    assert type_equiv({}, fix, T("() -> () -> () -> rec a:TU . () -> a"))
    assert not type_equiv({}, fix, T("() -> Int"))


def test_type_equiv_congruences():
    assert type_equiv({}, T("forall a:SL . !Int;a -> a"), T("forall b:SL . !Int;b -> b"))
    assert type_equiv({}, T("(Skip;!Int, Int)"), T("(!Int, Int)"))
    assert not type_equiv({}, T("forall a:SL . a -> a"), T("forall a:SU . a -> a"))
    assert not type_equiv({}, T("Int -> Int"), T("Int -o Int"))


def test_budget_exhaustion_is_reported():
    t = T("rec a . +{A: !Int;a;a, B: Skip}")
    u = T("rec b . +{A: !Int;b;b;b, B: Skip}")
    eq = Equivalence(budget=1)
    try:
        assert not eq.equiv(t, u)
    except EquivalenceUndecided:
        pass


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_transitions_are_deterministic(seed):
    t = random_session_type(random.Random(seed))
    v = assign_vars(mu_subterms(t))
    g = equations(t, v)
    p = translate(t, v)
    for _ in range(8):
        steps = bpa_step(g, p)
        labels = [l for l, _ in steps]
        assert len(labels) == len(set(labels))
        if not steps:
            break
        _, p = sorted(steps, key=lambda s: str(s[0]))[0]


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_translation_is_empty_iff_terminated(seed):
    t = random_session_type(random.Random(seed))
    v = assign_vars(mu_subterms(t))
    assert (translate(t, v) == EPS) == is_terminated(t)


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_bpa_and_type_transitions_co_simulate(seed):
    rng = random.Random(seed)
    t = random_session_type(rng)
    v = assign_vars(mu_subterms(t))
    g = equations(t, v)
    p = translate(t, v)
    for _ in range(6):
        tsteps = lts_step(t)
        steps = bpa_step(g, p)
        assert {l for l, _ in steps} == set(tsteps)
        if not steps:
            break
        label, p = rng.choice(sorted(steps, key=lambda s: str(s[0])))
        t = tsteps[label]
        assert bounded_bisim(t, t, 1)


@settings(max_examples=100, deadline=None)
@given(seeds, seeds, seeds)
def test_type_equiv_is_an_equivalence(s1, s2, s3):
    t = random_session_type(random.Random(s1), 10)
    u = normalise(t)
    w = Seq(Skip(), u)
    assert type_equiv({}, t, t)
    assert type_equiv({}, t, u) and type_equiv({}, u, t)
    assert type_equiv({}, u, w) and type_equiv({}, t, w)
    a, b = random_session_type(random.Random(s2), 10), random_session_type(random.Random(s3), 10)
    assert type_equiv({}, a, b) == type_equiv({}, b, a)
