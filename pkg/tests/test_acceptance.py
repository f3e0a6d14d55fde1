"""Acceptance criteria 1-10, each reporting one PASS/FAIL line.

Run under pytest (lines are repeated in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

import random
import time

import pytest

from cfst.bpa import Verdict, assign_vars, equations, mu_subterms, session_bisim, translate
from cfst.declarative import declarative_check
from cfst.duality import dual, normalise
from cfst.elaborate import load
from cfst.equivalence import type_equiv
from cfst.kinding import KindError, is_terminated, kind_check, kind_synth, subkind
from cfst.lts import bounded_bisim, lts_step
from cfst.randgen import (
    ProgramGen, mutate_session_type, random_session_type, random_type,
    random_well_kinded_type,
)
from cfst.runtime import Deadlock, Halted, Machine, run_program
from cfst.syntax import (
    ALL_KINDS, Choice, Lit, Message, Rec, SL, Seq, Skip, TVar, Var, alpha_eq, free_tvars, unfold,
)
from cfst.typechecker import CheckError, Checker, MonotonicityViolation, check_program
from conftest import T, corpus_text
from oracles import tree_sum_from_source

RESULTS: dict[int, str] = {}
SEED = 20_201_014
DEPTH = 12
BUDGET = 10_000

WELL_TYPED = ["stack.fst", "encrypted.fst", "payload.fst", "tree.fst"]
EXECUTABLE = WELL_TYPED + ["deadlock.fst", "bpa_example.fst"]


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)


def population(n: int, salt: int = 0) -> list:
    rng = random.Random(SEED + salt)
    return [random_session_type(rng, 20) for _ in range(n)]


# 1 -------------------------------------------------------------------------------------------


def test_1_corpus_acceptance():
    start = time.perf_counter()
    problems = []
    for name in WELL_TYPED:
        el = load(corpus_text(name))
        diags = check_program(el.program, type_names=el.type_names)
        if diags:
            problems.append(f"{name}: {[d.message for d in diags]}")
    text = corpus_text("bad_stack.fst")
    el = load(text)
    diags = check_program(el.program, type_names=el.type_names)
    # the first Pop acts on the inner Stack; the second one meets EStack, which has no Pop
    sites = [(i + 1, line.index("select Pop") + 1)
             for i, line in enumerate(text.splitlines()) if "select Pop" in line]
    site = sites[1]
    if len(diags) != 1 or diags[0].span != site or "Pop" not in diags[0].message:
        problems.append(f"bad_stack.fst: {[(d.span, d.message) for d in diags]} (site {site})")
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed < 5
    report(1, ok, f"{len(WELL_TYPED)} programs clean, bad client rejected once at {site}, "
                  f"{elapsed:.2f}s" + (f"; {problems}" if problems else ""))
    assert ok, problems


# 2 -------------------------------------------------------------------------------------------


def test_2_bpa_translation():
    t = T("!Char; rec a2 . (Skip; rec a1 . (!Int;a1;?Bool;a2))")
    subs = mu_subterms(t)
    v = assign_vars(subs)
    top = str(translate(t, v))
    eqs = {x: str(p) for x, p in equations(t, v).equations.items()}
    # X1 is the inner recursion, X2 the outer one, matching the variable numbering above
    want = {"X1": "!Int·X1·?Bool·X2", "X2": "!Int·X1·?Bool·X2"}
    ok = top == "!Char·X2" and eqs == want and len(subs) == 2
    report(2, ok, f"translate = {top}; equations = {eqs}")
    assert ok


# 3 -------------------------------------------------------------------------------------------


def _laws(t, u, w, rng):
    """Pairs the bisimilarity laws say are equivalent."""
    yield "skip-left", Seq(Skip(), t), t
    yield "skip-right", Seq(t, Skip()), t
    yield "assoc", Seq(Seq(t, u), w), Seq(t, Seq(u, w))
    labels = ("A", "B", "C")[:rng.randint(1, 3)]
    branches = tuple((l, b) for l, b in zip(labels, (t, u, w)))
    view = rng.choice("+&")
    yield "distrib", Seq(Choice(view, branches), w), \
        Choice(view, tuple((l, Seq(b, w)) for l, b in branches))
    yield "unused-rec", Rec("unused", SL, t), t
    r = Rec("r", SL, Choice("+", (("A", Seq(t, TVar("r"))), ("B", u))))
    yield "unfold", r, unfold(r)
    closed = [sub for sub in mu_subterms(t) if not free_tvars(sub)]
    if closed:
        yield "unfold-sub", closed[-1], unfold(closed[-1])


def test_3_equivalence_laws():
    pop = population(1000)
    rng = random.Random(SEED + 3)
    start = time.perf_counter()
    failures, checked = [], 0
    for i, t in enumerate(pop):
        u, w = pop[(i + 1) % len(pop)], pop[(i + 7) % len(pop)]
        for law, a, b in _laws(t, u, w, rng):
            checked += 1
            if not type_equiv({}, a, b, BUDGET):
                failures.append((law, str(a), str(b)))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    report(3, ok, f"{checked} law instances over {len(pop)} types, {len(failures)} failures, "
                  f"{elapsed:.1f}s")
    assert ok, failures[:5]


# 4 -------------------------------------------------------------------------------------------


def _pairs(n: int):
    pop = population(n, salt=4)
    rng = random.Random(SEED + 4)
    out = []
    for i, t in enumerate(pop):
        mode = i % 3
        if mode == 0:
            out.append((t, pop[(i * 7 + 1) % n]))
        elif mode == 1:
            u = pop[(i + 1) % n]
            out.append(rng.choice([(Seq(Skip(), t), t), (normalise(t), t),
                                   (Seq(Seq(t, u), t), Seq(t, Seq(u, t))), (t, t)]))
        else:
            out.append((t, mutate_session_type(rng, t)))
    return out


def _replays(t, u, trace) -> bool:
    """Does the trace distinguish t from u on the type LTS itself?"""
    for lab in trace[:-1]:
        st, su = lts_step(t), lts_step(u)
        if lab not in st or lab not in su:
            return False
        t, u = st[lab], su[lab]
    return (trace[-1] in lts_step(t)) != (trace[-1] in lts_step(u))


def test_4_oracle_agreement():
    pairs = _pairs(1000)
    counts = {v: 0 for v in Verdict}
    contradictions = []
    for t, u in pairs:
        r = session_bisim(t, u, BUDGET)
        b = bounded_bisim(t, u, DEPTH)
        counts[r.verdict] += 1
        if r.verdict is Verdict.EQUIVALENT and not b:
            contradictions.append(("bpa equivalent, bounded refutes", str(t), str(u)))
        if r.verdict is Verdict.NOT_EQUIVALENT:
            if not r.trace or not _replays(t, u, r.trace):
                contradictions.append(("witness does not replay", str(t), str(u)))
            elif len(r.trace) <= DEPTH and b:
                contradictions.append(("short witness, bounded agrees", str(t), str(u)))
    unknown = counts[Verdict.UNKNOWN] / len(pairs)
    ok = not contradictions and unknown < 0.05
    report(4, ok, f"{len(pairs)} pairs: {counts[Verdict.EQUIVALENT]} equivalent, "
                  f"{counts[Verdict.NOT_EQUIVALENT]} not, unknown rate {unknown:.1%}, "
                  f"{len(contradictions)} contradictions")
    assert ok, contradictions[:5]


# 5 -------------------------------------------------------------------------------------------


def test_5_duality():
    failures = []
    for t in population(1000, salt=5):
        d = dual(t)
        if not alpha_eq(dual(d), t) or is_terminated(d) != is_terminated(t) \
                or kind_synth({}, d) != kind_synth({}, t):
            failures.append(str(t))
    report(5, not failures, f"1000 session types, {len(failures)} failures")
    assert not failures, failures[:5]


# 6 -------------------------------------------------------------------------------------------


def test_6_normalisation():
    rng = random.Random(SEED + 6)
    failures = []
    for _ in range(1000):
        t = random_well_kinded_type(rng)
        n = normalise(t)
        head_ok = not isinstance(n, Rec) and (
            not isinstance(n, Seq) or isinstance(n.left, (Message, Choice)))
        if not head_ok or not type_equiv({}, t, n, BUDGET):
            failures.append((str(t), str(n)))
    report(6, not failures, f"1000 well-kinded types, {len(failures)} failures")
    assert not failures, failures[:5]


# 7 -------------------------------------------------------------------------------------------


def test_7_kinding_minimality():
    rng = random.Random(SEED + 7)
    mismatches, kinded = [], 0
    for _ in range(500):
        t = random_type(rng)
        try:
            k = kind_synth({}, t)
            kinded += 1
        except KindError:
            k = None
        for target in ALL_KINDS:
            try:
                kind_check({}, t, target)
                checks = True
            except KindError:
                checks = False
            if checks != (k is not None and subkind(k, target)):
                mismatches.append((str(t), str(target)))
    report(7, not mismatches, f"500 types x 6 kinds ({kinded} well-kinded), "
                              f"{len(mismatches)} mismatches")
    assert not mismatches, mismatches[:5]


# 8 -------------------------------------------------------------------------------------------


def test_8_monotonicity():
    judgements, violations = 0, []
    for name in EXECUTABLE + ["bad_stack.fst"]:
        el = load(corpus_text(name))
        chk = Checker(dict(el.program.signatures), debug=True, type_names=el.type_names)
        try:
            check_program(el.program, checker=chk)
        except MonotonicityViolation as err:
            violations.append(f"{name}: {err}")
        violations += [f"{name}: {e}" for e in chk.violations]
        judgements += chk.judgements
    ok = not violations and judgements > 0
    report(8, ok, f"{judgements} judgement exits checked, {len(violations)} violations")
    assert ok, violations[:5]


# 9 -------------------------------------------------------------------------------------------


def _run_checked(prog, seed):
    """Run to completion, classifying the state before every step."""
    m = Machine(prog, seed=seed, max_steps=10_000, audit_at={1, 10, 100})
    m.spawn(Var("main"), prog.decls["main"].type)
    errors = []
    while True:
        err = m.classify()
        if err is not None:
            errors.append(err)
            break
        out = m.step()
        if out is not None:
            return out, m, errors


def _summary(out):
    if isinstance(out, Halted):
        return ("halted", out.main)
    if isinstance(out, Deadlock):
        return ("deadlock", tuple(sorted(out.waiting)))
    return (type(out).__name__,)


def test_9_dynamic_soundness():
    problems, notes = [], []
    for name in EXECUTABLE:
        prog = load(corpus_text(name)).program
        summaries, channels = set(), 0
        for seed in range(5):
            out, m, errors = _run_checked(prog, seed)
            channels = max(channels, m._next_chan)
            if errors:
                problems.append(f"{name} seed {seed}: {errors[0]}")
            if m.audit_failures:
                problems.append(f"{name} seed {seed}: audit {m.audit_failures[:2]}")
            if not isinstance(out, (Halted, Deadlock)):
                problems.append(f"{name} seed {seed}: {out}")
            summaries.add(_summary(out))
        if len(summaries) != 1 and channels <= 1:
            problems.append(f"{name}: outcome depends on the seed: {summaries}")
        notes.append(f"{name.removesuffix('.fst')}={_describe(next(iter(summaries)))}")
    text = corpus_text("tree.fst")
    expected = tree_sum_from_source(text)
    out, _ = run_program(load(text).program)
    if not (isinstance(out, Halted) and out.main == Lit(expected) and expected == 6):
        problems.append(f"tree sum {out}, fold says {expected}")
    report(9, not problems, "; ".join(notes) + f"; fold={expected}"
           + (f"; {problems}" if problems else ""))
    assert not problems, problems


def _describe(summary):
    if summary[0] == "halted":
        return getattr(summary[1], "value", summary[1])
    return summary[0]


# 10 ------------------------------------------------------------------------------------------


def _algorithmic(gamma, e, t) -> bool:
    chk = Checker()
    try:
        rest = chk.check({}, dict(gamma), e, t)
    except CheckError:
        return False
    return not any(chk.linear({}, u) for u in rest.values())


def test_10_declarative_cross_check():
    gen = ProgramGen(random.Random(SEED + 10))
    disagreements, accepted = [], 0
    for _ in range(50):
        gamma, e, t = gen.sample(max_nodes=25)
        alg = _algorithmic(gamma, e, t)
        dec = declarative_check(gamma, e, t)
        accepted += alg
        if alg != dec:
            disagreements.append((gamma, str(e), str(t), alg, dec))
    report(10, not disagreements, f"50 programs ({accepted} accepted), "
                                  f"{len(disagreements)} disagreements")
    assert not disagreements, disagreements[:3]


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
