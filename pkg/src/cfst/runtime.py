"""Call-by-value reduction and a deterministic machine for threads and channels.

Evaluation is substitution based and ignores types: a value is a closed
expression in normal form, channel ends are variables minted by ``new``.
Channel operations, ``new`` and ``fork`` are left to the machine, which
pairs dual ends synchronously and schedules threads round-robin with
seed-dependent time slices.
"""

from __future__ import annotations

import random
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .duality import dual, head_choice, head_message
from .kinding import subkind
from .printer import summarise
from .syntax import (
    Abs, App, Case, Const, CoreProgram, Expr, If, Inject, LetRecord, LetUnit, Lit, Match, New,
    Nu, Par, Process, RecordExpr, RevApp, Select, TAbs, TApp, TU, Thread, Type, UNIT_VALUE, Var,
    free_vars, pair_expr, subst_expr, subst_type_in_expr,
)
from .typechecker import (
    ARITH, COMPARE, LOGIC, CheckError, Checker, spine,
)

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20_000))

BINARY = ARITH + COMPARE + LOGIC

ERROR_CASES = {
    1: "application of a non-function",
    2: "type application of a non-polymorphic value",
    3: "record elimination on a non-record",
    4: "case analysis on a value without a matching label",
    5: "two threads acting on the same channel end",
    6: "the two ends of a channel disagree",
}


# ---------------------------------------------------------------- step results


@dataclass(frozen=True)
class ChannelOp:
    """A redex the expression layer cannot reduce on its own."""

    kind: str  # send, receive, select, match, new, fork
    redex: Expr
    plug: Callable[[Expr], Expr] = field(compare=False, repr=False)
    subject: Optional[str] = None
    payload: Optional[Expr] = None
    label: Optional[str] = None
    branches: tuple = ()
    annot: Optional[Type] = None

    def describe(self) -> str:
        if self.kind == "send":
            return f"send on {self.subject}"
        if self.kind == "receive":
            return f"receive on {self.subject}"
        if self.kind == "select":
            return f"select {self.label} on {self.subject}"
        if self.kind == "match":
            return f"match on {self.subject}"
        return self.kind


@dataclass(frozen=True)
class IsValue:
    expr: Expr


@dataclass(frozen=True)
class Reduced:
    expr: Expr
    rule: str
    redex: Expr


@dataclass(frozen=True)
class StuckAtChannel:
    op: ChannelOp


@dataclass(frozen=True)
class Stuck:
    """A dynamic error; ``case`` indexes ERROR_CASES, None for arithmetic faults."""

    case: Optional[int]
    message: str
    redex: Expr


StepResult = Union[IsValue, Reduced, StuckAtChannel, Stuck]


# ---------------------------------------------------------------- values


def is_value(e: Expr, globals_: frozenset | dict = frozenset()) -> bool:
    match e:
        case Lit() | Const() | Abs() | Select() | TAbs():
            return True
        case Var(n):
            return n not in globals_
        case RecordExpr(fs):
            return all(is_value(v, globals_) for _, v in fs)
        case Inject(_, _, p):
            return is_value(p, globals_)
        case App() | TApp():
            head, args, ntypes = spine(e)
            if not all(is_value(a, globals_) for a in args):
                return False
            if isinstance(head, Const):
                if head.name == "send":
                    return len(args) <= 1
                if head.name == "receive":
                    return not args
                if head.name in BINARY:
                    return len(args) == 1 and not ntypes
                return False
            return isinstance(head, Select) and not args
    return False


def _focus(e: Expr, g) -> Optional[tuple[Expr, Callable[[Expr], Expr]]]:
    """Split ``e`` into a redex and its evaluation context, or None for a value."""
    if is_value(e, g):
        return None

    def inside(sub, rebuild):
        r = _focus(sub, g)
        if r is None:
            return None
        redex, plug = r
        return redex, lambda x: rebuild(plug(x))

    match e:
        case App(f, a):
            if not is_value(f, g):
                return inside(f, lambda x: App(x, a, span=e.span))
            head, args, _ = spine(f)
            if isinstance(head, Const) and head.name == "fork" and not args:
                return e, _identity  # the forked expression is not evaluated here
            if not is_value(a, g):
                return inside(a, lambda x: App(f, x, span=e.span))
        case TApp(x, t):
            if not is_value(x, g):
                return inside(x, lambda y: TApp(y, t, span=e.span))
        case RecordExpr(fs):
            for i, (label, v) in enumerate(fs):
                if not is_value(v, g):
                    return inside(v, lambda x, i=i, label=label: RecordExpr(
                        fs[:i] + ((label, x),) + fs[i + 1:], span=e.span))
        case LetRecord(binds, b, body):
            if not is_value(b, g):
                return inside(b, lambda x: LetRecord(binds, x, body, span=e.span))
        case LetUnit(b, body):
            if not is_value(b, g):
                return inside(b, lambda x: LetUnit(x, body, span=e.span))
        case Inject(label, t, p):
            return inside(p, lambda x: Inject(label, t, x, span=e.span))
        case Case(s, bs):
            if not is_value(s, g):
                return inside(s, lambda x: Case(x, bs, span=e.span))
        case Match(s, bs):
            if not is_value(s, g):
                return inside(s, lambda x: Match(x, bs, span=e.span))
        case If(c, t, f):
            if not is_value(c, g):
                return inside(c, lambda x: If(x, t, f, span=e.span))
        case RevApp(a, f):
            if not is_value(a, g):
                return inside(a, lambda x: RevApp(x, f, span=e.span))
            if not is_value(f, g):
                return inside(f, lambda x: RevApp(a, x, span=e.span))
    return e, _identity


def _identity(x: Expr) -> Expr:
    return x


def apply_branch(branch: Expr, arg: Expr) -> Expr:
    """Feed ``arg`` to a case or match branch, substituting straight away."""
    if isinstance(branch, Abs):
        return subst_expr(branch.body, branch.var, arg)
    return App(branch, arg)


def _describe(v: Expr) -> str:
    match v:
        case RecordExpr():
            return "a record"
        case Inject(l, _, _):
            return f"the injection {l}"
        case TAbs():
            return "a type abstraction"
        case Abs():
            return "a function"
        case Var(n):
            return f"the channel end {n}"
        case Lit(x):
            return f"the literal {x!r}"
        case Const(n):
            return f"the constant {n}"
    return summarise(v, 40)


def _prim(op: str, args: list[Expr], redex: Expr) -> StepResult:
    vals = []
    for a in args:
        if not isinstance(a, Lit):
            return Stuck(1, f"operator {op} applied to {_describe(a)}", redex)
        vals.append(a.value)
    if op == "not":
        if not isinstance(vals[0], bool):
            return Stuck(1, "not applied to a non-boolean", redex)
        return Reduced(Lit(not vals[0]), "E-Prim", redex)
    x, y = vals
    if op in LOGIC:
        if not (isinstance(x, bool) and isinstance(y, bool)):
            return Stuck(1, f"operator {op} applied to non-booleans", redex)
        return Reduced(Lit(x and y if op == "&&" else x or y), "E-Prim", redex)
    if isinstance(x, bool) or isinstance(y, bool) or not (isinstance(x, int) and isinstance(y, int)):
        return Stuck(1, f"operator {op} applied to non-integers", redex)
    if op in ("/", "%") and y == 0:
        return Stuck(None, "division by zero", redex)
    out = {
        "+": lambda: x + y, "-": lambda: x - y, "*": lambda: x * y,
        "/": lambda: x // y, "%": lambda: x % y,
        "==": lambda: x == y, "/=": lambda: x != y, "<": lambda: x < y,
        ">": lambda: x > y, "<=": lambda: x <= y, ">=": lambda: x >= y,
    }[op]()
    return Reduced(Lit(out), "E-Prim", redex)


def _reduce(e: Expr, g: dict, plug) -> StepResult:
    def done(new, rule):
        return Reduced(plug(new), rule, e)

    def channel(kind, **kw):
        return StuckAtChannel(ChannelOp(kind, e, plug, **kw))

    def end(v) -> Optional[str]:
        return v.name if isinstance(v, Var) else None

    match e:
        case Var(n):
            return done(g[n], "E-Delta")
        case New(t):
            return channel("new", annot=t)
        case App(f, a):
            head, args, _ = spine(e)
            if isinstance(head, Const) and head.name == "fork" and len(args) == 1:
                return channel("fork", payload=a)
            if isinstance(f, Abs):
                return done(subst_expr(f.body, f.var, a), "E-App")
            if isinstance(head, Const):
                if head.name == "send" and len(args) == 2:
                    if end(args[1]) is None:
                        return Stuck(1, f"send on {_describe(args[1])}", e)
                    return channel("send", subject=end(args[1]), payload=args[0])
                if head.name == "receive" and len(args) == 1:
                    if end(args[0]) is None:
                        return Stuck(1, f"receive on {_describe(args[0])}", e)
                    return channel("receive", subject=end(args[0]))
                if (head.name in BINARY and len(args) == 2) or (head.name == "not" and len(args) == 1):
                    r = _prim(head.name, args, e)
                    return done(r.expr, r.rule) if isinstance(r, Reduced) else r
            if isinstance(head, Select) and len(args) == 1:
                if end(args[0]) is None:
                    return Stuck(1, f"select on {_describe(args[0])}", e)
                return channel("select", subject=end(args[0]), label=head.label)
            return Stuck(1, f"cannot apply {_describe(f)}", e)
        case TApp(v, t):
            if isinstance(v, TAbs):
                return done(subst_type_in_expr(v.body, v.var, t), "E-TApp")
            return Stuck(2, f"cannot instantiate {_describe(v)}", e)
        case LetRecord(binds, v, body):
            if isinstance(v, RecordExpr) and {l for l, _ in v.fields} == {l for l, _ in binds}:
                fields = dict(v.fields)
                out = body
                for label, x in binds:
                    out = subst_expr(out, x, fields[label])
                return done(out, "E-Rcd")
            return Stuck(3, f"cannot unpack {_describe(v)}", e)
        case LetUnit(v, body):
            if v == UNIT_VALUE:
                return done(body, "E-Unit")
            return Stuck(3, f"expected unit, found {_describe(v)}", e)
        case Case(v, bs):
            branches = dict(bs)
            if isinstance(v, Inject) and v.label in branches:
                return done(apply_branch(branches[v.label], v.payload), "E-Case")
            return Stuck(4, f"no branch for {_describe(v)}", e)
        case If(c, t, f):
            if isinstance(c, Lit) and isinstance(c.value, bool):
                return done(t if c.value else f, "E-If")
            return Stuck(4, f"condition is {_describe(c)}", e)
        case Match(v, bs):
            if end(v) is None:
                return Stuck(4, f"match on {_describe(v)}", e)
            return channel("match", subject=end(v), branches=bs)
        case RevApp(a, f):
            return done(App(f, a, span=e.span), "E-RevApp")
    raise TypeError(f"unexpected redex {e!r}")


def expr_step(e: Expr, globals_: Optional[dict] = None) -> StepResult:
    """One reduction step of a thread; ``globals_`` maps top-level names to bodies."""
    g = globals_ or {}
    found = _focus(e, g)
    if found is None:
        return IsValue(e)
    redex, plug = found
    return _reduce(redex, g, plug)


# ---------------------------------------------------------------- outcomes


@dataclass(frozen=True)
class Halted:
    results: dict  # thread id -> final value
    steps: int

    @property
    def main(self) -> Expr:
        return self.results[0]


@dataclass(frozen=True)
class Deadlock:
    waiting: dict  # thread id -> description of the blocked operation
    steps: int


@dataclass(frozen=True)
class BudgetExceeded:
    steps: int


@dataclass(frozen=True)
class RunError:
    """A run-time error; ``case`` indexes ERROR_CASES (None: arithmetic fault)."""

    case: Optional[int]
    message: str
    thread: Optional[int]
    steps: int = 0

    @property
    def kind(self) -> str:
        return ERROR_CASES.get(self.case, "arithmetic fault")


Outcome = Union[Halted, Deadlock, BudgetExceeded, RunError]


# ---------------------------------------------------------------- the machine


@dataclass
class Endpoint:
    chan: int
    peer: str
    type: Optional[Type] = None


def agree(a: ChannelOp, b: ChannelOp) -> bool:
    kinds = {a.kind, b.kind}
    if kinds == {"send", "receive"}:
        return True
    if kinds == {"select", "match"}:
        sel, mat = (a, b) if a.kind == "select" else (b, a)
        return sel.label in dict(mat.branches)
    return False


COMM = ("send", "receive", "select", "match")
MAX_SLICE = 4


class Machine:
    """Threads, channel ends and a seeded round-robin scheduler."""

    def __init__(self, program: Optional[CoreProgram] = None, *, seed: int = 0,
                 max_steps: int = 10_000, trace: Optional[Callable[[str], None]] = None,
                 audit_at=(), checker: Optional[Checker] = None):
        self.program = program
        self.globals = {n: d.body for n, d in program.decls.items()} if program else {}
        self.rng = random.Random(seed)
        self.max_steps = max_steps
        self.trace = trace
        self.audit_at = frozenset(audit_at)
        self.checker = checker or (Checker(dict(program.signatures)) if program else Checker())
        self.threads: dict[int, Expr] = {}
        self.expected: dict[int, Optional[Type]] = {}
        self.endpoints: dict[str, Endpoint] = {}
        self.steps = 0
        self.audit_failures: list[tuple[int, str]] = []
        self._next_thread = 0
        self._next_chan = 0
        self._current = 0
        self._slice = 0
        self._cache: dict[int, StepResult] = {}

    # -- loading
    def spawn(self, e: Expr, expected: Optional[Type] = None) -> int:
        tid = self._next_thread
        self._next_thread += 1
        self.threads[tid] = e
        self.expected[tid] = expected
        return tid

    def open_channel(self, t: Optional[Type] = None, names=None) -> tuple[str, str]:
        k = self._next_chan
        self._next_chan += 1
        x, y = names or (f"#c{k}+", f"#c{k}-")
        self.endpoints[x] = Endpoint(k, y, t)
        self.endpoints[y] = Endpoint(k, x, dual(t) if t is not None else None)
        return x, y

    def load(self, p: Process) -> None:
        match p:
            case Thread(e):
                self.spawn(e)
            case Par(l, r):
                self.load(l)
                self.load(r)
            case Nu(x, y, body):
                self.open_channel(None, (x, y))
                self.load(body)
            case _:
                raise TypeError(f"not a process: {p!r}")

    # -- inspection
    def status(self, tid: int) -> StepResult:
        r = self._cache.get(tid)
        if r is None:
            r = expr_step(self.threads[tid], self.globals)
            self._cache[tid] = r
        return r

    def _set(self, tid: int, e: Expr) -> None:
        self.threads[tid] = e
        self._cache.pop(tid, None)

    def blocked(self) -> dict[int, ChannelOp]:
        out = {}
        for tid in self.threads:
            r = self.status(tid)
            if isinstance(r, StuckAtChannel) and r.op.kind in COMM:
                out[tid] = r.op
        return out

    def classify(self) -> Optional[RunError]:
        """The run-time error the current state exhibits, if any."""
        for tid in self.threads:
            r = self.status(tid)
            if isinstance(r, Stuck):
                return RunError(r.case, r.message, tid, self.steps)
        ops = self.blocked()
        by_subject: dict[str, int] = {}
        for tid, op in ops.items():
            if op.subject not in self.endpoints:
                return RunError(1, f"{op.describe()}: not a channel end", tid, self.steps)
            if op.subject in by_subject:
                return RunError(5, f"threads {by_subject[op.subject]} and {tid} both act on "
                                   f"{op.subject}", tid, self.steps)
            by_subject[op.subject] = tid
        for x, t1 in by_subject.items():
            y = self.endpoints[x].peer
            t2 = by_subject.get(y)
            if t2 is not None and t1 < t2 and not agree(ops[t1], ops[t2]):
                return RunError(6, f"{ops[t1].describe()} meets {ops[t2].describe()}", t1,
                                self.steps)
        return None

    def partner(self, tid: int, ops: dict[int, ChannelOp]) -> Optional[int]:
        op = ops.get(tid)
        if op is None:
            return None
        peer = self.endpoints[op.subject].peer
        for other, o in ops.items():
            if other != tid and o.subject == peer:
                return other
        return None

    def enabled(self) -> list[int]:
        ops = self.blocked()
        out = []
        for tid in self.threads:
            r = self.status(tid)
            if isinstance(r, Reduced) or (isinstance(r, StuckAtChannel) and r.op.kind not in COMM):
                out.append(tid)
            elif tid in ops and self.partner(tid, ops) is not None:
                out.append(tid)
        return out

    # -- running
    def _pick(self, ready: list[int]) -> int:
        if self._slice > 0 and self._current in ready:
            self._slice -= 1
            return self._current
        later = [t for t in ready if t > self._current]
        tid = later[0] if later else ready[0]
        self._current = tid
        self._slice = self.rng.randint(1, MAX_SLICE) - 1
        return tid

    def _log(self, rule: str, tid: int, redex: Expr) -> None:
        if self.trace is not None:
            self.trace(f"{rule} t{tid} {summarise(redex)}")

    def _advance_type(self, x: str, kind: str, label: Optional[str] = None) -> None:
        ep = self.endpoints[x]
        if ep.type is None:
            return
        if kind in ("send", "receive"):
            h = head_message(ep.type)
            ep.type = h[2] if h is not None else None
        else:
            c = head_choice(ep.type)
            ep.type = c.branch_map.get(label) if c is not None else None

    def step_thread(self, tid: int) -> None:
        r = self.status(tid)
        if isinstance(r, Reduced):
            self._log(r.rule, tid, r.redex)
            self._set(tid, r.expr)
            return
        op = r.op
        if op.kind == "new":
            x, y = self.open_channel(op.annot)
            self._log("R-New", tid, op.redex)
            self._set(tid, op.plug(pair_expr(Var(x), Var(y))))
        elif op.kind == "fork":
            child = self.spawn(op.payload)
            self._log("R-Fork", tid, op.redex)
            self._set(tid, op.plug(UNIT_VALUE))
            self.expected[child] = None
        else:
            ops = self.blocked()
            other = self.partner(tid, ops)
            a, b = (tid, other) if op.kind in ("send", "select") else (other, tid)
            out, inn = ops[a], ops[b]
            if out.kind == "send":
                self._log("R-Com", a, out.redex)
                self._set(a, out.plug(Var(out.subject)))
                self._set(b, inn.plug(pair_expr(out.payload, Var(inn.subject))))
            else:
                self._log("R-Ch", a, out.redex)
                self._set(a, out.plug(Var(out.subject)))
                branch = dict(inn.branches)[out.label]
                self._set(b, inn.plug(apply_branch(branch, Var(inn.subject))))
            self._advance_type(out.subject, out.kind, out.label)
            self._advance_type(inn.subject, inn.kind, out.label)

    def step(self) -> Optional[Outcome]:
        """One transition; returns an outcome once the run is over."""
        err = self.classify()
        if err is not None:
            return err
        ready = self.enabled()
        if not ready:
            if all(isinstance(self.status(t), IsValue) for t in self.threads):
                return Halted(dict(self.threads), self.steps)
            waiting = {t: self.status(t).op.describe() for t in self.threads
                       if isinstance(self.status(t), StuckAtChannel)}
            return Deadlock(waiting, self.steps)
        if self.steps >= self.max_steps:
            return BudgetExceeded(self.steps)
        self.step_thread(self._pick(ready))
        self.steps += 1
        if self.steps in self.audit_at:
            for msg in self.audit():
                self.audit_failures.append((self.steps, msg))
        return None

    def run(self) -> Outcome:
        while True:
            out = self.step()
            if out is not None:
                return out

    # -- auditing
    def audit(self) -> list[str]:
        """Re-typecheck every thread against the current channel-end types."""
        problems = []
        holders: dict[str, list[int]] = {}
        for tid, e in self.threads.items():
            for x in free_vars(e):
                if x in self.endpoints:
                    holders.setdefault(x, []).append(tid)
        for x, ts in holders.items():
            if len(ts) > 1:
                problems.append(f"channel end {x} held by threads {ts}")
        for tid, e in self.threads.items():
            held = {x: self.endpoints[x].type for x in free_vars(e) if x in self.endpoints}
            if any(t is None for t in held.values()):
                continue
            try:
                expected = self.expected.get(tid)
                if expected is not None:
                    rest = self.checker.check({}, dict(held), e, expected)
                else:
                    t, rest = self.checker.synth({}, dict(held), e)
                    if tid != 0 and not subkind(self.checker.kind_out({}, t), TU):
                        problems.append(f"thread {tid} has linear type {self.checker.show(t)}")
                for x, t in rest.items():
                    if self.checker.linear({}, t):
                        problems.append(f"thread {tid} leaves {x} unused")
            except CheckError as err:
                problems.append(f"thread {tid}: {err.message}")
        return problems


def machine_run(p: Process, seed: int = 0, max_steps: int = 10_000, *,
                program: Optional[CoreProgram] = None, trace=None, audit_at=()) -> Outcome:
    m = Machine(program, seed=seed, max_steps=max_steps, trace=trace, audit_at=audit_at)
    m.load(p)
    return m.run()


def run_program(program: CoreProgram, seed: int = 0, max_steps: int = 10_000, *, trace=None,
                audit_at=()) -> tuple[Outcome, Machine]:
    """Run ``main`` as thread 0; returns the outcome and the final machine."""
    if "main" not in program.decls:
        raise KeyError("program has no main")
    m = Machine(program, seed=seed, max_steps=max_steps, trace=trace, audit_at=audit_at)
    m.spawn(Var("main"), program.decls["main"].type)
    return m.run(), m


def classify_error(state: Union[Machine, Process]) -> Optional[RunError]:
    """Detect the run-time errors of a process state without reducing it."""
    if isinstance(state, Process):
        m = Machine()
        m.load(state)
        state = m
    return state.classify()
