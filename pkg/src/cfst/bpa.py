"""Translation of session types into Basic Process Algebra and a bisimilarity checker.

A session type becomes a BPA term over actions (messages, choice labels,
polymorphic variables) with one process variable per μ-subterm.  The
checker works on a Greibach-style grammar where every process is a word of
symbols and each symbol has at most one successor per label.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .lts import Label, parting_label, PolyVar, choice_label, message_label
from .syntax import Choice, Message, Rec, Seq, Skip, TVar, Type, children, free_tvars, map_children


class VacuousRecursion(ValueError):
    """A μ-type whose variable does not occur in its body."""


class NonDeterministic(ValueError):
    pass


# ---------------------------------------------------------------- terms


class BpaTerm:
    pass


@dataclass(frozen=True)
class Epsilon(BpaTerm):
    def __str__(self):
        return "ε"


@dataclass(frozen=True)
class Action(BpaTerm):
    label: Label

    def __str__(self):
        return str(self.label)


@dataclass(frozen=True)
class ProcVar(BpaTerm):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Sum(BpaTerm):
    terms: tuple

    def __str__(self):
        return "(" + " + ".join(str(t) for t in self.terms) + ")"


@dataclass(frozen=True)
class Cat(BpaTerm):
    left: BpaTerm
    right: BpaTerm

    def __str__(self):
        l = str(self.left)
        r = str(self.right)
        return f"{l}·{r}"


EPS = Epsilon()


def dot(p: BpaTerm, q: BpaTerm) -> BpaTerm:
    """Sequential composition that absorbs ε on either side."""
    if isinstance(p, Epsilon):
        return q
    if isinstance(q, Epsilon):
        return p
    return Cat(p, q)


def flatten(p: BpaTerm) -> list[BpaTerm]:
    """The factors of a sequential composition, left to right."""
    match p:
        case Cat(l, r):
            return flatten(l) + flatten(r)
        case Epsilon():
            return []
    return [p]


@dataclass
class BpaSystem:
    equations: dict[str, BpaTerm] = field(default_factory=dict)
    origin: dict[str, Type] = field(default_factory=dict)

    def __str__(self):
        return "\n".join(f"{x} ≜ {p}" for x, p in self.equations.items())


# ---------------------------------------------------------------- translation


def mu_subterms(t: Type) -> list[Rec]:
    """Every μ-subterm of ``t``, innermost first."""
    out: list[Rec] = []

    def go(t: Type):
        for c in children(t):
            go(c)
        if isinstance(t, Rec):
            out.append(t)

    go(t)
    return out


def check_recursion(t: Type) -> None:
    """Reject μ-types whose bound variable is unused."""
    for r in mu_subterms(t):
        if r.var not in free_tvars(r.body):
            raise VacuousRecursion(f"recursion variable {r.var} does not occur in {r}")


def drop_vacuous_rec(t: Type) -> Type:
    """Remove every μ whose variable its body never mentions."""
    t = map_children(t, drop_vacuous_rec)
    if isinstance(t, Rec) and t.var not in free_tvars(t.body):
        return t.body
    return t


def assign_vars(subterms: list[Rec], start: int = 1) -> dict[str, str]:
    return {r.var: f"X{i}" for i, r in enumerate(subterms, start)}


def translate(t: Type, vars: dict[str, str]) -> BpaTerm:
    match t:
        case Skip():
            return EPS
        case Message(pol, p):
            return Action(message_label(pol, p))
        case Choice(view, bs):
            return Sum(tuple(dot(Action(choice_label(view, l)), translate(b, vars)) for l, b in bs))
        case Seq(l, r):
            return dot(translate(l, vars), translate(r, vars))
        case TVar(n):
            if n in vars:
                return ProcVar(vars[n])
            return Action(PolyVar(n))
        case Rec(v, _, _):
            return ProcVar(vars[v])
    raise ValueError(f"cannot translate non-session type {t}")


def unravel(t: Type, sigma: Optional[dict] = None) -> Type:
    """Unfold μ and drop Skip prefixes until a message, choice or variable is exposed.

    Unfoldings are recorded in ``sigma`` (when given) rather than applied, so the
    result mentions recursion variables, read through ``sigma``.
    """
    if sigma is None:
        sigma = {}
    match t:
        case Seq(l, r):
            ul = unravel(l, sigma)
            if isinstance(ul, Skip):
                return unravel(r, sigma)
            return Seq(ul, r)
        case Rec(v, _, b):
            sigma[v] = t
            return unravel(b, sigma)
    return t


def equations(t: Type, vars: Optional[dict[str, str]] = None) -> BpaSystem:
    subs = mu_subterms(t)
    if vars is None:
        vars = assign_vars(subs)
    g = BpaSystem()
    for r in subs:
        x = vars[r.var]
        g.equations[x] = translate(unravel(r.body), vars)
        g.origin[x] = r
    return g


def joint_system(types: list[Type]) -> tuple[BpaSystem, list[BpaTerm]]:
    """One equation system covering several types whose binders are pairwise distinct."""
    subs: list[Rec] = []
    for t in types:
        check_recursion(t)
        subs += mu_subterms(t)
    if len({r.var for r in subs}) != len(subs):
        raise ValueError("binders must be renamed apart before translation")
    vars = assign_vars(subs)
    g = BpaSystem()
    for r in subs:
        x = vars[r.var]
        g.equations[x] = translate(unravel(r.body), vars)
        g.origin[x] = r
    return g, [translate(t, vars) for t in types]


def is_guarded(g: BpaSystem) -> bool:
    """Every process variable in a right-hand side sits behind an action."""

    def guarded(p: BpaTerm) -> bool:
        match p:
            case Sum(ts):
                return all(guarded(x) for x in ts)
            case Cat(l, _):
                return guarded(l)
            case ProcVar():
                return False
            case Epsilon():
                return False
        return True

    return all(guarded(p) for p in g.equations.values())


# ---------------------------------------------------------------- LTS


def bpa_step(g: BpaSystem, p: BpaTerm) -> set[tuple[Label, BpaTerm]]:
    return _step(g, p, frozenset())


def _step(g: BpaSystem, p: BpaTerm, unfolding: frozenset) -> set:
    match p:
        case Epsilon():
            return set()
        case Action(a):
            return {(a, EPS)}
        case Sum(ts):
            out = set()
            for x in ts:
                out |= _step(g, x, unfolding)
            return out
        case Cat(l, r):
            out = set()
            for a, nl in _step(g, l, unfolding):
                out.add((a, r if isinstance(nl, Epsilon) else Cat(nl, r)))
            return out
        case ProcVar(x):
            if x in unfolding:
                raise ValueError(f"unguarded recursion through {x}")
            return _step(g, g.equations[x], unfolding | {x})
    raise TypeError(f"not a BPA term: {p!r}")


# ---------------------------------------------------------------- grammar

INF = float("inf")


class Grammar:
    """Deterministic Greibach form of a BPA system: words of symbols, one successor per label."""

    def __init__(self, g: BpaSystem):
        self.system = g
        self.names: list[str] = []
        self._rules: list[Optional[dict]] = []
        self._pending: dict[int, object] = {}
        self._actions: dict[Label, int] = {}
        self._vars: dict[str, int] = {}
        self._sums: dict[Sum, int] = {}
        self._computing: set[int] = set()
        self.norm: list[float] = []
        self.min_label: list[Optional[Label]] = []

    # symbols
    def _new(self, name: str, source) -> int:
        self.names.append(name)
        self._rules.append(None)
        self._pending[len(self.names) - 1] = source
        return len(self.names) - 1

    def word(self, p: BpaTerm) -> tuple:
        match p:
            case Epsilon():
                return ()
            case Action(a):
                if a not in self._actions:
                    self._actions[a] = self._new(str(a), p)
                return (self._actions[a],)
            case ProcVar(x):
                if x not in self._vars:
                    if x not in self.system.equations:
                        raise ValueError(f"undefined process variable {x}")
                    self._vars[x] = self._new(x, p)
                return (self._vars[x],)
            case Sum():
                if p not in self._sums:
                    self._sums[p] = self._new(f"S{len(self._sums) + 1}", p)
                return (self._sums[p],)
            case Cat(l, r):
                return self.word(l) + self.word(r)
        raise TypeError(f"not a BPA term: {p!r}")

    def rules(self, s: int) -> dict:
        r = self._rules[s]
        if r is not None:
            return r
        if s in self._computing:
            raise ValueError(f"unguarded recursion through {self.names[s]}")
        self._computing.add(s)
        src = self._pending[s]
        match src:
            case Action(a):
                r = {a: ()}
            case ProcVar(x):
                r = self.step(self.word(self.system.equations[x]))
            case Sum(ts):
                r = {}
                for t in ts:
                    for a, w in self.step(self.word(t)).items():
                        if a in r:
                            raise NonDeterministic(f"label {a} offered twice")
                        r[a] = w
        self._computing.discard(s)
        self._rules[s] = r
        return r

    def step(self, w: tuple) -> dict:
        if not w:
            return {}
        rest = w[1:]
        return {a: tw + rest for a, tw in self.rules(w[0]).items()}

    def close(self) -> None:
        """Compute rules for every reachable symbol, then norms."""
        i = 0
        while i < len(self.names):  # rules() may add symbols as it goes
            self.rules(i)
            i += 1
        self._norms()

    def _norms(self) -> None:
        n = len(self.names)
        norm = [INF] * n
        best: list[Optional[Label]] = [None] * n
        changed = True
        while changed:
            changed = False
            for s in range(n):
                for a, w in self.rules(s).items():
                    c = 1 + sum(norm[x] for x in w)
                    if c < norm[s]:
                        norm[s], best[s] = c, a
                        changed = True
        self.norm, self.min_label = norm, best

    def word_norm(self, w: tuple) -> float:
        return sum(self.norm[x] for x in w)

    def prune(self, w: tuple) -> tuple:
        """Drop everything after the first unnormed symbol: it is never reached."""
        for i, x in enumerate(w):
            if self.norm[x] == INF:
                return w[: i + 1]
        return w

    def min_path(self, s: int) -> list[Label]:
        path, w = [], (s,)
        while w:
            a = self.min_label[w[0]]
            path.append(a)
            w = self.step(w)[a]
        return path

    def run(self, w: tuple, path) -> Optional[tuple]:
        for a in path:
            nxt = self.step(w)
            if a not in nxt:
                return None
            w = self.prune(nxt[a])
        return w

    def show(self, w: tuple) -> str:
        return "·".join(self.names[x] for x in w) or "ε"


# ---------------------------------------------------------------- bisimilarity


class Verdict(Enum):
    EQUIVALENT = "equivalent"
    NOT_EQUIVALENT = "not equivalent"
    UNKNOWN = "unknown"


@dataclass
class BisimResult:
    verdict: Verdict
    trace: Optional[list[Label]] = None
    nodes: int = 0

    def __bool__(self):
        return self.verdict is Verdict.EQUIVALENT


class _Rewriter:
    """Rewrite words with assumed equations, always towards shortlex-smaller words."""

    def __init__(self, grammar: Grammar):
        self.grammar = grammar
        self.rules: dict[tuple, tuple] = {}
        self.by_head: dict[int, list[tuple]] = {}

    def add(self, u: tuple, v: tuple) -> None:
        if (len(u), u) < (len(v), v):
            u, v = v, u
        if u == v or u in self.rules:
            return
        self.rules[u] = v
        self.by_head.setdefault(u[0], []).append(u)

    def normal(self, w: tuple, limit: int = 200) -> tuple:
        for _ in range(limit):
            hit = False
            for i, x in enumerate(w):
                for lhs in self.by_head.get(x, ()):
                    if w[i : i + len(lhs)] == lhs:
                        w = self.grammar.prune(w[:i] + self.rules[lhs] + w[i + len(lhs) :])
                        hit = True
                        break
                if hit:
                    break
            if not hit:
                return w
        return w


def _prove(gr: Grammar, p: tuple, q: tuple, budget: int) -> tuple[Optional[bool], int]:
    """Search for a bisimulation up to congruence; None means the budget ran out.

    Only expansion steps add to the assumption basis. Each goal remembers the
    goals it was decomposed from since the last expansion, and a decomposition
    that would revisit one of them is replaced by an expansion.
    """
    rw = _Rewriter(gr)
    stack = [(p, q, frozenset())]
    nodes = 0
    while stack:
        a, b, chain = stack.pop()
        a, b = rw.normal(gr.prune(a)), rw.normal(gr.prune(b))
        if a == b:
            continue
        nodes += 1
        if nodes > budget:
            return None, nodes
        if gr.word_norm(a) != gr.word_norm(b):
            return False, nodes
        if a and b and (len(a) > 1 or len(b) > 1):
            sub = _decompose(gr, a, b)
            if sub is False:
                return False, nodes
            if sub is not None:
                here = chain | {frozenset((a, b))}
                goals = [(rw.normal(gr.prune(u)), rw.normal(gr.prune(v))) for u, v in sub]
                if not any(frozenset(g) in here for g in goals):
                    stack.extend((u, v, here) for u, v in goals)
                    continue
        sa, sb = gr.step(a), gr.step(b)
        if sa.keys() != sb.keys():
            return False, nodes
        rw.add(a, b)
        for lab in sa:
            stack.append((sa[lab], sb[lab], frozenset()))
    return True, nodes


def _decompose(gr: Grammar, a: tuple, b: tuple):
    """Split ``X·α ≈ Y·β`` into ``Y ≈ X·γ`` and ``α ≈ γ·β`` when heads and tails allow it."""
    if gr.norm[a[0]] > gr.norm[b[0]]:
        a, b = b, a
    x, alpha, y, beta = a[0], a[1:], b[0], b[1:]
    if gr.norm[x] == INF or gr.norm[y] == INF:
        return None
    if x == y:
        return [(alpha, beta)]
    # With an unnormed tail the split is still sound, just no longer complete;
    # a refutation then needs a witness trace, so the cost is an Unknown at worst.
    gamma = gr.run((y,), gr.min_path(x))
    if gamma is None:
        return False
    return [((y,), (x,) + gamma), (alpha, gamma + beta)]


def _witness(gr: Grammar, p: tuple, q: tuple, budget: int) -> Optional[list[Label]]:
    """Breadth-first search for a trace whose last label only one of the words can take."""
    queue = deque([(gr.prune(p), gr.prune(q), ())])
    seen = set()
    while queue and len(seen) < budget:
        a, b, trace = queue.popleft()
        if (a, b) in seen or a == b:
            continue
        seen.add((a, b))
        na, nb = gr.word_norm(a), gr.word_norm(b)
        if na != nb:
            return list(trace) + _norm_gap(gr, a, b)
        sa, sb = gr.step(a), gr.step(b)
        if sa.keys() != sb.keys():
            return list(trace) + [parting_label(sa, sb)]
        for lab in sa:
            queue.append((gr.prune(sa[lab]), gr.prune(sb[lab]), trace + (lab,)))
    return None


def _norm_gap(gr: Grammar, a: tuple, b: tuple) -> list[Label]:
    """Follow the shorter side's quickest way out until the two sides part."""
    if gr.word_norm(a) > gr.word_norm(b):
        a, b = b, a
    trace: list[Label] = []
    while True:
        sa, sb = gr.step(a), gr.step(b)
        if sa.keys() != sb.keys():
            return trace + [parting_label(sa, sb)]
        lab = gr.min_label[a[0]]
        trace.append(lab)
        a, b = gr.prune(sa[lab]), gr.prune(sb[lab])


def check_trace(g: BpaSystem, p: BpaTerm, q: BpaTerm, trace: list[Label]) -> bool:
    """Can both terms follow ``trace`` except for its last label, which only one can take?"""
    if not trace:
        return False
    for lab in trace[:-1]:
        sp = {a: x for a, x in bpa_step(g, p)}
        sq = {a: x for a, x in bpa_step(g, q)}
        if lab not in sp or lab not in sq:
            return False
        p, q = sp[lab], sq[lab]
    left = {a for a, _ in bpa_step(g, p)}
    right = {a for a, _ in bpa_step(g, q)}
    return (trace[-1] in left) != (trace[-1] in right)


def bpa_bisim(g: BpaSystem, p: BpaTerm, q: BpaTerm, budget: int = 10_000) -> BisimResult:
    """Three-valued bisimilarity: definite answers are always right."""
    gr = Grammar(g)
    wp, wq = gr.word(p), gr.word(q)
    gr.close()
    ok, nodes = _prove(gr, wp, wq, budget)
    if ok:
        return BisimResult(Verdict.EQUIVALENT, nodes=nodes)
    trace = _witness(gr, wp, wq, budget)
    if trace is not None:
        return BisimResult(Verdict.NOT_EQUIVALENT, trace, nodes)
    return BisimResult(Verdict.UNKNOWN, nodes=nodes)


def session_bisim(t: Type, u: Type, budget: int = 10_000) -> BisimResult:
    """Bisimilarity of two session types via their joint BPA translation."""
    from .syntax import rename_binders

    t, u = rename_binders(t), rename_binders(u)
    g, (p, q) = joint_system([t, u])
    return bpa_bisim(g, p, q, budget)
