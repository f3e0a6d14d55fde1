"""Command-line entry point: ``cfst check|run|equiv|dual|norm``.

Exit codes: 0 success, 1 type or equivalence failure, 2 usage or I/O
problem, 3 the program ran but did not halt normally.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Optional

from .bpa import Verdict, session_bisim
from .duality import DualityError, dual, normalise
from .elaborate import ElabError, Elaboration, load, load_type
from .equivalence import DEFAULT_BUDGET, Equivalence, EquivalenceUndecided, is_session_type
from .kinding import KindError, kind_synth
from .parser import ParseError
from .printer import show_expr, show_type, tidy
from .runtime import BudgetExceeded, Deadlock, Halted, RunError, run_program
from .typechecker import DIAGNOSTIC_SCHEMA, Diagnostic, check_program

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

OUTPUT_SCHEMA = {
    "type": "object",
    "required": ["command", "ok", "exit", "diagnostics"],
    "properties": {
        "command": {"enum": ["check", "run", "equiv", "dual", "norm"]},
        "ok": {"type": "boolean"},
        "exit": {"enum": [EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME]},
        "diagnostics": {"type": "array", "items": DIAGNOSTIC_SCHEMA},
        "result": {"type": ["string", "null"]},
        "outcome": {"type": "object"},
        "trace": {"type": "array", "items": {"type": "string"}},
    },
}


@dataclass
class Config:
    command: str
    paths: tuple = ()
    budget: int = DEFAULT_BUDGET
    depth: int = 12
    seed: int = 0
    max_steps: int = 10_000
    json: bool = False
    debug: bool = False
    trace: bool = False

    def __post_init__(self):
        if self.budget <= 0 or self.depth <= 0 or self.max_steps <= 0:
            raise ValueError("budgets and depths must be positive")


class Report:
    """Collects what one command prints, in text or JSON."""

    def __init__(self, config: Config, filename: str = ""):
        self.config = config
        self.filename = filename
        self.diagnostics: list[Diagnostic] = []
        self.lines: list[str] = []
        self.trace: list[str] = []
        self.result: Optional[str] = None
        self.outcome: Optional[dict] = None

    def error(self, rule: str, message: str, span=None) -> None:
        self.diagnostics.append(Diagnostic("error", span, rule, message))

    def finish(self, code: int, out=None, err=None) -> int:
        out = out or sys.stdout
        err = err or sys.stderr
        if self.config.json:
            doc = {"command": self.config.command, "ok": code == EXIT_OK, "exit": code,
                   "diagnostics": [d.as_dict() for d in self.diagnostics],
                   "result": self.result}
            if self.outcome is not None:
                doc["outcome"] = self.outcome
            if self.config.trace:
                doc["trace"] = self.trace
            print(json.dumps(doc), file=out)
            return code
        for line in self.trace:
            print(line, file=err)
        for d in self.diagnostics:
            print(d.text(self.filename), file=err)
        for line in self.lines:
            print(line, file=out)
        return code


def _load_file(path: str, rep: Report) -> Optional[Elaboration]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        rep.error("io", f"cannot read {path}: {err.strerror or err}")
        return None
    try:
        return load(text)
    except ParseError as err:
        msg = err.message
        if err.expected:
            msg += " (expected " + ", ".join(err.expected) + ")"
        rep.error("parse", msg, (err.line, err.col))
    except ElabError as err:
        rep.error("elaborate", err.message, err.span)
    return False


def _typecheck(path: str, rep: Report) -> tuple[int, Optional[Elaboration]]:
    el = _load_file(path, rep)
    if el is None:
        return EXIT_USAGE, None
    if el is False:
        return EXIT_FAIL, None
    diags = check_program(el.program, budget=rep.config.budget, debug=rep.config.debug,
                          type_names=el.type_names)
    rep.diagnostics.extend(diags)
    return (EXIT_FAIL if any(d.severity == "error" for d in diags) else EXIT_OK), el


def cmd_check(config: Config, out=None, err=None) -> int:
    rep = Report(config, config.paths[0])
    code, _ = _typecheck(config.paths[0], rep)
    if code == EXIT_OK and not config.json:
        rep.lines.append(f"{config.paths[0]}: ok")
    return rep.finish(code, out, err)


def _outcome_dict(o) -> dict:
    match o:
        case Halted(results, steps):
            return {"kind": "halted", "steps": steps,
                    "results": {str(t): show_expr(v) for t, v in results.items()}}
        case Deadlock(waiting, steps):
            return {"kind": "deadlock", "steps": steps,
                    "waiting": {str(t): w for t, w in waiting.items()}}
        case BudgetExceeded(steps):
            return {"kind": "budget", "steps": steps}
        case RunError(case, message, thread, steps):
            return {"kind": "error", "case": case, "message": message, "thread": thread,
                    "steps": steps}
    raise TypeError(o)


def cmd_run(config: Config, out=None, err=None) -> int:
    path = config.paths[0]
    rep = Report(config, path)
    code, el = _typecheck(path, rep)
    if code != EXIT_OK:
        return rep.finish(code, out, err)
    if "main" not in el.program.decls:
        rep.error("run", "program has no main")
        return rep.finish(EXIT_FAIL, out, err)
    trace = rep.trace.append if config.trace else None
    outcome, _ = run_program(el.program, config.seed, config.max_steps, trace=trace)
    rep.outcome = _outcome_dict(outcome)
    match outcome:
        case Halted():
            rep.result = show_expr(outcome.main)
            rep.lines.append(rep.result)
            return rep.finish(EXIT_OK, out, err)
        case Deadlock(waiting, steps):
            rep.error("deadlock", f"deadlock after {steps} steps; waiting: "
                      + "; ".join(f"thread {t}: {w}" for t, w in waiting.items()))
        case BudgetExceeded(steps):
            rep.error("budget", f"no result within {steps} steps")
        case RunError():
            rep.error("runtime", f"run-time error ({outcome.kind}): {outcome.message}")
    return rep.finish(EXIT_RUNTIME, out, err)


def _bad_input(rep: Report) -> int:
    """Unparsable arguments are usage errors; ill-formed types are type failures."""
    return EXIT_USAGE if any(d.rule == "parse" for d in rep.diagnostics) else EXIT_FAIL


def _read_type(text: str, rep: Report, session: bool = False):
    try:
        t = load_type(text)
        k = kind_synth({}, t)
    except ParseError as err:
        rep.error("parse", err.message, (err.line, err.col))
        return None
    except ElabError as err:
        rep.error("elaborate", err.message)
        return None
    except KindError as err:
        rep.error("kinding", f"ill-formed type {text}: {err}")
        return None
    if session and not is_session_type({}, t):
        rep.error("kinding", f"{text} is not a session type (kind {k})")
        return None
    return t


def cmd_equiv(config: Config, out=None, err=None) -> int:
    rep = Report(config)
    t, u = (_read_type(x, rep) for x in config.paths)
    if t is None or u is None:
        return rep.finish(_bad_input(rep), out, err)
    eq = Equivalence(budget=config.budget)
    try:
        same = eq.equiv(t, u)
    except EquivalenceUndecided:
        rep.result = "unknown"
        rep.lines.append("unknown")
        return rep.finish(EXIT_FAIL, out, err)
    rep.result = "yes" if same else "no"
    rep.lines.append(rep.result)
    if not same:
        trace = eq.last_trace
        if trace is None and is_session_type({}, t) and is_session_type({}, u):
            r = session_bisim(t, u, config.budget)
            trace = r.trace if r.verdict is Verdict.NOT_EQUIVALENT else None
        if trace is not None:
            shown = " ".join(str(l) for l in trace)
            rep.lines.append("trace: " + shown)
            rep.result += " " + shown
    return rep.finish(EXIT_OK if same else EXIT_FAIL, out, err)


def cmd_dual(config: Config, out=None, err=None) -> int:
    rep = Report(config)
    t = _read_type(config.paths[0], rep, session=True)
    if t is None:
        return rep.finish(_bad_input(rep), out, err)
    try:
        rep.result = show_type(tidy(dual(t)))
    except DualityError as e:
        rep.error("duality", str(e))
        return rep.finish(EXIT_FAIL, out, err)
    rep.lines.append(rep.result)
    return rep.finish(EXIT_OK, out, err)


def cmd_norm(config: Config, out=None, err=None) -> int:
    rep = Report(config)
    t = _read_type(config.paths[0], rep)
    if t is None:
        return rep.finish(_bad_input(rep), out, err)
    rep.result = show_type(tidy(normalise(t)))
    rep.lines.append(rep.result)
    return rep.finish(EXIT_OK, out, err)


COMMANDS = {"check": cmd_check, "run": cmd_run, "equiv": cmd_equiv, "dual": cmd_dual,
            "norm": cmd_norm}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cfst", description="Typecheck and run linear "
                                 "functional programs with context-free session types.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                        help="equivalence search budget (expansion nodes)")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check", parents=[common], help="typecheck a file")
    p.add_argument("file")
    p.add_argument("--debug", action="store_true", help="assert checker invariants")
    p = sub.add_parser("run", parents=[common], help="typecheck and run main")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--trace", action="store_true", help="print one line per reduction")
    p = sub.add_parser("equiv", parents=[common], help="are two types equivalent?")
    p.add_argument("t")
    p.add_argument("u")
    p = sub.add_parser("dual", parents=[common], help="dual of a session type")
    p.add_argument("t")
    p = sub.add_parser("norm", parents=[common], help="normal form of a type")
    p.add_argument("t")
    return ap


def parse_config(argv) -> Config:
    ns = build_parser().parse_args(argv)
    if ns.command in ("check", "run"):
        paths = (ns.file,)
    elif ns.command == "equiv":
        paths = (ns.t, ns.u)
    else:
        paths = (ns.t,)
    return Config(ns.command, paths, budget=ns.budget, json=ns.json,
                  seed=getattr(ns, "seed", 0), max_steps=getattr(ns, "max_steps", 10_000),
                  debug=getattr(ns, "debug", False), trace=getattr(ns, "trace", False))


def main(argv=None, out=None, err=None) -> int:
    try:
        config = parse_config(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    except ValueError as e:
        print(f"cfst: {e}", file=err or sys.stderr)
        return EXIT_USAGE
    return COMMANDS[config.command](config, out, err)


if __name__ == "__main__":
    sys.exit(main())
