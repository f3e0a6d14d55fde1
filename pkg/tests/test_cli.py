import io
import json

import jsonschema
import pytest

from cfst import corpus
from cfst.cli import OUTPUT_SCHEMA, Config, main


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def path(name):
    return str(corpus(name))


def test_check_ok():
    code, out, _ = run("check", path("tree.fst"))
    assert code == 0 and out.strip().endswith("ok")


def test_check_reports_pop():
    code, _, err = run("check", path("bad_stack.fst"))
    lines = [l for l in err.splitlines() if "error" in l]
    assert code == 1 and len(lines) == 1 and "Pop" in lines[0]


def test_check_missing_file():
    code, _, err = run("check", "/nonexistent/file.fst")
    assert code == 2 and "cannot read" in err


def test_parse_error_is_usage():
    code, _, err = run("equiv", "!Int;", "!Int")
    assert code == 2 and "error" in err


def test_run_prints_tree_sum():
    code, out, _ = run("run", path("tree.fst"))
    assert code == 0 and out.strip() == "6"


def test_run_refuses_ill_typed():
    code, out, _ = run("run", path("bad_stack.fst"))
    assert code == 1 and out == ""


def test_run_deadlock():
    code, _, err = run("run", path("deadlock.fst"))
    assert code == 3 and "deadlock" in err and "thread 0" in err and "thread 1" in err


def test_run_trace_goes_to_stderr():
    code, out, err = run("run", path("tree.fst"), "--trace", "--seed", "2")
    assert code == 0 and "R-Com" in err and "R-Ch" in err


def test_equiv_dual_norm():
    assert run("equiv", "Skip;!Int", "!Int")[:2] == (0, "yes\n")
    code, out, _ = run("equiv", "!Int;?Bool", "!Int;?Int")
    assert code == 1 and out.splitlines() == ["no", "trace: !Int ?Bool"]
    assert run("dual", "!Int;?Bool")[:2] == (0, "?Int;!Bool\n")
    assert run("norm", "(Skip;Skip);?Bool")[:2] == (0, "?Bool\n")


def test_dual_of_functional_type_fails():
    code, _, err = run("dual", "Int -> Int")
    assert code == 1 and "session" in err


def test_non_positive_budget_rejected():
    assert run("equiv", "Skip", "Skip", "--budget", "0")[0] == 2
    with pytest.raises(ValueError):
        Config("run", ("x",), max_steps=0)


@pytest.mark.parametrize("argv", [
    ("check", "tree.fst"), ("check", "bad_stack.fst"), ("run", "tree.fst"),
    ("run", "deadlock.fst"), ("equiv", "!Int", "?Int"), ("dual", "!Int;?Bool"),
    ("norm", "rec a . !Int;a"), ("run", "encrypted.fst", "--trace"),
])
def test_json_output_matches_schema(argv):
    argv = tuple(path(a) if a.endswith(".fst") else a for a in argv)
    code, out, err = run(*argv, "--json")
    doc = json.loads(out)
    jsonschema.validate(doc, OUTPUT_SCHEMA)
    assert doc["exit"] == code and doc["ok"] == (code == 0)
    assert json.loads(json.dumps(doc)) == doc
    assert err == ""
