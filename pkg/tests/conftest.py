import pytest

from cfst import corpus
from cfst.elaborate import load, load_type


def T(text: str):
    """An elaborated, freshly renamed type from surface syntax."""
    return load_type(text)


def corpus_text(name: str) -> str:
    return corpus(name).read_text(encoding="utf-8")


def corpus_program(name: str):
    return load(corpus_text(name))


@pytest.fixture
def typ():
    return T


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
