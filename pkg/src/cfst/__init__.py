"""Typechecker and interpreter for linear System F with context-free session types."""

from importlib.resources import files

__version__ = "0.1.0"


def corpus(name: str):
    """Path-like handle to one of the bundled example programs."""
    return files("cfst") / "corpus" / name


def corpus_names() -> list[str]:
    return sorted(p.name for p in (files("cfst") / "corpus").iterdir() if p.name.endswith(".fst"))
