"""Independent reference computations the runtime is compared against."""

from cfst.parser import parse
from cfst.syntax import App, Con, Lit


def _spine(e):
    args = []
    while isinstance(e, App):
        args.append(e.arg)
        e = e.fun
    return e, args[::-1]


def fold_tree(e) -> int:
    """Sum of the Int fields of a surface ``Leaf``/``Node l x r`` literal."""
    head, args = _spine(e)
    assert isinstance(head, Con)
    if head.name == "Leaf":
        return 0
    left, x, right = args
    assert isinstance(x, Lit)
    return fold_tree(left) + x.value + fold_tree(right)


def tree_sum_from_source(text: str, name: str = "aTree") -> int:
    [b] = [b for b in parse(text).bindings if b.name == name]
    return fold_tree(b.body)
