"""
rclab/tasks/_math.py

    integer and rational arithmetic expressions

    easy: 1 operation, medium: 2-3 operations, hard: 4-5 operations over fractions with
    nested parentheses
"""


from typing import Optional, List, Tuple, Any
from fractions import Fraction

import numpy as np

from rclab.tasks._common import Generated, TraceParts, fmt_num, operand


_OPS = ("+", "-", "*")
_PREC = {"+": 1, "-": 1, "*": 2}
_MAX_ABS = 10_000
_MAX_DEN = 1000


def _apply(op: str, a: Fraction, b: Fraction) -> Fraction :
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    return a * b


def _leaf(rng: np.random.Generator, difficulty: str) -> str :
    match difficulty:
        case "medium":
            return str(int(rng.integers(1, 21)))
        case "hard":
            if rng.random() < 0.5:
                den = int(rng.integers(2, 7))
                num = int(rng.integers(1, 2 * den))
                if num % den != 0:
                    return fmt_num(Fraction(num, den))
            return str(int(rng.integers(1, 10)))
    return str(int(rng.integers(1, 100)))


def _tree(rng: np.random.Generator, n_ops: int, difficulty: str) -> Any :
    if n_ops == 0:
        return _leaf(rng, difficulty)
    k = int(rng.integers(0, n_ops))
    return [str(_OPS[int(rng.integers(len(_OPS)))]), _tree(rng, k, difficulty), _tree(rng, n_ops - 1 - k, difficulty)]


def _render(node: Any, parent: Optional[str] = None, right: bool = False) -> str :
    if isinstance(node, str):
        return f"({node})" if "/" in node else node
    op, l, r = node
    s = _render(l, op, False) + op + _render(r, op, True)
    if parent is not None and (_PREC[op] < _PREC[parent] or (right and parent == "-" and _PREC[op] == 1)):
        s = f"({s})"
    return s


def _evaluate(node: Any, steps: List[str]) -> Optional[Fraction] :
    """ post-order evaluation, appends one step per operation, None if values get out of hand """
    if isinstance(node, str):
        return Fraction(node)
    op, l, r = node
    a = _evaluate(l, steps)
    b = _evaluate(r, steps)
    if a is None or b is None:
        return None
    v = _apply(op, a, b)
    if abs(v) > _MAX_ABS or v.denominator > _MAX_DEN:
        return None
    steps.append(f"{operand(a)}{op}{operand(b)}={fmt_num(v)}")
    return v


def _n_ops(rng: np.random.Generator, difficulty: str) -> int :
    match difficulty:
        case "easy":
            return 1
        case "medium":
            return int(rng.integers(2, 4))
    return int(rng.integers(4, 6))


def make(difficulty: str, rng: np.random.Generator) -> Optional[Generated] :
    n_ops = _n_ops(rng, difficulty)
    tree = _tree(rng, n_ops, difficulty)
    if difficulty == "hard" and "/" not in str(tree):
        return None
    steps: List[str] = []
    value = _evaluate(tree, steps)
    if value is None:
        return None
    expr = _render(tree)
    return Generated(prompt=f"Compute {expr}.",
                     kind="numeric",
                     payload=fmt_num(value),
                     complexity=n_ops,
                     meta={"expr": expr, "tree": tree})


def _check(tree: Any) -> str :
    op, l, r = tree
    a = _evaluate(l, [])
    b = _evaluate(r, [])
    v = _apply(op, a, b)
    if op == "+":
        return f"{operand(v)}-{operand(b)}={fmt_num(a)}"
    if op == "-":
        return f"{operand(v)}+{operand(b)}={fmt_num(a)}"
    if b != 0:
        return f"{operand(v)}/{operand(b)}={fmt_num(a)}"
    return f"{operand(a)}*0=0"


def trace_parts(meta: dict) -> TraceParts :
    tree = meta["tree"]
    steps: List[str] = []
    value = _evaluate(tree, steps)
    lines = [("step", s) for s in steps]
    lines.append(("step", f"result is {fmt_num(value)}"))
    return TraceParts(lines, _check(tree), fmt_num(value))
