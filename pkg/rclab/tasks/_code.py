"""
rclab/tasks/_code.py

    write-a-program tasks: a target function described in prose plus three unit tests,
    the answer is a mini_lang program (READ, a chain of 1 / 2 / 3 arithmetic operations, OUT)
"""


from typing import List, Tuple, Optional, Sequence

import numpy as np

from rclab import minilang
from rclab.tasks._common import Generated, TraceParts, operand


_PHRASE = {"ADD": "add {k}", "SUB": "subtract {k}", "MUL": "multiply by {k}", "SQ": "square it"}
_SYMBOL = {"ADD": "+", "SUB": "-", "MUL": "*"}
_N_OPS = {"easy": 1, "medium": 2, "hard": 3}


def draw_chain(rng: np.random.Generator, n_ops: int, allow_square: bool = False) -> List[List] :
    """ random operation chain, e.g. [["MUL", 3], ["ADD", 2]] """
    names = ["ADD", "SUB", "MUL"] + (["SQ"] if allow_square else [])
    chain = []
    for _ in range(n_ops):
        op = names[int(rng.integers(len(names)))]
        if op == "MUL":
            chain.append([op, int(rng.integers(2, 6))])
        elif op == "SQ":
            chain.append([op, None])
        else:
            chain.append([op, int(rng.integers(1, 10))])
    return chain


def op_instrs(op: str, k: Optional[int]) -> str :
    """ mini_lang text for one chain operation """
    if op == "SQ":
        return "DUP; MUL"
    return f"PUSH {k}; {op}"


def chain_program(chain: Sequence) -> str :
    return "; ".join(["READ"] + [op_instrs(op, k) for op, k in chain] + ["OUT"])


def chain_expr(start: str, chain: Sequence) -> str :
    """ infix expression equal to applying the chain left to right """
    expr, additive = start, False
    for op, k in chain:
        if op in ("MUL", "SQ") and additive:
            expr = f"({expr})"
        if op == "SQ":
            expr = f"{expr}*{expr}"
            additive = False
        elif op == "MUL":
            expr = f"{expr}*{k}"
            additive = False
        else:
            expr = f"{expr}{_SYMBOL[op]}{k}"
            additive = True
    return expr


def apply_chain(x: int, chain: Sequence) -> int :
    for op, k in chain:
        match op:
            case "ADD":
                x += k
            case "SUB":
                x -= k
            case "MUL":
                x *= k
            case "SQ":
                x *= x
    return x


def make(difficulty: str, rng: np.random.Generator) -> Optional[Generated] :
    chain = draw_chain(rng, _N_OPS[difficulty])
    xs = sorted(int(v) for v in rng.choice(np.arange(-9, 10), size=3, replace=False))
    prog = minilang.parse(chain_program(chain))
    tests = []
    for x in xs:
        res = minilang.run(prog, [x])
        tests.append(minilang.TestCase((x,), tuple(res.outputs)).to_json())
    phrases = ", ".join(_PHRASE[op].format(k=k) for op, k in chain)
    shown = ", ".join(f"{t['inputs'][0]}->{t['outputs'][0]}" for t in tests)
    prompt = f"Program: read x, {phrases}, output it. Tests: {shown}"
    return Generated(prompt, "program_tests", tests, len(chain), {"chain": chain, "tests": tests})


def trace_parts(meta: dict) -> TraceParts :
    chain = meta["chain"]
    lines = [("step", "READ x")]
    for i in range(len(chain)):
        op, k = chain[i]
        lines.append(("step", f"{op_instrs(op, k)} -> {chain_expr('x', chain[:i + 1])}"))
    lines.append(("step", "OUT the result"))
    t = meta["tests"][0]
    check = f"{chain_expr(operand(t['inputs'][0]), chain)}={t['outputs'][0]}"
    return TraceParts(lines, check, chain_program(chain))
