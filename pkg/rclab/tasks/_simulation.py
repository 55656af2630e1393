"""
rclab/tasks/_simulation.py

    program simulation: forward (predict the output of a mini_lang program on an input)
    and backward (infer the input from the printed output); backward chains are affine
    and injective so the input is unique
"""


from typing import Optional

import numpy as np

from rclab import minilang
from rclab.tasks._common import Generated, TraceParts, operand
from rclab.tasks._code import draw_chain, chain_program, chain_expr, op_instrs, apply_chain


_N_OPS = {"easy": 1, "medium": 2, "hard": 3}


def make(difficulty: str, rng: np.random.Generator) -> Optional[Generated] :
    backward = bool(rng.random() < 0.5)
    chain = draw_chain(rng, _N_OPS[difficulty], allow_square=not backward)
    x = int(rng.integers(-9, 10))
    text = chain_program(chain)
    res = minilang.run(minilang.parse(text), [x])
    if res.halt is not minilang.HaltReason.END or len(res.outputs) != 1:
        return None
    y = res.outputs[0]
    meta = {"mode": "backward" if backward else "forward", "chain": chain, "input": x, "output": y}
    if backward:
        prompt = f"Program {text} printed {y}. What input x was read?"
        return Generated(prompt, "numeric", str(x), len(chain), meta)
    prompt = f"Run {text} on input {x}. What does it print?"
    return Generated(prompt, "numeric", str(y), len(chain), meta)


def trace_parts(meta: dict) -> TraceParts :
    chain, x, y = meta["chain"], meta["input"], meta["output"]
    check = f"{chain_expr(operand(x), chain)}={y}"
    if meta["mode"] == "forward":
        lines = [("step", f"READ -> {x}")]
        v = x
        for op, k in chain:
            v = apply_chain(v, [[op, k]])
            lines.append(("step", f"{op_instrs(op, k)} -> {v}"))
        lines.append(("step", f"OUT prints {y}"))
        return TraceParts(lines, check, str(y))
    # undo the chain from the output back to the input
    lines = []
    v = y
    for op, k in reversed(chain):
        match op:
            case "ADD":
                prev = v - k
                lines.append(("step", f"undo ADD {k}: {operand(v)}-{k}={prev}"))
            case "SUB":
                prev = v + k
                lines.append(("step", f"undo SUB {k}: {operand(v)}+{k}={prev}"))
            case _:
                prev = v // k
                lines.append(("step", f"undo MUL {k}: {operand(v)}/{k}={prev}"))
        v = prev
    lines.append(("step", f"input is {x}"))
    return TraceParts(lines, check, str(x))
