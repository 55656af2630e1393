"""
rclab/tasks/_logic.py

    knights (always truthful) and knaves (always lying) puzzles with 2 / 3 / 4 agents,
    every puzzle has exactly one consistent assignment (checked by brute force)
"""


from typing import List, Dict, Optional, Tuple
from itertools import product

import numpy as np

from rclab.tasks._common import Generated, TraceParts


_LETTERS = "ABCDEFGH"
_N_AGENTS = {"easy": 2, "medium": 3, "hard": 4}
_MAX_TRIES = 50


def _holds(stmt: List, a: Dict[str, bool]) -> bool :
    kind = stmt[0]
    if kind == "is":
        _, _, y, v = stmt
        return a[y] == (v == "K")
    _, _, y, z = stmt
    return (a[y] == a[z]) == (kind == "same")


def solutions(names: List[str], stmts: List[List]) -> List[Dict[str, bool]] :
    """ every knight(True)/knave(False) assignment consistent with the statements """
    out = []
    for values in product((True, False), repeat=len(names)):
        a = dict(zip(names, values))
        if all(_holds(s, a) == a[s[1]] for s in stmts):
            out.append(a)
    return out


def _render_stmt(stmt: List) -> str :
    if stmt[0] == "is":
        _, x, y, v = stmt
        return f"{x}: {y} is {v}."
    kind, x, y, z = stmt
    return f"{x}: {y},{z} {'same' if kind == 'same' else 'differ'}."


def _kn(b: bool) -> str :
    return "K" if b else "N"


def _draw_stmt(rng: np.random.Generator, x: str, names: List[str]) -> List :
    others = [n for n in names if n != x]
    if rng.random() < 0.5:
        return ["is", x, others[int(rng.integers(len(others)))], "K" if rng.random() < 0.5 else "N"]
    y, z = (str(v) for v in rng.choice(names, size=2, replace=False))
    y, z = sorted((y, z))
    return ["same" if rng.random() < 0.5 else "differ", x, y, z]


def make(difficulty: str, rng: np.random.Generator) -> Optional[Generated] :
    n = _N_AGENTS[difficulty]
    names = sorted(str(v) for v in rng.choice(list(_LETTERS), size=n, replace=False))
    for _ in range(_MAX_TRIES):
        stmts = [_draw_stmt(rng, x, names) for x in names]
        sols = solutions(names, stmts)
        if len(sols) == 1:
            sol = sols[0]
            prompt = "K tells truth, N lies. " + " ".join(_render_stmt(s) for s in stmts) + " Solve."
            payload = {k: _kn(sol[k]) for k in names}
            return Generated(prompt, "assignment_set", payload, n, {"names": names, "statements": stmts})
    return None


def answer_text(assignment: Dict[str, str]) -> str :
    return ",".join(f"{k}={v}" for k, v in sorted(assignment.items()))


def trace_parts(meta: dict) -> TraceParts :
    names, stmts = meta["names"], meta["statements"]
    sols = solutions(names, stmts)
    if len(sols) != 1:
        raise ValueError("logic puzzle does not have a unique solution")
    sol = sols[0]
    first = names[0]
    lines: List[Tuple[str, str]] = [("step", f"try {first}=K and {first}=N")]
    works = 0
    for i, v in enumerate((True, False), start=1):
        if sol[first] == v:
            works = i
            rest = ",".join(f"{k}={_kn(sol[k])}" for k in names[1:])
            lines.append(("case", f"{first}={_kn(v)} gives {rest}"))
        else:
            lines.append(("case", f"{first}={_kn(v)} fails"))
    lines.append(("step", f"only case {works} works"))
    s = stmts[0]
    x = s[1]
    if s[0] == "is":
        check = f"{x} said {s[2]} is {s[3]}, {s[2]}={_kn(sol[s[2]])}, so {x}={_kn(sol[x])}"
    else:
        check = (f"{x} said {s[2]},{s[3]} {s[0]}, {s[2]}={_kn(sol[s[2]])},{s[3]}={_kn(sol[s[3]])}, "
                 f"so {x}={_kn(sol[x])}")
    return TraceParts(lines, check, answer_text({k: _kn(sol[k]) for k in names}))
