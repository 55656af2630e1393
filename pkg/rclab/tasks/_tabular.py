"""
rclab/tasks/_tabular.py

    small tables (2 / 3 / 4 rows) rendered as text with lookup, sum, max and argmax queries
"""


from typing import Optional

import numpy as np

from rclab.tasks._common import Generated, TraceParts


_NAMES = ("Ann", "Bob", "Cal", "Dee", "Eve", "Fay")
_COLUMNS = ("age", "pts", "km", "cost")
_N_ROWS = {"easy": 2, "medium": 3, "hard": 4}
_QUERIES = ("lookup", "sum", "max", "argmax")


def _render_table(names, cols, rows) -> str :
    lines = ["name|" + "|".join(cols)]
    for name, row in zip(names, rows):
        lines.append(name + "|" + "|".join(str(v) for v in row))
    return "\n".join(lines)


def make(difficulty: str, rng: np.random.Generator) -> Optional[Generated] :
    n = _N_ROWS[difficulty]
    names = [_NAMES[i] for i in sorted(rng.choice(len(_NAMES), size=n, replace=False))]
    cols = [_COLUMNS[i] for i in sorted(rng.choice(len(_COLUMNS), size=2, replace=False))]
    rows = [[int(v) for v in rng.integers(1, 51, size=2)] for _ in range(n)]
    query = _QUERIES[int(rng.integers(len(_QUERIES)))]
    c = int(rng.integers(2))
    col = [r[c] for r in rows]
    if query in ("max", "argmax") and col.count(max(col)) > 1:
        return None
    target = int(rng.integers(n))
    match query:
        case "lookup":
            question = f"What is {names[target]}'s {cols[c]}?"
            kind, answer = "numeric", str(col[target])
        case "sum":
            question = f"What is the total {cols[c]}?"
            kind, answer = "numeric", str(sum(col))
        case "max":
            question = f"What is the largest {cols[c]}?"
            kind, answer = "numeric", str(max(col))
        case _:
            question = f"Who has the largest {cols[c]}?"
            kind, answer = "exact_string", names[col.index(max(col))]
    prompt = _render_table(names, cols, rows) + "\n" + question
    meta = {"names": names, "columns": cols, "rows": rows, "query": query, "column": c, "target": target}
    return Generated(prompt, kind, answer, n, meta)


def trace_parts(meta: dict) -> TraceParts :
    names, cols, rows = meta["names"], meta["columns"], meta["rows"]
    c = meta["column"]
    cname = cols[c]
    col = [r[c] for r in rows]
    cases = [("case", f"{name} {cname}={v}") for name, v in zip(names, col)]
    values = ",".join(str(v) for v in col)
    match meta["query"]:
        case "lookup":
            who = names[meta["target"]]
            v = col[meta["target"]]
            lines = [("step", f"scan rows for {who}")] + cases + [("step", f"{who} has {cname} {v}")]
            return TraceParts(lines, f"row {who}: {cname}={v}", str(v))
        case "sum":
            s = sum(col)
            lines = ([("step", f"add up column {cname}")] + cases
                     + [("step", "+".join(str(v) for v in col) + f"={s}")])
            return TraceParts(lines, "+".join(str(v) for v in reversed(col)) + f"={s}", str(s))
        case "max":
            m = max(col)
            lines = [("step", f"compare column {cname}")] + cases + [("step", f"the largest is {m}")]
            return TraceParts(lines, f"max({values})={m}", str(m))
    m = max(col)
    who = names[col.index(m)]
    lines = [("step", f"compare column {cname}")] + cases + [("step", f"{who} has the most, {m}")]
    return TraceParts(lines, f"max({values})={m} for {who}", who)
