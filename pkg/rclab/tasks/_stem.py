"""
rclab/tasks/_stem.py

    templated word problems that reduce to a number or a yes/no answer, the number of
    computations grows with difficulty (1 / 2 / 3)
"""


from typing import Dict, Callable, Tuple, List, Optional

import numpy as np

from rclab.tasks._common import Generated, TraceParts


# template name -> (difficulty, value sampler, renderer)
# the renderer maps values to (prompt, answer, kind, step texts, check)
_Rendered = Tuple[str, str, str, List[str], str]


def _r(rng, lo, hi):
    return int(rng.integers(lo, hi + 1))


# --- easy ---

def _draw_speed(rng):
    return {"v": _r(rng, 20, 90), "t": _r(rng, 2, 9)}


def _speed(v, t) -> _Rendered :
    d = v * t
    return (f"A car drives {v} km/h for {t} h. How many km does it go?", str(d), "numeric",
            ["distance = speed*time", f"{v}*{t}={d}"], f"{d}/{t}={v}")


def _draw_shelf(rng):
    return {"a": _r(rng, 5, 90), "b": _r(rng, 2, 60)}


def _shelf(a, b) -> _Rendered :
    s = a + b
    return (f"A shelf holds {a} books and {b} more arrive. How many books are there now?", str(s), "numeric",
            ["total = old+new", f"{a}+{b}={s}"], f"{s}-{b}={a}")


def _draw_bag(rng):
    return {"a": _r(rng, 5, 40), "b": _r(rng, 5, 40)}


def _bag(a, b) -> _Rendered :
    d = a - b
    ans = "yes" if d > 0 else "no"
    return (f"A bag weighs {a} kg and the limit is {b} kg. Is the bag over the limit?", ans, "exact_string",
            [f"compare {a} kg with {b} kg", f"{a}-{b}={d}"], f"{b}+{d}={a}")


# --- medium ---

def _draw_tank(rng):
    return {"a": _r(rng, 10, 99), "b": _r(rng, 2, 15), "t": _r(rng, 2, 12)}


def _tank(a, b, t) -> _Rendered :
    g = b * t
    s = a + g
    return (f"A tank has {a} L and gains {b} L per min for {t} min. How many L are in it at the end?",
            str(s), "numeric",
            [f"gain = {b}*{t}={g}", f"total = {a}+{g}={s}"], f"{s}-{g}={a}")


def _draw_rope(rng):
    k, b = _r(rng, 2, 6), _r(rng, 2, 9)
    return {"a": k * b + _r(rng, 0, 12), "k": k, "b": b}


def _rope(a, k, b) -> _Rendered :
    u = k * b
    left = a - u
    ans = "yes" if left > 0 else "no"
    return (f"A rope is {a} m long and {k} pieces of {b} m are cut off. Is any rope left?", ans, "exact_string",
            [f"used = {k}*{b}={u}", f"left = {a}-{u}={left}"], f"{left}+{u}={a}")


# --- hard ---

def _draw_eggs(rng):
    a, e, d = _r(rng, 2, 12), _r(rng, 1, 3), _r(rng, 2, 7)
    return {"a": a, "e": e, "d": d, "b": _r(rng, 1, a * e * d)}


def _eggs(a, e, d, b) -> _Rendered :
    x = a * e
    y = x * d
    z = y - b
    return (f"A farm has {a} hens that each lay {e} eggs a day for {d} days, and {b} eggs break. "
            f"How many eggs are left?", str(z), "numeric",
            [f"per day {a}*{e}={x}", f"in {d} days {x}*{d}={y}", f"left {y}-{b}={z}"], f"{z}+{b}={y}")


def _draw_van(rng):
    k, w, m = _r(rng, 2, 12), _r(rng, 10, 40), _r(rng, 60, 99)
    return {"k": k, "w": w, "m": m, "lim": k * w + m + _r(rng, -60, 60)}


def _van(k, w, m, lim) -> _Rendered :
    x = k * w
    y = x + m
    z = y - lim
    ans = "yes" if z > 0 else "no"
    return (f"A van carries {k} boxes of {w} kg and a {m} kg driver. The limit is {lim} kg. Is it over the limit?",
            ans, "exact_string",
            [f"boxes {k}*{w}={x}", f"load {x}+{m}={y}", f"margin {y}-{lim}={z}"], f"{z}+{lim}={y}")


_TEMPLATES: Dict[str, Tuple[str, Callable, Callable]] = {
    "speed": ("easy", _draw_speed, _speed),
    "shelf": ("easy", _draw_shelf, _shelf),
    "bag": ("easy", _draw_bag, _bag),
    "tank": ("medium", _draw_tank, _tank),
    "rope": ("medium", _draw_rope, _rope),
    "eggs": ("hard", _draw_eggs, _eggs),
    "van": ("hard", _draw_van, _van),
}
_COMPLEXITY = {"easy": 1, "medium": 2, "hard": 3}


def make(difficulty: str, rng: np.random.Generator) -> Optional[Generated] :
    names = [name for name, (diff, _, _) in _TEMPLATES.items() if diff == difficulty]
    name = names[int(rng.integers(len(names)))]
    _, draw, render = _TEMPLATES[name]
    values = draw(rng)
    prompt, answer, kind, _, _ = render(**values)
    return Generated(prompt, kind, answer, _COMPLEXITY[difficulty], {"template": name, "values": values})


def trace_parts(meta: dict) -> TraceParts :
    _, _, render = _TEMPLATES[meta["template"]]
    _, answer, _, steps, check = render(**meta["values"])
    lines = [("step", s) for s in steps]
    lines.append(("step", f"so the answer is {answer}"))
    return TraceParts(lines, check, answer)
