"""
rclab/tasks/_common.py

    helpers shared by the per-domain generators: number formatting, trace assembly and
    backtrack injection
"""


from typing import List, Tuple, Optional, Union, Dict, Any
from dataclasses import dataclass, field
from fractions import Fraction
import re

import numpy as np


Number = Union[int, Fraction]

# BOS + prompt + trace + EOS must fit the default context window
DEFAULT_MAX_LEN = 256

# revision line emitted after a deliberately wrong step, followed by the step number
BACKTRACK_MARKER = "Wait, that is wrong; revisiting step"

_LAST_INT_RE = re.compile(r"\d+(?!.*\d)", re.S)


def fmt_num(v: Number) -> str :
    """ integer text for whole numbers, ``a/b`` otherwise """
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def operand(v: Number) -> str :
    """ number formatted for use inside an expression (negatives and fractions parenthesized) """
    s = fmt_num(v)
    return f"({s})" if v < 0 or Fraction(v).denominator != 1 else s


@dataclass
class Generated:
    """ what a domain generator returns for one task """
    prompt: str
    kind: str
    payload: Any
    complexity: int
    meta: Dict[str, Any]


@dataclass
class TraceParts:
    """
    ordered trace body, each line is ("step", text) or ("case", text), numbered when the
    trace is assembled, followed by the check line and the final answer
    """
    lines: List[Tuple[str, str]]
    check: str
    answer: str


def perturb(text: str) -> Optional[str] :
    """ the same step text with its last integer changed, None when it has no digits """
    m = _LAST_INT_RE.search(text)
    if m is None:
        return None
    wrong = int(m.group()) + 1
    return text[:m.start()] + str(wrong) + text[m.end():]


def assemble(parts: TraceParts, backtrack_step: Optional[int] = None) -> str :
    """
    render a trace, ``backtrack_step`` (1-based step number) first emits a wrong version of
    that step followed by the revision marker and the corrected step
    """
    out = []
    k = j = 0
    for kind, text in parts.lines:
        if kind == "case":
            j += 1
            out.append(f"Case {j}: {text}")
            continue
        k += 1
        if k == backtrack_step and (wrong := perturb(text)) is not None:
            out.append(f"Step {k}: {wrong}")
            out.append(f"{BACKTRACK_MARKER} {k}")
        out.append(f"Step {k}: {text}")
    out.append(f"Check: {parts.check}")
    out.append(f"\\boxed{{{parts.answer}}}")
    return "\n".join(out)


def backtrack_candidates(parts: TraceParts) -> List[int] :
    """ 1-based numbers of the steps that can be corrupted """
    steps = [text for kind, text in parts.lines if kind == "step"]
    return [i + 1 for i, text in enumerate(steps) if perturb(text) is not None]


def fits(prompt: str, trace: str, max_len: int = DEFAULT_MAX_LEN) -> bool :
    """ BOS + prompt + trace + EOS fits in the context window (one token per character) """
    return len(prompt) + len(trace) + 2 <= max_len


def pick(rng: np.random.Generator, seq):
    return seq[int(rng.integers(len(seq)))]
