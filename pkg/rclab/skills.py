"""
rclab/skills.py

    rule-based tagging of four reasoning skills (subgoal setting, enumeration,
    backtracking, verification) in traces, and per-domain frequency tables
"""


from typing import List, Optional, Dict, Any, Iterable, Tuple, Sequence, Callable, Union
from dataclasses import dataclass
from functools import lru_cache
import errno
import json
import os
import re

import polars as pl

from rclab.model.vocab import Vocab
from rclab.model.tinylm import ModelParams
from rclab.model.checkpoint import Checkpoint
from rclab.params import DOMAINS
from rclab.rollout import decode_tasks
from rclab.tasks import Task
from rclab.util import INCLUDE_DIR, debug_handler


SKILLS = ("subgoal", "enumeration", "backtracking", "verification")

_DEFAULT_LEXICON = os.path.join(INCLUDE_DIR, "skill_lexicon.json")


@dataclass(frozen=True)
class Lexicon:
    """ compiled marker lexicon, markers are matched case-insensitively """
    name: str
    version: int
    step_re: re.Pattern
    case_re: re.Pattern
    check_markers: Tuple[str, ...]
    recompute_re: re.Pattern
    revision_markers: Tuple[str, ...]


def load_lexicon(path: Optional[str] = None) -> Lexicon :
    """ load a marker lexicon (the packaged default when ``path`` is None) """
    path = _DEFAULT_LEXICON if path is None else path
    if not os.path.isfile(path):
        raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), path)
    with open(path, "r") as f:
        raw = json.load(f)
    try:
        return Lexicon(raw["name"], int(raw["version"]),
                       re.compile(raw["step_marker"], re.I),
                       re.compile(raw["case_marker"], re.I),
                       tuple(m.lower() for m in raw["check_markers"]),
                       re.compile(raw["recompute_pattern"]),
                       tuple(m.lower() for m in raw["revision_markers"]))
    except KeyError as e:
        raise ValueError(f"load_lexicon: {path} is missing key {e}") from None


@lru_cache(maxsize=1)
def default_lexicon() -> Lexicon :
    return load_lexicon()


@dataclass(frozen=True)
class SkillProfile:
    subgoal: bool = False
    enumeration: bool = False
    backtracking: bool = False
    verification: bool = False

    def to_json(self) -> Dict[str, bool] :
        return {s: getattr(self, s) for s in SKILLS}


def _has_verification(lines: List[str], lex: Lexicon) -> bool :
    for i, line in enumerate(lines):
        low = line.lower()
        for m in lex.check_markers:
            pos = low.find(m)
            if pos < 0:
                continue
            rest = line[pos + len(m):]
            if lex.recompute_re.search(rest):
                return True
            if i + 1 < len(lines) and lex.recompute_re.search(lines[i + 1]):
                return True
    return False


def _has_backtracking(lines: List[str], lex: Lexicon) -> bool :
    steps: List[Tuple[int, int, str]] = []
    revisions: List[int] = []
    for i, line in enumerate(lines):
        if (m := lex.step_re.match(line)):
            steps.append((i, int(m.group(1)), m.group(2).strip()))
        elif any(r in line.lower() for r in lex.revision_markers):
            revisions.append(i)
    for r in revisions:
        before = {(k, text) for i, k, text in steps if i < r}
        before_ks = {k for k, _ in before}
        for i, k, text in steps:
            if i > r and k in before_ks and (k, text) not in before:
                return True
    return False


def tag(trace: str, lexicon: Optional[Lexicon] = None) -> SkillProfile :
    """
    tag one trace

    subgoal: two step markers whose numbers increase in order of appearance
    enumeration: at least two distinct case numbers
    verification: a check marker with a recomputation ``a = b`` on the same or the next line
    backtracking: a revision marker followed by a step that repeats an earlier step number
    with different content
    """
    lex = default_lexicon() if lexicon is None else lexicon
    lines = trace.split("\n")
    step_nums = [int(m.group(1)) for line in lines if (m := lex.step_re.match(line))]
    subgoal = any(a < b for i, a in enumerate(step_nums) for b in step_nums[i + 1:])
    cases = {int(m.group(1)) for line in lines if (m := lex.case_re.match(line))}
    return SkillProfile(subgoal=subgoal,
                        enumeration=len(cases) >= 2,
                        backtracking=_has_backtracking(lines, lex),
                        verification=_has_verification(lines, lex))


@dataclass
class SkillFrequencies:
    """ per-skill share of traces showing the skill, over ``n`` traces """
    freqs: Dict[str, float]
    n: int

    def to_json(self) -> Dict[str, Any] :
        return {"n": self.n, **self.freqs}

    @staticmethod
    def from_json(obj: Dict[str, Any]) -> "SkillFrequencies" :
        return SkillFrequencies({s: float(obj[s]) for s in SKILLS}, int(obj["n"]))


def aggregate(profiles: Sequence[SkillProfile]) -> SkillFrequencies :
    """ mean of the per-trace booleans (all zero for an empty set) """
    n = len(profiles)
    if n == 0:
        return SkillFrequencies({s: 0. for s in SKILLS}, 0)
    return SkillFrequencies({s: sum(getattr(p, s) for p in profiles) / n for s in SKILLS}, n)


def merge(a: SkillFrequencies, b: SkillFrequencies) -> SkillFrequencies :
    """ frequencies of the union of two trace sets (weighted by their sizes) """
    n = a.n + b.n
    if n == 0:
        return SkillFrequencies({s: 0. for s in SKILLS}, 0)
    return SkillFrequencies({s: (a.freqs[s] * a.n + b.freqs[s] * b.n) / n for s in SKILLS}, n)


@dataclass
class SkillTable:
    domains: Dict[str, SkillFrequencies]
    lexicon_version: int

    @property
    def overall(self) -> SkillFrequencies :
        out = aggregate([])
        for f in self.domains.values():
            out = merge(out, f)
        return out

    def to_json(self) -> Dict[str, Any] :
        return {"lexicon_version": self.lexicon_version,
                "domains": {d: f.to_json() for d, f in self.domains.items()}}

    @staticmethod
    def from_json(obj: Dict[str, Any]) -> "SkillTable" :
        return SkillTable({d: SkillFrequencies.from_json(f) for d, f in obj["domains"].items()},
                          int(obj["lexicon_version"]))

    def to_frame(self) -> pl.DataFrame :
        """ long format with columns: domain, skill, frequency, n """
        rows = [{"domain": d, "skill": s, "frequency": f.freqs[s], "n": f.n}
                for d, f in self.domains.items() for s in SKILLS]
        return pl.DataFrame(rows, schema={"domain": pl.String, "skill": pl.String,
                                          "frequency": pl.Float64, "n": pl.Int64})


def profile_traces(traces: Iterable[Tuple[str, str]], lexicon: Optional[Lexicon] = None) -> SkillTable :
    """ per-domain skill frequencies from ``(domain, trace)`` pairs """
    lex = default_lexicon() if lexicon is None else lexicon
    by_domain: Dict[str, List[SkillProfile]] = {}
    for domain, trace in traces:
        by_domain.setdefault(domain, []).append(tag(trace, lex))
    ordered = [d for d in DOMAINS if d in by_domain] + sorted(d for d in by_domain if d not in DOMAINS)
    return SkillTable({d: aggregate(by_domain[d]) for d in ordered}, lex.version)


def profile_run(model: Union[Checkpoint, ModelParams],
                tasks: Sequence[Task],
                vocab: Optional[Vocab] = None,
                max_new: int = 192,
                lexicon: Optional[Lexicon] = None,
                n_proc: int = 1,
                debug_flag: Optional[str] = None,
                debug_cb: Optional[Callable] = None
                ) -> SkillTable :
    """
    greedy-decode one trace per task and tabulate skill frequencies per domain

    Parameters
    ----------
    model : Checkpoint or ModelParams
        with bare parameters ``vocab`` is required
    tasks : sequence of Task
    vocab : Vocab, optional
    max_new : int, default=192
    lexicon : Lexicon, optional
    n_proc : int, default=1
    debug_flag : str, optional
    debug_cb : func, optional

    Returns
    -------
    table : SkillTable
    """
    if isinstance(model, Checkpoint):
        params, vocab = model.params, model.vocab if vocab is None else vocab
    else:
        params = model
    if vocab is None:
        raise ValueError("profile_run: vocab is required with bare parameters")
    rollouts = decode_tasks(params, tasks, vocab, greedy=True, max_new=max_new, n_proc=n_proc)
    table = profile_traces(((t.domain, r.text) for t, r in zip(tasks, rollouts)), lexicon)
    debug_handler(debug_flag, debug_cb, "profiled skills", n=len(tasks), domains=len(table.domains))
    return table
