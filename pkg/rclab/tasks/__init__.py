"""
rclab/tasks/__init__.py

    seeded task generators for the six synthetic domains (math, stem, code, simulation,
    logic, tabular) at three difficulty tiers, oracle reasoning traces for cold-start SFT
    and the NDJSON dataset file
"""


from typing import List, Optional, Dict, Any, Iterable, Set, Sequence, Callable
from dataclasses import dataclass, field, asdict
import os
import errno
import json

import numpy as np

from rclab.params import DataParams, DOMAINS, DIFFICULTIES
from rclab.reward import AnswerSpec
from rclab.typing import NdjsonFilePath
from rclab.util import derive_seed, dumps_canonical, debug_handler
from rclab.tasks import _math, _stem, _code, _simulation, _logic, _tabular
from rclab.tasks._common import (
    TraceParts, assemble, backtrack_candidates, fits, BACKTRACK_MARKER, DEFAULT_MAX_LEN
)


_GENERATORS = {
    "math": _math,
    "stem": _stem,
    "code": _code,
    "simulation": _simulation,
    "logic": _logic,
    "tabular": _tabular,
}

DATASET_SCHEMA = "rclab.dataset"
DATASET_VERSION = 1

# attempts per task index before giving up on finding a fresh prompt
_MAX_ATTEMPTS = 1000


class NoOracle(ValueError):
    """ raised by gen_oracle_trace for tasks without a supported structured problem """


@dataclass
class Task:
    """
    one generated problem

    ``pool`` is ``"rl"`` for tasks used by RL / evaluation and ``"cold_start"`` for the
    SFT trace set, ``meta`` holds the structured problem that the oracle solves
    """
    id: str
    domain: str
    difficulty: str
    split: str
    prompt: str
    spec: AnswerSpec
    complexity: int
    meta: Dict[str, Any]
    pool: str = "rl"
    oracle_trace: Optional[str] = None

    def to_json(self) -> Dict[str, Any] :
        d = asdict(self)
        d["spec"] = self.spec.to_json()
        return d

    @staticmethod
    def from_json(obj: Dict[str, Any]) -> "Task" :
        obj = dict(obj)
        obj["spec"] = AnswerSpec.from_json(obj["spec"])
        return Task(**obj)


def _task_id(domain: str, difficulty: str, split: str, pool: str, seed: int, index: int) -> str :
    return f"{domain}-{difficulty}-{split}-{pool}-{seed}-{index:05d}"


def _check_domain(domain: str, difficulty: str) -> None :
    if domain not in _GENERATORS:
        raise ValueError(f"gen: unknown domain {domain!r}, expected one of {DOMAINS}")
    if difficulty not in DIFFICULTIES:
        raise ValueError(f"gen: unknown difficulty {difficulty!r}, expected one of {DIFFICULTIES}")


def _trace_parts(task: Task) -> TraceParts :
    module = _GENERATORS.get(task.domain)
    if module is None or not task.meta:
        raise NoOracle(f"gen_oracle_trace: no oracle for task {task.id} (domain {task.domain!r})")
    try:
        return module.trace_parts(task.meta)
    except (KeyError, TypeError, ValueError) as e:
        raise NoOracle(f"gen_oracle_trace: task {task.id} has an unsupported form: {e}") from e


def backtrack_steps(task: Task, max_len: int = DEFAULT_MAX_LEN) -> List[int] :
    """ steps of the task's oracle trace that can be corrupted without overflowing the context window """
    parts = _trace_parts(task)
    return [k for k in backtrack_candidates(parts)
            if fits(task.prompt, assemble(parts, backtrack_step=k), max_len)]


def gen_oracle_trace(task: Task,
                     backtrack_fraction: float = 0.3,
                     seed: int = 0,
                     max_len: int = DEFAULT_MAX_LEN
                     ) -> str :
    """
    skill-marked reasoning trace ending in ``\\boxed{answer}``

    The trace has numbered ``Step k:`` lines, ``Case k:`` lines where the domain considers
    alternatives, a ``Check:`` line recomputing the result, and, with probability
    ``backtrack_fraction`` (decided by a stream derived from the task id and ``seed``), one
    wrong step followed by ``Wait, that is wrong; revisiting step k`` and the corrected step.
    The corrupted step is drawn among the steps whose backtrack fits the context window, a
    task without any such step (see ``backtrack_steps``) always gets the plain trace;
    ``attach_traces`` compensates for those tasks over a batch.

    Raises
    ------
    NoOracle
        when the task has no structured problem to solve
    """
    parts = _trace_parts(task)
    rng = np.random.default_rng(derive_seed("backtrack", task.id, seed))
    if rng.random() < backtrack_fraction:
        steps = backtrack_steps(task, max_len)
        if steps:
            return assemble(parts, backtrack_step=steps[int(rng.integers(len(steps)))])
    return assemble(parts)


def attach_traces(tasks: Sequence[Task],
                  backtrack_fraction: float = 0.3,
                  seed: int = 0,
                  max_len: int = DEFAULT_MAX_LEN,
                  debug_flag: Optional[str] = None,
                  debug_cb: Optional[Callable] = None
                  ) -> float :
    """
    set ``oracle_trace`` on every task (in place) so that about ``backtrack_fraction`` of
    the batch carries a backtrack

    Tasks whose trace cannot host a backtrack within ``max_len`` are ineligible; the
    backtrack rate of the eligible tasks is raised to ``backtrack_fraction * n / n_eligible``
    (capped at 1) to keep the batch share on target. When fewer than that many tasks are
    eligible the shortfall is reported through ``debug_handler``.

    Returns
    -------
    share : float
        fraction of the tasks whose trace carries the backtrack marker
    """
    if len(tasks) == 0:
        return 0.
    n_eligible = sum(bool(backtrack_steps(t, max_len)) for t in tasks)
    target = backtrack_fraction * len(tasks)
    rate = min(1., target / n_eligible) if n_eligible else 0.
    for t in tasks:
        t.oracle_trace = gen_oracle_trace(t, rate, seed, max_len)
    share = sum(BACKTRACK_MARKER in t.oracle_trace for t in tasks) / len(tasks)
    if n_eligible < target:
        debug_handler(debug_flag, debug_cb, "too few traces can host a backtrack",
                      target=backtrack_fraction, eligible=n_eligible / len(tasks), share=share,
                      max_len=max_len)
    return share


def gen(domain: str,
        difficulty: str,
        n: int,
        seed: int,
        split: str = "train",
        pool: str = "rl",
        exclude: Optional[Set[str]] = None,
        unique: bool = False,
        with_traces: bool = False,
        backtrack_fraction: float = 0.3,
        max_len: int = DEFAULT_MAX_LEN,
        debug_flag: Optional[str] = None,
        debug_cb: Optional[Callable] = None
        ) -> List[Task] :
    """
    generate ``n`` tasks for one (domain, difficulty) cell

    Each task index draws from its own stream derived from (domain, difficulty, split,
    pool, seed, index, attempt), so the output is deterministic given the arguments.
    Prompts are at most ``max_len / 2 - 1`` characters and prompt plus oracle trace always
    fits the context window.

    Parameters
    ----------
    domain, difficulty : str
        task cell
    n : int
        number of tasks, >= 1
    seed : int
        generation seed
    split : str
        ``"train"`` or ``"eval"``
    pool : str
        ``"rl"`` or ``"cold_start"``
    exclude : set of str, optional
        prompts that must not be produced (e.g. the eval prompts when generating train)
    unique : bool, default=False
        also reject prompts already produced by this call
    with_traces : bool, default=False
        attach oracle traces (see ``attach_traces``)
    backtrack_fraction : float, default=0.3
        share of the traces with an injected backtrack
    max_len : int, default=256
        context window the prompt and trace must fit
    debug_flag : str, optional
    debug_cb : callable, optional
        passed to ``attach_traces``

    Returns
    -------
    tasks : list of Task
    """
    _check_domain(domain, difficulty)
    if n < 1:
        raise ValueError(f"gen: n must be >= 1, got {n}")
    module = _GENERATORS[domain]
    exclude = set() if exclude is None else exclude
    seen: Set[str] = set()
    tasks = []
    max_prompt = max_len // 2 - 1
    for i in range(n):
        for attempt in range(_MAX_ATTEMPTS):
            rng = np.random.default_rng(derive_seed("task", domain, difficulty, split, pool, seed, i, attempt))
            g = module.make(difficulty, rng)
            if g is None or len(g.prompt) > max_prompt or g.prompt in exclude or (unique and g.prompt in seen):
                continue
            task = Task(_task_id(domain, difficulty, split, pool, seed, i), domain, difficulty, split,
                        g.prompt, AnswerSpec(g.kind, g.payload, domain), g.complexity, g.meta, pool)
            if not fits(task.prompt, assemble(_trace_parts(task)), max_len):
                continue
            break
        else:
            raise RuntimeError(f"gen: could not produce task {i} for {domain}/{difficulty} "
                               f"after {_MAX_ATTEMPTS} attempts")
        seen.add(task.prompt)
        tasks.append(task)
    if with_traces:
        _ = attach_traces(tasks, backtrack_fraction, seed, max_len, debug_flag=debug_flag, debug_cb=debug_cb)
    return tasks


#------------------------------------------------------------------------------
# datasets


@dataclass
class Dataset:
    """ all tasks of one generation run, train and eval splits plus the cold-start traces """
    tasks: List[Task]
    seed: int
    info: Dict[str, Any] = field(default_factory=dict)

    def select(self,
               split: Optional[str] = None,
               domains: Optional[Iterable[str]] = None,
               difficulties: Optional[Iterable[str]] = None,
               pool: Optional[str] = "rl"
               ) -> List[Task] :
        """ tasks matching every given filter (None = any) """
        domains = None if domains is None else set(domains)
        difficulties = None if difficulties is None else set(difficulties)
        return [t for t in self.tasks
                if (split is None or t.split == split)
                and (pool is None or t.pool == pool)
                and (domains is None or t.domain in domains)
                and (difficulties is None or t.difficulty in difficulties)]

    def train(self, **filters) -> List[Task] :
        return self.select(split="train", **filters)

    def eval(self, **filters) -> List[Task] :
        return self.select(split="eval", **filters)

    def cold_start(self) -> List[Task] :
        return self.select(pool="cold_start")

    def validate(self, min_eval_per_domain: int = 50) -> List[str] :
        """ list of invariant problems (empty when the dataset is sound) """
        problems = []
        train_ids = {t.id for t in self.tasks if t.split == "train"}
        eval_ids = {t.id for t in self.tasks if t.split == "eval"}
        if train_ids & eval_ids:
            problems.append(f"{len(train_ids & eval_ids)} task ids appear in both splits")
        if len(train_ids) + len(eval_ids) != len(self.tasks):
            problems.append("duplicate task ids")
        eval_prompts = {t.prompt for t in self.tasks if t.split == "eval"}
        leaked = sum(t.prompt in eval_prompts for t in self.tasks if t.split == "train")
        if leaked:
            problems.append(f"{leaked} train prompts duplicate eval prompts")
        for d in sorted({t.domain for t in self.tasks}):
            n_eval = sum(1 for t in self.tasks if t.split == "eval" and t.domain == d)
            if n_eval < min_eval_per_domain:
                problems.append(f"domain {d} has {n_eval} eval tasks (< {min_eval_per_domain})")
        return problems


def split_evenly(n: int, k: int) -> List[int] :
    """ n items over k bins, the first n % k bins get one extra """
    return [n // k + (1 if i < n % k else 0) for i in range(k)]


def build_dataset(params: DataParams,
                  seed: int,
                  domains: Optional[Sequence[str]] = None,
                  difficulties: Optional[Sequence[str]] = None,
                  n_per_domain: Optional[int] = None,
                  eval_frac: float = 0.2,
                  cold_start: Optional[int] = None,
                  debug_flag: Optional[str] = None,
                  debug_cb: Optional[Callable] = None
                  ) -> Dataset :
    """
    generate the train/eval splits for every (domain, difficulty) cell plus the cold-start
    math traces

    Eval tasks are generated first (unique prompts), train and cold-start generation then
    skip every eval prompt.

    Parameters
    ----------
    params : DataParams
        default cell sizes (``train_per_cell``, ``eval_per_difficulty``, ``cold_start``) and
        the backtrack fraction of the oracle traces
    seed : int
        generation seed
    domains, difficulties : sequence of str, optional
        restrict the cells (default: all)
    n_per_domain : int, optional
        total tasks per domain instead of the cell sizes, ``eval_frac`` of them go to eval
        and both splits are spread evenly over the difficulties
    eval_frac : float, default=0.2
    cold_start : int, optional
        override for the number of cold-start traces (only generated when math is included)

    Returns
    -------
    dataset : Dataset
    """
    domains = list(DOMAINS if domains is None else domains)
    difficulties = list(DIFFICULTIES if difficulties is None else difficulties)
    k = len(difficulties)
    if n_per_domain is None:
        n_eval = [params.eval_per_difficulty] * k
        n_train = [params.train_per_cell] * k
    else:
        if not 0. <= eval_frac < 1.:
            raise ValueError("build_dataset: eval_frac must be in [0, 1)")
        total_eval = int(round(n_per_domain * eval_frac))
        n_eval = split_evenly(total_eval, k)
        n_train = split_evenly(n_per_domain - total_eval, k)
    n_cold = params.cold_start if cold_start is None else cold_start
    tasks: List[Task] = []
    eval_prompts: Set[str] = set()
    for domain in domains:
        for difficulty, ne in zip(difficulties, n_eval):
            if ne > 0:
                batch = gen(domain, difficulty, ne, seed, split="eval", unique=True)
                eval_prompts.update(t.prompt for t in batch)
                tasks.extend(batch)
        debug_handler(debug_flag, debug_cb, "eval split generated", domain=domain)
    for domain in domains:
        for difficulty, nt in zip(difficulties, n_train):
            if nt > 0:
                tasks.extend(gen(domain, difficulty, nt, seed, split="train", exclude=eval_prompts))
        debug_handler(debug_flag, debug_cb, "train split generated", domain=domain)
    if "math" in domains and n_cold > 0:
        cold: List[Task] = []
        for difficulty, nc in zip(difficulties, split_evenly(n_cold, k)):
            if nc > 0:
                cold.extend(gen("math", difficulty, nc, seed, split="train", pool="cold_start",
                                exclude=eval_prompts))
        # backtracks are balanced over the whole cold-start set, hard tiers host fewer
        share = attach_traces(cold, params.backtrack_fraction, seed, debug_flag=debug_flag, debug_cb=debug_cb)
        tasks.extend(cold)
        debug_handler(debug_flag, debug_cb, "cold-start traces generated", n=n_cold, backtrack_share=share)
    info = {"domains": domains, "difficulties": difficulties, "n_per_domain": n_per_domain,
            "eval_frac": eval_frac if n_per_domain is not None else None,
            "data_params": asdict(params)}
    return Dataset(tasks, seed, info)


def write_dataset(path: NdjsonFilePath, dataset: Dataset) -> None :
    """ NDJSON file: schema header line then one task per line """
    header = {"schema": DATASET_SCHEMA, "version": DATASET_VERSION, "seed": dataset.seed,
              "n_tasks": len(dataset.tasks), "info": dataset.info}
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_canonical(header) + "\n")
        for task in dataset.tasks:
            f.write(dumps_canonical(task.to_json()) + "\n")


def read_dataset(path: NdjsonFilePath) -> Dataset :
    """ read a dataset file written by write_dataset """
    if not os.path.isfile(path):
        raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), path)
    with open(path, "r", encoding="utf-8") as f:
        lines = [line for line in f if line.strip()]
    if not lines:
        raise ValueError(f"read_dataset: {path} is empty")
    header = json.loads(lines[0])
    if header.get("schema") != DATASET_SCHEMA or header.get("version") != DATASET_VERSION:
        raise ValueError(f"read_dataset: {path} does not have a {DATASET_SCHEMA} v{DATASET_VERSION} header")
    tasks = [Task.from_json(json.loads(line)) for line in lines[1:]]
    if len(tasks) != header["n_tasks"]:
        raise ValueError(f"read_dataset: {path} has {len(tasks)} tasks, header says {header['n_tasks']}")
    return Dataset(tasks, header["seed"], header.get("info", {}))
