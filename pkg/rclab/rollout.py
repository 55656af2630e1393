"""
rclab/rollout.py

    on-policy rollout groups for GRPO/DAPO training and greedy pass@1 evaluation
"""


from typing import List, Optional, Dict, Any, Sequence, Callable, Set
from dataclasses import dataclass, field
from itertools import repeat
import multiprocessing

import numpy as np
import polars as pl

from rclab.model.vocab import Vocab, encode_prompt, decode
from rclab.model.tinylm import ModelParams, sample
from rclab.params import DOMAINS
from rclab.reward import reward as score_response, RewardRecord
from rclab.tasks import Task
from rclab.typing import TokenIds
from rclab.util import derive_seed, apply_args_and_kwargs, debug_handler


@dataclass
class Rollout:
    """ one sampled response with the log-probabilities of the policy that sampled it """
    task_id: str
    prompt_ids: TokenIds
    response_ids: TokenIds
    old_logprobs: List[float]
    finished: bool
    reward: Optional[float] = None
    text: str = ""
    record: Optional[RewardRecord] = None
    skill_tags: Optional[Set[str]] = None


@dataclass
class Group:
    """ G rollouts for one task and, once computed, their group-normalized advantages """
    task: Task
    rollouts: List[Rollout]
    advantages: Optional[List[float]] = None

    @property
    def rewards(self) -> List[float] :
        return [r.reward for r in self.rollouts]


def rollout_seed(seed: int, task_id: str, index: int) -> int :
    """ per-rollout sampling seed derived from (run seed, task id, rollout index) """
    return derive_seed("rollout", seed, task_id, index)


def score_rollout(rollout: Rollout, task: Task, vocab: Vocab) -> Rollout :
    """ decode the response and attach its reward (in place, also returned) """
    rollout.text = decode(rollout.response_ids, vocab)
    rollout.record = score_response(rollout.text, task.spec)
    rollout.reward = rollout.record.raw_reward
    return rollout


def roll_group(params: ModelParams,
               task: Task,
               G: int,
               temperature: float,
               max_new: int,
               seed: int,
               vocab: Vocab,
               greedy: bool = False,
               seeds: Optional[Sequence[int]] = None,
               score: bool = False
               ) -> Group :
    """
    sample G independent rollouts for one task

    Rollout i uses its own stream seeded with ``rollout_seed(seed, task.id, i)`` (or
    ``seeds[i]`` when given), so each rollout only depends on its own seed. ``max_new``
    is clamped to the room left in the context window after the prompt.

    Parameters
    ----------
    params : ModelParams
    task : Task
    G : int
        group size, >= 2
    temperature : float
    max_new : int
    seed : int
        run-level seed the per-rollout seeds are derived from
    vocab : Vocab
    greedy : bool, default=False
    seeds : sequence of int, optional
        explicit per-rollout seeds
    score : bool, default=False
        also compute rewards

    Returns
    -------
    group : Group
        rollouts with rewards unset unless ``score``
    """
    if G < 2:
        raise ValueError(f"roll_group: G must be >= 2, got {G}")
    if seeds is not None and len(seeds) != G:
        raise ValueError("roll_group: need exactly G seeds")
    prompt_ids = encode_prompt(task.prompt, vocab)
    room = min(max_new, params.hyper.max_len - len(prompt_ids))
    rollouts = []
    for i in range(G):
        s = rollout_seed(seed, task.id, i) if seeds is None else seeds[i]
        out = sample(params, prompt_ids, temperature, room, np.random.default_rng(s),
                     eos_id=vocab.eos, greedy=greedy)
        r = Rollout(task.id, list(prompt_ids), out.response_ids, out.old_logprobs, out.finished)
        if score:
            score_rollout(r, task, vocab)
        rollouts.append(r)
    return Group(task, rollouts)


def roll_groups(params: ModelParams,
                tasks: Sequence[Task],
                G: int,
                temperature: float,
                max_new: int,
                seed: int,
                vocab: Vocab,
                n_proc: int = 1,
                debug_flag: Optional[str] = None,
                debug_cb: Optional[Callable] = None
                ) -> List[Group] :
    """
    scored groups for a batch of tasks, returned in task order regardless of ``n_proc``

    Group j uses the seed ``derive_seed("group", seed, j)`` so a task drawn twice in one batch
    still gets independent rollouts.
    """
    args = [(params, task, G, temperature, max_new, derive_seed("group", seed, j), vocab)
            for j, task in enumerate(tasks)]
    kwargs = {"score": True}
    if n_proc > 1 and len(tasks) > 1:
        with multiprocessing.Pool(processes=n_proc) as p:
            groups = p.starmap(apply_args_and_kwargs, zip(repeat(roll_group), args, repeat(kwargs)))
    else:
        groups = [roll_group(*a, **kwargs) for a in args]
    debug_handler(debug_flag, debug_cb, "rolled groups", n_groups=len(groups), G=G)
    return groups


def _decode_one(params: ModelParams, task: Task, vocab: Vocab, greedy: bool, max_new: int,
                temperature: float, seed: int) -> Rollout :
    prompt_ids = encode_prompt(task.prompt, vocab)
    room = min(max_new, params.hyper.max_len - len(prompt_ids))
    out = sample(params, prompt_ids, temperature, room,
                 np.random.default_rng(rollout_seed(seed, task.id, 0)), eos_id=vocab.eos, greedy=greedy)
    r = Rollout(task.id, prompt_ids, out.response_ids, out.old_logprobs, out.finished)
    return score_rollout(r, task, vocab)


def decode_tasks(params: ModelParams,
                 tasks: Sequence[Task],
                 vocab: Vocab,
                 greedy: bool = True,
                 max_new: int = 192,
                 temperature: float = 1.0,
                 seed: int = 0,
                 n_proc: int = 1
                 ) -> List[Rollout] :
    """ one scored rollout per task (greedy by default), in task order """
    args = [(params, task, vocab, greedy, max_new, temperature, seed) for task in tasks]
    if n_proc > 1 and len(tasks) > 1:
        with multiprocessing.Pool(processes=n_proc) as p:
            return p.starmap(apply_args_and_kwargs, zip(repeat(_decode_one), args, repeat({})))
    return [_decode_one(*a) for a in args]


#------------------------------------------------------------------------------
# evaluation


@dataclass
class DomainScore:
    n: int
    accuracy: float
    mean_reward: float
    mean_len: float


@dataclass
class EvalTable:
    """ per-domain pass@1 table, ``missing_domains`` lists domains without eval tasks """
    domains: Dict[str, DomainScore]
    overall: DomainScore
    missing_domains: List[str] = field(default_factory=list)

    @property
    def macro_accuracy(self) -> float :
        """ unweighted mean of the per-domain accuracies """
        if not self.domains:
            return 0.
        return float(np.mean([d.accuracy for d in self.domains.values()]))

    def to_json(self) -> Dict[str, Any] :
        return {
            "domains": {k: vars(v) for k, v in self.domains.items()},
            "overall": vars(self.overall),
            "macro_accuracy": self.macro_accuracy,
            "missing_domains": list(self.missing_domains),
        }

    @staticmethod
    def from_json(obj: Dict[str, Any]) -> "EvalTable" :
        return EvalTable({k: DomainScore(**v) for k, v in obj["domains"].items()},
                         DomainScore(**obj["overall"]),
                         list(obj.get("missing_domains", [])))

    def to_frame(self) -> pl.DataFrame :
        """ columns: domain, n, accuracy, mean_reward, mean_len (plus an ``overall`` row) """
        rows = [{"domain": k, **vars(v)} for k, v in self.domains.items()]
        rows.append({"domain": "overall", **vars(self.overall)})
        return pl.DataFrame(rows, schema={"domain": pl.String, "n": pl.Int64, "accuracy": pl.Float64,
                                          "mean_reward": pl.Float64, "mean_len": pl.Float64})


def _score(rollouts: Sequence[Rollout], threshold: float) -> DomainScore :
    rewards = np.array([r.reward for r in rollouts], dtype=np.float64)
    lengths = np.array([len(r.response_ids) for r in rollouts], dtype=np.float64)
    return DomainScore(len(rollouts), float(np.mean(rewards >= threshold)), float(rewards.mean()),
                       float(lengths.mean()))


def table_from_rollouts(tasks: Sequence[Task], rollouts: Sequence[Rollout],
                        threshold: float = 1.0) -> EvalTable :
    """ aggregate scored rollouts (one per task) into an EvalTable """
    by_domain: Dict[str, List[Rollout]] = {}
    for task, r in zip(tasks, rollouts):
        by_domain.setdefault(task.domain, []).append(r)
    ordered = [d for d in DOMAINS if d in by_domain] + sorted(d for d in by_domain if d not in DOMAINS)
    return EvalTable({d: _score(by_domain[d], threshold) for d in ordered},
                     _score(rollouts, threshold),
                     [d for d in DOMAINS if d not in by_domain])


def evaluate_pass1(params: ModelParams,
                   tasks: Sequence[Task],
                   vocab: Vocab,
                   greedy: bool = True,
                   max_new: int = 192,
                   seed: int = 0,
                   n_proc: int = 1,
                   debug_flag: Optional[str] = None,
                   debug_cb: Optional[Callable] = None
                   ) -> EvalTable :
    """
    pass@1 per domain and overall: accuracy is the share of tasks whose single response
    earns the full reward (partial credit below 1.0 counts as a miss)
    """
    if len(tasks) == 0:
        raise ValueError("evaluate_pass1: no tasks")
    rollouts = decode_tasks(params, tasks, vocab, greedy=greedy, max_new=max_new, seed=seed, n_proc=n_proc)
    table = table_from_rollouts(tasks, rollouts)
    debug_handler(debug_flag, debug_cb, "evaluated pass@1", n=len(tasks),
                  accuracy=table.overall.accuracy)
    return table
