"""
rclab/trainer.py

    SFT (token-mean negative log-likelihood) and DAPO (clipped surrogate, no KL term,
    dynamic sampling) optimization steps
"""


from typing import List, Optional, Dict, Any, Tuple, Sequence, Callable, Iterable
from dataclasses import dataclass, field, asdict
from collections import Counter

import numpy as np

from rclab.model.vocab import Vocab, encode, encode_prompt
from rclab.model.tinylm import ModelParams, LossBatch, LossSequence, loss_and_grad, sequence_logprobs
from rclab.model.optim import OptState, adam_step, clip_grad_norm, lr_at
from rclab.params import DapoConfig, SftConfig, AdamWConfig
from rclab.rollout import Group, roll_groups
from rclab.tasks import Task, NoOracle
from rclab.util import debug_handler


class DegenerateGroup(ValueError):
    """ advantages requested for a group whose rewards have zero variance """


class NoValidGroups(RuntimeError):
    """ every sampled group was degenerate in every resample round, ``stats`` describes the attempt """

    def __init__(self, msg: str, stats: "StepStats"):
        super().__init__(msg)
        self.stats = stats


@dataclass
class StepStats:
    """ one line of the run log """
    kind: str
    stage: str = ""
    global_step: int = 0
    stage_step: int = 0
    lr: float = 0.
    loss: Optional[float] = None
    mean_reward: Optional[float] = None
    n_kept: int = 0
    n_dropped: int = 0
    mean_len: float = 0.
    n_tokens: int = 0
    rounds: int = 0
    clip_frac: float = 0.
    grad_norm: float = 0.
    domains: Dict[str, int] = field(default_factory=dict)
    skipped: bool = False

    def to_json(self) -> Dict[str, Any] :
        return asdict(self)


def compute_advantages(rewards: Sequence[float]) -> List[float] :
    """
    group-normalized advantages ``(R_i - mean) / std`` with the population std

    Raises
    ------
    DegenerateGroup
        if all rewards are identical
    """
    r = np.asarray(rewards, dtype=np.float64)
    if r.size < 2:
        raise ValueError(f"compute_advantages: need at least 2 rewards, got {r.size}")
    # exact comparison, the mean of identical floats can carry rounding error
    if np.all(r == r[0]):
        raise DegenerateGroup(f"compute_advantages: zero reward variance ({r[0]} x {r.size})")
    return ((r - r.mean()) / r.std()).tolist()


def filter_groups(groups: Iterable[Group], threshold: float = 1.0) -> Tuple[List[Group], List[Group]] :
    """
    split groups into (kept, dropped): a group is kept when at least one rollout reaches
    ``threshold`` and at least one does not
    """
    kept, dropped = [], []
    for g in groups:
        hits = [r.reward >= threshold for r in g.rollouts]
        (kept if any(hits) and not all(hits) else dropped).append(g)
    return kept, dropped


class TaskSource:
    """
    draws training prompts for one curriculum stage

    Tasks are restricted to ``domains`` / ``difficulties`` (None = any). Each draw first picks
    a domain with probability proportional to its ``mixture`` weight (uniform when no
    mixture is given) and then a task uniformly within that domain.
    """

    def __init__(self,
                 tasks: Sequence[Task],
                 domains: Optional[Iterable[str]] = None,
                 difficulties: Optional[Iterable[str]] = None,
                 mixture: Optional[Dict[str, float]] = None):
        domains = None if domains is None else set(domains)
        difficulties = None if difficulties is None else set(difficulties)
        self.by_domain: Dict[str, List[Task]] = {}
        for t in tasks:
            if (domains is None or t.domain in domains) and (difficulties is None or t.difficulty in difficulties):
                self.by_domain.setdefault(t.domain, []).append(t)
        if mixture is not None:
            self.by_domain = {d: ts for d, ts in self.by_domain.items() if mixture.get(d, 0.) > 0.}
        if not self.by_domain:
            raise ValueError(f"TaskSource: no tasks for domains={sorted(domains) if domains else None} "
                             f"difficulties={sorted(difficulties) if difficulties else None}")
        self.domains = sorted(self.by_domain)
        w = np.array([1. if mixture is None else mixture[d] for d in self.domains], dtype=np.float64)
        self.weights = w / w.sum()

    def __len__(self) -> int :
        return sum(len(ts) for ts in self.by_domain.values())

    def draw(self, n: int, rng: np.random.Generator) -> List[Task] :
        """ ``n`` tasks drawn with replacement """
        out = []
        for _ in range(n):
            d = self.domains[int(rng.choice(len(self.domains), p=self.weights))]
            pool = self.by_domain[d]
            out.append(pool[int(rng.integers(len(pool)))])
        return out


def build_dapo_batch(kept_groups: Sequence[Group], cfg: DapoConfig) -> LossBatch :
    """ DAPO batch over every rollout of the kept groups, advantages broadcast per rollout """
    seqs = []
    for g in kept_groups:
        if g.advantages is None:
            g.advantages = compute_advantages(g.rewards)
        for r, a in zip(g.rollouts, g.advantages):
            seqs.append(LossSequence(r.prompt_ids, r.response_ids, r.old_logprobs, a))
    return LossBatch("dapo", seqs, eps_low=cfg.eps_low, eps_high=cfg.eps_high)


def _sft_sequence(task: Task, vocab: Vocab) -> LossSequence :
    if task.oracle_trace is None:
        raise NoOracle(f"build_sft_batch: task {task.id} has no oracle trace")
    return LossSequence(encode_prompt(task.prompt, vocab), encode(task.oracle_trace, vocab) + [vocab.eos])


def build_sft_batch(tasks: Sequence[Task], vocab: Vocab) -> LossBatch :
    """ SFT batch: prompt as context, oracle trace plus EOS as target """
    return LossBatch("sft", [_sft_sequence(t, vocab) for t in tasks])


def sft_loss(params: ModelParams, tasks: Sequence[Task], vocab: Vocab) -> float :
    """ token-mean negative log-likelihood of the oracle traces (no gradient) """
    total, n = 0., 0
    for t in tasks:
        s = _sft_sequence(t, vocab)
        lp = sequence_logprobs(params, s.prompt_ids, s.response_ids)
        total -= float(lp.sum())
        n += lp.size
    if n == 0:
        raise ValueError("sft_loss: no target tokens")
    return total / n


def _apply_update(params: ModelParams,
                  opt_state: OptState,
                  batch: LossBatch,
                  adamw: AdamWConfig,
                  schedule,
                  n_proc: int,
                  stats: StepStats
                  ) -> Tuple[ModelParams, OptState] :
    loss, grad, info = loss_and_grad(params, batch, n_proc=n_proc)
    grad, norm = clip_grad_norm(grad, adamw.max_grad_norm)
    stats.lr = lr_at(opt_state.step, schedule)
    new_params, new_state = adam_step(params, grad, opt_state, opt_state.step, adamw, schedule)
    stats.loss = loss
    stats.n_tokens = info.n_tokens
    stats.clip_frac = info.clip_frac
    stats.grad_norm = norm
    return new_params, new_state


def train_step_sft(params: ModelParams,
                   opt_state: OptState,
                   tasks: Sequence[Task],
                   cfg: SftConfig,
                   vocab: Vocab,
                   adamw: AdamWConfig,
                   n_proc: int = 1,
                   stage: str = "",
                   global_step: int = 0,
                   debug_flag: Optional[str] = None,
                   debug_cb: Optional[Callable] = None
                   ) -> Tuple[ModelParams, OptState, StepStats] :
    """
    one optimizer step on the mean negative log-likelihood of the oracle traces, prompt
    tokens are context only and never targets

    Parameters
    ----------
    params : ModelParams
    opt_state : OptState
        its update count is the position in ``cfg.schedule``
    tasks : sequence of Task
        cold-start tasks carrying verified oracle traces
    cfg : SftConfig
    vocab : Vocab
    adamw : AdamWConfig
    n_proc : int, default=1
    stage : str, default=""
        stage label recorded in the stats
    global_step : int, default=0
    debug_flag : str, optional
    debug_cb : func, optional

    Returns
    -------
    params : ModelParams
    opt_state : OptState
    stats : StepStats
    """
    batch = build_sft_batch(tasks, vocab)
    stats = StepStats("sft", stage=stage, global_step=global_step, stage_step=opt_state.step,
                      n_kept=len(tasks), domains=dict(Counter(t.domain for t in tasks)),
                      mean_len=float(np.mean([len(s.response_ids) for s in batch.sequences])))
    params, opt_state = _apply_update(params, opt_state, batch, adamw, cfg.schedule, n_proc, stats)
    debug_handler(debug_flag, debug_cb, "sft step", stage=stage, step=global_step, loss=stats.loss,
                  lr=stats.lr)
    return params, opt_state, stats


def train_step_rl(params: ModelParams,
                  opt_state: OptState,
                  task_source: TaskSource,
                  cfg: DapoConfig,
                  rng: np.random.Generator,
                  vocab: Vocab,
                  adamw: AdamWConfig,
                  n_proc: int = 1,
                  stage: str = "",
                  global_step: int = 0,
                  debug_flag: Optional[str] = None,
                  debug_cb: Optional[Callable] = None
                  ) -> Tuple[ModelParams, OptState, StepStats] :
    """
    one DAPO step with dynamic sampling

    Samples ``cfg.prompt_batch`` groups of ``cfg.group_size`` rollouts, scores and filters
    them, then tops the batch up with fresh prompts for at most ``cfg.max_resample_rounds``
    extra rounds. The loss covers every token of the kept groups and is normalized by
    their total token count. There is no KL term.

    Parameters
    ----------
    params : ModelParams
    opt_state : OptState
        its update count is the position in ``cfg.schedule``
    task_source : TaskSource
    cfg : DapoConfig
    rng : numpy.random.Generator
        drives prompt draws and rollout seeds
    vocab : Vocab
    adamw : AdamWConfig
    n_proc : int, default=1
    stage : str, default=""
    global_step : int, default=0
    debug_flag : str, optional
    debug_cb : func, optional

    Returns
    -------
    params : ModelParams
    opt_state : OptState
    stats : StepStats

    Raises
    ------
    NoValidGroups
        if no group survives filtering in any round, the caller's parameters stay as they were
    """
    kept: List[Group] = []
    n_dropped = 0
    rewards: List[float] = []
    lengths: List[int] = []
    domains: Counter = Counter()
    rounds = 0
    while rounds <= cfg.max_resample_rounds and len(kept) < cfg.prompt_batch:
        tasks = task_source.draw(cfg.prompt_batch - len(kept), rng)
        seed = int(rng.integers(2**62))
        groups = roll_groups(params, tasks, cfg.group_size, cfg.temperature, cfg.max_new, seed, vocab,
                             n_proc=n_proc)
        for g in groups:
            domains[g.task.domain] += 1
            rewards.extend(g.rewards)
            lengths.extend(len(r.response_ids) for r in g.rollouts)
        k, d = filter_groups(groups, cfg.success_threshold)
        kept.extend(k)
        n_dropped += len(d)
        rounds += 1
    stats = StepStats("rl", stage=stage, global_step=global_step, stage_step=opt_state.step,
                      mean_reward=float(np.mean(rewards)), n_kept=len(kept), n_dropped=n_dropped,
                      mean_len=float(np.mean(lengths)), rounds=rounds, domains=dict(sorted(domains.items())))
    if not kept:
        stats.skipped = True
        stats.lr = lr_at(opt_state.step, cfg.schedule)
        debug_handler(debug_flag, debug_cb, "rl step skipped, no valid groups", stage=stage,
                      step=global_step, rounds=rounds)
        raise NoValidGroups(f"train_step_rl: all {n_dropped} groups degenerate after {rounds} rounds", stats)
    for g in kept:
        g.advantages = compute_advantages(g.rewards)
    batch = build_dapo_batch(kept, cfg)
    params, opt_state = _apply_update(params, opt_state, batch, adamw, cfg.schedule, n_proc, stats)
    debug_handler(debug_flag, debug_cb, "rl step", stage=stage, step=global_step, loss=stats.loss,
                  reward=stats.mean_reward, kept=stats.n_kept, dropped=stats.n_dropped)
    return params, opt_state, stats
