"""
rclab/curriculum.py

    stage machine for the reasoning curriculum (cold-start SFT, math RL with optional
    medium -> hard sub-stages, joint RL over every domain) and its ablation variants
"""


from typing import List, Optional, Dict, Any, Callable, Sequence
from dataclasses import dataclass, field, replace
import errno
import os

import numpy as np

from rclab.model.vocab import Vocab
from rclab.model.tinylm import ModelParams
from rclab.model.optim import OptState
from rclab.model.checkpoint import Checkpoint
from rclab.params import LabParams
from rclab.rollout import evaluate_pass1
from rclab.tasks import Dataset, Task
from rclab.trainer import TaskSource, NoValidGroups, train_step_sft, train_step_rl
from rclab.util import derive_seed, debug_handler


VARIANTS = ("RC", "CS_RL", "RL_only", "RC_FLAT")

# column labels used in ablation reports
VARIANT_LABELS = {"RC": "RC", "CS_RL": "CS+RL", "RL_only": "RL", "RC_FLAT": "RC-flat"}

PHASES = ("cold_start", "math_rl", "joint_rl")


def parse_variant(name: str) -> str :
    """ canonical variant name from a case-insensitive spelling (``rc``, ``cs_rl``, ``cs+rl``, ``rl_only``, ...) """
    key = name.strip().lower().replace("+", "_").replace("-", "_")
    for v in VARIANTS:
        if v.lower() == key:
            return v
    if key == "rl":
        return "RL_only"
    raise ValueError(f"parse_variant: unknown variant {name!r}, expected one of {VARIANTS}")


@dataclass
class Stage:
    """ one curriculum stage, ``None`` filters mean every domain / difficulty """
    name: str
    kind: str
    budget: int
    phase: str
    domains: Optional[List[str]] = None
    difficulties: Optional[List[str]] = None

    def __post_init__(self):
        if self.kind not in ("sft", "rl"):
            raise ValueError(f"Stage: kind must be 'sft' or 'rl', got {self.kind!r}")
        if self.budget < 1:
            raise ValueError(f"Stage {self.name}: budget must be positive, got {self.budget}")
        if self.phase not in PHASES:
            raise ValueError(f"Stage {self.name}: unknown phase {self.phase!r}")

    def to_json(self) -> Dict[str, Any] :
        return {"name": self.name, "kind": self.kind, "budget": self.budget, "phase": self.phase,
                "domains": self.domains, "difficulties": self.difficulties}


@dataclass
class CurriculumConfig:
    """ ordered stages of one variant plus the shared parameters and run seed """
    variant: str
    stages: List[Stage]
    seed: int
    params: LabParams

    def __post_init__(self):
        if not self.stages:
            raise ValueError("CurriculumConfig: at least one stage is required")

    @property
    def total_steps(self) -> int :
        return sum(s.budget for s in self.stages)

    def to_json(self) -> Dict[str, Any] :
        return {"variant": self.variant, "seed": self.seed, "stages": [s.to_json() for s in self.stages]}

    @staticmethod
    def for_variant(variant: str, params: LabParams, seed: int) -> "CurriculumConfig" :
        """
        stage list for a variant, every other field is shared between variants

        RC      : SFT(math), RL(math, medium), RL(math, hard), RL(all)
        RC_FLAT : SFT(math), RL(math), RL(all)
        CS_RL   : SFT(math), RL(all)
        RL_only : RL(all)

        RC falls back to RC_FLAT when ``curriculum.difficulty_subcurriculum`` is off. With
        ``curriculum.match_budget`` the joint stage absorbs the budgets of the stages a
        variant drops, so all variants take the same number of steps.
        """
        variant = parse_variant(variant)
        b = params.curriculum.budgets
        matched = params.curriculum.match_budget
        sft = Stage("cold_start", "sft", b.sft, "cold_start", ["math"])
        math_steps = b.math_medium + b.math_hard
        if variant == "RC" and not params.curriculum.difficulty_subcurriculum:
            variant_stages = "RC_FLAT"
        else:
            variant_stages = variant
        match variant_stages:
            case "RC":
                stages = [sft,
                          Stage("math_medium", "rl", b.math_medium, "math_rl", ["math"], ["medium"]),
                          Stage("math_hard", "rl", b.math_hard, "math_rl", ["math"], ["hard"]),
                          Stage("joint", "rl", b.joint, "joint_rl")]
            case "RC_FLAT":
                stages = [sft,
                          Stage("math", "rl", math_steps, "math_rl", ["math"]),
                          Stage("joint", "rl", b.joint, "joint_rl")]
            case "CS_RL":
                stages = [sft, Stage("joint", "rl", b.joint + (math_steps if matched else 0), "joint_rl")]
            case _:
                extra = b.sft + math_steps if matched else 0
                stages = [Stage("joint", "rl", b.joint + extra, "joint_rl")]
        return CurriculumConfig(variant, stages, seed, params)


@dataclass
class StageState:
    """
    position of a run in its curriculum

    The per-step random stream is derived from (seed, stage index, stage step), so this
    position is all that is needed to resume it.
    """
    stage_index: int = 0
    stage_step: int = 0
    global_step: int = 0
    n_skipped: int = 0
    recent_rewards: List[float] = field(default_factory=list)
    best_eval: Optional[Dict[str, Any]] = None
    done: bool = False

    def to_json(self) -> Dict[str, Any] :
        return {"stage_index": self.stage_index, "stage_step": self.stage_step,
                "global_step": self.global_step, "n_skipped": self.n_skipped,
                "recent_rewards": list(self.recent_rewards), "best_eval": self.best_eval,
                "done": self.done}

    @staticmethod
    def from_json(obj: Dict[str, Any]) -> "StageState" :
        return StageState(**obj)


def stage_complete(state: StageState, config: CurriculumConfig) -> bool :
    """ budget reached, or (when enabled) the recent RL reward reached the advance threshold """
    stage = config.stages[state.stage_index]
    if state.stage_step >= stage.budget:
        return True
    cp = config.params.curriculum
    if stage.kind == "rl" and cp.advance_on_reward is not None:
        window = state.recent_rewards[-cp.reward_window:]
        return len(window) >= cp.reward_window and float(np.mean(window)) >= cp.advance_on_reward
    return False


def advance(state: StageState, config: CurriculumConfig) -> StageState :
    """ state of the next stage, or a ``done`` state after the last one """
    if state.done:
        return state
    if not 0 <= state.stage_index < len(config.stages):
        raise ValueError(f"advance: stage index {state.stage_index} outside the config")
    if state.stage_index + 1 == len(config.stages):
        return replace(state, done=True, recent_rewards=[])
    return replace(state, stage_index=state.stage_index + 1, stage_step=0, recent_rewards=[],
                   best_eval=None)


def select_eval_tasks(dataset: Dataset, limit_per_domain: Optional[int] = None) -> List[Task] :
    """ eval split, optionally truncated to the first ``limit_per_domain`` tasks of each domain """
    tasks = dataset.eval()
    if limit_per_domain is None:
        return tasks
    seen: Dict[str, int] = {}
    out = []
    for t in tasks:
        if seen.get(t.domain, 0) < limit_per_domain:
            seen[t.domain] = seen.get(t.domain, 0) + 1
            out.append(t)
    return out


#------------------------------------------------------------------------------
# run outputs


class MemorySink:
    """
    in-memory destination for run outputs, ``harness.RunDirectory`` provides the same
    methods backed by files
    """

    def __init__(self):
        self.records: List[Dict[str, Any]] = []
        self.snapshots: Dict[int, Dict[str, Any]] = {}
        self.checkpoints: Dict[str, Checkpoint] = {}

    def log(self, record: Dict[str, Any]) -> None :
        self.records.append(record)

    def snapshot(self, stage_index: int, snap: Dict[str, Any]) -> None :
        self.snapshots[stage_index] = snap

    def checkpoint(self, name: str, ckpt: Checkpoint) -> None :
        self.checkpoints[name] = Checkpoint(ckpt.params.copy(), ckpt.vocab,
                                            None if ckpt.opt_state is None else ckpt.opt_state.copy(),
                                            dict(ckpt.state))

    def load_latest(self) -> Optional[Checkpoint] :
        return self.checkpoints.get("latest")

    def rewind(self, global_step: int) -> None :
        self.records = [r for r in self.records
                        if (r["global_step"] < global_step if r.get("kind") != "eval" else r["global_step"] <= global_step)]

    def read_snapshots(self) -> List[Dict[str, Any]] :
        return [s for _, s in sorted(self.snapshots.items())]


@dataclass
class RunArtifacts:
    params: ModelParams
    state: StageState
    snapshots: List[Dict[str, Any]]
    log: List[Dict[str, Any]]
    completed: bool

    @property
    def checksum(self) -> str :
        return self.params.checksum()


def _check_coverage(config: CurriculumConfig, dataset: Dataset) -> None :
    for stage in config.stages:
        if stage.kind == "sft":
            pool = [t for t in dataset.cold_start() if stage.domains is None or t.domain in stage.domains]
            if not pool:
                raise ValueError(f"run: dataset has no cold-start traces for stage {stage.name}")
        else:
            TaskSource(dataset.train(), stage.domains, stage.difficulties, config.params.curriculum.mixture)


def _run_state(config: CurriculumConfig, state: StageState) -> Dict[str, Any] :
    # stored in every checkpoint header
    return {"variant": config.variant, "seed": config.seed, "stages": config.to_json()["stages"],
            "stage_state": state.to_json()}


def _snapshot(config: CurriculumConfig, state: StageState, params: ModelParams, eval_tasks: Sequence[Task],
              vocab: Vocab, n_proc: int, debug_flag, debug_cb) -> Dict[str, Any] :
    stage = config.stages[state.stage_index]
    ep = config.params.eval
    table = evaluate_pass1(params, eval_tasks, vocab, greedy=ep.greedy, max_new=ep.max_new,
                           seed=config.seed, n_proc=n_proc, debug_flag=debug_flag, debug_cb=debug_cb)
    return {"variant": config.variant, "seed": config.seed, "stage_index": state.stage_index,
            "stage": stage.name, "phase": stage.phase, "global_step": state.global_step,
            "checksum": params.checksum(), "eval": table.to_json()}


def _sft_draw(pool: Sequence[Task], batch_size: int, rng: np.random.Generator) -> List[Task] :
    idx = rng.choice(len(pool), size=batch_size, replace=len(pool) < batch_size)
    return [pool[int(i)] for i in idx]


def run(config: CurriculumConfig,
        dataset: Dataset,
        init_params: ModelParams,
        vocab: Vocab,
        sink: Optional[Any] = None,
        resume: bool = False,
        max_steps: Optional[int] = None,
        n_proc: int = 1,
        debug_flag: Optional[str] = None,
        debug_cb: Optional[Callable] = None
        ) -> RunArtifacts :
    """
    execute the curriculum stages in order

    SFT stages train on the dataset's cold-start traces, RL stages on its train split
    filtered to the stage's domains and difficulties. At each stage boundary the policy is
    evaluated on the eval split, the snapshot and a ``stage_k`` checkpoint are emitted, and
    the optimizer moments are reset (parameters carry over unchanged).

    Parameters
    ----------
    config : CurriculumConfig
    dataset : Dataset
        must cover every domain / difficulty the stages reference
    init_params : ModelParams
    vocab : Vocab
    sink : MemorySink or RunDirectory, optional
        receives log records, snapshots and checkpoints (a MemorySink when omitted)
    resume : bool, default=False
        continue from the sink's latest checkpoint
    max_steps : int, optional
        stop after this many training steps in this call (the run is then resumable)
    n_proc : int, default=1
    debug_flag : str, optional
    debug_cb : func, optional

    Returns
    -------
    artifacts : RunArtifacts

    Raises
    ------
    NonFiniteLoss
        the only training error that aborts a run
    """
    sink = MemorySink() if sink is None else sink
    _check_coverage(config, dataset)
    params = init_params
    opt_state = OptState.init(params)
    state = StageState()
    if resume:
        ckpt = sink.load_latest()
        if ckpt is None:
            raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), "latest checkpoint")
        saved = ckpt.state
        if saved.get("variant") != config.variant or saved.get("seed") != config.seed:
            raise ValueError(f"run: checkpoint belongs to variant={saved.get('variant')} seed={saved.get('seed')}, "
                             f"not variant={config.variant} seed={config.seed}")
        params = ckpt.params
        opt_state = ckpt.opt_state if ckpt.opt_state is not None else OptState.init(params)
        state = StageState.from_json(saved["stage_state"])
        sink.rewind(state.global_step)
        debug_handler(debug_flag, debug_cb, "resuming run", step=state.global_step, stage=state.stage_index)
    eval_tasks = select_eval_tasks(dataset, config.params.eval.limit_per_domain)
    cold_start = dataset.cold_start()
    cp = config.params.curriculum
    log: List[Dict[str, Any]] = []
    steps_taken = 0
    debug_handler(debug_flag, debug_cb, "starting curriculum", variant=config.variant, seed=config.seed,
                  stages=len(config.stages))
    while not state.done:
        stage = config.stages[state.stage_index]
        if stage_complete(state, config):
            snap = _snapshot(config, state, params, eval_tasks, vocab, n_proc, debug_flag, debug_cb)
            sink.snapshot(state.stage_index, snap)
            sink.checkpoint(f"stage_{state.stage_index}",
                            Checkpoint(params, vocab, opt_state, _run_state(config, state)))
            debug_handler(debug_flag, debug_cb, "stage complete", stage=stage.name,
                          accuracy=snap["eval"]["overall"]["accuracy"])
            state = advance(state, config)
            opt_state = OptState.init(params)
            continue
        if max_steps is not None and steps_taken >= max_steps:
            sink.checkpoint("latest", Checkpoint(params, vocab, opt_state, _run_state(config, state)))
            debug_handler(debug_flag, debug_cb, "stopping early", step=state.global_step)
            return RunArtifacts(params, state, [], log, completed=False)
        rng = np.random.default_rng(derive_seed("step", config.seed, state.stage_index, state.stage_step))
        if stage.kind == "sft":
            schedule = replace(config.params.sft.schedule, total_steps=stage.budget)
            sft_cfg = replace(config.params.sft, schedule=schedule)
            pool = [t for t in cold_start if stage.domains is None or t.domain in stage.domains]
            params, opt_state, stats = train_step_sft(params, opt_state,
                                                      _sft_draw(pool, sft_cfg.batch_size, rng), sft_cfg,
                                                      vocab, config.params.optimizer, n_proc=n_proc,
                                                      stage=stage.name, global_step=state.global_step)
        else:
            schedule = replace(config.params.dapo.schedule, total_steps=stage.budget)
            dapo_cfg = replace(config.params.dapo, schedule=schedule)
            source = TaskSource(dataset.train(), stage.domains, stage.difficulties, cp.mixture)
            try:
                params, opt_state, stats = train_step_rl(params, opt_state, source, dapo_cfg, rng, vocab,
                                                         config.params.optimizer, n_proc=n_proc,
                                                         stage=stage.name, global_step=state.global_step,
                                                         debug_flag=debug_flag, debug_cb=debug_cb)
            except NoValidGroups as e:
                stats = e.stats
                state.n_skipped += 1
            state.recent_rewards = (state.recent_rewards + [stats.mean_reward])[-max(cp.reward_window, 1):]
        record = stats.to_json()
        log.append(record)
        sink.log(record)
        state.stage_step += 1
        state.global_step += 1
        steps_taken += 1
        if cp.eval_every and state.stage_step % cp.eval_every == 0:
            ep = config.params.eval
            table = evaluate_pass1(params, eval_tasks, vocab, greedy=ep.greedy, max_new=ep.max_new,
                                   seed=config.seed, n_proc=n_proc)
            record = {"kind": "eval", "stage": stage.name, "global_step": state.global_step,
                      "eval": table.to_json()}
            log.append(record)
            sink.log(record)
            if state.best_eval is None or table.macro_accuracy > state.best_eval["macro_accuracy"]:
                state.best_eval = {"global_step": state.global_step, **table.to_json()}
        if cp.checkpoint_every and state.global_step % cp.checkpoint_every == 0:
            sink.checkpoint("latest", Checkpoint(params, vocab, opt_state, _run_state(config, state)))
    final = Checkpoint(params, vocab, opt_state, _run_state(config, state))
    sink.checkpoint("final", final)
    sink.checkpoint("latest", final)
    snapshots = sink.read_snapshots()
    debug_handler(debug_flag, debug_cb, "curriculum done", variant=config.variant, steps=state.global_step,
                  skipped=state.n_skipped)
    return RunArtifacts(params, state, snapshots, log, completed=True)
