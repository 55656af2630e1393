"""
rclab/harness.py

    experiment orchestration: run directories, append-only manifests, single training
    runs and multi-seed ablations
"""


from typing import List, Optional, Dict, Any, Callable, Sequence, Tuple
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from itertools import repeat
import multiprocessing
import errno
import glob
import json
import os
import re
import shutil

from rclab import __version__
from rclab.model.vocab import Vocab
from rclab.model.tinylm import init_params
from rclab.model.checkpoint import Checkpoint, save_checkpoint, load_checkpoint
from rclab.params import LabParams
from rclab.curriculum import CurriculumConfig, RunArtifacts, run as run_curriculum, select_eval_tasks, parse_variant
from rclab.skills import profile_run
from rclab.tasks import Dataset, read_dataset, write_dataset
from rclab.util import (
    derive_seed, sha256_file, append_ndjson, read_ndjson, apply_args_and_kwargs, debug_handler
)


MANIFESTS = "manifests.ndjson"


@dataclass
class RunManifest:
    """ provenance record of one CLI invocation, appended to ``<out-dir>/manifests.ndjson`` """
    command: List[str]
    config_hash: Optional[str]
    dataset_hash: Optional[str]
    seeds: List[int]
    started: str
    finished: Optional[str] = None
    artifacts: List[str] = field(default_factory=list)
    status: str = "ok"
    version: str = __version__

    def to_json(self) -> Dict[str, Any] :
        return asdict(self)


def utc_now() -> str :
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def append_manifest(out_dir: str, manifest: RunManifest) -> str :
    """ append a manifest line, returns the manifests file path """
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, MANIFESTS)
    if manifest.finished is None:
        manifest.finished = utc_now()
    append_ndjson(path, manifest.to_json())
    return path


def read_manifests(out_dir: str) -> List[Dict[str, Any]] :
    path = os.path.join(out_dir, MANIFESTS)
    return read_ndjson(path) if os.path.isfile(path) else []


class RunDirectory:
    """
    on-disk layout of one training run ::

        config.yaml
        dataset.ndjson
        checkpoints/stage_k.ckpt, latest.ckpt, final.ckpt
        runlog.ndjson
        snapshots/stage_k.json
        skills.json
        manifests.ndjson
    """

    CONFIG = "config.yaml"
    DATASET = "dataset.ndjson"
    RUNLOG = "runlog.ndjson"
    SKILLS = "skills.json"

    def __init__(self, path: str):
        self.path = path

    def _p(self, *parts: str) -> str :
        return os.path.join(self.path, *parts)

    @property
    def config_path(self) -> str :
        return self._p(self.CONFIG)

    @property
    def dataset_path(self) -> str :
        return self._p(self.DATASET)

    @property
    def runlog_path(self) -> str :
        return self._p(self.RUNLOG)

    @property
    def skills_path(self) -> str :
        return self._p(self.SKILLS)

    def checkpoint_path(self, name: str) -> str :
        return self._p("checkpoints", f"{name}.ckpt")

    def snapshot_path(self, stage_index: int) -> str :
        return self._p("snapshots", f"stage_{stage_index}.json")

    def prepare(self, params: LabParams, dataset: Optional[Dataset] = None, dataset_file: Optional[str] = None
                ) -> None :
        """ create the layout, store the full config and a copy of the dataset """
        os.makedirs(self._p("checkpoints"), exist_ok=True)
        os.makedirs(self._p("snapshots"), exist_ok=True)
        params.write_config(self.config_path, include_unchanged=True)
        if dataset_file is not None:
            if os.path.abspath(dataset_file) != os.path.abspath(self.dataset_path):
                shutil.copyfile(dataset_file, self.dataset_path)
        elif dataset is not None:
            write_dataset(self.dataset_path, dataset)

    def config_hash(self) -> str :
        return sha256_file(self.config_path)

    def dataset_hash(self) -> Optional[str] :
        return sha256_file(self.dataset_path) if os.path.isfile(self.dataset_path) else None

    # sink interface used by curriculum.run

    def log(self, record: Dict[str, Any]) -> None :
        append_ndjson(self.runlog_path, record)

    def snapshot(self, stage_index: int, snap: Dict[str, Any]) -> None :
        with open(self.snapshot_path(stage_index), "w") as f:
            json.dump(snap, f, indent=2, sort_keys=True)

    def checkpoint(self, name: str, ckpt: Checkpoint) -> None :
        save_checkpoint(self.checkpoint_path(name), ckpt)

    def load_latest(self) -> Optional[Checkpoint] :
        path = self.checkpoint_path("latest")
        return load_checkpoint(path) if os.path.isfile(path) else None

    def rewind(self, global_step: int) -> None :
        """ drop log records written after the step a resumed run restarts from """
        if not os.path.isfile(self.runlog_path):
            return
        keep = [r for r in read_ndjson(self.runlog_path)
                if (r["global_step"] < global_step if r.get("kind") != "eval" else r["global_step"] <= global_step)]
        os.remove(self.runlog_path)
        for r in keep:
            append_ndjson(self.runlog_path, r)

    def read_snapshots(self) -> List[Dict[str, Any]] :
        files = glob.glob(self._p("snapshots", "stage_*.json"))
        files.sort(key=lambda f: int(re.search(r"stage_(\d+)\.json$", f).group(1)))
        out = []
        for fn in files:
            with open(fn, "r") as f:
                out.append(json.load(f))
        return out

    def read_log(self) -> List[Dict[str, Any]] :
        return read_ndjson(self.runlog_path) if os.path.isfile(self.runlog_path) else []

    def read_skills(self) -> Optional[Dict[str, Any]] :
        if not os.path.isfile(self.skills_path):
            return None
        with open(self.skills_path, "r") as f:
            return json.load(f)

    def artifacts(self) -> List[str] :
        """ every file in the run directory, relative to it, sorted """
        out = []
        for root, _, files in os.walk(self.path):
            for fn in files:
                out.append(os.path.relpath(os.path.join(root, fn), self.path))
        return sorted(out)


def run_dir_name(variant: str, seed: int) -> str :
    return f"{parse_variant(variant)}_seed{seed}"


def train_run(params: LabParams,
              dataset: Dataset,
              variant: str,
              seed: int,
              run_path: str,
              dataset_file: Optional[str] = None,
              resume: bool = False,
              max_steps: Optional[int] = None,
              profile_skills: bool = True,
              n_proc: int = 1,
              debug_flag: Optional[str] = None,
              debug_cb: Optional[Callable] = None
              ) -> RunArtifacts :
    """
    train one variant with one seed into ``run_path``

    A finished run also gets ``skills.json`` (skill frequencies of greedy eval traces from
    the final parameters). With ``resume`` the run continues from ``checkpoints/latest.ckpt``.

    Parameters
    ----------
    params : LabParams
    dataset : Dataset
    variant : str
    seed : int
    run_path : str
    dataset_file : str, optional
        copied into the run directory instead of re-serializing ``dataset``
    resume : bool, default=False
    max_steps : int, optional
    profile_skills : bool, default=True
    n_proc : int, default=1
    debug_flag : str, optional
    debug_cb : func, optional

    Returns
    -------
    artifacts : RunArtifacts
    """
    rd = RunDirectory(run_path)
    if resume:
        if not os.path.isfile(rd.checkpoint_path("latest")):
            raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), rd.checkpoint_path("latest"))
    else:
        rd.prepare(params, dataset=dataset, dataset_file=dataset_file)
    vocab = Vocab.default()
    config = CurriculumConfig.for_variant(variant, params, seed)
    init = init_params(params.model, len(vocab), derive_seed("init", seed))
    arts = run_curriculum(config, dataset, init, vocab, sink=rd, resume=resume, max_steps=max_steps,
                          n_proc=n_proc, debug_flag=debug_flag, debug_cb=debug_cb)
    if arts.completed and profile_skills:
        tasks = select_eval_tasks(dataset, params.eval.limit_per_domain)
        table = profile_run(arts.params, tasks, vocab, max_new=params.eval.max_new, n_proc=n_proc)
        with open(rd.skills_path, "w") as f:
            json.dump({"variant": config.variant, "seed": seed, **table.to_json()}, f, indent=2, sort_keys=True)
    return arts


def _ablation_worker(params: LabParams, dataset_file: str, variant: str, seed: int, run_path: str,
                     debug_flag: Optional[str]) -> Tuple[str, int, str, Optional[str]] :
    # runs in a worker process, failures are reported rather than raised
    try:
        dataset = read_dataset(dataset_file)
        train_run(params, dataset, variant, seed, run_path, dataset_file=dataset_file, debug_flag=debug_flag,
                  debug_cb=None)
        return variant, seed, run_path, None
    except (ArithmeticError, ValueError, RuntimeError, OSError) as e:
        return variant, seed, run_path, f"{type(e).__name__}: {e}"


@dataclass
class AblationResult:
    runs: List[Tuple[str, int, str]]
    failures: List[Dict[str, Any]]

    @property
    def run_paths(self) -> List[str] :
        return [p for _, _, p in self.runs]


def run_ablation(params: LabParams,
                 dataset_file: str,
                 seeds: Sequence[int],
                 out_dir: str,
                 variants: Sequence[str] = ("RC", "CS_RL", "RL_only"),
                 n_proc: int = 1,
                 debug_flag: Optional[str] = None,
                 debug_cb: Optional[Callable] = None
                 ) -> AblationResult :
    """
    train every (variant, seed) pair from one shared config and dataset

    Each run owns ``<out_dir>/runs/<VARIANT>_seed<k>``; with ``n_proc > 1`` runs execute in
    separate worker processes. A run that aborts is listed in ``failures`` and the others
    still complete.
    """
    if not os.path.isfile(dataset_file):
        raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), dataset_file)
    variants = [parse_variant(v) for v in variants]
    jobs = [(params, dataset_file, v, s, os.path.join(out_dir, "runs", run_dir_name(v, s)))
            for v in variants for s in seeds]
    debug_handler(debug_flag, debug_cb, "starting ablation", runs=len(jobs), workers=n_proc)
    if n_proc > 1:
        worker_flag = "text_pid" if debug_flag is not None else None
        with multiprocessing.Pool(processes=n_proc) as p:
            results = p.starmap(apply_args_and_kwargs,
                                zip(repeat(_ablation_worker), [j + (worker_flag,) for j in jobs], repeat({})))
    else:
        results = [_ablation_worker(*j, debug_flag) for j in jobs]
    runs, failures = [], []
    for variant, seed, path, err in results:
        runs.append((variant, seed, path))
        if err is not None:
            failures.append({"variant": variant, "seed": seed, "run_dir": path, "error": err})
            debug_handler(debug_flag, debug_cb, "run failed", variant=variant, seed=seed, error=err)
    return AblationResult(runs, failures)
