"""
rclab/report.py

    serial reducer over finished run directories: ablation table (mean and population std
    over seeds), stage trends and deltas, skill frequencies, ordering checks, optional plots
"""


from typing import List, Optional, Dict, Any, Sequence, Callable
from dataclasses import dataclass, field
import errno
import json
import os

import numpy as np
import polars as pl

from rclab.params import LabParams, DOMAINS
from rclab.curriculum import VARIANTS, VARIANT_LABELS, CurriculumConfig, parse_variant
from rclab.harness import RunDirectory
from rclab.skills import SKILLS
from rclab.util import debug_handler


AVERAGE = "average"
# RC must beat RL-only by this much (2 points) on the average score
MIN_RC_GAP = 0.02


@dataclass
class RunSummary:
    """ what the report needs from one run directory """
    path: str
    variant: str
    seed: int
    snapshots: List[Dict[str, Any]]
    skills: Optional[Dict[str, Any]]
    n_stages: int
    completed: bool

    @property
    def label(self) -> str :
        return VARIANT_LABELS[self.variant]

    def final_scores(self) -> Dict[str, float] :
        """ per-domain accuracy of the last stage snapshot plus the macro ``average`` """
        ev = self.snapshots[-1]["eval"]
        scores = {d: v["accuracy"] for d, v in ev["domains"].items()}
        scores[AVERAGE] = ev["macro_accuracy"]
        return scores


def load_run(path: str) -> RunSummary :
    """ summarize a run directory, a run without a final checkpoint or a full set of snapshots is incomplete """
    rd = RunDirectory(path)
    snaps = rd.read_snapshots()
    ckpt_path = rd.checkpoint_path("final")
    if not os.path.isfile(rd.config_path):
        raise FileNotFoundError(errno.ENOENT, os.strerror(errno.ENOENT), rd.config_path)
    params = LabParams.from_config(rd.config_path)
    if snaps:
        variant, seed = snaps[0]["variant"], snaps[0]["seed"]
    else:
        # fall back on the directory name written by the harness
        v, _, s = os.path.basename(os.path.normpath(path)).rpartition("_seed")
        variant, seed = parse_variant(v), int(s)
    n_stages = len(CurriculumConfig.for_variant(variant, params, seed).stages)
    completed = os.path.isfile(ckpt_path) and len(snaps) == n_stages and n_stages > 0
    return RunSummary(path, variant, seed, snaps, rd.read_skills(), n_stages, completed)


@dataclass
class Cell:
    mean: float
    std: float
    n: int


@dataclass
class AblationTable:
    """ per-domain (and average) final accuracy per variant, mean and population std over seeds """
    variants: List[str]
    rows: Dict[str, Dict[str, Cell]] = field(default_factory=dict)

    def to_json(self) -> Dict[str, Any] :
        return {"variants": list(self.variants),
                "rows": {d: {v: vars(c) for v, c in cells.items()} for d, cells in self.rows.items()}}

    def to_frame(self) -> pl.DataFrame :
        """ long format: domain, variant, mean, std, n_seeds """
        out = [{"domain": d, "variant": v, "mean": c.mean, "std": c.std, "n_seeds": c.n}
               for d, cells in self.rows.items() for v, c in cells.items()]
        return pl.DataFrame(out, schema={"domain": pl.String, "variant": pl.String, "mean": pl.Float64,
                                         "std": pl.Float64, "n_seeds": pl.Int64})

    def to_wide(self) -> pl.DataFrame :
        """ one row per domain, one mean column per variant """
        return (self.to_frame()
                .pivot(on="variant", index="domain", values="mean")
                .select(["domain"] + self.variants))


def _ordered_labels(runs: Sequence[RunSummary]) -> List[str] :
    present = {r.label for r in runs}
    return [VARIANT_LABELS[v] for v in VARIANTS if VARIANT_LABELS[v] in present]


def ablation_table(runs: Sequence[RunSummary]) -> AblationTable :
    """ reduce completed runs into the variant comparison table """
    done = [r for r in runs if r.completed]
    table = AblationTable(_ordered_labels(done))
    scores = {lbl: [r.final_scores() for r in done if r.label == lbl] for lbl in table.variants}
    seen = {d for per in scores.values() for s in per for d in s if d != AVERAGE}
    domains = [d for d in DOMAINS if d in seen] + sorted(seen - set(DOMAINS)) + [AVERAGE]
    for d in domains:
        table.rows[d] = {}
        for lbl in table.variants:
            vals = np.array([s[d] for s in scores[lbl] if d in s], dtype=np.float64)
            if vals.size:
                # population std over seeds
                table.rows[d][lbl] = Cell(float(vals.mean()), float(vals.std()), int(vals.size))
    return table


def stage_trends(runs: Sequence[RunSummary]) -> pl.DataFrame :
    """ per-domain accuracy at every stage boundary of every run """
    rows = []
    for r in runs:
        for s in r.snapshots:
            for d, v in s["eval"]["domains"].items():
                rows.append({"variant": r.label, "seed": r.seed, "stage_index": s["stage_index"],
                             "stage": s["stage"], "phase": s["phase"], "global_step": s["global_step"],
                             "domain": d, "accuracy": v["accuracy"], "mean_reward": v["mean_reward"]})
    return pl.DataFrame(rows, schema={"variant": pl.String, "seed": pl.Int64, "stage_index": pl.Int64,
                                      "stage": pl.String, "phase": pl.String, "global_step": pl.Int64,
                                      "domain": pl.String, "accuracy": pl.Float64,
                                      "mean_reward": pl.Float64})


def stage_deltas(runs: Sequence[RunSummary]) -> pl.DataFrame :
    """
    per-domain accuracy change across phases, using the last snapshot of each phase:
    math RL minus cold start, and joint RL minus math RL (null when a phase is absent)
    """
    rows = []
    for r in runs:
        last: Dict[str, Dict[str, float]] = {}
        for s in r.snapshots:
            last[s["phase"]] = {d: v["accuracy"] for d, v in s["eval"]["domains"].items()}
        seen = {d for p in last.values() for d in p}
        domains = [d for d in DOMAINS if d in seen] + sorted(seen - set(DOMAINS))
        for d in domains:
            cs, mr, jr = (last.get(p, {}).get(d) for p in ("cold_start", "math_rl", "joint_rl"))
            rows.append({"variant": r.label, "seed": r.seed, "domain": d,
                         "math_rl_minus_cold_start": None if cs is None or mr is None else mr - cs,
                         "joint_rl_minus_math_rl": None if mr is None or jr is None else jr - mr})
    return pl.DataFrame(rows, schema={"variant": pl.String, "seed": pl.Int64, "domain": pl.String,
                                      "math_rl_minus_cold_start": pl.Float64,
                                      "joint_rl_minus_math_rl": pl.Float64})


def skill_frequencies(runs: Sequence[RunSummary]) -> pl.DataFrame :
    """ long format: variant, seed, domain, skill, frequency, n """
    rows = []
    for r in runs:
        if r.skills is None:
            continue
        for d, f in r.skills["domains"].items():
            for s in SKILLS:
                rows.append({"variant": r.label, "seed": r.seed, "domain": d, "skill": s,
                             "frequency": f[s], "n": f["n"]})
    return pl.DataFrame(rows, schema={"variant": pl.String, "seed": pl.Int64, "domain": pl.String,
                                      "skill": pl.String, "frequency": pl.Float64, "n": pl.Int64})


def ordering_checks(runs: Sequence[RunSummary], min_gap: float = MIN_RC_GAP) -> Dict[str, Any] :
    """
    per seed with all three main variants: does RC >= CS+RL >= RL hold on the average score,
    and is RC at least ``min_gap`` above RL-only (the mean gap over those seeds is reported too)
    """
    by_seed: Dict[int, Dict[str, float]] = {}
    for r in runs:
        if r.completed:
            by_seed.setdefault(r.seed, {})[r.label] = r.final_scores()[AVERAGE]
    full = {s: v for s, v in by_seed.items() if {"RC", "CS+RL", "RL"} <= set(v)}
    rc_ge_cs = sum(v["RC"] >= v["CS+RL"] for v in full.values())
    cs_ge_rl = sum(v["CS+RL"] >= v["RL"] for v in full.values())
    gaps = [v["RC"] - v["RL"] for v in full.values()]
    gap = float(np.mean(gaps)) if gaps else 0.
    return {"n_seeds": len(full), "rc_ge_cs_rl": rc_ge_cs, "cs_rl_ge_rl": cs_ge_rl,
            "both": sum(v["RC"] >= v["CS+RL"] >= v["RL"] for v in full.values()),
            "ordered_with_gap": sum(v["RC"] >= v["CS+RL"] >= v["RL"] and v["RC"] - v["RL"] >= min_gap
                                    for v in full.values()),
            "gap_rc_vs_rl_only": gap,
            "gap_rc_vs_rl_only_ok": bool(full) and gap >= min_gap}


def _plot(table: AblationTable, trends: pl.DataFrame, skills: pl.DataFrame, out_dir: str) -> List[str] :
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    # ablation bars
    domains = list(table.rows)
    x = np.arange(len(domains))
    width = 0.8 / max(len(table.variants), 1)
    fig, ax = plt.subplots(figsize=(8, 4))
    for i, v in enumerate(table.variants):
        means = [table.rows[d][v].mean if v in table.rows[d] else np.nan for d in domains]
        stds = [table.rows[d][v].std if v in table.rows[d] else 0. for d in domains]
        ax.bar(x + i * width, means, width, yerr=stds, label=v)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(domains)
    ax.set_ylabel("pass@1")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, "ablation.png")
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    # stage trends, mean over seeds
    if trends.height:
        mean = (trends.group_by(["variant", "stage_index", "domain"])
                .agg(pl.col("accuracy").mean())
                .sort(["variant", "domain", "stage_index"]))
        fig, ax = plt.subplots(figsize=(8, 4))
        for (v, d), sub in mean.group_by(["variant", "domain"], maintain_order=True):
            ax.plot(sub["stage_index"].to_list(), sub["accuracy"].to_list(), marker="o", label=f"{v} {d}")
        ax.set_xlabel("stage")
        ax.set_ylabel("pass@1")
        ax.legend(fontsize="x-small", ncol=2)
        fig.tight_layout()
        path = os.path.join(out_dir, "stage_trends.png")
        fig.savefig(path, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    # skill frequencies, mean over seeds and domains
    if skills.height:
        mean = skills.group_by(["variant", "skill"]).agg(pl.col("frequency").mean())
        labels = [v for v in table.variants if v in set(mean["variant"].to_list())] or sorted(set(mean["variant"]))
        fig, ax = plt.subplots(figsize=(6, 4))
        x = np.arange(len(SKILLS))
        width = 0.8 / max(len(labels), 1)
        for i, v in enumerate(labels):
            sub = {row["skill"]: row["frequency"] for row in mean.filter(pl.col("variant") == v).iter_rows(named=True)}
            ax.bar(x + i * width, [sub.get(s, 0.) for s in SKILLS], width, label=v)
        ax.set_xticks(x + 0.4 - width / 2)
        ax.set_xticklabels(SKILLS)
        ax.set_ylabel("frequency")
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, "skills.png")
        fig.savefig(path, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written


def write_report(run_paths: Sequence[str],
                 out_dir: str,
                 plots: bool = False,
                 failures: Optional[Sequence[Dict[str, Any]]] = None,
                 debug_flag: Optional[str] = None,
                 debug_cb: Optional[Callable] = None
                 ) -> List[str] :
    """
    reduce run directories into report files under ``out_dir``

    Writes ``ablation_table.csv``/``ablation_table.json``, ``stage_trends.csv``,
    ``stage_deltas.csv``, ``skill_frequencies.csv`` and ``report.json`` (ordering checks and
    the runs that did not finish), plus PNG plots when ``plots`` is set.

    Returns
    -------
    paths : list of str
        every file written
    """
    os.makedirs(out_dir, exist_ok=True)
    runs = [load_run(p) for p in run_paths]
    table = ablation_table(runs)
    trends = stage_trends(runs)
    deltas = stage_deltas(runs)
    skills = skill_frequencies(runs)
    written = []

    def out(name):
        path = os.path.join(out_dir, name)
        written.append(path)
        return path

    table.to_frame().write_csv(out("ablation_table.csv"))
    with open(out("ablation_table.json"), "w") as f:
        json.dump(table.to_json(), f, indent=2, sort_keys=True)
    trends.write_csv(out("stage_trends.csv"))
    deltas.write_csv(out("stage_deltas.csv"))
    skills.write_csv(out("skill_frequencies.csv"))
    incomplete = [{"run_dir": r.path, "variant": r.variant, "seed": r.seed,
                   "snapshots": len(r.snapshots), "stages": r.n_stages}
                  for r in runs if not r.completed]
    summary = {"runs": [{"run_dir": r.path, "variant": r.variant, "seed": r.seed, "completed": r.completed}
                        for r in runs],
               "ordering": ordering_checks(runs),
               "incomplete": incomplete,
               "failures": list(failures or [])}
    with open(out("report.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    if plots:
        written += _plot(table, trends, skills, out_dir)
    debug_handler(debug_flag, debug_cb, "report written", runs=len(runs), incomplete=len(incomplete),
                  files=len(written))
    return written
