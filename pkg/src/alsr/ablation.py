"""Cross-product sweeps over (alpha, kernel, seed) with mean ± std aggregation."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .evaluation import METRICS, run_training, write_run
from .telemetry import fmt

log = logging.getLogger(__name__)


def run_dir_name(alpha, kernel, seed):
    return f"alpha{fmt(alpha)}_{kernel}_seed{seed}"


def mean_std(values):
    """Mean and sample (n-1) std; std is None for fewer than two values."""
    v = np.asarray(sorted(values), dtype=np.float64)
    if v.size == 0:
        return None, None
    return float(v.mean()), (float(v.std(ddof=1)) if v.size > 1 else None)


@dataclass
class AblationCell:
    alpha: float
    kernel: str
    per_seed: dict = field(default_factory=dict)  # seed -> final metrics dict
    failed: dict = field(default_factory=dict)    # seed -> error message

    @property
    def ok(self):
        return not self.failed

    def aggregate(self, metric):
        return mean_std([m[metric] for m in self.per_seed.values()])


@dataclass
class AblationTable:
    cells: list
    seeds: list

    @property
    def n_failed(self):
        return sum(len(c.failed) for c in self.cells)

    def header(self):
        cols = ["alpha", "kernel", "status", "n_seeds"]
        for m in METRICS:
            cols += [f"{m}_mean", f"{m}_std"] + [f"{m}_seed{s}" for s in self.seeds]
        return cols

    def rows(self):
        for c in self.cells:
            row = [fmt(c.alpha), c.kernel, "ok" if c.ok else "failed", str(len(c.per_seed))]
            for m in METRICS:
                mu, sd = c.aggregate(m)
                row += ["" if mu is None else fmt(mu), "" if sd is None else fmt(sd)]
                row += [fmt(c.per_seed[s][m]) if s in c.per_seed else "" for s in self.seeds]
            yield row

    def write_csv(self, path):
        with Path(path).open("w") as fh:
            fh.write(",".join(self.header()) + "\n")
            for r in self.rows():
                fh.write(",".join(r) + "\n")
        return Path(path)


def _run_one(cfg: RunConfig, out_dir):
    try:
        rep = run_training(cfg)
        if out_dir is not None:
            write_run(rep, out_dir)
        return rep.final, [(e["step"], e["energy_distance"], e["sliced_wasserstein"]) for e in rep.evals], None
    except Exception as e:  # a failed cell must not abort the sweep
        return None, None, f"{type(e).__name__}: {e}"


def run_ablation(base_cfg: RunConfig, alphas, kernels, seeds, out_dir=None, jobs=1, runner=None):
    """Train every (alpha, kernel, seed) combination and aggregate final metrics per (alpha, kernel)."""
    alphas, kernels, seeds = list(alphas), list(kernels), sorted(seeds)
    if not (alphas and kernels and seeds):
        raise ValueError("alphas, kernels and seeds must all be nonempty")
    runner = runner or _run_one
    out = Path(out_dir) if out_dir is not None else None
    jobs_list = []
    for a in alphas:
        for k in kernels:
            for s in seeds:
                cfg = base_cfg.with_(weight=dict(alpha=float(a), kernel=k))
                cfg = replace(cfg, seed=int(s))
                d = out / "runs" / run_dir_name(a, k, s) if out is not None else None
                jobs_list.append(((a, k, s), cfg, d))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(runner, [j[1] for j in jobs_list], [j[2] for j in jobs_list]))
    else:
        results = [runner(cfg, d) for _, cfg, d in jobs_list]

    cells = {(a, k): AblationCell(float(a), k) for a in alphas for k in kernels}
    curves = []
    for ((a, k, s), _, _), (final, ev, err) in zip(jobs_list, results):
        cell = cells[(a, k)]
        if err is not None:
            log.warning("run alpha=%s kernel=%s seed=%s failed: %s", a, k, s, err)
            cell.failed[s] = err
            continue
        cell.per_seed[s] = final
        curves += [(a, k, s, *e) for e in ev]
    table = AblationTable(list(cells.values()), seeds)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        table.write_csv(out / "ablation.csv")
        with (out / "ablation_curves.csv").open("w") as fh:
            fh.write("alpha,kernel,seed,step,energy_distance,sliced_wasserstein\n")
            for a, k, s, step, ed, sw in curves:
                fh.write(f"{fmt(a)},{k},{s},{step},{fmt(ed)},{fmt(sw)}\n")
    return table

