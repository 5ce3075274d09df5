"""Run-level evaluation: generation quality, oracle error, and the run report."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import telemetry
from .datasets import sample_dataset
from .errors import InsufficientDataError
from .manifest import write_manifest
from .metrics import energy_distance, sliced_wasserstein
from .model import analytic_gaussian_denoiser, save_checkpoint
from .rng import substream
from .sampling import as_denoiser, ode_sample
from .trainer import TrainingRun, stability_summary, train

log = logging.getLogger(__name__)

METRIC_NOTE = (
    "energy_distance and sliced_wasserstein on generated vs held-out samples stand in for FID; "
    "absolute FID values are not reproduced"
)
METRICS = ("energy_distance", "sliced_wasserstein")


class Evaluator:
    """Scores a model against a fixed held-out set.

    Latents, the reference set and projection directions are drawn once from
    their own substreams, so scores at different steps differ only through
    the model.
    """

    def __init__(self, cfg: config_mod.RunConfig):
        self.cfg = cfg
        e = cfg.eval
        self.reference = sample_dataset(cfg.data, e.n_reference, substream(cfg.seed, "reference"))
        self.latents = substream(cfg.seed, "eval").standard_normal((e.n_generated, cfg.data.dim))
        self.schedule = e.schedule()

    def generate(self, model):
        return ode_sample(model, self.schedule, self.cfg.eval.n_generated, self.cfg.sigma_data,
                          latents=self.latents)

    def score(self, samples):
        e = self.cfg.eval
        return dict(
            energy_distance=energy_distance(samples, self.reference, max_points=e.ed_max_points, seed=self.cfg.seed),
            sliced_wasserstein=sliced_wasserstein(samples, self.reference, e.n_projections,
                                                  rng=substream(self.cfg.seed, "projections")),
            n_generated=int(samples.shape[0]),
            n_reference=int(self.reference.shape[0]),
            seed=self.cfg.seed,
        )

    def __call__(self, step, model):
        out = dict(step=int(step), **self.score(self.generate(model)))
        log.info("eval step %d: ED %.5f SW %.5f", step, out["energy_distance"], out["sliced_wasserstein"])
        return out


def denoiser_relative_error(model, sigmas, sigma_data=0.5, n=4096, rng=None, dim=2):
    """Per-sigma ``E||D - D*||^2 / E||D*||^2`` for x ~ N(0, sigma_data^2 I).

    ``D*`` is the exact posterior mean; noisy inputs are drawn from the true
    marginal ``N(0, (sigma_data^2 + sigma^2) I)``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    D = as_denoiser(model, sigma_data)
    out = []
    for s in np.atleast_1d(sigmas):
        x = sigma_data * rng.standard_normal((n, dim))
        xt = x + s * rng.standard_normal((n, dim))
        ref = analytic_gaussian_denoiser(xt, s, sigma_data)
        diff = D(xt, float(s)) - ref
        out.append(float(np.sum(diff * diff) / np.sum(ref * ref)))
    return np.array(out)


@dataclass
class RunReport:
    config: config_mod.RunConfig
    run: TrainingRun
    evals: list
    final: dict
    concentration: dict
    stability: dict
    files: dict = field(default_factory=dict)

    @property
    def model(self):
        return self.run.model

    @property
    def curve(self):
        return self.run.curve

    @property
    def snapshots(self):
        return self.run.snapshots

    def metrics(self):
        w = self.config.weight
        return {
            "note": METRIC_NOTE,
            "seed": self.config.seed,
            "steps": self.config.trainer.steps,
            "alpha": w.alpha,
            "kernel": w.kernel,
            "weighting_active": w.alpha > 0,
            "sampler": self.config.sampler.sampler,
            "dataset": self.config.data.kind,
            "final": self.final,
            "evals": self.evals,
            "variance_concentration": self.concentration,
            "stability": self.stability,
        }


def concentration_by_step(snapshots):
    out = {}
    for s in snapshots:
        try:
            out[str(s.step)] = telemetry.variance_concentration(s)
        except InsufficientDataError:
            out[str(s.step)] = None
    return out


def run_training(cfg: config_mod.RunConfig, evaluate=True) -> RunReport:
    evaluator = Evaluator(cfg) if evaluate else None
    run = train(cfg, on_eval=evaluator)
    evals = run.evals
    final = dict(evals[-1]) if evals else {}
    final.pop("step", None)
    return RunReport(
        config=cfg, run=run, evals=evals, final=final,
        concentration=concentration_by_step(run.snapshots),
        stability=stability_summary(run.curve),
    )


def write_curve(curve, path):
    with Path(path).open("w") as fh:
        fh.write("step,loss_weighted,loss_unweighted,mean_weight\n")
        for step, lw, lu, mw in curve.rows():
            fh.write(f"{step},{telemetry.fmt(lw)},{telemetry.fmt(lu)},{telemetry.fmt(mw)}\n")
    return Path(path)


def write_eval_curve(evals, path):
    with Path(path).open("w") as fh:
        fh.write("step,energy_distance,sliced_wasserstein\n")
        for e in evals:
            fh.write(f"{e['step']},{telemetry.fmt(e['energy_distance'])},{telemetry.fmt(e['sliced_wasserstein'])}\n")
    return Path(path)


def dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return Path(path)


def write_run(report: RunReport, out_dir) -> dict:
    """Write every run artefact under ``out_dir``; returns {name: path}."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    files["curve"] = write_curve(report.curve, out / "curve.csv")
    if report.snapshots:
        files["heatmap"] = telemetry.export_heatmap(report.snapshots, out / "heatmap.csv")
    files["eval_curve"] = write_eval_curve(report.evals, out / "eval_curve.csv")
    files["metrics"] = dump_json(report.metrics(), out / "metrics.json")
    (out / "resolved_config.toml").write_text(config_mod.dumps(report.config))
    files["resolved_config"] = out / "resolved_config.toml"
    ext = "json" if report.config.checkpoint.format == "json" else "npz"
    files["checkpoint"] = save_checkpoint(report.model, out / f"checkpoint.{ext}", report.config.checkpoint.format)
    files["manifest"] = write_manifest(out)
    report.files = files
    return files
