"""Adaptive log-SNR reweighted EDM training.

One step, per sample: draw sigma and eps, form ``x_tilde = x + sigma eps``,
precondition, denoise, and compute ``s = log(sigma_data^2 / sigma^2)``. The
batch loss is the mean of ``w_SNR(s) * w_EDM * ||D - x||^2`` with ``w_SNR``
centred on the batch mean of ``s``. ``alpha = 0`` is plain EDM training.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import telemetry
from .adam import AdamState, adam_update
from .config import RunConfig
from .datasets import generate_dataset
from .edm import noise_conditioning, precondition
from .errors import NonFiniteLossError
from .model import MlpDenoiser
from .rng import substream
from .snr import sample_noise_scale, sigma_to_logsnr
from .weighting import CenterTracker, batch_weights

log = logging.getLogger(__name__)


@dataclass
class StepRecord:
    step: int
    loss_weighted: float
    loss_unweighted: float
    mean_weight: float
    center: float
    lambdas: np.ndarray
    losses: np.ndarray  # unweighted per-sample EDM losses
    weights: np.ndarray


@dataclass
class TrainingCurve:
    steps: list = field(default_factory=list)
    loss_weighted: list = field(default_factory=list)
    loss_unweighted: list = field(default_factory=list)
    mean_weight: list = field(default_factory=list)

    def append(self, rec: StepRecord):
        if self.steps and rec.step <= self.steps[-1]:
            raise ValueError("curve steps must be strictly increasing")
        self.steps.append(rec.step)
        self.loss_weighted.append(rec.loss_weighted)
        self.loss_unweighted.append(rec.loss_unweighted)
        self.mean_weight.append(rec.mean_weight)

    def __len__(self):
        return len(self.steps)

    def rows(self):
        return zip(self.steps, self.loss_weighted, self.loss_unweighted, self.mean_weight)


def build_model(cfg: RunConfig) -> MlpDenoiser:
    m = cfg.model
    return MlpDenoiser(
        dim=cfg.data.dim, hidden=m.hidden, n_frequencies=m.n_frequencies,
        freq_min=m.freq_min, freq_max=m.freq_max, final_scale=m.final_scale,
        rng=substream(cfg.seed, "init"),
    )


def train_step(model: MlpDenoiser, batch, cfg: RunConfig, rng: np.random.Generator,
               opt_state: AdamState, center_fn=None, step=0):
    """One optimisation step on ``batch``; updates ``model`` and ``opt_state`` in place."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("batch must be a nonempty (B, d) array")
    B = x.shape[0]
    sd = cfg.sigma_data
    sigma = sample_noise_scale(cfg.sampler.spec(), rng, size=B)
    eps = rng.standard_normal(x.shape)
    x_t = x + sigma[:, None] * eps
    c = precondition(sigma, sd)
    r, cache = model.forward(c.c_in[:, None] * x_t, noise_conditioning(sigma), cache=True)
    denoised = c.c_skip[:, None] * x_t + c.c_out[:, None] * r
    resid = denoised - x
    unweighted = c.w_edm * np.sum(resid * resid, axis=1)

    s = sigma_to_logsnr(sigma, sd)
    mu = center_fn(s) if center_fn is not None else None
    w = batch_weights(s, cfg.weight, mu)
    if mu is None:
        mu = float(np.mean(s))
    loss = float(np.mean(w * unweighted))
    loss_u = float(np.mean(unweighted))

    if not (np.isfinite(loss) and np.isfinite(loss_u)):
        raise NonFiniteLossError(
            f"non-finite loss at step {step}",
            diagnostic=dict(step=step, sigma=sigma.tolist(), weights=w.tolist(),
                            losses=unweighted.tolist(), center=mu),
        )

    # d loss / d r, through D = c_skip x_t + c_out r
    upstream = ((w * c.w_edm) * (2.0 / B))[:, None] * resid * c.c_out[:, None]
    grads = model.backward(upstream, cache)
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteLossError(
                f"non-finite gradient for {k} at step {step}",
                diagnostic=dict(step=step, sigma=sigma.tolist(), losses=unweighted.tolist()),
            )
    t = cfg.trainer
    adam_update(model.params, grads, opt_state, t.learning_rate, t.beta1, t.beta2, t.eps)
    model.touch()
    return model, StepRecord(step, loss, loss_u, float(np.mean(w)), float(mu), s, unweighted, w)


def snapshot_steps(cfg: RunConfig):
    n = cfg.trainer.steps
    if n == 0:
        return []
    return sorted({max(1, int(round(f * n))) for f in cfg.telemetry.snapshot_fractions})


def eval_steps(cfg: RunConfig):
    n = cfg.trainer.steps
    every = cfg.eval.every
    pts = set(range(every, n + 1, every)) if every > 0 else set()
    pts.add(n)
    return sorted(pts)


@dataclass
class TrainingRun:
    """Everything a run produces before evaluation is layered on."""
    config: RunConfig
    model: MlpDenoiser
    curve: TrainingCurve
    stats: telemetry.BinnedStats
    snapshots: list
    evals: list = field(default_factory=list)


def train(cfg: RunConfig, on_eval=None, dataset=None) -> TrainingRun:
    """Run ``cfg.trainer.steps`` steps. ``on_eval(step, model)`` is called at each eval point."""
    data = dataset if dataset is not None else generate_dataset(cfg.data, substream(cfg.seed, "data"))
    batch_rng = substream(cfg.seed, "batch")
    noise_rng = substream(cfg.seed, "noise")
    model = build_model(cfg)
    opt = AdamState()
    center_fn = CenterTracker(cfg.weight)
    grid = cfg.telemetry.grid()
    stats = telemetry.BinnedStats(grid)
    curve = TrainingCurve()
    snaps = []
    snap_at = set(snapshot_steps(cfg))
    eval_at = set(eval_steps(cfg))
    evals = []
    if cfg.trainer.steps == 0 and on_eval is not None:
        evals.append(on_eval(0, model))
    n = data.shape[0]
    B = cfg.trainer.batch_size
    for k in range(1, cfg.trainer.steps + 1):
        batch = data[batch_rng.integers(0, n, size=B)]
        model, rec = train_step(model, batch, cfg, noise_rng, opt, center_fn, step=k)
        curve.append(rec)
        recorded = rec.losses * rec.weights if cfg.trainer.record_weighted else rec.losses
        stats.record_batch(rec.lambdas, recorded)
        if k in snap_at:
            snaps.append(telemetry.snapshot(stats, k))
        if k in eval_at and on_eval is not None:
            evals.append(on_eval(k, model))
        if k % 1000 == 0:
            log.info("step %d loss %.5f (unweighted %.5f)", k, rec.loss_weighted, rec.loss_unweighted)
    return TrainingRun(cfg, model, curve, stats, snaps, evals)


def stability_summary(curve: TrainingCurve, frac=0.1):
    """Leading vs trailing mean of the optimised (weighted) batch loss."""
    n = len(curve)
    if n == 0:
        return dict(nonfinite_events=0, leading_mean_loss=None, trailing_mean_loss=None, trailing_below_leading=None)
    k = max(1, int(round(frac * n)))
    loss = np.asarray(curve.loss_weighted)
    lead, trail = float(loss[:k].mean()), float(loss[-k:].mean())
    return dict(
        nonfinite_events=int(np.sum(~np.isfinite(loss))),
        leading_mean_loss=lead,
        trailing_mean_loss=trail,
        trailing_below_leading=bool(trail < lead),
    )
