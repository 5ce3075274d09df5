"""Batch-centred log-SNR weight kernels.

Two kernels are offered. ``exponential`` is ``exp(-alpha (lam - c)^2)``;
``rational`` is ``1 / (1 + alpha (lam - c)^2)`` and is the training default.
Both equal 1 at the centre and are identically 1 when ``alpha == 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError

KERNELS = ("rational", "exponential")
CENTER_MODES = ("batch_mean", "fixed")
TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class WeightConfig:
    alpha: float = 0.05
    kernel: str = "rational"
    center_mode: str = "batch_mean"
    center_value: float = 0.0
    # 0 disables; otherwise the batch centre is an EMA of batch means with this momentum
    center_ema: float = 0.0
    normalize_batch_weights: bool = False

    def __post_init__(self):
        if not (self.alpha >= 0 and np.isfinite(self.alpha)):
            raise DomainError(f"alpha must be a finite nonnegative number, got {self.alpha}")
        if self.kernel not in KERNELS:
            raise DomainError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if self.center_mode not in CENTER_MODES:
            raise DomainError(f"center_mode must be one of {CENTER_MODES}, got {self.center_mode!r}")
        if not (0.0 <= self.center_ema < 1.0):
            raise DomainError("center_ema must lie in [0, 1)")


def batch_center(lambdas) -> float:
    lam = np.asarray(lambdas, dtype=np.float64)
    if lam.size == 0:
        raise ContractError("batch_center needs at least one log-SNR value")
    return float(np.mean(lam))


def weight(lam, center, cfg: WeightConfig):
    lam = np.asarray(lam, dtype=np.float64)
    u = cfg.alpha * np.square(lam - center)
    if cfg.kernel == "rational":
        out = 1.0 / (1.0 + u)
    else:
        # exp(-u) underflows for u > ~745; keep the weight strictly positive
        out = np.maximum(np.exp(-u), TINY)
    return float(out) if out.ndim == 0 else out


class CenterTracker:
    """Resolves the kernel centre for successive batches (batch mean, fixed, or EMA)."""

    def __init__(self, cfg: WeightConfig):
        self.cfg = cfg
        self.ema = None

    def __call__(self, lambdas) -> float:
        if self.cfg.center_mode == "fixed":
            return float(self.cfg.center_value)
        mu = batch_center(lambdas)
        if self.cfg.center_ema == 0.0:
            return mu
        m = self.cfg.center_ema
        self.ema = mu if self.ema is None else m * self.ema + (1.0 - m) * mu
        return self.ema


def batch_weights(lambdas, cfg: WeightConfig, center=None):
    lam = np.asarray(lambdas, dtype=np.float64)
    if center is None:
        center = cfg.center_value if cfg.center_mode == "fixed" else batch_center(lam)
    w = np.asarray(weight(lam, center, cfg), dtype=np.float64)
    if cfg.normalize_batch_weights:
        w = w / np.mean(w)
    return w


def apply_weights(per_sample_losses, lambdas, cfg: WeightConfig, center=None):
    losses = np.asarray(per_sample_losses, dtype=np.float64)
    lam = np.asarray(lambdas, dtype=np.float64)
    if losses.shape != lam.shape:
        raise ContractError(f"losses {losses.shape} and log-SNR values {lam.shape} differ in shape")
    return losses * batch_weights(lam, cfg, center)
