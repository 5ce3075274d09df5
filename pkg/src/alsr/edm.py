"""EDM preconditioning, the wrapped denoiser and the per-sample EDM loss.

Everything here is vectorised over a leading batch axis: ``sigma`` may be a
scalar or shape ``(B,)``, sample arrays are ``(d,)`` or ``(B, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError


@dataclass(frozen=True)
class PreconditionSet:
    c_skip: np.ndarray | float
    c_out: np.ndarray | float
    c_in: np.ndarray | float
    w_edm: np.ndarray | float


@dataclass(frozen=True)
class NoisySample:
    x: np.ndarray
    eps: np.ndarray
    sigma: np.ndarray | float
    x_tilde: np.ndarray

    @classmethod
    def make(cls, x, eps, sigma):
        x = np.asarray(x, dtype=np.float64)
        eps = np.asarray(eps, dtype=np.float64)
        if x.shape != eps.shape:
            raise ContractError(f"x {x.shape} and eps {eps.shape} differ in shape")
        s = _col(sigma, x.ndim)
        return cls(x=x, eps=eps, sigma=sigma, x_tilde=x + s * eps)


def _col(v, ndim):
    """Broadcast a per-sample scalar against ``(B, d)`` arrays."""
    v = np.asarray(v, dtype=np.float64)
    return v[..., None] if (v.ndim == 1 and ndim == 2) else v


def precondition(sigma, sigma_data=0.5) -> PreconditionSet:
    sigma = np.asarray(sigma, dtype=np.float64)
    if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
        raise DomainError("sigma must be positive and finite")
    sigma_data = np.asarray(sigma_data, dtype=np.float64)
    if not np.all(np.isfinite(sigma_data)) or np.any(sigma_data <= 0):
        raise DomainError("sigma_data must be positive and finite")
    s2 = sigma * sigma
    d2 = sigma_data * sigma_data
    total = s2 + d2
    root = np.sqrt(total)
    coeffs = dict(
        c_skip=d2 / total,
        c_out=sigma * sigma_data / root,
        c_in=1.0 / root,
        w_edm=total / (s2 * d2),
    )
    if sigma.ndim == 0 and sigma_data.ndim == 0:
        coeffs = {k: float(v) for k, v in coeffs.items()}
    return PreconditionSet(**coeffs)


def noise_conditioning(sigma):
    # c_noise = ln(sigma) / 4
    return 0.25 * np.log(sigma)


def denoise(model, noisy: NoisySample, coeffs: PreconditionSet, c_noise=None):
    """``c_skip * x_tilde + c_out * model(c_in * x_tilde, c_noise)``.

    ``model`` is any callable ``(x_in, c_noise) -> array`` with the shape of
    ``x_in``. ``c_noise`` defaults to ln(sigma)/4.
    """
    xt = noisy.x_tilde
    ndim = xt.ndim
    if c_noise is None:
        c_noise = noise_conditioning(noisy.sigma)
    r = np.asarray(model(_col(coeffs.c_in, ndim) * xt, c_noise), dtype=np.float64)
    if r.shape != xt.shape:
        raise ContractError(f"model returned shape {r.shape}, expected {xt.shape}")
    return _col(coeffs.c_skip, ndim) * xt + _col(coeffs.c_out, ndim) * r


def per_sample_edm_loss(denoised, x, coeffs: PreconditionSet):
    """``w_edm * ||denoised - x||^2`` per sample (the unweighted ALSR term)."""
    denoised = np.asarray(denoised, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if denoised.shape != x.shape:
        raise ContractError(f"denoised {denoised.shape} and x {x.shape} differ in shape")
    diff = denoised - x
    return coeffs.w_edm * np.sum(diff * diff, axis=-1)
