"""Deterministic probability-flow sampling with Heun's method."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .edm import noise_conditioning, precondition
from .errors import DomainError, SamplingError


@dataclass(frozen=True)
class SigmaSchedule:
    sigma_max: float = 80.0
    sigma_min: float = 0.002
    n_steps: int = 40
    rho: float = 7.0

    def __post_init__(self):
        if not (self.sigma_max > self.sigma_min > 0):
            raise DomainError("schedule needs sigma_max > sigma_min > 0")
        if self.n_steps < 0:
            raise DomainError("n_steps must be nonnegative")
        if not self.rho > 0:
            raise DomainError("rho must be positive")

    def sigmas(self):
        """Decreasing noise levels ``sigma_0 > ... > sigma_{n-1}`` followed by a final 0."""
        n = self.n_steps
        if n == 0:
            return np.zeros(0)
        if n == 1:
            t = np.array([self.sigma_max])
        else:
            inv = 1.0 / self.rho
            ramp = np.arange(n) / (n - 1)
            hi, lo = self.sigma_max ** inv, self.sigma_min ** inv
            t = (hi + ramp * (lo - hi)) ** self.rho
        return np.append(t, 0.0)


def as_denoiser(model, sigma_data=0.5):
    """Turn ``model`` into ``D(x, sigma)``.

    Objects exposing ``denoise(x, sigma)`` are used as-is; anything else is
    treated as a raw network ``f(x_in, c_noise)`` and wrapped with EDM
    preconditioning.
    """
    if hasattr(model, "denoise"):
        return model.denoise

    def D(x, sigma):
        c = precondition(sigma, sigma_data)
        return c.c_skip * x + c.c_out * model(c.c_in * x, noise_conditioning(sigma))

    return D


def ode_sample(model, schedule: SigmaSchedule, n: int, sigma_data=0.5, rng=None, dim=2, latents=None):
    """Integrate dx/dsigma = (x - D(x, sigma)) / sigma from sigma_max down to 0.

    Heun's second-order corrector on every step except the last, which is a
    plain Euler step into sigma = 0.
    """
    if latents is None:
        latents = rng.standard_normal((n, dim))
    D = as_denoiser(model, sigma_data)
    x = np.asarray(latents, dtype=np.float64) * schedule.sigma_max
    sig = schedule.sigmas()
    for i in range(len(sig) - 1):
        s_cur, s_next = float(sig[i]), float(sig[i + 1])
        d_cur = (x - D(x, s_cur)) / s_cur
        x_euler = x + (s_next - s_cur) * d_cur
        if s_next > 0:
            d_next = (x_euler - D(x_euler, s_next)) / s_next
            x = x + (s_next - s_cur) * 0.5 * (d_cur + d_next)
        else:
            x = x_euler
        if not np.all(np.isfinite(x)):
            raise SamplingError(f"non-finite state after step {i} (sigma {s_cur} -> {s_next})", sigma=s_cur, step_index=i)
    return x
