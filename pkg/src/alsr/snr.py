"""Noise scale <-> log-SNR coordinates and the baseline noise-level samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

SIGMA_DATA = 0.5


def _check_positive(name, value):
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")
    return arr


def sigma_to_logsnr(sigma, sigma_data=SIGMA_DATA):
    """Return ``log(sigma_data**2 / sigma**2)``. Works on scalars and arrays."""
    sigma = _check_positive("sigma", sigma)
    _check_positive("sigma_data", sigma_data)
    out = 2.0 * (math.log(sigma_data) - np.log(sigma))
    return float(out) if out.ndim == 0 else out


def logsnr_to_sigma(lam, sigma_data=SIGMA_DATA):
    lam = np.asarray(lam, dtype=np.float64)
    _check_positive("sigma_data", sigma_data)
    if not np.all(np.isfinite(lam)):
        raise DomainError(f"log-SNR must be finite, got {lam!r}")
    with np.errstate(over="ignore"):
        out = sigma_data * np.exp(-0.5 * lam)
    if not np.all(np.isfinite(out)) or np.any(out <= 0):
        raise DomainError("log-SNR maps outside the representable sigma range")
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LogUniform:
    sigma_min: float = 0.002
    sigma_max: float = 80.0

    def __post_init__(self):
        if not (0 < self.sigma_min < self.sigma_max):
            raise DomainError(
                f"log-uniform needs 0 < sigma_min < sigma_max, got {self.sigma_min}, {self.sigma_max}"
            )

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.uniform(math.log(self.sigma_min), math.log(self.sigma_max), size=size)
        return np.exp(u)

    def density_logsnr(self, lam, sigma_data=SIGMA_DATA):
        # ln(sigma) uniform => lambda uniform with Jacobian 1/2
        lam = np.asarray(lam, dtype=np.float64)
        lo = sigma_to_logsnr(self.sigma_max, sigma_data)
        hi = sigma_to_logsnr(self.sigma_min, sigma_data)
        height = 0.5 / (math.log(self.sigma_max) - math.log(self.sigma_min))
        out = np.where((lam >= lo) & (lam <= hi), height, 0.0)
        return float(out) if out.ndim == 0 else out

    def logsnr_support(self, sigma_data=SIGMA_DATA):
        return (sigma_to_logsnr(self.sigma_max, sigma_data), sigma_to_logsnr(self.sigma_min, sigma_data))


@dataclass(frozen=True)
class LogNormal:
    p_mean: float = -1.2
    p_std: float = 1.2

    def __post_init__(self):
        if not (self.p_std > 0 and math.isfinite(self.p_std) and math.isfinite(self.p_mean)):
            raise DomainError(f"log-normal needs finite p_mean and p_std > 0, got {self.p_mean}, {self.p_std}")

    def sample(self, rng: np.random.Generator, size=None):
        return np.exp(self.p_mean + self.p_std * rng.standard_normal(size=size))

    def logsnr_moments(self, sigma_data=SIGMA_DATA):
        """Mean and std of lambda; lambda = log(sigma_data^2) - 2 ln(sigma) is linear in ln(sigma)."""
        return 2.0 * math.log(sigma_data) - 2.0 * self.p_mean, 2.0 * self.p_std

    def density_logsnr(self, lam, sigma_data=SIGMA_DATA):
        mean, std = self.logsnr_moments(sigma_data)
        z = (np.asarray(lam, dtype=np.float64) - mean) / std
        out = np.exp(-0.5 * z * z) / (std * math.sqrt(2.0 * math.pi))
        return float(out) if out.ndim == 0 else out

    def logsnr_support(self, sigma_data=SIGMA_DATA, n_std=8.0):
        mean, std = self.logsnr_moments(sigma_data)
        return (mean - n_std * std, mean + n_std * std)


SamplerSpec = LogUniform | LogNormal


def sample_noise_scale(spec: SamplerSpec, rng: np.random.Generator, size=None):
    """Draw noise scales from ``spec``. Only ``rng`` is mutated."""
    return spec.sample(rng, size=size)


def density_logsnr(spec: SamplerSpec, lam, sigma_data=SIGMA_DATA):
    """Density of lambda induced by the spec's law over sigma, p(sigma(lam)) * sigma(lam) / 2."""
    _check_positive("sigma_data", sigma_data)
    return spec.density_logsnr(lam, sigma_data)


def sampler_from_dict(d: dict) -> SamplerSpec:
    kind = d.get("sampler", "lognormal")
    if kind == "lognormal":
        return LogNormal(p_mean=float(d.get("p_mean", -1.2)), p_std=float(d.get("p_std", 1.2)))
    if kind == "loguniform":
        return LogUniform(sigma_min=float(d.get("sigma_min", 0.002)), sigma_max=float(d.get("sigma_max", 80.0)))
    raise DomainError(f"unknown sampler {kind!r}; expected 'lognormal' or 'loguniform'")


def sampler_to_dict(spec: SamplerSpec) -> dict:
    if isinstance(spec, LogNormal):
        return {"sampler": "lognormal", "p_mean": spec.p_mean, "p_std": spec.p_std}
    return {"sampler": "loguniform", "sigma_min": spec.sigma_min, "sigma_max": spec.sigma_max}
