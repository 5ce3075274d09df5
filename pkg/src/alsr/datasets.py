"""Synthetic 2-D (or d-D) training distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

KINDS = ("gaussian_iso", "gaussian_mixture", "two_moons", "checkerboard")


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "gaussian_mixture"
    n_train: int = 50_000
    dim: int = 2
    sigma_data: float = 0.5  # gaussian_iso only
    centers: tuple = ((-0.5, 0.0), (0.5, 0.0))
    component_std: float = 0.15
    noise_std: float = 0.05  # two_moons
    cells: int = 4  # checkerboard
    scale: float = 1.0  # two_moons / checkerboard overall scale

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown dataset kind {self.kind!r}; expected one of {KINDS}")
        if self.n_train < 1:
            raise ConfigError("n_train must be positive")
        for name in ("sigma_data", "component_std", "noise_std", "scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.kind == "gaussian_mixture":
            c = np.asarray(self.centers, dtype=np.float64)
            if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] != self.dim:
                raise ConfigError(f"centers must be a (k, {self.dim}) list")
        if self.kind in ("two_moons", "checkerboard") and self.dim != 2:
            raise ConfigError(f"{self.kind} is two-dimensional")
        if self.cells < 1:
            raise ConfigError("cells must be positive")

    @property
    def k(self):
        return len(self.centers)


def sample_dataset(spec: DatasetSpec, n: int, rng: np.random.Generator):
    d = spec.dim
    if spec.kind == "gaussian_iso":
        return spec.sigma_data * rng.standard_normal((n, d))
    if spec.kind == "gaussian_mixture":
        centers = np.asarray(spec.centers, dtype=np.float64)
        # noise first, labels second: a 1-component mixture is then a shifted gaussian_iso
        z = spec.component_std * rng.standard_normal((n, d))
        labels = rng.integers(0, centers.shape[0], size=n) if centers.shape[0] > 1 else np.zeros(n, dtype=np.int64)
        return centers[labels] + z
    if spec.kind == "two_moons":
        t = rng.uniform(0.0, np.pi, size=n)
        upper = rng.random(n) < 0.5
        x = np.where(upper, np.cos(t), 1.0 - np.cos(t))
        y = np.where(upper, np.sin(t), 0.5 - np.sin(t))
        pts = np.stack([x - 0.5, y - 0.25], axis=1) + spec.noise_std * rng.standard_normal((n, 2))
        return spec.scale * pts
    # checkerboard on [-1, 1]^2 with cells x cells squares, half of them populated
    c = spec.cells
    out = np.empty((0, 2))
    while out.shape[0] < n:
        pts = rng.uniform(-1.0, 1.0, size=(2 * n, 2))
        ij = np.floor((pts + 1.0) * c / 2.0).astype(np.int64)
        keep = (ij[:, 0] + ij[:, 1]) % 2 == 0
        out = np.concatenate([out, pts[keep]])
    return spec.scale * out[:n]


def generate_dataset(spec: DatasetSpec, rng: np.random.Generator):
    """``spec.n_train`` training points; deterministic for a given generator state."""
    return sample_dataset(spec, spec.n_train, rng)
