"""A small noise-conditioned MLP with hand-written reverse-mode gradients.

Input is ``[x_in, embed(c_noise)]`` where the embedding is ``cos``/``sin`` of
``c_noise`` at geometrically spaced frequencies. Hidden layers use SiLU; the
output layer is linear. Weights are stored ``(fan_in, fan_out)`` so a layer is
``a @ W + b``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ContractError

CHECKPOINT_FORMATS = ("json", "npz")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def silu(z):
    return z * _sigmoid(z)


def silu_grad(z):
    s = _sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


class NoiseEmbedding:
    def __init__(self, n_frequencies=16, freq_min=0.25, freq_max=16.0):
        if n_frequencies < 1:
            raise ContractError("need at least one frequency")
        self.n_frequencies = n_frequencies
        self.freq_min = freq_min
        self.freq_max = freq_max
        if n_frequencies == 1:
            self.freqs = np.array([freq_min], dtype=np.float64)
        else:
            self.freqs = np.geomspace(freq_min, freq_max, n_frequencies)

    @property
    def width(self):
        return 2 * self.n_frequencies

    def __call__(self, c_noise):
        c = np.atleast_1d(np.asarray(c_noise, dtype=np.float64))
        ang = c[:, None] * self.freqs[None, :]
        return np.concatenate([np.cos(ang), np.sin(ang)], axis=1)


class MlpCache:
    __slots__ = ("version", "acts", "pre", "batch")

    def __init__(self, version, acts, pre, batch):
        self.version = version
        self.acts = acts
        self.pre = pre
        self.batch = batch


class MlpDenoiser:
    def __init__(self, dim=2, hidden=(128, 128, 128), n_frequencies=16, freq_min=0.25, freq_max=16.0,
                 rng: np.random.Generator | None = None, final_scale=1e-2):
        self.dim = int(dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.embedding = NoiseEmbedding(n_frequencies, freq_min, freq_max)
        self.final_scale = final_scale
        self.widths = (self.dim + self.embedding.width, *self.hidden, self.dim)
        self.params = {}
        self.version = 0
        rng = rng if rng is not None else np.random.default_rng(0)
        n_layers = len(self.widths) - 1
        for i in range(n_layers):
            fan_in, fan_out = self.widths[i], self.widths[i + 1]
            # He-style init for SiLU layers; a tiny last layer keeps D close to the skip path
            var = (final_scale if i == n_layers - 1 else 2.0) / fan_in
            self.params[f"W{i}"] = rng.standard_normal((fan_in, fan_out)) * np.sqrt(var)
            self.params[f"b{i}"] = np.zeros(fan_out)

    @property
    def n_layers(self):
        return len(self.widths) - 1

    def config(self):
        return dict(dim=self.dim, hidden=list(self.hidden), n_frequencies=self.embedding.n_frequencies,
                    freq_min=self.embedding.freq_min, freq_max=self.embedding.freq_max)

    def parameter_names(self):
        return [f"{p}{i}" for i in range(self.n_layers) for p in ("W", "b")]

    def n_parameters(self):
        return sum(v.size for v in self.params.values())

    def touch(self):
        """Mark parameters as changed; caches from earlier forwards become stale."""
        self.version += 1

    def _inputs(self, x_in, c_noise):
        x = np.asarray(x_in, dtype=np.float64)
        single = x.ndim == 1
        x2 = x[None, :] if single else x
        if x2.ndim != 2 or x2.shape[1] != self.dim:
            raise ContractError(f"expected inputs of dimension {self.dim}, got shape {x.shape}")
        c = np.broadcast_to(np.asarray(c_noise, dtype=np.float64), (x2.shape[0],))
        return np.concatenate([x2, self.embedding(c)], axis=1), single

    def forward(self, x_in, c_noise, cache=False):
        h, single = self._inputs(x_in, c_noise)
        acts, pre = [h], []
        p = self.params
        last = self.n_layers - 1
        for i in range(self.n_layers):
            z = h @ p[f"W{i}"] + p[f"b{i}"]
            if i < last:
                pre.append(z)
                h = silu(z)
                acts.append(h)
            else:
                h = z
        out = h[0] if single else h
        if cache:
            return out, MlpCache(self.version, acts, pre, single)
        return out

    __call__ = forward

    def backward(self, upstream, cache: MlpCache):
        """Gradients of ``sum(upstream * forward(...))`` w.r.t. every parameter."""
        if cache is None or cache.version != self.version:
            raise ContractError("stale or missing forward cache; rerun forward(cache=True)")
        g = np.asarray(upstream, dtype=np.float64)
        if cache.batch:
            g = g[None, :]
        if g.shape != (cache.acts[0].shape[0], self.dim):
            raise ContractError(f"upstream shape {g.shape} does not match the cached forward")
        p = self.params
        grads = {}
        for i in range(self.n_layers - 1, -1, -1):
            a = cache.acts[i]
            grads[f"W{i}"] = a.T @ g
            grads[f"b{i}"] = g.sum(axis=0)
            if i > 0:
                g = (g @ p[f"W{i}"].T) * silu_grad(cache.pre[i - 1])
        return {k: grads[k] for k in self.parameter_names()}

    def copy(self):
        other = object.__new__(MlpDenoiser)
        other.__dict__.update(self.__dict__)
        other.params = {k: v.copy() for k, v in self.params.items()}
        return other

    def all_finite(self):
        return all(np.all(np.isfinite(v)) for v in self.params.values())


def analytic_gaussian_denoiser(x_tilde, sigma, sigma_data=0.5):
    """Posterior mean E[x | x_tilde] for x ~ N(0, sigma_data^2 I), x_tilde = x + sigma eps."""
    sigma = np.asarray(sigma, dtype=np.float64)
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    shrink = sigma_data ** 2 / (sigma_data ** 2 + sigma ** 2)
    if shrink.ndim == 1 and x_tilde.ndim == 2:
        shrink = shrink[:, None]
    return shrink * x_tilde


class AnalyticGaussianModel:
    """Raw-network counterpart of :func:`analytic_gaussian_denoiser` under EDM preconditioning.

    For Gaussian data with the preconditioner's own ``sigma_data`` the optimal
    raw output is identically zero; the wrapper lets samplers call the exact
    posterior mean as a denoiser ``D(x, sigma)``.
    """

    def __init__(self, sigma_data=0.5):
        self.sigma_data = sigma_data

    def denoise(self, x, sigma):
        return analytic_gaussian_denoiser(x, sigma, self.sigma_data)


# checkpoint layout: ordered list of {name, shape, dtype "<f8", data}
def save_checkpoint(model: MlpDenoiser, path, fmt="json"):
    path = Path(path)
    names = model.parameter_names()
    if fmt == "json":
        doc = {
            "format": "alsr-mlp/1",
            "model": model.config(),
            "tensors": [
                {"name": n, "shape": list(model.params[n].shape), "dtype": "<f8",
                 "data": [float(v) for v in model.params[n].ravel()]}
                for n in names
            ],
        }
        path.write_text(json.dumps(doc, indent=1) + "\n")
    elif fmt == "npz":
        arrays = {n: model.params[n].astype("<f8") for n in names}
        arrays["__order__"] = np.array(names)
        arrays["__model__"] = np.array(json.dumps(model.config(), sort_keys=True))
        with path.open("wb") as fh:
            np.savez(fh, **arrays)
    else:
        raise ContractError(f"unknown checkpoint format {fmt!r}")
    return path


def load_checkpoint(path) -> MlpDenoiser:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"PK":
        with np.load(path, allow_pickle=False) as z:
            cfg = json.loads(str(z["__model__"]))
            tensors = {n: np.array(z[n], dtype=np.float64) for n in z["__order__"]}
    else:
        doc = json.loads(raw)
        cfg = doc["model"]
        tensors = {t["name"]: np.array(t["data"], dtype=np.float64).reshape(t["shape"]) for t in doc["tensors"]}
    model = MlpDenoiser(**cfg)
    if set(tensors) != set(model.parameter_names()):
        raise ContractError("checkpoint tensors do not match the declared architecture")
    for n, v in tensors.items():
        if v.shape != model.params[n].shape:
            raise ContractError(f"tensor {n} has shape {v.shape}, expected {model.params[n].shape}")
        model.params[n] = v
    return model
