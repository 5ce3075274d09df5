import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alsr.errors import ContractError
from alsr.model import (
    AnalyticGaussianModel, MlpDenoiser, NoiseEmbedding, analytic_gaussian_denoiser, load_checkpoint,
    save_checkpoint, silu, silu_grad,
)
from oracles import gradient_check


def small(seed=0, hidden=(16, 16)):
    return MlpDenoiser(dim=2, hidden=hidden, rng=np.random.default_rng(seed), final_scale=1.0)


def test_shapes_and_widths():
    m = MlpDenoiser()
    assert m.widths == (2 + 32, 128, 128, 128, 2)
    assert m.forward(np.zeros(2), 0.0).shape == (2,)
    assert m.forward(np.zeros((5, 2)), np.zeros(5)).shape == (5, 2)
    with pytest.raises(ContractError):
        m.forward(np.zeros((5, 3)), 0.0)


def test_zero_parameters_give_zero():
    m = small()
    for k in m.params:
        m.params[k][:] = 0
    assert np.array_equal(m.forward(np.ones((3, 2)), 0.4), np.zeros((3, 2)))


def test_single_linear_layer_identity():
    m = MlpDenoiser(dim=2, hidden=(), n_frequencies=4)
    W = np.zeros((2 + 8, 2))
    W[:2, :2] = np.eye(2)
    m.params["W0"] = W
    x = np.array([[0.3, -1.7], [2.0, 5.0]])
    assert np.array_equal(m.forward(x, [0.1, -3.0]), x)


def test_init_deterministic_across_processes():
    code = ("import numpy as np; from alsr.model import MlpDenoiser; "
            "m = MlpDenoiser(rng=np.random.default_rng(11)); "
            "print(m.forward(np.array([[0.1, -0.2]]), 0.3).tobytes().hex())")
    a = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
    b = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
    here = MlpDenoiser(rng=np.random.default_rng(11)).forward(np.array([[0.1, -0.2]]), 0.3).tobytes().hex()
    assert a == b == here + "\n"


def test_final_layer_init_scale():
    m = MlpDenoiser(rng=np.random.default_rng(0))
    W = m.params["W3"]
    assert W.var() == pytest.approx(1e-2 / 128, rel=0.2)
    assert m.params["W1"].var() == pytest.approx(2 / 128, rel=0.1)


def test_silu_grad_matches_difference():
    z = np.linspace(-30, 30, 1001)
    h = 1e-6
    assert np.allclose(silu_grad(z), (silu(z + h) - silu(z - h)) / (2 * h), atol=1e-8)


def test_backward_zero_upstream_and_linearity():
    m = small(3)
    x = np.random.default_rng(1).standard_normal((6, 2))
    _, cache = m.forward(x, np.linspace(-1, 1, 6), cache=True)
    up = np.random.default_rng(2).standard_normal((6, 2))
    g0 = m.backward(np.zeros_like(up), cache)
    assert all(np.all(v == 0) for v in g0.values())
    g1 = m.backward(up, cache)
    g3 = m.backward(3.0 * up, cache)
    for k in g1:
        assert np.allclose(g3[k], 3.0 * g1[k], rtol=1e-12, atol=1e-13 * np.abs(g3[k]).max())


def test_stale_cache_rejected():
    m = small()
    _, cache = m.forward(np.zeros((2, 2)), 0.0, cache=True)
    m.touch()
    with pytest.raises(ContractError):
        m.backward(np.ones((2, 2)), cache)
    with pytest.raises(ContractError):
        m.backward(np.ones((2, 2)), None)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradient_check(seed):
    assert gradient_check(small(seed), n_params=200, seed=seed) < 1e-4


def test_gradient_check_default_architecture():
    m = MlpDenoiser(rng=np.random.default_rng(4), final_scale=1.0)
    assert gradient_check(m, n_params=100, seed=4) < 1e-4


def test_embedding_injective_at_working_resolution():
    emb = NoiseEmbedding()
    c = np.arange(-10.0, 10.0 + 1e-9, 1e-3)
    e = emb(c)
    gaps = np.linalg.norm(np.diff(e, axis=0), axis=1)
    assert gaps.min() > 1e-4
    assert len({row.tobytes() for row in e}) == c.size
    assert np.array_equal(emb(0.37), emb(0.37))


def test_bounded_outputs(rng):
    m = MlpDenoiser(rng=np.random.default_rng(5))
    x = rng.uniform(-50, 50, (1_000_000, 2))
    c = rng.uniform(-3, 3, 1_000_000)
    out = np.concatenate([m.forward(x[i:i + 100_000], c[i:i + 100_000]) for i in range(0, 1_000_000, 100_000)])
    assert np.all(np.isfinite(out))


@pytest.mark.parametrize("fmt", ["json", "npz"])
def test_checkpoint_round_trip(tmp_path, fmt):
    m = MlpDenoiser(hidden=(8, 8), n_frequencies=3, rng=np.random.default_rng(2))
    path = save_checkpoint(m, tmp_path / f"ck.{fmt}", fmt)
    back = load_checkpoint(path)
    assert back.parameter_names() == m.parameter_names()
    for k in m.params:
        assert np.array_equal(back.params[k], m.params[k])
    x = np.random.default_rng(0).standard_normal((4, 2))
    assert np.array_equal(back.forward(x, 0.1), m.forward(x, 0.1))
    with pytest.raises(ContractError):
        save_checkpoint(m, tmp_path / "x", "pickle")


def test_checkpoint_mismatch(tmp_path):
    import json
    m = MlpDenoiser(hidden=(4,), n_frequencies=2)
    p = save_checkpoint(m, tmp_path / "c.json")
    doc = json.loads(p.read_text())
    doc["tensors"][0]["shape"] = [2, 4, 1]
    doc["tensors"][0]["data"] = doc["tensors"][0]["data"][:8]
    p.write_text(json.dumps(doc))
    with pytest.raises(ContractError):
        load_checkpoint(p)


def test_analytic_denoiser_examples():
    xt = np.array([[1.0, -2.0]])
    assert np.allclose(analytic_gaussian_denoiser(xt, 1e-9, 0.5), xt, rtol=1e-15)
    assert np.array_equal(analytic_gaussian_denoiser(xt, 0.5, 0.5), xt / 2)
    assert np.array_equal(AnalyticGaussianModel(0.5).denoise(xt, 0.5), xt / 2)


@pytest.mark.parametrize("sigma", [0.1, 0.5, 2.0])
def test_analytic_denoiser_mse(sigma):
    r = np.random.default_rng(12)
    sd = 0.5
    x = sd * r.standard_normal(100_000)
    xt = x + sigma * r.standard_normal(100_000)
    mse = np.mean((analytic_gaussian_denoiser(xt, sigma, sd) - x) ** 2)
    assert mse == pytest.approx(sigma ** 2 * sd ** 2 / (sigma ** 2 + sd ** 2), rel=0.01)
    # other linear shrinkages do worse
    for k in (0.9, 1.1):
        alt = k * sd ** 2 / (sd ** 2 + sigma ** 2) * xt
        assert np.mean((alt - x) ** 2) > mse
