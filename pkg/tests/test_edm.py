import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alsr.edm import NoisySample, denoise, noise_conditioning, per_sample_edm_loss, precondition
from alsr.errors import ContractError, DomainError

# arbitrary-precision values at sigma = 1, sigma_data = 0.5
C_OUT_1 = 0.44721359549995793928
C_IN_1 = 0.89442719099991587856


def test_examples():
    c = precondition(0.5, 0.5)
    assert c.c_skip == 0.5
    c = precondition(1.0, 0.5)
    assert c.c_skip == pytest.approx(0.2, rel=1e-15)
    assert c.c_out == pytest.approx(C_OUT_1, rel=1e-15)
    assert c.c_in == pytest.approx(C_IN_1, rel=1e-15)
    assert c.w_edm == pytest.approx(5.0, rel=1e-15)


def test_identity_vectorized(rng):
    sigma = np.exp(rng.uniform(np.log(1e-3), np.log(1e2), 1000))
    sd = np.exp(rng.uniform(np.log(0.05), np.log(5.0), 1000))
    c = precondition(sigma, sd)
    assert np.max(np.abs(c.w_edm * c.c_out ** 2 - 1)) < 1e-12
    assert np.all((c.c_skip > 0) & (c.c_skip < 1))


def test_limits():
    lo = precondition(1e-6, 0.5)
    assert abs(lo.c_skip - 1) < 1e-6 and lo.c_out < 1e-6
    hi = precondition(1e6, 0.5)
    assert hi.c_skip < 1e-6


def test_domain():
    with pytest.raises(DomainError):
        precondition(0.0)
    with pytest.raises(DomainError):
        precondition(1.0, -0.5)


def test_noise_conditioning():
    assert noise_conditioning(1.0) == 0.0
    assert noise_conditioning(np.e ** 4) == pytest.approx(1.0)


def test_noisy_sample():
    x = np.array([1.0, 2.0])
    eps = np.array([0.5, -1.0])
    ns = NoisySample.make(x, eps, 0.3)
    assert np.array_equal(ns.x_tilde, x + 0.3 * eps)
    with pytest.raises(ContractError):
        NoisySample.make(x, np.zeros(3), 0.3)


def test_denoise_skip_and_affine():
    ns = NoisySample.make(np.array([1.0, -1.0]), np.array([0.2, 0.4]), 0.7)
    c = precondition(0.7, 0.5)
    zero = lambda xin, cn: np.zeros_like(xin)
    assert np.allclose(denoise(zero, ns, c), c.c_skip * ns.x_tilde, rtol=0, atol=0)
    k = np.array([3.0, -2.0])
    const = lambda xin, cn: np.broadcast_to(k, xin.shape)
    assert np.allclose(denoise(const, ns, c), c.c_skip * ns.x_tilde + c.c_out * k, rtol=1e-15)
    with pytest.raises(ContractError):
        denoise(lambda xin, cn: np.zeros(3), ns, c)


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(1e-2, 50), st.integers(0, 2**31))
def test_denoise_linear_in_model_output(a, b, sigma, seed):
    r = np.random.default_rng(seed)
    x, eps = r.standard_normal((2, 5, 2))
    f, g = r.standard_normal((2, 5, 2))
    ns = NoisySample.make(x, eps, sigma)
    c = precondition(np.full(5, sigma), 0.5)
    df = denoise(lambda *_: f, ns, c)
    dg = denoise(lambda *_: g, ns, c)
    dm = denoise(lambda *_: a * f + b * g, ns, c)
    skip = c.c_skip[:, None] * ns.x_tilde
    assert np.allclose(dm - skip, a * (df - skip) + b * (dg - skip), rtol=1e-10, atol=1e-10)


def test_loss_examples():
    c = precondition(1.0, 0.5)
    x = np.array([0.3, 0.7])
    assert per_sample_edm_loss(x, x, c) == 0.0
    assert per_sample_edm_loss(x + [0.1, 0.0], x, c) == pytest.approx(0.05, rel=1e-12)
    with pytest.raises(ContractError):
        per_sample_edm_loss(np.zeros(3), x, c)


def test_loss_nonnegative(rng):
    sigma = np.exp(rng.normal(-1.2, 1.2, 500))
    c = precondition(sigma, 0.5)
    d, x = rng.standard_normal((2, 500, 2))
    loss = per_sample_edm_loss(d, x, c)
    assert np.all(loss > 0)
