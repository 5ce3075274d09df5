import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.integrate import trapezoid

from alsr.errors import DomainError
from alsr.snr import (
    LogNormal, LogUniform, density_logsnr, logsnr_to_sigma, sample_noise_scale,
    sampler_from_dict, sampler_to_dict, sigma_to_logsnr,
)

# high-precision evaluation of log(0.5^2 / 1^2)
LOG_QUARTER = -1.3862943611198906


def test_logsnr_examples():
    assert sigma_to_logsnr(0.5, 0.5) == 0.0
    assert sigma_to_logsnr(1.0, 0.5) == pytest.approx(LOG_QUARTER, rel=1e-15)
    assert logsnr_to_sigma(0.0, 0.5) == 0.5
    assert logsnr_to_sigma(-1.386294, 0.5) == pytest.approx(1.0, abs=1e-6)
    assert logsnr_to_sigma(2 * math.log(10), 1.0) == pytest.approx(0.1, rel=1e-14)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_nonpositive_rejected(bad):
    with pytest.raises(DomainError):
        sigma_to_logsnr(bad, 0.5)
    with pytest.raises(DomainError):
        sigma_to_logsnr(1.0, bad)


def test_round_trip_grid():
    s = np.geomspace(1e-3, 1e2, 2001)
    for sd in (0.25, 0.5, 1.0, 3.0):
        back = logsnr_to_sigma(sigma_to_logsnr(s, sd), sd)
        assert np.max(np.abs(back / s - 1)) < 1e-12


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-3, 1e2), st.floats(0.05, 5.0))
def test_round_trip_property(sigma, sd):
    assert logsnr_to_sigma(sigma_to_logsnr(sigma, sd), sd) == pytest.approx(sigma, rel=1e-12)


def test_strictly_decreasing(rng):
    s = np.sort(rng.uniform(1e-3, 100, size=5000))
    s = np.unique(s)
    lam = sigma_to_logsnr(s, 0.5)
    assert np.all(np.diff(lam) < 0)


def test_sampler_examples(rng):
    s = LogUniform(0.01, 100).sample(rng, 100_000)
    assert abs(np.mean(s <= 1.0) - 0.5) < 0.01
    s = sample_noise_scale(LogNormal(-1.2, 1.2), rng, 100_000)
    assert abs(np.mean(np.log(s)) + 1.2) < 0.02


def test_sampler_determinism():
    a = LogNormal().sample(np.random.default_rng(3), 50)
    b = LogNormal().sample(np.random.default_rng(3), 50)
    assert np.array_equal(a, b)


def test_invalid_specs():
    with pytest.raises(DomainError):
        LogUniform(1.0, 0.5)
    with pytest.raises(DomainError):
        LogNormal(0.0, 0.0)


def test_loguniform_density_constant():
    spec = LogUniform(0.002, 80.0)
    lo, hi = spec.logsnr_support(0.5)
    lam = np.linspace(lo + 1e-9, hi - 1e-9, 101)
    expected = 0.5 / (math.log(80.0) - math.log(0.002))
    assert np.allclose(density_logsnr(spec, lam), expected, rtol=1e-12)
    assert density_logsnr(spec, hi + 1.0) == 0.0
    assert density_logsnr(spec, lo - 1.0) == 0.0


def test_lognormal_density_is_normal():
    spec = LogNormal(-1.2, 1.2)
    lam = np.linspace(-10, 15, 77)
    ref = stats.norm.pdf(lam, loc=math.log(0.25) + 2.4, scale=2.4)
    assert np.allclose(density_logsnr(spec, lam, 0.5), ref, rtol=1e-12)


@pytest.mark.parametrize("spec", [LogNormal(), LogNormal(0.3, 0.5), LogUniform(), LogUniform(0.01, 100)])
def test_density_integrates_to_one(spec):
    lo, hi = spec.logsnr_support(0.5)
    lam = np.linspace(lo, hi, 200_001)
    assert abs(trapezoid(density_logsnr(spec, lam), lam) - 1) < 1e-4


@pytest.mark.parametrize("spec", [LogNormal(), LogUniform()])
def test_histogram_matches_density(spec):
    rng = np.random.default_rng(99)
    lam = sigma_to_logsnr(sample_noise_scale(spec, rng, 100_000), 0.5)
    lo, hi = spec.logsnr_support(0.5)
    if isinstance(spec, LogNormal):
        lo, hi = np.quantile(lam, [0.001, 0.999])
    edges = np.linspace(lo, hi, 51)
    obs, _ = np.histogram(lam, edges)
    fine = np.linspace(lo, hi, 50 * 200 + 1)
    dens = density_logsnr(spec, fine, 0.5)
    probs = np.array([trapezoid(dens[i * 200:(i + 1) * 200 + 1], fine[i * 200:(i + 1) * 200 + 1]) for i in range(50)])
    exp = probs / probs.sum() * obs.sum()
    assert stats.chisquare(obs, exp).pvalue > 0.001


def test_sampler_dict_round_trip():
    for spec in (LogNormal(-1.0, 1.1), LogUniform(0.01, 50.0)):
        assert sampler_from_dict(sampler_to_dict(spec)) == spec
    with pytest.raises(DomainError):
        sampler_from_dict({"sampler": "uniform"})
