import numpy as np
import pytest

from alsr.adam import AdamState, adam_update
from alsr.errors import ContractError


def test_zero_gradients_leave_parameters():
    p = {"w": np.array([1.0, -2.0])}
    st = AdamState()
    for _ in range(50):
        adam_update(p, {"w": np.zeros(2)}, st)
    assert np.array_equal(p["w"], [1.0, -2.0])
    assert st.t == 50


@pytest.mark.parametrize("g", [1e-6, 0.3, 50.0, -7.0])
def test_first_step_magnitude_is_lr(g):
    p = {"w": np.array([0.0])}
    adam_update(p, {"w": np.array([g])}, AdamState(), lr=1e-3)
    assert p["w"][0] == pytest.approx(-1e-3 * np.sign(g), rel=1e-2)


def test_constant_gradient_monotone_decrease():
    p = {"w": np.array([1.0])}
    st = AdamState()
    prev = []
    for _ in range(200):
        adam_update(p, {"w": np.array([0.5])}, st, lr=1e-2)
        prev.append(p["w"][0])
    assert np.all(np.diff(prev) < 0)


def test_matches_textbook_formula():
    r = np.random.default_rng(0)
    p = {"a": r.standard_normal((3, 2))}
    ref = p["a"].copy()
    m = np.zeros_like(ref)
    v = np.zeros_like(ref)
    st = AdamState()
    for t in range(1, 6):
        g = r.standard_normal((3, 2))
        adam_update(p, {"a": g}, st, lr=0.01, beta1=0.8, beta2=0.99, eps=1e-6)
        m = 0.8 * m + 0.2 * g
        v = 0.99 * v + 0.01 * g * g
        ref = ref - 0.01 * (m / (1 - 0.8 ** t)) / (np.sqrt(v / (1 - 0.99 ** t)) + 1e-6)
    assert np.allclose(p["a"], ref, rtol=1e-14, atol=1e-15)


def test_contract_errors():
    p = {"w": np.zeros(2)}
    with pytest.raises(ContractError):
        adam_update(p, {"w": np.zeros(3)}, AdamState())
    with pytest.raises(ContractError):
        adam_update(p, {"v": np.zeros(2)}, AdamState())
