import numpy as np

from .errors import ContractError


class AdamState:
    def __init__(self):
        self.m = {}
        self.v = {}
        self.t = 0


def adam_update(params, grads, state: AdamState, lr=2e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam, in place on ``params``. Returns ``(params, state)``."""
    if set(grads) != set(params):
        raise ContractError("gradient names do not match parameter names")
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for k in params:
        g = grads[k]
        if g.shape != params[k].shape:
            raise ContractError(f"gradient for {k} has shape {g.shape}, parameter has {params[k].shape}")
        if k not in state.m:
            state.m[k] = np.zeros_like(params[k])
            state.v[k] = np.zeros_like(params[k])
        m, v = state.m[k], state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        params[k] -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state
