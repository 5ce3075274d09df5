"""Independent reference computations shared by the unit and acceptance tests.

Nothing here imports the training loop; the reference EDM loop is written
from the formulas directly so the comparison is between two implementations.
"""

import math

import numpy as np

# E||X - Y|| for X ~ N(0, I2), Y ~ N((10, 0), I2): Rice-distribution mean via
# adaptive quadrature (10.100516044538812); a 10^6-pair Monte Carlo gave 10.0986.
# E||X - X'|| = sqrt(pi) for unit 2-D Gaussians.
ED_CROSS_SEP10 = 10.100516044538812
ED_GAUSS_SEP10 = 2 * ED_CROSS_SEP10 - 2 * math.sqrt(math.pi)  # 16.656124387266594
ED_GAUSS_SEP10_MC = 16.652296126185785

# mean |<u, e1>| for u uniform on the unit circle
SW_CIRCLE_FACTOR = 2 / math.pi


def relative_errors(a, b, floor=1e-8):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def gradient_check(model, n_params=200, h=1e-5, seed=0, batch=8):
    """Max relative error of backward() against central differences on random entries."""
    r = np.random.default_rng(seed)
    x = r.standard_normal((batch, model.dim))
    c = r.normal(0.0, 1.0, batch)
    up = r.standard_normal((batch, model.dim))

    def loss():
        return float(np.sum(up * model.forward(x, c)))

    _, cache = model.forward(x, c, cache=True)
    grads = model.backward(up, cache)
    names = model.parameter_names()
    sizes = np.array([model.params[n].size for n in names])
    picks = r.choice(sizes.sum(), size=n_params, replace=False)
    bounds = np.cumsum(sizes)
    analytic, numeric = [], []
    for flat in picks:
        k = int(np.searchsorted(bounds, flat, side="right"))
        name = names[k]
        j = flat - (bounds[k - 1] if k else 0)
        p = model.params[name].reshape(-1)
        old = p[j]
        p[j] = old + h
        up_l = loss()
        p[j] = old - h
        dn_l = loss()
        p[j] = old
        numeric.append((up_l - dn_l) / (2 * h))
        analytic.append(grads[name].reshape(-1)[j])
    return float(np.max(relative_errors(analytic, numeric)))


def reference_edm_curve(cfg):
    """Plain EDM training with no log-SNR weight, written independently of the trainer.

    Uses the same named random streams and the same model and optimiser
    classes, so with ``alpha = 0`` it must reproduce the trainer exactly.
    Returns rows ``(step, loss, loss, 1.0)``.
    """
    from alsr.adam import AdamState, adam_update
    from alsr.datasets import generate_dataset
    from alsr.model import MlpDenoiser
    from alsr.rng import substream

    sd = cfg.sigma_data
    data = generate_dataset(cfg.data, substream(cfg.seed, "data"))
    batch_rng = substream(cfg.seed, "batch")
    noise_rng = substream(cfg.seed, "noise")
    m = cfg.model
    model = MlpDenoiser(dim=cfg.data.dim, hidden=m.hidden, n_frequencies=m.n_frequencies, freq_min=m.freq_min,
                        freq_max=m.freq_max, final_scale=m.final_scale, rng=substream(cfg.seed, "init"))
    opt = AdamState()
    t = cfg.trainer
    p_mean, p_std = cfg.sampler.p_mean, cfg.sampler.p_std
    rows = []
    for step in range(1, t.steps + 1):
        x = data[batch_rng.integers(0, data.shape[0], size=t.batch_size)]
        sigma = np.exp(p_mean + p_std * noise_rng.standard_normal(size=t.batch_size))
        eps = noise_rng.standard_normal(x.shape)
        xt = x + sigma[:, None] * eps
        c_skip = sd * sd / (sigma * sigma + sd * sd)
        c_out = sigma * sd / np.sqrt(sigma * sigma + sd * sd)
        c_in = 1.0 / np.sqrt(sigma * sigma + sd * sd)
        w_edm = (sigma * sigma + sd * sd) / (sigma * sd) ** 2
        r, cache = model.forward(c_in[:, None] * xt, 0.25 * np.log(sigma), cache=True)
        resid = c_skip[:, None] * xt + c_out[:, None] * r - x
        per = w_edm * np.sum(resid * resid, axis=1)
        loss = float(np.mean(per))
        B = t.batch_size
        grads = model.backward((w_edm * (2.0 / B))[:, None] * resid * c_out[:, None], cache)
        adam_update(model.params, grads, opt, t.learning_rate, t.beta1, t.beta2, t.eps)
        model.touch()
        rows.append((step, loss, loss, 1.0))
    return rows


def write_reference_curve(rows, path):
    g = lambda v: format(float(v), ".12g")
    with open(path, "w") as fh:
        fh.write("step,loss_weighted,loss_unweighted,mean_weight\n")
        for step, a, b, c in rows:
            fh.write(f"{step},{g(a)},{g(b)},{g(c)}\n")
    return path
