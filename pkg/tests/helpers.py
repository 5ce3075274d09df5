from alsr.config import RunConfig


def tiny_config(seed=0, steps=30, alpha=0.05, **overrides):
    cfg = RunConfig(seed=seed).with_(
        data=dict(n_train=2000),
        model=dict(hidden=(16, 16), n_frequencies=4),
        trainer=dict(steps=steps, batch_size=32, learning_rate=1e-3),
        eval=dict(every=10, n_generated=400, n_reference=400, n_steps=6, n_projections=16, ed_max_points=400),
        weight=dict(alpha=alpha),
        ablate=dict(alphas=(0.0, 0.1), seeds=(0, 1)),
    )
    return cfg.with_(**overrides) if overrides else cfg
