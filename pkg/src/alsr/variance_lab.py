"""Exactly computable importance-sampling experiments on discrete log-SNR grids.

A :class:`DiscretePopulation` fixes, for each grid point, its base probability
``q``, the conditional mean ``m`` and conditional variance ``v`` of a scalar
per-sample gradient ``g``. Every quantity of interest (total-variance
decomposition, estimator variance under a proposal, the optimal proposal) then
has a closed form that can be checked against exhaustive enumeration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (
    AbsoluteContinuityError,
    ContractError,
    DegeneratePopulationError,
    UnsupportedSizeError,
)

PROB_TOL = 1e-12
# default simplex-lattice resolution by grid size
DEFAULT_RESOLUTION = {1: 1, 2: 1000, 3: 100, 4: 40}
MAX_LATTICE_POINTS = 4


def _prob_vector(p, name):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ContractError(f"{name} must be a nonempty 1-D vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ContractError(f"{name} entries must be finite and nonnegative")
    if abs(p.sum() - 1.0) > PROB_TOL * max(1, p.size):
        raise ContractError(f"{name} sums to {p.sum()!r}, not 1")
    return p


@dataclass(frozen=True)
class DiscretePopulation:
    lambdas: np.ndarray
    base_prob: np.ndarray
    cond_mean: np.ndarray
    cond_var: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64)
        q = _prob_vector(self.base_prob, "base_prob")
        m = np.asarray(self.cond_mean, dtype=np.float64)
        v = np.asarray(self.cond_var, dtype=np.float64)
        if not (lam.shape == q.shape == m.shape == v.shape):
            raise ContractError("lambdas, base_prob, cond_mean and cond_var must have equal length")
        if np.unique(lam).size != lam.size:
            raise ContractError("grid points must be distinct")
        if np.any(v < 0):
            raise ContractError("conditional variances must be nonnegative")
        for name, val in (("lambdas", lam), ("base_prob", q), ("cond_mean", m), ("cond_var", v)):
            object.__setattr__(self, name, val)

    @property
    def size(self):
        return self.lambdas.size

    @property
    def target(self):
        """E[g] = sum q m, the quantity every estimator here is estimating."""
        return float(np.dot(self.base_prob, self.cond_mean))

    @classmethod
    def from_dict(cls, d):
        return cls(
            lambdas=d["lambdas"], base_prob=d["base_prob"],
            cond_mean=d["cond_mean"], cond_var=d["cond_var"],
        )

    def to_dict(self):
        return {
            "lambdas": self.lambdas.tolist(), "base_prob": self.base_prob.tolist(),
            "cond_mean": self.cond_mean.tolist(), "cond_var": self.cond_var.tolist(),
        }


@dataclass(frozen=True)
class Proposal:
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _prob_vector(self.probs, "proposal"))


def _check_ac(pop: DiscretePopulation, prop: Proposal):
    p = prop.probs
    if p.shape != pop.base_prob.shape:
        raise ContractError("proposal and population grids differ in size")
    # a zero proposal is only harmless where the integrand q*g vanishes identically
    second = pop.cond_var + pop.cond_mean ** 2
    bad = (p == 0) & (pop.base_prob > 0) & (second > 0)
    if np.any(bad):
        raise AbsoluteContinuityError(
            f"proposal is zero at grid points {np.flatnonzero(bad).tolist()} where the base is positive"
        )
    return p


def total_variance_decompose(pop: DiscretePopulation):
    """Return (within, between, total) with total = within + between."""
    q, m, v = pop.base_prob, pop.cond_mean, pop.cond_var
    within = float(np.dot(q, v))
    mbar = float(np.dot(q, m))
    between = float(np.dot(q, (m - mbar) ** 2))
    return within, between, within + between


def _second_moment_terms(pop, p):
    q = pop.base_prob
    num = q * q * (pop.cond_var + pop.cond_mean ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(num == 0, 0.0, num / p)
    return t


def estimator_variance(pop: DiscretePopulation, prop: Proposal, n: int = 1) -> float:
    """Exact variance of ``(1/n) sum (q/p)(lam_i) g_i`` with ``lam_i ~ p``."""
    if n < 1:
        raise ContractError("n must be a positive integer")
    p = _check_ac(pop, prop)
    second = float(np.sum(_second_moment_terms(pop, p)))
    return (second - pop.target ** 2) / n


def optimal_proposal(pop: DiscretePopulation, mode: str = "full") -> Proposal:
    """Variance-optimal proposal.

    ``mode="std"`` weights by ``q * sqrt(v)``: proportional to the conditional
    standard deviation, exact only when the conditional means vanish.
    ``mode="full"`` weights by ``q * sqrt(v + m^2)``, the exact minimiser of
    :func:`estimator_variance`.
    """
    q = pop.base_prob
    if mode == "std":
        w = q * np.sqrt(pop.cond_var)
    elif mode == "full":
        w = q * np.sqrt(pop.cond_var + pop.cond_mean ** 2)
    else:
        raise ContractError(f"unknown mode {mode!r}; expected 'std' or 'full'")
    total = w.sum()
    if total <= 0:
        raise DegeneratePopulationError("all proposal weights are zero")
    return Proposal(w / total)


def simplex_lattice(k: int, resolution: int):
    """All k-vectors with entries in {0, 1/r, ..., 1} summing to one, as an array."""
    rows = []
    for bars in itertools.combinations(range(resolution + k - 1), k - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(resolution + k - 2 - prev)
        rows.append(parts)
    return np.asarray(rows, dtype=np.float64) / resolution


@dataclass
class OptimalityReport:
    lattice_minimizer: list
    lattice_min_variance: float
    lattice_size: int
    resolution: int
    base_variance: float
    optimal_full: list
    optimal_full_variance: float
    optimal_std: list | None
    optimal_std_variance: float | None
    slack: float
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def verify_optimality(pop: DiscretePopulation, resolution: int | None = None) -> OptimalityReport:
    """Brute-force the variance-optimal proposal on a simplex lattice.

    Every lattice proposal is scored with the exact estimator variance; the
    closed-form ``full`` proposal must not be beaten by any of them.
    """
    k = pop.size
    if k > MAX_LATTICE_POINTS:
        raise UnsupportedSizeError(f"exhaustive search supports at most {MAX_LATTICE_POINTS} grid points, got {k}")
    if resolution is None:
        resolution = DEFAULT_RESOLUTION[k]
    if resolution < 1:
        raise ContractError("resolution must be a positive integer")
    P = simplex_lattice(k, resolution)
    q = pop.base_prob
    num = q * q * (pop.cond_var + pop.cond_mean ** 2)
    need = num > 0
    feasible = np.all(P[:, need] > 0, axis=1)
    P = P[feasible]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(num == 0, 0.0, num / P)
    var = terms.sum(axis=1) - pop.target ** 2
    best = int(np.argmin(var))

    full = optimal_proposal(pop, "full")
    full_var = estimator_variance(pop, full)
    try:
        std = optimal_proposal(pop, "std")
        std_var = estimator_variance(pop, std)
        std_probs = std.probs.tolist()
    except (DegeneratePopulationError, AbsoluteContinuityError):
        std_probs, std_var = None, None
    base_var = estimator_variance(pop, Proposal(q))
    # the closed form is a true minimum, so only rounding needs slack
    slack = 1e-12 * max(1.0, abs(float(var[best])))
    return OptimalityReport(
        lattice_minimizer=P[best].tolist(),
        lattice_min_variance=float(var[best]),
        lattice_size=int(P.shape[0]),
        resolution=resolution,
        base_variance=base_var,
        optimal_full=full.probs.tolist(),
        optimal_full_variance=full_var,
        optimal_std=std_probs,
        optimal_std_variance=std_var,
        slack=slack,
        passed=bool(full_var <= var[best] + slack),
    )


def importance_estimates(pop: DiscretePopulation, prop: Proposal, n: int, reps: int, rng: np.random.Generator):
    """``reps`` independent importance-weighted estimates, each from ``n`` draws."""
    if n < 1 or reps < 1:
        raise ContractError("n and reps must be positive")
    p = _check_ac(pop, prop)
    idx = rng.choice(pop.size, size=(reps, n), p=p)
    g = pop.cond_mean[idx] + np.sqrt(pop.cond_var[idx]) * rng.standard_normal((reps, n))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p > 0, pop.base_prob / p, 0.0)
    return np.mean(ratio[idx] * g, axis=1)


def importance_estimate(pop: DiscretePopulation, prop: Proposal, n: int, rng: np.random.Generator) -> float:
    return float(importance_estimates(pop, prop, n, 1, rng)[0])


def importance_expectation(pop: DiscretePopulation, prop: Proposal) -> float:
    """Exact E of a single importance-weighted draw, by enumerating grid points."""
    p = _check_ac(pop, prop)
    total = 0.0
    for i in range(pop.size):
        if p[i] > 0:
            total += p[i] * (pop.base_prob[i] / p[i]) * pop.cond_mean[i]
    return total


def lab_report(pop: DiscretePopulation, resolution: int | None = None, ns=(1, 4, 16, 64)):
    """Everything the ``variance-lab`` command emits, as a JSON-ready dict."""
    within, between, total = total_variance_decompose(pop)
    ver = verify_optimality(pop, resolution)
    proposals = {"base": pop.base_prob, "optimal_full": np.array(ver.optimal_full)}
    if ver.optimal_std is not None:
        proposals["optimal_std"] = np.array(ver.optimal_std)
    proposals["lattice_minimizer"] = np.array(ver.lattice_minimizer)
    table = []
    for name, probs in proposals.items():
        for n in ns:
            try:
                val = estimator_variance(pop, Proposal(probs), n)
            except AbsoluteContinuityError:
                val = None
            table.append({"proposal": name, "n": n, "variance": val})
    return {
        "population": pop.to_dict(),
        "target": pop.target,
        "decomposition": {"within": within, "between": between, "total": total},
        "optimal_proposals": {"second_moment": ver.optimal_full, "conditional_std": ver.optimal_std},
        "verification": ver.to_dict(),
        "variance_table": table,
    }


def builtin_corpus(n_random=20, seed=2024):
    """Hand-built populations plus ``n_random`` seeded random ones on 2-4 point grids."""
    pops = [
        DiscretePopulation([0.0, 1.0], [0.5, 0.5], [0.0, 0.0], [1.0, 4.0]),
        DiscretePopulation([0.0, 1.0], [0.5, 0.5], [-1.0, 1.0], [0.0, 0.0]),
        DiscretePopulation([0.0, 1.0], [0.5, 0.5], [2.0, 0.0], [1.0, 4.0]),
        DiscretePopulation([-2.0, 0.0, 2.0], [0.2, 0.3, 0.5], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]),
    ]
    rng = np.random.default_rng(seed)
    for i in range(n_random):
        k = 2 + i % 3
        q = rng.dirichlet(np.ones(k))
        q = q / q.sum()
        pops.append(DiscretePopulation(
            lambdas=np.sort(rng.uniform(-8, 8, size=k)),
            base_prob=q,
            cond_mean=rng.normal(0.0, 1.0, size=k) * (i % 2),
            cond_var=rng.exponential(1.0, size=k) * np.exp(rng.uniform(-2, 2, size=k)),
        ))
    return pops
