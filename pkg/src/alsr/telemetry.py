"""Streaming per-log-SNR-bin loss statistics.

Each bin keeps a Welford accumulator (count, mean, M2) over values shifted
by the bin's first observation. Whole batches are folded in with the pairwise
combination rule of Chan et al., which is also what :func:`merge` uses, so
per-value and per-batch recording agree to rounding.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, InsufficientDataError

HEATMAP_COLUMNS = ("step", "bin_index", "lambda_lo", "lambda_hi", "count", "mean", "variance")


@dataclass(frozen=True)
class BinGrid:
    lambda_min: float = -12.0
    lambda_max: float = 12.0
    n_bins: int = 32

    def __post_init__(self):
        if not (self.lambda_min < self.lambda_max):
            raise DomainError("lambda_min must be below lambda_max")
        if self.n_bins < 2:
            raise DomainError("a grid needs at least two bins")

    @property
    def width(self):
        return (self.lambda_max - self.lambda_min) / self.n_bins

    def edges(self):
        e = self.lambda_min + self.width * np.arange(self.n_bins + 1)
        e[-1] = self.lambda_max
        return e

    def locate(self, lam):
        """Bin indices (clamped) plus masks of below/above-range values."""
        lam = np.asarray(lam, dtype=np.float64)
        raw = np.floor((lam - self.lambda_min) / self.width)
        low = lam < self.lambda_min
        high = lam >= self.lambda_max
        idx = np.clip(raw, 0, self.n_bins - 1).astype(np.int64)
        return idx, low, high


@dataclass
class BinnedStats:
    grid: BinGrid
    count: np.ndarray = None
    mean: np.ndarray = None
    m2: np.ndarray = None
    out_of_range_low: int = 0
    out_of_range_high: int = 0
    # Each bin accumulates x - shift, with shift its first recorded value, so
    # large common offsets cancel exactly before any rounding happens.
    shift: np.ndarray = field(default=None, repr=False)
    _smean: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        n = self.grid.n_bins
        if self.count is None:
            self.count = np.zeros(n, dtype=np.int64)
            self.mean = np.zeros(n)
            self.m2 = np.zeros(n)
        if self.shift is None:
            self.shift = np.array(self.mean, dtype=np.float64)
        self._smean = np.asarray(self.mean, dtype=np.float64) - self.shift

    @property
    def total(self):
        # out-of-range values are clamped into the edge bins, so this is every record
        return int(self.count.sum())

    def in_range_count(self):
        c = self.count.copy()
        c[0] -= self.out_of_range_low
        c[-1] -= self.out_of_range_high
        return c

    def variance(self):
        """Per-bin sample variance; NaN where count < 2."""
        out = np.full(self.grid.n_bins, np.nan)
        ok = self.count >= 2
        out[ok] = self.m2[ok] / (self.count[ok] - 1)
        return out

    def copy(self):
        c = BinnedStats(
            self.grid, self.count.copy(), self.mean.copy(), self.m2.copy(),
            self.out_of_range_low, self.out_of_range_high, self.shift.copy(),
        )
        c._smean = self._smean.copy()
        return c

    def record(self, lam, loss_value):
        """Welford update with a single (log-SNR, loss) pair."""
        lam = float(lam)
        x = float(loss_value)
        if not (math.isfinite(lam) and math.isfinite(x)):
            raise DomainError("telemetry only records finite values")
        idx, low, high = self.grid.locate(lam)
        i = int(idx)
        self.out_of_range_low += int(low)
        self.out_of_range_high += int(high)
        if self.count[i] == 0:
            self.shift[i] = x
            self._smean[i] = 0.0
        self.count[i] += 1
        d = x - self.shift[i]
        delta = d - self._smean[i]
        self._smean[i] += delta / self.count[i]
        self.m2[i] += delta * (d - self._smean[i])
        self.mean[i] = self.shift[i] + self._smean[i]
        return self

    def record_batch(self, lambdas, losses):
        lam = np.asarray(lambdas, dtype=np.float64).ravel()
        x = np.asarray(losses, dtype=np.float64).ravel()
        if lam.shape != x.shape:
            raise DomainError("lambdas and losses must have equal length")
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(x))):
            raise DomainError("telemetry only records finite values")
        idx, low, high = self.grid.locate(lam)
        n = self.grid.n_bins
        fresh = self.count == 0
        if fresh.any() and x.size:
            # first value landing in each empty bin becomes its shift
            first = np.full(n, -1)
            first[idx[::-1]] = np.arange(x.size)[::-1]
            seed = fresh & (first >= 0)
            self.shift[seed] = x[first[seed]]
            self._smean[seed] = 0.0
        d = x - self.shift[idx]
        cnt = np.bincount(idx, minlength=n)
        s = np.bincount(idx, weights=d, minlength=n)
        hit = cnt > 0
        bmean = np.zeros(n)
        bmean[hit] = s[hit] / cnt[hit]
        dev = d - bmean[idx]
        bm2 = np.bincount(idx, weights=dev * dev, minlength=n)
        self._combine(cnt, bmean, bm2)
        self.out_of_range_low += int(low.sum())
        self.out_of_range_high += int(high.sum())
        return self

    def _combine(self, cnt, smean, m2):
        """Chan et al. pairwise update; ``smean`` is in this object's shifted frame."""
        na = self.count
        n = na + cnt
        hit = cnt > 0
        delta = smean - self._smean
        safe = np.where(n > 0, n, 1)
        self._smean = np.where(hit, self._smean + delta * (cnt / safe), self._smean)
        self.m2 = np.where(hit, self.m2 + m2 + delta * delta * (na * cnt / safe), self.m2)
        self.count = n
        self.mean = self.shift + self._smean

    def merge(self, other: "BinnedStats"):
        """Fold another accumulator over the same grid into this one."""
        if other.grid != self.grid:
            raise DomainError("cannot merge statistics over different grids")
        empty = self.count == 0
        self.shift = np.where(empty, other.shift, self.shift)
        self._smean = np.where(empty, 0.0, self._smean)
        self._combine(other.count, other._smean + (other.shift - self.shift), other.m2)
        self.out_of_range_low += other.out_of_range_low
        self.out_of_range_high += other.out_of_range_high
        return self


def record(stats: BinnedStats, grid: BinGrid, lam, loss_value) -> BinnedStats:
    if stats.grid != grid:
        raise DomainError("statistics were built over a different grid")
    return stats.record(lam, loss_value)


def merge(a: BinnedStats, b: BinnedStats) -> BinnedStats:
    return a.copy().merge(b)


@dataclass(frozen=True)
class StageSnapshot:
    step: int
    grid: BinGrid
    count: tuple
    mean: tuple
    m2: tuple
    out_of_range_low: int = 0
    out_of_range_high: int = 0

    def stats(self) -> BinnedStats:
        return BinnedStats(
            self.grid, np.array(self.count, dtype=np.int64), np.array(self.mean), np.array(self.m2),
            self.out_of_range_low, self.out_of_range_high,
        )

    def variance(self):
        return self.stats().variance()


def snapshot(stats: BinnedStats, step: int) -> StageSnapshot:
    return StageSnapshot(
        step=int(step),
        grid=stats.grid,
        count=tuple(int(c) for c in stats.count),
        mean=tuple(float(m) for m in stats.mean),
        m2=tuple(float(m) for m in stats.m2),
        out_of_range_low=stats.out_of_range_low,
        out_of_range_high=stats.out_of_range_high,
    )


def fmt(x) -> str:
    """12-significant-digit decimal used by every CSV this package writes."""
    return format(float(x), ".12g")


def heatmap_rows(snapshots):
    for snap in sorted(snapshots, key=lambda s: s.step):
        edges = snap.grid.edges()
        var = snap.variance()
        for i in range(snap.grid.n_bins):
            yield [
                str(snap.step), str(i), fmt(edges[i]), fmt(edges[i + 1]), str(snap.count[i]),
                fmt(snap.mean[i]), "" if snap.count[i] < 2 else fmt(var[i]),
            ]


def export_heatmap(snapshots, path):
    snapshots = list(snapshots)
    if not snapshots:
        raise InsufficientDataError("export_heatmap needs at least one snapshot")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEATMAP_COLUMNS)
        w.writerows(heatmap_rows(snapshots))
    return path


def read_heatmap(path):
    """Parse a heatmap CSV back into a list of dicts (variance is None when blank)."""
    rows = []
    with Path(path).open(newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append(dict(
                step=int(r["step"]), bin_index=int(r["bin_index"]),
                lambda_lo=float(r["lambda_lo"]), lambda_hi=float(r["lambda_hi"]),
                count=int(r["count"]), mean=float(r["mean"]),
                variance=None if r["variance"] == "" else float(r["variance"]),
            ))
    return rows


def variance_concentration(stats) -> float:
    """Coefficient of variation (population std / mean) of per-bin variances.

    Only bins with at least two records take part. Larger values mean the
    loss variance is concentrated in fewer log-SNR regions.
    """
    if isinstance(stats, StageSnapshot):
        stats = stats.stats()
    var = stats.variance()
    v = var[stats.count >= 2]
    if v.size < 2:
        raise InsufficientDataError(f"need >= 2 bins with count >= 2, have {v.size}")
    m = v.mean()
    if m == 0:
        return 0.0
    return float(v.std() / m)


def count_fractions(stats: BinnedStats):
    return stats.count / max(stats.total, 1)
