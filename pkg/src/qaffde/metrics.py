"""Agreement metrics between true and estimated densities."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidArgumentError, UndefinedCorrelationError

__all__ = ["DensityReport", "mae", "rankdata", "spearman", "REPORT_FIELDS"]


@dataclass
class DensityReport:
    dataset: str
    method: str
    seed: int
    mae: float
    spearman: float
    n_eval: int
    wall_time_ms: float

    def to_row(self) -> dict:
        return asdict(self)


REPORT_FIELDS = ("dataset", "method", "seed", "mae", "spearman", "n_eval", "wall_time_ms")


def _pair(truth, estimate) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(truth, dtype=np.float64).reshape(-1)
    b = np.asarray(estimate, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] == 0:
        raise InvalidArgumentError("metrics need at least one value")
    return a, b


def mae(truth, estimate) -> float:
    """Mean absolute error."""
    a, b = _pair(truth, estimate)
    return float(np.mean(np.abs(a - b)))


def rankdata(x) -> np.ndarray:
    """1-based fractional ranks; tied values share their average rank."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    # boundaries of runs of equal values in sorted order
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], xs.shape[0]]
    avg = 0.5 * (starts + ends - 1) + 1.0
    ranks = np.empty_like(x)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def spearman(truth, estimate) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    a, b = _pair(truth, estimate)
    if a.shape[0] < 2:
        raise InvalidArgumentError("spearman needs at least two values")
    ra, rb = rankdata(a), rankdata(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt(np.dot(ra, ra) * np.dot(rb, rb))
    if denom == 0.0:
        raise UndefinedCorrelationError("rank correlation undefined for constant input")
    return float(np.clip(np.dot(ra, rb) / denom, -1.0, 1.0))
