"""Exact Gaussian kernel density estimation by naive summation.

Used as ground truth for the density-matrix estimator; deliberately has no
tree or hashing acceleration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import points_of
from .density_matrix import normalizing_constant
from .kernelspace import KernelSpec, as_point, as_points

__all__ = ["KdeModel", "kde_estimate", "kde_batch"]


@dataclass(frozen=True, eq=False)
class KdeModel:
    train_points: np.ndarray
    spec: KernelSpec

    def __post_init__(self):
        T = np.array(points_of(self.train_points, self.spec.dim))
        # canonical row order makes the summation order permutation-independent
        T = T[np.lexsort(T.T[::-1])]
        T.flags.writeable = False
        object.__setattr__(self, "train_points", T)

    @property
    def norm_const(self) -> float:
        return normalizing_constant(self.spec)


def kde_batch(model: KdeModel, xs, chunk: int = 256) -> np.ndarray:
    X = as_points(xs, model.spec.dim)
    T = model.train_points
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], chunk):
        Q = X[start : start + chunk]
        sq = np.zeros((Q.shape[0], T.shape[0]))
        for k in range(T.shape[1]):
            sq += (Q[:, k, None] - T[None, :, k]) ** 2
        out[start : start + chunk] = np.exp(-model.spec.gamma * sq).mean(axis=1)
    return out / model.norm_const


def kde_estimate(model: KdeModel, x) -> float:
    return float(kde_batch(model, as_point(x, model.spec.dim)[None, :])[0])
