"""Dataset containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .kernelspace import as_points

__all__ = ["Dataset", "LabeledDataset", "points_of"]


@dataclass(eq=False)
class Dataset:
    """Points with an optional ground-truth density at each point."""

    points: np.ndarray
    true_density: np.ndarray | None = None
    name: str = "data"
    seed: int | None = None

    def __post_init__(self):
        self.points = as_points(self.points)
        if self.true_density is not None:
            td = np.asarray(self.true_density, dtype=np.float64).reshape(-1)
            if td.shape[0] != self.points.shape[0]:
                raise InvalidArgumentError("true_density length does not match points")
            self.true_density = td

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, idx) -> "Dataset":
        td = None if self.true_density is None else self.true_density[idx]
        return Dataset(self.points[idx], td, self.name, self.seed)


@dataclass(eq=False)
class LabeledDataset:
    """Points with one class label per row."""

    points: np.ndarray
    labels: np.ndarray
    name: str = "labeled"

    def __post_init__(self):
        self.points = as_points(self.points)
        self.labels = np.asarray(self.labels).reshape(-1)
        if self.labels.shape[0] != self.points.shape[0]:
            raise InvalidArgumentError("labels length does not match points")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def points_of(data, dim: int | None = None) -> np.ndarray:
    """Extract the ``(n, d)`` point matrix from a dataset or array; rejects empty input."""
    if isinstance(data, (Dataset, LabeledDataset)):
        X = data.points
        if dim is not None and X.shape[1] != dim:
            raise InvalidArgumentError(f"data has dimension {X.shape[1]}, expected {dim}")
    else:
        X = as_points(data, dim)
    if X.shape[0] == 0:
        raise InvalidArgumentError("dataset is empty")
    return X
