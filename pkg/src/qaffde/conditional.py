"""Class-conditional density models and Bayes classification."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import LabeledDataset
from .density_matrix import DensityMatrixModel, fit_density_matrix, predict_batch
from .errors import InvalidArgumentError
from .kernelspace import FeatureMap, as_point, as_points
from .optim import OptimizerConfig
from .sgd_trainer import train_sgd

__all__ = ["ConditionalModel", "Classification", "fit_conditional", "classify", "classify_batch"]


@dataclass(frozen=True, eq=False)
class ConditionalModel:
    class_models: tuple[DensityMatrixModel, ...]
    priors: np.ndarray
    labels: tuple

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=np.float64).reshape(-1)
        if len(self.class_models) != len(self.labels) or priors.shape[0] != len(self.labels):
            raise InvalidArgumentError("need exactly one model and one prior per label")
        if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-10:
            raise InvalidArgumentError("priors must be a probability vector")
        dims = {m.dim for m in self.class_models}
        if len(dims) != 1:
            raise InvalidArgumentError("class models disagree on input dimension")
        object.__setattr__(self, "class_models", tuple(self.class_models))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "priors", priors)

    @property
    def dim(self) -> int:
        return self.class_models[0].dim


class Classification(NamedTuple):
    label: object
    posterior: np.ndarray
    degenerate: bool = False


def fit_conditional(
    data: LabeledDataset,
    fmap: FeatureMap,
    r: int,
    mode: str = "estimate",
    cfg: OptimizerConfig | None = None,
    gamma: float | None = None,
    labels=None,
    uniform_prior: bool = False,
) -> ConditionalModel:
    """Fit one density model per class on a shared feature map.

    ``labels`` fixes the class order (defaults to the sorted unique labels);
    every listed class must have at least one sample.  ``gamma`` defaults to
    twice ``fmap.gamma_target``.
    """
    if mode not in ("estimate", "sgd"):
        raise InvalidArgumentError(f"mode must be 'estimate' or 'sgd', got {mode!r}")
    X = as_points(data.points, fmap.dim)
    y = np.asarray(data.labels).reshape(-1)
    labels = tuple(np.unique(y).tolist()) if labels is None else tuple(labels)
    if not labels:
        raise InvalidArgumentError("no classes to fit")
    gamma = 2.0 * fmap.gamma_target if gamma is None else gamma
    cfg = cfg or OptimizerConfig()

    models, counts = [], []
    for label in labels:
        Xc = X[y == label]
        if Xc.shape[0] == 0:
            raise InvalidArgumentError(f"class {label!r} has no samples")
        rank = min(r, fmap.num_features)
        model = fit_density_matrix(Xc, fmap, rank, gamma)
        if mode == "sgd":
            model = train_sgd(Xc, fmap, model.rank, cfg, init=model)
        models.append(model)
        counts.append(Xc.shape[0])

    counts = np.asarray(counts, dtype=np.float64)
    priors = np.full(len(labels), 1.0 / len(labels)) if uniform_prior else counts / counts.sum()
    return ConditionalModel(tuple(models), priors, labels)


def _posteriors(model: ConditionalModel, dens: np.ndarray):
    """Rows of ``dens`` hold per-class densities; returns (label idx, posterior, degenerate)."""
    joint = dens * model.priors
    total = joint.sum(axis=1)
    degenerate = ~(total > 0)
    post = np.empty_like(joint)
    ok = ~degenerate
    post[ok] = joint[ok] / total[ok, None]
    post[degenerate] = 1.0 / joint.shape[1]
    # argmax returns the lowest index on ties
    idx = np.argmax(post, axis=1)
    idx[degenerate] = np.argmax(model.priors)
    return idx, post, degenerate


def class_densities(model: ConditionalModel, xs) -> np.ndarray:
    X = as_points(xs, model.dim)
    return np.column_stack([predict_batch(m, X) for m in model.class_models])


def classify_batch(model: ConditionalModel, xs) -> tuple[list, np.ndarray, np.ndarray]:
    """Labels, posterior matrix and degenerate flags for every row of ``xs``."""
    idx, post, degenerate = _posteriors(model, class_densities(model, xs))
    return [model.labels[i] for i in idx], post, degenerate


def classify(model: ConditionalModel, x) -> Classification:
    labels, post, degenerate = classify_batch(model, as_point(x, model.dim)[None, :])
    return Classification(labels[0], post[0], bool(degenerate[0]))
