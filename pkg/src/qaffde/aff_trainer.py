"""Adaptive Fourier features: fit W and b so feature dot products match the kernel.

The density estimator squares the feature kernel, so the features are fitted
to ``k_{gamma/2}``; squaring then recovers ``k_gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import points_of
from .errors import InvalidArgumentError, TrainingDivergedError
from .kernelspace import FeatureMap, KernelSpec, as_points, sample_rff
from .optim import Adam, OptimizerConfig, polynomial_lr

__all__ = ["PairBatch", "build_pairs", "aff_loss", "aff_grad", "train_aff"]


@dataclass(eq=False)
class PairBatch:
    xs: np.ndarray
    ys: np.ndarray
    targets: np.ndarray
    gamma: float

    def __len__(self) -> int:
        return self.targets.shape[0]

    def take(self, idx) -> "PairBatch":
        return PairBatch(self.xs[idx], self.ys[idx], self.targets[idx], self.gamma)


def build_pairs(data, m: int, spec: KernelSpec, seed: int) -> PairBatch:
    """Sample ``m`` pairs uniformly with replacement; targets are ``k_{spec.gamma}``."""
    X = points_of(data, spec.dim)
    if m < 1:
        raise InvalidArgumentError(f"m must be >= 1, got {m}")
    rng = np.random.default_rng(seed)
    i = rng.integers(0, X.shape[0], size=m)
    j = rng.integers(0, X.shape[0], size=m)
    xs, ys = X[i], X[j]
    diff = xs - ys
    targets = np.exp(-spec.gamma * np.sum(diff * diff, axis=1))
    return PairBatch(xs, ys, targets, spec.gamma)


def _check(W: np.ndarray, batch: PairBatch) -> None:
    d = W.shape[1]
    as_points(batch.xs, d)
    as_points(batch.ys, d)


def _loss_and_grad(W, b, batch: PairBatch, want_grad: bool = True):
    D = W.shape[0]
    A = batch.xs @ W.T + b
    C = batch.ys @ W.T + b
    cosA, cosC = np.cos(A), np.cos(C)
    khat = (2.0 / D) * np.sum(cosA * cosC, axis=1)
    resid = khat - batch.targets
    loss = float(np.mean(resid**2))
    if not want_grad:
        return loss, None, None
    g = (2.0 / len(batch)) * resid
    sinA, sinC = np.sin(A), np.sin(C)
    scale = -(2.0 / D)
    dW = scale * (((sinA * cosC) * g[:, None]).T @ batch.xs + ((cosA * sinC) * g[:, None]).T @ batch.ys)
    db = scale * (g @ (sinA * cosC + cosA * sinC))
    return loss, dW, db


def aff_loss(fmap: FeatureMap, batch: PairBatch) -> float:
    """Mean squared error between targets and the raw (unnormalized) feature kernel."""
    _check(fmap.W, batch)
    return _loss_and_grad(fmap.W, fmap.b, batch, want_grad=False)[0]


def aff_grad(fmap: FeatureMap, batch: PairBatch) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of :func:`aff_loss` with respect to ``W`` and ``b``."""
    _check(fmap.W, batch)
    _, dW, db = _loss_and_grad(fmap.W, fmap.b, batch)
    return dW, db


def train_aff(
    data,
    spec: KernelSpec,
    num_features: int,
    cfg: OptimizerConfig,
    num_pairs: int = 10000,
    eval_pairs: int = 2000,
    normalize: bool = True,
    history: list | None = None,
) -> FeatureMap:
    """Learn adaptive Fourier features for the density bandwidth ``spec.gamma``.

    Starts from random Fourier features for ``gamma / 2`` and runs Adam on
    mini-batches drawn from ``num_pairs`` fixed training pairs.  The loss on a
    separate batch of ``eval_pairs`` held-out pairs is recorded every
    ``cfg.eval_every`` steps and the best recorded map is returned, so the
    result is never worse than the start on that batch.

    Parameters
    ----------
    history : list, optional
        If given, ``{"step", "lr", "loss"}`` rows are appended at each evaluation.
    """
    X = points_of(data, spec.dim)
    target = KernelSpec(spec.gamma / 2.0, spec.dim)
    init = sample_rff(target, num_features, seed=cfg.seed, normalize=normalize)
    if cfg.steps == 0:
        return init

    pairs = build_pairs(X, num_pairs, target, seed=cfg.seed + 1)
    held_out = build_pairs(X, eval_pairs, target, seed=cfg.seed + 3)
    rng = np.random.default_rng(cfg.seed + 2)
    W = np.array(init.W)
    b = np.array(init.b)
    opt = Adam([W, b], cfg)

    best_loss = _loss_and_grad(W, b, held_out, want_grad=False)[0]
    best = (W.copy(), b.copy())
    if history is not None:
        history.append({"step": 0, "lr": polynomial_lr(cfg, 0), "loss": best_loss})

    for step in range(cfg.steps):
        lr = polynomial_lr(cfg, step)
        idx = rng.integers(0, len(pairs), size=cfg.batch_size)
        loss, dW, db = _loss_and_grad(W, b, pairs.take(idx))
        if not np.isfinite(loss):
            raise TrainingDivergedError(step, loss)
        opt.step([dW, db], lr)

        done = step + 1
        if done % cfg.eval_every == 0 or done == cfg.steps:
            full = _loss_and_grad(W, b, held_out, want_grad=False)[0]
            if not np.isfinite(full):
                raise TrainingDivergedError(done, full)
            if history is not None:
                history.append({"step": done, "lr": lr, "loss": full})
            if full < best_loss:
                best_loss = full
                best = (W.copy(), b.copy())

    return FeatureMap(best[0], best[1], target.gamma, normalize)
