"""Adam with a polynomial learning-rate decay, shared by both trainers."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = ["OptimizerConfig", "polynomial_lr", "Adam"]


@dataclass(frozen=True)
class OptimizerConfig:
    """Hyperparameters for Adam training with polynomial decay.

    ``eval_every`` controls how often the full training/validation loss is
    recorded for best-checkpoint selection.
    """

    initial_lr: float = 1e-2
    final_lr: float = 1e-5
    decay_power: float = 1.0
    steps: int = 1000
    batch_size: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    eval_every: int = 50

    def __post_init__(self):
        if not (0 < self.final_lr <= self.initial_lr):
            raise InvalidArgumentError("need 0 < final_lr <= initial_lr")
        if self.batch_size < 1:
            raise InvalidArgumentError("batch_size must be >= 1")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise InvalidArgumentError("beta1 and beta2 must lie in (0, 1)")
        if self.steps < 0:
            raise InvalidArgumentError("steps must be >= 0")
        if self.eval_every < 1:
            raise InvalidArgumentError("eval_every must be >= 1")
        if self.epsilon <= 0:
            raise InvalidArgumentError("epsilon must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def polynomial_lr(cfg: OptimizerConfig, step: int) -> float:
    """Learning rate at ``step`` (0-based) of ``cfg.steps``."""
    if cfg.steps == 0:
        return cfg.initial_lr
    frac = max(0.0, 1.0 - step / cfg.steps)
    return cfg.final_lr + (cfg.initial_lr - cfg.final_lr) * frac**cfg.decay_power


class Adam:
    """Adam over a fixed list of parameter arrays, updated in place."""

    def __init__(self, params: list[np.ndarray], cfg: OptimizerConfig):
        self.params = params
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray], lr: float) -> None:
        cfg = self.cfg
        self.t += 1
        c1 = 1.0 - cfg.beta1**self.t
        c2 = 1.0 - cfg.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + cfg.epsilon)
