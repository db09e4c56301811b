"""End-to-end fitting: bandwidth choice, AFF learning, then the density model."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .aff_trainer import train_aff
from .data import points_of
from .density_matrix import DensityMatrixModel, fit_density_matrix, resolve_rank
from .errors import InvalidArgumentError
from .kernelspace import KernelSpec
from .optim import OptimizerConfig
from .sgd_trainer import train_sgd

__all__ = ["FitConfig", "FitResult", "auto_gamma", "fit_model"]


def auto_gamma(data, seed: int = 0, subsample: int = 1000) -> float:
    """``1 / (2 sigma^2)`` with ``sigma`` the mean pairwise distance of a random subsample."""
    X = points_of(data)
    if X.shape[0] < 2:
        raise InvalidArgumentError("auto gamma needs at least two points")
    if X.shape[0] > subsample:
        idx = np.random.default_rng(seed).choice(X.shape[0], size=subsample, replace=False)
        X = X[np.sort(idx)]
    sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    iu = np.triu_indices(X.shape[0], k=1)
    sigma = float(np.mean(np.sqrt(sq[iu])))
    if sigma == 0.0:
        raise InvalidArgumentError("all points coincide; cannot choose a bandwidth")
    return 1.0 / (2.0 * sigma**2)


@dataclass
class FitConfig:
    """Fully resolved settings of one fit; serialized next to every output.

    ``steps``/``lr_init``/``lr_final`` drive the gradient training of the
    density matrix (``mode="sgd"``); the ``aff_*`` fields drive feature learning.
    """

    gamma: float | None = None
    num_features: int = 1000
    rank: int | None = None
    rank_frac: float | None = None
    mode: str = "estimate"
    normalize: bool = True
    seed: int = 0
    aff_steps: int = 1000
    aff_lr_init: float = 1e-2
    aff_lr_final: float = 1e-5
    num_pairs: int = 10000
    steps: int = 1000
    lr_init: float = 1e-3
    lr_final: float = 1e-5
    batch_size: int = 64
    sgd_init: str = "qaffde"

    def __post_init__(self):
        if self.mode not in ("estimate", "sgd"):
            raise InvalidArgumentError(f"mode must be 'estimate' or 'sgd', got {self.mode!r}")
        if self.sgd_init not in ("qaffde", "random"):
            raise InvalidArgumentError(f"sgd_init must be 'qaffde' or 'random', got {self.sgd_init!r}")
        if self.num_features < 1:
            raise InvalidArgumentError("num_features must be >= 1")

    def aff_optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            initial_lr=self.aff_lr_init,
            final_lr=self.aff_lr_final,
            steps=self.aff_steps,
            batch_size=self.batch_size,
            seed=self.seed,
        )

    def sgd_optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            initial_lr=self.lr_init,
            final_lr=self.lr_final,
            steps=self.steps,
            batch_size=self.batch_size,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FitResult:
    model: DensityMatrixModel
    config: FitConfig
    aff_history: list = field(default_factory=list)
    sgd_history: list = field(default_factory=list)


def fit_model(data, cfg: FitConfig) -> FitResult:
    """Learn AFF for the bandwidth, then fit ``(V, Lambda)`` by estimation or SGD.

    Returns the model together with a copy of ``cfg`` whose ``gamma`` and
    ``rank`` are resolved to concrete values.
    """
    X = points_of(data)
    gamma = cfg.gamma if cfg.gamma is not None else auto_gamma(X, seed=cfg.seed)
    r = resolve_rank(cfg.num_features, cfg.rank, cfg.rank_frac)
    resolved = FitConfig(**{**cfg.to_dict(), "gamma": float(gamma), "rank": r, "rank_frac": None})

    spec = KernelSpec(gamma, X.shape[1])
    aff_hist: list = []
    fmap = train_aff(
        X, spec, cfg.num_features, resolved.aff_optimizer(),
        num_pairs=cfg.num_pairs, normalize=cfg.normalize, history=aff_hist,
    )
    sgd_hist: list = []
    if cfg.mode == "estimate":
        model = fit_density_matrix(X, fmap, r, gamma)
    else:
        init = fit_density_matrix(X, fmap, r, gamma) if cfg.sgd_init == "qaffde" else None
        # with fewer samples than features the estimate may keep fewer than r rows
        r_sgd = r if init is None else init.rank
        model = train_sgd(X, fmap, r_sgd, resolved.sgd_optimizer(), init=init, gamma=gamma, history=sgd_hist)
    return FitResult(model, resolved, aff_hist, sgd_hist)
