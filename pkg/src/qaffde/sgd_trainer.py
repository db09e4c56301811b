"""Gradient training of the density-matrix factors by maximum likelihood.

The eigenvalues are parameterized as ``softmax(lambda_logits)`` so they stay a
probability spectrum, and the eigenvectors as the row-orthonormalization of an
unconstrained matrix (Gram-Schmidt order, computed through a QR factorization
with positive ``R`` diagonal).  The feature map stays frozen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import softmax

from .data import points_of
from .density_matrix import DensityMatrixModel, normalizing_constant
from .errors import InvalidArgumentError, TrainingDivergedError
from .kernelspace import FeatureMap, KernelSpec, as_points, embed_batch
from .optim import Adam, OptimizerConfig, polynomial_lr

__all__ = [
    "LIKELIHOOD_FLOOR",
    "SgdModelParams",
    "orthonormalize_rows",
    "nll_loss",
    "nll_grad",
    "realize",
    "params_from_model",
    "random_params",
    "train_sgd",
]

LIKELIHOOD_FLOOR = 1e-12


@dataclass(eq=False)
class SgdModelParams:
    V_free: np.ndarray
    lambda_logits: np.ndarray
    feature_map: FeatureMap
    norm_const: float

    @property
    def rank(self) -> int:
        return self.V_free.shape[0]

    def copy(self) -> "SgdModelParams":
        return SgdModelParams(self.V_free.copy(), self.lambda_logits.copy(), self.feature_map, self.norm_const)


def _qr_rows(V_free: np.ndarray):
    Q, R = np.linalg.qr(V_free.T)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s, R * s[:, None]


def orthonormalize_rows(V_free: np.ndarray) -> np.ndarray:
    """Gram-Schmidt on the rows of ``V_free`` (first row kept in direction)."""
    r, D = V_free.shape
    if r > D:
        raise InvalidArgumentError(f"cannot orthonormalize {r} rows in dimension {D}")
    return _qr_rows(V_free)[0].T


def _forward(params: SgdModelParams, X: np.ndarray):
    Q, R = _qr_rows(params.V_free)
    lam = softmax(params.lambda_logits)
    Phi = embed_batch(params.feature_map, X)
    Z = Phi @ Q
    f = (Z * Z) @ lam / params.norm_const
    return Q, R, lam, Phi, Z, f


def nll_loss(params: SgdModelParams, batch) -> float:
    """Mean of ``-log(f(x) + 1e-12)`` over the batch."""
    X = as_points(batch, params.feature_map.dim)
    if X.shape[0] == 0:
        raise InvalidArgumentError("batch is empty")
    f = _forward(params, X)[-1]
    return float(np.mean(-np.log(f + LIKELIHOOD_FLOOR)))


def _loss_and_grad(params: SgdModelParams, X: np.ndarray):
    Q, R, lam, Phi, Z, f = _forward(params, X)
    n = X.shape[0]
    M = params.norm_const
    loss = float(np.mean(-np.log(f + LIKELIHOOD_FLOOR)))

    gf = -1.0 / (n * (f + LIKELIHOOD_FLOOR))
    g_lam = (Z * Z).T @ gf / M
    g_logits = lam * (g_lam - lam @ g_lam)

    # dL/dQ with Q = V^T (D x r)
    g_Q = Phi.T @ ((2.0 / M) * gf[:, None] * Z * lam)
    # backprop through A = Q R (A = V_free^T) with no dependence on R
    B = Q.T @ g_Q
    G = np.triu(B) + np.triu(B, 1).T
    Y = g_Q - Q @ G
    g_V_free = solve_triangular(R, Y.T, lower=False)
    return loss, g_V_free, g_logits


def nll_grad(params: SgdModelParams, batch) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of :func:`nll_loss` for ``V_free`` and ``lambda_logits``."""
    X = as_points(batch, params.feature_map.dim)
    if X.shape[0] == 0:
        raise InvalidArgumentError("batch is empty")
    _, gV, gl = _loss_and_grad(params, X)
    return gV, gl


def realize(params: SgdModelParams) -> DensityMatrixModel:
    """Constrained model from free parameters, eigenvalues sorted descending."""
    V = orthonormalize_rows(params.V_free)
    lam = softmax(params.lambda_logits)
    order = np.argsort(-lam, kind="stable")
    return DensityMatrixModel(V[order], lam[order], params.feature_map, params.norm_const)


def params_from_model(model: DensityMatrixModel, r: int | None = None) -> SgdModelParams:
    """Start from the top ``r`` eigenpairs of an estimated model."""
    r = model.rank if r is None else r
    if r > model.rank:
        raise InvalidArgumentError(f"init model has rank {model.rank} < requested {r}")
    lam = np.maximum(model.Lambda[:r], np.finfo(np.float64).tiny)
    return SgdModelParams(np.array(model.V[:r]), np.log(lam), model.feature_map, model.norm_const)


def random_params(fmap: FeatureMap, r: int, norm_const: float, seed: int) -> SgdModelParams:
    D = fmap.num_features
    if not 1 <= r <= D:
        raise InvalidArgumentError(f"rank must satisfy 1 <= r <= {D}, got {r}")
    rng = np.random.default_rng(seed)
    V_free = rng.normal(0.0, 1.0 / np.sqrt(D), size=(r, D))
    return SgdModelParams(V_free, np.zeros(r), fmap, norm_const)


def split_holdout(n: int, frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded (train, validation) index split; a single point is used for both."""
    if n < 2:
        idx = np.arange(n)
        return idx, idx
    perm = np.random.default_rng(seed).permutation(n)
    n_val = min(n - 1, max(1, int(round(frac * n))))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def train_sgd(
    data,
    fmap: FeatureMap,
    r: int,
    cfg: OptimizerConfig,
    init: DensityMatrixModel | None = None,
    gamma: float | None = None,
    val_frac: float = 0.1,
    history: list | None = None,
) -> DensityMatrixModel:
    """Maximum-likelihood training of ``(V, Lambda)`` with Adam.

    Parameters
    ----------
    init : DensityMatrixModel, optional
        Optimization-free model to start from; random orthonormal factors
        with uniform eigenvalues are used otherwise.
    gamma : float, optional
        Density bandwidth for ``M_gamma``.  Defaults to the init model's
        bandwidth, else twice ``fmap.gamma_target``.
    history : list, optional
        Receives ``{"step", "lr", "train_nll", "val_nll"}`` rows.

    Returns the checkpoint with the lowest validation NLL.
    """
    X = points_of(data, fmap.dim)
    if init is not None:
        if init.feature_map != fmap:
            raise InvalidArgumentError("init model uses a different feature map")
        params = params_from_model(init, r)
    else:
        if gamma is None:
            gamma = 2.0 * fmap.gamma_target
        M = normalizing_constant(KernelSpec(gamma, fmap.dim))
        params = random_params(fmap, r, M, seed=cfg.seed + 3)

    train_idx, val_idx = split_holdout(X.shape[0], val_frac, cfg.seed)
    X_train, X_val = X[train_idx], X[val_idx]
    rng = np.random.default_rng(cfg.seed + 1)
    opt = Adam([params.V_free, params.lambda_logits], cfg)

    best_val = nll_loss(params, X_val)
    best = params.copy()
    if history is not None:
        history.append({"step": 0, "lr": polynomial_lr(cfg, 0), "train_nll": float("nan"), "val_nll": best_val})

    for step in range(cfg.steps):
        lr = polynomial_lr(cfg, step)
        idx = rng.integers(0, X_train.shape[0], size=cfg.batch_size)
        loss, gV, gl = _loss_and_grad(params, X_train[idx])
        if not np.isfinite(loss):
            raise TrainingDivergedError(step, loss)
        opt.step([gV, gl], lr)

        done = step + 1
        if done % cfg.eval_every == 0 or done == cfg.steps:
            val = nll_loss(params, X_val)
            if not np.isfinite(val):
                raise TrainingDivergedError(done, val)
            if history is not None:
                history.append({"step": done, "lr": lr, "train_nll": loss, "val_nll": val})
            if val < best_val:
                best_val = val
                best = params.copy()

    return realize(best)
