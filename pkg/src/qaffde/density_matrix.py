"""Density-matrix density estimation.

Training points are embedded with a feature map and averaged into
``rho = (1/N) sum phi(x_i) phi(x_i)^T``.  The density at ``x`` is the Born-rule
expectation ``phi(x)^T rho phi(x) / M_gamma``; keeping the top ``r`` eigenpairs
``rho ~ V^T diag(Lambda) V`` makes prediction ``O(r * D)`` per query, with no
dependence on the number of training points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import points_of
from .errors import InvalidArgumentError, NumericDegenerateError
from .kernelspace import FeatureMap, KernelSpec, as_point, as_points, embed_batch

__all__ = [
    "DensityMatrixModel",
    "normalizing_constant",
    "estimate_rho",
    "spectral_truncate",
    "resolve_rank",
    "fit_density_matrix",
    "predict_density",
    "predict_batch",
    "born_density",
]

_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class DensityMatrixModel:
    """Low-rank factorization of a density matrix plus its feature map.

    Attributes
    ----------
    V : ndarray of shape (r, D)
        Eigenvectors as rows.
    Lambda : ndarray of shape (r,)
        Non-negative eigenvalues, descending.
    feature_map : FeatureMap
    norm_const : float
        Kernel normalizing constant ``M_gamma``.
    """

    V: np.ndarray
    Lambda: np.ndarray
    feature_map: FeatureMap
    norm_const: float

    def __post_init__(self):
        V = np.array(self.V, dtype=np.float64)
        lam = np.array(self.Lambda, dtype=np.float64).reshape(-1)
        if V.ndim != 2 or V.shape[0] != lam.shape[0]:
            raise InvalidArgumentError(f"V shape {V.shape} does not match Lambda length {lam.shape[0]}")
        if V.shape[1] != self.feature_map.num_features:
            raise InvalidArgumentError("V columns must equal the number of features")
        if np.any(lam < -1e-12):
            raise InvalidArgumentError("Lambda has negative entries")
        if not self.norm_const > 0:
            raise InvalidArgumentError("norm_const must be positive")
        lam = np.maximum(lam, 0.0)
        V.flags.writeable = False
        lam.flags.writeable = False
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "Lambda", lam)
        object.__setattr__(self, "norm_const", float(self.norm_const))

    @property
    def rank(self) -> int:
        return self.V.shape[0]

    @property
    def dim(self) -> int:
        return self.feature_map.dim

    @property
    def gamma(self) -> float:
        """Density bandwidth implied by ``norm_const = (pi / gamma)^(d/2)``."""
        return math.pi / self.norm_const ** (2.0 / self.dim)

    def check_invariants(self, atol: float = 1e-8) -> None:
        """Raise ``AssertionError`` if ordering or orthonormality is violated."""
        assert np.all(np.diff(self.Lambda) <= 1e-15), "Lambda not sorted descending"
        gram = self.V @ self.V.T
        err = np.max(np.abs(gram - np.eye(self.rank)))
        assert err < atol, f"rows of V not orthonormal (max err {err:.3g})"


def normalizing_constant(spec: KernelSpec) -> float:
    """Integral of ``exp(-gamma * ||u||^2)`` over ``R^d``: ``(pi / gamma)^(d/2)``."""
    return (math.pi / spec.gamma) ** (spec.dim / 2.0)


def estimate_rho(data, fmap: FeatureMap) -> np.ndarray:
    """Average of feature outer products over the data, accumulated in fixed-size chunks."""
    X = points_of(data, fmap.dim)
    D = fmap.num_features
    rho = np.zeros((D, D))
    for start in range(0, X.shape[0], _CHUNK):
        Phi = embed_batch(fmap, X[start : start + _CHUNK])
        rho += Phi.T @ Phi
    rho /= X.shape[0]
    return 0.5 * (rho + rho.T)


def spectral_truncate(rho, r: int, fmap: FeatureMap, norm_const: float) -> DensityMatrixModel:
    """Keep the ``r`` largest eigenpairs of ``rho``."""
    rho = np.asarray(rho, dtype=np.float64)
    D = fmap.num_features
    if rho.shape != (D, D):
        raise InvalidArgumentError(f"rho has shape {rho.shape}, expected ({D}, {D})")
    if int(r) != r or not 1 <= r <= D:
        raise InvalidArgumentError(f"rank must satisfy 1 <= r <= {D}, got {r}")
    if np.max(np.abs(rho - rho.T)) > 1e-8:
        raise InvalidArgumentError("rho is not symmetric")
    try:
        evals, evecs = np.linalg.eigh(0.5 * (rho + rho.T))
    except np.linalg.LinAlgError as exc:
        raise NumericDegenerateError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(evals, kind="stable")[::-1][: int(r)]
    lam = np.maximum(evals[order], 0.0)
    V = evecs[:, order].T.copy()
    # sign convention: the largest-magnitude entry of each row is positive
    pivot = np.argmax(np.abs(V), axis=1)
    signs = np.sign(V[np.arange(V.shape[0]), pivot])
    signs[signs == 0] = 1.0
    V *= signs[:, None]
    return DensityMatrixModel(V, lam, fmap, norm_const)


def resolve_rank(num_features: int, rank: int | None = None, rank_frac: float | None = None) -> int:
    """Turn an absolute rank or a fraction of ``num_features`` into ``r``.

    A fraction of 0 means the smallest usable model, ``r = 1``.
    """
    if rank is not None and rank_frac is not None:
        raise InvalidArgumentError("give either rank or rank_frac, not both")
    if rank is None and rank_frac is None:
        return num_features
    if rank is not None:
        if not 1 <= rank <= num_features:
            raise InvalidArgumentError(f"rank must satisfy 1 <= r <= {num_features}, got {rank}")
        return int(rank)
    if not 0.0 <= rank_frac <= 1.0:
        raise InvalidArgumentError(f"rank_frac must lie in [0, 1], got {rank_frac}")
    return max(1, int(round(rank_frac * num_features)))


def _truncate_from_samples(Phi: np.ndarray, r: int, fmap: FeatureMap, norm_const: float) -> DensityMatrixModel:
    """Top eigenpairs of ``Phi^T Phi / N`` through the ``N x N`` Gram matrix, for ``N < D``.

    ``rho`` has rank at most ``N`` here.  Eigenpairs at or below the numerical
    rank threshold are dropped, so the model keeps at most ``min(r, N)`` rows.
    A Rayleigh-Ritz pass on the recovered subspace restores exact orthonormality.
    """
    N, D = Phi.shape
    try:
        w, U = np.linalg.eigh(Phi @ Phi.T / N)
        w, U = w[::-1], U[:, ::-1]
        tol = max(w[0], 0.0) * max(N, D) * np.finfo(np.float64).eps
        k = max(1, min(int(r), int(np.sum(w > tol))))
        B, _ = np.linalg.qr(Phi.T @ (U[:, :k] / np.sqrt(N * np.maximum(w[:k], tol))))
        P = Phi @ B
        mu, Y = np.linalg.eigh(P.T @ P / N)
    except np.linalg.LinAlgError as exc:
        raise NumericDegenerateError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(mu, kind="stable")[::-1]
    V = (B @ Y[:, order]).T
    pivot = np.argmax(np.abs(V), axis=1)
    signs = np.sign(V[np.arange(k), pivot])
    signs[signs == 0] = 1.0
    V *= signs[:, None]
    return DensityMatrixModel(V, np.maximum(mu[order], 0.0), fmap, norm_const)


def fit_density_matrix(data, fmap: FeatureMap, rank: int, gamma: float) -> DensityMatrixModel:
    """Optimization-free fit: estimate ``rho`` and truncate it to ``rank``.

    With fewer samples than features the eigenpairs come from the sample
    Gram matrix instead of a ``D x D`` eigendecomposition.
    """
    D = fmap.num_features
    if int(rank) != rank or not 1 <= rank <= D:
        raise InvalidArgumentError(f"rank must satisfy 1 <= r <= {D}, got {rank}")
    M = normalizing_constant(KernelSpec(gamma, fmap.dim))
    X = points_of(data, fmap.dim)
    if X.shape[0] < D:
        return _truncate_from_samples(embed_batch(fmap, X), rank, fmap, M)
    return spectral_truncate(estimate_rho(X, fmap), rank, fmap, M)


def predict_batch(model: DensityMatrixModel, xs) -> np.ndarray:
    """Density at every row of ``xs``: ``||Lambda^(1/2) V phi(x)||^2 / M_gamma``."""
    X = as_points(xs, model.dim)
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], _CHUNK):
        Z = embed_batch(model.feature_map, X[start : start + _CHUNK]) @ model.V.T
        out[start : start + _CHUNK] = (Z * Z) @ model.Lambda
    out /= model.norm_const
    return out


def predict_density(model: DensityMatrixModel, x) -> float:
    return float(predict_batch(model, as_point(x, model.dim)[None, :])[0])


def born_density(rho: np.ndarray, fmap: FeatureMap, norm_const: float, xs) -> np.ndarray:
    """Full-matrix Born-rule density ``phi^T rho phi / M_gamma`` without truncation."""
    Phi = embed_batch(fmap, as_points(xs, fmap.dim))
    return np.einsum("ij,jk,ik->i", Phi, rho, Phi) / norm_const
