"""Gaussian kernel, random Fourier feature sampling and the explicit embedding.

The kernel is ``k(x, y) = exp(-gamma * ||x - y||^2)``.  Its spectral measure is
a zero-mean Gaussian with covariance ``2 * gamma * I``, so frequencies are drawn
from that distribution and the embedding

    phi_i(x) = sqrt(2 / D) * cos(w_i . x + b_i)

satisfies ``E[<phi(x), phi(y)>] = k(x, y)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericDegenerateError

__all__ = [
    "KernelSpec",
    "FeatureMap",
    "as_point",
    "as_points",
    "exact_kernel",
    "kernel_matrix",
    "sample_rff",
    "embed",
    "embed_batch",
    "kernel_mse",
]


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel bandwidth ``gamma`` on inputs of dimension ``dim``."""

    gamma: float
    dim: int

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidArgumentError(f"gamma must be positive, got {self.gamma!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidArgumentError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "dim", int(self.dim))


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Fourier feature parameters.

    Attributes
    ----------
    W : ndarray of shape (D, d)
        Frequency vectors, one per row.
    b : ndarray of shape (D,)
        Phase offsets.
    gamma_target : float
        Bandwidth of the kernel approximated by ``<phi(x), phi(y)>``.
    normalize : bool
        Whether :func:`embed` rescales the output to unit L2 norm.
    """

    W: np.ndarray
    b: np.ndarray
    gamma_target: float
    normalize: bool = True

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64).reshape(-1)
        if W.ndim == 1:
            W = W.reshape(-1, 1)
        if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] < 1:
            raise InvalidArgumentError(f"W must be a non-empty D x d matrix, got shape {W.shape}")
        if b.shape[0] != W.shape[0]:
            raise InvalidArgumentError(f"b has length {b.shape[0]}, expected {W.shape[0]}")
        if not self.gamma_target > 0:
            raise InvalidArgumentError("gamma_target must be positive")
        W.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "gamma_target", float(self.gamma_target))
        object.__setattr__(self, "normalize", bool(self.normalize))

    @property
    def num_features(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def with_normalize(self, normalize: bool) -> "FeatureMap":
        return FeatureMap(self.W, self.b, self.gamma_target, normalize)

    def __eq__(self, other):
        if not isinstance(other, FeatureMap):
            return NotImplemented
        return (
            self.gamma_target == other.gamma_target
            and self.normalize == other.normalize
            and np.array_equal(self.W, other.W)
            and np.array_equal(self.b, other.b)
        )

    __hash__ = None


def as_point(x, dim: int) -> np.ndarray:
    """Return ``x`` as a float vector of length ``dim``."""
    p = np.asarray(x, dtype=np.float64).reshape(-1)
    if p.shape[0] != dim:
        raise InvalidArgumentError(f"point has dimension {p.shape[0]}, expected {dim}")
    return p


def as_points(xs, dim: int | None = None) -> np.ndarray:
    """Return ``xs`` as an ``(n, d)`` float matrix.

    A 1-D array is read as ``n`` scalar points when ``dim`` is 1 or unknown.
    """
    X = np.asarray(xs, dtype=np.float64)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        if dim is None or dim == 1:
            X = X.reshape(-1, 1)
        else:
            X = X.reshape(1, -1)
    if X.ndim != 2:
        raise InvalidArgumentError(f"expected a matrix of points, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise InvalidArgumentError(f"points have dimension {X.shape[1]}, expected {dim}")
    return X


def exact_kernel(spec: KernelSpec, x, y) -> float:
    x = as_point(x, spec.dim)
    y = as_point(y, spec.dim)
    diff = x - y
    return float(np.exp(-spec.gamma * np.dot(diff, diff)))


def kernel_matrix(gamma: float, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Gaussian kernel between every row of ``X`` and every row of ``Y``."""
    sq = (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(Y * Y, axis=1)[None, :]
        - 2.0 * (X @ Y.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def sample_rff(spec: KernelSpec, num_features: int, seed: int, normalize: bool = True) -> FeatureMap:
    """Draw random Fourier features for ``exp(-spec.gamma * ||x - y||^2)``."""
    if int(num_features) != num_features or num_features < 1:
        raise InvalidArgumentError(f"num_features must be >= 1, got {num_features!r}")
    rng = np.random.default_rng(seed)
    W = rng.normal(0.0, np.sqrt(2.0 * spec.gamma), size=(int(num_features), spec.dim))
    b = rng.uniform(0.0, 2.0 * np.pi, size=int(num_features))
    return FeatureMap(W, b, spec.gamma, normalize)


def _raw_features(fmap: FeatureMap, X: np.ndarray) -> np.ndarray:
    D = fmap.num_features
    return np.sqrt(2.0 / D) * np.cos(X @ fmap.W.T + fmap.b)


def embed_batch(fmap: FeatureMap, xs) -> np.ndarray:
    """Embed every row of ``xs``; returns an ``(n, D)`` matrix."""
    X = as_points(xs, fmap.dim)
    Z = _raw_features(fmap, X)
    if fmap.normalize:
        norms = np.linalg.norm(Z, axis=1)
        if np.any(~np.isfinite(norms) | (norms <= np.finfo(np.float64).tiny)):
            raise NumericDegenerateError("raw embedding has zero or non-finite norm; cannot normalize")
        Z /= norms[:, None]
    return Z


def embed(fmap: FeatureMap, x) -> np.ndarray:
    return embed_batch(fmap, as_point(x, fmap.dim)[None, :])[0]


def kernel_mse(fmap: FeatureMap, spec: KernelSpec, xs, ys, squared: bool = False) -> float:
    """Mean squared error of the feature kernel against ``k_gamma`` on paired rows.

    With ``squared=True`` the approximation is ``<phi(x), phi(y)>**2``, which
    targets ``k_gamma`` when the map was built for ``gamma / 2``.
    """
    X = as_points(xs, spec.dim)
    Y = as_points(ys, spec.dim)
    if X.shape[0] == 0:
        raise InvalidArgumentError("kernel_mse needs at least one pair")
    if X.shape != Y.shape:
        raise InvalidArgumentError("xs and ys must have the same shape")
    diff = X - Y
    truth = np.exp(-spec.gamma * np.sum(diff * diff, axis=1))
    approx = np.sum(embed_batch(fmap, X) * embed_batch(fmap, Y), axis=1)
    if squared:
        approx = approx**2
    return float(np.mean((truth - approx) ** 2))
