"""Synthetic benchmark distributions with exactly evaluable densities.

Nine 2-D distributions (``arc``, ``bimodal``, ``binomial``, ``potential_1`` to
``potential_4``, ``star_eight``, ``swiss_roll``) plus random Gaussian mixtures
in ``d`` dimensions.  Every generator is a pure function of its seed.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .data import Dataset
from .errors import ConfigurationError, InvalidArgumentError, NumericDegenerateError
from .kernelspace import as_point, as_points

__all__ = [
    "DATASETS",
    "GmmSpec",
    "Distribution",
    "get_distribution",
    "generate",
    "true_density",
    "true_gmm_density",
    "gmm_logpdf",
    "sample_gmm",
    "random_gmm_spec",
    "generate_random_gmm",
    "potential_energy",
]


# ---------------------------------------------------------------------------
# Gaussian mixtures
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class GmmSpec:
    means: np.ndarray
    covariances: np.ndarray
    weights: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        K, d = self.means.shape
        covs = np.asarray(self.covariances, dtype=np.float64).reshape(K, d, d)
        self.covariances = covs
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != K or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("weights must be a probability vector with one entry per component")
        self.weights = w
        try:
            self._chol = np.linalg.cholesky(covs)
        except np.linalg.LinAlgError as exc:
            raise NumericDegenerateError("covariance matrix is not positive definite") from exc

    @property
    def num_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def gmm_logpdf(spec: GmmSpec, xs) -> np.ndarray:
    """Log mixture density at every row of ``xs`` via Cholesky factors."""
    X = as_points(xs, spec.dim)
    d = spec.dim
    comp = np.empty((X.shape[0], spec.num_components))
    for c in range(spec.num_components):
        L = spec._chol[c]
        diff = (X - spec.means[c]).T
        z = np.linalg.solve(L, diff) if d > 1 else diff / L[0, 0]
        maha = np.sum(z * z, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        comp[:, c] = -0.5 * (maha + logdet + d * math.log(2.0 * math.pi))
    with np.errstate(divide="ignore"):
        logw = np.log(spec.weights)
    return logsumexp(comp + logw, axis=1)


def true_gmm_density(spec: GmmSpec, x) -> float:
    return float(np.exp(gmm_logpdf(spec, as_point(x, spec.dim)[None, :]))[0])


def sample_gmm(spec: GmmSpec, n: int, rng: np.random.Generator, equal_counts: bool = False) -> np.ndarray:
    """Draw ``n`` points; ``equal_counts`` splits them evenly across components."""
    K = spec.num_components
    if equal_counts:
        counts = np.full(K, n // K)
        counts[: n % K] += 1
        labels = np.repeat(np.arange(K), counts)
    else:
        labels = rng.choice(K, size=n, p=spec.weights)
    z = rng.standard_normal((n, spec.dim))
    X = spec.means[labels] + np.einsum("nij,nj->ni", spec._chol[labels], z)
    if equal_counts:
        X = X[rng.permutation(n)]
    return X


# ---------------------------------------------------------------------------
# Reference 2-D distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Distribution:
    """A named 2-D benchmark distribution.

    ``box`` is a region holding essentially all of the mass; it is used for
    plotting grids and quadrature checks.
    """

    name: str
    sample: Callable[[int, np.random.Generator], np.ndarray]
    pdf: Callable[[np.ndarray], np.ndarray]
    box: tuple[float, float, float, float]


def _gauss1(x, mean, var):
    return np.exp(-0.5 * (x - mean) ** 2 / var) / np.sqrt(2.0 * np.pi * var)


def _arc_sample(n, rng):
    x2 = rng.normal(0.0, 2.0, size=n)
    x1 = rng.normal(x2**2 / 4.0, 1.0)
    return np.column_stack([x1, x2])


def _arc_pdf(X):
    return _gauss1(X[:, 1], 0.0, 4.0) * _gauss1(X[:, 0], X[:, 1] ** 2 / 4.0, 1.0)


BIMODAL = GmmSpec(
    means=[[-2.0, 0.0], [2.0, 0.0]],
    covariances=[np.eye(2), np.eye(2)],
    weights=[0.5, 0.5],
)

BINOMIAL = GmmSpec(
    means=[[-1.5, -1.5], [1.5, 1.5]],
    covariances=[[[1.0, 0.6], [0.6, 1.0]], [[1.0, -0.6], [-0.6, 1.0]]],
    weights=[0.4, 0.6],
)

_STAR_RADIUS = 3.0
_STAR_STD = 0.5
_angles = 2.0 * np.pi * np.arange(8) / 8
STAR_EIGHT = GmmSpec(
    means=_STAR_RADIUS * np.column_stack([np.cos(_angles), np.sin(_angles)]),
    covariances=[_STAR_STD**2 * np.eye(2)] * 8,
    weights=np.full(8, 1.0 / 8),
)

# swiss roll: spiral c(t) = t (cos t, sin t) / scale, t ~ U[t0, t1], plus isotropic noise
_SWISS_T = (1.5 * np.pi, 4.5 * np.pi)
_SWISS_SCALE = 3.5
_SWISS_STD = 0.25
_SWISS_NODES = 2000


def _swiss_curve(t):
    return np.column_stack([t * np.cos(t), t * np.sin(t)]) / _SWISS_SCALE


def _swiss_sample(n, rng):
    t = rng.uniform(*_SWISS_T, size=n)
    return _swiss_curve(t) + rng.normal(0.0, _SWISS_STD, size=(n, 2))


def _swiss_pdf(X, chunk=512):
    t = np.linspace(*_SWISS_T, _SWISS_NODES)
    C = _swiss_curve(t)
    var = _SWISS_STD**2
    # trapezoid weights for the average over t
    w = np.full(t.shape[0], 1.0)
    w[0] = w[-1] = 0.5
    w /= w.sum()
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], chunk):
        Q = X[start : start + chunk]
        sq = (Q[:, 0, None] - C[None, :, 0]) ** 2 + (Q[:, 1, None] - C[None, :, 1]) ** 2
        out[start : start + chunk] = np.exp(-0.5 * sq / var) @ w
    return out / (2.0 * np.pi * var)


# potentials: unnormalized densities exp(-U(z)) restricted to a box
_POTENTIAL_BOX = (-4.0, 4.0, -4.0, 4.0)
_POTENTIAL_GRID = 1000
_PROPOSAL_STD = 3.0


def _w1(z):
    return np.sin(2.0 * np.pi * z[:, 0] / 4.0)


def _w2(z):
    return 3.0 * np.exp(-0.5 * ((z[:, 0] - 1.0) / 0.6) ** 2)


def _w3(z):
    return 3.0 / (1.0 + np.exp(-(z[:, 0] - 1.0) / 0.3))


def potential_energy(k: int, z) -> np.ndarray:
    """Energy ``U_k(z)`` of the four classic 2-D flow test potentials."""
    z = as_points(z, 2)
    z1, z2 = z[:, 0], z[:, 1]
    if k == 1:
        r = np.sqrt(z1**2 + z2**2)
        return 0.5 * ((r - 2.0) / 0.4) ** 2 - np.logaddexp(
            -0.5 * ((z1 - 2.0) / 0.6) ** 2, -0.5 * ((z1 + 2.0) / 0.6) ** 2
        )
    if k == 2:
        return 0.5 * ((z2 - _w1(z)) / 0.4) ** 2
    if k == 3:
        return -np.logaddexp(
            -0.5 * ((z2 - _w1(z)) / 0.35) ** 2,
            -0.5 * ((z2 - _w1(z) + _w2(z)) / 0.35) ** 2,
        )
    if k == 4:
        return -np.logaddexp(
            -0.5 * ((z2 - _w1(z)) / 0.4) ** 2,
            -0.5 * ((z2 - _w1(z) + _w3(z)) / 0.35) ** 2,
        )
    raise InvalidArgumentError(f"unknown potential {k}")


def _box_grid(box, n):
    x0, x1, y0, y1 = box
    hx, hy = (x1 - x0) / n, (y1 - y0) / n
    gx = x0 + hx * (np.arange(n) + 0.5)
    gy = y0 + hy * (np.arange(n) + 0.5)
    G = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    return G, hx * hy


@functools.lru_cache(maxsize=None)
def _potential_tables(k: int):
    """Normalizer (midpoint rule on the box) and rejection envelope constant."""
    G, cell = _box_grid(_POTENTIAL_BOX, _POTENTIAL_GRID)
    logp = -potential_energy(k, G)
    shift = logp.max()
    Z = float(np.exp(logp - shift).sum() * cell) * math.exp(shift)
    log_proposal = -0.5 * np.sum(G * G, axis=1) / _PROPOSAL_STD**2
    log_envelope = float(np.max(logp - log_proposal)) + math.log(1.1)
    return Z, log_envelope


def _in_box(X, box):
    x0, x1, y0, y1 = box
    return (X[:, 0] >= x0) & (X[:, 0] <= x1) & (X[:, 1] >= y0) & (X[:, 1] <= y1)


def _potential_pdf(k, X):
    Z, _ = _potential_tables(k)
    out = np.exp(-potential_energy(k, X)) / Z
    out[~_in_box(X, _POTENTIAL_BOX)] = 0.0
    return out


def _potential_sample(k, n, rng, min_efficiency=1e-4):
    _, log_env = _potential_tables(k)
    chunks, have, proposed, accepted = [], 0, 0, 0
    while have < n:
        m = max(1024, 4 * (n - have))
        Z = rng.normal(0.0, _PROPOSAL_STD, size=(m, 2))
        Z = Z[_in_box(Z, _POTENTIAL_BOX)]
        proposed += m
        log_ratio = -potential_energy(k, Z) - (-0.5 * np.sum(Z * Z, axis=1) / _PROPOSAL_STD**2) - log_env
        keep = np.log(rng.uniform(size=Z.shape[0])) < log_ratio
        chunks.append(Z[keep])
        accepted += int(keep.sum())
        have += int(keep.sum())
        if accepted / proposed < min_efficiency:
            raise ConfigurationError(
                f"rejection sampler efficiency {accepted / proposed:.2e} below {min_efficiency:.0e}"
            )
    return np.concatenate(chunks)[:n]


def _gmm_distribution(name, spec, box):
    return Distribution(
        name,
        lambda n, rng: sample_gmm(spec, n, rng),
        lambda X: np.exp(gmm_logpdf(spec, X)),
        box,
    )


DATASETS = (
    "arc",
    "bimodal",
    "binomial",
    "potential_1",
    "potential_2",
    "potential_3",
    "potential_4",
    "star_eight",
    "swiss_roll",
)


def _build_registry() -> dict[str, Distribution]:
    reg = {
        "arc": Distribution("arc", _arc_sample, _arc_pdf, (-4.0, 16.0, -8.0, 8.0)),
        "bimodal": _gmm_distribution("bimodal", BIMODAL, (-6.0, 6.0, -4.0, 4.0)),
        "binomial": _gmm_distribution("binomial", BINOMIAL, (-6.0, 6.0, -6.0, 6.0)),
        "star_eight": _gmm_distribution("star_eight", STAR_EIGHT, (-5.5, 5.5, -5.5, 5.5)),
        "swiss_roll": Distribution("swiss_roll", _swiss_sample, _swiss_pdf, (-5.5, 5.5, -5.5, 5.5)),
    }
    for k in range(1, 5):
        name = f"potential_{k}"
        reg[name] = Distribution(
            name,
            functools.partial(_potential_sample, k),
            functools.partial(_potential_pdf, k),
            _POTENTIAL_BOX,
        )
    return reg


_REGISTRY = _build_registry()


def get_distribution(name: str) -> Distribution:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown dataset {name!r}; choose from {', '.join(DATASETS)}") from None


def true_density(name: str, xs) -> np.ndarray:
    """Exact density of dataset ``name`` at the rows of ``xs``."""
    return get_distribution(name).pdf(as_points(xs, 2))


def generate(name: str, n: int, seed: int) -> Dataset:
    """``n`` samples of a named 2-D distribution with their true densities."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    dist = get_distribution(name)
    rng = np.random.default_rng(seed)
    X = dist.sample(int(n), rng)
    return Dataset(X, dist.pdf(X), name, seed)


# ---------------------------------------------------------------------------
# Random mixtures in d dimensions
# ---------------------------------------------------------------------------

_EIG_RANGE = (0.005, 0.05)


def _random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def random_gmm_spec(d: int, seed: int) -> GmmSpec:
    """``10 * d`` components, means uniform on the unit cube, random rotated covariances."""
    if d < 1:
        raise InvalidArgumentError(f"d must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    K = 10 * d
    means = rng.uniform(0.0, 1.0, size=(K, d))
    covs = np.empty((K, d, d))
    for c in range(K):
        evals = rng.uniform(*_EIG_RANGE, size=d)
        Q = _random_orthogonal(d, rng)
        S = (Q * evals) @ Q.T
        covs[c] = 0.5 * (S + S.T)
    return GmmSpec(means, covs, np.full(K, 1.0 / K))


def generate_random_gmm(
    d: int, seed: int, n_train: int = 40000, n_test: int = 10000
) -> tuple[GmmSpec, Dataset, Dataset]:
    """Random mixture plus train/test sets sampled with equal per-component counts."""
    spec = random_gmm_spec(d, seed)
    rng = np.random.default_rng([seed, 1])
    Xtr = sample_gmm(spec, n_train, rng, equal_counts=True)
    Xte = sample_gmm(spec, n_test, rng, equal_counts=True)
    name = f"random_gmm_d{d}"
    train = Dataset(Xtr, np.exp(gmm_logpdf(spec, Xtr)), name, seed)
    test = Dataset(Xte, np.exp(gmm_logpdf(spec, Xte)), name, seed)
    return spec, train, test
