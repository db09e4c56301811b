"""Benchmark suite: QAFFDE, QAFFDE-SGD and exact KDE on the synthetic datasets."""

from __future__ import annotations

import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .aff_trainer import train_aff
from .data import Dataset
from .density_matrix import fit_density_matrix, predict_batch, resolve_rank
from .errors import InvalidArgumentError
from .kde_oracle import KdeModel, kde_batch
from .kernelspace import KernelSpec
from .metrics import DensityReport, mae, spearman
from .optim import OptimizerConfig
from .sgd_trainer import train_sgd
from .synthgen import DATASETS, generate, generate_random_gmm, get_distribution

__all__ = ["METHODS", "SUITES", "BenchSettings", "dataset_defaults", "run_cell", "run_benchmark", "grid_points"]

METHODS = ("qaffde", "qaffde_sgd", "kde")

SUITES = {
    "synthetic": DATASETS,
    "gmm": ("random_gmm_d1", "random_gmm_d2", "random_gmm_d4"),
}

# bandwidths picked per dataset on a desk-scale sweep (40k train / 5k test)
_DEFAULTS = {
    "arc": {"gamma": 8.0},
    "bimodal": {"gamma": 2.0},
    "binomial": {"gamma": 8.0},
    "potential_1": {"gamma": 16.0},
    "potential_2": {"gamma": 16.0},
    "potential_3": {"gamma": 16.0},
    "potential_4": {"gamma": 16.0},
    "star_eight": {"gamma": 8.0},
    "swiss_roll": {"gamma": 24.0, "num_features": 2000},
}
_GMM_RE = re.compile(r"^random_gmm_d(\d+)$")


def dataset_defaults(name: str) -> dict:
    base = {"gamma": None, "num_features": 1000, "rank_frac": 0.1}
    if name in _DEFAULTS:
        return {**base, **_DEFAULTS[name]}
    if _GMM_RE.match(name):
        return {**base, "gamma": 100.0}
    raise InvalidArgumentError(f"unknown benchmark dataset {name!r}")


@dataclass
class BenchSettings:
    n_train: int = 40000
    n_test: int = 5000
    methods: tuple = METHODS
    aff_steps: int = 1000
    aff_lr_init: float = 1e-2
    sgd_steps: int = 500
    sgd_lr_init: float = 1e-3
    lr_final: float = 1e-5
    batch_size: int = 64
    grid_size: int = 0
    overrides: dict = field(default_factory=dict)


def load_split(name: str, n_train: int, n_test: int, seed: int) -> tuple[Dataset, Dataset]:
    m = _GMM_RE.match(name)
    if m:
        _, train, test = generate_random_gmm(int(m.group(1)), seed, n_train, n_test)
        return train, test
    data = generate(name, n_train + n_test, seed)
    return data.subset(slice(0, n_train)), data.subset(slice(n_train, None))


def grid_points(name: str, size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Regular ``size x size`` grid over a 2-D dataset's box: ``(gx, gy, points)``."""
    x0, x1, y0, y1 = get_distribution(name).box
    gx = np.linspace(x0, x1, size)
    gy = np.linspace(y0, y1, size)
    G = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    return gx, gy, G


@dataclass
class CellResult:
    reports: list
    grids: dict


def run_cell(name: str, seed: int, settings: BenchSettings) -> CellResult:
    """Train and evaluate every requested method on one (dataset, seed)."""
    params = {**dataset_defaults(name), **settings.overrides.get(name, {})}
    train, test = load_split(name, settings.n_train, settings.n_test, seed)
    truth = test.true_density
    gamma = params["gamma"]
    D = params["num_features"]
    r = resolve_rank(D, params.get("rank"), params.get("rank_frac"))
    spec = KernelSpec(gamma, train.dim)
    want_grid = settings.grid_size > 0 and train.dim == 2 and not _GMM_RE.match(name)
    G = grid_points(name, settings.grid_size)[2] if want_grid else None

    reports, grids = [], {}

    def record(method, pred, elapsed, predictor):
        reports.append(
            DensityReport(name, method, seed, mae(truth, pred), spearman(truth, pred), len(truth), 1000.0 * elapsed)
        )
        if G is not None:
            grids[method] = predictor(G)

    fmap, aff_time = None, 0.0
    if "qaffde" in settings.methods or "qaffde_sgd" in settings.methods:
        t0 = time.perf_counter()
        aff_cfg = OptimizerConfig(
            initial_lr=settings.aff_lr_init, final_lr=settings.lr_final,
            steps=settings.aff_steps, batch_size=settings.batch_size, seed=seed,
        )
        fmap = train_aff(train, spec, D, aff_cfg)
        aff_time = time.perf_counter() - t0

    estimated = None
    if fmap is not None:
        t0 = time.perf_counter()
        estimated = fit_density_matrix(train, fmap, r, gamma)
        est_time = time.perf_counter() - t0
        if "qaffde" in settings.methods:
            t0 = time.perf_counter()
            pred = predict_batch(estimated, test.points)
            record("qaffde", pred, aff_time + est_time + time.perf_counter() - t0,
                   lambda P: predict_batch(estimated, P))

    if "qaffde_sgd" in settings.methods:
        t0 = time.perf_counter()
        sgd_cfg = OptimizerConfig(
            initial_lr=settings.sgd_lr_init, final_lr=settings.lr_final,
            steps=settings.sgd_steps, batch_size=settings.batch_size, seed=seed,
        )
        trained = train_sgd(train, fmap, estimated.rank, sgd_cfg, init=estimated)
        pred = predict_batch(trained, test.points)
        record("qaffde_sgd", pred, aff_time + est_time + time.perf_counter() - t0,
               lambda P: predict_batch(trained, P))

    if "kde" in settings.methods:
        t0 = time.perf_counter()
        kde = KdeModel(train.points, spec)
        pred = kde_batch(kde, test.points)
        record("kde", pred, time.perf_counter() - t0, lambda P: kde_batch(kde, P))

    if G is not None:
        grids["truth"] = get_distribution(name).pdf(G)
    return CellResult(reports, grids)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("QAFFDE_THREADS", "1")))
    except ValueError:
        return 1


def run_benchmark(datasets, seeds, settings: BenchSettings, progress=None) -> list[tuple[str, int, CellResult]]:
    """Run every (dataset, seed) cell; results come back in input order."""
    for m in settings.methods:
        if m not in METHODS:
            raise InvalidArgumentError(f"unknown method {m!r}")
    cells = [(name, seed) for name in datasets for seed in seeds]
    for name, _ in cells:
        dataset_defaults(name)

    def work(cell):
        res = run_cell(cell[0], cell[1], settings)
        if progress is not None:
            progress(cell[0], cell[1], res)
        return (cell[0], cell[1], res)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        return list(pool.map(work, cells))
