"""Density estimation with adaptive Fourier features and density matrices."""

__version__ = "0.1.0"

from .aff_trainer import PairBatch, aff_grad, aff_loss, build_pairs, train_aff
from .conditional import ConditionalModel, classify, classify_batch, fit_conditional
from .data import Dataset, LabeledDataset
from .density_matrix import (
    DensityMatrixModel,
    estimate_rho,
    fit_density_matrix,
    normalizing_constant,
    predict_batch,
    predict_density,
    resolve_rank,
    spectral_truncate,
)
from .errors import (
    ConfigurationError,
    InvalidArgumentError,
    NumericDegenerateError,
    QaffdeError,
    TrainingDivergedError,
    UndefinedCorrelationError,
)
from .kde_oracle import KdeModel, kde_batch, kde_estimate
from .kernelspace import FeatureMap, KernelSpec, embed, embed_batch, exact_kernel, kernel_mse, sample_rff
from .metrics import DensityReport, mae, spearman
from .optim import OptimizerConfig
from .pipeline import FitConfig, auto_gamma, fit_model
from .sgd_trainer import SgdModelParams, nll_grad, nll_loss, train_sgd
from .synthgen import GmmSpec, generate, generate_random_gmm, true_gmm_density
