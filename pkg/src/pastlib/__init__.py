"""Semi-supervised prediction with surrogate (helper) covariates.

The core idea: covariates W that are available during training but
forbidden at prediction time can still help.  Fit an auxiliary model
g(x, w) on the labeled rows, impute pseudo-responses for the unlabeled
rows, then run empirical risk minimization over an x-only class.  The
package also ships the finite-sample theory evaluators (localized
Rademacher complexity, critical radii, error bounds), synthetic data
families with analytic ground truth, and a reproducible experiment
harness with a CLI.
"""

__version__ = "0.1.0"

from .datamodel import HybridDataset, PseudoLabeledDataset, split_dataset
from .ensembles import (
    make_hard_soft,
    make_noisy_label,
    make_partial_linear_one,
    make_partial_linear_two,
)
from .estimators import (
    ForestHyperparams,
    ForestTask,
    fit_glm,
    fit_linear,
    fit_random_forest,
    polynomial_features,
)
from .losses import LossKind, LossSpec, make_loss
from .past import (
    ImputationPolicy,
    LabelingPolicy,
    PastConfig,
    naive_fit,
    oracle_fit,
    past_fit,
)

__all__ = [
    "HybridDataset",
    "PseudoLabeledDataset",
    "split_dataset",
    "make_hard_soft",
    "make_noisy_label",
    "make_partial_linear_one",
    "make_partial_linear_two",
    "ForestHyperparams",
    "ForestTask",
    "fit_glm",
    "fit_linear",
    "fit_random_forest",
    "polynomial_features",
    "LossKind",
    "LossSpec",
    "make_loss",
    "ImputationPolicy",
    "LabelingPolicy",
    "PastConfig",
    "naive_fit",
    "oracle_fit",
    "past_fit",
    "__version__",
]
