"""The semi-supervised meta-procedure and its baselines.

The pipeline has three steps: fit an auxiliary predictor g-tilde on the
labeled rows (x, w, y); impute pseudo-responses for rows without labels
(optionally for all rows) by evaluating g-tilde and passing it through a
labeling policy; then run empirical risk minimization over an x-only
function class on the pseudo-labeled data.  The final predictor never sees
the helper covariates w.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .datamodel import HybridDataset, PseudoLabeledDataset


class StageError(RuntimeError):
    """A fitting failure, tagged with the pipeline stage it came from."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage} fit failed: {cause}")
        self.stage = stage
        self.cause = cause


class LabelingPolicy(enum.Enum):
    RAW = "raw"
    HARD = "hard"
    STOCHASTIC_SOFT = "soft"


class ImputationPolicy(enum.Enum):
    UNLABELED_ONLY = "unlabeled_only"
    ALL_PSEUDO = "all_pseudo"


@dataclass(frozen=True)
class AnalyticAuxiliary:
    """Wraps a closed-form function of (x, w) as an auxiliary predictor,
    bypassing the fitting step entirely."""

    fn: object

    def predict(self, x, w):
        return np.asarray(self.fn(x, w), dtype=float)


@dataclass(frozen=True)
class PastConfig:
    """Recipe for one run of the meta-procedure.

    ``auxiliary_fitter(x, w, y, rng)`` must return an object with
    ``predict(x, w)``; ``final_fitter(x, y, rng)`` one with ``predict(x)``.
    If ``oracle_auxiliary`` is set, the auxiliary stage returns it as-is.
    """

    auxiliary_fitter: object = None
    final_fitter: object = None
    loss: object = None
    labeling: LabelingPolicy = LabelingPolicy.RAW
    imputation: ImputationPolicy = ImputationPolicy.UNLABELED_ONLY
    oracle_auxiliary: object = None


@dataclass(frozen=True)
class Provenance:
    """Audit record of one meta-procedure run."""

    auxiliary: object
    n_true_labels: int
    n_pseudo_labels: int
    labeling: LabelingPolicy
    imputation: ImputationPolicy


@dataclass(frozen=True)
class PastFit:
    predictor: object
    provenance: Provenance

    def predict(self, x):
        return self.predictor.predict(x)


def fit_auxiliary(config, dataset, rng):
    """Fit g-tilde on the labeled triples only (or return the injected
    closed-form auxiliary unchanged)."""
    if config.oracle_auxiliary is not None:
        if hasattr(config.oracle_auxiliary, "predict"):
            return config.oracle_auxiliary
        return AnalyticAuxiliary(config.oracle_auxiliary)
    if dataset.n_labeled < 1:
        raise StageError("auxiliary", "no labeled rows")
    try:
        return config.auxiliary_fitter(
            dataset.x_labeled, dataset.w_labeled, dataset.y_labeled, rng
        )
    except Exception as exc:
        raise StageError("auxiliary", exc) from exc


def labelize(values, labeling, rng):
    """Apply a labeling policy to raw auxiliary outputs.

    Hard and stochastic-soft labeling interpret the outputs as
    probabilities, so they are clamped to [0, 1] first; a value of exactly
    1/2 hard-labels to 1.
    """
    values = np.asarray(values, dtype=float)
    if labeling is LabelingPolicy.RAW:
        return values.copy()
    p = np.clip(values, 0.0, 1.0)
    if labeling is LabelingPolicy.HARD:
        return (p >= 0.5).astype(float)
    return (rng.uniform(size=p.shape) < p).astype(float)


def generate_pseudo_responses(g_tilde, dataset, labeling, imputation, rng):
    """Build the full training set of (x, y-tilde) rows.

    Under UNLABELED_ONLY the labeled rows keep their true responses
    bit-for-bit; under ALL_PSEUDO every row is re-labeled from g-tilde.
    """
    pseudo_unlabeled = labelize(
        g_tilde.predict(dataset.x_unlabeled, dataset.w_unlabeled)
        if dataset.n_unlabeled
        else np.empty(0),
        labeling,
        rng,
    )
    if imputation is ImputationPolicy.UNLABELED_ONLY:
        y_labeled_part = dataset.y_labeled
        true_flags = np.ones(dataset.n_labeled, dtype=bool)
    else:
        y_labeled_part = labelize(
            g_tilde.predict(dataset.x_labeled, dataset.w_labeled), labeling, rng
        )
        true_flags = np.zeros(dataset.n_labeled, dtype=bool)
    return PseudoLabeledDataset(
        x=dataset.all_x(),
        y_tilde=np.concatenate([y_labeled_part, pseudo_unlabeled]),
        is_true_label=np.concatenate(
            [true_flags, np.zeros(dataset.n_unlabeled, dtype=bool)]
        ),
    )


def fit_final(config, pseudo, rng):
    """Empirical risk minimization over the x-only class."""
    if pseudo.n < 1:
        raise StageError("final", "empty pseudo-labeled dataset")
    try:
        return config.final_fitter(pseudo.x, pseudo.y_tilde, rng)
    except Exception as exc:
        raise StageError("final", exc) from exc


def past_fit(config, dataset, rng):
    """Run all three steps and return the final predictor with provenance."""
    g_tilde = fit_auxiliary(config, dataset, rng)
    pseudo = generate_pseudo_responses(
        g_tilde, dataset, config.labeling, config.imputation, rng
    )
    predictor = fit_final(config, pseudo, rng)
    n_true = int(np.sum(pseudo.is_true_label))
    return PastFit(
        predictor=predictor,
        provenance=Provenance(
            auxiliary=g_tilde,
            n_true_labels=n_true,
            n_pseudo_labels=pseudo.n - n_true,
            labeling=config.labeling,
            imputation=config.imputation,
        ),
    )


def naive_fit(config, dataset, rng):
    """Baseline: the same final ERM on the labeled rows only."""
    try:
        return config.final_fitter(dataset.x_labeled, dataset.y_labeled, rng)
    except Exception as exc:
        raise StageError("final", exc) from exc


def oracle_fit(config, x, y, rng):
    """Baseline: the same final ERM with every true response available."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    try:
        return config.final_fitter(x, y, rng)
    except Exception as exc:
        raise StageError("final", exc) from exc
