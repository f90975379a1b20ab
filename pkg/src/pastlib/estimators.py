"""Fitting engines: polynomial-feature linear models, GLM fits by gradient
descent, and a from-scratch random forest whose inner loops live in
``kernels``.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import kernels
from .losses import LossKind, loss_grad_first, loss_value

SERIAL_FORMAT_VERSION = 1


class FitError(RuntimeError):
    pass


class SingularSystemError(FitError):
    pass


class ConvergenceError(FitError):
    def __init__(self, message, grad_norm):
        super().__init__(message)
        self.grad_norm = grad_norm


# ---------------------------------------------------------------------------
# Feature maps


def _monomial_exponents(dim, degree):
    """All exponent tuples of total degree <= degree, graded lexicographic."""
    out = []
    for total in range(degree + 1):
        block = []
        for combo in itertools.combinations_with_replacement(range(dim), total):
            exps = [0] * dim
            for j in combo:
                exps[j] += 1
            block.append(tuple(exps))
        block.sort(reverse=True)
        out.extend(block)
    return out


@dataclass(frozen=True)
class FeatureMap:
    """Identity (raw coordinates plus constant omitted) or all polynomial
    interactions up to a degree (including the constant term first)."""

    input_dim: int
    degree: int = 1  # degree 0 would be constant-only
    identity: bool = False
    _exponents: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.identity:
            exps = tuple(_monomial_exponents(self.input_dim, self.degree))
            object.__setattr__(self, "_exponents", exps)

    @property
    def output_dim(self):
        if self.identity:
            return self.input_dim
        return len(self._exponents)

    def expand(self, x):
        """Row-wise monomial expansion; first column is the constant 1."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.input_dim:
            raise ValueError(
                f"expected input dim {self.input_dim}, got {x.shape[1]}"
            )
        if self.identity:
            out = x.copy()
        else:
            out = np.empty((x.shape[0], self.output_dim))
            for j, exps in enumerate(self._exponents):
                col = np.ones(x.shape[0])
                for axis, e in enumerate(exps):
                    if e:
                        col = col * x[:, axis] ** e
                out[:, j] = col
        return out[0] if squeeze else out


def identity_features(dim):
    return FeatureMap(input_dim=dim, identity=True)


def polynomial_features(dim, degree):
    return FeatureMap(input_dim=dim, degree=degree)


def expand_features(feature_map, x):
    return feature_map.expand(x)


# ---------------------------------------------------------------------------
# Linear models


@dataclass(frozen=True)
class LinearModel:
    feature_map: FeatureMap
    coefficients: np.ndarray
    ridge_lambda: float = 0.0

    def __post_init__(self):
        coeff = np.asarray(self.coefficients, dtype=float).ravel()
        if coeff.shape[0] != self.feature_map.output_dim:
            raise ValueError("coefficient length does not match feature map")
        coeff.setflags(write=False)
        object.__setattr__(self, "coefficients", coeff)

    def predict(self, x):
        return self.feature_map.expand(x) @ self.coefficients


def solve_ridge(features, targets, ridge_lambda, penalize_intercept=False):
    """Normal-equation ridge solve; column 0 is treated as the intercept and
    left unpenalized unless asked otherwise.  A rank-deficient system at
    ridge 0 raises rather than silently regularizing."""
    a = np.asarray(features, dtype=float)
    b = np.asarray(targets, dtype=float).ravel()
    if a.shape[0] != b.shape[0]:
        raise ValueError("row counts disagree")
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be >= 0")
    p = a.shape[1]
    gram = a.T @ a
    rhs = a.T @ b
    penalty = np.full(p, float(ridge_lambda))
    if not penalize_intercept and p > 0 and np.all(a[:, 0] == 1.0):
        penalty[0] = 0.0
    try:
        cf = cho_factor(gram + np.diag(penalty))
    except np.linalg.LinAlgError:
        raise SingularSystemError(
            "normal equations are singular; pass a positive ridge_lambda"
        )
    return cho_solve(cf, rhs)


def fit_linear(features, targets, ridge_lambda=0.0, feature_map=None):
    """Least-squares / ridge fit on an already-expanded feature matrix.

    If ``feature_map`` is given the result is a LinearModel usable as a
    predictor on raw inputs; otherwise the bare coefficient vector is
    returned.
    """
    coeff = solve_ridge(features, targets, ridge_lambda)
    if feature_map is None:
        return coeff
    return LinearModel(feature_map, coeff, ridge_lambda)


# ---------------------------------------------------------------------------
# GLM fitting by gradient descent with backtracking


@dataclass(frozen=True)
class OptimizerSettings:
    tol: float = 1e-8
    max_iters: int = 5000
    initial_step: float = 1.0
    backtrack: float = 0.5
    max_backtracks: int = 60


def _natural_domain(spec):
    """Bounds of the natural parameter.  The divergence-form binary loss is
    parameterized on the probability scale, so its coefficients live on the
    logit scale with bounds implied by the probability clamp."""
    if spec.kind is LossKind.BINARY_KL:
        tmax = math.log((1 - spec.clamp) / spec.clamp)
        return -tmax, tmax
    return spec.domain


@dataclass(frozen=True)
class GlmModel:
    feature_map: FeatureMap
    coefficients: np.ndarray
    spec: object  # LossSpec
    reg: float

    def linear_predict(self, x):
        """Natural-parameter scale prediction, clipped to its domain."""
        t = self.feature_map.expand(x) @ self.coefficients
        lo, hi = _natural_domain(self.spec)
        return np.clip(t, lo, hi)

    def predict(self, x):
        t = self.linear_predict(x)
        if self.spec.kind is LossKind.BINARY_KL:
            # Coefficients live on the logit scale; map back to probability.
            from .losses import sigmoid

            return sigmoid(t)
        return t


def _glm_objective_grad(spec, feats, y, beta, reg):
    t = feats @ beta
    lo, hi = _natural_domain(spec)
    tc = np.clip(t, lo, hi)
    if spec.kind is LossKind.BINARY_KL:
        from .losses import sigmoid

        p = np.clip(sigmoid(tc), spec.clamp, 1 - spec.clamp)
        obj = float(np.mean(loss_value(spec, p, y)))
        dp = loss_grad_first(spec, p, y) * p * (1 - p)
    else:
        obj = float(np.mean(loss_value(spec, tc, y)))
        dp = loss_grad_first(spec, tc, y)
    grad = feats.T @ np.atleast_1d(dp) / feats.shape[0]
    obj += reg * float(beta @ beta)
    grad = grad + 2 * reg * beta
    return obj, grad


def fit_glm(features, targets, spec, reg=0.0, opts=OptimizerSettings(), feature_map=None):
    """Full-batch gradient descent with backtracking line search.

    The objective decreases monotonically across accepted steps; convergence
    is declared when the gradient norm drops below opts.tol.
    """
    feats = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float).ravel()
    beta = np.zeros(feats.shape[1])
    obj, grad = _glm_objective_grad(spec, feats, y, beta, reg)
    step = opts.initial_step
    for _ in range(opts.max_iters):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < opts.tol:
            break
        accepted = False
        for _bt in range(opts.max_backtracks):
            cand = beta - step * grad
            cand_obj, cand_grad = _glm_objective_grad(spec, feats, y, cand, reg)
            if cand_obj <= obj - 1e-4 * step * gnorm**2:
                beta, obj, grad = cand, cand_obj, cand_grad
                step = min(step * 2.0, opts.initial_step * 1e3)
                accepted = True
                break
            step *= opts.backtrack
        if not accepted:
            break
    gnorm = float(np.linalg.norm(grad))
    if gnorm >= opts.tol:
        raise ConvergenceError(
            f"GLM fit did not converge: gradient norm {gnorm:.3e} >= tol {opts.tol:.3e}",
            gnorm,
        )
    fmap = feature_map if feature_map is not None else identity_features(feats.shape[1])
    return GlmModel(fmap, beta, spec, reg)


# ---------------------------------------------------------------------------
# Random forest


class ForestTask(enum.Enum):
    REGRESSION = "regression"
    PROBABILITY_CLASSIFICATION = "classification"


@dataclass(frozen=True)
class ForestHyperparams:
    n_trees: int = 200
    max_depth: int = 8
    min_leaf: int = 5
    feature_subsample_fraction: float = None  # None -> sqrt(d)/d
    bootstrap: bool = True


@dataclass(frozen=True)
class RandomForestModel:
    task: ForestTask
    hyperparams: ForestHyperparams
    features: np.ndarray  # (n_trees, max_nodes) int32
    thresholds: np.ndarray
    lefts: np.ndarray
    rights: np.ndarray
    values: np.ndarray
    input_dim: int

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        out = np.empty(x.shape[0])
        kernels.predict_forest(
            np.ascontiguousarray(x),
            self.features,
            self.thresholds,
            self.lefts,
            self.rights,
            self.values,
            out,
        )
        return float(out[0]) if squeeze else out


def fit_random_forest(x, y, task=ForestTask.REGRESSION, hyperparams=ForestHyperparams(), rng=None):
    """Grow a forest of exact CART trees.

    Regression trees minimize within-node squared error; classification on
    0/1 labels minimizes Gini impurity, which for binary labels selects the
    same split as squared error, so both share one kernel.  Degenerate
    (constant-x) data yields single-leaf trees.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    x = np.ascontiguousarray(np.asarray(x, dtype=float))
    y = np.ascontiguousarray(np.asarray(y, dtype=float).ravel())
    n, d = x.shape
    hp = hyperparams
    if n < 2 * hp.min_leaf:
        raise FitError(f"need at least {2 * hp.min_leaf} rows, got {n}")
    frac = hp.feature_subsample_fraction
    if frac is None:
        n_feat = max(1, int(round(math.sqrt(d))))
    else:
        n_feat = max(1, min(d, int(round(frac * d))))
    max_nodes = min(2 ** (hp.max_depth + 2), 4 * n + 1)
    features = np.empty((hp.n_trees, max_nodes), dtype=np.int64)
    thresholds = np.zeros((hp.n_trees, max_nodes))
    lefts = np.zeros((hp.n_trees, max_nodes), dtype=np.int64)
    rights = np.zeros((hp.n_trees, max_nodes), dtype=np.int64)
    values = np.zeros((hp.n_trees, max_nodes))
    for t in range(hp.n_trees):
        if hp.bootstrap:
            rows = rng.integers(0, n, size=n)
            xt, yt = np.ascontiguousarray(x[rows]), np.ascontiguousarray(y[rows])
        else:
            xt, yt = x, y
        seed = int(rng.integers(1, 2**63 - 1))
        features[t].fill(-1)
        kernels.grow_tree(
            xt,
            yt,
            hp.max_depth,
            hp.min_leaf,
            n_feat,
            seed,
            features[t],
            thresholds[t],
            lefts[t],
            rights[t],
            values[t],
        )
    return RandomForestModel(
        task=task,
        hyperparams=hp,
        features=features,
        thresholds=thresholds,
        lefts=lefts,
        rights=rights,
        values=values,
        input_dim=d,
    )


DEFAULT_FOREST_CV_GRID = tuple(
    ForestHyperparams(max_depth=md, min_leaf=ml)
    for md in (4, 8, 16)
    for ml in (1, 5, 20)
)


def cross_validate(fitter, grid, x, y, k_folds, rng, loss_fn=None):
    """Pick the grid entry minimizing mean held-out loss over deterministic
    folds (a single seeded permutation split into k contiguous blocks).
    Ties break by first grid order; entries whose folds are too small are
    skipped with a warning record.
    """
    if k_folds < 2:
        raise ValueError("k_folds must be >= 2")
    grid = list(grid)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    if loss_fn is None:
        loss_fn = lambda pred, truth: float(np.mean((pred - truth) ** 2))
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = x.shape[0]
    perm = rng.permutation(n)
    folds = np.array_split(perm, k_folds)
    warnings = []
    best = None
    best_score = math.inf
    for entry in grid:
        scores = []
        failed = False
        for k in range(k_folds):
            test_idx = folds[k]
            train_idx = np.concatenate([folds[j] for j in range(k_folds) if j != k])
            try:
                model = fitter(x[train_idx], y[train_idx], entry, np.random.default_rng(0))
            except FitError as exc:
                warnings.append((entry, str(exc)))
                failed = True
                break
            scores.append(loss_fn(model.predict(x[test_idx]), y[test_idx]))
        if failed:
            continue
        score = float(np.mean(scores))
        if score < best_score:
            best_score = score
            best = entry
    if best is None:
        raise FitError("every grid entry failed cross-validation")
    return best, best_score, warnings


# ---------------------------------------------------------------------------
# JSON serialization for harness caching


def model_to_json(model):
    if isinstance(model, LinearModel):
        doc = {
            "format_version": SERIAL_FORMAT_VERSION,
            "type": "linear",
            "input_dim": model.feature_map.input_dim,
            "degree": model.feature_map.degree,
            "identity": model.feature_map.identity,
            "ridge_lambda": model.ridge_lambda,
            "coefficients": model.coefficients.tolist(),
        }
    elif isinstance(model, RandomForestModel):
        doc = {
            "format_version": SERIAL_FORMAT_VERSION,
            "type": "random_forest",
            "task": model.task.value,
            "input_dim": model.input_dim,
            "hyperparams": {
                "n_trees": model.hyperparams.n_trees,
                "max_depth": model.hyperparams.max_depth,
                "min_leaf": model.hyperparams.min_leaf,
                "feature_subsample_fraction": model.hyperparams.feature_subsample_fraction,
                "bootstrap": model.hyperparams.bootstrap,
            },
            "features": model.features.tolist(),
            "thresholds": model.thresholds.tolist(),
            "lefts": model.lefts.tolist(),
            "rights": model.rights.tolist(),
            "values": model.values.tolist(),
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return json.dumps(doc)


def model_from_json(text):
    doc = json.loads(text)
    if doc.get("format_version") != SERIAL_FORMAT_VERSION:
        raise ValueError("unsupported model document version")
    if doc["type"] == "linear":
        if doc["identity"]:
            fmap = identity_features(doc["input_dim"])
        else:
            fmap = polynomial_features(doc["input_dim"], doc["degree"])
        return LinearModel(fmap, np.array(doc["coefficients"]), doc["ridge_lambda"])
    if doc["type"] == "random_forest":
        hp = ForestHyperparams(**doc["hyperparams"])
        return RandomForestModel(
            task=ForestTask(doc["task"]),
            hyperparams=hp,
            features=np.array(doc["features"], dtype=np.int64),
            thresholds=np.array(doc["thresholds"]),
            lefts=np.array(doc["lefts"], dtype=np.int64),
            rights=np.array(doc["rights"], dtype=np.int64),
            values=np.array(doc["values"]),
            input_dim=doc["input_dim"],
        )
    raise ValueError(f"unknown model type {doc['type']!r}")
