"""Error measures: Monte-Carlo L2 distance to truth, empirical norms,
helper-smoothed predictors and their defects, classification metrics, R^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .past import LabelingPolicy, labelize


def l2_error_mc(predict, truth, probe_x):
    """Root-mean-square gap between a predictor and the truth map over a
    probe sample; returns (value, standard error by the delta method)."""
    probe_x = np.atleast_2d(probe_x)
    diff_sq = (np.asarray(predict(probe_x), dtype=float).ravel()
               - np.asarray(truth(probe_x), dtype=float).ravel()) ** 2
    m = float(np.mean(diff_sq))
    n = diff_sq.shape[0]
    value = np.sqrt(m)
    if m == 0.0:
        return 0.0, 0.0
    var_m = float(np.var(diff_sq, ddof=1)) / n if n > 1 else 0.0
    # d sqrt(m) / d m = 1 / (2 sqrt(m))
    return value, np.sqrt(var_m) / (2.0 * value)


def empirical_norm(diff):
    """sqrt of the mean square of a vector of pointwise differences."""
    diff = np.asarray(diff, dtype=float).ravel()
    if diff.size == 0:
        return 0.0
    return float(np.sqrt(np.mean(diff**2)))


@dataclass(frozen=True)
class SmoothedPredictor:
    """The helper-averaged map x -> E[labelize(g(x, W)) | X = x].

    Three strategies, best first:
      * exact enumeration when the helper is discrete with a known
        conditional law (``spec.enumerate_w``);
      * analytic mean substitution when the base predictor is linear in w
        and E[W | x] is known (valid because the expectation passes through
        a linear map; only for raw labeling);
      * Monte-Carlo averaging over ``spec.sample_w`` draws otherwise.
    """

    base: object  # auxiliary predictor with .predict(x, w)
    spec: object  # ensemble providing the conditional law of W given X
    labeling: LabelingPolicy = LabelingPolicy.RAW
    strategy: str = "auto"
    mc_draws: int = 2000
    seed: int = 0

    def _resolve(self):
        if self.strategy != "auto":
            return self.strategy
        if hasattr(self.spec, "enumerate_w"):
            return "enumerate"
        if self.labeling is LabelingPolicy.RAW and hasattr(self.spec, "mean_w") and getattr(
            self.base, "linear_in_w", False
        ):
            return "mean"
        return "mc"

    def predict(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        how = self._resolve()
        if how == "enumerate":
            # Hard labels commute with the expectation per support atom;
            # soft labels average to the clamped probability itself.
            acc = np.zeros(x.shape[0])
            rng = np.random.default_rng(self.seed)
            for weight, w in self.spec.enumerate_w(x):
                vals = np.asarray(self.base.predict(x, w), dtype=float).ravel()
                if self.labeling is LabelingPolicy.HARD:
                    vals = labelize(vals, LabelingPolicy.HARD, rng)
                elif self.labeling is LabelingPolicy.STOCHASTIC_SOFT:
                    vals = np.clip(vals, 0.0, 1.0)
                acc += np.asarray(weight, dtype=float).ravel() * vals
            return acc
        if how == "mean":
            return np.asarray(
                self.base.predict(x, self.spec.mean_w(x)), dtype=float
            ).ravel()
        rng = np.random.default_rng(self.seed)
        acc = np.zeros(x.shape[0])
        for _ in range(self.mc_draws):
            w = self.spec.sample_w(x, rng)
            vals = np.asarray(self.base.predict(x, w), dtype=float).ravel()
            if self.labeling is LabelingPolicy.HARD:
                vals = labelize(vals, LabelingPolicy.HARD, rng)
            elif self.labeling is LabelingPolicy.STOCHASTIC_SOFT:
                vals = np.clip(vals, 0.0, 1.0)
            acc += vals
        return acc / self.mc_draws


def smoothed_predict(sp, x):
    return sp.predict(x)


def smoothed_defect(sp, truth, rows_x):
    """Empirical norm of (smoothed predictor - truth) over given rows."""
    rows_x = np.atleast_2d(rows_x)
    return empirical_norm(sp.predict(rows_x) - np.asarray(truth(rows_x)).ravel())


def conditional_aux_defect(base, spec, labeling, rows_x, mc_draws=200, seed=0):
    """Root of the average over rows of E[(labelized g(x, W) - g*(x, W))^2
    given X = x], the conditional-mean-square auxiliary error.

    By the conditional Jensen inequality this dominates the smoothed-defect
    of the same auxiliary over the same rows (the labelized pseudo-response
    map has conditional mean f-tilde while g* has conditional mean f*).
    Hard labels threshold; stochastic-soft labels contribute their mean,
    the clamped probability.  Exact under helper enumeration, Monte-Carlo
    otherwise.
    """
    rows_x = np.atleast_2d(rows_x)

    def labelized(vals):
        vals = np.asarray(vals, dtype=float).ravel()
        if labeling is LabelingPolicy.HARD:
            return (np.clip(vals, 0.0, 1.0) >= 0.5).astype(float)
        if labeling is LabelingPolicy.STOCHASTIC_SOFT:
            return np.clip(vals, 0.0, 1.0)
        return vals

    if hasattr(spec, "enumerate_w"):
        acc = np.zeros(rows_x.shape[0])
        for weight, w in spec.enumerate_w(rows_x):
            diff = labelized(base.predict(rows_x, w)) - np.asarray(
                spec.g_star(rows_x, w), dtype=float
            ).ravel()
            acc += np.asarray(weight, dtype=float).ravel() * diff**2
        return float(np.sqrt(np.mean(acc)))
    rng = np.random.default_rng(seed)
    acc = np.zeros(rows_x.shape[0])
    for _ in range(mc_draws):
        w = spec.sample_w(rows_x, rng)
        diff = labelized(base.predict(rows_x, w)) - np.asarray(
            spec.g_star(rows_x, w), dtype=float
        ).ravel()
        acc += diff**2
    return float(np.sqrt(np.mean(acc / mc_draws)))


def classification_metrics(scores, labels):
    """Accuracy at threshold 1/2, the ROC polyline, and trapezoidal AUC.

    Equal scores collapse into a single threshold step, so the AUC equals
    the Mann-Whitney statistic with the usual 1/2 credit for ties.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels, dtype=float).ravel()
    if scores.shape != labels.shape or scores.size == 0:
        raise ValueError("scores and labels must be equal-length and non-empty")
    accuracy = float(np.mean((scores >= 0.5).astype(float) == labels))
    n_pos = float(np.sum(labels == 1))
    n_neg = float(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        return accuracy, np.array([[0.0, 0.0], [1.0, 1.0]]), float("nan")
    order = np.argsort(-scores, kind="mergesort")
    s_sorted = scores[order]
    l_sorted = labels[order]
    tps = np.cumsum(l_sorted == 1)
    fps = np.cumsum(l_sorted == 0)
    # Keep only the last index of each tied-score run (one threshold step).
    keep = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tpr = np.r_[0.0, tps[keep] / n_pos]
    fpr = np.r_[0.0, fps[keep] / n_neg]
    auc = float(np.trapezoid(tpr, fpr))
    roc = np.column_stack([fpr, tpr])
    return accuracy, roc, auc


def r_squared(predictions, targets):
    predictions = np.asarray(predictions, dtype=float).ravel()
    targets = np.asarray(targets, dtype=float).ravel()
    ss_res = float(np.sum((targets - predictions) ** 2))
    ss_tot = float(np.sum((targets - np.mean(targets)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else float("-inf")
    return 1.0 - ss_res / ss_tot
