"""Pluggable loss functions: squared loss and the GLM-type family.

A GLM-type loss has the shape ``loss(f, y) = -phi(f) * y + Phi(f)`` with a
convex cumulant term Phi; its population minimizer is ``psi(E[Y | X = x])``
where psi is the canonical link.  The binary KL divergence is exposed in its
divergence form (zero at identical arguments), which differs from the raw
GLM form only by a y-only additive term that never affects minimizers; the
same holds for the squared loss, available both as ``(f - y)^2`` and as the
GLM form ``-f y + f^2 / 2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_CLAMP = 1e-6


class LossKind(enum.Enum):
    SQUARED = "squared"
    LOGISTIC_GLM = "logistic"
    POISSON_GLM = "poisson"
    BINARY_KL = "binary_kl"


class LossDomainError(ValueError):
    pass


def sigmoid(t):
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LossSpec:
    kind: LossKind
    lipschitz_L: float
    convexity_gamma: float
    domain: tuple  # closed interval of valid predictions
    clamp: float = DEFAULT_CLAMP

    @property
    def name(self):
        return self.kind.value


_NAMES = {k.value: k for k in LossKind}


def make_loss(name, clamp=DEFAULT_CLAMP, squared_bound=1.0):
    """Build a LossSpec by config name.

    The logistic / binary-KL domains are clamped away from degenerate
    probabilities by ``clamp`` so the Lipschitz constant stays finite; the
    reported L and gamma are the values implied by the clamped domain.
    """
    if name not in _NAMES:
        raise ValueError(f"unknown loss {name!r}; choose from {sorted(_NAMES)}")
    kind = _NAMES[name]
    if kind is LossKind.SQUARED:
        b = float(squared_bound)
        # |d loss / d f| = |2 (f - y)| <= 4 b when both lie in [-b, b].
        return LossSpec(kind, lipschitz_L=4 * b, convexity_gamma=2.0, domain=(-b, b))
    if kind is LossKind.LOGISTIC_GLM:
        tmax = math.log((1 - clamp) / clamp)
        s = sigmoid(tmax)
        return LossSpec(
            kind,
            lipschitz_L=max(1.0, tmax),
            convexity_gamma=s * (1 - s),
            domain=(-tmax, tmax),
            clamp=clamp,
        )
    if kind is LossKind.POISSON_GLM:
        tmax = math.log(1.0 / clamp)
        return LossSpec(
            kind,
            lipschitz_L=math.exp(tmax) + 1.0,
            convexity_gamma=math.exp(-tmax),
            domain=(-tmax, tmax),
            clamp=clamp,
        )
    # Binary KL: predictions are probabilities in [c, 1 - c]; the curvature
    # y/f^2 + (1-y)/(1-f)^2 is at least 1 on that interval.
    return LossSpec(
        kind,
        lipschitz_L=1.0 / clamp,
        convexity_gamma=1.0,
        domain=(clamp, 1 - clamp),
        clamp=clamp,
    )


def _check_domain(spec, yhat):
    lo, hi = spec.domain
    yhat = np.asarray(yhat, dtype=float)
    if np.any(yhat < lo - 1e-12) or np.any(yhat > hi + 1e-12):
        raise LossDomainError(
            f"prediction outside {spec.name} domain [{lo}, {hi}]"
        )
    return np.clip(yhat, lo, hi)


def _xlogx(p):
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log(p[nz])
    return out


def loss_value(spec, yhat, y):
    """Pointwise loss; broadcasts over arrays."""
    yhat = _check_domain(spec, yhat)
    y = np.asarray(y, dtype=float)
    if spec.kind is LossKind.SQUARED:
        out = (yhat - y) ** 2
    elif spec.kind is LossKind.LOGISTIC_GLM:
        # -t y + log(1 + e^t), computed stably.
        out = -yhat * y + np.logaddexp(0.0, yhat)
    elif spec.kind is LossKind.POISSON_GLM:
        out = -yhat * y + np.exp(yhat)
    else:  # binary KL divergence, zero iff yhat == y
        out = (
            _xlogx(y)
            + _xlogx(1 - y)
            - y * np.log(yhat)
            - (1 - y) * np.log(1 - yhat)
        )
    return out if np.ndim(out) else float(out)


def loss_value_glm_form(spec, yhat, y):
    """The raw GLM form -phi(f) y + Phi(f).

    Minimizers coincide with loss_value's: the binary KL divergence form
    differs by a y-only additive term, and the squared loss additionally by
    an overall factor of 2 ((f - y)^2 = 2 (-f y + f^2 / 2) + y^2).
    """
    yhat = _check_domain(spec, yhat)
    y = np.asarray(y, dtype=float)
    if spec.kind is LossKind.SQUARED:
        out = -yhat * y + yhat**2 / 2.0
    elif spec.kind is LossKind.BINARY_KL:
        out = -np.log(yhat / (1 - yhat)) * y - np.log(1 - yhat)
    else:
        return loss_value(spec, yhat, y)
    return out if np.ndim(out) else float(out)


def loss_grad_first(spec, yhat, y):
    """d loss / d yhat; matches centered finite differences."""
    yhat = _check_domain(spec, yhat)
    y = np.asarray(y, dtype=float)
    if spec.kind is LossKind.SQUARED:
        out = 2.0 * (yhat - y)
    elif spec.kind is LossKind.LOGISTIC_GLM:
        out = sigmoid(yhat) - y
    elif spec.kind is LossKind.POISSON_GLM:
        out = np.exp(yhat) - y
    else:
        out = -y / yhat + (1 - y) / (1 - yhat)
    return out if np.ndim(out) else float(out)


def link(spec, mean):
    """Canonical link psi applied to a conditional mean."""
    mean = np.asarray(mean, dtype=float)
    if spec.kind in (LossKind.SQUARED, LossKind.BINARY_KL):
        out = mean + 0.0
    elif spec.kind is LossKind.LOGISTIC_GLM:
        if np.any(mean <= 0) or np.any(mean >= 1):
            raise LossDomainError("logistic link needs mean in (0, 1)")
        out = np.log(mean / (1 - mean))
    else:
        if np.any(mean <= 0):
            raise LossDomainError("poisson link needs mean > 0")
        out = np.log(mean)
    return out if np.ndim(out) else float(out)


def cumulant_derivative(spec, t):
    """Phi'(t) for the GLM kinds (inverse of the canonical link)."""
    t = np.asarray(t, dtype=float)
    if spec.kind in (LossKind.SQUARED, LossKind.BINARY_KL):
        out = t + 0.0
    elif spec.kind is LossKind.LOGISTIC_GLM:
        out = sigmoid(t)
    else:
        out = np.exp(t)
    return out if np.ndim(out) else float(out)


def clamp_probability(spec, p):
    return np.clip(p, spec.clamp, 1 - spec.clamp)


@dataclass(frozen=True)
class RegularityReport:
    worst_lipschitz_ratio: float
    worst_curvature: float
    n_pairs: int


def check_lipschitz_convexity(spec, grid):
    """Numeric sanity sweep over (yhat, y) grid points.

    Reports the worst observed ratio |loss(a,y)-loss(b,y)| / |a-b| and the
    smallest second-difference curvature; report-only, never raises on the
    observed values.
    """
    pts = [(float(a), float(b)) for a, b in grid]
    worst_ratio = 0.0
    worst_curv = math.inf
    n_pairs = 0
    ys = sorted({y for _, y in pts})
    yhats = sorted({a for a, _ in pts})
    for y in ys:
        vals = [loss_value(spec, a, y) for a in yhats]
        for i in range(len(yhats)):
            for j in range(i + 1, len(yhats)):
                da = abs(yhats[i] - yhats[j])
                if da > 0:
                    worst_ratio = max(worst_ratio, abs(vals[i] - vals[j]) / da)
                    n_pairs += 1
        for i in range(1, len(yhats) - 1):
            h1 = yhats[i] - yhats[i - 1]
            h2 = yhats[i + 1] - yhats[i]
            if h1 > 0 and h2 > 0 and abs(h1 - h2) < 1e-12:
                curv = (vals[i + 1] - 2 * vals[i] + vals[i - 1]) / (h1 * h2)
                worst_curv = min(worst_curv, curv)
    if not math.isfinite(worst_curv):
        worst_curv = 0.0
    return RegularityReport(worst_ratio, worst_curv, n_pairs)
