"""Synthetic data-generating processes with analytic ground truth.

Four families, each exposing exact maps ``f_star(x) = E[Y | X=x]`` and
``g_star(x, w) = E[Y | X=x, W=w]`` plus the conditional law of W given X so
smoothed predictors and defects can be computed exactly or by Monte Carlo.

* ``PartialLinearOne``: polynomial regression with a scalar Gaussian helper
  whose weight interpolates between pure noise and a perfect surrogate.
* ``PartialLinearTwo``: as above, but the helper carries a high-dimensional
  nuisance block that makes the auxiliary fit noisy.
* ``HardSoft``: binary outcome that is the product of two latent coin
  flips; the helper is one of the coins.
* ``NoisyLabel``: binary outcome observed through an XOR flip channel; the
  helper is the corrupted label itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import FeatureMap, polynomial_features
from .losses import sigmoid

X_DIM = 5


class EnsembleParamError(ValueError):
    pass


def _check_lambda(lam):
    if not (0.0 <= lam <= 1.0):
        raise EnsembleParamError(f"lambda must be in [0, 1], got {lam}")


def _check_sigma(sigma):
    if sigma <= 0:
        raise EnsembleParamError(f"sigma must be > 0, got {sigma}")


def _check_nu(nu):
    if nu < 0:
        raise EnsembleParamError(f"nu must be >= 0, got {nu}")


def _draw_x(n, rng):
    return rng.uniform(0.0, 1.0, size=(n, X_DIM))


def _unit(v):
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartialLinearOne:
    """Y = <beta, features(X)> + lambda*W + (1-lambda)*eps with scalar
    helper W and noise eps both N(0, sigma^2)."""

    lam: float
    sigma: float = 1.0
    beta_star: np.ndarray = None
    feature_map: FeatureMap = field(default=None, repr=False)

    degree = 3
    kind = "partial_linear_1"
    binary_outcome = False

    def __post_init__(self):
        _check_lambda(self.lam)
        _check_sigma(self.sigma)
        fm = polynomial_features(X_DIM, self.degree)
        beta = np.asarray(self.beta_star, dtype=float).ravel()
        if beta.shape[0] != fm.output_dim:
            raise EnsembleParamError(
                f"beta_star must have length {fm.output_dim}, got {beta.shape[0]}"
            )
        beta.setflags(write=False)
        object.__setattr__(self, "beta_star", beta)
        object.__setattr__(self, "feature_map", fm)

    @property
    def d1(self):
        return self.feature_map.output_dim

    @property
    def dim_w(self):
        return 1

    def f_star(self, x):
        return self.feature_map.expand(np.atleast_2d(x)) @ self.beta_star

    def g_star(self, x, w):
        w = np.atleast_2d(np.asarray(w, dtype=float))
        return self.f_star(x) + self.lam * w[:, 0]

    def sample_w(self, x, rng):
        return rng.normal(0.0, self.sigma, size=(np.atleast_2d(x).shape[0], 1))

    def mean_w(self, x):
        return np.zeros((np.atleast_2d(x).shape[0], 1))

    def generate(self, n, rng):
        if n < 1:
            raise EnsembleParamError("n must be >= 1")
        x = _draw_x(n, rng)
        w = self.sample_w(x, rng)
        eps = rng.normal(0.0, self.sigma, size=n)
        y = self.f_star(x) + self.lam * w[:, 0] + (1.0 - self.lam) * eps
        return x, w, y


def make_partial_linear_one(lam, rng, sigma=1.0):
    d1 = polynomial_features(X_DIM, 3).output_dim
    return PartialLinearOne(lam=lam, sigma=sigma, beta_star=rng.normal(size=d1))


@dataclass(frozen=True)
class PartialLinearTwo:
    """Helper W = (U, V): a useful scalar U plus a d2-dimensional nuisance
    block V that inflates the auxiliary estimation error."""

    lam: float
    sigma: float = 1.0
    d2: int = 50
    beta_star: np.ndarray = None
    alpha_star: np.ndarray = None
    feature_map: FeatureMap = field(default=None, repr=False)

    degree = 2
    kind = "partial_linear_2"
    binary_outcome = False

    def __post_init__(self):
        _check_lambda(self.lam)
        _check_sigma(self.sigma)
        fm = polynomial_features(X_DIM, self.degree)
        beta = np.asarray(self.beta_star, dtype=float).ravel()
        alpha = np.asarray(self.alpha_star, dtype=float).ravel()
        if beta.shape[0] != fm.output_dim:
            raise EnsembleParamError(
                f"beta_star must have length {fm.output_dim}, got {beta.shape[0]}"
            )
        if alpha.shape[0] != self.d2:
            raise EnsembleParamError(
                f"alpha_star must have length {self.d2}, got {alpha.shape[0]}"
            )
        beta.setflags(write=False)
        alpha.setflags(write=False)
        object.__setattr__(self, "beta_star", beta)
        object.__setattr__(self, "alpha_star", alpha)
        object.__setattr__(self, "feature_map", fm)

    @property
    def d1(self):
        return self.feature_map.output_dim

    @property
    def dim_w(self):
        return 1 + self.d2

    def f_star(self, x):
        return self.feature_map.expand(np.atleast_2d(x)) @ self.beta_star

    def g_star(self, x, w):
        w = np.atleast_2d(np.asarray(w, dtype=float))
        return self.f_star(x) + self.lam * w[:, 0] + w[:, 1:] @ self.alpha_star

    def sample_w(self, x, rng):
        n = np.atleast_2d(x).shape[0]
        u = rng.normal(0.0, self.sigma, size=(n, 1))
        v = rng.uniform(-1.0, 1.0, size=(n, self.d2))
        return np.hstack([u, v])

    def mean_w(self, x):
        return np.zeros((np.atleast_2d(x).shape[0], self.dim_w))

    def generate(self, n, rng):
        if n < 1:
            raise EnsembleParamError("n must be >= 1")
        x = _draw_x(n, rng)
        w = self.sample_w(x, rng)
        eps = rng.normal(0.0, self.sigma, size=n)
        y = self.g_star(x, w) + (1.0 - self.lam) * eps
        return x, w, y


def make_partial_linear_two(lam, rng, sigma=1.0, d2=50):
    d1 = polynomial_features(X_DIM, 2).output_dim
    # alpha_star is rescaled to norm sigma (the same unit-norm convention as
    # theta_star in the binary families) so the nuisance signal <alpha, V>
    # keeps a d2-independent scale below the noise level.
    alpha = rng.normal(size=d2)
    alpha *= sigma / np.linalg.norm(alpha)
    return PartialLinearTwo(
        lam=lam,
        sigma=sigma,
        d2=d2,
        beta_star=rng.normal(size=d1),
        alpha_star=alpha,
    )


# ---------------------------------------------------------------------------
# Binary-outcome families


@dataclass(frozen=True)
class HardSoft:
    """Y = Z * W with latent Z ~ Ber(h_Z(x)) and helper W ~ Ber(h_W(x)),
    independent given x.  The sharpness of h_Z is controlled by nu."""

    nu: float
    theta_star: np.ndarray = None

    kind = "hard_soft"
    binary_outcome = True

    def __post_init__(self):
        _check_nu(self.nu)
        theta = _unit(np.asarray(self.theta_star, dtype=float).ravel())
        if theta.shape[0] != X_DIM:
            raise EnsembleParamError(f"theta_star must have length {X_DIM}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta_star", theta)

    @property
    def dim_w(self):
        return 1

    def h_z(self, x):
        return sigmoid(self.nu * (np.atleast_2d(x) @ self.theta_star))

    def h_w(self, x):
        return 1.0 - 1.8 * np.abs(self.h_z(x) - 0.5)

    def f_star(self, x):
        return self.h_w(x) * self.h_z(x)

    def g_star(self, x, w):
        w = np.atleast_2d(np.asarray(w, dtype=float))
        return w[:, 0] * self.h_z(x)

    def w_prob(self, x):
        """P[W = 1 | x]; with enumerate_w this makes smoothing exact."""
        return self.h_w(x)

    def enumerate_w(self, x):
        n = np.atleast_2d(x).shape[0]
        p1 = self.w_prob(x)
        return [
            (1.0 - p1, np.zeros((n, 1))),
            (p1, np.ones((n, 1))),
        ]

    def sample_w(self, x, rng):
        p1 = self.w_prob(x)
        return (rng.uniform(size=p1.shape) < p1).astype(float)[:, None]

    def generate(self, n, rng):
        if n < 1:
            raise EnsembleParamError("n must be >= 1")
        x = _draw_x(n, rng)
        hz = self.h_z(x)
        hw = self.h_w(x)
        w = (rng.uniform(size=n) < hw).astype(float)
        z = (rng.uniform(size=n) < hz).astype(float)
        y = z * w
        return x, w[:, None], y


def make_hard_soft(nu, rng):
    return HardSoft(nu=nu, theta_star=rng.normal(size=X_DIM))


@dataclass(frozen=True)
class NoisyLabel:
    """Binary outcome Y observed only through W = Y xor Z, where the flip
    indicator Z ~ Ber(h_Z(x)) has covariate-dependent rate."""

    nu: float
    theta_star: np.ndarray = None

    kind = "noisy_label"
    binary_outcome = True

    def __post_init__(self):
        _check_nu(self.nu)
        theta = _unit(np.asarray(self.theta_star, dtype=float).ravel())
        if theta.shape[0] != X_DIM:
            raise EnsembleParamError(f"theta_star must have length {X_DIM}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta_star", theta)

    @property
    def dim_w(self):
        return 1

    def h_y(self, x):
        return sigmoid(np.atleast_2d(x) @ self.theta_star)

    def h_z(self, x):
        raw = 1.8 * np.abs(sigmoid(self.nu * (np.atleast_2d(x) @ self.theta_star)) - 0.5)
        return np.clip(raw, 0.0, 1.0)

    def f_star(self, x):
        return self.h_y(x)

    def g_star(self, x, w):
        """P[Y = 1 | x, w] by enumerating the four (Y, Z) cells."""
        w = np.atleast_2d(np.asarray(w, dtype=float))[:, 0]
        hy = self.h_y(x)
        hz = self.h_z(x)
        # Given Y=1, observing W=w requires Z = 1 xor w; given Y=0, Z = w.
        p_z_flip = np.where(w > 0.5, 1.0 - hz, hz)
        p_z_keep = np.where(w > 0.5, hz, 1.0 - hz)
        num = hy * p_z_flip
        den = num + (1.0 - hy) * p_z_keep
        return num / den

    def w_prob(self, x):
        hy = self.h_y(x)
        hz = self.h_z(x)
        return hy * (1.0 - hz) + (1.0 - hy) * hz

    def enumerate_w(self, x):
        n = np.atleast_2d(x).shape[0]
        p1 = self.w_prob(x)
        return [
            (1.0 - p1, np.zeros((n, 1))),
            (p1, np.ones((n, 1))),
        ]

    def sample_w(self, x, rng):
        p1 = self.w_prob(x)
        return (rng.uniform(size=p1.shape) < p1).astype(float)[:, None]

    def flip_probability(self, x):
        """P[Z = 1 | x]; its average is the reported corruption level."""
        return self.h_z(x)

    def generate(self, n, rng):
        if n < 1:
            raise EnsembleParamError("n must be >= 1")
        x = _draw_x(n, rng)
        y = (rng.uniform(size=n) < self.h_y(x)).astype(float)
        z = (rng.uniform(size=n) < self.h_z(x)).astype(float)
        w = np.abs(y - z)  # xor on 0/1 values
        return x, w[:, None], y


def make_noisy_label(nu, rng):
    return NoisyLabel(nu=nu, theta_star=rng.normal(size=X_DIM))


# ---------------------------------------------------------------------------
# Analytic biases of degenerate labelings


def misscalibration_bias(spec, x):
    """Bias of hard-thresholding the ideal helper probability: the smoothed
    hard-label predictor minus f_star, evaluated exactly."""
    if not isinstance(spec, HardSoft):
        raise TypeError("misscalibration_bias applies to the HardSoft family")
    hz = spec.h_z(x)
    return spec.h_w(x) * ((hz >= 0.5).astype(float) - hz)


def noisy_direct_bias(spec, x):
    """Bias of treating the corrupted label W as if it were Y:
    E[W - Y | x] = 2 h_Z(x) (1/2 - h_Y(x))."""
    if not isinstance(spec, NoisyLabel):
        raise TypeError("noisy_direct_bias applies to the NoisyLabel family")
    return 2.0 * spec.h_z(x) * (0.5 - spec.h_y(x))


_FACTORIES = {
    "partial_linear_1": make_partial_linear_one,
    "partial_linear_2": make_partial_linear_two,
    "hard_soft": make_hard_soft,
    "noisy_label": make_noisy_label,
}


def make_ensemble(kind, sweep_value, rng, **kwargs):
    """Build an ensemble by config name; the sweep value is lambda for the
    regression families and nu for the binary families."""
    if kind not in _FACTORIES:
        raise EnsembleParamError(
            f"unknown ensemble {kind!r}; choose from {sorted(_FACTORIES)}"
        )
    return _FACTORIES[kind](sweep_value, rng, **kwargs)
