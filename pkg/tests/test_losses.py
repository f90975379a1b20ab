import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pastlib.losses import (
    LossDomainError,
    LossKind,
    check_lipschitz_convexity,
    clamp_probability,
    cumulant_derivative,
    link,
    loss_grad_first,
    loss_value,
    loss_value_glm_form,
    make_loss,
    sigmoid,
)

ALL_NAMES = ["squared", "logistic", "poisson", "binary_kl"]


def interior_grid(spec, k=100):
    lo, hi = spec.domain
    span = hi - lo
    return np.linspace(lo + 0.01 * span, hi - 0.01 * span, k)


class TestMakeLoss:
    def test_names(self):
        for name in ALL_NAMES:
            spec = make_loss(name)
            assert spec.name == name
            assert spec.lipschitz_L > 0
            assert spec.convexity_gamma > 0

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            make_loss("hinge")

    def test_binary_kl_domain_clamped(self):
        spec = make_loss("binary_kl", clamp=1e-3)
        assert spec.domain == (1e-3, 1 - 1e-3)
        assert spec.lipschitz_L == pytest.approx(1e3)


class TestLossValues:
    def test_squared(self):
        spec = make_loss("squared")
        assert loss_value(spec, 0.5, 1.0) == pytest.approx(0.25)

    def test_logistic_stable_at_extremes(self):
        spec = make_loss("logistic")
        lo, hi = spec.domain
        assert np.isfinite(loss_value(spec, hi, 0.0))
        assert np.isfinite(loss_value(spec, lo, 1.0))

    def test_binary_kl_zero_at_identical(self):
        spec = make_loss("binary_kl")
        for p in (0.1, 0.5, 0.9):
            assert loss_value(spec, p, p) == pytest.approx(0.0, abs=1e-12)

    def test_binary_kl_positive_otherwise(self):
        spec = make_loss("binary_kl")
        assert loss_value(spec, 0.3, 0.7) > 0

    def test_domain_enforced(self):
        spec = make_loss("binary_kl")
        with pytest.raises(LossDomainError):
            loss_value(spec, 1.5, 0.5)

    def test_glm_form_shares_minimizers(self):
        # The binary KL divergence form differs from the raw GLM form by a
        # y-only additive term; the squared loss also carries a factor 2.
        spec = make_loss("binary_kl")
        grid = interior_grid(spec, 7)
        for y in (0.2, 0.8):
            gap = [
                loss_value(spec, f, y) - loss_value_glm_form(spec, f, y)
                for f in grid
            ]
            assert np.ptp(gap) < 1e-9
        sq = make_loss("squared")
        for y in (0.2, 0.8):
            for f in interior_grid(sq, 7):
                assert loss_value(sq, f, y) == pytest.approx(
                    2.0 * loss_value_glm_form(sq, f, y) + y**2
                )


class TestGradients:
    def test_matches_finite_differences(self):
        # 100-point grids, 1e-6 relative agreement.
        for name in ALL_NAMES:
            spec = make_loss(name, clamp=1e-4)
            grid = interior_grid(spec, 100)
            h_scale = 1e-7 * max(1.0, np.max(np.abs(grid)))
            for y in (0.0, 0.3, 1.0):
                for f in grid:
                    h = h_scale
                    fd = (loss_value(spec, f + h, y) - loss_value(spec, f - h, y)) / (2 * h)
                    an = loss_grad_first(spec, f, y)
                    assert an == pytest.approx(fd, rel=1e-5, abs=1e-5), (name, f, y)

    def test_grad_zero_at_minimizer(self):
        # For GLM losses the pointwise minimizer is psi(y).
        for name in ("logistic", "poisson", "binary_kl"):
            spec = make_loss(name)
            y = 0.4
            f_min = link(spec, y)
            assert loss_grad_first(spec, f_min, y) == pytest.approx(0.0, abs=1e-12)


class TestLink:
    def test_inverse_identity(self):
        # cumulant_derivative(link(mean)) == mean to 1e-10.
        for name, means in (
            ("logistic", np.linspace(0.01, 0.99, 50)),
            ("poisson", np.linspace(0.05, 10.0, 50)),
            ("binary_kl", np.linspace(0.01, 0.99, 50)),
            ("squared", np.linspace(-2.0, 2.0, 50)),
        ):
            spec = make_loss(name)
            back = cumulant_derivative(spec, link(spec, means))
            assert np.max(np.abs(back - means)) < 1e-10

    def test_logit_values(self):
        spec = make_loss("logistic")
        assert link(spec, 0.5) == pytest.approx(0.0)
        assert link(spec, sigmoid(2.0)) == pytest.approx(2.0)

    def test_poisson_log(self):
        spec = make_loss("poisson")
        assert link(spec, math.e) == pytest.approx(1.0)

    def test_domain_errors(self):
        with pytest.raises(LossDomainError):
            link(make_loss("logistic"), 1.0)
        with pytest.raises(LossDomainError):
            link(make_loss("poisson"), 0.0)


class TestRegularity:
    def test_report_within_declared_constants(self):
        for name in ALL_NAMES:
            spec = make_loss(name, clamp=1e-3)
            grid_pts = interior_grid(spec, 40)
            pairs = [(a, y) for a in grid_pts for y in (0.0, 0.5, 1.0)]
            report = check_lipschitz_convexity(spec, pairs)
            assert report.worst_lipschitz_ratio <= spec.lipschitz_L * (1 + 1e-6)
            assert report.worst_curvature >= spec.convexity_gamma * (1 - 1e-2)

    def test_singleton_grid(self):
        spec = make_loss("squared")
        report = check_lipschitz_convexity(spec, [(0.0, 0.0)])
        assert report.worst_lipschitz_ratio == 0.0
        assert report.n_pairs == 0


class TestClamp:
    def test_clamp_probability(self):
        spec = make_loss("binary_kl", clamp=0.01)
        out = clamp_probability(spec, np.array([-1.0, 0.5, 2.0]))
        assert np.array_equal(out, [0.01, 0.5, 0.99])


@given(
    t=st.floats(-30, 30),
)
@settings(max_examples=100, deadline=None)
def test_sigmoid_bounds_and_symmetry(t):
    s = sigmoid(t)
    assert 0.0 <= s <= 1.0
    assert s + sigmoid(-t) == pytest.approx(1.0, abs=1e-12)
