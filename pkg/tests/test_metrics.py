import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pastlib.ensembles import make_hard_soft, make_partial_linear_one
from pastlib.metrics import (
    SmoothedPredictor,
    classification_metrics,
    conditional_aux_defect,
    empirical_norm,
    l2_error_mc,
    r_squared,
    smoothed_defect,
)
from pastlib.past import AnalyticAuxiliary, LabelingPolicy


class TestL2Error:
    def test_constant_offset_exact(self):
        probe = np.random.default_rng(0).uniform(size=(500, 2))
        value, se = l2_error_mc(
            lambda x: np.full(x.shape[0], 3.0),
            lambda x: np.full(x.shape[0], 1.0),
            probe,
        )
        assert value == pytest.approx(2.0)
        assert se == 0.0

    def test_linear_vs_zero_uniform(self):
        # ||x - 0|| over Unif[0,1] is sqrt(1/3).
        probe = np.random.default_rng(1).uniform(size=(200_000, 1))
        value, se = l2_error_mc(
            lambda x: x[:, 0], lambda x: np.zeros(x.shape[0]), probe
        )
        assert value == pytest.approx(1.0 / math.sqrt(3.0), abs=4 * se)

    def test_zero_gap(self):
        probe = np.random.default_rng(2).uniform(size=(50, 3))
        value, se = l2_error_mc(lambda x: x[:, 0], lambda x: x[:, 0], probe)
        assert value == 0.0 and se == 0.0

    def test_se_shrinks_with_draws(self):
        rng = np.random.default_rng(3)
        f = lambda x: x[:, 0] ** 2
        g = lambda x: np.zeros(x.shape[0])
        _, se_small = l2_error_mc(f, g, rng.uniform(size=(1000, 1)))
        _, se_big = l2_error_mc(f, g, rng.uniform(size=(100_000, 1)))
        assert se_big < se_small / 5


class TestEmpiricalNorm:
    def test_known_value(self):
        assert empirical_norm([3.0, 4.0]) == pytest.approx(math.sqrt(12.5))

    def test_empty(self):
        assert empirical_norm([]) == 0.0

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
    def test_bounds(self, diffs):
        v = empirical_norm(diffs)
        assert 0.0 <= v <= max(abs(d) for d in diffs) + 1e-9


class TestSmoothedPredictor:
    def test_enumerate_matches_truth_for_oracle_aux(self):
        # Base predictor equal to g* with raw labels smooths exactly to f*.
        rng = np.random.default_rng(0)
        spec = make_hard_soft(1.0, rng)
        aux = AnalyticAuxiliary(spec.g_star)
        sp = SmoothedPredictor(base=aux, spec=spec)
        assert sp._resolve() == "enumerate"
        x = rng.uniform(size=(40, 5))
        np.testing.assert_allclose(sp.predict(x), spec.f_star(x), atol=1e-12)

    def test_enumerate_hard_labels_closed_form(self):
        # Hard-labeling the truth keeps only the helper-on branch when the
        # thresholded inner score fires: E[1{clip(g*) >= 1/2}] = h_W 1{h_Z >= 1/2}.
        rng = np.random.default_rng(1)
        spec = make_hard_soft(2.0, rng)
        aux = AnalyticAuxiliary(spec.g_star)
        sp = SmoothedPredictor(base=aux, spec=spec, labeling=LabelingPolicy.HARD)
        x = rng.uniform(size=(60, 5))
        expect = spec.h_w(x) * (spec.h_z(x) >= 0.5).astype(float)
        np.testing.assert_allclose(sp.predict(x), expect, atol=1e-12)

    def test_mean_strategy_matches_enumeration_free_truth(self):
        # Linear-in-w auxiliary with zero-mean helper: substitution at
        # E[W|x] = 0 is exact for raw labels.
        rng = np.random.default_rng(2)
        spec = make_partial_linear_one(0.7, rng)
        aux = AnalyticAuxiliary(spec.g_star)
        aux = type(
            "LinAux",
            (),
            {
                "linear_in_w": True,
                "predict": staticmethod(lambda x, w: spec.g_star(x, w)),
            },
        )()
        sp = SmoothedPredictor(base=aux, spec=spec)
        assert sp._resolve() == "mean"
        x = rng.uniform(size=(30, 5))
        np.testing.assert_allclose(sp.predict(x), spec.f_star(x), atol=1e-12)

    def test_mc_strategy_converges_to_mean_strategy(self):
        rng = np.random.default_rng(3)
        spec = make_partial_linear_one(0.9, rng)
        aux = type(
            "LinAux",
            (),
            {
                "linear_in_w": True,
                "predict": staticmethod(lambda x, w: spec.g_star(x, w)),
            },
        )()
        x = rng.uniform(size=(20, 5))
        exact = SmoothedPredictor(base=aux, spec=spec, strategy="mean").predict(x)
        mc = SmoothedPredictor(
            base=aux, spec=spec, strategy="mc", mc_draws=4000, seed=5
        ).predict(x)
        # helper sd is lam * sigma = 0.9; MC SE ~ 0.9 / sqrt(4000) ~ 0.014
        np.testing.assert_allclose(mc, exact, atol=0.07)

    def test_mc_deterministic_given_seed(self):
        rng = np.random.default_rng(4)
        spec = make_partial_linear_one(0.5, rng)
        aux = AnalyticAuxiliary(spec.g_star)
        x = rng.uniform(size=(10, 5))
        a = SmoothedPredictor(base=aux, spec=spec, strategy="mc", mc_draws=50, seed=9).predict(x)
        b = SmoothedPredictor(base=aux, spec=spec, strategy="mc", mc_draws=50, seed=9).predict(x)
        np.testing.assert_array_equal(a, b)


class TestDefects:
    def test_smoothed_defect_zero_for_truth(self):
        rng = np.random.default_rng(0)
        spec = make_hard_soft(1.5, rng)
        sp = SmoothedPredictor(base=AnalyticAuxiliary(spec.g_star), spec=spec)
        rows = rng.uniform(size=(80, 5))
        assert smoothed_defect(sp, spec.f_star, rows) == pytest.approx(0.0, abs=1e-12)

    def test_conditional_defect_dominates_smoothed(self):
        # Conditional Jensen: row-wise mean-square auxiliary error dominates
        # the squared smoothed gap, for a deliberately wrong auxiliary.
        rng = np.random.default_rng(1)
        spec = make_hard_soft(1.0, rng)
        wrong = AnalyticAuxiliary(lambda x, w: 0.8 * spec.g_star(x, w) + 0.05)
        rows = rng.uniform(size=(100, 5))
        for labeling in (
            LabelingPolicy.RAW,
            LabelingPolicy.HARD,
            LabelingPolicy.STOCHASTIC_SOFT,
        ):
            sp = SmoothedPredictor(base=wrong, spec=spec, labeling=labeling)
            sd = smoothed_defect(sp, spec.f_star, rows)
            cad = conditional_aux_defect(wrong, spec, labeling, rows)
            assert sd <= cad + 1e-12

    def test_conditional_defect_exact_enumeration(self):
        # Constant-shift auxiliary with raw labels: every (x, w) cell is off
        # by exactly c, so the conditional defect is |c|.
        rng = np.random.default_rng(2)
        spec = make_hard_soft(1.0, rng)
        shifted = AnalyticAuxiliary(lambda x, w: spec.g_star(x, w) + 0.3)
        rows = rng.uniform(size=(50, 5))
        cad = conditional_aux_defect(shifted, spec, LabelingPolicy.RAW, rows)
        assert cad == pytest.approx(0.3, abs=1e-12)

    def test_conditional_defect_mc_path(self):
        rng = np.random.default_rng(3)
        spec = make_partial_linear_one(0.5, rng)
        shifted = AnalyticAuxiliary(lambda x, w: spec.g_star(x, w) + 0.3)
        rows = rng.uniform(size=(50, 5))
        cad = conditional_aux_defect(shifted, spec, LabelingPolicy.RAW, rows, mc_draws=20)
        assert cad == pytest.approx(0.3, abs=1e-12)


class TestClassificationMetrics:
    def test_perfect_separation(self):
        acc, roc, auc = classification_metrics([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert acc == 1.0
        assert auc == pytest.approx(1.0)
        assert roc[0].tolist() == [0.0, 0.0]
        assert roc[-1].tolist() == [1.0, 1.0]

    def test_reversed_scores(self):
        _, _, auc = classification_metrics([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0])
        assert auc == pytest.approx(0.0)

    def test_all_tied_scores(self):
        acc, _, auc = classification_metrics([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0])
        assert auc == pytest.approx(0.5)
        assert acc == 0.5

    def test_degenerate_single_class(self):
        _, _, auc = classification_metrics([0.4, 0.6], [1, 1])
        assert math.isnan(auc)

    def test_matches_mann_whitney(self):
        rng = np.random.default_rng(0)
        scores = rng.uniform(size=200)
        labels = (rng.uniform(size=200) < 0.4).astype(float)
        _, _, auc = classification_metrics(scores, labels)
        pos = scores[labels == 1]
        neg = scores[labels == 0]
        wins = (pos[:, None] > neg[None, :]).mean()
        ties = (pos[:, None] == neg[None, :]).mean()
        assert auc == pytest.approx(wins + 0.5 * ties, abs=1e-12)

    @given(st.lists(st.floats(0, 1), min_size=4, max_size=30))
    @settings(max_examples=50, deadline=None)
    def test_auc_invariant_under_monotone_transform(self, raw):
        scores = np.asarray(raw)
        labels = (np.arange(scores.size) % 2).astype(float)
        _, _, a1 = classification_metrics(scores, labels)
        # Scaling by a power of two is exact, so distinct scores stay
        # distinct and tied scores stay tied.
        _, _, a2 = classification_metrics(4.0 * scores, labels)
        assert a1 == pytest.approx(a2, abs=1e-12)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            classification_metrics([0.5], [1, 0])
        with pytest.raises(ValueError):
            classification_metrics([], [])


class TestRSquared:
    def test_half(self):
        assert r_squared([1.0, 2.0, 4.0], [1.0, 2.0, 3.0]) == pytest.approx(0.5)

    def test_perfect(self):
        assert r_squared([1.0, 2.0], [1.0, 2.0]) == 1.0

    def test_constant_targets(self):
        assert r_squared([1.0, 1.0], [2.0, 2.0]) == float("-inf")
        assert r_squared([2.0, 2.0], [2.0, 2.0]) == 1.0
