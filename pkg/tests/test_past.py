import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pastlib.datamodel import HybridDataset
from pastlib.ensembles import make_hard_soft, make_partial_linear_one
from pastlib.estimators import fit_linear, solve_ridge
from pastlib.past import (
    AnalyticAuxiliary,
    ImputationPolicy,
    LabelingPolicy,
    PastConfig,
    StageError,
    fit_auxiliary,
    fit_final,
    generate_pseudo_responses,
    labelize,
    naive_fit,
    oracle_fit,
    past_fit,
)


def simple_dataset(n_l=20, n_u=30, seed=0):
    rng = np.random.default_rng(seed)
    return HybridDataset(
        x_labeled=rng.normal(size=(n_l, 2)),
        w_labeled=rng.normal(size=(n_l, 1)),
        y_labeled=rng.normal(size=n_l),
        x_unlabeled=rng.normal(size=(n_u, 2)),
        w_unlabeled=rng.normal(size=(n_u, 1)),
    )


class MeanPredictor:
    def __init__(self, value):
        self.value = value

    def predict(self, x):
        return np.full(np.atleast_2d(x).shape[0], self.value)


def intercept_fitter(x, y, rng):
    return MeanPredictor(float(np.mean(y)))


def linear_aux_fitter(x, w, y, rng):
    feats = np.hstack([np.ones((len(x), 1)), x, w])
    coef = solve_ridge(feats, y, 1e-8)

    class Aux:
        def predict(self, xq, wq):
            f = np.hstack(
                [np.ones((np.atleast_2d(xq).shape[0], 1)), np.atleast_2d(xq), np.atleast_2d(wq)]
            )
            return f @ coef

    return Aux()


class TestLabelize:
    def test_hard_boundary_goes_to_one(self):
        rng = np.random.default_rng(0)
        out = labelize(np.array([0.5]), LabelingPolicy.HARD, rng)
        assert out[0] == 1.0

    def test_hard_below_above(self):
        rng = np.random.default_rng(0)
        out = labelize(np.array([0.49, 0.51]), LabelingPolicy.HARD, rng)
        assert out.tolist() == [0.0, 1.0]

    def test_hard_clamps_out_of_range(self):
        rng = np.random.default_rng(0)
        out = labelize(np.array([-3.0, 7.0]), LabelingPolicy.HARD, rng)
        assert out.tolist() == [0.0, 1.0]

    def test_soft_degenerate(self):
        rng = np.random.default_rng(0)
        assert np.all(labelize(np.ones(50), LabelingPolicy.STOCHASTIC_SOFT, rng) == 1.0)
        assert np.all(labelize(np.zeros(50), LabelingPolicy.STOCHASTIC_SOFT, rng) == 0.0)

    def test_soft_mean_near_probability(self):
        rng = np.random.default_rng(0)
        out = labelize(np.full(20000, 0.3), LabelingPolicy.STOCHASTIC_SOFT, rng)
        assert np.mean(out) == pytest.approx(0.3, abs=0.02)

    def test_raw_passthrough(self):
        rng = np.random.default_rng(0)
        vals = np.array([-2.0, 0.4, 3.0])
        assert np.array_equal(labelize(vals, LabelingPolicy.RAW, rng), vals)

    @given(p=st.floats(0.0, 1.0))
    @settings(max_examples=60, deadline=None)
    def test_hard_complement(self, p):
        rng = np.random.default_rng(0)
        a = labelize(np.array([p]), LabelingPolicy.HARD, rng)[0]
        b = labelize(np.array([1.0 - p]), LabelingPolicy.HARD, rng)[0]
        if abs(p - 0.5) > 1e-12:
            assert a + b == 1.0
        else:
            assert a == b == 1.0


class TestAuxiliary:
    def test_oracle_injection_passthrough(self):
        ds = simple_dataset()
        gstar = lambda x, w: np.atleast_2d(x)[:, 0] + np.atleast_2d(w)[:, 0]
        cfg = PastConfig(oracle_auxiliary=gstar)
        aux = fit_auxiliary(cfg, ds, np.random.default_rng(0))
        assert isinstance(aux, AnalyticAuxiliary)
        out = aux.predict(ds.x_labeled, ds.w_labeled)
        assert np.allclose(out, ds.x_labeled[:, 0] + ds.w_labeled[:, 0])

    def test_fits_on_labeled_only(self):
        seen = {}

        def fitter(x, w, y, rng):
            seen["n"] = len(x)
            return MeanPredictor(0.0)

        ds = simple_dataset(n_l=7, n_u=13)
        fit_auxiliary(PastConfig(auxiliary_fitter=fitter), ds, np.random.default_rng(0))
        assert seen["n"] == 7

    def test_failure_tagged_auxiliary(self):
        def bad(x, w, y, rng):
            raise RuntimeError("boom")

        with pytest.raises(StageError) as err:
            fit_auxiliary(PastConfig(auxiliary_fitter=bad), simple_dataset(), np.random.default_rng(0))
        assert err.value.stage == "auxiliary"

    def test_single_labeled_row_with_ridge(self):
        ds = simple_dataset(n_l=1, n_u=5)
        aux = fit_auxiliary(
            PastConfig(auxiliary_fitter=linear_aux_fitter), ds, np.random.default_rng(0)
        )
        assert np.isfinite(aux.predict(ds.x_unlabeled, ds.w_unlabeled)).all()


class TestPseudoResponses:
    def test_unlabeled_only_preserves_true_labels(self):
        ds = simple_dataset()
        aux = AnalyticAuxiliary(lambda x, w: np.zeros(np.atleast_2d(x).shape[0]))
        pseudo = generate_pseudo_responses(
            aux, ds, LabelingPolicy.RAW, ImputationPolicy.UNLABELED_ONLY, np.random.default_rng(0)
        )
        assert np.array_equal(pseudo.y_tilde[: ds.n_labeled], ds.y_labeled)
        assert pseudo.is_true_label[: ds.n_labeled].all()
        assert not pseudo.is_true_label[ds.n_labeled :].any()
        assert np.all(pseudo.y_tilde[ds.n_labeled :] == 0.0)

    def test_all_pseudo_replaces_everything(self):
        ds = simple_dataset()
        aux = AnalyticAuxiliary(lambda x, w: np.full(np.atleast_2d(x).shape[0], 0.25))
        pseudo = generate_pseudo_responses(
            aux, ds, LabelingPolicy.RAW, ImputationPolicy.ALL_PSEUDO, np.random.default_rng(0)
        )
        assert np.all(pseudo.y_tilde == 0.25)
        assert not pseudo.is_true_label.any()

    def test_no_unlabeled_rows(self):
        ds = simple_dataset(n_l=10, n_u=0)
        aux = AnalyticAuxiliary(lambda x, w: np.zeros(np.atleast_2d(x).shape[0]))
        pseudo = generate_pseudo_responses(
            aux, ds, LabelingPolicy.RAW, ImputationPolicy.UNLABELED_ONLY, np.random.default_rng(0)
        )
        assert pseudo.n == 10
        assert np.array_equal(pseudo.y_tilde, ds.y_labeled)


class TestFitFinal:
    def test_intercept_only_gives_mean(self):
        ds = simple_dataset()
        aux = AnalyticAuxiliary(lambda x, w: np.zeros(np.atleast_2d(x).shape[0]))
        pseudo = generate_pseudo_responses(
            aux, ds, LabelingPolicy.RAW, ImputationPolicy.UNLABELED_ONLY, np.random.default_rng(0)
        )
        cfg = PastConfig(final_fitter=intercept_fitter)
        model = fit_final(cfg, pseudo, np.random.default_rng(0))
        assert model.predict(np.zeros((1, 2)))[0] == pytest.approx(np.mean(pseudo.y_tilde))

    def test_failure_tagged_final(self):
        ds = simple_dataset()
        aux = AnalyticAuxiliary(lambda x, w: np.zeros(np.atleast_2d(x).shape[0]))
        pseudo = generate_pseudo_responses(
            aux, ds, LabelingPolicy.RAW, ImputationPolicy.UNLABELED_ONLY, np.random.default_rng(0)
        )

        def bad(x, y, rng):
            raise ValueError("nope")

        with pytest.raises(StageError) as err:
            fit_final(PastConfig(final_fitter=bad), pseudo, np.random.default_rng(0))
        assert err.value.stage == "final"


class TestPipeline:
    def test_past_with_perfect_helper_matches_oracle(self):
        # With a perfect surrogate (lam = 1) and the exact conditional mean
        # injected, pseudo-responses equal the true responses exactly, so
        # the final fit coincides with the all-labels fit.
        rng = np.random.default_rng(3)
        spec = make_partial_linear_one(1.0, rng)
        x, w, y = spec.generate(400, rng)
        from pastlib.datamodel import split_dataset

        ds = split_dataset(x, w, y, 0.25, rng)
        fm = spec.feature_map

        def final_fitter(xf, yf, r):
            return fit_linear(fm.expand(xf), yf, ridge_lambda=1e-8, feature_map=fm)

        cfg = PastConfig(
            final_fitter=final_fitter,
            oracle_auxiliary=lambda xq, wq: spec.g_star(xq, wq),
        )
        past = past_fit(cfg, ds, np.random.default_rng(0))
        # Rebuild the same row order the pipeline used.
        x_all = ds.all_x()
        y_all = np.r_[ds.y_labeled, spec.g_star(ds.x_unlabeled, ds.w_unlabeled)]
        oracle = oracle_fit(cfg, x_all, y_all, np.random.default_rng(0))
        assert np.allclose(
            past.predictor.coefficients, oracle.coefficients, atol=1e-10
        )

    def test_no_unlabeled_past_equals_naive(self):
        ds = simple_dataset(n_l=15, n_u=0)
        cfg = PastConfig(
            auxiliary_fitter=linear_aux_fitter,
            final_fitter=intercept_fitter,
        )
        past = past_fit(cfg, ds, np.random.default_rng(0))
        naive = naive_fit(cfg, ds, np.random.default_rng(0))
        x = np.zeros((1, 2))
        assert past.predict(x)[0] == naive.predict(x)[0]

    def test_replay_determinism(self):
        ds = simple_dataset()
        cfg = PastConfig(
            auxiliary_fitter=linear_aux_fitter,
            final_fitter=intercept_fitter,
            labeling=LabelingPolicy.RAW,
        )
        a = past_fit(cfg, ds, np.random.default_rng(42))
        b = past_fit(cfg, ds, np.random.default_rng(42))
        x = np.ones((3, 2))
        assert np.array_equal(a.predict(x), b.predict(x))

    def test_provenance_counts(self):
        ds = simple_dataset(n_l=20, n_u=30)
        cfg = PastConfig(
            auxiliary_fitter=linear_aux_fitter,
            final_fitter=intercept_fitter,
        )
        fit = past_fit(cfg, ds, np.random.default_rng(0))
        assert fit.provenance.n_true_labels == 20
        assert fit.provenance.n_pseudo_labels == 30

    def test_oracle_equals_naive_when_fully_labeled(self):
        ds = simple_dataset(n_l=25, n_u=0)
        cfg = PastConfig(final_fitter=intercept_fitter)
        naive = naive_fit(cfg, ds, np.random.default_rng(0))
        oracle = oracle_fit(cfg, ds.x_labeled, ds.y_labeled, np.random.default_rng(0))
        x = np.zeros((1, 2))
        assert naive.predict(x)[0] == oracle.predict(x)[0]


class TestSmoothingCalibration:
    def test_soft_labels_calibrate_to_truth(self):
        # With the exact conditional mean injected, the average of soft
        # pseudo-labels given x converges to the product of the two latent
        # probability maps; hard labels converge to the thresholded form.
        rng = np.random.default_rng(0)
        spec = make_hard_soft(1.5, rng)
        x = rng.uniform(0, 1, size=(5, 5))
        aux = AnalyticAuxiliary(lambda xq, wq: spec.g_star(xq, wq))
        n_mc = 30000
        soft_acc = np.zeros(5)
        hard_acc = np.zeros(5)
        for _ in range(n_mc):
            w = spec.sample_w(x, rng)
            vals = aux.predict(x, w)
            soft_acc += labelize(vals, LabelingPolicy.STOCHASTIC_SOFT, rng)
            hard_acc += labelize(vals, LabelingPolicy.HARD, rng)
        soft_mean = soft_acc / n_mc
        hard_mean = hard_acc / n_mc
        f_star = spec.f_star(x)
        f_hard = spec.h_w(x) * (spec.h_z(x) >= 0.5).astype(float)
        assert np.allclose(soft_mean, f_star, atol=0.015)
        assert np.allclose(hard_mean, f_hard, atol=0.015)
