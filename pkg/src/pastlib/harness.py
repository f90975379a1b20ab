"""Experiment orchestration: config parsing, deterministic trial
replication across the sweep grids, the four figure pipelines, theory
overlays, and CSV/JSON/SVG emission.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import ensembles, theory
from .datamodel import split_dataset
from .estimators import (
    ForestHyperparams,
    ForestTask,
    fit_linear,
    fit_random_forest,
    identity_features,
    solve_ridge,
)
from .metrics import (
    SmoothedPredictor,
    classification_metrics,
    conditional_aux_defect,
    l2_error_mc,
    smoothed_defect,
)
from .past import (
    ImputationPolicy,
    LabelingPolicy,
    PastConfig,
    fit_auxiliary,
    fit_final,
    generate_pseudo_responses,
)

try:
    import tomllib
except ImportError:  # pragma: no cover - Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    pass


_KINDS = (
    "ensemble_one",
    "ensemble_two",
    "hard_soft",
    "noisy_label",
    "label_fraction",
    "theory",
)

_DEFAULT_METHODS = {
    "ensemble_one": ("past", "naive", "oracle"),
    "ensemble_two": ("past", "naive", "oracle"),
    "hard_soft": ("past_hard", "past_soft"),
    "noisy_label": ("past", "direct"),
    "label_fraction": ("past_hard", "past_soft", "naive"),
}

_DEFAULT_SWEEPS = {
    "ensemble_one": tuple(round(0.1 * k, 1) for k in range(11)),
    "ensemble_two": tuple(round(0.1 * k, 1) for k in range(11)),
    "hard_soft": (0.1, 0.5, 1.0, 2.0, 3.0),
    "noisy_label": (0.1, 0.5, 1.0, 2.0, 3.0),
    "label_fraction": (0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40),
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    base_seed: int = 20260824
    trials: int = 50
    n: int = 1000
    n_labeled: int = 100
    sweep: tuple = ()
    methods: tuple = ()
    labeling: str = "raw"
    imputation: str = "unlabeled_only"
    loss: str = "squared"
    ridge_lambda: float = 1e-6
    n_trees: int = 50
    max_depth: int = 6
    min_leaf: int = 5
    sigma: float = 1.0
    d2: int = 50
    nu: float = 1.0
    probe_draws: int = 4000
    test_draws: int = 2000
    class_dim: int = 5
    theory_n: tuple = (250, 1000, 4000)
    mc_draws: int = 50

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.kind != "theory":
            if not self.sweep:
                object.__setattr__(self, "sweep", _DEFAULT_SWEEPS[self.kind])
            if not self.methods:
                object.__setattr__(self, "methods", _DEFAULT_METHODS[self.kind])
            if self.trials < 1:
                raise ConfigError("trials must be >= 1")
            if not (1 <= self.n_labeled <= self.n):
                raise ConfigError("need 1 <= n_labeled <= n")
        object.__setattr__(self, "sweep", tuple(float(v) for v in self.sweep))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "theory_n", tuple(int(v) for v in self.theory_n))


_SECTION_FIELDS = {
    "experiment": (
        "kind",
        "base_seed",
        "trials",
        "n",
        "n_labeled",
        "sweep",
        "methods",
        "labeling",
        "imputation",
        "loss",
        "probe_draws",
        "test_draws",
    ),
    "fitters": ("ridge_lambda", "n_trees", "max_depth", "min_leaf"),
    "ensemble": ("sigma", "d2", "nu"),
    "theory": ("class_dim", "theory_n", "mc_draws"),
}


def load_config(path):
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}")
    fields = {}
    for section, names in _SECTION_FIELDS.items():
        table = doc.get(section, {})
        if not isinstance(table, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in table:
            if key not in names:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
        fields.update({k: v for k, v in table.items() if k in names})
    for section in doc:
        if section not in _SECTION_FIELDS:
            raise ConfigError(f"unknown section [{section}]")
    if "kind" not in fields:
        raise ConfigError("missing required key: [experiment] kind")
    if "sweep" in fields:
        fields["sweep"] = tuple(fields["sweep"])
    if "methods" in fields:
        fields["methods"] = tuple(fields["methods"])
    if "theory_n" in fields:
        fields["theory_n"] = tuple(fields["theory_n"])
    try:
        return ExperimentConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


# ---------------------------------------------------------------------------
# Fitters


@dataclass(frozen=True)
class LinearAuxiliary:
    """Ridge fit over (features(x), w); linear in w so mean substitution
    smooths it exactly."""

    coef: np.ndarray
    feature_map: object
    linear_in_w = True

    def predict(self, x, w):
        feats = np.hstack(
            [self.feature_map.expand(np.atleast_2d(x)), np.atleast_2d(np.asarray(w, dtype=float))]
        )
        return feats @ self.coef


@dataclass(frozen=True)
class ForestAuxiliary:
    model: object

    def predict(self, x, w):
        joined = np.hstack(
            [np.atleast_2d(np.asarray(x, dtype=float)), np.atleast_2d(np.asarray(w, dtype=float))]
        )
        return self.model.predict(joined)


def _forest_hp(config):
    return ForestHyperparams(
        n_trees=config.n_trees,
        max_depth=config.max_depth,
        min_leaf=config.min_leaf,
    )


def _make_spec(config, sweep_value):
    """Build the ensemble for one sweep point; coefficient draws depend on
    base_seed only, so every trial and sweep point shares them."""
    coeff_rng = np.random.default_rng(np.random.SeedSequence([config.base_seed, 7]))
    if config.kind == "ensemble_one":
        return ensembles.make_partial_linear_one(sweep_value, coeff_rng, sigma=config.sigma)
    if config.kind == "ensemble_two":
        return ensembles.make_partial_linear_two(
            sweep_value, coeff_rng, sigma=config.sigma, d2=config.d2
        )
    if config.kind == "hard_soft":
        return ensembles.make_hard_soft(sweep_value, coeff_rng)
    if config.kind == "noisy_label":
        return ensembles.make_noisy_label(sweep_value, coeff_rng)
    if config.kind == "label_fraction":
        return ensembles.make_hard_soft(config.nu, coeff_rng)
    raise ConfigError(f"kind {config.kind!r} has no data-generating spec")


def _coefficient_record(config):
    spec = _make_spec(config, config.sweep[0] if config.sweep else config.nu)
    rec = {}
    for name in ("beta_star", "alpha_star", "theta_star"):
        if hasattr(spec, name):
            rec[name] = np.asarray(getattr(spec, name)).tolist()
    return rec


# ---------------------------------------------------------------------------
# Single-trial runners (one list of result rows each)


def _linear_trial(config, spec, sweep_value, trial_idx, rngs):
    rng_data, rng_fit = rngs
    x, w, y = spec.generate(config.n, rng_data)
    ds = split_dataset(x, w, y, config.n_labeled / config.n, rng_data)
    fm = spec.feature_map

    def aux_fitter(xl, wl, yl, rng):
        feats = np.hstack([fm.expand(xl), wl])
        return LinearAuxiliary(
            solve_ridge(feats, yl, config.ridge_lambda), fm
        )

    def final_fitter(xf, yf, rng):
        return fit_linear(fm.expand(xf), yf, ridge_lambda=config.ridge_lambda, feature_map=fm)

    pcfg = PastConfig(
        auxiliary_fitter=aux_fitter,
        final_fitter=final_fitter,
        labeling=LabelingPolicy(config.labeling),
        imputation=ImputationPolicy(config.imputation),
    )
    probe = rng_fit.uniform(0.0, 1.0, size=(config.probe_draws, ensembles.X_DIM))
    rows = []

    g_tilde = fit_auxiliary(pcfg, ds, rng_fit)
    if "past" in config.methods:
        pseudo = generate_pseudo_responses(g_tilde, ds, pcfg.labeling, pcfg.imputation, rng_fit)
        f_hat = fit_final(pcfg, pseudo, rng_fit)
        rmse, _ = l2_error_mc(f_hat.predict, spec.f_star, probe)
        rows.append((sweep_value, trial_idx, "past", "rmse", rmse))
        sp = SmoothedPredictor(base=g_tilde, spec=spec, labeling=pcfg.labeling)
        rows.append(
            (
                sweep_value,
                trial_idx,
                "past",
                "ftilde_defect",
                smoothed_defect(sp, spec.f_star, ds.x_unlabeled),
            )
        )
        rows.append(
            (
                sweep_value,
                trial_idx,
                "past",
                "aux_defect",
                conditional_aux_defect(
                    g_tilde, spec, pcfg.labeling, ds.x_unlabeled, seed=trial_idx
                ),
            )
        )
    if "naive" in config.methods:
        f_naive = final_fitter(ds.x_labeled, ds.y_labeled, rng_fit)
        rmse, _ = l2_error_mc(f_naive.predict, spec.f_star, probe)
        rows.append((sweep_value, trial_idx, "naive", "rmse", rmse))
    if "oracle" in config.methods:
        f_oracle = final_fitter(x, y, rng_fit)
        rmse, _ = l2_error_mc(f_oracle.predict, spec.f_star, probe)
        rows.append((sweep_value, trial_idx, "oracle", "rmse", rmse))
    return rows


def _binary_trial(config, spec, sweep_value, trial_idx, rngs):
    rng_data, rng_aux, rng_hard, rng_soft, rng_extra = rngs
    x, w, y = spec.generate(config.n, rng_data)
    frac = sweep_value if config.kind == "label_fraction" else config.n_labeled / config.n
    ds = split_dataset(x, w, y, frac, rng_data)
    hp = _forest_hp(config)

    def aux_fitter(xl, wl, yl, rng):
        joined = np.hstack([xl, wl])
        return ForestAuxiliary(
            fit_random_forest(
                joined, yl, task=ForestTask.PROBABILITY_CLASSIFICATION, hyperparams=hp, rng=rng
            )
        )

    def final_fitter(xf, yf, rng):
        return fit_random_forest(xf, yf, hyperparams=hp, rng=rng)

    probe = rng_extra.uniform(0.0, 1.0, size=(config.probe_draws, ensembles.X_DIM))
    rows = []
    base_cfg = PastConfig(auxiliary_fitter=aux_fitter, final_fitter=final_fitter)
    g_tilde = fit_auxiliary(base_cfg, ds, rng_aux)

    def run_arm(method, labeling, arm_rng):
        pseudo = generate_pseudo_responses(
            g_tilde, ds, labeling, ImputationPolicy(config.imputation), arm_rng
        )
        f_hat = fit_final(base_cfg, pseudo, arm_rng)
        rmse, _ = l2_error_mc(f_hat.predict, spec.f_star, probe)
        rows.append((sweep_value, trial_idx, method, "rmse", rmse))
        sp = SmoothedPredictor(base=g_tilde, spec=spec, labeling=labeling)
        rows.append(
            (
                sweep_value,
                trial_idx,
                method,
                "ftilde_defect",
                smoothed_defect(sp, spec.f_star, ds.x_unlabeled),
            )
        )
        rows.append(
            (
                sweep_value,
                trial_idx,
                method,
                "aux_defect",
                conditional_aux_defect(g_tilde, spec, labeling, ds.x_unlabeled),
            )
        )
        return f_hat

    arm_fits = {}
    for method in config.methods:
        if method == "past_hard":
            arm_fits[method] = run_arm(method, LabelingPolicy.HARD, rng_hard)
        elif method == "past_soft" or method == "past":
            arm_fits[method] = run_arm(method, LabelingPolicy.STOCHASTIC_SOFT, rng_soft)
        elif method == "naive":
            f_naive = final_fitter(ds.x_labeled, ds.y_labeled, rng_extra)
            rmse, _ = l2_error_mc(f_naive.predict, spec.f_star, probe)
            rows.append((sweep_value, trial_idx, "naive", "rmse", rmse))
            arm_fits[method] = f_naive
        elif method == "direct":
            # Treat the helper bit as if it were the response, on all rows.
            f_direct = final_fitter(x, w[:, 0], rng_extra)
            rmse, _ = l2_error_mc(f_direct.predict, spec.f_star, probe)
            rows.append((sweep_value, trial_idx, "direct", "rmse", rmse))
            arm_fits[method] = f_direct
        else:
            raise ConfigError(f"method {method!r} not valid for kind {config.kind!r}")

    if config.kind == "noisy_label":
        rows.append(
            (
                sweep_value,
                trial_idx,
                "info",
                "flip_prob",
                float(np.mean(spec.flip_probability(probe))),
            )
        )
    if config.kind == "label_fraction":
        xt, _, yt = spec.generate(config.test_draws, rng_extra)
        for method, fit in arm_fits.items():
            acc, _, auc = classification_metrics(fit.predict(xt), yt)
            rows.append((sweep_value, trial_idx, method, "accuracy", acc))
            rows.append((sweep_value, trial_idx, method, "auc", auc))
    return rows


def run_single_trial(config, sweep_idx, trial_idx):
    """All result rows for one (sweep point, trial) cell; deterministic in
    (base_seed, sweep_idx, trial_idx) alone."""
    sweep_value = config.sweep[sweep_idx]
    spec = _make_spec(config, sweep_value)
    seq = np.random.SeedSequence([config.base_seed, sweep_idx, trial_idx])
    rngs = [np.random.default_rng(child) for child in seq.spawn(5)]
    if config.kind in ("ensemble_one", "ensemble_two"):
        return _linear_trial(config, spec, sweep_value, trial_idx, rngs[:2])
    return _binary_trial(config, spec, sweep_value, trial_idx, rngs)


# ---------------------------------------------------------------------------
# Experiment driver


@dataclass(frozen=True)
class ExperimentResult:
    manifest: dict
    rows: tuple  # of (sweep_value, trial, method, metric, value)


def _manifest_hash(manifest):
    doc = {k: v for k, v in manifest.items() if k not in ("timestamp", "manifest_hash")}
    return hashlib.sha256(
        json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


def aggregate(rows, metric, method):
    """Per-sweep-point mean and standard error of one metric/method."""
    by_sweep = {}
    for sweep_value, _trial, m, name, value in rows:
        if m == method and name == metric:
            by_sweep.setdefault(sweep_value, []).append(value)
    sweeps = sorted(by_sweep)
    means = [float(np.mean(by_sweep[s])) for s in sweeps]
    ses = [
        float(np.std(by_sweep[s], ddof=1) / math.sqrt(len(by_sweep[s])))
        if len(by_sweep[s]) > 1
        else 0.0
        for s in sweeps
    ]
    return sweeps, means, ses


def _overlay(config, rows):
    """Theory rate curve with its scale constant fit on the oracle means."""
    if config.kind not in ("ensemble_one", "ensemble_two") or "oracle" not in config.methods:
        return None
    sweeps, oracle_means, _ = aggregate(rows, "rmse", "oracle")
    if not sweeps:
        return None
    spec = _make_spec(config, sweeps[0])
    if config.kind == "ensemble_one":
        vals = [
            theory.guarantee_ensemble_one(config.sigma, s, spec.d1, config.n, config.n_labeled)
            for s in sweeps
        ]
        oracle_rate = [theory.guarantee_ensemble_one(config.sigma, 1.0, spec.d1, config.n, config.n_labeled)] * len(sweeps)
    else:
        vals = [
            theory.guarantee_ensemble_two(
                config.sigma, s, spec.d1, config.d2, config.n, config.n_labeled
            )
            for s in sweeps
        ]
        oracle_rate = [
            theory.guarantee_ensemble_two(
                config.sigma, 1.0, spec.d1, config.d2, config.n, config.n_labeled
            )
        ] * len(sweeps)
    constant = theory.fit_overlay_constant(oracle_rate, oracle_means)
    return {
        "sweeps": sweeps,
        "values": [constant * v for v in vals],
        "constant": constant,
    }


def run_experiment(config, jobs=1):
    if config.kind == "theory":
        raise ConfigError("theory configs run via run_theory")
    tasks = [
        (si, ti) for si in range(len(config.sweep)) for ti in range(config.trials)
    ]
    if jobs > 1:
        worker = functools.partial(_trial_entry, config)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(worker, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        chunks = [run_single_trial(config, si, ti) for si, ti in tasks]
    rows = tuple(r for chunk in chunks for r in chunk)
    manifest = {
        "config": asdict(config),
        "coefficients": _coefficient_record(config),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    overlay = _overlay(config, rows)
    if overlay is not None:
        manifest["overlay_constant"] = overlay["constant"]
    manifest["manifest_hash"] = _manifest_hash(manifest)
    return ExperimentResult(manifest=manifest, rows=rows)


def _trial_entry(config, task):
    return run_single_trial(config, *task)


def write_results(result, out_dir, svg=False, config=None):
    os.makedirs(out_dir, exist_ok=True)
    mhash = result.manifest["manifest_hash"]
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(result.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "results.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sweep_value", "trial", "method", "metric", "value", "manifest_hash"])
        for sweep_value, trial, method, metric, value in result.rows:
            writer.writerow([repr(float(sweep_value)), trial, method, metric, repr(float(value)), mhash])
    if svg and config is not None:
        plot = render_figure(config, result)
        if plot is not None:
            plot.write(os.path.join(out_dir, "figure.svg"))


def render_figure(config, result):
    from .svgplot import LinePlot

    metric = "accuracy" if config.kind == "label_fraction" else "rmse"
    xlabel = {
        "ensemble_one": "helper weight",
        "ensemble_two": "helper weight",
        "hard_soft": "sharpness",
        "noisy_label": "sharpness",
        "label_fraction": "labeled fraction",
    }[config.kind]
    plot = LinePlot(title=config.kind, xlabel=xlabel, ylabel=metric)
    drew = False
    for method in config.methods:
        sweeps, means, ses = aggregate(result.rows, metric, method)
        if sweeps:
            plot.add_series(method, sweeps, means, errs=ses)
            drew = True
    overlay = _overlay(config, result.rows)
    if overlay is not None:
        plot.add_series("theory rate", overlay["sweeps"], overlay["values"], dashed=True)
        plot.annotate(f"overlay constant = {overlay['constant']:.3g}")
    return plot if drew else None


# ---------------------------------------------------------------------------
# Theory subcommand


def run_theory(config, rng=None):
    """Complexity curve and critical radius for an identity-covariance
    linear class at each sample size; returns (rows, fixed_points)."""
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([config.base_seed, 11]))
    d = config.class_dim
    descriptor = theory.LinearClassDescriptor(
        feature_map=identity_features(d),
        sampler=lambda n, r: r.normal(size=(n, d)),
    )
    rows = []
    fixed_points = {}
    for n in config.theory_n:
        radii = [0.25 * (k + 1) for k in range(8)]
        for t in radii:
            est = theory.rademacher_complexity_mc(descriptor, t, n, config.mc_draws, rng)
            rows.append((n, t, est.value, est.std_error))
        fixed_points[n] = theory.critical_radius(descriptor, n, config.mc_draws, rng)
    return rows, fixed_points


def write_theory(rows, fixed_points, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "complexity.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "radius", "complexity", "std_error"])
        for n, t, value, se in rows:
            writer.writerow([n, repr(float(t)), repr(float(value)), repr(float(se))])
    with open(os.path.join(out_dir, "fixed_points.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "critical_radius"])
        for n, r in sorted(fixed_points.items()):
            writer.writerow([n, repr(float(r))])
