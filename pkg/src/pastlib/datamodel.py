"""Dataset containers shared by every other module.

A dataset is stored column-major as numpy arrays: standard covariates ``x``,
helper covariates ``w``, and responses ``y``.  Responses are plain floats
even for classification tasks so that probabilities and stochastic labels
flow through the same pipeline.  All containers are frozen after
construction and safe to share across parallel trials.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


class DatasetError(ValueError):
    pass


def _as_matrix(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DatasetError(f"{name} must be a 2-d array, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class LabeledTriple:
    x: np.ndarray
    w: np.ndarray
    y: float


@dataclass(frozen=True)
class UnlabeledPair:
    x: np.ndarray
    w: np.ndarray


@dataclass(frozen=True)
class HybridDataset:
    """Labeled rows (x, w, y) plus unlabeled rows (x, w)."""

    x_labeled: np.ndarray
    w_labeled: np.ndarray
    y_labeled: np.ndarray
    x_unlabeled: np.ndarray
    w_unlabeled: np.ndarray

    def __post_init__(self):
        xl = _as_matrix(self.x_labeled, "x_labeled")
        wl = _as_matrix(self.w_labeled, "w_labeled")
        yl = np.asarray(self.y_labeled, dtype=float).ravel()
        xu = _as_matrix(self.x_unlabeled, "x_unlabeled")
        wu = _as_matrix(self.w_unlabeled, "w_unlabeled")
        if xl.shape[0] < 1:
            raise DatasetError("need at least one labeled row")
        if not (xl.shape[0] == wl.shape[0] == yl.shape[0]):
            raise DatasetError("labeled row counts disagree")
        if xu.shape[0] != wu.shape[0]:
            raise DatasetError("unlabeled row counts disagree")
        if xu.shape[0] > 0 and (xu.shape[1] != xl.shape[1] or wu.shape[1] != wl.shape[1]):
            raise DatasetError("covariate dimensions differ between parts")
        if not np.all(np.isfinite(yl)):
            raise DatasetError("responses must be finite")
        for name, arr in (
            ("x_labeled", xl),
            ("w_labeled", wl),
            ("y_labeled", yl),
            ("x_unlabeled", xu),
            ("w_unlabeled", wu),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_labeled(self):
        return self.x_labeled.shape[0]

    @property
    def n_unlabeled(self):
        return self.x_unlabeled.shape[0]

    @property
    def n(self):
        return self.n_labeled + self.n_unlabeled

    @property
    def dim_x(self):
        return self.x_labeled.shape[1]

    @property
    def dim_w(self):
        return self.w_labeled.shape[1]

    def all_x(self):
        return np.vstack([self.x_labeled, self.x_unlabeled])

    def all_w(self):
        return np.vstack([self.w_labeled, self.w_unlabeled])


@dataclass(frozen=True)
class PseudoLabeledDataset:
    """Rows (x, y_tilde) plus a per-row true-label/pseudo-label flag."""

    x: np.ndarray
    y_tilde: np.ndarray
    is_true_label: np.ndarray = field(default=None)

    def __post_init__(self):
        x = _as_matrix(self.x, "x")
        y = np.asarray(self.y_tilde, dtype=float).ravel()
        if x.shape[0] != y.shape[0]:
            raise DatasetError("row counts disagree")
        flags = self.is_true_label
        if flags is None:
            flags = np.zeros(x.shape[0], dtype=bool)
        flags = np.asarray(flags, dtype=bool).ravel()
        if flags.shape[0] != x.shape[0]:
            raise DatasetError("provenance flag count disagrees")
        for name, arr in (("x", x), ("y_tilde", y), ("is_true_label", flags)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self):
        return self.x.shape[0]


def split_dataset(x, w, y, labeled_fraction, rng):
    """Keep labels on a round-half-up fraction of rows, chosen uniformly.

    Returns a HybridDataset; the complement drops its response.
    """
    x = _as_matrix(x, "x")
    w = _as_matrix(w, "w")
    y = np.asarray(y, dtype=float).ravel()
    n = x.shape[0]
    if n == 0:
        raise DatasetError("empty input")
    if not (0.0 < labeled_fraction <= 1.0):
        raise DatasetError(f"labeled_fraction must be in (0, 1], got {labeled_fraction}")
    n_labeled = int(np.floor(labeled_fraction * n + 0.5))
    n_labeled = max(1, min(n, n_labeled))
    keep = rng.choice(n, size=n_labeled, replace=False)
    keep_mask = np.zeros(n, dtype=bool)
    keep_mask[keep] = True
    return HybridDataset(
        x_labeled=x[keep_mask],
        w_labeled=w[keep_mask],
        y_labeled=y[keep_mask],
        x_unlabeled=x[~keep_mask],
        w_unlabeled=w[~keep_mask],
    )


def write_csv(dataset, path_or_file):
    """Emit the dataset as CSV; an empty y cell marks an unlabeled row."""
    dx, dw = dataset.dim_x, dataset.dim_w
    header = [f"x_{i}" for i in range(dx)] + [f"w_{i}" for i in range(dw)] + ["y"]
    own = isinstance(path_or_file, (str, bytes))
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n_labeled):
            writer.writerow(
                [repr(float(v)) for v in dataset.x_labeled[i]]
                + [repr(float(v)) for v in dataset.w_labeled[i]]
                + [repr(float(dataset.y_labeled[i]))]
            )
        for i in range(dataset.n_unlabeled):
            writer.writerow(
                [repr(float(v)) for v in dataset.x_unlabeled[i]]
                + [repr(float(v)) for v in dataset.w_unlabeled[i]]
                + [""]
            )
    finally:
        if own:
            fh.close()


def read_csv(path_or_file):
    """Read a dataset written by write_csv (header row mandatory)."""
    own = isinstance(path_or_file, (str, bytes))
    fh = open(path_or_file, "r", newline="", encoding="utf-8") if own else path_or_file
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetError("missing header row")
        dx = sum(1 for c in header if c.startswith("x_"))
        dw = sum(1 for c in header if c.startswith("w_"))
        if header != [f"x_{i}" for i in range(dx)] + [f"w_{i}" for i in range(dw)] + ["y"]:
            raise DatasetError(f"unexpected header: {header}")
        xl, wl, yl, xu, wu = [], [], [], [], []
        for row in reader:
            if not row:
                continue
            xv = [float(v) for v in row[:dx]]
            wv = [float(v) for v in row[dx : dx + dw]]
            ycell = row[dx + dw]
            if ycell == "":
                xu.append(xv)
                wu.append(wv)
            else:
                xl.append(xv)
                wl.append(wv)
                yl.append(float(ycell))
        return HybridDataset(
            x_labeled=np.array(xl, dtype=float).reshape(-1, dx),
            w_labeled=np.array(wl, dtype=float).reshape(-1, dw),
            y_labeled=np.array(yl, dtype=float),
            x_unlabeled=np.array(xu, dtype=float).reshape(-1, dx),
            w_unlabeled=np.array(wu, dtype=float).reshape(-1, dw),
        )
    finally:
        if own:
            fh.close()


def dataset_to_csv_string(dataset):
    buf = io.StringIO()
    write_csv(dataset, buf)
    return buf.getvalue()
