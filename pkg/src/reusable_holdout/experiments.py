"""Synthetic variable-selection study: standard holdout vs. Thresholdout.

Features are generated column by column from per-column seeds, so the full
``2n x d`` matrix never has to exist in memory; only the columns that end up
in a classifier are materialized.
"""

import concurrent.futures
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from reusable_holdout.errors import InvalidParameterError
from reusable_holdout.mechanisms import BOTTOM, Thresholdout, ThresholdoutConfig
from reusable_holdout.noise import NoiseKind, NoiseSource
from reusable_holdout.queries import StatisticalQuery
from reusable_holdout.seeding import derive_seed, make_rng

SERIES = ("train", "holdout_reported", "fresh", "holdout_true")

#: correlation queries x_j * y are clipped to [-C, C] before rescaling to [0, 1]
DEFAULT_CLIP = 4.0

THREADS_ENV = "ADAPTIVE_HOLDOUT_THREADS"


@dataclass(frozen=True)
class SignalSpec:
    """Either pure noise (``count == 0``) or ``count`` columns drawn from N(y * bias, 1)."""

    count: int = 0
    bias: float = 0.0

    @classmethod
    def parse(cls, text):
        """Parse ``none`` or ``biased:COUNT:BIAS``."""
        text = text.strip().lower()
        if text == "none":
            return cls()
        parts = text.split(":")
        if len(parts) == 3 and parts[0] == "biased":
            try:
                return cls(int(parts[1]), float(parts[2]))
            except ValueError:
                pass
        raise InvalidParameterError(f"signal must be 'none' or 'biased:COUNT:BIAS', got {text!r}")

    def __str__(self):
        return "none" if self.count == 0 else f"biased:{self.count}:{self.bias!r}"


class LabeledDataset:
    """``n`` labelled examples with ``d`` real features, stored by column.

    Columns come either from an in-memory ``(n, d)`` array or from a
    ``column_fn(j)`` that regenerates column ``j`` on demand. The most
    recently produced column is cached, so row views taken with
    :meth:`take` share one generation of each column when read in step.
    """

    def __init__(self, labels, features=None, column_fn=None, d=None):
        self.labels = np.asarray(labels, dtype=np.int64)
        if not np.isin(self.labels, (-1, 1)).all():
            raise InvalidParameterError("labels must be -1 or +1")
        if features is not None:
            features = np.asarray(features, dtype=float)
            if features.shape[0] != len(self.labels):
                raise InvalidParameterError("features and labels disagree on n")
            d = features.shape[1]
        elif column_fn is None or d is None:
            raise InvalidParameterError("need either features or column_fn and d")
        self._features = features
        self._column_fn = column_fn
        self.d = int(d)
        self._cached = (None, None)

    @property
    def n(self):
        return len(self.labels)

    def __len__(self):
        return self.n

    def column(self, j):
        if self._features is not None:
            return self._features[:, j]
        if self._cached[0] != j:
            self._cached = (j, self._column_fn(j))
        return self._cached[1]

    def columns(self, indices):
        indices = list(indices)
        out = np.empty((self.n, len(indices)))
        for pos, j in enumerate(indices):
            out[:, pos] = self.column(j)
        return out

    def materialize(self):
        return self.columns(range(self.d))

    def take(self, rows):
        """Row subset as a new dataset that reads through to this one."""
        rows = np.asarray(rows, dtype=np.int64)
        return LabeledDataset(self.labels[rows], column_fn=lambda j: self.column(j)[rows], d=self.d)

    def __iter__(self):
        features = self.materialize()
        for x, y in zip(features, self.labels):
            yield x, int(y)


def generate_dataset(n, d, signal=SignalSpec(), seed=0):
    """Random labels in {-1, +1}; column ``j`` seeded from ``(seed, j)``."""
    if n < 1 or d < 1:
        raise InvalidParameterError("n and d must be positive")
    if signal.count > d:
        raise InvalidParameterError("more signal columns than columns")
    labels = make_rng(seed, "labels").choice(np.array([-1, 1]), size=n)
    shift = signal.bias * labels

    def column_fn(j):
        col = make_rng(seed, "column", j).standard_normal(n)
        if j < signal.count:
            col += shift
        return col

    return LabeledDataset(labels, column_fn=column_fn, d=d)


def correlations(dataset):
    """Per-column normalized correlation ``(1/n) sum x_j y``."""
    y = dataset.labels.astype(float)
    return np.array([dataset.column(j) @ y for j in range(dataset.d)]) / dataset.n


def correlation_query(j, clip=DEFAULT_CLIP):
    """Column ``j``'s correlation with the label as a [0, 1]-valued query."""
    def func(data):
        if isinstance(data, LabeledDataset):
            return np.clip(data.column(j) * data.labels, -clip, clip) / (2 * clip) + 0.5
        x, y = data
        return min(max(x[j] * y, -clip), clip) / (2 * clip) + 0.5

    return StatisticalQuery(func, label=f"corr[{j}]", batched=True)


def correlation_from_query_mean(mean, clip=DEFAULT_CLIP):
    return (mean - 0.5) * 2 * clip


@dataclass
class ColumnStats:
    """Everything selection needs from one pass over the columns."""

    n_train: int
    train_corr: np.ndarray
    holdout_corr: np.ndarray
    train_query_mean: np.ndarray
    holdout_query_mean: np.ndarray


def column_stats(train, holdout, clip=DEFAULT_CLIP):
    if train.d != holdout.d:
        raise InvalidParameterError("train and holdout have different d")
    yt, yh = train.labels.astype(float), holdout.labels.astype(float)
    out = np.empty((4, train.d))
    for j in range(train.d):
        pt, ph = train.column(j) * yt, holdout.column(j) * yh
        out[:, j] = (pt.mean(), ph.mean(),
                     np.clip(pt, -clip, clip).mean(), np.clip(ph, -clip, clip).mean())
    scale = 1.0 / (2 * clip)
    return ColumnStats(train.n, out[0], out[1], out[2] * scale + 0.5, out[3] * scale + 0.5)


class StandardHoldout:
    """The holdout is consulted directly, as often as the analyst likes."""

    name = "standard"

    def holdout_correlations(self, stats):
        return stats.holdout_corr

    def report_accuracy(self, train_acc, holdout_acc):
        return holdout_acc


class ThresholdoutHoldout:
    """The holdout is reached only through a Thresholdout session.

    Every column's rescaled correlation is asked once; a ``BOTTOM`` answer
    becomes a zero correlation, which never passes the selection filter.
    """

    name = "thresholdout"

    def __init__(self, mechanism, clip=DEFAULT_CLIP):
        self.mechanism = mechanism
        self.clip = clip

    def holdout_correlations(self, stats):
        out = np.zeros(len(stats.train_corr))
        for j in range(len(out)):
            a = self.mechanism.answer_means(stats.train_query_mean[j], stats.holdout_query_mean[j])
            if a is not BOTTOM:
                out[j] = correlation_from_query_mean(a, self.clip)
        return out

    def report_accuracy(self, train_acc, holdout_acc):
        a = self.mechanism.answer_means(train_acc, holdout_acc)
        return math.nan if a is BOTTOM else a


@dataclass
class LinearSignClassifier:
    selected: List[int]
    signs: List[int]

    def __post_init__(self):
        if len(set(self.selected)) != len(self.selected):
            raise InvalidParameterError("selected attributes must be distinct")
        if len(self.selected) != len(self.signs):
            raise InvalidParameterError("one sign per selected attribute")

    def prefix(self, k):
        return LinearSignClassifier(self.selected[:k], self.signs[:k])


def rank_candidates(train_corr, holdout_corr, n):
    """Attributes passing the sign-agreement and magnitude filter, strongest first."""
    cut = 1.0 / math.sqrt(n)
    wt, wh = np.asarray(train_corr), np.asarray(holdout_corr)
    passing = np.flatnonzero((wt * wh > 0) & (np.abs(wt) >= cut) & (np.abs(wh) >= cut))
    return passing[np.argsort(-np.abs(wt[passing]), kind="stable")]


def select_variables(stats, validator, k):
    """Top-``k`` validated attributes by training correlation, with their signs.

    Returns fewer than ``k`` attributes when fewer pass validation.
    """
    if k < 0:
        raise InvalidParameterError("k must be non-negative")
    ranked = rank_candidates(stats.train_corr, validator.holdout_correlations(stats), stats.n_train)
    chosen = [int(j) for j in ranked[:k]]
    return LinearSignClassifier(chosen, [1 if stats.train_corr[j] > 0 else -1 for j in chosen])


def classify(classifier, x):
    total = sum(s * x[j] for j, s in zip(classifier.selected, classifier.signs))
    return -1 if total < 0 else 1


def predict(classifier, features):
    """Labels for rows of ``features`` (columns ordered as ``classifier.selected``)."""
    scores = np.asarray(features, dtype=float) @ np.asarray(classifier.signs, dtype=float)
    return np.where(scores < 0, -1, 1)


def accuracy(classifier, dataset, features=None):
    if dataset.n == 0:
        raise InvalidParameterError("accuracy on an empty dataset")
    if features is None:
        features = dataset.columns(classifier.selected)
    return float(np.mean(predict(classifier, features) == dataset.labels))


def accuracy_query(classifier):
    def func(data):
        if isinstance(data, LabeledDataset):
            return (predict(classifier, data.columns(classifier.selected)) == data.labels).astype(float)
        x, y = data
        return float(classify(classifier, x) == y)

    return StatisticalQuery(func, label="accuracy", batched=True)


@dataclass
class ExperimentConfig:
    n: int = 1000
    d: int = 1000
    k_values: Sequence[int] = (10, 50, 100, 200, 500)
    repetitions: int = 20
    signal: SignalSpec = SignalSpec()
    mechanism: str = "standard"
    threshold: float = 0.04
    tau_noise: float = 0.01
    budget: Optional[int] = None
    noise: NoiseKind = NoiseKind.GAUSSIAN
    seed: int = 0
    clip: float = DEFAULT_CLIP

    def __post_init__(self):
        self.k_values = tuple(int(k) for k in self.k_values)
        self.noise = NoiseKind.parse(self.noise)
        if self.n < 1 or self.d < 1:
            raise InvalidParameterError("n and d must be positive")
        if self.repetitions < 1:
            raise InvalidParameterError("repetitions must be >= 1")
        if not self.k_values or any(k < 0 or k > self.d for k in self.k_values):
            raise InvalidParameterError("every k must lie in [0, d]")
        if self.mechanism not in ("standard", "thresholdout"):
            raise InvalidParameterError(f"unknown mechanism {self.mechanism!r}")
        if not self.tau_noise >= 0:
            raise InvalidParameterError("tau_noise must be non-negative")
        if self.budget is not None and self.budget < 0:
            raise InvalidParameterError("budget must be non-negative")

    @property
    def sigma(self):
        """Mechanism noise rate; ``tau_noise`` is the spread of the comparison noise (4 sigma)."""
        return self.tau_noise / 4.0

    @property
    def effective_budget(self):
        return self.budget if self.budget is not None else math.ceil(math.sqrt(self.n))


@dataclass(frozen=True)
class SeriesSummary:
    mean: float
    std: float
    reps: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    raw: Dict[Tuple[int, str], np.ndarray] = field(default_factory=dict)

    def summary(self, k, series):
        values = self.raw[(k, series)]
        values = values[~np.isnan(values)]
        if len(values) == 0:
            return SeriesSummary(math.nan, math.nan, 0)
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        return SeriesSummary(float(np.mean(values)), std, len(values))

    def rows(self):
        for k in self.config.k_values:
            for series in SERIES:
                s = self.summary(k, series)
                yield k, series, s.mean, s.std, s.reps


def _one_repetition(cfg, rep):
    seed = derive_seed(cfg.seed, "repetition", rep)
    full = generate_dataset(2 * cfg.n, cfg.d, cfg.signal, derive_seed(seed, "data"))
    perm = make_rng(seed, "split").permutation(2 * cfg.n)
    train, holdout = full.take(perm[:cfg.n]), full.take(perm[cfg.n:])
    fresh = generate_dataset(cfg.n, cfg.d, cfg.signal, derive_seed(seed, "fresh"))

    if cfg.mechanism == "thresholdout":
        noise = NoiseSource(cfg.noise, derive_seed(seed, "thresholdout"))
        mech = Thresholdout(ThresholdoutConfig(cfg.threshold, cfg.sigma,
                                               cfg.effective_budget, noise))
        validator = ThresholdoutHoldout(mech, cfg.clip)
    else:
        validator = StandardHoldout()

    stats = column_stats(train, holdout, cfg.clip)
    full_clf = select_variables(stats, validator, max(cfg.k_values))
    feats = {name: data.columns(full_clf.selected)
             for name, data in (("train", train), ("holdout", holdout), ("fresh", fresh))}

    out = {}
    for k in cfg.k_values:
        clf = full_clf.prefix(k)
        kk = len(clf.selected)
        train_acc = accuracy(clf, train, feats["train"][:, :kk])
        holdout_acc = accuracy(clf, holdout, feats["holdout"][:, :kk])
        out[k] = {
            "train": train_acc,
            "holdout_reported": validator.report_accuracy(train_acc, holdout_acc),
            "fresh": accuracy(clf, fresh, feats["fresh"][:, :kk]),
            "holdout_true": holdout_acc,
        }
    return out


def worker_count():
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        requested = int(raw)
    except ValueError:
        raise InvalidParameterError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return requested if requested > 0 else (os.cpu_count() or 1)


def run_experiment(cfg, workers=None):
    """Run all repetitions; the result does not depend on ``workers``."""
    workers = min(workers or worker_count(), cfg.repetitions)
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(workers) as pool:
            per_rep = list(pool.map(lambda r: _one_repetition(cfg, r), range(cfg.repetitions)))
    else:
        per_rep = [_one_repetition(cfg, r) for r in range(cfg.repetitions)]
    result = ExperimentResult(cfg)
    for k in cfg.k_values:
        for series in SERIES:
            result.raw[(k, series)] = np.array([rep[k][series] for rep in per_rep])
    return result
