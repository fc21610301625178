"""Cross-validation, confusion counts and diagnosis metrics.

Positive class is HEALTHY: a true positive is a healthy speaker classified
as healthy, a true negative a PD speaker classified as PD.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import nn
from .weighting import HEALTHY, PD

METRIC_NAMES = ("accuracy", "sensitivity", "specificity", "mcc", "pe")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )


@dataclass
class MetricsReport:
    accuracy: float
    sensitivity: float
    specificity: float
    mcc: float
    pe: float
    counts: ConfusionCounts
    coefficients_used: tuple[int, ...] = ()
    folds: list["MetricsReport"] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    mode: str = "single"

    def fold_average(self) -> dict[str, float]:
        if not self.folds:
            return {}
        return {name: float(np.mean([getattr(f, name) for f in self.folds])) for name in METRIC_NAMES}

    def as_record(self) -> dict:
        """Flat key -> value mapping, one metric per key."""
        rec = {name: getattr(self, name) for name in METRIC_NAMES}
        rec.update(tp=self.counts.tp, tn=self.counts.tn, fp=self.counts.fp, fn=self.counts.fn)
        rec["n"] = self.counts.total
        rec["mode"] = self.mode
        rec["coefficients"] = " ".join(str(c) for c in self.coefficients_used)
        rec["n_folds"] = len(self.folds)
        for name, value in self.fold_average().items():
            rec[f"fold_mean_{name}"] = value
        rec["flags"] = "; ".join(self.flags)
        return rec


@dataclass
class FoldPlan:
    k: int
    assignments: np.ndarray  # sample index -> fold id
    seed: int
    stratified: bool = False

    @property
    def n(self) -> int:
        return int(self.assignments.size)

    @property
    def leave_one_out(self) -> bool:
        return self.k == self.n

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def sizes(self) -> list[int]:
        return np.bincount(self.assignments, minlength=self.k).tolist()


def make_folds(n: int, k: int, seed: int = 0, stratify_labels: Sequence | None = None) -> FoldPlan:
    """Shuffle and deal samples round-robin into k folds.

    With labels, samples are dealt class by class so every fold's class
    counts are within one of each other.
    """
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    if stratify_labels is not None and k < n:
        labels = np.asarray(stratify_labels)
        if labels.shape != (n,):
            raise ValueError("need one stratification label per sample")
        order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in sorted(set(labels.tolist()))])
        stratified = True
    else:
        order = rng.permutation(n)
        stratified = False
    assignments = np.empty(n, dtype=np.int64)
    assignments[order] = np.arange(n) % k
    return FoldPlan(k, assignments, seed, stratified)


def confusion(truth: Sequence[str], predicted: Sequence[str]) -> ConfusionCounts:
    if len(truth) != len(predicted):
        raise ValueError(f"{len(truth)} true labels but {len(predicted)} predictions")
    tp = tn = fp = fn = 0
    for t, p in zip(truth, predicted):
        if t not in (HEALTHY, PD) or p not in (HEALTHY, PD):
            raise ValueError(f"labels must be {HEALTHY} or {PD}, got {t!r} / {p!r}")
        if t == HEALTHY:
            tp, fn = (tp + 1, fn) if p == HEALTHY else (tp, fn + 1)
        else:
            tn, fp = (tn + 1, fp) if p == PD else (tn, fp + 1)
    return ConfusionCounts(tp, tn, fp, fn)


def _ratio(num: float, den: float, name: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(f"{name} undefined (zero denominator), reported as 0")
        return 0.0
    return num / den


def metrics(c: ConfusionCounts, **extra) -> MetricsReport:
    if c.total == 0:
        raise ValueError("cannot compute metrics from empty confusion counts")
    flags: list[str] = list(extra.pop("flags", []))
    tp, tn, fp, fn = c.tp, c.tn, c.fp, c.fn
    cross = tp * tn - fn * fp
    accuracy = (tp + tn) / c.total
    sensitivity = _ratio(tp, tp + fn, "sensitivity", flags)
    specificity = _ratio(tn, tn + fp, "specificity", flags)
    mcc = _ratio(cross, math.sqrt((fn + tp) * (fp + tn) * (fp + tp) * (fn + tn)), "mcc", flags)
    pe = _ratio(cross, (fn + tp) * (fp + tn), "pe", flags)
    return MetricsReport(accuracy, sensitivity, specificity, mcc, pe, c, flags=flags, **extra)


def counts_from_rates(sensitivity: float, specificity: float, healthy: int, pd: int) -> ConfusionCounts:
    """Confusion counts implied by sensitivity and specificity for given group sizes."""
    tp = int(round(sensitivity * healthy))
    tn = int(round(specificity * pd))
    return ConfusionCounts(tp, tn, pd - tn, healthy - tp)


def unpack(dataset):
    """(X, labels) from a sequence of voiceprints or an (X, labels) pair."""
    if isinstance(dataset, tuple) and len(dataset) == 2:
        X, labels = dataset
        return np.atleast_2d(np.asarray(X, dtype=np.float64)), list(labels)
    X = np.vstack([vp.values for vp in dataset])
    return X, [vp.label for vp in dataset]


def select_columns(X: np.ndarray, coefficients: Sequence[int] | None) -> np.ndarray:
    """Keep the given 1-based voiceprint columns."""
    if coefficients is None:
        return X
    if len(coefficients) == 0:
        raise ValueError("coefficient subset is empty")
    idx = np.asarray(coefficients, dtype=int) - 1
    if idx.min() < 0 or idx.max() >= X.shape[1]:
        raise ValueError(f"coefficient subset {tuple(coefficients)} outside 1..{X.shape[1]}")
    return X[:, idx]


def fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def _run_fold(args):
    fold, X, labels, cfg, train_idx, test_idx = args
    train_labels = [labels[i] for i in train_idx]
    flags = []
    if len(set(train_labels)) < 2:
        flags.append(f"fold {fold}: training data holds a single class")
    net, _ = nn.fit(X[train_idx], train_labels, replace(cfg, seed=fold_seed(cfg.seed, fold)))
    scores = nn.predict_scores(net, X[test_idx])
    predicted = [HEALTHY if s >= 0.5 else PD for s in scores]
    return confusion([labels[i] for i in test_idx], predicted), flags


def run_cross_validation(dataset, cfg: nn.TrainConfig, plan: FoldPlan,
                         coefficients: Sequence[int] | None = None, workers: int = 1) -> MetricsReport:
    """Train on k-1 folds, predict the held-out fold, pool every prediction.

    The top-level metrics come from the pooled confusion counts; per-fold
    reports are kept in ``folds`` (merged in fold order).
    """
    X, labels = unpack(dataset)
    if X.shape[0] != plan.n:
        raise ValueError(f"fold plan covers {plan.n} samples, dataset has {X.shape[0]}")
    X = select_columns(X, coefficients)
    jobs = [(f, X, labels, cfg, plan.train_indices(f), plan.test_indices(f)) for f in range(plan.k)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_fold, jobs))
    else:
        results = [_run_fold(job) for job in jobs]
    pooled = ConfusionCounts()
    folds, flags = [], []
    for counts, fold_flags in results:
        pooled = pooled + counts
        flags.extend(fold_flags)
        folds.append(metrics(counts))
    used = tuple(coefficients) if coefficients is not None else tuple(range(1, X.shape[1] + 1))
    mode = "leave-one-out" if plan.leave_one_out else f"{plan.k}-fold"
    return metrics(pooled, coefficients_used=used, folds=folds, flags=flags, mode=mode)


def run_holdout_test(model, test_set, cfg: nn.TrainConfig | None = None,
                     coefficients: Sequence[int] | None = None) -> MetricsReport:
    """Score a held-out set with a trained network, or first train one on ``model``.

    ``model`` is either a :class:`nn.Network` or a training dataset. For a
    single-class test set only the accuracy is meaningful.
    """
    X_test, test_labels = unpack(test_set)
    if X_test.shape[0] == 0:
        raise ValueError("test set is empty")
    X_test = select_columns(X_test, coefficients)
    if isinstance(model, nn.Network):
        net = model
    else:
        X_train, train_labels = unpack(model)
        net, _ = nn.fit(select_columns(X_train, coefficients), train_labels, cfg or nn.TrainConfig())
    scores = nn.predict_scores(net, X_test)
    predicted = [HEALTHY if s >= 0.5 else PD for s in scores]
    counts = confusion(test_labels, predicted)
    flags = []
    if len(set(test_labels)) < 2:
        flags.append("single-class test set: only accuracy is meaningful")
    used = tuple(coefficients) if coefficients is not None else tuple(range(1, X_test.shape[1] + 1))
    return metrics(counts, coefficients_used=used, flags=flags, mode="holdout")


def rank_key(subset: Sequence[int], report: MetricsReport):
    return (-report.accuracy, -report.mcc, len(subset), tuple(subset))


def coefficient_sweep(dataset, candidate_subsets, cfg: nn.TrainConfig, plan: FoldPlan,
                      workers: int = 1) -> list[tuple[tuple[int, ...], MetricsReport]]:
    """Cross-validate each coefficient subset; best first.

    Ties on accuracy go to higher MCC, then the smaller subset, then the
    lexicographically smaller index tuple.
    """
    results = []
    for subset in candidate_subsets:
        subset = tuple(int(c) for c in subset)
        if not subset:
            raise ValueError("coefficient subset is empty")
        results.append((subset, run_cross_validation(dataset, cfg, plan, subset, workers=workers)))
    return sorted(results, key=lambda item: rank_key(*item))
