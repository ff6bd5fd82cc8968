"""Stratified cross-validation, attribution metrics, and timing.

All methods are evaluated through the same loop: features and models are
fitted per fold on the training split only, rankings are produced for the
held-out fold, and Accuracy / Macro-F1 / Top-k plus wall-clock train and
inference seconds are recorded. Aggregates report the mean and population
standard deviation (n-fold divisor) over completed folds.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .corpus import Corpus, Review


@dataclass
class FoldPlan:
    n_folds: int
    seed: int
    assignments: np.ndarray  # review position -> fold index

    def folds(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(train_indices, test_indices) per fold, in fold order."""
        out = []
        for f in range(self.n_folds):
            test = np.flatnonzero(self.assignments == f)
            train = np.flatnonzero(self.assignments != f)
            out.append((train, test))
        return out


def stratified_kfold(labels: Sequence[int], n_folds: int = 5, seed: int = 42) -> FoldPlan:
    """Stratified fold assignment: per class, seeded shuffle then round-robin.

    Classes are processed in sorted order against a single seeded RNG
    stream, so assignments are deterministic. Every class must have at
    least n_folds samples.
    """
    y = np.asarray(labels)
    if n_folds < 2:
        raise ValueError("n_folds must be >= 2")
    rng = np.random.default_rng(seed)
    assignments = np.full(len(y), -1, dtype=np.int64)
    for cls in np.unique(y):
        positions = np.flatnonzero(y == cls)
        if len(positions) < n_folds:
            raise ValueError(
                f"class {cls} has {len(positions)} samples, fewer than {n_folds} folds"
            )
        perm = rng.permutation(len(positions))
        for i, p in enumerate(perm):
            assignments[positions[p]] = i % n_folds
    return FoldPlan(n_folds, seed, assignments)


def macro_f1(y_true: Sequence[int], y_pred: Sequence[int]) -> float:
    """Unweighted mean of per-class F1 over the classes present in y_true."""
    yt = np.asarray(y_true)
    yp = np.asarray(y_pred)
    if yt.shape != yp.shape:
        raise ValueError("y_true and y_pred must have equal length")
    scores = []
    for cls in np.unique(yt):
        tp = int(np.sum((yp == cls) & (yt == cls)))
        fp = int(np.sum((yp == cls) & (yt != cls)))
        fn = int(np.sum((yp != cls) & (yt == cls)))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def top_k_accuracy(y_true: Sequence[int], rankings, k: int) -> float:
    """Fraction of samples whose true class is in the first k ranked entries."""
    yt = np.asarray(y_true)
    if isinstance(rankings, np.ndarray) and rankings.ndim == 2:
        if rankings.shape[1] < k:
            raise ValueError(f"rankings have {rankings.shape[1]} entries, need k={k}")
        return float(np.mean(np.any(rankings[:, :k] == yt[:, None], axis=1)))
    hits = 0
    for truth, ranking in zip(yt, rankings, strict=True):
        if len(ranking) < k:
            raise ValueError(f"ranking has {len(ranking)} entries, need k={k}")
        hits += int(truth) in [int(c) for c in ranking[:k]]
    return hits / len(yt)


class Method(Protocol):
    """A trainable attribution method evaluated by run_cv."""

    name: str

    def fit(self, reviews: Sequence[Review], labels: np.ndarray, n_classes: int) -> None: ...

    def rank(self, reviews: Sequence[Review]) -> np.ndarray:
        """Per-review ranked class indices, at least max(top_k) columns."""
        ...


@dataclass
class FoldMetrics:
    fold: int
    accuracy: float = float("nan")
    macro_f1: float = float("nan")
    top_k: dict[int, float] = field(default_factory=dict)
    train_seconds: float = 0.0
    infer_seconds: float = 0.0
    failed: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        out = {
            "fold": self.fold,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "top1": self.accuracy,
            "train_seconds": self.train_seconds,
            "infer_seconds": self.infer_seconds,
            "failed": self.failed,
        }
        for k, v in sorted(self.top_k.items()):
            out[f"top{k}"] = v
        if self.error:
            out["error"] = self.error
        return out


def _population_sd(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean((values - values.mean()) ** 2)))


@dataclass
class EvalReport:
    per_fold: list[FoldMetrics]
    top_k_set: tuple[int, ...] = (3, 5, 10)

    @property
    def completed(self) -> list[FoldMetrics]:
        return [f for f in self.per_fold if not f.failed]

    @property
    def failed_folds(self) -> int:
        return sum(1 for f in self.per_fold if f.failed)

    def _agg(self, getter) -> np.ndarray:
        return np.array([getter(f) for f in self.completed], dtype=np.float64)

    def to_dict(self) -> dict:
        acc = self._agg(lambda f: f.accuracy)
        mf1 = self._agg(lambda f: f.macro_f1)
        out = {
            "accuracy_mean": float(acc.mean()) if len(acc) else float("nan"),
            "accuracy_sd": _population_sd(acc) if len(acc) else float("nan"),
            "macro_f1_mean": float(mf1.mean()) if len(mf1) else float("nan"),
            "macro_f1_sd": _population_sd(mf1) if len(mf1) else float("nan"),
        }
        for k in self.top_k_set:
            vals = self._agg(lambda f, kk=k: f.top_k[kk])
            out[f"top{k}_mean"] = float(vals.mean()) if len(vals) else float("nan")
        tr = self._agg(lambda f: f.train_seconds)
        inf = self._agg(lambda f: f.infer_seconds)
        out["train_seconds_mean"] = float(tr.mean()) if len(tr) else float("nan")
        out["infer_seconds_mean"] = float(inf.mean()) if len(inf) else float("nan")
        out["failed_folds"] = self.failed_folds
        out["per_fold"] = [f.to_dict() for f in self.per_fold]
        return out


def corpus_labels(corpus: Corpus) -> tuple[np.ndarray, list[str]]:
    """Integer labels per review with class labels sorted lexicographically."""
    class_labels = sorted(corpus.author_index)
    lut = {a: i for i, a in enumerate(class_labels)}
    y = np.array([lut[r.author_id] for r in corpus.reviews], dtype=np.int64)
    return y, class_labels


def run_cv(
    method: Method,
    corpus: Corpus,
    plan: FoldPlan,
    top_k_set: tuple[int, ...] = (3, 5, 10),
) -> EvalReport:
    """Cross-validate a method over a fold plan.

    Feature extractors are fitted inside ``method.fit`` on the training
    split only; a fold whose fit or ranking raises is recorded as failed
    and excluded from the aggregates. Top-k is computed at
    min(k, num_classes) so small candidate sets stay well-defined.
    """
    y, class_labels = corpus_labels(corpus)
    if len(y) != len(plan.assignments):
        raise ValueError("fold plan does not match corpus size")
    n_classes = len(class_labels)
    reviews = corpus.reviews
    fold_metrics = []
    for fold_id, (train_idx, test_idx) in enumerate(plan.folds()):
        fm = FoldMetrics(fold=fold_id)
        try:
            train_reviews = [reviews[i] for i in train_idx]
            test_reviews = [reviews[i] for i in test_idx]
            t0 = time.perf_counter()
            method.fit(train_reviews, y[train_idx], n_classes)
            fm.train_seconds = time.perf_counter() - t0
            t0 = time.perf_counter()
            rankings = np.asarray(method.rank(test_reviews))
            fm.infer_seconds = time.perf_counter() - t0
            y_test = y[test_idx]
            preds = rankings[:, 0]
            fm.accuracy = float(np.mean(preds == y_test))
            fm.macro_f1 = macro_f1(y_test, preds)
            for k in top_k_set:
                fm.top_k[k] = top_k_accuracy(y_test, rankings, min(k, n_classes))
        except Exception as exc:  # noqa: BLE001 - failed folds are recorded
            fm.failed = True
            fm.error = f"{type(exc).__name__}: {exc}"
        fold_metrics.append(fm)
    return EvalReport(fold_metrics, tuple(top_k_set))
