"""Multinomial logistic regression with L2 regularization and Top-k ranking.

The objective is (1/(2C))*||W||^2 + sum_i crossentropy(softmax(W x_i + b), y_i),
minimized with a batch L-BFGS driver from zero initialization; the bias is
not regularized. Loss and gradient are computed by the kernel backend in a
single fused pass over the CSR rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .features import CsrMatrix, SparseVector


@dataclass(frozen=True)
class LogRegConfig:
    inverse_reg_C: float = 1.0
    max_iter: int = 1000
    tol: float = 1e-6
    optimizer: str = "quasi-newton-batch"

    def __post_init__(self):
        if self.inverse_reg_C <= 0:
            raise ValueError("inverse_reg_C must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.optimizer != "quasi-newton-batch":
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class LinearClassifier:
    """Trained multinomial model: (num_classes x num_features) weights + bias."""

    def __init__(self, weights: np.ndarray, bias: np.ndarray, class_labels: Sequence[str]):
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weights.ndim != 2 or weights.shape[0] != len(bias):
            raise ValueError("weights must be (num_classes, num_features)")
        if len(class_labels) != weights.shape[0]:
            raise ValueError("class_labels must match num_classes")
        if weights.shape[0] < 2:
            raise ValueError("need at least 2 classes")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise ValueError("non-finite parameters")
        self.weights = weights
        self.bias = bias
        self.class_labels = tuple(class_labels)
        # kernel layout: features x classes, C-contiguous
        self._weights_t = np.ascontiguousarray(weights.T)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def num_features(self) -> int:
        return self.weights.shape[1]

    def save(self, path: str | Path) -> None:
        np.savez(
            path,
            format="LOGREG1",
            weights=self.weights,
            bias=self.bias,
            class_labels=np.array(self.class_labels, dtype=str),
        )

    @classmethod
    def load(cls, path: str | Path) -> "LinearClassifier":
        with np.load(path, allow_pickle=False) as npz:
            if str(npz["format"]) != "LOGREG1":
                raise ValueError("not a classifier model file")
            return cls(npz["weights"], npz["bias"], [str(c) for c in npz["class_labels"]])


def _as_csr(X, n_features: int | None) -> CsrMatrix:
    if isinstance(X, CsrMatrix):
        return X
    if isinstance(X, np.ndarray):
        return CsrMatrix.from_dense(X)
    vectors = list(X)
    if n_features is None:
        n_features = max((int(v.indices[-1]) + 1 for v in vectors if v.nnz), default=0)
    return CsrMatrix.from_vectors(vectors, n_features)


def logreg_objective(
    theta: np.ndarray, X: CsrMatrix, y: np.ndarray, n_classes: int, inverse_reg_C: float
) -> tuple[float, np.ndarray]:
    """Objective value and gradient at flat parameters [W^T.ravel(), bias]."""
    n_features = X.n_cols
    wt = theta[: n_features * n_classes].reshape(n_features, n_classes)
    bias = theta[n_features * n_classes :]
    loss, grad_wt, grad_b = kernels.logreg_loss_grad(
        X.indptr, X.indices, X.data, y, np.ascontiguousarray(wt), bias
    )
    loss += 0.5 / inverse_reg_C * float(np.sum(wt * wt))
    grad_wt += wt / inverse_reg_C
    return loss, np.concatenate([grad_wt.ravel(), grad_b])


def train_logreg(
    X,
    y: Sequence[int],
    config: LogRegConfig | None = None,
    n_features: int | None = None,
    n_classes: int | None = None,
    class_labels: Sequence[str] | None = None,
    record_history: bool = False,
):
    """Train the classifier; deterministic for fixed inputs (zero init).

    ``X`` may be a CsrMatrix, a dense (n, d) array, or a list of
    SparseVector (pass n_features for the latter). Returns the classifier,
    or (classifier, per-iteration objective history) with record_history.
    """
    if config is None:
        config = LogRegConfig()
    y = np.ascontiguousarray(y, dtype=np.int64)
    csr = _as_csr(X, n_features)
    if csr.n_rows != len(y) or csr.n_rows < 2:
        raise ValueError("need len(X) == len(y) >= 2")
    if not np.all(np.isfinite(csr.data)):
        raise ValueError("non-finite feature values")
    observed = int(y.max()) + 1 if len(y) else 0
    if n_classes is None:
        n_classes = observed
    if n_classes < observed:
        raise ValueError("n_classes smaller than the largest label")
    if len(np.unique(y)) < 2:
        raise ValueError("training requires at least 2 distinct classes")
    if class_labels is None:
        class_labels = [str(c) for c in range(n_classes)]

    d = csr.n_cols
    theta0 = np.zeros(d * n_classes + n_classes)
    history: list[float] = []

    def fun(theta):
        return logreg_objective(theta, csr, y, n_classes, config.inverse_reg_C)

    callback = None
    if record_history:
        history.append(fun(theta0)[0])

        def callback(theta):
            history.append(fun(theta)[0])

    result = minimize(
        fun,
        theta0,
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options={
            "maxiter": config.max_iter,
            "gtol": config.tol,
            "ftol": 1e3 * np.finfo(float).eps,
        },
    )
    wt = result.x[: d * n_classes].reshape(d, n_classes)
    bias = result.x[d * n_classes :]
    clf = LinearClassifier(wt.T.copy(), bias.copy(), class_labels)
    if record_history:
        return clf, history
    return clf


def predict_scores(clf: LinearClassifier, x) -> np.ndarray:
    """Per-class softmax probabilities for one feature vector."""
    if isinstance(x, SparseVector):
        if x.nnz and int(x.indices[-1]) >= clf.num_features:
            raise ValueError("feature index exceeds classifier dimension")
        scores = clf.bias + (
            clf._weights_t[x.indices].T @ x.values if x.nnz else 0.0
        )
    else:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (clf.num_features,):
            raise ValueError(
                f"feature dimension {x.shape} does not match ({clf.num_features},)"
            )
        scores = clf.weights @ x + clf.bias
    scores = scores - scores.max()
    np.exp(scores, out=scores)
    scores /= scores.sum()
    return scores


def predict_proba_batch(clf: LinearClassifier, X) -> np.ndarray:
    """Softmax probabilities for every row of a CsrMatrix or dense array."""
    csr = _as_csr(X, clf.num_features)
    if csr.n_cols != clf.num_features:
        raise ValueError("feature dimension mismatch")
    return kernels.predict_proba(
        csr.indptr, csr.indices, csr.data, csr.n_rows, clf._weights_t, clf.bias
    )


def rank_top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k highest scores, descending; ties to the lower index."""
    scores = np.asarray(scores)
    if not 1 <= k <= len(scores):
        raise ValueError(f"k={k} out of range for {len(scores)} classes")
    return np.argsort(-scores, kind="stable")[:k]


def rank_all_batch(probs: np.ndarray) -> np.ndarray:
    """Full per-row rankings (stable, so ties go to the lower class index)."""
    return np.argsort(-probs, axis=1, kind="stable")
