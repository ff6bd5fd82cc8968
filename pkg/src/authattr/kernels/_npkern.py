"""Numpy/scipy fallback implementations of the hot numeric kernels.

Semantics are identical to the compiled versions in ``_ckernels.pyx``;
only the execution strategy differs (vectorized numpy/scipy here, fused
C loops there). All kernels take raw CSR arrays (int64 indptr/indices,
float64 data) so both backends share one calling convention.
"""

import numpy as np
import scipy.sparse as sp

BACKEND_NAME = "numpy"


def _as_csr(indptr, indices, data, n_rows, n_cols):
    return sp.csr_matrix((data, indices, indptr), shape=(n_rows, n_cols), copy=False)


def csr_dense_matmul(indptr, indices, data, n_rows, dense):
    """(n_rows x D sparse) @ (D x K dense) -> (n_rows x K) float64."""
    mat = _as_csr(indptr, indices, data, n_rows, dense.shape[0])
    return np.ascontiguousarray(mat @ dense)


def csr_t_dense_matmul(indptr, indices, data, n_cols, rows):
    """(n_rows x D sparse)^T @ (n_rows x K dense) -> (D x K) float64."""
    n_rows = rows.shape[0]
    mat = _as_csr(indptr, indices, data, n_rows, n_cols)
    return np.ascontiguousarray(mat.T @ rows)


def _row_softmax(scores):
    shifted = scores - scores.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return shifted


def predict_proba(indptr, indices, data, n_rows, weights_t, bias):
    """Softmax probabilities for CSR rows under (D x C) weights + (C,) bias."""
    scores = csr_dense_matmul(indptr, indices, data, n_rows, weights_t)
    scores += bias
    return _row_softmax(scores)


def logreg_loss_grad(indptr, indices, data, y, weights_t, bias):
    """Data term of the softmax cross-entropy objective and its gradient.

    Returns (loss, grad_weights_t (D x C), grad_bias (C,)); the caller adds
    the regularization term. Loss is summed (not averaged) over rows.
    """
    n_rows = len(indptr) - 1
    scores = csr_dense_matmul(indptr, indices, data, n_rows, weights_t)
    scores += bias
    shift = scores.max(axis=1)
    scores -= shift[:, None]
    exp_scores = np.exp(scores)
    denom = exp_scores.sum(axis=1)
    rows = np.arange(n_rows)
    loss = float(np.sum(np.log(denom) - scores[rows, y]))
    probs = exp_scores / denom[:, None]
    probs[rows, y] -= 1.0
    grad_wt = csr_t_dense_matmul(indptr, indices, data, weights_t.shape[0], probs)
    grad_b = probs.sum(axis=0)
    return loss, grad_wt, grad_b


def knn_topk(train, queries, pool):
    """Exact top-``pool`` neighbors by cosine distance, per query row.

    Inputs are unit-norm row matrices. Returns (dist, idx), each
    (n_queries x pool), ordered by (distance, train index) ascending.
    """
    n_train = train.shape[0]
    pool = min(pool, n_train)
    dist = 1.0 - queries @ train.T
    order = np.argsort(dist, axis=1, kind="stable")[:, :pool]
    top_dist = np.take_along_axis(dist, order, axis=1)
    return top_dist, order.astype(np.int64)
