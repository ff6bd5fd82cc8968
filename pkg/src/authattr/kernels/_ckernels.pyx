# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the hot inner loops.

Fused single-pass variants of the operations in ``_npkern``: the logistic
regression gradient walks the CSR matrix once per row without materializing
score/probability matrices, and the kNN search keeps a running top-pool
selection instead of sorting full distance rows.
"""

import numpy as np

cimport numpy as cnp

cdef extern from "math.h":
    double exp(double x) nogil
    double log(double x) nogil

cnp.import_array()

BACKEND_NAME = "cython"


def csr_dense_matmul(cnp.int64_t[::1] indptr,
                     cnp.int64_t[::1] indices,
                     cnp.float64_t[::1] data,
                     Py_ssize_t n_rows,
                     cnp.float64_t[:, ::1] dense):
    cdef Py_ssize_t n_out = dense.shape[1]
    out_arr = np.zeros((n_rows, n_out), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, p, c, j
    cdef cnp.float64_t v
    for i in range(n_rows):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            for c in range(n_out):
                out[i, c] += v * dense[j, c]
    return out_arr


def csr_t_dense_matmul(cnp.int64_t[::1] indptr,
                       cnp.int64_t[::1] indices,
                       cnp.float64_t[::1] data,
                       Py_ssize_t n_cols,
                       cnp.float64_t[:, ::1] rows):
    cdef Py_ssize_t n_rows = rows.shape[0]
    cdef Py_ssize_t n_out = rows.shape[1]
    out_arr = np.zeros((n_cols, n_out), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, p, c, j
    cdef cnp.float64_t v
    for i in range(n_rows):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            for c in range(n_out):
                out[j, c] += v * rows[i, c]
    return out_arr


def predict_proba(cnp.int64_t[::1] indptr,
                  cnp.int64_t[::1] indices,
                  cnp.float64_t[::1] data,
                  Py_ssize_t n_rows,
                  cnp.float64_t[:, ::1] weights_t,
                  cnp.float64_t[::1] bias):
    cdef Py_ssize_t n_classes = weights_t.shape[1]
    out_arr = np.empty((n_rows, n_classes), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] out = out_arr
    cdef Py_ssize_t i, p, c, j
    cdef cnp.float64_t v, mx, denom
    for i in range(n_rows):
        for c in range(n_classes):
            out[i, c] = bias[c]
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            for c in range(n_classes):
                out[i, c] += v * weights_t[j, c]
        mx = out[i, 0]
        for c in range(1, n_classes):
            if out[i, c] > mx:
                mx = out[i, c]
        denom = 0.0
        for c in range(n_classes):
            out[i, c] = exp(out[i, c] - mx)
            denom += out[i, c]
        for c in range(n_classes):
            out[i, c] /= denom
    return out_arr


def logreg_loss_grad(cnp.int64_t[::1] indptr,
                     cnp.int64_t[::1] indices,
                     cnp.float64_t[::1] data,
                     cnp.int64_t[::1] y,
                     cnp.float64_t[:, ::1] weights_t,
                     cnp.float64_t[::1] bias):
    cdef Py_ssize_t n_rows = len(indptr) - 1
    cdef Py_ssize_t n_feat = weights_t.shape[0]
    cdef Py_ssize_t n_classes = weights_t.shape[1]
    grad_wt_arr = np.zeros((n_feat, n_classes), dtype=np.float64)
    grad_b_arr = np.zeros(n_classes, dtype=np.float64)
    scores_arr = np.empty(n_classes, dtype=np.float64)
    cdef cnp.float64_t[:, ::1] grad_wt = grad_wt_arr
    cdef cnp.float64_t[::1] grad_b = grad_b_arr
    cdef cnp.float64_t[::1] scores = scores_arr
    cdef cnp.float64_t loss = 0.0
    cdef Py_ssize_t i, p, c, j
    cdef cnp.float64_t v, mx, denom
    for i in range(n_rows):
        for c in range(n_classes):
            scores[c] = bias[c]
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            for c in range(n_classes):
                scores[c] += v * weights_t[j, c]
        mx = scores[0]
        for c in range(1, n_classes):
            if scores[c] > mx:
                mx = scores[c]
        denom = 0.0
        for c in range(n_classes):
            scores[c] = exp(scores[c] - mx)
            denom += scores[c]
        # log-sum-exp minus true-class score; the max shift cancels
        loss += log(denom) - log(scores[y[i]])
        for c in range(n_classes):
            scores[c] /= denom
        scores[y[i]] -= 1.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            v = data[p]
            for c in range(n_classes):
                grad_wt[j, c] += v * scores[c]
        for c in range(n_classes):
            grad_b[c] += scores[c]
    return float(loss), grad_wt_arr, grad_b_arr


def knn_topk(cnp.float64_t[:, ::1] train,
             cnp.float64_t[:, ::1] queries,
             Py_ssize_t pool):
    """Exact top-``pool`` cosine-distance neighbors, (distance, index) ascending."""
    cdef Py_ssize_t n_train = train.shape[0]
    cdef Py_ssize_t n_q = queries.shape[0]
    cdef Py_ssize_t dim = train.shape[1]
    if pool > n_train:
        pool = n_train
    dist_arr = np.empty((n_q, pool), dtype=np.float64)
    idx_arr = np.empty((n_q, pool), dtype=np.int64)
    cdef cnp.float64_t[:, ::1] dist = dist_arr
    cdef cnp.int64_t[:, ::1] idx = idx_arr
    cdef Py_ssize_t q, t, d, filled, pos, m, s
    cdef cnp.float64_t acc, dval
    for q in range(n_q):
        filled = 0
        for t in range(n_train):
            acc = 0.0
            for d in range(dim):
                acc += queries[q, d] * train[t, d]
            dval = 1.0 - acc
            if filled == pool and dval >= dist[q, filled - 1]:
                continue
            # shift strictly-greater entries right so equal distances keep
            # the earlier (smaller) train index first
            pos = filled if filled < pool else pool - 1
            m = pos
            while m > 0 and dist[q, m - 1] > dval:
                m -= 1
            for s in range(pos, m, -1):
                dist[q, s] = dist[q, s - 1]
                idx[q, s] = idx[q, s - 1]
            dist[q, m] = dval
            idx[q, m] = t
            if filled < pool:
                filled += 1
    return dist_arr, idx_arr
