"""Batch-hard triplet metric learning and exact cosine kNN identification.

The embedder is a linear projection over the input features (TF-IDF vectors
or imported dense embeddings); embeddings are L2-normalized, distances in
the triplet loss are Euclidean on the unit sphere (monotone in cosine
distance), and training is plain SGD over author-balanced P x K batches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .features import CsrMatrix

_EPS = 1e-12


@dataclass(frozen=True)
class MetricConfig:
    embed_dim: int = 256
    margin: float = 0.2
    epochs: int = 10
    batch_authors: int = 8
    batch_per_author: int = 2
    learning_rate: float = 1e-3
    seed: int = 0
    knn_k: int = 3

    def __post_init__(self):
        if self.batch_authors < 2 or self.batch_per_author < 2:
            raise ValueError("batch-hard mining needs >= 2 authors and >= 2 samples each")
        if self.margin <= 0:
            raise ValueError("margin must be > 0")
        if self.embed_dim < 1 or self.epochs < 1 or self.knn_k < 1:
            raise ValueError("embed_dim, epochs and knn_k must be >= 1")


def batch_hard_triplet_loss(
    embeddings: np.ndarray, labels: Sequence[int], margin: float
) -> tuple[float, np.ndarray]:
    """Batch-hard triplet loss and its gradient w.r.t. the embeddings.

    Per anchor the hardest (farthest) positive and hardest (nearest)
    negative are mined inside the batch; loss is the mean hinge
    max(0, d_ap - d_an + margin) over all anchors.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels)
    if emb.ndim != 2 or len(y) != emb.shape[0]:
        raise ValueError("embeddings must be (batch, dim) matching labels")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise ValueError("batch must contain at least 2 distinct labels")
    if counts.min() < 2:
        raise ValueError("every label in the batch must appear at least twice")

    n = emb.shape[0]
    sq = np.sum(emb**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (emb @ emb.T)
    np.maximum(d2, 0.0, out=d2)
    dist = np.sqrt(d2)

    same = y[:, None] == y[None, :]
    pos_mask = same & ~np.eye(n, dtype=bool)
    neg_mask = ~same

    pos_d = np.where(pos_mask, dist, -1.0)
    hardest_pos = np.argmax(pos_d, axis=1)
    neg_d = np.where(neg_mask, dist, np.inf)
    hardest_neg = np.argmin(neg_d, axis=1)

    grad = np.zeros_like(emb)
    loss = 0.0
    inv_n = 1.0 / n
    for a in range(n):
        p = hardest_pos[a]
        q = hardest_neg[a]
        d_ap = dist[a, p]
        d_an = dist[a, q]
        hinge = d_ap - d_an + margin
        if hinge <= 0.0:
            continue
        loss += hinge * inv_n
        u_ap = (emb[a] - emb[p]) / max(d_ap, _EPS)
        u_an = (emb[a] - emb[q]) / max(d_an, _EPS)
        grad[a] += inv_n * (u_ap - u_an)
        grad[p] -= inv_n * u_ap
        grad[q] += inv_n * u_an
    return loss, grad


def _normalize_rows(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.sqrt(np.sum(v**2, axis=1))
    safe = np.maximum(norms, _EPS)
    return v / safe[:, None], safe


def _projection_loss_grad(
    proj_t: np.ndarray, batch: CsrMatrix, labels: np.ndarray, margin: float
) -> tuple[float, np.ndarray]:
    """Loss and per-row gradient w.r.t. the pre-normalization projections.

    Returns (loss, grad_v) where grad_v is (batch, embed_dim); the chain to
    the projection matrix is grad_proj_t = X_batch^T @ grad_v.
    """
    v = kernels.csr_dense_matmul(batch.indptr, batch.indices, batch.data, batch.n_rows, proj_t)
    unit, norms = _normalize_rows(v)
    loss, grad_u = batch_hard_triplet_loss(unit, labels, margin)
    # backprop through row normalization: dv = (du - (du . u) u) / ||v||
    inner = np.sum(grad_u * unit, axis=1, keepdims=True)
    grad_v = (grad_u - inner * unit) / norms[:, None]
    return loss, grad_v


class MetricEmbedder:
    """Linear projection producing unit-norm embeddings."""

    def __init__(self, projection: np.ndarray, config: MetricConfig):
        projection = np.asarray(projection, dtype=np.float64)
        if projection.ndim != 2:
            raise ValueError("projection must be (embed_dim, input_dim)")
        if not np.all(np.isfinite(projection)):
            raise ValueError("non-finite projection parameters")
        self.projection = projection
        self.config = config
        self._proj_t = np.ascontiguousarray(projection.T)
        self.loss_history: list[float] = []

    @property
    def input_dim(self) -> int:
        return self.projection.shape[1]

    def embed(self, X) -> np.ndarray:
        """Unit-norm embeddings for CsrMatrix / dense rows (zero rows stay zero)."""
        if isinstance(X, np.ndarray):
            X = CsrMatrix.from_dense(X)
        if X.n_cols != self.input_dim:
            raise ValueError("input dimension mismatch")
        v = kernels.csr_dense_matmul(X.indptr, X.indices, X.data, X.n_rows, self._proj_t)
        unit, _ = _normalize_rows(v)
        return unit

    def save(self, path: str | Path) -> None:
        cfg = self.config
        np.savez(
            path,
            format="METRIC1",
            projection=self.projection,
            config=np.array(
                [
                    cfg.embed_dim,
                    cfg.margin,
                    cfg.epochs,
                    cfg.batch_authors,
                    cfg.batch_per_author,
                    cfg.learning_rate,
                    cfg.seed,
                    cfg.knn_k,
                ]
            ),
        )

    @classmethod
    def load(cls, path: str | Path) -> "MetricEmbedder":
        with np.load(path, allow_pickle=False) as npz:
            if str(npz["format"]) != "METRIC1":
                raise ValueError("not a metric embedder file")
            c = npz["config"]
            config = MetricConfig(
                embed_dim=int(c[0]),
                margin=float(c[1]),
                epochs=int(c[2]),
                batch_authors=int(c[3]),
                batch_per_author=int(c[4]),
                learning_rate=float(c[5]),
                seed=int(c[6]),
                knn_k=int(c[7]),
            )
            return cls(npz["projection"], config)


def train_metric(X, y: Sequence[int], config: MetricConfig | None = None) -> MetricEmbedder:
    """Train the projection with SGD on batch-hard triplet loss.

    Deterministic for a fixed config.seed. Every class must have at least
    ``batch_per_author`` samples.
    """
    if config is None:
        config = MetricConfig()
    if isinstance(X, np.ndarray):
        X = CsrMatrix.from_dense(X)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.n_rows != len(y):
        raise ValueError("X and y length mismatch")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise ValueError("training requires at least 2 classes")
    short = classes[counts < config.batch_per_author]
    if len(short):
        raise ValueError(
            f"class {short[0]} has fewer than {config.batch_per_author} samples"
        )

    rng = np.random.default_rng(config.seed)
    d = X.n_cols
    proj_t = np.ascontiguousarray(
        rng.standard_normal((config.embed_dim, d)).T / math.sqrt(max(d, 1))
    )
    positions = {int(c): np.flatnonzero(y == c) for c in classes}
    p_eff = min(config.batch_authors, len(classes))
    batch_size = p_eff * config.batch_per_author
    steps_per_epoch = max(1, math.ceil(X.n_rows / batch_size))

    embedder = MetricEmbedder(proj_t.T.copy(), config)
    lr = config.learning_rate
    for _ in range(config.epochs):
        epoch_loss = 0.0
        for _ in range(steps_per_epoch):
            picked = rng.choice(len(classes), size=p_eff, replace=False)
            rows = []
            labels = []
            for ci in picked:
                pos = positions[int(classes[ci])]
                take = rng.choice(len(pos), size=config.batch_per_author, replace=False)
                rows.extend(int(pos[t]) for t in take)
                labels.extend([int(classes[ci])] * config.batch_per_author)
            batch = X.take_rows(rows)
            loss, grad_v = _projection_loss_grad(
                proj_t, batch, np.array(labels), config.margin
            )
            epoch_loss += loss
            for i in range(batch.n_rows):
                lo, hi = batch.indptr[i], batch.indptr[i + 1]
                cols = batch.indices[lo:hi]
                vals = batch.data[lo:hi]
                proj_t[cols] -= lr * vals[:, None] * grad_v[i][None, :]
        embedder.loss_history.append(epoch_loss / steps_per_epoch)

    embedder.projection = proj_t.T.copy()
    embedder._proj_t = proj_t
    return embedder


def _head_by_majority(
    neigh_labels: np.ndarray, neigh_dist: np.ndarray, knn_k: int
) -> int:
    """Majority label among the first knn_k neighbors; ties by mean distance."""
    kk = min(knn_k, len(neigh_labels))
    head_labels = neigh_labels[:kk]
    head_dist = neigh_dist[:kk]
    votes: dict[int, list[float]] = {}
    for lab, dv in zip(head_labels, head_dist):
        votes.setdefault(int(lab), []).append(float(dv))
    best = max(votes.items(), key=lambda it: (len(it[1]), -np.mean(it[1]), -it[0]))
    return best[0]


def knn_rank(
    train_embeddings: np.ndarray,
    train_labels: Sequence[int],
    query: np.ndarray,
    neighbor_pool: int,
    k_eval_max: int | None = None,
    knn_k: int = 3,
    n_classes: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Ranked candidate authors for one query embedding.

    The Top-1 decision is the majority vote among the first ``knn_k``
    neighbors (ties by smaller mean distance, then smaller label); the rest
    of the list orders authors by their minimum neighbor distance within
    the exact ``neighbor_pool`` nearest neighbors, with authors absent from
    the pool appended by ascending index (score +inf). Returns
    (ranked_labels, scores).
    """
    rankings, scores = knn_rank_batch(
        train_embeddings,
        train_labels,
        np.asarray(query, dtype=np.float64)[None, :],
        neighbor_pool,
        knn_k=knn_k,
        n_classes=n_classes,
    )
    out_r, out_s = rankings[0], scores[0]
    if k_eval_max is not None:
        out_r, out_s = out_r[:k_eval_max], out_s[:k_eval_max]
    return out_r, out_s


def knn_rank_batch(
    train_embeddings: np.ndarray,
    train_labels: Sequence[int],
    queries: np.ndarray,
    neighbor_pool: int,
    knn_k: int = 3,
    n_classes: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized knn_rank over query rows; returns (m, n_classes) rankings."""
    train = np.ascontiguousarray(train_embeddings, dtype=np.float64)
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    y = np.asarray(train_labels, dtype=np.int64)
    if train.shape[0] == 0:
        raise ValueError("empty training set")
    if y.shape[0] != train.shape[0]:
        raise ValueError("train labels length mismatch")
    if neighbor_pool < knn_k:
        raise ValueError("neighbor_pool must be >= knn_k")
    if n_classes is None:
        n_classes = int(y.max()) + 1

    dist, idx = kernels.knn_topk(train, queries, neighbor_pool)
    m = queries.shape[0]
    rankings = np.empty((m, n_classes), dtype=np.int64)
    scores = np.empty((m, n_classes), dtype=np.float64)
    for qi in range(m):
        neigh_labels = y[idx[qi]]
        neigh_dist = dist[qi]
        head = _head_by_majority(neigh_labels, neigh_dist, knn_k)
        min_dist = np.full(n_classes, np.inf)
        for lab, dv in zip(neigh_labels, neigh_dist):
            if dv < min_dist[lab]:
                min_dist[lab] = dv
        order = np.lexsort((np.arange(n_classes), min_dist))
        ranked = [head] + [int(c) for c in order if c != head]
        rankings[qi] = ranked
        scores[qi] = min_dist[ranked]
    return rankings, scores
