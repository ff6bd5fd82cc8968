"""Character n-gram TF-IDF vectorization and dense embedding import.

The vectorizer is fit by document frequency: the ``max_features`` n-grams
with the highest df are kept (ties broken lexicographically), indices are
assigned in lexicographic order of the retained n-grams, and
idf(t) = ln((1+N)/(1+df(t))) + 1 with smoothing on. Term frequency is the
raw in-document count; vectors are L2-normalized by default. All of this
is deterministic and invariant to document order.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus

EMB_FORMAT = "EMB1"


@dataclass(frozen=True)
class TfidfConfig:
    ngram_min: int = 2
    ngram_max: int = 3
    max_features: int = 10_000
    idf_smoothing: bool = True
    l2_normalize: bool = True

    def __post_init__(self):
        if not 1 <= self.ngram_min <= self.ngram_max:
            raise ValueError("require 1 <= ngram_min <= ngram_max")
        if self.max_features < 1:
            raise ValueError("max_features must be >= 1")


@dataclass(frozen=True)
class SparseVector:
    """Sorted sparse vector (strictly increasing indices)."""

    indices: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2)))

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        out[self.indices] = self.values
        return out


class CsrMatrix:
    """Light CSR container shared by the kernel backends.

    indptr/indices are int64, data float64; rows keep indices strictly
    increasing.
    """

    __slots__ = ("indptr", "indices", "data", "n_cols")

    def __init__(self, indptr, indices, data, n_cols: int):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.n_cols = int(n_cols)

    @property
    def n_rows(self) -> int:
        return len(self.indptr) - 1

    @property
    def nnz(self) -> int:
        return len(self.data)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def row(self, i: int) -> SparseVector:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return SparseVector(self.indices[lo:hi].copy(), self.data[lo:hi].copy())

    def take_rows(self, rows: Sequence[int]) -> "CsrMatrix":
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        chunks_idx = []
        chunks_dat = []
        for out_i, i in enumerate(rows):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            indptr[out_i + 1] = indptr[out_i] + (hi - lo)
            chunks_idx.append(self.indices[lo:hi])
            chunks_dat.append(self.data[lo:hi])
        indices = np.concatenate(chunks_idx) if chunks_idx else np.empty(0, np.int64)
        data = np.concatenate(chunks_dat) if chunks_dat else np.empty(0, np.float64)
        return CsrMatrix(indptr, indices, data, self.n_cols)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for i in range(self.n_rows):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            out[i, self.indices[lo:hi]] = self.data[lo:hi]
        return out

    @classmethod
    def from_vectors(cls, vectors: Sequence[SparseVector], n_cols: int) -> "CsrMatrix":
        indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
        for i, v in enumerate(vectors):
            indptr[i + 1] = indptr[i] + v.nnz
        if vectors:
            indices = np.concatenate([v.indices for v in vectors])
            data = np.concatenate([v.values for v in vectors])
        else:
            indices = np.empty(0, np.int64)
            data = np.empty(0, np.float64)
        return cls(indptr, indices, data, n_cols)

    @classmethod
    def from_dense(cls, arr: np.ndarray) -> "CsrMatrix":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        n, d = arr.shape
        mask = arr != 0.0
        counts = mask.sum(axis=1)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        rows, cols = np.nonzero(mask)
        return cls(indptr, cols.astype(np.int64), arr[rows, cols], d)


def char_ngrams(text: str, ngram_min: int, ngram_max: int) -> Iterable[str]:
    """All contiguous character n-grams with ngram_min <= n <= ngram_max."""
    length = len(text)
    for n in range(ngram_min, ngram_max + 1):
        for i in range(length - n + 1):
            yield text[i : i + n]


@dataclass
class VectorizerModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    config: TfidfConfig = field(default_factory=TfidfConfig)

    def __post_init__(self):
        if len(self.idf) != len(self.vocabulary):
            raise ValueError("idf length must match vocabulary size")

    @property
    def n_features(self) -> int:
        return len(self.vocabulary)

    def save(self, path: str | Path) -> None:
        ngrams = sorted(self.vocabulary, key=self.vocabulary.get)
        meta = {
            "format": "TFIDF1",
            "config": self.config.__dict__,
            "ngrams": ngrams,
            "idf": self.idf.tolist(),
        }
        Path(path).write_text(
            json.dumps(meta, ensure_ascii=False, separators=(",", ":")),
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "VectorizerModel":
        meta = json.loads(Path(path).read_text(encoding="utf-8"))
        if meta.get("format") != "TFIDF1":
            raise ValueError("not a vectorizer model file")
        vocab = {g: i for i, g in enumerate(meta["ngrams"])}
        return cls(vocab, np.array(meta["idf"], dtype=np.float64), TfidfConfig(**meta["config"]))


def _texts_of(docs: Corpus | Sequence[str]) -> list[str]:
    if isinstance(docs, Corpus):
        return docs.texts()
    return list(docs)


def fit_tfidf(docs: Corpus | Sequence[str], config: TfidfConfig | None = None) -> VectorizerModel:
    """Fit vocabulary and idf weights on a corpus or a list of texts."""
    if config is None:
        config = TfidfConfig()
    texts = _texts_of(docs)
    if not texts:
        raise ValueError("cannot fit a vectorizer on an empty corpus")
    df: Counter[str] = Counter()
    for text in texts:
        df.update(set(char_ngrams(text, config.ngram_min, config.ngram_max)))
    selected = sorted(df, key=lambda g: (-df[g], g))[: config.max_features]
    selected.sort()
    vocabulary = {g: i for i, g in enumerate(selected)}
    n_docs = len(texts)
    idf = np.empty(len(selected), dtype=np.float64)
    for g, i in vocabulary.items():
        if config.idf_smoothing:
            idf[i] = math.log((1.0 + n_docs) / (1.0 + df[g])) + 1.0
        else:
            idf[i] = math.log(n_docs / df[g]) + 1.0
    return VectorizerModel(vocabulary, idf, config)


def transform(model: VectorizerModel, text: str) -> SparseVector:
    """TF-IDF vector of one text; n-grams outside the vocabulary are ignored."""
    cfg = model.config
    counts: Counter[str] = Counter(char_ngrams(text, cfg.ngram_min, cfg.ngram_max))
    pairs = sorted(
        (model.vocabulary[g], float(c))
        for g, c in counts.items()
        if g in model.vocabulary
    )
    if not pairs:
        return SparseVector(np.empty(0, np.int64), np.empty(0, np.float64))
    indices = np.array([p[0] for p in pairs], dtype=np.int64)
    values = np.array([p[1] for p in pairs], dtype=np.float64)
    values *= model.idf[indices]
    if cfg.l2_normalize:
        norm = np.sqrt(np.sum(values**2))
        if norm > 0:
            values /= norm
    return SparseVector(indices, values)


def transform_batch(model: VectorizerModel, texts: Sequence[str]) -> CsrMatrix:
    return CsrMatrix.from_vectors(
        [transform(model, t) for t in texts], model.n_features
    )


@dataclass
class DenseMatrix:
    """Imported dense embeddings, one row per review id."""

    ids: tuple[str, ...]
    dim: int
    values: np.ndarray  # (len(ids), dim) float32

    def __post_init__(self):
        self._by_id = {rid: i for i, rid in enumerate(self.ids)}

    @property
    def count(self) -> int:
        return len(self.ids)

    def rows_for_ids(self, ids: Sequence[str]) -> np.ndarray:
        """Float64 matrix of the rows for ``ids``; missing ids are an error."""
        try:
            rows = [self._by_id[r] for r in ids]
        except KeyError as exc:
            raise KeyError(f"embedding file has no row for review id {exc.args[0]!r}") from None
        return self.values[rows].astype(np.float64)


def save_embeddings(ids: Sequence[str], values: np.ndarray, path: str | Path) -> None:
    """Write an EMB1 file: JSON header line + little-endian float32 payload."""
    values = np.asarray(values)
    if values.ndim != 2 or values.shape[0] != len(ids):
        raise ValueError("values must be (len(ids), dim)")
    header = {
        "format": EMB_FORMAT,
        "dim": int(values.shape[1]),
        "count": int(values.shape[0]),
        "ids": list(ids),
    }
    payload = np.ascontiguousarray(values, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, ensure_ascii=False, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def load_embeddings(path: str | Path) -> DenseMatrix:
    """Load and validate an EMB1 embedding file."""
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise ValueError("embedding file has no header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"embedding header is not valid JSON: {exc}") from None
    if not isinstance(header, dict) or header.get("format") != EMB_FORMAT:
        raise ValueError("embedding header missing EMB1 format tag")
    dim = header.get("dim")
    count = header.get("count")
    ids = header.get("ids")
    if not isinstance(dim, int) or dim < 1:
        raise ValueError("embedding header dim must be a positive integer")
    if not isinstance(count, int) or count < 0:
        raise ValueError("embedding header count must be a non-negative integer")
    if not isinstance(ids, list) or len(ids) != count:
        raise ValueError("embedding header ids must list exactly count entries")
    if not all(isinstance(r, str) for r in ids):
        raise ValueError("embedding ids must be strings")
    if len(set(ids)) != count:
        raise ValueError("embedding ids contain duplicates")
    payload = raw[newline + 1 :]
    expected = count * dim * 4
    if len(payload) != expected:
        raise ValueError(
            f"embedding payload is {len(payload)} bytes, expected {expected}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    if not np.all(np.isfinite(values)):
        raise ValueError("embedding payload contains non-finite values")
    return DenseMatrix(tuple(ids), dim, values.copy())
