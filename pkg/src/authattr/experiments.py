"""Experiment designs, concrete methods, and result emission.

The three staged designs share one corpus-construction recipe: EXP1 and
EXP3 select the top U authors then sample k reviews each; EXP2A keeps the
top 100 authors' full (imbalanced) data; EXP2B additionally caps each
author at K_max. Each (grid point, method) pair yields one ResultRow with
the config echo, corpus digest, and the cross-validation aggregates.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import Corpus, Review, cap_per_author, sample_per_author, select_top_authors
from .evaluation import EvalReport, corpus_labels, run_cv, stratified_kfold
from .features import DenseMatrix, TfidfConfig, fit_tfidf, transform_batch
from .linear_classifier import (
    LogRegConfig,
    predict_proba_batch,
    rank_all_batch,
    train_logreg,
)
from .metric_knn import MetricConfig, knn_rank_batch, train_metric

DESIGNS = ("EXP1", "EXP2A", "EXP2B", "EXP3")
METHOD_NAMES = ("tfidf_lr", "emb_lr", "metric_knn")
EXP1_K_GRID = (100, 200, 300, 400)
EXP2B_KMAX_GRID = (500, 1000, 1500)
EXP3_U_GRID = (2, 5, 10, 20, 50, 100, 200, 400, 600, 800, 1000)
EXP3_K = 186

RESULT_CSV_COLUMNS = [
    "design",
    "U",
    "k",
    "K_max",
    "method",
    "accuracy_mean",
    "accuracy_sd",
    "macro_f1_mean",
    "macro_f1_sd",
    "top3_mean",
    "top5_mean",
    "top10_mean",
    "train_seconds_mean",
    "infer_seconds_mean",
    "corpus_hash",
    "failed_folds",
]


class TfidfLrMethod:
    """Character n-gram TF-IDF features + multinomial logistic regression."""

    name = "tfidf_lr"

    def __init__(self, tfidf_config: TfidfConfig | None = None, logreg_config: LogRegConfig | None = None):
        self.tfidf_config = tfidf_config or TfidfConfig()
        self.logreg_config = logreg_config or LogRegConfig()
        self.vectorizer = None
        self.classifier = None

    def fit(self, reviews: Sequence[Review], labels: np.ndarray, n_classes: int) -> None:
        texts = [r.text for r in reviews]
        self.vectorizer = fit_tfidf(texts, self.tfidf_config)
        X = transform_batch(self.vectorizer, texts)
        self.classifier = train_logreg(X, labels, self.logreg_config, n_classes=n_classes)

    def rank(self, reviews: Sequence[Review]) -> np.ndarray:
        X = transform_batch(self.vectorizer, [r.text for r in reviews])
        return rank_all_batch(predict_proba_batch(self.classifier, X))


class EmbLrMethod:
    """Imported dense embeddings + multinomial logistic regression."""

    name = "emb_lr"

    def __init__(self, embeddings: DenseMatrix, logreg_config: LogRegConfig | None = None):
        self.embeddings = embeddings
        self.logreg_config = logreg_config or LogRegConfig()
        self.classifier = None

    def _rows(self, reviews: Sequence[Review]) -> np.ndarray:
        return self.embeddings.rows_for_ids([r.review_id for r in reviews])

    def fit(self, reviews: Sequence[Review], labels: np.ndarray, n_classes: int) -> None:
        self.classifier = train_logreg(
            self._rows(reviews), labels, self.logreg_config, n_classes=n_classes
        )

    def rank(self, reviews: Sequence[Review]) -> np.ndarray:
        return rank_all_batch(predict_proba_batch(self.classifier, self._rows(reviews)))


class MetricKnnMethod:
    """Triplet metric learning over TF-IDF features + cosine kNN ranking."""

    name = "metric_knn"

    def __init__(
        self,
        tfidf_config: TfidfConfig | None = None,
        metric_config: MetricConfig | None = None,
        k_eval_max: int = 10,
    ):
        self.tfidf_config = tfidf_config or TfidfConfig()
        self.metric_config = metric_config or MetricConfig()
        self.k_eval_max = k_eval_max
        self.vectorizer = None
        self.embedder = None
        self.train_embeddings = None
        self.train_labels = None
        self.n_classes = None

    def fit(self, reviews: Sequence[Review], labels: np.ndarray, n_classes: int) -> None:
        texts = [r.text for r in reviews]
        self.vectorizer = fit_tfidf(texts, self.tfidf_config)
        X = transform_batch(self.vectorizer, texts)
        self.embedder = train_metric(X, labels, self.metric_config)
        self.train_embeddings = self.embedder.embed(X)
        self.train_labels = np.asarray(labels, dtype=np.int64)
        self.n_classes = n_classes

    def rank(self, reviews: Sequence[Review]) -> np.ndarray:
        X = transform_batch(self.vectorizer, [r.text for r in reviews])
        queries = self.embedder.embed(X)
        pool = max(30, self.k_eval_max * self.metric_config.knn_k)
        rankings, _ = knn_rank_batch(
            self.train_embeddings,
            self.train_labels,
            queries,
            neighbor_pool=pool,
            knn_k=self.metric_config.knn_k,
            n_classes=self.n_classes,
        )
        return rankings


def make_method(name: str, seed: int, embeddings: DenseMatrix | None = None):
    """Instantiate a method by its CLI name with paper-default settings."""
    if name == "tfidf_lr":
        return TfidfLrMethod()
    if name == "emb_lr":
        if embeddings is None:
            raise ValueError("emb_lr requires an embedding file (--embeddings)")
        return EmbLrMethod(embeddings)
    if name == "metric_knn":
        return MetricKnnMethod(metric_config=MetricConfig(seed=seed))
    raise ValueError(f"unknown method {name!r}; expected one of {METHOD_NAMES}")


@dataclass(frozen=True)
class GridPoint:
    design: str
    U: int
    k: int | None = None
    K_max: int | None = None


@dataclass
class ExperimentConfig:
    design: str
    U: int = 100
    k: int | None = None
    K_max: int | None = None
    methods: tuple[str, ...] = ("tfidf_lr",)
    seed: int = 42
    folds: int = 5
    top_k_set: tuple[int, ...] = (3, 5, 10)
    k_grid: tuple[int, ...] | None = None
    u_grid: tuple[int, ...] | None = None
    k_max_grid: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}")
        for m in self.methods:
            if m not in METHOD_NAMES:
                raise ValueError(f"unknown method {m!r}")
        if self.design == "EXP1":
            if self.k is not None and self.k_grid is None and self.k not in EXP1_K_GRID:
                raise ValueError(f"EXP1 requires k in {EXP1_K_GRID} (or an explicit k_grid)")
        if self.design == "EXP3":
            if self.k is not None and self.k != EXP3_K:
                raise ValueError(f"EXP3 fixes k={EXP3_K}")
        if self.design == "EXP2B":
            if self.K_max is None and self.k_max_grid is None:
                raise ValueError("EXP2B requires K_max (or a k_max_grid)")

    def expand(self) -> list[GridPoint]:
        """Grid points in deterministic emission order."""
        if self.design == "EXP1":
            ks = self.k_grid or ((self.k,) if self.k is not None else EXP1_K_GRID)
            return [GridPoint("EXP1", self.U, k=k) for k in ks]
        if self.design == "EXP2A":
            return [GridPoint("EXP2A", self.U)]
        if self.design == "EXP2B":
            kmaxes = self.k_max_grid or (self.K_max,)
            return [GridPoint("EXP2B", self.U, K_max=km) for km in kmaxes]
        us = self.u_grid or EXP3_U_GRID
        return [GridPoint("EXP3", u, k=EXP3_K) for u in us]


def build_experiment_corpus(base: Corpus, point: GridPoint, seed: int) -> Corpus:
    """Apply the design's selection/sampling recipe to the base corpus."""
    selected = select_top_authors(base, point.U)
    if point.design in ("EXP1", "EXP3"):
        return sample_per_author(selected, point.k, seed)
    if point.design == "EXP2B":
        return cap_per_author(selected, point.K_max, seed)
    return selected


@dataclass
class ResultRow:
    design: str
    U: int
    k: int | None
    K_max: int | None
    method: str
    report: EvalReport | None
    corpus_hash: str
    error: str | None = None
    folds_requested: int = 0

    def to_dict(self) -> dict:
        out = {
            "design": self.design,
            "U": self.U,
            "k": self.k,
            "K_max": self.K_max,
            "method": self.method,
            "corpus_hash": self.corpus_hash,
        }
        if self.report is not None:
            out.update(self.report.to_dict())
        if self.error:
            out["error"] = self.error
        return out

    def csv_values(self) -> list[str]:
        d = self.to_dict()

        def num(key):
            v = d.get(key)
            if v is None or (isinstance(v, float) and np.isnan(v)):
                return ""
            return f"{v:.6f}"

        return [
            self.design,
            str(self.U),
            "" if self.k is None else str(self.k),
            "" if self.K_max is None else str(self.K_max),
            self.method,
            num("accuracy_mean"),
            num("accuracy_sd"),
            num("macro_f1_mean"),
            num("macro_f1_sd"),
            num("top3_mean"),
            num("top5_mean"),
            num("top10_mean"),
            num("train_seconds_mean"),
            num("infer_seconds_mean"),
            self.corpus_hash,
            str(self.report.failed_folds if self.report else self.folds_requested),
        ]


def _run_grid_point(
    point: GridPoint,
    config: ExperimentConfig,
    base: Corpus,
    embeddings: DenseMatrix | None,
) -> list[ResultRow]:
    try:
        corpus = build_experiment_corpus(base, point, config.seed)
        corpus_hash = corpus.digest()
    except Exception as exc:  # noqa: BLE001 - corpus failure aborts the rows only
        err = f"{type(exc).__name__}: {exc}"
        return [
            ResultRow(point.design, point.U, point.k, point.K_max, m, None, "", err,
                      folds_requested=config.folds)
            for m in config.methods
        ]
    y, _ = corpus_labels(corpus)
    plan = stratified_kfold(y, config.folds, config.seed)
    rows = []
    for m in config.methods:
        method = make_method(m, config.seed, embeddings)
        report = run_cv(method, corpus, plan, config.top_k_set)
        rows.append(
            ResultRow(point.design, point.U, point.k, point.K_max, m, report, corpus_hash)
        )
    return rows


def run_experiment(
    config: ExperimentConfig,
    base: Corpus,
    embeddings: DenseMatrix | None = None,
    workers: int = 1,
    progress: Callable[[GridPoint, list[ResultRow]], None] | None = None,
) -> list[ResultRow]:
    """Run every (grid point, method) pair; rows in deterministic config order."""
    points = config.expand()
    results: list[list[ResultRow]] = []
    if workers <= 1:
        for point in points:
            rows = _run_grid_point(point, config, base, embeddings)
            if progress:
                progress(point, rows)
            results.append(rows)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_grid_point, point, config, base, embeddings)
                for point in points
            ]
            for point, fut in zip(points, futures):
                rows = fut.result()
                if progress:
                    progress(point, rows)
                results.append(rows)
    return [row for rows in results for row in rows]


def _plot_axis(design: str) -> str:
    return {"EXP1": "k", "EXP2A": "U", "EXP2B": "K_max", "EXP3": "U"}[design]


def emit_report(rows: Sequence[ResultRow], out_dir: str | Path) -> list[Path]:
    """Write results.json, results.csv, and per-design plot-data CSVs."""
    if not rows:
        raise ValueError("no result rows to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out / "results.json"
    doc = {"format": "RESULTS1", "rows": [r.to_dict() for r in rows]}
    json_path.write_text(json.dumps(doc, ensure_ascii=False, indent=1), encoding="utf-8")
    written.append(json_path)

    csv_path = out / "results.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_CSV_COLUMNS)
        for r in rows:
            writer.writerow(r.csv_values())
    written.append(csv_path)

    by_design: dict[str, list[ResultRow]] = {}
    for r in rows:
        by_design.setdefault(r.design, []).append(r)
    metric_cols = [
        "accuracy_mean",
        "macro_f1_mean",
        "top3_mean",
        "top5_mean",
        "top10_mean",
        "train_seconds_mean",
        "infer_seconds_mean",
    ]
    for design, drows in by_design.items():
        axis = _plot_axis(design)
        plot_path = out / f"plot_{design.lower()}.csv"
        with open(plot_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "method"] + metric_cols)
            for r in drows:
                d = r.to_dict()
                x = d.get(axis)
                vals = []
                for c in metric_cols:
                    v = d.get(c)
                    vals.append("" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{v:.6f}")
                writer.writerow([x, r.method] + vals)
        written.append(plot_path)
    return written


def load_results(path: str | Path) -> list[dict]:
    """Read back a results.json written by emit_report."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "RESULTS1":
        raise ValueError("not a results file")
    return doc["rows"]


def results_to_csv_text(rows: Sequence[dict]) -> str:
    """Render result-row dicts (from results.json) as the results.csv text."""
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(RESULT_CSV_COLUMNS)
    for d in rows:
        def num(key):
            v = d.get(key)
            if v is None or (isinstance(v, float) and np.isnan(v)):
                return ""
            return f"{v:.6f}"

        writer.writerow(
            [
                d["design"],
                str(d["U"]),
                "" if d.get("k") is None else str(d["k"]),
                "" if d.get("K_max") is None else str(d["K_max"]),
                d["method"],
                num("accuracy_mean"),
                num("accuracy_sd"),
                num("macro_f1_mean"),
                num("macro_f1_sd"),
                num("top3_mean"),
                num("top5_mean"),
                num("top10_mean"),
                num("train_seconds_mean"),
                num("infer_seconds_mean"),
                d.get("corpus_hash", ""),
                str(d.get("failed_folds", "")),
            ]
        )
    return buf.getvalue()
