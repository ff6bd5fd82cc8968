"""Authorship attribution toolkit.

Char n-gram TF-IDF + logistic regression and triplet metric learning +
cosine kNN, evaluated with stratified cross-validation, Top-k candidate
screening metrics, and an experiment runner; includes a seeded synthetic
corpus generator for dataset-free testing.
"""

from .corpus import (
    Corpus,
    CorpusStats,
    Review,
    cap_per_author,
    compute_stats,
    parse_tsv,
    sample_per_author,
    select_top_authors,
    write_tsv,
)
from .evaluation import (
    EvalReport,
    FoldPlan,
    macro_f1,
    run_cv,
    stratified_kfold,
    top_k_accuracy,
)
from .features import (
    CsrMatrix,
    DenseMatrix,
    SparseVector,
    TfidfConfig,
    VectorizerModel,
    fit_tfidf,
    load_embeddings,
    save_embeddings,
    transform,
    transform_batch,
)
from .linear_classifier import (
    LinearClassifier,
    LogRegConfig,
    predict_proba_batch,
    predict_scores,
    rank_top_k,
    train_logreg,
)
from .metric_knn import (
    MetricConfig,
    MetricEmbedder,
    batch_hard_triplet_loss,
    knn_rank,
    knn_rank_batch,
    train_metric,
)
from .preprocess import CleaningReport, clean_text, filter_short, load_patterns, preprocess_corpus
from .synthetic import SyntheticSpec, generate

__version__ = "0.1.0"
