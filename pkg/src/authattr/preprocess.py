"""Deterministic text cleaning and short-review filtering.

Cleaning order is fixed: NFKC normalization, boilerplate pattern removal
(matches replaced by a single space so removals never fuse neighboring
tokens), whitespace collapsing, trim. Review length is always measured
after cleaning.
"""

from __future__ import annotations

import os
import re
import unicodedata
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .corpus import Corpus, Review

PATTERNS_ENV_VAR = "STYLO_PATTERNS"

_WS_RUN = re.compile(r"\s+")


@dataclass
class CleaningReport:
    removed_boilerplate_spans: int = 0
    normalized_whitespace_runs: int = 0
    dropped_short_reviews: int = 0


def _default_patterns_text() -> str:
    return (
        resources.files("authattr.data")
        .joinpath("boilerplate_patterns.txt")
        .read_text(encoding="utf-8")
    )


def load_patterns(path: str | Path | None = None) -> list[re.Pattern]:
    """Load boilerplate patterns: explicit path > STYLO_PATTERNS env > packaged default.

    Pattern files are UTF-8, one regex per line; '#' lines are comments.
    """
    if path is None:
        env = os.environ.get(PATTERNS_ENV_VAR)
        if env:
            path = env
    if path is None:
        text = _default_patterns_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    patterns = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        patterns.append(re.compile(line, re.IGNORECASE))
    return patterns


_default_compiled: list[re.Pattern] | None = None


def _default_patterns() -> list[re.Pattern]:
    global _default_compiled
    if _default_compiled is None:
        _default_compiled = load_patterns()
    return _default_compiled


def clean_text(
    text: str,
    patterns: list[re.Pattern] | None = None,
    report: CleaningReport | None = None,
) -> str:
    """Clean one text; idempotent (clean(clean(x)) == clean(x))."""
    if patterns is None:
        patterns = _default_patterns()
    text = unicodedata.normalize("NFKC", text)
    for pat in patterns:
        text, n = pat.subn(" ", text)
        if report is not None:
            report.removed_boilerplate_spans += n
    if report is not None:
        report.normalized_whitespace_runs += sum(
            1 for m in _WS_RUN.finditer(text) if m.group() != " "
        )
    text = _WS_RUN.sub(" ", text)
    return text.strip()


def filter_short(corpus: Corpus, min_chars: int = 11) -> Corpus:
    """Drop reviews shorter than ``min_chars`` code points (default keeps >= 11).

    Authors left with zero reviews disappear from the rebuilt index.
    """
    keep = [p for p, r in enumerate(corpus.reviews) if len(r.text) >= min_chars]
    return corpus.subset(keep)


def preprocess_corpus(
    corpus: Corpus,
    min_chars: int = 11,
    patterns: list[re.Pattern] | None = None,
) -> tuple[Corpus, CleaningReport]:
    """Clean every review, then drop the ones below the length threshold."""
    if patterns is None:
        patterns = _default_patterns()
    report = CleaningReport()
    kept: list[Review] = []
    for r in corpus.reviews:
        cleaned = clean_text(r.text, patterns, report)
        if len(cleaned) < min_chars:
            report.dropped_short_reviews += 1
            continue
        kept.append(Review(r.review_id, r.author_id, cleaned, r.rating, r.date))
    return Corpus(kept), report
