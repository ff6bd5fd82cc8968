"""Review corpus ingestion, author selection/sampling, and statistics.

A corpus is an immutable, ordered collection of reviews plus an index of
review positions per author. All subsampling operations are deterministic:
each author draws from an RNG stream derived from (seed, author_id), so a
given author's sample is unaffected by other authors entering or leaving
the corpus.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CORPUS_FORMAT = "CORPUS1"


@dataclass(frozen=True, slots=True)
class Review:
    """One authored text unit.

    ``review_id`` is the 0-based source line number of the record in the
    TSV it was parsed from, as a decimal string; it stays stable across
    filtering and subsetting so externally produced row data (e.g.
    embedding files) can be joined back by id.
    """

    review_id: str
    author_id: str
    text: str
    rating: int | None = None
    date: str | None = None


class Corpus:
    """Ordered reviews plus an author -> positions index; immutable once built."""

    __slots__ = ("reviews", "author_index")

    def __init__(self, reviews: Iterable[Review]):
        revs = tuple(reviews)
        index: dict[str, list[int]] = {}
        for pos, r in enumerate(revs):
            if not r.author_id:
                raise ValueError(f"review {r.review_id!r} has empty author_id")
            if not r.text:
                raise ValueError(f"review {r.review_id!r} has empty text")
            index.setdefault(r.author_id, []).append(pos)
        self.reviews = revs
        self.author_index = index

    def __len__(self) -> int:
        return len(self.reviews)

    @property
    def num_authors(self) -> int:
        return len(self.author_index)

    def author_counts(self) -> dict[str, int]:
        return {a: len(p) for a, p in self.author_index.items()}

    def texts(self) -> list[str]:
        return [r.text for r in self.reviews]

    def subset(self, positions: Sequence[int]) -> "Corpus":
        """New corpus keeping the given positions, in the order given."""
        return Corpus(self.reviews[p] for p in positions)

    def to_bytes(self) -> bytes:
        """Canonical serialization; identical corpora serialize identically."""
        rows = [
            [r.review_id, r.author_id, r.text, r.rating, r.date]
            for r in self.reviews
        ]
        doc = {"format": CORPUS_FORMAT, "reviews": rows}
        return json.dumps(doc, ensure_ascii=False, separators=(",", ":")).encode("utf-8")

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Corpus":
        doc = json.loads(raw.decode("utf-8"))
        if not isinstance(doc, dict) or doc.get("format") != CORPUS_FORMAT:
            raise ValueError("not a corpus file (bad or missing format tag)")
        reviews = [
            Review(review_id=r[0], author_id=r[1], text=r[2], rating=r[3], date=r[4])
            for r in doc["reviews"]
        ]
        return cls(reviews)

    @classmethod
    def load(cls, path: str | Path) -> "Corpus":
        return cls.from_bytes(Path(path).read_bytes())


@dataclass
class CorpusStats:
    num_authors: int
    total_reviews: int
    posts_per_author_min: int
    posts_per_author_median: float
    posts_per_author_max: int
    posts_per_author_mean: float
    posts_per_author_sd: float
    chars_per_review_median: float
    chars_per_review_mean: float
    chars_per_review_p95: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TsvParseResult:
    corpus: Corpus
    skipped_count: int
    field_warning_count: int
    filtered_by_year: int


def _unescape(text: str) -> str:
    # embedded tabs/newlines arrive escaped as \t and \n (backslash-escaped
    # backslashes as \\); real tabs only ever delimit fields
    if "\\" not in text:
        return text
    out = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\\" and i + 1 < n:
            nxt = text[i + 1]
            if nxt == "t":
                out.append("\t")
                i += 2
                continue
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def parse_tsv(path: str | Path, year: int | None = None) -> TsvParseResult:
    """Parse a review TSV (author_id, text, rating, date per line).

    Records with an empty author_id or empty text are skipped and counted.
    Unparseable rating/date fields are nulled out and counted as field
    warnings rather than dropping the record. When ``year`` is given, only
    records whose date starts with that year are kept.

    review_id is assigned from the 0-based line number so ids are stable
    regardless of skips or the year filter.
    """
    reviews: list[Review] = []
    skipped = 0
    warnings = 0
    filtered = 0
    year_prefix = None if year is None else str(year)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                skipped += 1
                continue
            author_id = fields[0].strip()
            text = _unescape(fields[1])
            if not author_id or not text:
                skipped += 1
                continue
            rating: int | None = None
            if len(fields) > 2 and fields[2].strip():
                try:
                    rating = int(fields[2].strip())
                except ValueError:
                    rating = None
                    warnings += 1
                else:
                    if not 1 <= rating <= 5:
                        rating = None
                        warnings += 1
            date: str | None = None
            if len(fields) > 3 and fields[3].strip():
                date = fields[3].strip()
            if year_prefix is not None:
                if date is None or not date.startswith(year_prefix):
                    filtered += 1
                    continue
            reviews.append(Review(str(lineno), author_id, text, rating, date))
    return TsvParseResult(Corpus(reviews), skipped, warnings, filtered)


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def write_tsv(corpus: Corpus, path: str | Path) -> None:
    """Write the corpus in the TSV interchange format parse_tsv consumes.

    The format carries no review ids: re-parsing assigns fresh ids from
    line numbers (0..n-1 in corpus order).
    """
    with open(path, "w", encoding="utf-8") as fh:
        for r in corpus.reviews:
            rating = "" if r.rating is None else str(r.rating)
            date = "" if r.date is None else r.date
            fh.write(f"{r.author_id}\t{_escape(r.text)}\t{rating}\t{date}\n")


def _author_rng(seed: int, author_id: str, purpose: str) -> np.random.Generator:
    digest = hashlib.blake2b(
        f"{seed}|{purpose}|{author_id}".encode("utf-8"), digest_size=16
    ).digest()
    return np.random.default_rng(int.from_bytes(digest, "big"))


def select_top_authors(corpus: Corpus, num_authors: int) -> Corpus:
    """Keep the ``num_authors`` authors with the most reviews.

    Ties in review count are broken lexicographically by author_id so the
    selection is deterministic.
    """
    counts = corpus.author_counts()
    if len(counts) < num_authors:
        raise ValueError(
            f"corpus has {len(counts)} authors, fewer than requested {num_authors}"
        )
    ranked = sorted(counts, key=lambda a: (-counts[a], a))
    keep = set(ranked[:num_authors])
    positions = [p for p, r in enumerate(corpus.reviews) if r.author_id in keep]
    return corpus.subset(positions)


def sample_per_author(
    corpus: Corpus, k: int, seed: int, allow_fewer: bool = False
) -> Corpus:
    """Sample exactly ``k`` reviews per author, without replacement.

    Original review order is preserved, which makes the operation
    idempotent: sampling a corpus where every author already has k reviews
    returns it unchanged.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    keep: list[int] = []
    for author_id in corpus.author_index:
        positions = corpus.author_index[author_id]
        n = len(positions)
        if n < k:
            if not allow_fewer:
                raise ValueError(
                    f"author {author_id!r} has {n} reviews, fewer than k={k}"
                )
            keep.extend(positions)
            continue
        rng = _author_rng(seed, author_id, "sample")
        chosen = rng.permutation(n)[:k]
        keep.extend(positions[i] for i in chosen)
    keep.sort()
    return corpus.subset(keep)


def cap_per_author(corpus: Corpus, k_max: int, seed: int) -> Corpus:
    """Cap each author at ``k_max`` reviews (deterministic subsampling)."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    keep: list[int] = []
    for author_id in corpus.author_index:
        positions = corpus.author_index[author_id]
        n = len(positions)
        if n <= k_max:
            keep.extend(positions)
            continue
        rng = _author_rng(seed, author_id, "cap")
        chosen = rng.permutation(n)[:k_max]
        keep.extend(positions[i] for i in chosen)
    keep.sort()
    return corpus.subset(keep)


def compute_stats(corpus: Corpus) -> CorpusStats:
    """Corpus summary statistics; character counts are Unicode code points."""
    if len(corpus) == 0:
        raise ValueError("cannot compute stats of an empty corpus")
    posts = np.array([len(p) for p in corpus.author_index.values()], dtype=np.float64)
    chars = np.array([len(r.text) for r in corpus.reviews], dtype=np.float64)
    return CorpusStats(
        num_authors=corpus.num_authors,
        total_reviews=len(corpus),
        posts_per_author_min=int(posts.min()),
        posts_per_author_median=float(np.median(posts)),
        posts_per_author_max=int(posts.max()),
        posts_per_author_mean=float(posts.mean()),
        posts_per_author_sd=float(posts.std()),
        chars_per_review_median=float(np.median(chars)),
        chars_per_review_mean=float(chars.mean()),
        chars_per_review_p95=float(np.percentile(chars, 95)),
    )
