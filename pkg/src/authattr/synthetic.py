"""Seeded synthetic review corpus with controllable difficulty factors.

Each author owns a disjoint block of CJK code points; author markers are
3-character runs drawn from that block, injected with probability
``signature_strength`` at each of several slots (one slot per ~20 target
characters, so longer reviews get more chances — at strength 1 every
review carries a marker, at 0 none do and labels carry no textual
signal). Shared boilerplate sentences and topic filler are built from a
hiragana block disjoint from all marker blocks. Review lengths follow a
lognormal matched to the configured (median, p95).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Review

_MARKER_BLOCK_START = 0x4E00  # CJK ideographs; disjoint from the topic block
_MARKER_BLOCK_SIZE = 6
_TOPIC_CODEPOINTS = [chr(c) for c in range(0x3042, 0x3094)]  # hiragana
_Z95 = 1.6448536269514722
_CHARS_PER_SLOT = 20


@dataclass(frozen=True)
class SyntheticSpec:
    U: int = 10
    k: int = 100
    signature_strength: float = 0.9
    boilerplate_rate: float = 0.3
    length_distribution: tuple[int, int] = (60, 432)  # (median, p95) code points
    shared_topic_vocab_size: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.signature_strength <= 1.0:
            raise ValueError("signature_strength must be in [0, 1]")
        if not 0.0 <= self.boilerplate_rate <= 1.0:
            raise ValueError("boilerplate_rate must be in [0, 1]")
        median, p95 = self.length_distribution
        if median > p95:
            raise ValueError("length median must be <= p95")
        if self.U < 1 or self.k < 1 or self.shared_topic_vocab_size < 1:
            raise ValueError("U, k and shared_topic_vocab_size must be >= 1")


def author_marker_chars(author_index: int) -> list[str]:
    """The code points reserved for one author's markers (disjoint per author)."""
    base = _MARKER_BLOCK_START + author_index * _MARKER_BLOCK_SIZE
    return [chr(base + i) for i in range(_MARKER_BLOCK_SIZE)]


def detect_author_by_marker(text: str, num_authors: int) -> int | None:
    """Rule-based attribution: find a code point inside some author's block."""
    lo = _MARKER_BLOCK_START
    hi = _MARKER_BLOCK_START + num_authors * _MARKER_BLOCK_SIZE
    for ch in text:
        cp = ord(ch)
        if lo <= cp < hi:
            return (cp - lo) // _MARKER_BLOCK_SIZE
    return None


def _stream(seed: int, *parts) -> np.random.Generator:
    tag = "|".join(str(p) for p in parts)
    digest = hashlib.blake2b(f"{seed}|{tag}".encode(), digest_size=16).digest()
    return np.random.default_rng(int.from_bytes(digest, "big"))


def _pseudo_words(rng: np.random.Generator, count: int) -> list[str]:
    words = []
    for _ in range(count):
        length = int(rng.integers(2, 6))
        words.append("".join(rng.choice(_TOPIC_CODEPOINTS, size=length)))
    return words


def generate(spec: SyntheticSpec) -> Corpus:
    """Generate U authors x k reviews; deterministic per seed."""
    shared_rng = _stream(spec.seed, "shared")
    topic_vocab = _pseudo_words(shared_rng, spec.shared_topic_vocab_size)
    boilerplate = [
        "".join(shared_rng.choice(topic_vocab, size=int(shared_rng.integers(3, 6)))) + "。"
        for _ in range(8)
    ]
    median, p95 = spec.length_distribution
    mu = math.log(median)
    sigma = max((math.log(p95) - math.log(median)) / _Z95, 1e-9)

    reviews = []
    rid = 0
    for author in range(spec.U):
        rng = _stream(spec.seed, "author", author)
        marker_chars = author_marker_chars(author)
        author_id = f"u{author:04d}"
        for _ in range(spec.k):
            target = int(round(float(rng.lognormal(mu, sigma))))
            target = max(12, min(target, 2000))
            slots = max(1, target // _CHARS_PER_SLOT)
            markers = [
                str(rng.choice(marker_chars)) * 3
                for _ in range(slots)
                if rng.random() < spec.signature_strength
            ]
            boiler = ""
            if spec.boilerplate_rate > 0 and rng.random() < spec.boilerplate_rate:
                boiler = str(rng.choice(boilerplate))
            budget = target - sum(len(m) for m in markers) - len(boiler)
            body = ""
            while len(body) < budget:
                body += str(rng.choice(topic_vocab))
            body = body[: max(budget, 0)]
            # insert markers at random positions inside the body
            for m in markers:
                cut = int(rng.integers(0, len(body) + 1))
                body = body[:cut] + m + body[cut:]
            text = boiler + body if rng.random() < 0.5 else body + boiler
            if not text:
                text = str(rng.choice(topic_vocab))
            rating = int(rng.integers(1, 6))
            date = f"2019-{int(rng.integers(1, 13)):02d}-{int(rng.integers(1, 29)):02d}"
            reviews.append(Review(str(rid), author_id, text, rating, date))
            rid += 1
    return Corpus(reviews)
