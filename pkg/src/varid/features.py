"""Tokenization and TF-IDF n-gram featurization.

The word tokenizer is a rule-based approximation of a Portuguese word
tokenizer: words are maximal runs of letters/digits (with combining marks),
intra-word hyphens/apostrophes are kept so clitic forms like "viu-a" stay
single tokens, and every other non-space character is its own token.

The featurizer follows the common library defaults: smoothed idf
``ln((1 + N) / (1 + df)) + 1``, raw term counts, L2-normalized vectors,
no sublinear tf. Vocabulary selection is by total corpus frequency with
a lexicographic tie-break so fitting is deterministic across platforms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from math import fsum, log, sqrt
from typing import Iterator, Sequence

from varid import kernels
from varid.corpus import Document
from varid.errors import DataError
from varid.util import corpus_fingerprint

_COMBINING = "̀-ͯ"
_WORD = rf"(?:[^\W_]|[{_COMBINING}])+"
_TOKEN_RE = re.compile(rf"{_WORD}(?:['’-]{_WORD})*|\S")


class Analyzer(str, Enum):
    WORD = "Word"
    CHAR = "Char"


@dataclass(frozen=True, slots=True)
class FeatureConfig:
    analyzer: Analyzer
    ngram_range: tuple[int, int]
    max_features: int
    lowercase: bool

    def __post_init__(self):
        lo, hi = self.ngram_range
        if not (1 <= lo <= hi):
            raise ValueError(f"invalid ngram_range {self.ngram_range}: need 1 <= lo <= hi")
        if self.max_features <= 0:
            raise ValueError("max_features must be positive")

    def to_json(self) -> dict:
        return {
            "analyzer": self.analyzer.value,
            "ngram_range": list(self.ngram_range),
            "max_features": self.max_features,
            "lowercase": self.lowercase,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureConfig":
        return cls(
            analyzer=Analyzer(obj["analyzer"]),
            ngram_range=(int(obj["ngram_range"][0]), int(obj["ngram_range"][1])),
            max_features=int(obj["max_features"]),
            lowercase=bool(obj["lowercase"]),
        )


def iter_tokens(text: str) -> Iterator[tuple[str, int, int]]:
    """Yield (surface, start, end) with character offsets into text."""
    for match in _TOKEN_RE.finditer(text):
        yield match.group(), match.start(), match.end()


def tokenize_words(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def extract_ngrams(text: str, config: FeatureConfig) -> dict[str, int]:
    """Multiset of n-grams of text under config, as a gram -> count dict."""
    if config.lowercase:
        text = text.lower()
    lo, hi = config.ngram_range
    counts: dict[str, int] = {}
    if config.analyzer is Analyzer.CHAR:
        kernels.count_char_ngrams(text, lo, hi, counts)
    else:
        kernels.count_word_ngrams(tokenize_words(text), lo, hi, counts)
    return counts


@dataclass(frozen=True)
class FeatureSpace:
    """A fitted vocabulary with idf weights; immutable once fitted."""

    config: FeatureConfig
    vocabulary: dict[str, int]  # n-gram -> column index, dense 0..V-1
    idf: tuple[float, ...]
    fitted_on: str  # corpus content fingerprint

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "vocabulary": dict(sorted(self.vocabulary.items(), key=lambda kv: kv[1])),
            "idf": list(self.idf),
            "fitted_on": self.fitted_on,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureSpace":
        vocab = {str(g): int(i) for g, i in obj["vocabulary"].items()}
        return cls(
            config=FeatureConfig.from_json(obj["config"]),
            vocabulary=vocab,
            idf=tuple(float(x) for x in obj["idf"]),
            fitted_on=str(obj["fitted_on"]),
        )


@dataclass(frozen=True, slots=True)
class SparseVector:
    """L2-normalized sparse feature vector with strictly increasing indices."""

    indices: tuple[int, ...]
    values: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.indices)


EMPTY_VECTOR = SparseVector(indices=(), values=())


def fit_feature_space(docs: Sequence[Document], config: FeatureConfig) -> FeatureSpace:
    """Fit a vocabulary of the most frequent n-grams plus idf weights.

    The vocabulary holds the ``max_features`` n-grams with the highest total
    corpus count (ties broken lexicographically); column indices are assigned
    in lexicographic order of the selected n-grams.
    """
    if not docs:
        raise DataError("cannot fit a feature space on an empty corpus")
    totals: dict[str, int] = {}
    df: dict[str, int] = {}
    for doc in docs:
        counts = extract_ngrams(doc.text, config)
        for gram, count in counts.items():
            totals[gram] = totals.get(gram, 0) + count
            df[gram] = df.get(gram, 0) + 1
    if not totals:
        raise DataError("cannot fit a feature space: no non-empty documents")
    selected = sorted(totals, key=lambda g: (-totals[g], g))[: config.max_features]
    selected.sort()
    vocabulary = {gram: j for j, gram in enumerate(selected)}
    n_docs = len(docs)
    idf = tuple(log((1 + n_docs) / (1 + df[gram])) + 1.0 for gram in selected)
    return FeatureSpace(
        config=config,
        vocabulary=vocabulary,
        idf=idf,
        fitted_on=corpus_fingerprint(docs),
    )


def vectorize(text: str, space: FeatureSpace) -> SparseVector:
    """TF-IDF vector of text against a fitted space, L2-normalized.

    N-grams outside the vocabulary are ignored; a document with no
    in-vocabulary n-grams yields the (valid) empty vector.
    """
    counts = extract_ngrams(text, space.config)
    vocab = space.vocabulary
    idf = space.idf
    entries = sorted(
        (vocab[gram], count * idf[vocab[gram]])
        for gram, count in counts.items()
        if gram in vocab
    )
    if not entries:
        return EMPTY_VECTOR
    norm = sqrt(fsum(v * v for _, v in entries))
    return SparseVector(
        indices=tuple(j for j, _ in entries),
        values=tuple(v / norm for _, v in entries),
    )
