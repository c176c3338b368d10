"""Corpus cleaning: normalization, dedup, boilerplate stripping, IQR filter.

Pipeline order (see clean_corpus): HTML boilerplate is stripped first
(Web-domain documents only, while markup is still intact), then text is
Unicode-normalized, then null/empty/duplicate documents are dropped, then
per-domain token-count outliers are removed with inclusive Tukey fences.
Surviving documents keep their original relative order.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field, replace
from html.parser import HTMLParser
from math import sqrt
from typing import Callable, Sequence

import numpy as np

from varid.corpus import Document, Domain, Label
from varid.features import tokenize_words

Tokenizer = Callable[[str], list]

# Typographic characters that NFKD leaves alone, mapped to ASCII lookalikes.
_PUNCT_MAP = str.maketrans(
    {
        "‘": "'", "’": "'", "‚": "'", "‛": "'",
        "‹": "'", "›": "'",
        "“": '"', "”": '"', "„": '"', "‟": '"',
        "«": '"', "»": '"',
        "‐": "-", "‑": "-", "‒": "-", "–": "-",
        "—": "-", "―": "-", "−": "-",
        "⁄": "/",
    }
)


def normalize_text(text: str, keep_diacritics: bool = False) -> str:
    """Normalize Unicode (NFKD), map typographic punctuation to ASCII, drop
    control characters, and collapse whitespace runs to single spaces.

    With keep_diacritics=False combining marks are stripped as well, which
    reduces Portuguese text to ASCII. With keep_diacritics=True the result
    is recomposed (NFC) so accented characters survive intact. Idempotent
    under both settings.
    """
    decomposed = unicodedata.normalize("NFKD", text).translate(_PUNCT_MAP)
    kept = []
    for ch in decomposed:
        cat = unicodedata.category(ch)
        if cat == "Mn":
            if keep_diacritics:
                kept.append(ch)
            continue
        if cat in ("Cc", "Cf"):
            if ch in "\t\n\r\x0b\x0c":
                kept.append(" ")
            continue
        if cat in ("Zs", "Zl", "Zp"):
            kept.append(" ")
            continue
        kept.append(ch)
    collapsed = " ".join("".join(kept).split())
    return unicodedata.normalize("NFC", collapsed) if keep_diacritics else collapsed


@dataclass
class TokenStats:
    """Token-count summary for one group of documents (population std)."""

    doc_count: int = 0
    total_tokens: int = 0
    min: int | None = None
    max: int | None = None
    mean: float | None = None
    std: float | None = None

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "TokenStats":
        if not counts:
            return cls()
        mean = sum(counts) / len(counts)
        var = sum((c - mean) ** 2 for c in counts) / len(counts)
        return cls(
            doc_count=len(counts),
            total_tokens=sum(counts),
            min=min(counts),
            max=max(counts),
            mean=mean,
            std=sqrt(var),
        )

    def to_json(self) -> dict:
        return {
            "doc_count": self.doc_count,
            "total_tokens": self.total_tokens,
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "std": self.std,
        }


@dataclass
class CleaningReport:
    """Drop accounting plus per-domain/per-cell token statistics.

    Invariant: input_count == output_count + dropped_null_empty +
    dropped_duplicates + dropped_iqr. Stats cover surviving documents only.
    """

    input_count: int = 0
    output_count: int = 0
    dropped_null_empty: int = 0
    dropped_duplicates: int = 0
    dropped_iqr: int = 0
    unfiltered_domains: list[str] = field(default_factory=list)
    per_domain_token_stats: dict[str, TokenStats] = field(default_factory=dict)
    per_cell_token_stats: dict[str, TokenStats] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "input_count": self.input_count,
            "output_count": self.output_count,
            "dropped_null_empty": self.dropped_null_empty,
            "dropped_duplicates": self.dropped_duplicates,
            "dropped_iqr": self.dropped_iqr,
            "unfiltered_domains": list(self.unfiltered_domains),
            "per_domain_token_stats": {
                k: v.to_json() for k, v in self.per_domain_token_stats.items()
            },
            "per_cell_token_stats": {
                k: v.to_json() for k, v in self.per_cell_token_stats.items()
            },
        }


@dataclass(frozen=True, slots=True)
class DropCounts:
    null_empty: int = 0
    duplicates: int = 0


def drop_invalid(docs: Sequence[Document]) -> tuple[list[Document], DropCounts]:
    """Drop documents whose normalized text is empty and exact duplicates.

    Comparison keys are diacritics-preserving normalized texts, so documents
    differing only in whitespace runs or typographic punctuation count as
    duplicates. The first occurrence wins; order is preserved.
    """
    kept: list[Document] = []
    seen: set[str] = set()
    null_empty = 0
    duplicates = 0
    for doc in docs:
        key = normalize_text(doc.text, keep_diacritics=True)
        if not key:
            null_empty += 1
            continue
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        kept.append(doc)
    return kept, DropCounts(null_empty=null_empty, duplicates=duplicates)


# --- boilerplate stripping ----------------------------------------------------

# Function words used by the paragraph content heuristic.
PORTUGUESE_STOPWORDS = frozenset(
    """a à às ao aos as o os um uma uns umas de do da dos das dum duma em no na
    nos nas num numa por pelo pela pelos pelas para com sem sob sobre entre até
    desde contra após e ou mas nem que se não sim já mais menos muito pouco
    bem mal como quando onde quem qual quais cada todo toda todos todas outro
    outra outros outras este esta estes estas isso isto esse essa esses essas
    aquele aquela aqueles aquelas aquilo meu minha meus minhas teu tua seu sua
    seus suas nosso nossa nossos nossas eu tu ele ela nós vós eles elas você
    vocês me te lhe lhes é são foi foram era eram ser está estão estava tem
    têm tinha ter há havia ainda também só apenas depois antes agora sempre
    nunca aqui ali lá cá hoje ontem amanhã porque pois então assim enquanto
    embora durante mesmo outra vez """.split()
)

_BLOCK_TAGS = frozenset(
    """p div br li ul ol dl dt dd table thead tbody tr td th h1 h2 h3 h4 h5 h6
    section article aside header footer nav main blockquote pre form fieldset
    figure figcaption hr address""".split()
)
_SKIP_TAGS = frozenset({"script", "style", "noscript", "template"})

_MAX_LINK_DENSITY = 0.4
_MIN_STOPWORD_DENSITY = 0.05
_SHORT_PARAGRAPH_WORDS = 10


class _ParagraphExtractor(HTMLParser):
    """Split an HTML document into paragraphs, tracking linked-text length."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.paragraphs: list[tuple[str, int]] = []
        self._parts: list[str] = []
        self._link_chars = 0
        self._link_depth = 0
        self._skip_depth = 0
        self.saw_tag = False

    def _flush(self):
        text = "".join(self._parts)
        if text.strip():
            self.paragraphs.append((text, self._link_chars))
        self._parts = []
        self._link_chars = 0

    def handle_starttag(self, tag, attrs):
        self.saw_tag = True
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
        elif tag == "a":
            self._link_depth += 1
        if tag in _BLOCK_TAGS:
            self._flush()

    def handle_endtag(self, tag):
        self.saw_tag = True
        if tag in _SKIP_TAGS:
            self._skip_depth = max(0, self._skip_depth - 1)
        elif tag == "a":
            self._link_depth = max(0, self._link_depth - 1)
        if tag in _BLOCK_TAGS:
            self._flush()

    def handle_startendtag(self, tag, attrs):
        self.saw_tag = True
        if tag in _BLOCK_TAGS:
            self._flush()

    def handle_data(self, data):
        if self._skip_depth:
            return
        self._parts.append(data)
        if self._link_depth:
            self._link_chars += len(data)

    def close(self):
        super().close()
        self._flush()


def _paragraph_is_content(text: str, link_chars: int) -> bool:
    stripped = text.strip()
    link_density = link_chars / max(1, len(stripped))
    if link_density > _MAX_LINK_DENSITY:
        return False
    words = [t for t in tokenize_words(stripped) if any(c.isalnum() for c in t)]
    if len(words) < _SHORT_PARAGRAPH_WORDS:
        return True
    stop = sum(1 for w in words if w.lower() in PORTUGUESE_STOPWORDS)
    return stop / len(words) >= _MIN_STOPWORD_DENSITY


def strip_boilerplate(text: str) -> str:
    """Strip HTML markup and drop low-content paragraphs.

    Paragraphs are classified by link density and stopword density; text
    without any markup is returned unchanged. Unparseable markup degrades
    to plain tag stripping.
    """
    if "<" not in text:
        return text
    parser = _ParagraphExtractor()
    try:
        parser.feed(text)
        parser.close()
    except Exception:
        parser._flush()
    if not parser.saw_tag:
        return text
    kept = [
        " ".join(para.split())
        for para, link_chars in parser.paragraphs
        if _paragraph_is_content(para, link_chars)
    ]
    return "\n".join(kept)


# --- IQR outlier filter -------------------------------------------------------

MIN_IQR_GROUP = 4


def tukey_fences(counts: Sequence[int]) -> tuple[float, float]:
    """Inclusive keep-range [Q1 - 1.5*IQR, Q3 + 1.5*IQR] with linearly
    interpolated quartiles."""
    q1, q3 = np.quantile(np.asarray(counts, dtype=float), [0.25, 0.75])
    iqr = q3 - q1
    return q1 - 1.5 * iqr, q3 + 1.5 * iqr


def iqr_filter(
    docs: Sequence[Document], tokenizer: Tokenizer = tokenize_words
) -> tuple[list[Document], int, list[str]]:
    """Drop per-domain token-count outliers outside the Tukey fences.

    Domains with fewer than MIN_IQR_GROUP documents pass through unfiltered
    and are reported. Returns (survivors, dropped_count, unfiltered_domains);
    survivor order matches the input.
    """
    by_domain: dict[Domain, list[int]] = {}
    counts = []
    for i, doc in enumerate(docs):
        counts.append(len(tokenizer(doc.text)))
        by_domain.setdefault(doc.domain, []).append(i)
    keep = [True] * len(docs)
    unfiltered: list[str] = []
    for domain in sorted(by_domain, key=lambda d: d.value):
        indices = by_domain[domain]
        if len(indices) < MIN_IQR_GROUP:
            unfiltered.append(domain.value)
            continue
        lo, hi = tukey_fences([counts[i] for i in indices])
        for i in indices:
            if not (lo <= counts[i] <= hi):
                keep[i] = False
    survivors = [doc for i, doc in enumerate(docs) if keep[i]]
    return survivors, len(docs) - len(survivors), unfiltered


def corpus_stats(
    docs: Sequence[Document], tokenizer: Tokenizer = tokenize_words
) -> CleaningReport:
    """Token statistics per domain and per (domain, label) cell (Table-style)."""
    report = CleaningReport(input_count=len(docs), output_count=len(docs))
    by_domain: dict[Domain, list[int]] = {}
    by_cell: dict[tuple[Domain, Label], list[int]] = {}
    labels_seen = {Label.EP, Label.BP}
    for doc in docs:
        n = len(tokenizer(doc.text))
        by_domain.setdefault(doc.domain, []).append(n)
        by_cell.setdefault((doc.domain, doc.label), []).append(n)
        labels_seen.add(doc.label)
    for domain in sorted(by_domain, key=lambda d: d.value):
        report.per_domain_token_stats[domain.value] = TokenStats.from_counts(
            by_domain[domain]
        )
        for label in sorted(labels_seen, key=lambda lab: lab.value):
            cell = by_cell.get((domain, label), [])
            report.per_cell_token_stats[f"{domain.value}/{label.value}"] = (
                TokenStats.from_counts(cell)
            )
    return report


def clean_corpus(
    docs: Sequence[Document],
    keep_diacritics: bool = False,
    tokenizer: Tokenizer = tokenize_words,
) -> tuple[list[Document], CleaningReport]:
    """Run the full cleaning pipeline and return (documents, report)."""
    staged = []
    for doc in docs:
        text = doc.text
        if doc.domain is Domain.WEB:
            text = strip_boilerplate(text)
        staged.append(replace(doc, text=normalize_text(text, keep_diacritics)))
    deduped, drops = drop_invalid(staged)
    survivors, dropped_iqr, unfiltered = iqr_filter(deduped, tokenizer)
    report = corpus_stats(survivors, tokenizer)
    report.input_count = len(docs)
    report.output_count = len(survivors)
    report.dropped_null_empty = drops.null_empty
    report.dropped_duplicates = drops.duplicates
    report.dropped_iqr = dropped_iqr
    report.unfiltered_domains = unfiltered
    return survivors, report
