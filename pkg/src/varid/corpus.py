"""Document data model, JSONL corpus I/O, silver-labeling rules, and splits.

The on-disk corpus format is JSONL: one JSON object per line with keys
``id``/``text``/``domain``/``label``/``source``. ``domain`` and ``label``
use the exact enum strings below; ``source`` is optional origin metadata
(URL, publication name) consumed by the silver-labeling rules.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence, TextIO
from urllib.parse import urlsplit

from varid.errors import DataError, InputFormatError
from varid.util import keyed_rng


class Domain(str, Enum):
    JOURNALISTIC = "Journalistic"
    LITERATURE = "Literature"
    LEGAL = "Legal"
    POLITICS = "Politics"
    WEB = "Web"
    SOCIAL_MEDIA = "SocialMedia"
    UNKNOWN = "Unknown"


class Label(str, Enum):
    EP = "EP"
    BP = "BP"
    UNDETERMINED = "Undetermined"
    UNLABELED = "Unlabeled"


TRAINABLE_LABELS = (Label.EP, Label.BP)


def parse_domain(value: str) -> Domain:
    return _parse_enum(Domain, value, "domain")


def parse_label(value: str) -> Label:
    return _parse_enum(Label, value, "label")


def _parse_enum(enum_cls, value: str, kind: str):
    try:
        return enum_cls(value)
    except ValueError:
        pass
    folded = value.casefold().replace(" ", "").replace("_", "").replace("-", "")
    for member in enum_cls:
        if member.value.casefold() == folded:
            return member
    valid = ", ".join(m.value for m in enum_cls)
    raise InputFormatError(f"unknown {kind} {value!r} (expected one of: {valid})")


@dataclass(frozen=True, slots=True)
class Document:
    """One text unit. Immutable; all pipeline stages produce new instances."""

    id: str
    text: str
    domain: Domain = Domain.UNKNOWN
    label: Label = Label.UNLABELED
    source: str | None = None


def parse_jsonl(stream: Iterable[str]) -> list[Document]:
    """Parse a line-oriented JSONL corpus; blank lines are skipped.

    Missing ``domain`` defaults to Unknown, missing ``label`` to Unlabeled.
    Raises InputFormatError with the 1-based line number on malformed lines
    and on duplicate ids.
    """
    docs: list[Document] = []
    seen: set[str] = set()
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputFormatError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise InputFormatError(f"line {lineno}: expected a JSON object")
        try:
            doc_id = obj["id"]
            text = obj["text"]
        except KeyError as exc:
            raise InputFormatError(f"line {lineno}: missing required key {exc}") from exc
        if not isinstance(doc_id, str) or not doc_id:
            raise InputFormatError(f"line {lineno}: id must be a non-empty string")
        if not isinstance(text, str):
            raise InputFormatError(f"line {lineno}: text must be a string")
        if doc_id in seen:
            raise InputFormatError(f"line {lineno}: duplicate document id {doc_id!r}")
        seen.add(doc_id)
        try:
            domain = parse_domain(obj["domain"]) if "domain" in obj else Domain.UNKNOWN
            label = parse_label(obj["label"]) if "label" in obj else Label.UNLABELED
        except InputFormatError as exc:
            raise InputFormatError(f"line {lineno}: {exc}") from exc
        source = obj.get("source")
        if source is not None and not isinstance(source, str):
            raise InputFormatError(f"line {lineno}: source must be a string")
        docs.append(Document(id=doc_id, text=text, domain=domain, label=label, source=source))
    return docs


def read_jsonl(path: str | Path) -> list[Document]:
    with open(path, encoding="utf-8") as fh:
        return parse_jsonl(fh)


def document_to_json(doc: Document) -> str:
    obj = {"id": doc.id, "text": doc.text, "domain": doc.domain.value, "label": doc.label.value}
    if doc.source is not None:
        obj["source"] = doc.source
    return json.dumps(obj, ensure_ascii=False)


def write_jsonl(docs: Iterable[Document], out: TextIO) -> None:
    for doc in docs:
        out.write(document_to_json(doc))
        out.write("\n")


# --- silver labeling ---------------------------------------------------------

_MATCHERS = ("source-equals", "source-suffix", "tld")


@dataclass(frozen=True, slots=True)
class LabelRule:
    matcher: str  # one of _MATCHERS
    pattern: str
    label: Label

    def matches(self, source: str) -> bool:
        if self.matcher == "source-equals":
            return source == self.pattern
        if self.matcher == "source-suffix":
            return source.endswith(self.pattern)
        if self.matcher == "tld":
            return _host_of(source).endswith(self.pattern)
        raise ValueError(f"unknown matcher {self.matcher!r}")


def _host_of(source: str) -> str:
    """Hostname of a URL-ish source, lowercased; bare strings pass through."""
    if "://" in source:
        host = urlsplit(source).netloc
    else:
        host = source.split("/", 1)[0]
    return host.rsplit(":", 1)[0].lower() if ":" in host else host.lower()


@dataclass(frozen=True)
class LabelRuleSet:
    """Ordered silver-labeling rules; the first matching rule wins."""

    rules: tuple[LabelRule, ...]
    default: Label = Label.UNLABELED

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "LabelRuleSet":
        """Parse the rules file: TAB-separated ``matcher<TAB>pattern<TAB>label``
        lines in priority order, ``#`` comments, and an optional
        ``default<TAB>label`` line."""
        rules: list[LabelRule] = []
        default = Label.UNLABELED
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f.strip() for f in line.split("\t")]
            if fields[0] == "default":
                if len(fields) != 2:
                    raise InputFormatError(f"line {lineno}: default takes exactly one label")
                default = parse_label(fields[1])
                continue
            if len(fields) != 3:
                raise InputFormatError(
                    f"line {lineno}: expected matcher<TAB>pattern<TAB>label"
                )
            matcher, pattern, label_str = fields
            if matcher not in _MATCHERS:
                raise InputFormatError(
                    f"line {lineno}: unknown matcher {matcher!r} "
                    f"(expected one of: {', '.join(_MATCHERS)})"
                )
            if matcher == "tld" and not pattern.startswith("."):
                pattern = "." + pattern
            try:
                label = parse_label(label_str)
            except InputFormatError as exc:
                raise InputFormatError(f"line {lineno}: {exc}") from exc
            rules.append(LabelRule(matcher, pattern, label))
        return cls(rules=tuple(rules), default=default)

    @classmethod
    def from_file(cls, path: str | Path) -> "LabelRuleSet":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)


def silver_label(doc: Document, rules: LabelRuleSet) -> Document:
    """Assign a label from source metadata; already-labeled documents pass through."""
    if doc.label is not Label.UNLABELED:
        return doc
    if doc.source is not None:
        for rule in rules.rules:
            if rule.matches(doc.source):
                return replace(doc, label=rule.label)
    return replace(doc, label=rules.default)


# --- protocol splits ---------------------------------------------------------


@dataclass(frozen=True)
class ProtocolSplits:
    """Per-domain balanced train/validation splits for protocol step one."""

    step1_train: dict[Domain, list[Document]]
    step1_val: dict[Domain, list[Document]]
    seed: int

    @property
    def domains(self) -> list[Domain]:
        return sorted(self.step1_train, key=lambda d: d.value)


def _cells(corpus: Sequence[Document]) -> dict[tuple[Domain, Label], list[Document]]:
    cells: dict[tuple[Domain, Label], list[Document]] = {}
    for doc in corpus:
        if doc.label not in TRAINABLE_LABELS:
            raise DataError(
                f"document {doc.id!r} has label {doc.label.value}; "
                "only EP/BP documents may enter training operations"
            )
        if doc.domain is Domain.UNKNOWN:
            raise DataError(f"document {doc.id!r} has Unknown domain")
        cells.setdefault((doc.domain, doc.label), []).append(doc)
    return cells


def build_protocol_splits(
    corpus: Sequence[Document],
    train_per_domain: int = 8000,
    val_per_domain: int = 1000,
    seed: int = 0,
    allow_shrink: bool = False,
) -> ProtocolSplits:
    """Sample per-domain balanced train/val splits without replacement.

    Each domain contributes ``train_per_domain`` training documents and
    ``val_per_domain`` validation documents, half per label and disjoint.
    Domains with too few documents raise DataError unless ``allow_shrink``
    is set, in which case both splits shrink proportionally (still balanced).
    Deterministic given ``seed``; independent of input order.
    """
    if train_per_domain % 2 or val_per_domain % 2:
        raise DataError("train_per_domain and val_per_domain must be even (half per label)")
    cells = _cells(corpus)
    domains = sorted({d for d, _ in cells}, key=lambda d: d.value)
    for domain in domains:
        for label in TRAINABLE_LABELS:
            if not cells.get((domain, label)):
                raise DataError(f"domain {domain.value} has no {label.value} documents")

    train_half = train_per_domain // 2
    val_half = val_per_domain // 2
    need = train_half + val_half
    step1_train: dict[Domain, list[Document]] = {}
    step1_val: dict[Domain, list[Document]] = {}
    for domain in domains:
        available = min(len(cells[(domain, label)]) for label in TRAINABLE_LABELS)
        t_half, v_half = train_half, val_half
        if available < need:
            short = min(
                TRAINABLE_LABELS, key=lambda lab: len(cells[(domain, lab)])
            )
            if not allow_shrink:
                raise DataError(
                    f"domain {domain.value} label {short.value}: "
                    f"{len(cells[(domain, short)])} documents available, "
                    f"{need} needed per label"
                )
            v_half = max(1, available * val_half // need)
            t_half = available - v_half
            if t_half < 1:
                raise DataError(
                    f"domain {domain.value} label {short.value}: too few documents "
                    "even after shrinking"
                )
        train_docs: list[Document] = []
        val_docs: list[Document] = []
        for label in TRAINABLE_LABELS:
            pool = sorted(cells[(domain, label)], key=lambda d: d.id)
            rng = keyed_rng(seed, "protocol-split", domain.value, label.value)
            order = rng.permutation(len(pool))
            train_docs.extend(pool[i] for i in order[:t_half])
            val_docs.extend(pool[i] for i in order[t_half : t_half + v_half])
        step1_train[domain] = train_docs
        step1_val[domain] = val_docs
    return ProtocolSplits(step1_train=step1_train, step1_val=step1_val, seed=seed)


def undersample_balanced(corpus: Sequence[Document], seed: int = 0) -> list[Document]:
    """Reduce every (domain, label) cell to the size of the smallest cell.

    Sampling is without replacement and keyed per cell, so the result does
    not depend on input order beyond the preserved relative order of the
    surviving documents.
    """
    cells = _cells(corpus)
    domains = {d for d, _ in cells}
    for domain in sorted(domains, key=lambda d: d.value):
        for label in TRAINABLE_LABELS:
            if not cells.get((domain, label)):
                raise DataError(
                    f"empty cell: domain {domain.value}, label {label.value}"
                )
    m = min(len(docs) for docs in cells.values())
    keep_ids: set[str] = set()
    for (domain, label), docs in cells.items():
        pool = sorted(docs, key=lambda d: d.id)
        rng = keyed_rng(seed, "undersample", domain.value, label.value)
        chosen = rng.permutation(len(pool))[:m]
        keep_ids.update(pool[i].id for i in chosen)
    return [doc for doc in corpus if doc.id in keep_ids]


def filter_trainable(
    corpus: Iterable[Document], log: Callable[[str], None] | None = None
) -> list[Document]:
    """Drop documents that may not be trained on (Undetermined/Unlabeled/Unknown)."""
    kept = []
    dropped = 0
    for doc in corpus:
        if doc.label in TRAINABLE_LABELS and doc.domain is not Domain.UNKNOWN:
            kept.append(doc)
        else:
            dropped += 1
    if dropped and log is not None:
        log(f"excluded {dropped} non-trainable document(s)")
    return kept
