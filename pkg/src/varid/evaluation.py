"""Classification metrics, annotation agreement, and benchmark adapters.

Fleiss' Kappa is computed in exact rational arithmetic and converted to
float only at the boundary, so worked textbook values (e.g. -0.2) come out
exact. Macro-F1 is the unweighted mean of per-class F1 and is the headline
metric throughout; per-class figures are always reported alongside.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from varid.corpus import Document, Domain, Label, read_jsonl
from varid.errors import DataError, InputFormatError

UNDETERMINED = "Undetermined"
_ANNOTATION_LABELS = {"EP", "BP", UNDETERMINED}


# --- confusion matrix & F1 -----------------------------------------------------


def confusion_and_f1(
    preds: Sequence[Label | str], gold: Sequence[Label | str]
) -> dict:
    """Per-class precision/recall/F1 plus macro-F1 and accuracy for EP/BP.

    A class absent from the gold labels gets F1 = 0 and is listed under
    ``empty_gold_classes``.
    """
    if len(preds) != len(gold):
        raise DataError(f"length mismatch: {len(preds)} predictions, {len(gold)} gold")
    classes = ("EP", "BP")

    def as_value(lab) -> str:
        value = lab.value if isinstance(lab, Label) else str(lab)
        if value not in classes:
            raise DataError(f"labels must be EP or BP, got {value!r}")
        return value

    preds = [as_value(p) for p in preds]
    gold = [as_value(g) for g in gold]
    per_class = {}
    empty: list[str] = []
    correct = sum(1 for p, g in zip(preds, gold) if p == g)
    for cls in classes:
        tp = sum(1 for p, g in zip(preds, gold) if p == cls and g == cls)
        fp = sum(1 for p, g in zip(preds, gold) if p == cls and g != cls)
        fn = sum(1 for p, g in zip(preds, gold) if p != cls and g == cls)
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
        if support == 0:
            f1 = 0.0
            empty.append(cls)
        per_class[cls] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": support,
        }
    macro = sum(per_class[c]["f1"] for c in classes) / len(classes)
    return {
        "per_class": per_class,
        "macro_f1": macro,
        "accuracy": correct / len(gold) if gold else 0.0,
        "empty_gold_classes": empty,
    }


def macro_f1(preds: Sequence[Label | str], gold: Sequence[Label | str]) -> float:
    return confusion_and_f1(preds, gold)["macro_f1"]


# --- annotation agreement -------------------------------------------------------


@dataclass(frozen=True, slots=True)
class AnnotationItem:
    doc_id: str
    labels: tuple[str, ...]
    domain: str | None = None


@dataclass(frozen=True)
class AnnotationMatrix:
    """Fixed-rater annotation table with optional silver labels."""

    items: tuple[AnnotationItem, ...]
    annotator_count: int
    silver: Mapping[str, str] | None = None

    def __post_init__(self):
        if self.annotator_count < 2:
            raise DataError("need at least two annotators")
        for item in self.items:
            if len(item.labels) != self.annotator_count:
                raise DataError(
                    f"item {item.doc_id!r} has {len(item.labels)} labels, "
                    f"expected {self.annotator_count}"
                )
            for lab in item.labels:
                if lab not in _ANNOTATION_LABELS:
                    raise DataError(
                        f"item {item.doc_id!r}: annotation {lab!r} not in "
                        f"{sorted(_ANNOTATION_LABELS)}"
                    )


def read_annotations(path: str | Path) -> AnnotationMatrix:
    """Read annotation JSONL: {id, domain, annotations: [...], silver}."""
    items: list[AnnotationItem] = []
    silver: dict[str, str] = {}
    count: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputFormatError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            try:
                doc_id = obj["id"]
                annotations = tuple(obj["annotations"])
            except KeyError as exc:
                raise InputFormatError(f"line {lineno}: missing key {exc}") from exc
            if count is None:
                count = len(annotations)
            items.append(AnnotationItem(doc_id, annotations, obj.get("domain")))
            if obj.get("silver") is not None:
                silver[doc_id] = obj["silver"]
    if not items:
        raise DataError(f"{path}: no annotation items")
    return AnnotationMatrix(tuple(items), count or 0, silver or None)


def fleiss_kappa(matrix: AnnotationMatrix, exclude_undetermined: bool = False) -> float:
    """Fleiss (1971) chance-corrected agreement for a fixed rater count.

    kappa = (P_bar - Pe_bar) / (1 - Pe_bar) with per-item agreement
    P_i = (sum_j n_ij^2 - n) / (n (n - 1)). With exclude_undetermined,
    items where any annotator chose Undetermined are dropped first.
    Computed exactly in rational arithmetic.
    """
    items = list(matrix.items)
    if exclude_undetermined:
        items = [it for it in items if UNDETERMINED not in it.labels]
    if len(items) < 2:
        raise DataError(
            "need at least two items to compute Fleiss' Kappa"
            + (" after excluding Undetermined" if exclude_undetermined else "")
        )
    n = matrix.annotator_count
    categories = sorted({lab for it in items for lab in it.labels})
    n_items = len(items)
    p_bar = Fraction(0)
    totals = {cat: 0 for cat in categories}
    for item in items:
        counts = {cat: 0 for cat in categories}
        for lab in item.labels:
            counts[lab] += 1
            totals[lab] += 1
        p_bar += Fraction(sum(c * c for c in counts.values()) - n, n * (n - 1))
    p_bar /= n_items
    pe_bar = sum(
        (Fraction(totals[cat], n_items * n)) ** 2 for cat in categories
    )
    if pe_bar == 1:
        if p_bar == 1:
            return 1.0
        raise DataError("Fleiss' Kappa undefined: all mass on one category")
    return float((p_bar - pe_bar) / (1 - pe_bar))


def majority_and_accuracy(matrix: AnnotationMatrix) -> dict:
    """Majority rate, silver accuracy, and undetermined rate.

    majority_rate: fraction of items with a strict-majority label.
    silver_accuracy: over majority items with a silver label; a majority
    of Undetermined counts as correct for either silver label (such texts
    are valid in both varieties). None when no silver labels are present.
    undetermined_rate: fraction of items where at least one annotator
    chose Undetermined.
    """
    n_items = len(matrix.items)
    if n_items == 0:
        raise DataError("empty annotation matrix")
    majority_hits = 0
    undetermined_any = 0
    accuracy_num = 0
    accuracy_den = 0
    for item in matrix.items:
        if UNDETERMINED in item.labels:
            undetermined_any += 1
        majority = _strict_majority(item.labels)
        if majority is None:
            continue
        majority_hits += 1
        silver = (matrix.silver or {}).get(item.doc_id)
        if silver is not None:
            accuracy_den += 1
            if majority == silver or majority == UNDETERMINED:
                accuracy_num += 1
    return {
        "majority_rate": majority_hits / n_items,
        "silver_accuracy": accuracy_num / accuracy_den if accuracy_den else None,
        "undetermined_rate": undetermined_any / n_items,
    }


def _strict_majority(labels: Sequence[str]) -> str | None:
    threshold = len(labels) / 2
    for cand in set(labels):
        if labels.count(cand) > threshold:
            return cand
    return None


@dataclass
class AgreementReport:
    """The agreement metric bundle, overall and per domain."""

    fleiss_kappa: float | None
    fleiss_kappa_wo_undetermined: float | None
    majority_rate: float
    silver_accuracy: float | None
    undetermined_rate: float
    per_domain: dict[str, "AgreementReport"] = field(default_factory=dict)

    def to_json(self) -> dict:
        obj = {
            "fleiss_kappa": self.fleiss_kappa,
            "fleiss_kappa_wo_undetermined": self.fleiss_kappa_wo_undetermined,
            "majority_rate": self.majority_rate,
            "silver_accuracy": self.silver_accuracy,
            "undetermined_rate": self.undetermined_rate,
        }
        if self.per_domain:
            obj["per_domain"] = {k: v.to_json() for k, v in self.per_domain.items()}
        return obj


def agreement_report(matrix: AnnotationMatrix) -> AgreementReport:
    """Full agreement suite, overall and broken down by item domain."""
    report = _agreement_single(matrix)
    domains = sorted({it.domain for it in matrix.items if it.domain is not None})
    for domain in domains:
        sub_items = tuple(it for it in matrix.items if it.domain == domain)
        sub = AnnotationMatrix(sub_items, matrix.annotator_count, matrix.silver)
        report.per_domain[domain] = _agreement_single(sub)
    return report


def _agreement_single(matrix: AnnotationMatrix) -> AgreementReport:
    try:
        kappa = fleiss_kappa(matrix)
    except DataError:
        kappa = None
    try:
        kappa_wo = fleiss_kappa(matrix, exclude_undetermined=True)
    except DataError:
        kappa_wo = None
    rates = majority_and_accuracy(matrix)
    return AgreementReport(
        fleiss_kappa=kappa,
        fleiss_kappa_wo_undetermined=kappa_wo,
        majority_rate=rates["majority_rate"],
        silver_accuracy=rates["silver_accuracy"],
        undetermined_rate=rates["undetermined_rate"],
    )


def format_agreement_table(report: AgreementReport) -> str:
    """Aligned plain-text rendering of an AgreementReport."""
    rows: list[tuple[str, str, str]] = []

    def add(scope: str, rep: AgreementReport):
        fmt = lambda x: "-" if x is None else f"{x:.2f}"
        rows.append((scope, "Fleiss' Kappa", fmt(rep.fleiss_kappa)))
        rows.append((scope, "Fleiss' Kappa wo/u", fmt(rep.fleiss_kappa_wo_undetermined)))
        rows.append((scope, "Majority Rate", fmt(rep.majority_rate)))
        rows.append((scope, "Silver Accuracy", fmt(rep.silver_accuracy)))
        rows.append((scope, "Undetermined Rate", fmt(rep.undetermined_rate)))

    add("Overall", report)
    for domain, sub in report.per_domain.items():
        add(domain, sub)
    w0 = max(len(r[0]) for r in rows)
    w1 = max(len(r[1]) for r in rows)
    lines = [f"{scope:<{w0}}  {metric:<{w1}}  {value:>6}" for scope, metric, value in rows]
    return "\n".join(lines)


# --- benchmark ingestion --------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Pair:
    """One aligned EP/BP pair from a paired benchmark."""

    pair_id: str
    bucket: str
    ep_id: str
    bp_id: str


@dataclass
class IngestResult:
    documents: list[Document]
    counts: dict[str, int]
    pairs: list[Pair] = field(default_factory=list)


_DSLTL_LABELS = {"PT-PT": Label.EP, "PT-BR": Label.BP}
_DSLTL_BOTH = {"PT", "Both", "Both or Neither"}


def ingest_dsltl(path: str | Path) -> IngestResult:
    """Read a DSL-TL TSV (id, sentence, label) benchmark file.

    Rows labeled "Both" (bare "PT") are excluded: the training label set
    has no such class. Variety tags map PT-PT -> EP and PT-BR -> BP;
    anything else raises InputFormatError quoting the offending string.
    """
    docs: list[Document] = []
    counts = {"EP": 0, "BP": 0, "dropped_both": 0}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise InputFormatError(
                    f"{path}: line {lineno}: expected 3 tab-separated columns, got {len(row)}"
                )
            doc_id, text, label_str = (col.strip() for col in row)
            if lineno == 1 and label_str.lower() in ("label", "labels"):
                continue  # header row
            if label_str in _DSLTL_BOTH:
                counts["dropped_both"] += 1
                continue
            if label_str not in _DSLTL_LABELS:
                raise InputFormatError(
                    f"{path}: line {lineno}: unknown label string {label_str!r}"
                )
            label = _DSLTL_LABELS[label_str]
            counts[label.value] += 1
            docs.append(
                Document(id=doc_id or f"dsltl-{lineno}", text=text, domain=Domain.UNKNOWN,
                         label=label, source="DSL-TL")
            )
    return IngestResult(documents=docs, counts=counts)


def ingest_frmt(manifest_path: str | Path) -> IngestResult:
    """Read FRMT-style paired translation files via a bucket manifest.

    The manifest is JSON: {"buckets": [{"name", "ep", "bp"}, ...]} with
    side-file paths relative to the manifest. Each side file holds one
    document per line; line i of the EP file pairs with line i of the BP
    file. Unmatched tail lines become unpaired documents.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{manifest_path}: malformed manifest ({exc.msg})") from exc
    buckets = manifest.get("buckets")
    if not isinstance(buckets, list) or not buckets:
        raise InputFormatError(f"{manifest_path}: manifest needs a non-empty 'buckets' list")
    docs: list[Document] = []
    pairs: list[Pair] = []
    counts = {"EP": 0, "BP": 0, "pairs": 0}
    for entry in buckets:
        try:
            name = entry["name"]
            ep_file = manifest_path.parent / entry["ep"]
            bp_file = manifest_path.parent / entry["bp"]
        except (KeyError, TypeError) as exc:
            raise InputFormatError(
                f"{manifest_path}: each bucket needs 'name', 'ep' and 'bp'"
            ) from exc
        ep_lines = _read_side(ep_file)
        bp_lines = _read_side(bp_file)
        for i in range(max(len(ep_lines), len(bp_lines))):
            pair_id = f"{name}-{i:05d}"
            ep_id = f"{pair_id}-EP"
            bp_id = f"{pair_id}-BP"
            if i < len(ep_lines):
                docs.append(Document(id=ep_id, text=ep_lines[i], domain=Domain.UNKNOWN,
                                     label=Label.EP, source=f"FRMT/{name}"))
                counts["EP"] += 1
            if i < len(bp_lines):
                docs.append(Document(id=bp_id, text=bp_lines[i], domain=Domain.UNKNOWN,
                                     label=Label.BP, source=f"FRMT/{name}"))
                counts["BP"] += 1
            if i < len(ep_lines) and i < len(bp_lines):
                pairs.append(Pair(pair_id=pair_id, bucket=name, ep_id=ep_id, bp_id=bp_id))
                counts["pairs"] += 1
    return IngestResult(documents=docs, counts=counts, pairs=pairs)


def _read_side(path: Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def ingest_benchmark(path: str | Path, fmt: str) -> IngestResult:
    """Dispatch on benchmark format: "dsltl", "frmt", or "jsonl"."""
    fmt = fmt.lower()
    if fmt == "dsltl":
        return ingest_dsltl(path)
    if fmt == "frmt":
        return ingest_frmt(path)
    if fmt == "jsonl":
        docs = read_jsonl(path)
        counts: dict[str, int] = {}
        for doc in docs:
            counts[doc.label.value] = counts.get(doc.label.value, 0) + 1
        return IngestResult(documents=docs, counts=counts)
    raise InputFormatError(f"unknown benchmark format {fmt!r}")


def paired_bucket_analysis(
    preds: Mapping[str, Label | str], pairs: Iterable[Pair]
) -> dict:
    """Collision rate of paired predictions, overall and per bucket.

    same_label_pair_rate is the fraction of pairs whose two sides received
    the same predicted label -- the failure mode of entity-reliant models
    on translation pairs. Per bucket, macro-F1 over the member documents
    (gold label = side) is reported alongside.
    """
    by_bucket: dict[str, list[Pair]] = {}
    for pair in pairs:
        by_bucket.setdefault(pair.bucket, []).append(pair)
    if not by_bucket:
        raise DataError("no pairs supplied")

    def label_of(doc_id: str, pair_id: str) -> str:
        try:
            pred = preds[doc_id]
        except KeyError:
            raise DataError(
                f"pair {pair_id!r}: no prediction for document {doc_id!r}"
            ) from None
        return pred.value if isinstance(pred, Label) else str(pred)

    total_pairs = 0
    total_same = 0
    per_bucket = {}
    for bucket in sorted(by_bucket):
        members = by_bucket[bucket]
        same = 0
        bucket_preds: list[str] = []
        bucket_gold: list[str] = []
        for pair in members:
            ep_pred = label_of(pair.ep_id, pair.pair_id)
            bp_pred = label_of(pair.bp_id, pair.pair_id)
            if ep_pred == bp_pred:
                same += 1
            bucket_preds.extend((ep_pred, bp_pred))
            bucket_gold.extend(("EP", "BP"))
        scores = confusion_and_f1(bucket_preds, bucket_gold)
        per_bucket[bucket] = {
            "pairs": len(members),
            "same_label_pair_rate": same / len(members),
            "macro_f1": scores["macro_f1"],
            "per_class": scores["per_class"],
        }
        total_pairs += len(members)
        total_same += same
    return {
        "same_label_pair_rate": total_same / total_pairs,
        "pairs": total_pairs,
        "per_bucket": per_bucket,
    }
