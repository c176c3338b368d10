"""Two-step cross-domain training protocol.

Step one trains one model per hyperparameter point on a single domain and
scores it on the validation splits of every *other* domain; the point with
the best cross-domain mean picks the hyperparameters. Step two retrains on
all domains combined (undersampled to balance) with those hyperparameters.

Delexicalization is itself a hyperparameter: each sweep point carries the
(p_pos, p_ner) masking pair applied to the training split only. Validation
text is never modified; run_step1 asserts that.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from math import fsum
from pathlib import Path
from typing import Callable, Mapping, Sequence

from varid.corpus import (
    Document,
    Domain,
    ProtocolSplits,
    document_to_json,
    undersample_balanced,
)
from varid.errors import DataError, InputFormatError, ProtocolError
from varid.evaluation import macro_f1
from varid.features import Analyzer, FeatureConfig, fit_feature_space, vectorize
from varid.model import NBModel, predict, train_nb
from varid.tagging import DelexPolicy, TaggedToken, delexicalize
from varid.util import atomic_write_text, corpus_fingerprint

TagMap = Mapping[str, Sequence[TaggedToken]]


@dataclass(frozen=True)
class SweepPoint:
    """One grid point: masking pair + feature configuration + smoothing."""

    p_pos: float
    p_ner: float
    features: FeatureConfig
    alpha: float = 1.0

    def key(self) -> tuple:
        lo, hi = self.features.ngram_range
        return (
            self.p_pos,
            self.p_ner,
            self.features.analyzer.value,
            lo,
            hi,
            self.features.max_features,
            self.features.lowercase,
            self.alpha,
        )

    def to_json(self) -> dict:
        return {
            "p_pos": self.p_pos,
            "p_ner": self.p_ner,
            "features": self.features.to_json(),
            "alpha": self.alpha,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SweepPoint":
        return cls(
            p_pos=float(obj["p_pos"]),
            p_ner=float(obj["p_ner"]),
            features=FeatureConfig.from_json(obj["features"]),
            alpha=float(obj["alpha"]),
        )


@dataclass(frozen=True)
class SweepRecord:
    """Step-one result for one point trained on one domain."""

    point: SweepPoint
    train_domain: Domain
    per_heldout_f1: dict[Domain, float]
    mean_f1: float

    def to_json(self) -> dict:
        return {
            "point": self.point.to_json(),
            "train_domain": self.train_domain.value,
            "per_heldout_f1": {d.value: f for d, f in self.per_heldout_f1.items()},
            "mean_f1": self.mean_f1,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SweepRecord":
        return cls(
            point=SweepPoint.from_json(obj["point"]),
            train_domain=Domain(obj["train_domain"]),
            per_heldout_f1={
                Domain(d): float(f) for d, f in obj["per_heldout_f1"].items()
            },
            mean_f1=float(obj["mean_f1"]),
        )


# --- grid ----------------------------------------------------------------------

DEFAULT_P_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


def build_grid(
    p_pos: Sequence[float] = DEFAULT_P_GRID,
    p_ner: Sequence[float] = DEFAULT_P_GRID,
    analyzers: Sequence[Analyzer] = (Analyzer.WORD, Analyzer.CHAR),
    ngram_ranges: Sequence[tuple[int, int]] = ((1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (1, 10)),
    max_features: Sequence[int] = (100, 500, 1000, 5000, 10000, 50000, 100000),
    lowercase: Sequence[bool] = (True, False),
    alphas: Sequence[float] = (1.0,),
) -> list[SweepPoint]:
    """Cartesian grid in a fixed nesting order (delex outermost).

    The defaults reproduce the full sweep: 36 (p_pos, p_ner) pairs by
    2 * 6 * 7 * 2 = 168 feature configurations.
    """
    points = []
    for pp, pn, analyzer, ngrams, mf, lc, alpha in product(
        p_pos, p_ner, analyzers, ngram_ranges, max_features, lowercase, alphas
    ):
        config = FeatureConfig(
            analyzer=Analyzer(analyzer),
            ngram_range=(int(ngrams[0]), int(ngrams[1])),
            max_features=int(mf),
            lowercase=bool(lc),
        )
        points.append(SweepPoint(p_pos=float(pp), p_ner=float(pn), features=config, alpha=float(alpha)))
    return points


def load_grid(path: str | Path) -> list[SweepPoint]:
    """Read grid axes from a TOML file; omitted axes use the full defaults.

    Expected shape::

        [delex]
        p_pos = [0.0, 0.2]
        p_ner = [0.0, 1.0]
        [features]
        analyzer = ["Word"]
        ngram_range = [[1, 2]]
        max_features = [5000]
        lowercase = [true]
        [model]
        alpha = [1.0]
    """
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise InputFormatError(f"{path}: invalid TOML ({exc})") from exc
    delex = data.get("delex", {})
    feats = data.get("features", {})
    mdl = data.get("model", {})
    try:
        return build_grid(
            p_pos=delex.get("p_pos", DEFAULT_P_GRID),
            p_ner=delex.get("p_ner", DEFAULT_P_GRID),
            analyzers=[Analyzer(a) for a in feats.get("analyzer", ("Word", "Char"))],
            ngram_ranges=[tuple(r) for r in feats.get("ngram_range", ((1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (1, 10)))],
            max_features=feats.get("max_features", (100, 500, 1000, 5000, 10000, 50000, 100000)),
            lowercase=feats.get("lowercase", (True, False)),
            alphas=mdl.get("alpha", (1.0,)),
        )
    except (ValueError, TypeError) as exc:
        raise InputFormatError(f"{path}: bad grid axis ({exc})") from exc


# --- step one ------------------------------------------------------------------


def _delexicalized_training_docs(
    docs: Sequence[Document], tags: TagMap, policy: DelexPolicy
) -> list[Document]:
    masked = []
    for doc in docs:
        tokens = tags.get(doc.id)
        if tokens is None:
            raise DataError(f"no tags available for document {doc.id!r}")
        masked.append(replace(doc, text=delexicalize(doc.text, tokens, policy, doc.id)))
    return masked


def train_point(
    train_docs: Sequence[Document],
    point: SweepPoint,
    tags: TagMap,
    delex_seed: int = 0,
    metadata: dict | None = None,
) -> NBModel:
    """Delexicalize, fit features, and train one model for one grid point."""
    policy = DelexPolicy(p_pos=point.p_pos, p_ner=point.p_ner, seed=delex_seed)
    masked = _delexicalized_training_docs(train_docs, tags, policy)
    space = fit_feature_space(masked, point.features)
    vectors = [vectorize(doc.text, space) for doc in masked]
    labels = [doc.label for doc in masked]
    return train_nb(
        vectors,
        labels,
        alpha=point.alpha,
        feature_space=space,
        delex_policy=policy,
        metadata=metadata,
    )


def evaluate_on(model: NBModel, docs: Sequence[Document]) -> float:
    """Macro-F1 of the model on unaltered documents."""
    preds = [predict(model, vectorize(doc.text, model.feature_space))[0] for doc in docs]
    return macro_f1(preds, [doc.label for doc in docs])


def _score_point(
    point: SweepPoint,
    train_docs: Sequence[Document],
    val_by_domain: dict[Domain, list[Document]],
    train_domain: Domain,
    tags: TagMap,
    delex_seed: int,
) -> SweepRecord:
    model = train_point(train_docs, point, tags, delex_seed)
    per_heldout: dict[Domain, float] = {}
    for domain in sorted(val_by_domain, key=lambda d: d.value):
        if domain == train_domain:
            raise ProtocolError(
                f"step one must not evaluate on the training domain {domain.value}"
            )
        per_heldout[domain] = evaluate_on(model, val_by_domain[domain])
    mean = fsum(per_heldout.values()) / len(per_heldout)
    return SweepRecord(
        point=point, train_domain=train_domain, per_heldout_f1=per_heldout, mean_f1=mean
    )


# Worker-process state, installed once per worker by _init_worker.
_WORKER: dict = {}


def _init_worker(train_docs, val_by_domain, train_domain, tags, delex_seed):
    _WORKER.update(
        train_docs=train_docs,
        val_by_domain=val_by_domain,
        train_domain=train_domain,
        tags=tags,
        delex_seed=delex_seed,
    )


def _run_point_in_worker(indexed_point):
    index, point = indexed_point
    record = _score_point(
        point,
        _WORKER["train_docs"],
        _WORKER["val_by_domain"],
        _WORKER["train_domain"],
        _WORKER["tags"],
        _WORKER["delex_seed"],
    )
    return index, record


def run_step1(
    splits: ProtocolSplits,
    grid: Sequence[SweepPoint],
    train_domain: Domain,
    tags: TagMap,
    delex_seed: int = 0,
    eval_domains: Sequence[Domain] | None = None,
    workers: int = 1,
    checkpoint_path: str | Path | None = None,
    log: Callable[[str], None] | None = None,
) -> list[SweepRecord]:
    """Leave-one-domain-out sweep: train on one domain, score on the rest.

    Only the training split is delexicalized; every validation document is
    evaluated with its text byte-for-byte unmodified. Results come back in
    grid order regardless of worker scheduling, and each completed point is
    checkpointed (atomic write) so an interrupted sweep resumes.
    """
    if not grid:
        raise DataError("empty sweep grid")
    if train_domain not in splits.step1_train:
        raise DataError(f"no training split for domain {train_domain.value}")
    if eval_domains is None:
        eval_domains = [d for d in splits.domains if d != train_domain]
    elif train_domain in eval_domains:
        raise ProtocolError(
            f"evaluation on the training domain {train_domain.value} requested"
        )
    if not eval_domains:
        raise DataError("no held-out domains to evaluate on")
    missing = [d.value for d in eval_domains if d not in splits.step1_val]
    if missing:
        raise DataError(f"no validation split for domain(s): {', '.join(missing)}")
    val_by_domain = {d: splits.step1_val[d] for d in eval_domains}
    train_docs = splits.step1_train[train_domain]

    done: dict[int, SweepRecord] = {}
    if checkpoint_path is not None and Path(checkpoint_path).exists():
        for record in read_sweep_records(checkpoint_path):
            for i, point in enumerate(grid):
                if record.point == point and record.train_domain == train_domain:
                    done[i] = record
        if done and log:
            log(f"resuming sweep: {len(done)}/{len(grid)} points already done")

    pending = [(i, p) for i, p in enumerate(grid) if i not in done]

    def checkpoint():
        if checkpoint_path is not None:
            write_sweep_records(
                [done[i] for i in sorted(done)], checkpoint_path
            )

    if workers <= 1:
        for i, point in pending:
            done[i] = _score_point(
                point, train_docs, val_by_domain, train_domain, tags, delex_seed
            )
            checkpoint()
            if log:
                log(f"point {i + 1}/{len(grid)}: mean F1 {done[i].mean_f1:.4f}")
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(train_docs, val_by_domain, train_domain, tags, delex_seed),
        ) as pool:
            for i, record in pool.map(_run_point_in_worker, pending):
                done[i] = record
                checkpoint()
                if log:
                    log(f"point {i + 1}/{len(grid)}: mean F1 {record.mean_f1:.4f}")
    return [done[i] for i in sorted(done)]


def write_sweep_records(records: Sequence[SweepRecord], path: str | Path) -> None:
    lines = [json.dumps(r.to_json(), ensure_ascii=False) for r in records]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_sweep_records(path: str | Path) -> list[SweepRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(SweepRecord.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise InputFormatError(f"{path}: line {lineno}: bad sweep record ({exc})") from exc
    return records


# --- aggregation and selection ---------------------------------------------------


def aggregate_delex_surface(
    records: Sequence[SweepRecord], mode: str = "best"
) -> dict[tuple[float, float], float]:
    """Collapse sweep records onto the (p_pos, p_ner) surface.

    For each pair, every full point's mean_f1 is first averaged across the
    train domains it was run on; "best" (default) then takes the best
    feature configuration per pair, "mean" marginalizes over them.
    """
    if mode not in ("best", "mean"):
        raise ValueError(f"unknown aggregation mode {mode!r}")
    if not records:
        raise DataError("no sweep records to aggregate")
    by_point: dict[tuple, list[float]] = {}
    points: dict[tuple, SweepPoint] = {}
    for record in records:
        key = record.point.key()
        by_point.setdefault(key, []).append(record.mean_f1)
        points[key] = record.point
    per_point = {key: fsum(vals) / len(vals) for key, vals in by_point.items()}
    surface: dict[tuple[float, float], list[float]] = {}
    for key, score in per_point.items():
        pair = (points[key].p_pos, points[key].p_ner)
        surface.setdefault(pair, []).append(score)
    if mode == "best":
        return {pair: max(scores) for pair, scores in surface.items()}
    return {pair: fsum(scores) / len(scores) for pair, scores in surface.items()}


def select_best(records: Sequence[SweepRecord]) -> SweepPoint:
    """Pick the point with the highest mean of mean_f1 across train domains.

    Ties break toward the simpler model: smaller max_features, narrower
    n-gram range, lower p_pos, lower p_ner, then a fixed canonical order on
    the remaining fields.
    """
    if not records:
        raise DataError("no sweep records to select from")
    by_point: dict[tuple, list[float]] = {}
    points: dict[tuple, SweepPoint] = {}
    for record in records:
        key = record.point.key()
        by_point.setdefault(key, []).append(record.mean_f1)
        points[key] = record.point

    def rank(key: tuple):
        point = points[key]
        score = fsum(by_point[key]) / len(by_point[key])
        lo, hi = point.features.ngram_range
        return (
            -score,
            point.features.max_features,
            hi - lo,
            point.p_pos,
            point.p_ner,
            point.features.analyzer.value,
            point.features.lowercase,
            point.alpha,
            lo,
        )

    return points[min(by_point, key=rank)]


# --- step two and export ----------------------------------------------------------


def train_step2(
    corpus: Sequence[Document],
    point: SweepPoint,
    seed: int,
    tags: TagMap,
    delex_seed: int = 0,
    created_at: str | None = None,
    tool_version: str | None = None,
) -> NBModel:
    """Final training on all domains combined with the selected point.

    The corpus is undersampled so every (domain, label) cell is equally
    represented, then delexicalized with the point's masking pair. The
    artifact metadata records the full provenance: the point, both seeds,
    the corpus fingerprint, and the domains trained on.
    """
    balanced = undersample_balanced(corpus, seed)
    domains = sorted({doc.domain.value for doc in balanced})
    metadata = {
        "created_at": created_at or "",
        "corpus_fingerprint": corpus_fingerprint(corpus),
        "tool_version": tool_version or _package_version(),
        "domains": domains,
        "sample_seed": seed,
        "delex_seed": delex_seed,
        "point": point.to_json(),
    }
    return train_point(balanced, point, tags, delex_seed, metadata=metadata)


def _package_version() -> str:
    from varid import __version__

    return __version__


def export_delexicalized(
    docs: Sequence[Document],
    policy: DelexPolicy,
    tags: TagMap,
    path: str | Path,
) -> int:
    """Write a masked copy of the corpus as JSONL, preserving ids and labels.

    Deterministic: re-exporting with the same seed produces identical bytes.
    Raises DataError naming the first document that lacks tags.
    """
    lines = []
    for doc in docs:
        tokens = tags.get(doc.id)
        if tokens is None:
            raise DataError(f"no tags available for document {doc.id!r}")
        masked = delexicalize(doc.text, tokens, policy, doc.id)
        lines.append(document_to_json(replace(doc, text=masked)))
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))
    return len(lines)


def progress_logger(stream=None) -> Callable[[str], None]:
    stream = stream or sys.stderr

    def log(message: str) -> None:
        print(message, file=stream, flush=True)

    return log
