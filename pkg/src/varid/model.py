"""Multinomial Naive Bayes over TF-IDF vectors: train, predict, persist.

Training statistics are accumulated with exact summation (math.fsum), so
the fitted model is bit-identical under any permutation of the training
documents. The artifact is a single versioned JSON document with floats
written at 17 significant digits and a content hash for integrity.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from math import fsum, log
from pathlib import Path
from typing import Sequence

import numpy as np

from varid.corpus import Label
from varid.errors import DataError, ModelFormatError, ModelIntegrityError
from varid.features import FeatureSpace, SparseVector
from varid.tagging import DelexPolicy
from varid.util import atomic_write_text, canonical_json

FORMAT_VERSION = 1
CLASSES = (Label.EP, Label.BP)


@dataclass(frozen=True)
class NBModel:
    """Fitted classifier; immutable, safe for concurrent prediction."""

    log_prior: np.ndarray  # shape (2,), classes in CLASSES order
    log_likelihood: np.ndarray  # shape (2, V)
    alpha: float
    feature_space: FeatureSpace
    delex_policy: DelexPolicy | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def classes(self) -> tuple[Label, Label]:
        return CLASSES


def train_nb(
    vectors: Sequence[SparseVector],
    labels: Sequence[Label],
    alpha: float = 1.0,
    feature_space: FeatureSpace | None = None,
    delex_policy: DelexPolicy | None = None,
    metadata: dict | None = None,
) -> NBModel:
    """Fit class log-priors and smoothed per-column log-likelihoods.

    log_prior_c   = ln(n_c / n)
    log_likelihood_{c,j} = ln((S_{c,j} + alpha) / (S_c + alpha * V))

    where S_{c,j} sums column j over class-c vectors and V is the
    vocabulary size.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if feature_space is None:
        raise ValueError("feature_space is required")
    if len(vectors) != len(labels):
        raise DataError("vectors and labels must have equal lengths")
    if len(vectors) < 2:
        raise DataError("need at least two training documents")
    present = set(labels)
    if present != set(CLASSES):
        missing = [c.value for c in CLASSES if c not in present]
        extra = [lab.value for lab in present if lab not in CLASSES]
        if extra:
            raise DataError(f"labels outside EP/BP in training data: {extra}")
        raise DataError(f"training data has a single class; missing: {missing}")

    n_features = len(feature_space.vocabulary)
    # per-class, per-column value lists -> exact order-independent sums
    column_values: tuple[dict[int, list[float]], ...] = ({}, {})
    class_counts = [0, 0]
    for vec, label in zip(vectors, labels):
        c = CLASSES.index(label)
        class_counts[c] += 1
        cols = column_values[c]
        for j, v in zip(vec.indices, vec.values):
            if v < 0:
                raise DataError("feature values must be non-negative")
            if j >= n_features:
                raise DataError(f"vector column {j} outside the feature space")
            cols.setdefault(j, []).append(v)

    n_total = len(vectors)
    log_prior = np.array([log(class_counts[c] / n_total) for c in range(2)])
    log_likelihood = np.empty((2, n_features))
    for c in range(2):
        sums = {j: fsum(vals) for j, vals in column_values[c].items()}
        total = fsum(sums[j] for j in sorted(sums))
        denom = log(total + alpha * n_features)
        baseline = log(alpha) - denom
        log_likelihood[c, :] = baseline
        for j, s in sums.items():
            log_likelihood[c, j] = log(s + alpha) - denom
    return NBModel(
        log_prior=log_prior,
        log_likelihood=log_likelihood,
        alpha=alpha,
        feature_space=feature_space,
        delex_policy=delex_policy,
        metadata=dict(metadata or {}),
    )


def predict(model: NBModel, vector: SparseVector) -> tuple[Label, dict[str, float]]:
    """Classify one vector; returns (label, log-posteriors by class name).

    Scores are log_prior + sum(value * log_likelihood) over the sparse
    entries; posteriors are normalized with log-sum-exp. Exact ties break
    toward EP for reproducible evaluation. An empty vector is classified
    from the priors alone.
    """
    scores = model.log_prior.copy()
    ll = model.log_likelihood
    for j, v in zip(vector.indices, vector.values):
        scores[0] += v * ll[0, j]
        scores[1] += v * ll[1, j]
    norm = np.logaddexp(scores[0], scores[1])
    posteriors = {
        CLASSES[0].value: float(scores[0] - norm),
        CLASSES[1].value: float(scores[1] - norm),
    }
    label = CLASSES[0] if scores[0] >= scores[1] else CLASSES[1]
    return label, posteriors


def predict_batch(
    model: NBModel, vectors: Sequence[SparseVector]
) -> list[tuple[Label, dict[str, float]]]:
    return [predict(model, vec) for vec in vectors]


# --- persistence ---------------------------------------------------------------


def _artifact_payload(model: NBModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "metadata": model.metadata,
        "alpha": float(model.alpha),
        "classes": [c.value for c in CLASSES],
        "log_prior": [float(x) for x in model.log_prior],
        "feature_space": model.feature_space.to_json(),
        "log_likelihood": [[float(x) for x in row] for row in model.log_likelihood],
        "delex_policy": model.delex_policy.to_json() if model.delex_policy else None,
    }


def serialize_model(model: NBModel) -> str:
    payload = _artifact_payload(model)
    body = canonical_json(payload)
    payload["content_hash"] = _hash_body(body)
    return canonical_json(payload) + "\n"


def _hash_body(body: str) -> str:
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def save_model(model: NBModel, path: str | Path) -> None:
    atomic_write_text(path, serialize_model(model))


def load_model(path: str | Path) -> NBModel:
    """Load an artifact written by save_model; verifies version and hash."""
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelIntegrityError(f"{path}: truncated or not a model artifact") from exc
    if not isinstance(obj, dict) or "format_version" not in obj:
        raise ModelIntegrityError(f"{path}: missing format_version")
    version = obj["format_version"]
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: artifact has format version {version!r}, "
            f"this tool reads version {FORMAT_VERSION}"
        )
    stored_hash = obj.pop("content_hash", None)
    if stored_hash is None:
        raise ModelIntegrityError(f"{path}: missing content hash")
    # Recompute the hash from the parsed values; floats re-serialize to the
    # same 17-significant-digit strings, so any corruption is caught.
    space = FeatureSpace.from_json(obj["feature_space"])
    policy = (
        DelexPolicy.from_json(obj["delex_policy"]) if obj.get("delex_policy") else None
    )
    model = NBModel(
        log_prior=np.array([float(x) for x in obj["log_prior"]]),
        log_likelihood=np.array(
            [[float(x) for x in row] for row in obj["log_likelihood"]]
        ),
        alpha=float(obj["alpha"]),
        feature_space=space,
        delex_policy=policy,
        metadata=dict(obj.get("metadata") or {}),
    )
    body = canonical_json(_artifact_payload(model))
    if _hash_body(body) != stored_hash:
        raise ModelIntegrityError(f"{path}: content hash mismatch (corrupted artifact)")
    return model
