"""Seeding, hashing, and serialization helpers.

All randomness in the package flows through two primitives:

* ``keyed_rng`` -- a PCG64 generator keyed by an explicit 64-bit seed plus
  string context parts, used for sampling (splits, under-sampling).
* ``mask_draw`` -- a keyed-BLAKE2 counter RNG returning one uniform in
  [0, 1) per (seed, doc_id, token_index), used for delexicalization.

Both are stable across platforms and independent of processing order, so
parallel execution cannot change any output.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from typing import Iterable

import numpy as np

_U64 = 2**64


def stable_u64(text: str) -> int:
    """Map a string to a stable 64-bit integer (BLAKE2b, platform-independent)."""
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def keyed_rng(seed: int, *context: str) -> np.random.Generator:
    """PCG64 generator keyed by ``seed`` and any number of context strings."""
    key = [seed % _U64] + [stable_u64(part) for part in context]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def mask_draw(seed: int, doc_id: str, index: int) -> float:
    """Uniform draw in [0, 1) for one token, independent of all other tokens."""
    h = hashlib.blake2b(digest_size=8, key=(seed % _U64).to_bytes(8, "little"))
    h.update(doc_id.encode("utf-8"))
    h.update(b"\x00")
    h.update(index.to_bytes(8, "little", signed=False))
    return int.from_bytes(h.digest(), "little") / _U64


def corpus_fingerprint(docs: Iterable) -> str:
    """SHA-256 over (id, text) pairs; identifies corpus content, not order."""
    h = hashlib.sha256()
    for doc in sorted(docs, key=lambda d: d.id):
        h.update(doc.id.encode("utf-8"))
        h.update(b"\x1f")
        h.update(doc.text.encode("utf-8"))
        h.update(b"\x1e")
    return h.hexdigest()


def canonical_json(obj) -> str:
    """Serialize to JSON with floats at 17 significant digits.

    Key order is the dict insertion order of the caller, making the output
    byte-stable. Floats round-trip losslessly through json.loads.
    """
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            raise ValueError("non-finite float is not serializable: %r" % obj)
        if obj == 0.0:
            return "0"
        return format(obj, ".17g")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        parts = (
            json.dumps(str(k), ensure_ascii=False) + ":" + canonical_json(v)
            for k, v in obj.items()
        )
        return "{" + ",".join(parts) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write_text(path: str | os.PathLike, data: str) -> None:
    """Write a file via temp-and-rename so readers never see partial content."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
