#!/usr/bin/env python3
"""Benchmark the compiled n-gram kernel against the pure-Python fallback.

The kernels are the hot inner loop of feature fitting during sweeps, so
this is the number that matters when deciding whether the extension built
correctly. Run after `pip install -e . --no-build-isolation`:

    python benchmarks/bench_ngrams.py
"""

from __future__ import annotations

import time

from varid import _ngrams_py
from varid.corpus import build_protocol_splits
from varid.features import Analyzer, FeatureConfig, fit_feature_space, tokenize_words
from varid.synth import build_confounded_corpus

try:
    from varid import _ngrams_c
except ImportError:
    _ngrams_c = None


def _timed(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_kernels(texts: list[str]) -> None:
    tokenized = [tokenize_words(t) for t in texts]
    cases = [
        ("char (1,3)", lambda impl: [impl.count_char_ngrams(t, 1, 3, {}) for t in texts]),
        ("char (1,10)", lambda impl: [impl.count_char_ngrams(t, 1, 10, {}) for t in texts]),
        ("word (1,2)", lambda impl: [impl.count_word_ngrams(t, 1, 2, {}) for t in tokenized]),
        ("word (1,5)", lambda impl: [impl.count_word_ngrams(t, 1, 5, {}) for t in tokenized]),
    ]
    print(f"{'kernel':<12} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for name, runner in cases:
        py_time = _timed(lambda: runner(_ngrams_py))
        if _ngrams_c is None:
            print(f"{name:<12} {py_time * 1e3:>8.1f}ms {'n/a':>10} {'-':>8}")
            continue
        c_time = _timed(lambda: runner(_ngrams_c))
        sample_py = runner(_ngrams_py)[0]
        sample_c = runner(_ngrams_c)[0]
        assert sample_py == sample_c, "backends disagree"
        print(
            f"{name:<12} {py_time * 1e3:>8.1f}ms {c_time * 1e3:>8.1f}ms "
            f"{py_time / c_time:>7.2f}x"
        )


def bench_fit(corpus_docs) -> None:
    import os

    config = FeatureConfig(Analyzer.CHAR, (1, 5), 50000, True)
    start = time.perf_counter()
    fit_feature_space(corpus_docs, config)
    total = time.perf_counter() - start
    backend = "python" if os.environ.get("VARID_PURE_PYTHON") else "selected"
    print(f"\nfit_feature_space char(1,5) x {len(corpus_docs)} docs [{backend}]: {total:.2f}s")


def main() -> None:
    corpus = build_confounded_corpus(seed=1, docs_per_domain=500, n_pairs=10)
    texts = [doc.text for doc in corpus.documents]
    print(f"{len(texts)} documents, ~{sum(len(t) for t in texts) // len(texts)} chars each\n")
    bench_kernels(texts)
    splits = build_protocol_splits(corpus.documents, 400, 100, seed=0)
    bench_fit(splits.step1_train[next(iter(splits.step1_train))])


if __name__ == "__main__":
    main()
