"""Backend selection for the n-gram counting kernels.

The compiled Cython extension is preferred when it built successfully;
otherwise the pure-Python twin is used. Set VARID_PURE_PYTHON=1 to force
the fallback (useful for benchmarking; see benchmarks/bench_ngrams.py).
Both backends produce identical results, so the choice never affects
any artifact.
"""

from __future__ import annotations

import os

from varid import _ngrams_py

if os.environ.get("VARID_PURE_PYTHON"):
    _impl = _ngrams_py
    BACKEND = "python"
else:
    try:
        from varid import _ngrams_c as _impl  # type: ignore[no-redef]

        BACKEND = "c"
    except ImportError:
        _impl = _ngrams_py
        BACKEND = "python"

count_char_ngrams = _impl.count_char_ngrams
count_word_ngrams = _impl.count_word_ngrams
