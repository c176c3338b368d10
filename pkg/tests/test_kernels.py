"""The compiled kernel and the pure-Python fallback must agree exactly."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varid import _ngrams_py, kernels

_compiled = pytest.importorskip("varid._ngrams_c", reason="compiled kernel not built")


def test_a_backend_was_selected():
    assert kernels.BACKEND in ("c", "python")


@given(
    text=st.text(max_size=120),
    lo=st.integers(min_value=1, max_value=4),
    width=st.integers(min_value=0, max_value=6),
)
@settings(max_examples=300, deadline=None)
def test_char_ngrams_identical(text, lo, width):
    hi = lo + width
    assert _compiled.count_char_ngrams(text, lo, hi, {}) == _ngrams_py.count_char_ngrams(
        text, lo, hi, {}
    )


@given(
    tokens=st.lists(st.text(alphabet="abcõáç", min_size=1, max_size=6), max_size=40),
    lo=st.integers(min_value=1, max_value=3),
    width=st.integers(min_value=0, max_value=4),
)
@settings(max_examples=300, deadline=None)
def test_word_ngrams_identical(tokens, lo, width):
    hi = lo + width
    assert _compiled.count_word_ngrams(
        tokens, lo, hi, {}
    ) == _ngrams_py.count_word_ngrams(tokens, lo, hi, {})


def test_accumulates_into_existing_dict():
    for impl in (_compiled, _ngrams_py):
        out = {"a": 5}
        impl.count_char_ngrams("aa", 1, 1, out)
        assert out == {"a": 7}


def test_range_longer_than_text():
    for impl in (_compiled, _ngrams_py):
        assert impl.count_char_ngrams("ab", 1, 10, {}) == {"a": 1, "b": 1, "ab": 1}


def test_pure_python_env_override(tmp_path):
    import subprocess
    import sys

    code = (
        "import os; os.environ['VARID_PURE_PYTHON']='1'; "
        "from varid import kernels; print(kernels.BACKEND)"
    )
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "python"
