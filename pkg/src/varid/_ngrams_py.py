"""Pure-Python n-gram counting kernels.

Reference implementation for varid._ngrams_c; both must produce identical
dictionaries for identical inputs (enforced by tests/test_kernels.py).
"""

from __future__ import annotations


def count_char_ngrams(text: str, lo: int, hi: int, out: dict) -> dict:
    """Add counts of all character n-grams of text for lo <= n <= hi to out."""
    length = len(text)
    for n in range(lo, hi + 1):
        for i in range(length - n + 1):
            gram = text[i : i + n]
            out[gram] = out.get(gram, 0) + 1
    return out


def count_word_ngrams(tokens: list, lo: int, hi: int, out: dict) -> dict:
    """Add counts of token n-grams (space-joined) for lo <= n <= hi to out."""
    length = len(tokens)
    for n in range(lo, hi + 1):
        for i in range(length - n + 1):
            gram = tokens[i] if n == 1 else " ".join(tokens[i : i + n])
            out[gram] = out.get(gram, 0) + 1
    return out
