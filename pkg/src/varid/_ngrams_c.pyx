# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled n-gram counting kernels.

Semantics must match varid._ngrams_py exactly: counting is pure integer and
string work, so the two backends are bit-identical and interchangeable.
"""


def count_char_ngrams(str text, int lo, int hi, dict out):
    """Add counts of all character n-grams of text for lo <= n <= hi to out."""
    cdef Py_ssize_t length = len(text)
    cdef Py_ssize_t n, i
    cdef object gram, prev
    for n in range(lo, hi + 1):
        for i in range(length - n + 1):
            gram = text[i : i + n]
            prev = out.get(gram)
            if prev is None:
                out[gram] = 1
            else:
                out[gram] = prev + 1
    return out


def count_word_ngrams(list tokens, int lo, int hi, dict out):
    """Add counts of token n-grams (space-joined) for lo <= n <= hi to out."""
    cdef Py_ssize_t length = len(tokens)
    cdef Py_ssize_t n, i
    cdef object gram, prev
    cdef str sep = " "
    for n in range(lo, hi + 1):
        for i in range(length - n + 1):
            if n == 1:
                gram = tokens[i]
            else:
                gram = sep.join(tokens[i : i + n])
            prev = out.get(gram)
            if prev is None:
                out[gram] = 1
            else:
                out[gram] = prev + 1
    return out
