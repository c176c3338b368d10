"""Build script for the optional compiled n-gram kernel.

The package works without the extension: varid.kernels falls back to the
pure-Python implementation when the compiled module is absent.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("varid._ngrams_c", ["src/varid/_ngrams_c.pyx"])],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
