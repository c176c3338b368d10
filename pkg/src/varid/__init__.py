"""Cross-domain language variety identification for European vs. Brazilian
Portuguese: corpus cleaning, silver labeling, probabilistic delexicalization,
TF-IDF n-gram Naive Bayes models, and the two-step cross-domain training
protocol."""

__version__ = "0.1.0"

from varid.corpus import Document, Domain, Label  # noqa: F401
from varid.errors import VaridError  # noqa: F401
