import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from varid.corpus import Document, Domain, Label
from varid.features import Analyzer, FeatureConfig, FeatureSpace


def make_doc(doc_id, text, domain=Domain.WEB, label=Label.EP, source=None):
    return Document(id=doc_id, text=text, domain=domain, label=label, source=source)


def space_of(n_features, config=None):
    """Minimal fitted feature space with unit idf, for model-level tests."""
    vocabulary = {f"g{j:03d}": j for j in range(n_features)}
    return FeatureSpace(
        config=config or FeatureConfig(Analyzer.WORD, (1, 1), max(n_features, 1), True),
        vocabulary=vocabulary,
        idf=tuple(1.0 for _ in range(n_features)),
        fitted_on="test",
    )


@pytest.fixture
def balanced_corpus():
    """Two domains, both labels, enough docs for small splits."""
    docs = []
    for domain in (Domain.WEB, Domain.LEGAL):
        for label in (Label.EP, Label.BP):
            for i in range(20):
                docs.append(
                    make_doc(
                        f"{domain.value}-{label.value}-{i}",
                        f"texto numero {i} do corpus",
                        domain,
                        label,
                    )
                )
    return docs
