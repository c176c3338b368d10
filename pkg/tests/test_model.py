import math

import numpy as np
import pytest

from varid.corpus import Label
from varid.errors import DataError, ModelFormatError, ModelIntegrityError
from varid.features import Analyzer, FeatureConfig, SparseVector, fit_feature_space, vectorize
from varid.model import load_model, predict, save_model, serialize_model, train_nb
from varid.tagging import DelexPolicy
from varid.util import keyed_rng

from conftest import make_doc, space_of
from oracles import dense_nb, dense_nb_posteriors


def unit(j):
    return SparseVector(indices=(j,), values=(1.0,))


class TestTrainNB:
    def test_two_doc_hand_values(self):
        # 1 EP + 1 BP doc, distinct unit features, alpha=1, V=2
        model = train_nb(
            [unit(0), unit(1)], [Label.EP, Label.BP], alpha=1.0, feature_space=space_of(2)
        )
        assert model.log_likelihood[0, 0] == pytest.approx(math.log(2 / 3), abs=1e-15)
        assert model.log_likelihood[0, 1] == pytest.approx(math.log(1 / 3), abs=1e-15)
        assert model.log_likelihood[1, 1] == pytest.approx(math.log(2 / 3), abs=1e-15)

    def test_balanced_priors(self):
        model = train_nb(
            [unit(0), unit(1)], [Label.EP, Label.BP], feature_space=space_of(2)
        )
        assert model.log_prior[0] == pytest.approx(math.log(0.5), abs=1e-15)
        assert model.log_prior[1] == pytest.approx(math.log(0.5), abs=1e-15)
        assert math.exp(model.log_prior[0]) + math.exp(model.log_prior[1]) == pytest.approx(1.0)

    def test_likelihoods_normalize(self):
        rng = keyed_rng(4, "nb-norm")
        vectors, labels = _random_training_set(rng, n_docs=12, n_features=9)
        model = train_nb(vectors, labels, alpha=0.7, feature_space=space_of(9))
        for c in range(2):
            assert abs(np.exp(model.log_likelihood[c]).sum() - 1.0) < 1e-9

    def test_single_class_rejected(self):
        with pytest.raises(DataError, match="single class"):
            train_nb([unit(0), unit(1)], [Label.EP, Label.EP], feature_space=space_of(2))

    def test_nonpositive_alpha_rejected(self):
        with pytest.raises(ValueError):
            train_nb(
                [unit(0), unit(1)], [Label.EP, Label.BP], alpha=0.0, feature_space=space_of(2)
            )

    def test_permutation_bit_identical(self):
        rng = keyed_rng(5, "nb-perm")
        vectors, labels = _random_training_set(rng, n_docs=30, n_features=12)
        model_a = train_nb(vectors, labels, feature_space=space_of(12))
        order = rng.permutation(len(vectors))
        model_b = train_nb(
            [vectors[i] for i in order], [labels[i] for i in order], feature_space=space_of(12)
        )
        assert model_a.log_likelihood.tobytes() == model_b.log_likelihood.tobytes()
        assert model_a.log_prior.tobytes() == model_b.log_prior.tobytes()

    def test_duplicated_document_shifts_stats_per_formula(self):
        vectors = [unit(0), unit(1)]
        labels = [Label.EP, Label.BP]
        doubled = train_nb(
            vectors + [unit(0)], labels + [Label.EP], feature_space=space_of(2)
        )
        # EP now has S_0 = 2: ln((2+1)/(2+2)) and prior ln(2/3)
        assert doubled.log_likelihood[0, 0] == pytest.approx(math.log(3 / 4), abs=1e-15)
        assert doubled.log_prior[0] == pytest.approx(math.log(2 / 3), abs=1e-15)


def _random_training_set(rng, n_docs, n_features):
    vectors, labels = [], []
    for i in range(n_docs):
        nnz = int(rng.integers(0, min(6, n_features))) + 1
        indices = sorted(int(j) for j in rng.choice(n_features, size=nnz, replace=False))
        raw = [float(rng.random()) + 0.05 for _ in indices]
        norm = math.sqrt(sum(v * v for v in raw))
        vectors.append(
            SparseVector(indices=tuple(indices), values=tuple(v / norm for v in raw))
        )
        labels.append(Label.EP if i % 2 == 0 else Label.BP)
    return vectors, labels


class TestPredict:
    def test_empty_vector_prior_tie_breaks_to_ep(self):
        model = train_nb(
            [unit(0), unit(1)], [Label.EP, Label.BP], feature_space=space_of(2)
        )
        label, posteriors = predict(model, SparseVector((), ()))
        assert label is Label.EP
        assert math.exp(posteriors["EP"]) == pytest.approx(0.5)
        assert math.exp(posteriors["BP"]) == pytest.approx(0.5)

    def test_two_doc_model_classifies_its_features(self):
        model = train_nb(
            [unit(0), unit(1)], [Label.EP, Label.BP], feature_space=space_of(2)
        )
        assert predict(model, unit(0))[0] is Label.EP
        assert predict(model, unit(1))[0] is Label.BP

    def test_scaling_never_changes_argmax_with_equal_priors(self):
        rng = keyed_rng(6, "nb-scale")
        vectors, labels = _random_training_set(rng, n_docs=20, n_features=8)
        model = train_nb(vectors, labels, feature_space=space_of(8))
        for _ in range(50):
            nnz = int(rng.integers(1, 5))
            indices = sorted(int(j) for j in rng.choice(8, size=nnz, replace=False))
            values = tuple(float(rng.random()) + 0.01 for _ in indices)
            vec = SparseVector(tuple(indices), values)
            k = float(rng.random()) * 5 + 0.1
            scaled = SparseVector(tuple(indices), tuple(v * k for v in values))
            assert predict(model, vec)[0] is predict(model, scaled)[0]

    def test_matches_dense_oracle_within_1e_9(self):
        rng = keyed_rng(7, "nb-oracle")
        for _ in range(40):
            n_features = int(rng.integers(2, 30))
            n_docs = int(rng.integers(4, 20))
            vectors, labels = _random_training_set(rng, n_docs, n_features)
            alpha = float(rng.random()) + 0.1
            model = train_nb(vectors, labels, alpha=alpha, feature_space=space_of(n_features))
            rows = [dict(zip(v.indices, v.values)) for v in vectors]
            log_prior, log_likelihood = dense_nb(
                rows, [lab.value for lab in labels], n_features, alpha
            )
            for c, cls in enumerate(("EP", "BP")):
                assert model.log_prior[c] == pytest.approx(log_prior[cls], abs=1e-9)
                for j in range(n_features):
                    assert model.log_likelihood[c, j] == pytest.approx(
                        log_likelihood[cls][j], abs=1e-9
                    )
            probe = vectors[0]
            _, posteriors = predict(model, probe)
            oracle = dense_nb_posteriors(
                dict(zip(probe.indices, probe.values)), log_prior, log_likelihood
            )
            for cls in ("EP", "BP"):
                assert posteriors[cls] == pytest.approx(oracle[cls], abs=1e-9)


class TestPersistence:
    def _trained_model(self):
        docs = [
            make_doc("a", "autocarro comboio equipa", label=Label.EP),
            make_doc("b", "ônibus trem equipe", label=Label.BP),
            make_doc("c", "autocarro golo", label=Label.EP),
            make_doc("d", "ônibus gol", label=Label.BP),
        ]
        space = fit_feature_space(docs, FeatureConfig(Analyzer.WORD, (1, 2), 50, True))
        vectors = [vectorize(d.text, space) for d in docs]
        return train_nb(
            vectors,
            [d.label for d in docs],
            feature_space=space,
            delex_policy=DelexPolicy(p_pos=0.2, p_ner=0.6, seed=3),
            metadata={"created_at": "2024-01-01T00:00:00+00:00", "corpus_fingerprint": "x", "tool_version": "0.1.0"},
        )

    def test_round_trip_preserves_predictions(self, tmp_path):
        model = self._trained_model()
        path = tmp_path / "m.json"
        save_model(model, path)
        loaded = load_model(path)
        rng = keyed_rng(8, "roundtrip")
        vocab_words = list(model.feature_space.vocabulary)
        for _ in range(100):
            words = [vocab_words[int(k)] for k in rng.integers(0, len(vocab_words), size=4)]
            vec = vectorize(" ".join(words), model.feature_space)
            before = predict(model, vec)
            after = predict(loaded, vec)
            assert before[0] is after[0]
            assert before[1] == after[1]

    def test_save_is_deterministic_and_stable(self, tmp_path):
        model = self._trained_model()
        blob_a = serialize_model(model)
        blob_b = serialize_model(model)
        assert blob_a == blob_b
        path = tmp_path / "m.json"
        save_model(model, path)
        resaved = tmp_path / "m2.json"
        save_model(load_model(path), resaved)
        assert path.read_bytes() == resaved.read_bytes()

    def test_version_mismatch_names_both_versions(self, tmp_path):
        model = self._trained_model()
        path = tmp_path / "m.json"
        save_model(model, path)
        text = path.read_text(encoding="utf-8").replace(
            '"format_version":1', '"format_version":0', 1
        )
        path.write_text(text, encoding="utf-8")
        with pytest.raises(ModelFormatError, match="0.*1|version 0"):
            load_model(path)

    def test_truncated_file_is_integrity_error(self, tmp_path):
        model = self._trained_model()
        path = tmp_path / "m.json"
        save_model(model, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(ModelIntegrityError):
            load_model(path)

    def test_tampered_value_is_integrity_error(self, tmp_path):
        model = self._trained_model()
        path = tmp_path / "m.json"
        save_model(model, path)
        text = path.read_text(encoding="utf-8").replace('"alpha":1', '"alpha":2', 1)
        path.write_text(text, encoding="utf-8")
        with pytest.raises(ModelIntegrityError, match="hash"):
            load_model(path)

    def test_seventeen_significant_digits(self, tmp_path):
        model = self._trained_model()
        blob = serialize_model(model)
        # a likelihood like ln(2/3) must appear with full precision
        sample = f"{model.log_likelihood[0, 0]:.17g}"
        assert sample in blob
