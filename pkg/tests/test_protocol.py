import json

import pytest

from varid.corpus import Domain, build_protocol_splits
from varid.errors import DataError, ProtocolError
from varid.features import Analyzer, FeatureConfig, fit_feature_space, vectorize
from varid.model import save_model, train_nb
from varid.protocol import (
    SweepPoint,
    SweepRecord,
    aggregate_delex_surface,
    build_grid,
    evaluate_on,
    export_delexicalized,
    load_grid,
    read_sweep_records,
    run_step1,
    select_best,
    train_step2,
    write_sweep_records,
)
from varid.synth import build_confounded_corpus
from varid.tagging import DelexPolicy

WORD_CONFIG = FeatureConfig(Analyzer.WORD, (1, 2), 2000, True)


@pytest.fixture(scope="module")
def small_world():
    corpus = build_confounded_corpus(seed=77, docs_per_domain=160, n_pairs=40)
    splits = build_protocol_splits(
        corpus.documents, train_per_domain=120, val_per_domain=40, seed=2
    )
    return corpus, splits


def point(p_pos=0.0, p_ner=0.0, config=WORD_CONFIG, alpha=1.0):
    return SweepPoint(p_pos=p_pos, p_ner=p_ner, features=config, alpha=alpha)


class TestGrid:
    def test_paper_grid_shape(self):
        grid = build_grid()
        assert len(grid) == 36 * 168
        pairs = {(p.p_pos, p.p_ner) for p in grid}
        assert len(pairs) == 36
        configs = {p.features for p in grid}
        assert len(configs) == 168

    def test_load_grid_toml(self, tmp_path):
        path = tmp_path / "grid.toml"
        path.write_text(
            """
[delex]
p_pos = [0.0, 0.2]
p_ner = [0.0]
[features]
analyzer = ["Word"]
ngram_range = [[1, 2]]
max_features = [500]
lowercase = [true]
[model]
alpha = [1.0]
""",
            encoding="utf-8",
        )
        grid = load_grid(path)
        assert len(grid) == 2
        assert grid[0].p_pos == 0.0 and grid[1].p_pos == 0.2
        assert grid[0].features.max_features == 500


class TestRunStep1:
    def test_heldout_domains_exclude_train(self, small_world):
        corpus, splits = small_world
        records = run_step1(splits, [point()], Domain.WEB, corpus.tags)
        assert len(records) == 1
        record = records[0]
        assert record.train_domain is Domain.WEB
        assert Domain.WEB not in record.per_heldout_f1
        assert len(record.per_heldout_f1) == 3

    def test_mean_is_arithmetic_mean(self, small_world):
        corpus, splits = small_world
        record = run_step1(splits, [point()], Domain.WEB, corpus.tags)[0]
        values = list(record.per_heldout_f1.values())
        assert record.mean_f1 == pytest.approx(sum(values) / len(values))

    def test_explicit_train_domain_eval_rejected(self, small_world):
        corpus, splits = small_world
        with pytest.raises(ProtocolError):
            run_step1(
                splits,
                [point()],
                Domain.WEB,
                corpus.tags,
                eval_domains=[Domain.WEB, Domain.LEGAL],
            )

    def test_zero_policy_equals_no_delex_pipeline(self, small_world):
        # oracle: manual pipeline without any delexicalization step
        corpus, splits = small_world
        record = run_step1(splits, [point()], Domain.WEB, corpus.tags)[0]
        train_docs = splits.step1_train[Domain.WEB]
        space = fit_feature_space(train_docs, WORD_CONFIG)
        model = train_nb(
            [vectorize(d.text, space) for d in train_docs],
            [d.label for d in train_docs],
            feature_space=space,
        )
        for domain, f1 in record.per_heldout_f1.items():
            assert f1 == pytest.approx(evaluate_on(model, splits.step1_val[domain]))

    def test_validation_text_untouched(self, small_world):
        corpus, splits = small_world
        before = {
            d.value: [doc.text for doc in splits.step1_val[d]] for d in splits.domains
        }
        run_step1(splits, [point(p_pos=1.0, p_ner=1.0)], Domain.WEB, corpus.tags)
        after = {
            d.value: [doc.text for doc in splits.step1_val[d]] for d in splits.domains
        }
        assert before == after

    def test_empty_grid_rejected(self, small_world):
        corpus, splits = small_world
        with pytest.raises(DataError):
            run_step1(splits, [], Domain.WEB, corpus.tags)

    def test_checkpoint_resume_skips_done_points(self, small_world, tmp_path):
        corpus, splits = small_world
        grid = [point(), point(p_ner=0.2)]
        checkpoint = tmp_path / "sweep.jsonl"
        first = run_step1(splits, grid[:1], Domain.WEB, corpus.tags, checkpoint_path=checkpoint)
        assert len(read_sweep_records(checkpoint)) == 1
        messages = []
        full = run_step1(
            splits,
            grid,
            Domain.WEB,
            corpus.tags,
            checkpoint_path=checkpoint,
            log=messages.append,
        )
        assert len(full) == 2
        assert full[0] == first[0]
        assert any("resuming" in m for m in messages)

    def test_parallel_equals_serial(self, small_world, tmp_path):
        corpus, splits = small_world
        grid = [point(), point(p_ner=1.0)]
        serial = run_step1(splits, grid, Domain.WEB, corpus.tags, workers=1)
        parallel = run_step1(splits, grid, Domain.WEB, corpus.tags, workers=2)
        assert serial == parallel

    def test_records_round_trip(self, small_world, tmp_path):
        corpus, splits = small_world
        records = run_step1(splits, [point(), point(p_ner=0.4)], Domain.WEB, corpus.tags)
        path = tmp_path / "records.jsonl"
        write_sweep_records(records, path)
        assert read_sweep_records(path) == records


class TestAggregation:
    def _record(self, p_pos, p_ner, mean_f1, domain=Domain.WEB, max_features=2000):
        cfg = FeatureConfig(Analyzer.WORD, (1, 2), max_features, True)
        return SweepRecord(
            point=point(p_pos, p_ner, cfg),
            train_domain=domain,
            per_heldout_f1={Domain.LEGAL: mean_f1},
            mean_f1=mean_f1,
        )

    def test_single_record_surface(self):
        surface = aggregate_delex_surface([self._record(0.2, 0.6, 0.8)])
        assert surface == {(0.2, 0.6): 0.8}

    def test_two_domains_averaged(self):
        records = [
            self._record(0.2, 0.6, 0.8, Domain.WEB),
            self._record(0.2, 0.6, 0.6, Domain.LEGAL),
        ]
        assert aggregate_delex_surface(records) == {(0.2, 0.6): pytest.approx(0.7)}

    def test_best_vs_mean_modes(self):
        records = [
            self._record(0.0, 0.0, 0.9, max_features=100),
            self._record(0.0, 0.0, 0.5, max_features=500),
        ]
        assert aggregate_delex_surface(records, mode="best") == {(0.0, 0.0): 0.9}
        assert aggregate_delex_surface(records, mode="mean") == {
            (0.0, 0.0): pytest.approx(0.7)
        }

    def test_select_best_argmax(self):
        records = [
            self._record(0.0, 0.0, 0.70),
            self._record(0.2, 0.6, 0.72),
        ]
        assert select_best(records).p_ner == 0.6

    def test_select_best_tie_prefers_fewer_features(self):
        records = [
            self._record(0.0, 0.0, 0.7, max_features=500),
            self._record(0.0, 0.0, 0.7, max_features=100),
        ]
        assert select_best(records).features.max_features == 100

    def test_select_best_tie_prefers_narrower_range_then_lower_p(self):
        wide = SweepRecord(
            point=point(config=FeatureConfig(Analyzer.WORD, (1, 3), 100, True)),
            train_domain=Domain.WEB,
            per_heldout_f1={Domain.LEGAL: 0.7},
            mean_f1=0.7,
        )
        narrow_high_p = SweepRecord(
            point=point(p_pos=0.4, config=FeatureConfig(Analyzer.WORD, (1, 1), 100, True)),
            train_domain=Domain.WEB,
            per_heldout_f1={Domain.LEGAL: 0.7},
            mean_f1=0.7,
        )
        narrow_low_p = SweepRecord(
            point=point(p_pos=0.2, config=FeatureConfig(Analyzer.WORD, (1, 1), 100, True)),
            train_domain=Domain.WEB,
            per_heldout_f1={Domain.LEGAL: 0.7},
            mean_f1=0.7,
        )
        best = select_best([wide, narrow_high_p, narrow_low_p])
        assert best.features.ngram_range == (1, 1)
        assert best.p_pos == 0.2


class TestStepTwo:
    def test_metadata_provenance(self, small_world):
        corpus, _ = small_world
        model = train_step2(
            corpus.documents, point(), seed=4, tags=corpus.tags,
            delex_seed=9, created_at="2024-06-01T00:00:00+00:00",
        )
        meta = model.metadata
        assert sorted(meta["domains"]) == sorted(
            {d.domain.value for d in corpus.documents}
        )
        assert meta["sample_seed"] == 4 and meta["delex_seed"] == 9
        assert meta["point"]["features"]["max_features"] == 2000
        assert meta["corpus_fingerprint"]

    def test_deterministic_artifact_bytes(self, small_world, tmp_path):
        corpus, _ = small_world
        paths = []
        for name in ("a.json", "b.json"):
            model = train_step2(
                corpus.documents, point(p_ner=0.4), seed=4, tags=corpus.tags,
                delex_seed=9, created_at="2024-06-01T00:00:00+00:00",
            )
            path = tmp_path / name
            save_model(model, path)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_full_ner_masking_removes_entities_from_vocabulary(self, small_world):
        corpus, _ = small_world
        model = train_step2(
            corpus.documents, point(p_ner=1.0), seed=4, tags=corpus.tags, delex_seed=9
        )
        vocabulary = set(model.feature_space.vocabulary)
        for name in corpus.entities:
            assert name.lower() not in vocabulary

    def test_unbalanced_corpus_is_undersampled(self, small_world):
        corpus, _ = small_world
        lopsided = corpus.documents + [
            doc for doc in corpus.documents if doc.domain is Domain.WEB
        ][:0]
        model = train_step2(lopsided, point(), seed=1, tags=corpus.tags)
        assert model.log_prior[0] == pytest.approx(model.log_prior[1])


class TestExport:
    def test_identity_policy_reproduces_text(self, small_world, tmp_path):
        corpus, _ = small_world
        docs = corpus.documents[:50]
        path = tmp_path / "masked.jsonl"
        n = export_delexicalized(docs, DelexPolicy(0.0, 0.0, seed=1), corpus.tags, path)
        assert n == 50
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 50
        for doc, line in zip(docs, lines):
            obj = json.loads(line)
            assert obj["id"] == doc.id and obj["text"] == doc.text
            assert obj["label"] == doc.label.value

    def test_reexport_is_byte_identical(self, small_world, tmp_path):
        corpus, _ = small_world
        docs = corpus.documents[:50]
        policy = DelexPolicy(0.5, 0.5, seed=12)
        path_a, path_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        export_delexicalized(docs, policy, corpus.tags, path_a)
        export_delexicalized(docs, policy, corpus.tags, path_b)
        assert path_a.read_bytes() == path_b.read_bytes()

    def test_missing_tags_error_names_doc(self, small_world, tmp_path):
        corpus, _ = small_world
        docs = corpus.documents[:3]
        tags = dict(corpus.tags)
        del tags[docs[1].id]
        with pytest.raises(DataError, match=docs[1].id):
            export_delexicalized(docs, DelexPolicy(0.0, 0.0), tags, tmp_path / "x.jsonl")


class TestQualitativeReproduction:
    def test_masking_entities_improves_cross_domain_f1(self, small_world):
        corpus, splits = small_world
        grid = [point(0.0, 0.0), point(0.0, 1.0)]
        records = run_step1(splits, grid, Domain.WEB, corpus.tags, delex_seed=3)
        baseline, masked = records
        assert masked.mean_f1 > baseline.mean_f1 + 0.05
