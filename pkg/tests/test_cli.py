import json

import pytest

from varid.cli import main
from varid.corpus import Document, Domain, Label, read_jsonl, write_jsonl
from varid.synth import build_confounded_corpus


def run_cli(*argv):
    return main(list(argv))


def write_corpus(path, docs):
    with open(path, "w", encoding="utf-8") as fh:
        write_jsonl(docs, fh)


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    """A small corpus plus all derived CLI artifacts, built once."""
    root = tmp_path_factory.mktemp("cliworld")
    corpus = build_confounded_corpus(seed=31, docs_per_domain=60, n_pairs=8)
    corpus_path = root / "corpus.jsonl"
    write_corpus(corpus_path, corpus.documents)

    splits_dir = root / "splits"
    assert run_cli(
        "split", "--in", str(corpus_path), "--out-dir", str(splits_dir),
        "--train-per-domain", "40", "--val-per-domain", "20", "--seed", "7",
    ) == 0

    grid_path = root / "grid.toml"
    grid_path.write_text(
        """
[delex]
p_pos = [0.0]
p_ner = [0.0, 1.0]
[features]
analyzer = ["Word"]
ngram_range = [[1, 2]]
max_features = [2000]
lowercase = [true]
""",
        encoding="utf-8",
    )

    model_path = root / "model.json"
    assert run_cli(
        "train", "--in", str(corpus_path), "--out", str(model_path),
        "--p-pos", "0.0", "--p-ner", "1.0", "--analyzer", "Word",
        "--ngram-range", "1,2", "--max-features", "2000",
        "--sample-seed", "3", "--delex-seed", "5",
        "--created-at", "2024-01-01T00:00:00+00:00",
    ) == 0
    return {
        "root": root,
        "corpus": corpus,
        "corpus_path": corpus_path,
        "splits_dir": splits_dir,
        "grid_path": grid_path,
        "model_path": model_path,
    }


class TestCleanCommand:
    def test_clean_writes_corpus_and_report(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        docs = [
            Document("a", "Texto  útil aqui", Domain.WEB, Label.EP),
            Document("b", "Texto útil aqui", Domain.WEB, Label.EP),
            Document("c", "", Domain.WEB, Label.BP),
            Document("d", "outro texto bom", Domain.WEB, Label.BP),
        ]
        write_corpus(raw, docs)
        out = tmp_path / "clean.jsonl"
        report = tmp_path / "report.json"
        code = run_cli(
            "clean", "--in", str(raw), "--out", str(out), "--report", str(report)
        )
        assert code == 0
        cleaned = read_jsonl(out)
        assert [d.id for d in cleaned] == ["a", "d"]
        assert cleaned[0].text == "Texto util aqui"
        payload = json.loads(report.read_text(encoding="utf-8"))
        assert payload["dropped_duplicates"] == 1
        assert payload["dropped_null_empty"] == 1
        assert (tmp_path / "clean.jsonl.config.json").exists()

    def test_keep_diacritics_flag(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        write_corpus(raw, [Document("a", "homónimo bom", Domain.LEGAL, Label.EP)])
        out = tmp_path / "clean.jsonl"
        assert run_cli("clean", "--in", str(raw), "--out", str(out), "--keep-diacritics") == 0
        assert read_jsonl(out)[0].text == "homónimo bom"


class TestLabelCommand:
    def test_rules_applied(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        write_corpus(
            raw,
            [
                Document("a", "x", Domain.WEB, Label.UNLABELED, source="https://a.pt/1"),
                Document("b", "y", Domain.WEB, Label.UNLABELED, source="https://b.br/2"),
            ],
        )
        rules = tmp_path / "rules.tsv"
        rules.write_text("tld\t.pt\tEP\ntld\t.br\tBP\n", encoding="utf-8")
        out = tmp_path / "labeled.jsonl"
        assert run_cli("label", "--in", str(raw), "--rules", str(rules), "--out", str(out)) == 0
        labeled = {d.id: d.label for d in read_jsonl(out)}
        assert labeled == {"a": Label.EP, "b": Label.BP}


class TestSplitArtifacts:
    def test_manifest_and_files(self, world):
        manifest = json.loads((world["splits_dir"] / "manifest.json").read_text())
        assert manifest["seed"] == 7
        assert len(manifest["domains"]) == 4
        for entry in manifest["domains"].values():
            assert entry["train_count"] == 40 and entry["val_count"] == 20
        assert (world["splits_dir"] / "config.json").exists()


class TestTagDelex:
    def test_tag_then_delex_with_tags_file(self, world, tmp_path):
        sample = tmp_path / "sample.jsonl"
        write_corpus(sample, world["corpus"].documents[:10])
        tags_path = tmp_path / "tags.tsv"
        assert run_cli("tag", "--in", str(sample), "--out", str(tags_path)) == 0
        assert tags_path.read_text(encoding="utf-8").startswith("# id = ")
        masked = tmp_path / "masked.jsonl"
        assert run_cli(
            "delex", "--in", str(sample), "--out", str(masked),
            "--p-pos", "0.0", "--p-ner", "0.0", "--seed", "1", "--tags", str(tags_path),
        ) == 0
        out_docs = read_jsonl(masked)
        assert [d.text for d in out_docs] == [d.text for d in world["corpus"].documents[:10]]

    def test_export_delex_alias(self, world, tmp_path):
        sample = tmp_path / "sample.jsonl"
        write_corpus(sample, world["corpus"].documents[:4])
        masked = tmp_path / "masked.jsonl"
        assert run_cli(
            "export-delex", "--in", str(sample), "--out", str(masked),
            "--p-pos", "1.0", "--p-ner", "1.0", "--seed", "2",
        ) == 0
        assert len(read_jsonl(masked)) == 4


class TestSweepCommand:
    def test_sweep_records_and_resume(self, world, tmp_path):
        out = tmp_path / "records.jsonl"
        code = run_cli(
            "sweep", "--splits", str(world["splits_dir"]), "--grid", str(world["grid_path"]),
            "--train-domain", "web", "--out", str(out), "--workers", "1",
        )
        assert code == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        records = [json.loads(line) for line in lines]
        assert {r["point"]["p_ner"] for r in records} == {0.0, 1.0}
        for r in records:
            assert "Web" not in r["per_heldout_f1"]
            assert len(r["per_heldout_f1"]) == 3


class TestTrainPredictEvaluate:
    def test_model_artifact_exists_with_provenance(self, world):
        blob = json.loads(world["model_path"].read_text(encoding="utf-8"))
        assert blob["format_version"] == 1
        assert blob["metadata"]["created_at"] == "2024-01-01T00:00:00+00:00"
        assert blob["delex_policy"]["p_ner"] == 1.0

    def test_predict_jsonl(self, world, tmp_path, capsys):
        sample = tmp_path / "docs.jsonl"
        write_corpus(sample, world["corpus"].pair_documents[:6])
        assert run_cli("predict", "--model", str(world["model_path"]), "--in", str(sample)) == 0
        out_lines = capsys.readouterr().out.strip().splitlines()
        assert len(out_lines) == 6
        row = json.loads(out_lines[0])
        assert set(row) == {"id", "label", "log_posteriors"}
        assert row["label"] in ("EP", "BP")

    def test_evaluate_jsonl_format(self, world, tmp_path, capsys):
        sample = tmp_path / "gold.jsonl"
        write_corpus(sample, world["corpus"].pair_documents)
        assert run_cli(
            "evaluate", "--model", str(world["model_path"]), "--in", str(sample),
            "--format", "jsonl",
        ) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["metrics"]["macro_f1"] > 0.7

    def test_evaluate_frmt_reports_buckets(self, world, tmp_path, capsys):
        by_id = {d.id: d for d in world["corpus"].pair_documents}
        ep_lines = []
        bp_lines = []
        for pair in world["corpus"].pairs:
            ep_lines.append(by_id[pair.ep_id].text)
            bp_lines.append(by_id[pair.bp_id].text)
        (tmp_path / "ep.txt").write_text("\n".join(ep_lines) + "\n", encoding="utf-8")
        (tmp_path / "bp.txt").write_text("\n".join(bp_lines) + "\n", encoding="utf-8")
        manifest = tmp_path / "frmt.json"
        manifest.write_text(
            json.dumps({"buckets": [{"name": "entity", "ep": "ep.txt", "bp": "bp.txt"}]}),
            encoding="utf-8",
        )
        assert run_cli(
            "evaluate", "--model", str(world["model_path"]), "--in", str(manifest),
            "--format", "frmt",
        ) == 0
        payload = json.loads(capsys.readouterr().out)
        assert "paired_buckets" in payload
        assert payload["paired_buckets"]["per_bucket"]["entity"]["pairs"] == 8


class TestAgreementStats:
    def test_agreement_command(self, tmp_path, capsys):
        path = tmp_path / "ann.jsonl"
        rows = [
            {"id": "a", "domain": "Web", "annotations": ["EP", "EP", "EP"], "silver": "EP"},
            {"id": "b", "domain": "Web", "annotations": ["EP", "EP", "BP"], "silver": "EP"},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        assert run_cli("agreement", "--in", str(path)) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["fleiss_kappa"] == -0.2
        assert payload["majority_rate"] == 1.0

    def test_stats_command(self, world, capsys):
        assert run_cli("stats", "--in", str(world["corpus_path"])) == 0
        payload = json.loads(capsys.readouterr().out)
        assert "Web/EP" in payload["per_cell_token_stats"]


class TestExitCodes:
    def test_missing_file_is_3(self, tmp_path):
        assert run_cli("clean", "--in", str(tmp_path / "nope.jsonl")) == 3

    def test_malformed_input_is_4(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{broken\n", encoding="utf-8")
        assert run_cli("clean", "--in", str(bad)) == 4

    def test_invalid_utf8_is_4(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_bytes(b'{"id":"a","text":"\xff\xfe"}\n')
        assert run_cli("clean", "--in", str(bad)) == 4

    def test_data_error_is_5(self, tmp_path):
        raw = tmp_path / "one-class.jsonl"
        write_corpus(
            raw,
            [
                Document("a", "texto aqui", Domain.WEB, Label.EP),
                Document("b", "outro texto", Domain.WEB, Label.EP),
            ],
        )
        assert run_cli(
            "split", "--in", str(raw), "--out-dir", str(tmp_path / "s"),
            "--train-per-domain", "2", "--val-per-domain", "2",
        ) == 5

    def test_usage_error_is_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("clean")  # --in is required
        assert exc.value.code == 2

    def test_no_command_prints_help(self, capsys):
        assert run_cli() == 2
        assert "usage" in capsys.readouterr().err.lower()

    def test_config_file_defaults_and_flag_override(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        write_corpus(raw, [Document("a", "homónimo texto", Domain.LEGAL, Label.EP)])
        config = tmp_path / "varid.toml"
        config.write_text("[clean]\nkeep_diacritics = true\n", encoding="utf-8")
        out = tmp_path / "c.jsonl"
        assert run_cli(
            "clean", "--in", str(raw), "--out", str(out), "--config", str(config)
        ) == 0
        assert read_jsonl(out)[0].text == "homónimo texto"
