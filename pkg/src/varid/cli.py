"""Command-line entry point orchestrating the pipeline end to end.

Every subcommand emits machine-readable JSON (stdout or --out), prints a
short human summary to stderr, and writes the fully resolved configuration
next to its main output so runs are reproducible. All randomness flows
from explicit seeds; two runs with identical resolved configs and inputs
produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from varid import __version__
from varid.cleaning import clean_corpus, corpus_stats
from varid.corpus import (
    Document,
    Domain,
    Label,
    LabelRuleSet,
    ProtocolSplits,
    build_protocol_splits,
    document_to_json,
    filter_trainable,
    parse_domain,
    read_jsonl,
    silver_label,
)
from varid.errors import (
    DataError,
    InputFormatError,
    ModelFormatError,
    ModelIntegrityError,
    ProtocolError,
)
from varid.evaluation import (
    agreement_report,
    confusion_and_f1,
    format_agreement_table,
    ingest_benchmark,
    paired_bucket_analysis,
    read_annotations,
)
from varid.features import Analyzer, FeatureConfig, vectorize
from varid.lexicon import Lexicon, load_lexicon_file
from varid.model import load_model, predict, save_model
from varid.protocol import (
    SweepPoint,
    load_grid,
    progress_logger,
    read_sweep_records,
    run_step1,
    select_best,
    train_step2,
    write_sweep_records,
    export_delexicalized,
)
from varid.tagging import DelexPolicy, read_tagged, tag_documents, write_tagged
from varid.util import atomic_write_text

EXIT_CODES = {
    "usage": 2,
    "missing-file": 3,
    "format": 4,
    "data": 5,
    "unexpected": 1,
}

_EPILOG = """exit codes:
  0  success
  2  usage error (unknown flag, missing required flag)
  3  input file not found
  4  malformed input (bad JSONL/TSV/TOML, unknown enum string, bad artifact version)
  5  data contract violation (empty cells, protocol violations, corrupt artifacts)
  1  unexpected internal error

The default worker count for `sweep` comes from VARID_WORKERS, falling back
to the logical core count."""


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CODES["usage"]
    try:
        return args.handler(args)
    except FileNotFoundError as exc:
        _err(f"error: file not found: {exc.filename or exc}")
        return EXIT_CODES["missing-file"]
    except (InputFormatError, ModelFormatError, UnicodeDecodeError) as exc:
        _err(f"error: {exc}")
        return EXIT_CODES["format"]
    except (DataError, ProtocolError, ModelIntegrityError, ValueError) as exc:
        _err(f"error: {exc}")
        return EXIT_CODES["data"]


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(payload: dict | list, out: str | None) -> None:
    text = json.dumps(payload, ensure_ascii=False, indent=2) + "\n"
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _emit_lines(lines: list[str], out: str | None) -> None:
    text = "\n".join(lines) + ("\n" if lines else "")
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _write_config(args, target: str | None, **extra) -> None:
    """Write the resolved configuration next to the main output."""
    if not target:
        return
    resolved = {
        "command": args.command,
        "tool_version": __version__,
    }
    skip = {"handler", "command"}
    for key, value in sorted(vars(args).items()):
        if key in skip or key.startswith("_") or callable(value):
            continue
        resolved[key] = value
    resolved.update(extra)
    path = Path(target)
    if path.is_dir():
        config_path = path / "config.json"
    else:
        config_path = path.with_name(path.name + ".config.json")
    atomic_write_text(config_path, json.dumps(resolved, ensure_ascii=False, indent=2) + "\n")


def _load_config_defaults(parser_args) -> dict:
    """Read the optional TOML config; CLI flags override file values."""
    cached = getattr(parser_args, "_config_cache", None)
    if cached is not None:
        return cached
    if not parser_args.config:
        section: dict = {}
    else:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(parser_args.config, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise InputFormatError(
                    f"{parser_args.config}: invalid TOML ({exc})"
                ) from exc
        section = data.get(parser_args.command, {})
    parser_args._config_cache = section
    return section


def _resolve(args, key: str, fallback):
    """flag value > config file value > fallback."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    section = _load_config_defaults(args)
    if key in section:
        return section[key]
    return fallback


def _default_workers() -> int:
    env = os.environ.get("VARID_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# --- tags / lexicon helpers -----------------------------------------------------


def _build_lexicon(paths: list[str] | None) -> Lexicon:
    lexicon = Lexicon.builtin()
    for path in paths or []:
        pos_entries, ner_entries = load_lexicon_file(path)
        lexicon = lexicon.with_entries(pos_entries=pos_entries, ner_entries=ner_entries)
    return lexicon


def _tags_for(args, docs) -> dict:
    if getattr(args, "tags", None):
        return read_tagged(args.tags, texts={doc.id: doc.text for doc in docs})
    lexicon = _build_lexicon(getattr(args, "lexicon", None))
    return tag_documents(docs, lexicon)


# --- subcommand handlers ---------------------------------------------------------


def _cmd_clean(args) -> int:
    docs = read_jsonl(args.infile)
    keep = bool(_resolve(args, "keep_diacritics", False))
    cleaned, report = clean_corpus(docs, keep_diacritics=keep)
    _emit_lines([document_to_json(d) for d in cleaned], args.out)
    if args.report:
        atomic_write_text(
            args.report, json.dumps(report.to_json(), ensure_ascii=False, indent=2) + "\n"
        )
    _write_config(args, args.out)
    _err(
        f"clean: {report.input_count} in, {report.output_count} out "
        f"(empty {report.dropped_null_empty}, duplicate {report.dropped_duplicates}, "
        f"outlier {report.dropped_iqr})"
    )
    return 0


def _cmd_label(args) -> int:
    docs = read_jsonl(args.infile)
    rules = LabelRuleSet.from_file(args.rules)
    labeled = [silver_label(doc, rules) for doc in docs]
    _emit_lines([document_to_json(d) for d in labeled], args.out)
    _write_config(args, args.out)
    changed = sum(1 for before, after in zip(docs, labeled) if before.label != after.label)
    _err(f"label: {changed}/{len(docs)} documents labeled")
    return 0


def _cmd_stats(args) -> int:
    docs = read_jsonl(args.infile)
    report = corpus_stats(docs)
    _emit(report.to_json(), args.out)
    _write_config(args, args.out)
    _err(f"stats: {len(docs)} documents, {len(report.per_domain_token_stats)} domains")
    return 0


def _cmd_split(args) -> int:
    docs = filter_trainable(read_jsonl(args.infile), log=_err)
    seed = int(_resolve(args, "seed", 0))
    splits = build_protocol_splits(
        docs,
        train_per_domain=int(_resolve(args, "train_per_domain", 8000)),
        val_per_domain=int(_resolve(args, "val_per_domain", 1000)),
        seed=seed,
        allow_shrink=bool(_resolve(args, "allow_shrink", False)),
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"seed": seed, "domains": {}}
    for domain in splits.domains:
        train_path = out_dir / f"{domain.value}.train.jsonl"
        val_path = out_dir / f"{domain.value}.val.jsonl"
        _write_doc_file(splits.step1_train[domain], train_path)
        _write_doc_file(splits.step1_val[domain], val_path)
        manifest["domains"][domain.value] = {
            "train": train_path.name,
            "val": val_path.name,
            "train_count": len(splits.step1_train[domain]),
            "val_count": len(splits.step1_val[domain]),
        }
    atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    _write_config(args, str(out_dir))
    _err(f"split: {len(splits.domains)} domains -> {out_dir}")
    return 0


def _write_doc_file(docs, path: Path) -> None:
    atomic_write_text(path, "".join(document_to_json(d) + "\n" for d in docs))


def load_splits(path: str | Path) -> ProtocolSplits:
    """Read a splits directory written by `varid split`."""
    path = Path(path)
    manifest_file = path / "manifest.json"
    with open(manifest_file, encoding="utf-8") as fh:
        manifest = json.load(fh)
    train: dict[Domain, list[Document]] = {}
    val: dict[Domain, list[Document]] = {}
    for domain_str, files in manifest["domains"].items():
        domain = parse_domain(domain_str)
        train[domain] = read_jsonl(path / files["train"])
        val[domain] = read_jsonl(path / files["val"])
    return ProtocolSplits(step1_train=train, step1_val=val, seed=int(manifest["seed"]))


def _cmd_tag(args) -> int:
    docs = read_jsonl(args.infile)
    lexicon = _build_lexicon(args.lexicon)
    tags = tag_documents(docs, lexicon)
    buf = io.StringIO()
    write_tagged(tags, buf)
    _emit_lines(buf.getvalue().splitlines(), args.out)
    _write_config(args, args.out)
    _err(f"tag: {len(tags)} documents tagged")
    return 0


def _cmd_delex(args) -> int:
    docs = read_jsonl(args.infile)
    tags = _tags_for(args, docs)
    policy = DelexPolicy(
        p_pos=float(_resolve(args, "p_pos", 0.0)),
        p_ner=float(_resolve(args, "p_ner", 0.0)),
        seed=int(_resolve(args, "seed", 0)),
    )
    count = export_delexicalized(docs, policy, tags, args.out)
    _write_config(args, args.out)
    _err(f"delex: wrote {count} masked documents to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    splits = load_splits(args.splits)
    grid = load_grid(args.grid)
    train_domain = parse_domain(args.train_domain)
    train_docs = splits.step1_train.get(train_domain)
    if train_docs is None:
        raise DataError(f"splits at {args.splits} have no domain {train_domain.value}")
    tags = _tags_for(args, train_docs)
    workers = int(_resolve(args, "workers", 0) or _default_workers())
    records = run_step1(
        splits,
        grid,
        train_domain,
        tags,
        delex_seed=int(_resolve(args, "delex_seed", 0)),
        workers=workers,
        checkpoint_path=args.out,
        log=progress_logger(),
    )
    if args.out:
        write_sweep_records(records, args.out)
    else:
        _emit_lines([json.dumps(r.to_json(), ensure_ascii=False) for r in records], None)
    _write_config(args, args.out)
    best = select_best(records)
    _err(f"sweep: {len(records)} points done; best {best.to_json()}")
    return 0


def _point_from_args(args) -> SweepPoint:
    if args.records:
        return select_best(read_sweep_records(args.records))
    lo, hi = (int(x) for x in str(_resolve(args, "ngram_range", "1,1")).split(","))
    return SweepPoint(
        p_pos=float(_resolve(args, "p_pos", 0.0)),
        p_ner=float(_resolve(args, "p_ner", 0.0)),
        features=FeatureConfig(
            analyzer=Analyzer(str(_resolve(args, "analyzer", "Word")).capitalize()),
            ngram_range=(lo, hi),
            max_features=int(_resolve(args, "max_features", 10000)),
            lowercase=bool(_resolve(args, "lowercase", True)),
        ),
        alpha=float(_resolve(args, "alpha", 1.0)),
    )


def _cmd_train(args) -> int:
    corpus = filter_trainable(read_jsonl(args.infile), log=_err)
    point = _point_from_args(args)
    tags = _tags_for(args, corpus)
    created_at = args.created_at or _default_created_at()
    model = train_step2(
        corpus,
        point,
        seed=int(_resolve(args, "sample_seed", 0)),
        tags=tags,
        delex_seed=int(_resolve(args, "delex_seed", 0)),
        created_at=created_at,
        tool_version=__version__,
    )
    save_model(model, args.out)
    _write_config(args, args.out, created_at=created_at, point=point.to_json())
    _err(f"train: wrote model to {args.out} ({len(model.feature_space.vocabulary)} features)")
    return 0


def _default_created_at() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        stamp = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        stamp = datetime.now(tz=timezone.utc)
    return stamp.replace(microsecond=0).isoformat()


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    docs = read_jsonl(args.infile)
    lines = []
    for doc in docs:
        label, posteriors = predict(model, vectorize(doc.text, model.feature_space))
        lines.append(
            json.dumps(
                {"id": doc.id, "label": label.value, "log_posteriors": posteriors},
                ensure_ascii=False,
            )
        )
    _emit_lines(lines, args.out)
    _write_config(args, args.out)
    _err(f"predict: {len(lines)} documents")
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    result = ingest_benchmark(args.infile, args.format)
    docs = [d for d in result.documents if d.label in (Label.EP, Label.BP)]
    preds: dict[str, Label] = {}
    for doc in docs:
        preds[doc.id] = predict(model, vectorize(doc.text, model.feature_space))[0]
    metrics = confusion_and_f1([preds[d.id] for d in docs], [d.label for d in docs])
    payload = {"counts": result.counts, "metrics": metrics}
    if result.pairs:
        payload["paired_buckets"] = paired_bucket_analysis(preds, result.pairs)
    _emit(payload, args.out)
    _write_config(args, args.out)
    _err(f"evaluate: macro-F1 {metrics['macro_f1']:.4f} on {len(docs)} documents")
    return 0


def _cmd_agreement(args) -> int:
    matrix = read_annotations(args.infile)
    report = agreement_report(matrix)
    _emit(report.to_json(), args.out)
    _write_config(args, args.out)
    _err(format_agreement_table(report))
    return 0


# --- parser ----------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="varid",
        description=__doc__,
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"varid {__version__}")
    parser.set_defaults(command=None)
    sub = parser.add_subparsers(dest="command")

    def add(name: str, handler, help_text: str, aliases=()) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, epilog=_EPILOG, aliases=list(aliases),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(handler=handler, command=name)
        p.add_argument("--config", help="TOML config file; flags override its values")
        return p

    p = add("clean", _cmd_clean, "run the cleaning pipeline over a JSONL corpus")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", help="cleaned corpus JSONL (default: stdout)")
    p.add_argument("--report", help="write the cleaning report JSON here")
    p.add_argument("--keep-diacritics", dest="keep_diacritics",
                   action="store_const", const=True, default=None,
                   help="preserve accents instead of reducing to ASCII")

    p = add("label", _cmd_label, "apply silver-labeling rules to a corpus")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--rules", required=True, help="rules file (matcher<TAB>pattern<TAB>label)")
    p.add_argument("--out")

    p = add("split", _cmd_split, "build per-domain balanced protocol splits")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--train-per-domain", dest="train_per_domain", type=int)
    p.add_argument("--val-per-domain", dest="val_per_domain", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--allow-shrink", dest="allow_shrink",
                   action="store_const", const=True, default=None)

    p = add("tag", _cmd_tag, "tag a corpus with the built-in rule tagger")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--lexicon", action="append", help="extra surface<TAB>tag file (repeatable)")
    p.add_argument("--out", help="tagged interchange file (default: stdout)")

    p = add("delex", _cmd_delex, "export a delexicalized copy of a corpus",
            aliases=("export-delex",))
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--p-pos", dest="p_pos", type=float)
    p.add_argument("--p-ner", dest="p_ner", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--tags", help="pre-tagged interchange file")
    p.add_argument("--lexicon", action="append")

    p = add("sweep", _cmd_sweep, "step-1 leave-one-domain-out hyperparameter sweep")
    p.add_argument("--splits", required=True, help="directory written by `varid split`")
    p.add_argument("--grid", required=True, help="TOML grid file")
    p.add_argument("--train-domain", dest="train_domain", required=True)
    p.add_argument("--out", help="sweep records JSONL (also the resume checkpoint)")
    p.add_argument("--tags")
    p.add_argument("--lexicon", action="append")
    p.add_argument("--delex-seed", dest="delex_seed", type=int)
    p.add_argument("--workers", type=int)

    p = add("train", _cmd_train, "step-2 final training on all domains combined")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True, help="model artifact path")
    p.add_argument("--records", help="pick the best point from these sweep records")
    p.add_argument("--p-pos", dest="p_pos", type=float)
    p.add_argument("--p-ner", dest="p_ner", type=float)
    p.add_argument("--analyzer")
    p.add_argument("--ngram-range", dest="ngram_range", help="lo,hi (e.g. 1,2)")
    p.add_argument("--max-features", dest="max_features", type=int)
    p.add_argument("--lowercase", dest="lowercase", action="store_const", const=True, default=None)
    p.add_argument("--no-lowercase", dest="lowercase", action="store_const", const=False)
    p.add_argument("--alpha", type=float)
    p.add_argument("--sample-seed", dest="sample_seed", type=int)
    p.add_argument("--delex-seed", dest="delex_seed", type=int)
    p.add_argument("--tags")
    p.add_argument("--lexicon", action="append")
    p.add_argument("--created-at", dest="created_at",
                   help="ISO-8601 artifact timestamp (default: SOURCE_DATE_EPOCH or now)")

    p = add("predict", _cmd_predict, "classify documents with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out")

    p = add("evaluate", _cmd_evaluate, "score a model on a benchmark file")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", default="jsonl", choices=["jsonl", "dsltl", "frmt"])
    p.add_argument("--out")

    p = add("agreement", _cmd_agreement, "annotation agreement metrics")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out")

    p = add("stats", _cmd_stats, "token statistics per domain and label")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out")

    return parser


if __name__ == "__main__":
    sys.exit(main())
