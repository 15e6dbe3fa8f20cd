"""Command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 data validation error,
4 runtime/training failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import torch

from . import __version__
from .aggregation import from_record, prediction_record
from .bench import run_benchmark, write_csv
from .checkpoint import CheckpointError, load_checkpoint, model_kind
from .config import ConfigError, load_config
from .data import DatasetFormatError, ValidationError, check_ner_targets, read_dataset
from .estimator import TrainingError
from .metrics import DocumentMismatchError, evaluate
from .synthetic import corpus_stats, generate_synthetic_corpus, write_synthetic_corpus

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4

log = logging.getLogger("jointie")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _require_file(path, what):
    if path is None or not Path(path).is_file():
        raise CliError(f"{what} not found: {path}", EXIT_CONFIG)


def _read(path):
    try:
        return read_dataset(path)
    except (DatasetFormatError, ValidationError) as exc:
        raise CliError(str(exc), EXIT_DATA) from None


def _manifest(command, path, *, config=None, datasets=(), seed=None, stats=None, outputs=None, extra=None):
    manifest = {
        "command": command,
        "code_version": __version__,
        "config": config,
        "dataset_hashes": {str(p): _sha256(p) for p in datasets},
        "seed": seed,
        "corpus_stats": stats,
        "outputs": outputs or {},
    }
    manifest.update(extra or {})
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- commands --------------------------------------------------------------

def cmd_ingest(args):
    _require_file(args.data, "dataset")
    schema, examples = _read(args.data)
    if args.validate:
        try:
            check_ner_targets(examples, schema.m)
        except ValidationError as exc:
            raise CliError(str(exc), EXIT_DATA) from None
    stats = asdict(corpus_stats(examples, schema.m))
    print(json.dumps({"field_names": schema.names, **stats}, indent=2))
    return EXIT_OK


def cmd_gen_synthetic(args):
    manifest = write_synthetic_corpus(args.out, seed=args.seed, train_size=args.size,
                                      test_size=args.test_size, m=args.m,
                                      multispan_rate=args.multispan_rate,
                                      length_range=(args.min_length, args.max_length))
    print(json.dumps(manifest["stats"], indent=2))
    return EXIT_OK


def _overrides(args):
    return {"model": args.model, "epochs": args.epochs, "batch_size": args.batch_size,
            "learning_rate": args.learning_rate, "seed": args.seed, "window_length": args.window_length,
            "stride": args.stride, "loss_mode": args.loss_mode}


def cmd_train(args):
    try:
        config = load_config(args.config, _overrides(args))
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    _require_file(args.train, "training dataset")
    if args.dev is not None:
        _require_file(args.dev, "dev dataset")
    schema, train_set = _read(args.train)
    dev_set = None
    if args.dev is not None:
        dev_schema, dev_set = _read(args.dev)
        if dev_schema.names != schema.names:
            raise CliError(f"dev schema {dev_schema.names} != train schema {schema.names}", EXIT_DATA)
    if config.model == "joint":
        try:
            check_ner_targets(train_set, schema.m)
        except ValidationError as exc:
            raise CliError(str(exc), EXIT_DATA) from None
    from .training import train

    try:
        result = train(config, schema, train_set, dev_set, args.out)
    except TrainingError as exc:
        raise CliError(str(exc), EXIT_RUNTIME) from None
    est = result["estimator"]
    outputs = {k: result[k] for k in ("metrics", "best", "final")}
    _manifest("train", Path(args.out) / "manifest.json", config=config.to_dict(),
              datasets=[p for p in (args.train, args.dev) if p], seed=config.seed,
              stats=asdict(corpus_stats(train_set, schema.m)), outputs=outputs,
              extra={"vocab_size": len(est.vocab_), "model": model_kind(est)})
    last = est.history_[-1]
    print(f"trained {config.model} model for {len(est.history_)} epochs; final loss {last['L']:.4f}")
    return EXIT_OK


def cmd_predict(args):
    _require_file(args.checkpoint, "checkpoint")
    _require_file(args.data, "dataset")
    try:
        est = load_checkpoint(args.checkpoint)
    except CheckpointError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    schema, examples = _read(args.data)
    if schema.names != est.schema_.names:
        raise CliError(f"field mismatch: checkpoint has m={est.schema_.m} fields {est.schema_.names}, "
                       f"dataset has m={schema.m} fields {schema.names}", EXIT_DATA)
    docs = [ex.document for ex in examples]
    records = []
    if docs:
        records = [prediction_record(p, schema, d) for p, d in zip(est.predict(docs), docs)]
    out = Path(args.out)
    out.write_text(json.dumps(records, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    _manifest("predict", out.with_name(out.name + ".manifest.json"),
              datasets=[args.data, args.checkpoint], seed=est.seed,
              outputs={"predictions": str(out)}, extra={"model": model_kind(est)})
    print(f"wrote {len(records)} predictions to {out}")
    return EXIT_OK


def cmd_eval(args):
    _require_file(args.predictions, "prediction file")
    _require_file(args.data, "dataset")
    schema, gold = _read(args.data)
    try:
        records = json.loads(Path(args.predictions).read_text(encoding="utf-8"))
        preds = [from_record(r, schema) for r in records]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"malformed prediction file: {exc}", EXIT_DATA) from None
    try:
        report = evaluate(preds, gold, schema, all_fields_recall=args.all_fields_recall)
    except DocumentMismatchError as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    print(report.table())
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_bench(args):
    try:
        config = load_config(args.config, {"seed": args.seed, "window_length": args.window_length,
                                           "stride": args.stride})
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    if args.data:
        _require_file(args.data, "benchmark dataset")
        schema, examples = _read(args.data)
    else:
        schema, examples, _ = generate_synthetic_corpus(config.seed, args.docs, args.m,
                                                        length_range=(args.min_length, args.max_length))
    rows = run_benchmark(config, schema, examples, train_epochs=args.train_epochs,
                         workers=args.workers, repeats=args.repeats)
    write_csv(rows, args.out)
    _manifest("bench", Path(args.out).with_suffix(".manifest.json"), config=config.to_dict(),
              datasets=[args.data] if args.data else [], seed=config.seed,
              stats=asdict(corpus_stats(examples, schema.m)), outputs={"csv": str(args.out)})
    for r in rows:
        print(f"{r.model:9s} {r.phase:17s} docs={r.documents} m={r.m} "
              f"seconds={r.seconds:.3f} encoder_calls={r.encoder_calls}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jointie", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--workers", type=int, default=1, help="cap on CPU threads")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="parse and validate a dataset file")
    s.add_argument("data")
    s.add_argument("--validate", action="store_true", help="also require BIO-representable spans")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("gen-synthetic", help="write a synthetic corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--size", type=int, default=50)
    s.add_argument("--test-size", type=int, default=0)
    s.add_argument("--m", type=int, default=4)
    s.add_argument("--multispan-rate", type=float, default=0.27)
    s.add_argument("--min-length", type=int, default=450)
    s.add_argument("--max-length", type=int, default=750)
    s.set_defaults(func=cmd_gen_synthetic)

    s = sub.add_parser("train", help="train a joint or pairwise model")
    s.add_argument("--config")
    s.add_argument("--train", required=True)
    s.add_argument("--dev")
    s.add_argument("--out", required=True)
    s.add_argument("--model", choices=("joint", "pairwise"))
    s.add_argument("--epochs", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--learning-rate", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--window-length", type=int)
    s.add_argument("--stride", type=int)
    s.add_argument("--loss-mode", choices=("sum", "learnable_alpha"))
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="write predictions for a dataset")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", help="score a prediction file against gold")
    s.add_argument("--predictions", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--json-out")
    s.add_argument("--all-fields-recall", action="store_true",
                   help="multi-span recall over every annotated field")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", help="time joint vs pairwise encoding")
    s.add_argument("--config")
    s.add_argument("--data", help="benchmark corpus; synthetic if omitted")
    s.add_argument("--out", required=True, help="CSV output path")
    s.add_argument("--m", type=int, default=8)
    s.add_argument("--docs", type=int, default=20)
    s.add_argument("--min-length", type=int, default=450)
    s.add_argument("--max-length", type=int, default=750)
    s.add_argument("--seed", type=int)
    s.add_argument("--window-length", type=int)
    s.add_argument("--stride", type=int)
    s.add_argument("--train-epochs", type=int, default=1)
    s.add_argument("--repeats", type=int, default=1)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    torch.set_num_threads(max(args.workers, 1))
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (DatasetFormatError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
