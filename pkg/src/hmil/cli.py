"""Command line front end: infer, train, predict, verify.

Exit codes are part of the interface and stay stable:

* 0 success,
* 1 verification bars failed, or at least one predict line failed,
* 2 usage or data errors (bad flags, malformed input, schema conflicts),
* 3 training aborted on non-finite numbers.

Config precedence for training is flags over config file over defaults,
and the effective configuration is echoed into the training report.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, fields, replace

import numpy as np

from .encoding import EncodingError, encode_document
from .model import (
    ModelConfig,
    ModelError,
    ModelLoadError,
    build_model,
    load_model,
    save_model,
)
from .schema import (
    DEFAULT_CATEGORICAL_THRESHOLD,
    Bag,
    CategoricalLeaf,
    NumericLeaf,
    Product,
    SchemaConflict,
    SchemaError,
    StringLeaf,
    dumps_schema,
    infer_schema,
    loads_schema,
)
from .training import TrainConfig, TrainingDiverged, predict_scores, train
from .verification import SUITE_NAMES, run_suite, summarize_report

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class CliError(Exception):
    """User-facing failure; the message goes to stderr."""

    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _read_jsonl(path: str) -> list[tuple[int, object]]:
    """Parse a JSONL file into (line_number, document) pairs.  Blank
    lines are skipped; a malformed line aborts with its location."""
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for number, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rows.append((number, json.loads(line)))
                except json.JSONDecodeError as exc:
                    raise CliError(f"{path}:{number}: invalid JSON: {exc}")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}")
    return rows


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}")


def _node_counts(schema) -> dict[str, int]:
    counts = {"numeric": 0, "string": 0, "categorical": 0,
              "bag": 0, "product": 0}

    def visit(node):
        if isinstance(node, NumericLeaf):
            counts["numeric"] += 1
        elif isinstance(node, StringLeaf):
            counts["string"] += 1
        elif isinstance(node, CategoricalLeaf):
            counts["categorical"] += 1
        elif isinstance(node, Bag):
            counts["bag"] += 1
            visit(node.child)
        elif isinstance(node, Product):
            counts["product"] += 1
            for f in node.fields:
                visit(f.schema)

    visit(schema)
    return counts


def cmd_infer(args) -> int:
    rows = _read_jsonl(args.input)
    try:
        schema = infer_schema(
            [doc for _, doc in rows],
            categorical_threshold=args.categorical_threshold)
    except SchemaConflict as exc:
        raise CliError(f"schema conflict at {exc.path}: "
                       f"expected {exc.expected}, saw {exc.actual}")
    except SchemaError as exc:
        raise CliError(str(exc))
    _write_text(args.output, dumps_schema(schema) + "\n")
    counts = _node_counts(schema)
    total = sum(counts.values())
    parts = ", ".join(f"{v} {k}" for k, v in counts.items() if v)
    print(f"wrote {args.output}: {total} nodes ({parts})")
    return EXIT_OK


def _load_schema_file(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return loads_schema(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}")
    except SchemaError as exc:
        raise CliError(f"{path}: {exc}")


_MODEL_KEYS = {f.name for f in fields(ModelConfig)}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"seed"}


def _resolve_configs(args) -> tuple[dict, dict]:
    """Merge defaults, config file, and flags (in rising precedence)
    into keyword dicts for the model and trainer."""
    merged: dict = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise CliError(f"cannot read {args.config}: {exc.strerror}")
        except json.JSONDecodeError as exc:
            raise CliError(f"{args.config}: invalid JSON: {exc}")
        if not isinstance(loaded, dict):
            raise CliError(f"{args.config}: config must be a JSON object")
        unknown = set(loaded) - _MODEL_KEYS - _TRAIN_KEYS
        if unknown:
            raise CliError(f"{args.config}: unknown config keys: "
                           f"{', '.join(sorted(unknown))}")
        merged.update(loaded)
    for key in sorted(_MODEL_KEYS | _TRAIN_KEYS):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    model_kw = {k: v for k, v in merged.items() if k in _MODEL_KEYS}
    train_kw = {k: v for k, v in merged.items() if k in _TRAIN_KEYS}
    train_kw["seed"] = model_kw.get("seed", 0)
    return model_kw, train_kw


def cmd_train(args) -> int:
    schema = _load_schema_file(args.schema)
    rows = _read_jsonl(args.train)
    if not rows:
        raise CliError(f"{args.train}: empty corpus")

    raw_labels = []
    stripped = []
    for number, doc in rows:
        if not isinstance(doc, dict) or doc.get(args.label_field) is None:
            raise CliError(f"{args.train}:{number}: missing label field "
                           f"{args.label_field!r}")
        doc = dict(doc)
        raw_labels.append(doc.pop(args.label_field))
        stripped.append((number, doc))
    if isinstance(schema, Product) and args.label_field in schema.field_names:
        schema = replace(schema, fields=tuple(
            f for f in schema.fields if f.name != args.label_field))

    model_kw, train_kw = _resolve_configs(args)
    loss = train_kw.get("loss", "ce")
    if loss == "ce":
        classes = sorted(set(raw_labels), key=lambda v: (str(type(v)), str(v)))
        if len(classes) < 2:
            raise CliError("training needs at least two distinct labels")
        index = {value: i for i, value in enumerate(classes)}
        targets = np.array([index[v] for v in raw_labels])
        model_kw.setdefault("output_dim", len(classes))
        if model_kw["output_dim"] < len(classes):
            raise CliError(f"output_dim {model_kw['output_dim']} is below "
                           f"the {len(classes)} distinct labels")
    else:
        classes = None
        try:
            targets = np.array([[float(v)] for v in raw_labels])
        except (TypeError, ValueError):
            raise CliError("mse loss needs numeric labels")
        model_kw.setdefault("output_dim", 1)

    try:
        model_config = ModelConfig(**model_kw)
        train_config = TrainConfig(**train_kw)
    except (ModelError, ValueError) as exc:
        raise CliError(str(exc))

    docs = []
    for number, doc in stripped:
        try:
            docs.append(encode_document(doc, schema))
        except EncodingError as exc:
            raise CliError(f"{args.train}:{number}: {exc}")

    model = build_model(schema, model_config)
    try:
        report = train(model, docs, targets, train_config)
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    extra = {"label_field": args.label_field, "classes": classes,
             "loss": loss}
    try:
        save_model(model, args.output, extra=extra)
    except OSError as exc:
        raise CliError(f"cannot write {args.output}: {exc.strerror}")

    report_path = args.report or args.output + ".report.json"
    payload = {"n_documents": len(docs),
               "label_field": args.label_field,
               "classes": classes,
               "model_config": asdict(model_config),
               "train_config": asdict(train_config),
               "metric_name": report.metric_name,
               "epoch_loss": report.epoch_loss,
               "epoch_metric": report.epoch_metric}
    _write_text(report_path,
                json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(f"trained on {len(docs)} documents for {train_config.epochs} "
          f"epochs; wrote {args.output} and {report_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        model, extra = load_model(args.model)
    except (OSError, ModelLoadError) as exc:
        raise CliError(f"{args.model}: {exc}")
    label_field = extra.get("label_field")
    classes = extra.get("classes")

    records: list[dict | None] = []
    pending: list[tuple[int, object]] = []
    failed = False
    try:
        fh = open(args.input, "r", encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc.strerror}")
    with fh:
        for number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                records.append({"line": number,
                                "error": f"invalid JSON: {exc}"})
                failed = True
                continue
            if isinstance(doc, dict) and label_field in doc:
                doc = {k: v for k, v in doc.items() if k != label_field}
            try:
                encoded = encode_document(doc, model.schema)
            except EncodingError as exc:
                records.append({"line": number, "error": str(exc)})
                failed = True
                continue
            pending.append((len(records), encoded))
            records.append(None)

    if pending:
        scores = predict_scores(model, [doc for _, doc in pending])
        for (slot, _), row in zip(pending, scores):
            listed = [float(v) for v in row]
            if classes is not None:
                prediction = classes[int(np.argmax(row))]
            elif len(listed) == 1:
                prediction = listed[0]
            else:
                prediction = int(np.argmax(row))
            records[slot] = {"prediction": prediction, "scores": listed}

    lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    if args.output == "-":
        sys.stdout.write(lines)
    else:
        _write_text(args.output, lines)
    return EXIT_FAILED if failed else EXIT_OK


def cmd_verify(args) -> int:
    report = run_suite(args.suite, args.seed)
    print(json.dumps(report, sort_keys=True, indent=2))
    print(summarize_report(report), file=sys.stderr)
    if not report["passed"]:
        for check in report["checks"]:
            if not check["passed"]:
                print(f"failed: {check['name']}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmil",
        description="schema inference and permutation-invariant networks "
                    "for nested JSON data")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer", help="infer a schema from JSONL documents")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--categorical-threshold", type=int,
                   default=DEFAULT_CATEGORICAL_THRESHOLD)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("train", help="train a model on labeled JSONL")
    p.add_argument("--schema", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--label-field", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--config", help="JSON file with config overrides")
    p.add_argument("--report", help="training report path "
                                    "(default: <output>.report.json)")
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--output-dim", dest="output_dim", type=int)
    p.add_argument("--activation", choices=["tanh", "relu"])
    p.add_argument("--aggregation", choices=["mean", "max", "meanmax"])
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--loss", choices=["ce", "mse"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score JSONL documents with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", default="-",
                   help="output JSONL path, or - for stdout")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("verify", help="run the verification suites")
    p.add_argument("--suite", choices=list(SUITE_NAMES), default="all")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
