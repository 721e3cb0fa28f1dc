"""Command-line surface: stats, preprocess, synth, train, predict, evaluate.

Every run is reproducible: training is seeded (config file, --seed flag, or
the ABUSIVETEXT_SEED environment variable as a fallback), model bundles are
byte-stable JSON, and predictions are written with fixed 6-decimal
probabilities so reruns diff clean.

Exit codes:
    0  success
    2  input file not found            (FILE_NOT_FOUND)
    3  encoder training without dev    (DEV_REQUIRED)
    4  bundle format version mismatch  (BUNDLE_VERSION)
    5  bundle fails consistency checks (BUNDLE_INCONSISTENT)
    6  gold/prediction ids disagree    (ID_MISMATCH)
    1  any other error

Failures print one machine-parsable line to stderr: ``ERROR <CODE>: <message>``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import bundle as bundlemod
from . import encoder as enc
from . import linear, metrics, textprep, vectorizer
from .corpus import (
    DatasetSplit,
    FileFormat,
    Label,
    SplitName,
    compute_stats,
    map_label,
    parse_dataset,
    synth_corpus,
    write_dataset,
)
from .errors import (
    AbusiveTextError,
    BundleInconsistentError,
    BundleVersionError,
    DevRequiredError,
    EncodingError,
    IdMismatchError,
    MalformedRow,
    UnknownLabel,
)

SEED_ENV_VAR = "ABUSIVETEXT_SEED"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FILE_NOT_FOUND = 2
EXIT_DEV_REQUIRED = 3
EXIT_BUNDLE_VERSION = 4
EXIT_BUNDLE_INCONSISTENT = 5
EXIT_ID_MISMATCH = 6


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Everything a training run needs; serializable so runs can be replayed.

    ``seed``, when set (or supplied via ABUSIVETEXT_SEED), overrides the
    per-arm training-config seeds so one value drives the whole run.
    """

    train_path: str | None = None
    dev_path: str | None = None
    model_path: str | None = None
    model_kind: str = bundlemod.KIND_TFIDF_LR
    language_tag: str = ""
    format: str = "tsv"
    seed: int | None = None
    preprocessing: textprep.CleanPolicy = field(default_factory=textprep.CleanPolicy)
    tfidf: vectorizer.TfIdfConfig = field(default_factory=vectorizer.TfIdfConfig)
    lr: linear.TrainConfigLR = field(default_factory=linear.TrainConfigLR)
    encoder: enc.EncoderConfig = field(default_factory=enc.EncoderConfig)
    encoder_train: enc.TrainConfigEnc = field(default_factory=enc.TrainConfigEnc)
    encoder_vocab_size: int = 512

    _NESTED = {
        "preprocessing": textprep.CleanPolicy,
        "tfidf": vectorizer.TfIdfConfig,
        "lr": linear.TrainConfigLR,
        "encoder": enc.EncoderConfig,
        "encoder_train": enc.TrainConfigEnc,
    }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        for key, value in raw.items():
            if key in cls._NESTED:
                nested_cls = cls._NESTED[key]
                if not isinstance(value, dict):
                    raise ValueError(f"config key {key!r} must be an object")
                nested_known = {f.name for f in fields(nested_cls)}
                nested_unknown = set(value) - nested_known
                if nested_unknown:
                    raise ValueError(
                        f"unknown keys under {key!r}: {sorted(nested_unknown)}"
                    )
                kwargs[key] = nested_cls(**value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        return doc

    def resolve_seed(self) -> "RunConfig":
        """Fold the run seed (or the env fallback) into the arm configs."""
        seed = self.seed
        if seed is None and os.environ.get(SEED_ENV_VAR):
            seed = int(os.environ[SEED_ENV_VAR])
        if seed is None:
            return self
        return replace(
            self,
            seed=seed,
            lr=replace(self.lr, seed=seed),
            encoder_train=replace(self.encoder_train, seed=seed),
        )


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        config = RunConfig.from_dict(json.loads(path.read_text(encoding="utf-8")))
    else:
        config = RunConfig()
    overrides: dict[str, Any] = {}
    for flag, key in (
        ("train", "train_path"),
        ("dev", "dev_path"),
        ("out", "model_path"),
        ("model_kind", "model_kind"),
        ("language", "language_tag"),
        ("format", "format"),
        ("seed", "seed"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return replace(config, **overrides).resolve_seed()


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _read_file(path: str | Path) -> bytes:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"file not found: {p}")
    return p.read_bytes()


def _file_format(name: str) -> FileFormat:
    return FileFormat(name)


def _parse_split(
    path: str | Path,
    format: str,
    has_labels: bool,
    name: SplitName,
    language_tag: str = "",
) -> DatasetSplit:
    return parse_dataset(
        _read_file(path),
        format=_file_format(format),
        has_labels=has_labels,
        name=name,
        language_tag=language_tag,
    )


def _has_label_column(path: str | Path, format: str) -> bool:
    data = _read_file(path)
    text = data.decode("utf-8", errors="replace")
    if text.startswith("﻿"):
        text = text[1:]
    header_line = text.split("\n", 1)[0].rstrip("\r")
    if _file_format(format) is FileFormat.TSV:
        header = header_line.split("\t")
    else:
        import csv as _csv
        import io as _io

        header = next(_csv.reader(_io.StringIO(header_line)), [])
    return "label" in [cell.strip() for cell in header]


def _stats_lines(split: DatasetSplit) -> list[str]:
    stats = compute_stats(split)
    return [
        f"total:        {stats.total}",
        f"abusive:      {stats.per_label[Label.ABUSIVE]}",
        f"non-abusive:  {stats.per_label[Label.NON_ABUSIVE]}",
        f"unlabeled:    {stats.unlabeled}",
    ]


def _report_doc(cm: metrics.ConfusionMatrix) -> dict[str, Any]:
    report = metrics.class_report(cm)
    return {
        "per_class": {
            label.to_text(): asdict(report.per_class[label])
            for label in (Label.ABUSIVE, Label.NON_ABUSIVE)
        },
        "macro_f1": report.macro_f1,
        "accuracy": report.accuracy,
        "confusion": {"tp": cm.tp, "fn": cm.fn, "fp": cm.fp, "tn": cm.tn},
    }


def _print_report_table(cm: metrics.ConfusionMatrix) -> None:
    report = metrics.class_report(cm)
    print(f"{'class':<14}{'precision':>10}{'recall':>10}{'f1':>10}")
    for label in (Label.ABUSIVE, Label.NON_ABUSIVE):
        prf = report.per_class[label]
        print(
            f"{label.to_text():<14}{prf.precision:>10.4f}"
            f"{prf.recall:>10.4f}{prf.f1:>10.4f}"
        )
    print(f"macro F1:  {report.macro_f1:.4f}")
    print(f"accuracy:  {report.accuracy:.4f}")
    print(f"confusion: tp={cm.tp} fn={cm.fn} fp={cm.fp} tn={cm.tn}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_stats(args: argparse.Namespace) -> int:
    has_labels = _has_label_column(args.input, args.format)
    split = _parse_split(
        args.input, args.format, has_labels,
        name=SplitName.TRAIN if has_labels else SplitName.TEST,
    )
    for line in _stats_lines(split):
        print(line)
    return EXIT_OK


def cmd_preprocess(args: argparse.Namespace) -> int:
    policy = textprep.CleanPolicy(
        remove_urls=not args.keep_urls,
        strip_specials=not args.keep_specials,
        collapse_whitespace=not args.keep_whitespace,
        lowercase_latin=not args.keep_case,
        strip_digits=args.strip_digits,
    )
    for line in sys.stdin:
        print(textprep.preprocess(line.rstrip("\n"), policy))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    split = synth_corpus(
        seed=args.seed,
        n_per_class=args.n_per_class,
        name=SplitName(args.name),
    )
    Path(args.out).write_bytes(write_dataset(split, _file_format(args.format)))
    print(f"wrote {len(split.examples)} examples to {args.out}")
    return EXIT_OK


def _train_tfidf_lr(
    config: RunConfig, train_split: DatasetSplit, dev_split: DatasetSplit | None
) -> bundlemod.ModelBundle:
    texts = [
        textprep.preprocess(t, config.preprocessing) for t in train_split.texts()
    ]
    tfidf = vectorizer.fit(texts, config.tfidf)
    data = [
        (vectorizer.transform(tfidf, text), example.label)
        for text, example in zip(texts, train_split.examples)
    ]
    model, report = linear.train_lr(data, config.lr)
    for epoch, loss in enumerate(report.epoch_losses, start=1):
        print(f"epoch {epoch}: train_loss {loss:.6f}")
    if dev_split is not None:
        gold, pred = [], []
        for example in dev_split.examples:
            text = textprep.preprocess(example.text, config.preprocessing)
            p = linear.predict_proba(model, vectorizer.transform(tfidf, text))
            gold.append(example.label)
            pred.append(linear.decide(p))
        score = metrics.macro_f1(metrics.confusion(gold, pred))
        print(f"dev macro F1: {score:.4f}")
    payload = bundlemod.TfIdfLrPayload(
        tfidf=tfidf, linear=model, train_config=config.lr, report=report
    )
    return bundlemod.ModelBundle(
        model_kind=bundlemod.KIND_TFIDF_LR,
        language_tag=config.language_tag,
        policy=config.preprocessing,
        payload=payload,
    )


def _train_micro_encoder(
    config: RunConfig, train_split: DatasetSplit, dev_split: DatasetSplit
) -> bundlemod.ModelBundle:
    train_texts = [
        textprep.preprocess(t, config.preprocessing) for t in train_split.texts()
    ]
    dev_texts = [
        textprep.preprocess(t, config.preprocessing) for t in dev_split.texts()
    ]
    tokenizer = enc.train_subword(train_texts, config.encoder_vocab_size)
    model, report = enc.train_encoder(
        train=list(zip(train_texts, train_split.labels())),
        dev=list(zip(dev_texts, dev_split.labels())),
        tokenizer=tokenizer,
        enc_config=config.encoder,
        train_config=config.encoder_train,
    )
    for epoch, (loss, f1) in enumerate(
        zip(report.epoch_train_losses, report.epoch_dev_macro_f1), start=1
    ):
        print(f"epoch {epoch}: train_loss {loss:.6f} dev_macro_f1 {f1:.4f}")
    payload = bundlemod.MicroEncoderPayload(
        tokenizer=tokenizer,
        model=model,
        train_config=config.encoder_train,
        report=report,
    )
    return bundlemod.ModelBundle(
        model_kind=bundlemod.KIND_MICRO_ENCODER,
        language_tag=config.language_tag,
        policy=config.preprocessing,
        payload=payload,
    )


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    if not config.train_path:
        raise ValueError("no training file configured (use --train or the config file)")
    if not config.model_path:
        raise ValueError("no model output path configured (use --out)")
    if config.model_kind not in (
        bundlemod.KIND_TFIDF_LR, bundlemod.KIND_MICRO_ENCODER
    ):
        raise ValueError(f"unknown model_kind {config.model_kind!r}")

    train_split = _parse_split(
        config.train_path, config.format, has_labels=True,
        name=SplitName.TRAIN, language_tag=config.language_tag,
    )
    print(f"train split ({config.train_path}):")
    for line in _stats_lines(train_split):
        print(f"  {line}")

    dev_split = None
    if config.dev_path:
        dev_split = _parse_split(
            config.dev_path, config.format, has_labels=True,
            name=SplitName.DEV, language_tag=config.language_tag,
        )
    if config.model_kind == bundlemod.KIND_MICRO_ENCODER and dev_split is None:
        raise DevRequiredError(
            "the micro_encoder arm evaluates on dev every epoch; supply --dev"
        )

    if config.model_kind == bundlemod.KIND_TFIDF_LR:
        result = _train_tfidf_lr(config, train_split, dev_split)
    else:
        result = _train_micro_encoder(config, train_split, dev_split)
    bundlemod.save_bundle(result, config.model_path)
    print(f"model bundle written to {config.model_path}")
    return EXIT_OK


def _bundle_probabilities(
    bundle: bundlemod.ModelBundle, texts: list[str]
) -> list[float]:
    cleaned = [textprep.preprocess(t, bundle.policy) for t in texts]
    if bundle.model_kind == bundlemod.KIND_TFIDF_LR:
        payload = bundle.payload
        return [
            linear.predict_proba(
                payload.linear, vectorizer.transform(payload.tfidf, text)
            )
            for text in cleaned
        ]
    payload = bundle.payload
    max_length = payload.model.config.max_length
    probs: list[float] = []
    chunk = 64
    for start in range(0, len(cleaned), chunk):
        block = cleaned[start : start + chunk]
        ids = np.empty((len(block), max_length), dtype=np.int64)
        mask = np.empty((len(block), max_length), dtype=np.float64)
        for row, text in enumerate(block):
            ids[row], mask[row] = enc.encode(payload.tokenizer, text, max_length)
        probs.extend(float(p) for p in enc.predict_probs(payload.model, ids, mask))
    return probs


def cmd_predict(args: argparse.Namespace) -> int:
    bundle = bundlemod.load_bundle(Path(_require_path(args.model)))
    has_labels = _has_label_column(args.input, args.format)
    split = _parse_split(
        args.input, args.format, has_labels=has_labels, name=SplitName.TEST
    )
    probs = _bundle_probabilities(bundle, [ex.text for ex in split.examples])
    lines = ["id\tprobability\tlabel"]
    for example, p in zip(split.examples, probs):
        lines.append(f"{example.id}\t{p:.6f}\t{linear.decide(p).to_text()}")
    Path(args.out).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    print(f"wrote {len(probs)} predictions to {args.out}")
    return EXIT_OK


def _require_path(path: str) -> str:
    if not Path(path).exists():
        raise FileNotFoundError(f"file not found: {path}")
    return path


def _parse_predictions(path: str | Path) -> dict[str, Label]:
    """Read a predictions TSV (id, probability, label) into id -> label."""
    text = _read_file(path).decode("utf-8")
    lines = [line for line in text.split("\n") if line != ""]
    if not lines:
        raise MalformedRow(1, "predictions file is empty")
    header = lines[0].rstrip("\r").split("\t")
    columns = {cell.strip(): i for i, cell in enumerate(header)}
    if "id" not in columns or "label" not in columns:
        raise MalformedRow(1, "predictions header must name 'id' and 'label'")
    out: dict[str, Label] = {}
    for number, line in enumerate(lines[1:], start=2):
        cells = line.rstrip("\r").split("\t")
        if len(cells) != len(header):
            raise MalformedRow(
                number, f"expected {len(header)} columns, found {len(cells)}"
            )
        row_id = cells[columns["id"]].strip()
        if row_id in out:
            raise MalformedRow(number, f"duplicate id {row_id!r}")
        try:
            out[row_id] = map_label(cells[columns["label"]])
        except UnknownLabel as exc:
            raise MalformedRow(number, str(exc)) from exc
    return out


def cmd_evaluate(args: argparse.Namespace) -> int:
    gold_split = _parse_split(
        args.gold, args.format, has_labels=True, name=SplitName.DEV
    )
    predictions = _parse_predictions(args.pred)
    gold_ids = [ex.id for ex in gold_split.examples]
    missing_in_pred = [i for i in gold_ids if i not in predictions]
    gold_id_set = set(gold_ids)
    missing_in_gold = [i for i in predictions if i not in gold_id_set]
    if missing_in_pred or missing_in_gold:
        raise IdMismatchError(missing_in_pred[:10], missing_in_gold[:10])
    gold = [ex.label for ex in gold_split.examples]
    pred = [predictions[i] for i in gold_ids]
    cm = metrics.confusion(gold, pred)
    _print_report_table(cm)
    if args.json_out:
        doc = _report_doc(cm)
        text = json.dumps(doc, ensure_ascii=False, indent=2, allow_nan=False)
        Path(args.json_out).write_bytes((text + "\n").encode("utf-8"))
        print(f"json report written to {args.json_out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing and error mapping
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abusivetext",
        description="Train, run, and evaluate binary abusive-comment classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_stats = sub.add_parser("stats", help="summarize a dataset file")
    p_stats.add_argument("--input", required=True)
    p_stats.add_argument("--format", choices=["tsv", "csv"], default="tsv")
    p_stats.set_defaults(func=cmd_stats)

    p_prep = sub.add_parser(
        "preprocess", help="clean text from stdin to stdout, one record per line"
    )
    p_prep.add_argument("--keep-urls", action="store_true")
    p_prep.add_argument("--keep-specials", action="store_true")
    p_prep.add_argument("--keep-whitespace", action="store_true")
    p_prep.add_argument("--keep-case", action="store_true")
    p_prep.add_argument("--strip-digits", action="store_true")
    p_prep.set_defaults(func=cmd_preprocess)

    p_synth = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--n-per-class", type=int, required=True)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--name", choices=["train", "dev", "test"], default="train")
    p_synth.add_argument("--format", choices=["tsv", "csv"], default="tsv")
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="train a model and write its bundle")
    p_train.add_argument("--config", help="JSON run-config file")
    p_train.add_argument("--train", help="training data path")
    p_train.add_argument("--dev", help="dev data path (required for micro_encoder)")
    p_train.add_argument("--out", help="bundle output path")
    p_train.add_argument(
        "--model-kind", choices=[bundlemod.KIND_TFIDF_LR, bundlemod.KIND_MICRO_ENCODER]
    )
    p_train.add_argument("--language")
    p_train.add_argument("--format", choices=["tsv", "csv"])
    p_train.add_argument("--seed", type=int)
    p_train.set_defaults(func=cmd_train)

    p_pred = sub.add_parser("predict", help="run a bundle over a dataset file")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--input", required=True)
    p_pred.add_argument("--out", required=True)
    p_pred.add_argument("--format", choices=["tsv", "csv"], default="tsv")
    p_pred.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("evaluate", help="score predictions against gold labels")
    p_eval.add_argument("--gold", required=True)
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--format", choices=["tsv", "csv"], default="tsv")
    p_eval.add_argument("--json-out")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def _classify_error(exc: Exception) -> tuple[str, int]:
    if isinstance(exc, FileNotFoundError):
        return "FILE_NOT_FOUND", EXIT_FILE_NOT_FOUND
    if isinstance(exc, DevRequiredError):
        return "DEV_REQUIRED", EXIT_DEV_REQUIRED
    if isinstance(exc, BundleVersionError):
        return "BUNDLE_VERSION", EXIT_BUNDLE_VERSION
    if isinstance(exc, BundleInconsistentError):
        return "BUNDLE_INCONSISTENT", EXIT_BUNDLE_INCONSISTENT
    if isinstance(exc, IdMismatchError):
        return "ID_MISMATCH", EXIT_ID_MISMATCH
    if isinstance(exc, MalformedRow):
        return "MALFORMED_ROW", EXIT_ERROR
    if isinstance(exc, EncodingError):
        return "ENCODING", EXIT_ERROR
    if isinstance(exc, (UnknownLabel, AbusiveTextError)):
        return "DATA", EXIT_ERROR
    if isinstance(exc, (ValueError, KeyError, TypeError, json.JSONDecodeError)):
        return "CONFIG", EXIT_ERROR
    return "INTERNAL", EXIT_ERROR


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single mapping point to exit codes
        code, exit_code = _classify_error(exc)
        print(f"ERROR {code}: {exc}", file=sys.stderr)
        return exit_code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
