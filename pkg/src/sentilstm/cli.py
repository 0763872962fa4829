"""Command-line entry points.

Subcommands mirror the pipeline stages: ``preprocess`` (clean, split, build
the vocabulary, encode), ``train-embeddings`` (skip-gram pretraining),
``train`` (classifier training to a checkpoint directory), ``evaluate``,
``predict``, and ``compare`` (train the recurrent models and the classical
baselines on one split and print a side-by-side table).

Option precedence is flags > --config JSON file > built-in defaults; the
SENTI_OUTPUT_DIR environment variable slots between the flag and the config
file for the output directory. Artifacts contain no timestamps, so a fixed
seed reproduces them byte for byte.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import baselines as bl
from . import binio, corpus
from .metrics import (AVERAGING_SCHEMES, CLASS_NAMES, confusion, format_report,
                      format_table, metrics, report_to_dict, report_to_json)
from .embedding import (EmbeddingConfig, load_embeddings, random_embedding,
                        save_embeddings, train_skipgram)
from .errors import DatasetError, SentiError
from .nnet import forward, init_lstm_params, init_rnn_params
from .train import (TrainConfig, evaluate_model, load_checkpoint,
                    predict_dataset, save_checkpoint, train)

log = logging.getLogger(__name__)

META_NAME = "meta.json"
TRAIN_SPLIT = "train.tsv"
TEST_SPLIT = "test.tsv"
EMBEDDINGS_NAME = "embeddings.bin"
REPORT_NAME = "train_report.json"

OUTPUT_DIR_ENV = "SENTI_OUTPUT_DIR"


@dataclass
class RunConfig:
    """Every tunable the CLI understands, with the stock defaults."""

    maxlen: int = 100
    min_count: int = 10
    tokenizer: str = "auto"
    test_fraction: float = 0.2

    dim: int = 100
    window: int = 7
    iterations: int = 10
    negatives: int = 5
    embedding_lr: float = 0.025

    hidden: int = 50
    model: str = "lstm"
    epochs: int = 4
    batch_size: int = 32
    optimizer: str = "adam"
    learning_rate: float = None
    clip_norm: float = 5.0

    averaging: str = "macro"
    seed: int = 1
    output_dir: str = "senti-out"

    # names that came from a flag, the environment, or a config file,
    # as opposed to the defaults above
    explicit: frozenset = frozenset()

    def __post_init__(self):
        if self.tokenizer not in ("auto",) + corpus.TOKENIZER_MODES:
            raise ValueError(f"unknown tokenizer {self.tokenizer!r}")
        if self.model not in ("lstm", "rnn"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.averaging not in AVERAGING_SCHEMES:
            raise ValueError(f"unknown averaging scheme {self.averaging!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be strictly between 0 and 1")
        if self.maxlen < 1:
            raise ValueError("maxlen must be >= 1")


_FIELD_NAMES = {f.name for f in dataclasses.fields(RunConfig)} - {"explicit"}


def merge_config(args: argparse.Namespace) -> RunConfig:
    """flags > config file > env (output_dir only) > defaults."""
    values = {}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as f:
                loaded = json.load(f)
        except FileNotFoundError:
            raise SentiError(f"config file not found: {config_path}") from None
        except json.JSONDecodeError as exc:
            raise SentiError(f"{config_path}: invalid JSON ({exc})") from None
        if not isinstance(loaded, dict):
            raise SentiError(f"{config_path}: config must be a JSON object")
        unknown = sorted(set(loaded) - _FIELD_NAMES)
        if unknown:
            raise SentiError(f"{config_path}: unknown config keys {unknown}")
        values.update(loaded)

    env_out = os.environ.get(OUTPUT_DIR_ENV)
    if env_out:
        values["output_dir"] = env_out

    for name in _FIELD_NAMES:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            values[name] = flag_value
    try:
        return RunConfig(**values, explicit=frozenset(values))
    except (TypeError, ValueError) as exc:
        raise SentiError(str(exc)) from None


def _add_common(parser):
    parser.add_argument("--config", help="JSON file of option defaults")
    parser.add_argument("--seed", type=int, help="master random seed (default 1)")
    parser.add_argument("--output-dir", help="where artifacts are written")
    parser.add_argument("--quiet", action="store_true", help="only warnings on stderr")


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")


def _resolve_tokenizer(cfg: RunConfig, records) -> str:
    if cfg.tokenizer != "auto":
        return cfg.tokenizer
    mode = corpus.detect_tokenizer_mode(r.text for r in records)
    log.info("tokenizer auto-detected as %r", mode)
    return mode


def _encode_records(records, vocab, maxlen, mode):
    out = []
    for r in records:
        tokens = corpus.tokenize(corpus.clean_text(r.text), mode)
        out.append(corpus.encode_example(tokens, r.label, vocab, maxlen))
    return out


def _train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        epochs=cfg.epochs, batch_size=cfg.batch_size, optimizer=cfg.optimizer,
        learning_rate=cfg.learning_rate, seed=cfg.seed,
        clip_norm=cfg.clip_norm if cfg.clip_norm and cfg.clip_norm > 0 else None,
    )


def _class_counts(records):
    counts = {name: 0 for name in CLASS_NAMES}
    for r in records:
        counts[CLASS_NAMES[int(r.label)]] += 1
    return counts


def _drop_empty(records, mode):
    """Records whose text cleans to nothing cannot be encoded into a
    trainable sequence; drop them up front. Returns (kept, n_dropped)."""
    kept = [r for r in records if corpus.tokenize(corpus.clean_text(r.text), mode)]
    n_dropped = len(records) - len(kept)
    if not kept:
        raise DatasetError("no records with non-empty text after cleaning")
    if n_dropped:
        log.info("dropped %d record(s) with empty text after cleaning", n_dropped)
    return kept, n_dropped


def cmd_preprocess(args) -> int:
    cfg = merge_config(args)
    records = corpus.load_dataset(args.data)
    if not records:
        raise DatasetError(f"{args.data}: no records")
    mode = _resolve_tokenizer(cfg, records)
    records, n_dropped = _drop_empty(records, mode)
    train_records, test_records = corpus.stratified_split(
        records, cfg.test_fraction, seed=(cfg.seed, 11)
    )
    tokenized = [corpus.tokenize(corpus.clean_text(r.text), mode) for r in train_records]
    vocab = corpus.build_vocabulary(tokenized, cfg.min_count)
    if vocab.n_tokens == 0:
        raise DatasetError(
            f"no token reaches min_count={cfg.min_count}; lower --min-count or add data"
        )

    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    corpus.save_vocabulary(vocab, os.path.join(out, "vocab.tsv"))
    train_examples = _encode_records(train_records, vocab, cfg.maxlen, mode)
    test_examples = _encode_records(test_records, vocab, cfg.maxlen, mode)
    corpus.save_encoded(train_examples, cfg.maxlen, os.path.join(out, TRAIN_SPLIT))
    corpus.save_encoded(test_examples, cfg.maxlen, os.path.join(out, TEST_SPLIT))
    _write_json(os.path.join(out, META_NAME), {
        "format": "senti-preprocess",
        "version": 1,
        "maxlen": cfg.maxlen,
        "min_count": cfg.min_count,
        "tokenizer": mode,
        "seed": cfg.seed,
        "test_fraction": cfg.test_fraction,
        "n_train": len(train_examples),
        "n_test": len(test_examples),
        "n_dropped_empty": n_dropped,
        "train_class_counts": _class_counts(train_records),
        "test_class_counts": _class_counts(test_records),
        "vocab_size": vocab.n_tokens,
    })
    log.info("preprocess: %d train / %d test examples, %d vocabulary tokens -> %s",
             len(train_examples), len(test_examples), vocab.n_tokens, out)
    print(f"wrote {out}: {len(train_examples)} train, {len(test_examples)} test, "
          f"{vocab.n_tokens} tokens")
    return 0


def _load_meta(input_dir):
    path = os.path.join(input_dir, META_NAME)
    try:
        with open(path, encoding="utf-8") as f:
            meta = json.load(f)
    except FileNotFoundError:
        raise SentiError(f"{input_dir}: not a preprocess directory (missing {META_NAME})") from None
    except json.JSONDecodeError as exc:
        raise SentiError(f"{path}: invalid JSON ({exc})") from None
    if meta.get("format") != "senti-preprocess":
        raise SentiError(f"{path}: not a preprocess manifest")
    return meta


def cmd_train_embeddings(args) -> int:
    cfg = merge_config(args)
    meta = _load_meta(args.input_dir)
    vocab = corpus.load_vocabulary(os.path.join(args.input_dir, "vocab.tsv"))
    examples, _ = corpus.load_encoded(os.path.join(args.input_dir, TRAIN_SPLIT))
    econf = EmbeddingConfig(
        dim=cfg.dim, window=cfg.window, min_count=meta["min_count"],
        iterations=cfg.iterations, negatives=cfg.negatives,
        learning_rate=cfg.embedding_lr, seed=cfg.seed,
    )
    matrix = train_skipgram([ex.indices for ex in examples], econf, vocab)
    # default to dropping the file next to its inputs
    out_dir = cfg.output_dir if "output_dir" in cfg.explicit else args.input_dir
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, EMBEDDINGS_NAME)
    save_embeddings(matrix, out_path)
    log.info("trained %dx%d embeddings -> %s", matrix.n_rows, matrix.dim, out_path)
    print(f"wrote {out_path} ({matrix.n_rows} rows x {matrix.dim})")
    return 0


def cmd_train(args) -> int:
    cfg = merge_config(args)
    meta = _load_meta(args.input_dir)
    vocab = corpus.load_vocabulary(os.path.join(args.input_dir, "vocab.tsv"))
    examples, maxlen = corpus.load_encoded(os.path.join(args.input_dir, TRAIN_SPLIT))

    if args.random_init:
        embedding = random_embedding(vocab, cfg.dim, seed=(cfg.seed, 4))
    else:
        emb_path = args.embeddings or os.path.join(args.input_dir, EMBEDDINGS_NAME)
        if not os.path.exists(emb_path):
            raise SentiError(
                f"no embeddings at {emb_path}; run train-embeddings first or pass --random-init"
            )
        embedding = load_embeddings(emb_path, vocab=vocab)

    if cfg.model == "lstm":
        params = init_lstm_params(cfg.hidden, embedding.dim, seed=(cfg.seed, 5))
    else:
        params = init_rnn_params(cfg.hidden, embedding.dim, seed=(cfg.seed, 7))
    tconf = _train_config(cfg)
    params, report = train(examples, params, embedding, tconf)

    out = cfg.output_dir
    save_checkpoint(out, params, embedding, vocab, maxlen, meta["tokenizer"],
                    extra={"optimizer": cfg.optimizer,
                           "learning_rate": tconf.resolved_learning_rate,
                           "epochs": cfg.epochs, "batch_size": cfg.batch_size,
                           "seed": cfg.seed})
    _write_json(os.path.join(out, REPORT_NAME), {
        "epoch_losses": report.epoch_losses,
        "epoch_accuracies": report.epoch_accuracies,
        "total_steps": report.total_steps,
    })
    log.info("checkpoint written to %s", out)
    print(f"wrote {out}: final loss {report.final_loss:.4f}, "
          f"accuracy {report.final_accuracy:.4f}")
    return 0


def _sniff_dataset(path):
    """Raw `label,text` CSV or an encoded split file, by the first line."""
    try:
        with open(path, encoding="utf-8") as f:
            first = f.readline()
    except FileNotFoundError:
        raise SentiError(f"{path}: no such file") from None
    return "encoded" if first.startswith("#senti-encoded") else "csv"


def _examples_for_checkpoint(path, vocab, maxlen, mode):
    if _sniff_dataset(path) == "encoded":
        examples, file_maxlen = corpus.load_encoded(path)
        if file_maxlen != maxlen:
            raise SentiError(
                f"{path}: encoded with maxlen={file_maxlen}, checkpoint expects {maxlen}"
            )
        return examples
    records = corpus.load_dataset(path)
    return _encode_records(records, vocab, maxlen, mode)


def cmd_evaluate(args) -> int:
    cfg = merge_config(args)
    params, embedding, vocab, manifest = load_checkpoint(args.checkpoint)
    examples = _examples_for_checkpoint(
        args.data, vocab, manifest["maxlen"], manifest["tokenizer"]
    )
    actual = np.array([ex.label for ex in examples], dtype=np.int64)
    predicted = predict_dataset(params, embedding, examples)
    cm = confusion(actual, predicted)
    report = metrics(cm, averaging=cfg.averaging)
    if args.format == "json":
        print(report_to_json(report, cm), end="")
    else:
        print(format_report(report, cm), end="")
    return 0


def cmd_predict(args) -> int:
    params, embedding, vocab, manifest = load_checkpoint(args.checkpoint)
    text = args.text if args.text is not None else sys.stdin.read()
    cleaned = corpus.clean_text(text)
    if not cleaned:
        raise DatasetError("input text is empty after cleaning")
    tokens = corpus.tokenize(cleaned, manifest["tokenizer"])
    example = corpus.encode_example(tokens, corpus.Sentiment.neutral, vocab,
                                    manifest["maxlen"])
    trace = forward(params, embedding, example.indices)
    label = CLASS_NAMES[trace.predicted]
    if args.format == "json":
        print(json.dumps({
            "prediction": label,
            "probabilities": {name: round(float(p), 4)
                              for name, p in zip(CLASS_NAMES, trace.probs)},
        }, sort_keys=True, indent=2))
    else:
        print(f"prediction: {label}")
        for name, p in zip(CLASS_NAMES, trace.probs):
            print(f"  {name}: {p:.4f}")
    return 0


def cmd_compare(args) -> int:
    cfg = merge_config(args)
    records = corpus.load_dataset(args.data)
    if not records:
        raise DatasetError(f"{args.data}: no records")
    mode = _resolve_tokenizer(cfg, records)
    records, _ = _drop_empty(records, mode)
    train_records, test_records = corpus.stratified_split(
        records, cfg.test_fraction, seed=(cfg.seed, 11)
    )
    tokenized = [corpus.tokenize(corpus.clean_text(r.text), mode) for r in train_records]
    vocab = corpus.build_vocabulary(tokenized, cfg.min_count)
    if vocab.n_tokens == 0:
        raise DatasetError(
            f"no token reaches min_count={cfg.min_count}; lower --min-count or add data"
        )
    train_examples = _encode_records(train_records, vocab, cfg.maxlen, mode)
    test_examples = _encode_records(test_records, vocab, cfg.maxlen, mode)
    test_labels = np.array([ex.label for ex in test_examples], dtype=np.int64)

    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    reports = {}

    if args.random_init:
        pretrained = random_embedding(vocab, cfg.dim, seed=(cfg.seed, 4))
    else:
        econf = EmbeddingConfig(dim=cfg.dim, window=cfg.window, min_count=cfg.min_count,
                                iterations=cfg.iterations, negatives=cfg.negatives,
                                learning_rate=cfg.embedding_lr, seed=cfg.seed)
        pretrained = train_skipgram([ex.indices for ex in train_examples], econf, vocab)

    tconf = _train_config(cfg)

    for kind in ("lstm", "rnn"):
        embedding = pretrained.copy()
        if kind == "lstm":
            params = init_lstm_params(cfg.hidden, embedding.dim, seed=(cfg.seed, 5))
        else:
            params = init_rnn_params(cfg.hidden, embedding.dim, seed=(cfg.seed, 7))
        log.info("training %s classifier", kind)
        train(train_examples, params, embedding, tconf)
        reports[kind] = evaluate_model(params, embedding, test_examples,
                                       averaging=cfg.averaging)
        save_checkpoint(os.path.join(out, kind), params, embedding, vocab,
                        cfg.maxlen, mode)

    train_counts = bl.count_features([ex.indices for ex in train_examples], vocab.n_tokens)
    test_counts = bl.count_features([ex.indices for ex in test_examples], vocab.n_tokens)
    train_labels = np.array([ex.label for ex in train_examples], dtype=np.int64)

    baseline_dir = os.path.join(out, "baselines")
    os.makedirs(baseline_dir, exist_ok=True)

    nb = bl.naive_bayes_fit(train_counts, train_labels)
    reports["naive-bayes"] = metrics(
        confusion(test_labels, bl.naive_bayes_predict(nb, test_counts)),
        averaging=cfg.averaging)
    bl.save_baseline(nb, os.path.join(baseline_dir, "naive_bayes.bin"), vocab.fingerprint())

    lr_model = bl.logreg_fit(train_counts, train_labels)
    reports["logreg"] = metrics(
        confusion(test_labels, bl.logreg_predict(lr_model, test_counts)),
        averaging=cfg.averaging)
    bl.save_baseline(lr_model, os.path.join(baseline_dir, "logreg.bin"), vocab.fingerprint())

    _write_json(os.path.join(baseline_dir, "manifest.json"), {
        "format": "senti-baselines",
        "version": 1,
        "models": {
            "naive-bayes": {"file": "naive_bayes.bin",
                            "checksum": binio.sha256_file(os.path.join(baseline_dir, "naive_bayes.bin"))},
            "logreg": {"file": "logreg.bin",
                       "checksum": binio.sha256_file(os.path.join(baseline_dir, "logreg.bin"))},
        },
    })

    order = ("lstm", "rnn", "naive-bayes", "logreg")
    payload = {
        "seed": cfg.seed,
        "averaging": cfg.averaging,
        "models": {name: report_to_dict(reports[name]) for name in order},
    }
    if args.format == "json":
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print(format_table({name: reports[name] for name in order}), end="")
    _write_json(os.path.join(out, "compare.json"), payload)
    log.info("comparison artifacts written to %s", out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sentilstm",
        description="Three-class sentiment classification with a from-scratch LSTM.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="clean, split, build vocabulary, encode")
    p.add_argument("--data", required=True, help="label,text CSV")
    p.add_argument("--maxlen", type=int)
    p.add_argument("--min-count", dest="min_count", type=int)
    p.add_argument("--tokenizer", choices=("auto",) + corpus.TOKENIZER_MODES)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train-embeddings", help="skip-gram pretraining on the train split")
    p.add_argument("--input-dir", required=True, help="preprocess output directory")
    p.add_argument("--dim", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--negatives", type=int)
    p.add_argument("--embedding-lr", dest="embedding_lr", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_train_embeddings)

    p = sub.add_parser("train", help="train the classifier into a checkpoint directory")
    p.add_argument("--input-dir", required=True, help="preprocess output directory")
    p.add_argument("--embeddings", help="embeddings file (default: input dir)")
    p.add_argument("--random-init", action="store_true",
                   help="random embeddings instead of a pretrained file")
    p.add_argument("--model", choices=("lstm", "rnn"))
    p.add_argument("--hidden", type=int)
    p.add_argument("--dim", type=int, help="embedding dim when --random-init")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--optimizer", choices=("adam", "sgd"))
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--clip-norm", dest="clip_norm", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint against a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="label,text CSV or encoded split")
    p.add_argument("--averaging", choices=AVERAGING_SCHEMES)
    p.add_argument("--format", choices=("text", "json"), default="text")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify one text (argument or stdin)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("text", nargs="?", help="text to classify (default: read stdin)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", help="train recurrent models and baselines, print a table")
    p.add_argument("--data", required=True, help="label,text CSV")
    p.add_argument("--maxlen", type=int)
    p.add_argument("--min-count", dest="min_count", type=int)
    p.add_argument("--tokenizer", choices=("auto",) + corpus.TOKENIZER_MODES)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--random-init", action="store_true",
                   help="skip embedding pretraining")
    p.add_argument("--dim", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--negatives", type=int)
    p.add_argument("--embedding-lr", dest="embedding_lr", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--optimizer", choices=("adam", "sgd"))
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--clip-norm", dest="clip_norm", type=float)
    p.add_argument("--averaging", choices=AVERAGING_SCHEMES)
    p.add_argument("--format", choices=("text", "json"), default="text")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except SentiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
