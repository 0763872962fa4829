"""Classifier training loop: minibatch gradient descent with Adam or plain
SGD, global-norm gradient clipping, and deterministic checkpointing.

All shuffling and initialization route through seeded generators, so a fixed
config reproduces byte-identical artifacts. Checkpoints chain integrity
hashes: the model file records the embedding checksum, the embedding file
records the vocabulary checksum, and the manifest records per-file digests.
"""

import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import binio
from .corpus import PAD_INDEX, Vocabulary, load_vocabulary, save_vocabulary
from .embedding import EmbeddingMatrix, load_embeddings, save_embeddings
from .errors import FormatError, TrainingError
from .metrics import MetricsReport, confusion, metrics
from .nnet import (Grads, LstmParams, RnnParams, backward, cross_entropy,
                   forward)

log = logging.getLogger(__name__)

OPTIMIZERS = ("adam", "sgd")
DEFAULT_LR = {"adam": 0.001, "sgd": 0.1}

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

LSTM_MAGIC = b"SENTI-LSTM\x00"
RNN_MAGIC = b"SENTI-RNN\x00"
MODEL_VERSION = 1

MANIFEST_NAME = "manifest.json"
MODEL_FILE = "model.bin"
EMBEDDINGS_FILE = "embeddings.bin"
VOCAB_FILE = "vocab.tsv"


@dataclass
class TrainConfig:
    epochs: int = 4
    batch_size: int = 32
    optimizer: str = "adam"
    learning_rate: float = None  # resolved per optimizer when unset
    clip_norm: float = 5.0
    seed: int = 1
    shuffle: bool = True
    update_embeddings: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive (or None to disable)")

    @property
    def resolved_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return DEFAULT_LR[self.optimizer]


@dataclass
class TrainReport:
    epoch_losses: list = field(default_factory=list)
    epoch_accuracies: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)
    total_steps: int = 0
    final_metrics: MetricsReport = None  # held-out evaluation, when requested

    @property
    def final_loss(self):
        return self.epoch_losses[-1] if self.epoch_losses else None

    @property
    def final_accuracy(self):
        return self.epoch_accuracies[-1] if self.epoch_accuracies else None


def adam_update(param, grad, m, v, t, lr,
                beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
    """One bias-corrected Adam step, in place on param/m/v. t counts from 1."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class _Optimizer:
    """Owns the moment buffers for the named tensors and the embedding rows."""

    def __init__(self, params, embedding, config: TrainConfig):
        self.config = config
        self.lr = config.resolved_learning_rate
        self.t = 0
        if config.optimizer == "adam":
            self.m = {name: np.zeros_like(tensor) for name, tensor in params.tensors().items()}
            self.v = {name: np.zeros_like(tensor) for name, tensor in params.tensors().items()}
            self.m_emb = np.zeros_like(embedding.rows)
            self.v_emb = np.zeros_like(embedding.rows)

    def step(self, params, embedding, grads: Grads):
        self.t += 1
        tensors = params.tensors()
        if self.config.optimizer == "sgd":
            for name, g in grads.tensors.items():
                tensors[name] -= self.lr * g
            if self.config.update_embeddings:
                for row in sorted(grads.embedding_rows):
                    embedding.rows[row] -= self.lr * grads.embedding_rows[row]
            return
        for name in sorted(grads.tensors):
            adam_update(tensors[name], grads.tensors[name],
                        self.m[name], self.v[name], self.t, self.lr)
        if self.config.update_embeddings:
            # lazy moments: untouched rows keep their state and get no update
            for row in sorted(grads.embedding_rows):
                adam_update(embedding.rows[row], grads.embedding_rows[row],
                            self.m_emb[row], self.v_emb[row], self.t, self.lr)


def clip_grads(grads: Grads, clip_norm) -> float:
    """Scale all gradients so their global L2 norm is at most clip_norm.
    Returns the pre-clip norm."""
    norm = grads.global_norm()
    if clip_norm is not None and norm > clip_norm and norm > 0.0:
        grads.scale_(clip_norm / norm)
    return norm


def _batch_grads(params, embedding, batch):
    """Mean loss, mean grads, and correct-prediction count over one batch."""
    total = Grads.zeros_like(params)
    loss_sum = 0.0
    n_correct = 0
    for ex in batch:
        trace = forward(params, embedding, ex.indices)
        loss_sum += cross_entropy(trace.logits, ex.label)
        if trace.predicted == ex.label:
            n_correct += 1
        total.add_(backward(trace, params, ex.label))
    total.scale_(1.0 / len(batch))
    return loss_sum / len(batch), total, n_correct


def train(examples, params, embedding: EmbeddingMatrix, config: TrainConfig,
          eval_examples=None, averaging: str = "macro"):
    """Train the classifier (and, by default, fine-tune the embedding rows)
    in place; returns (params, report). When eval_examples is given, the
    report carries a final held-out MetricsReport."""
    examples = list(examples)
    if not examples:
        raise TrainingError("no training examples")
    for i, ex in enumerate(examples):
        if not np.any(np.asarray(ex.indices) != PAD_INDEX):
            raise TrainingError(f"training example {i} is empty after masking")
    if embedding.dim != params.input_dim:
        raise TrainingError(
            f"embedding dim {embedding.dim} does not match model input dim {params.input_dim}"
        )

    optimizer = _Optimizer(params, embedding, config)
    shuffle_rng = np.random.default_rng((config.seed, 17))
    report = TrainReport()
    n = len(examples)

    for epoch in range(config.epochs):
        started = time.perf_counter()
        order = shuffle_rng.permutation(n) if config.shuffle else np.arange(n)
        loss_weighted = 0.0
        n_correct = 0
        for start in range(0, n, config.batch_size):
            batch = [examples[i] for i in order[start:start + config.batch_size]]
            batch_loss, grads, correct = _batch_grads(params, embedding, batch)
            if not np.isfinite(batch_loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, step {report.total_steps}"
                )
            clip_grads(grads, config.clip_norm)
            optimizer.step(params, embedding, grads)
            loss_weighted += batch_loss * len(batch)
            n_correct += correct
            report.total_steps += 1
        report.epoch_losses.append(loss_weighted / n)
        report.epoch_accuracies.append(n_correct / n)
        report.epoch_seconds.append(time.perf_counter() - started)
        log.info("epoch %d/%d: loss %.4f, accuracy %.4f (%.1fs)",
                 epoch + 1, config.epochs, report.epoch_losses[-1],
                 report.epoch_accuracies[-1], report.epoch_seconds[-1])
    if eval_examples is not None:
        report.final_metrics = evaluate_model(params, embedding, eval_examples,
                                              averaging=averaging)
    return params, report


def predict_dataset(params, embedding, examples) -> np.ndarray:
    """Predicted labels for a list of encoded examples."""
    return np.array([forward(params, embedding, ex.indices).predicted
                     for ex in examples], dtype=np.int64)


def evaluate_model(params, embedding, examples, averaging="macro") -> MetricsReport:
    actual = np.array([ex.label for ex in examples], dtype=np.int64)
    predicted = predict_dataset(params, embedding, examples)
    return metrics(confusion(actual, predicted), averaging=averaging)


def _model_magic(params):
    if isinstance(params, LstmParams):
        return LSTM_MAGIC
    if isinstance(params, RnnParams):
        return RNN_MAGIC
    raise TypeError(f"unsupported parameter type {type(params).__name__}")


def save_model(params, path, embedding_fingerprint: bytes, maxlen: int):
    """Model file: magic, version, dims, embedding checksum, tensors (f32),
    trailing CRC32 over everything before it."""
    if len(embedding_fingerprint) != 32:
        raise FormatError("embedding fingerprint must be 32 bytes")
    chunks = [
        _model_magic(params),
        binio.pack_u32(MODEL_VERSION),
        binio.pack_u32(params.hidden),
        binio.pack_u32(params.input_dim),
        binio.pack_u32(params.classes),
        binio.pack_u32(maxlen),
        embedding_fingerprint,
    ]
    tensors = params.tensors()
    for name in type(params).TENSOR_NAMES:
        if not np.all(np.isfinite(tensors[name])):
            raise FormatError(f"refusing to save non-finite tensor {name}")
        chunks.append(binio.pack_f32_array(tensors[name]))
    with open(path, "wb") as f:
        f.write(binio.append_crc(chunks))


def load_model(path):
    """Returns (params, maxlen, embedding_fingerprint). CRC and shape
    mismatches raise FormatError."""
    with open(path, "rb") as f:
        body = binio.strip_crc(f.read(), str(path))
    reader = binio.Reader(body, str(path))
    if reader.peek(len(LSTM_MAGIC)) == LSTM_MAGIC:
        cls = LstmParams
        reader.expect_magic(LSTM_MAGIC, "senti-model")
    elif reader.peek(len(RNN_MAGIC)) == RNN_MAGIC:
        cls = RnnParams
        reader.expect_magic(RNN_MAGIC, "senti-model")
    else:
        raise FormatError(f"{path}: not a senti-model file")
    reader.expect_version(MODEL_VERSION, "senti-model")
    hidden = reader.u32()
    input_dim = reader.u32()
    classes = reader.u32()
    maxlen = reader.u32()
    emb_fp = reader.take(32)

    if cls is LstmParams:
        shapes = {}
        for gate in ("f", "i", "c", "o"):
            shapes[f"W_{gate}"] = (hidden, hidden + input_dim)
            shapes[f"b_{gate}"] = (hidden,)
        shapes["head_W"] = (classes, hidden)
        shapes["head_b"] = (classes,)
    else:
        shapes = {"W": (hidden, hidden + input_dim), "b": (hidden,),
                  "head_W": (classes, hidden), "head_b": (classes,)}
    tensors = {name: reader.f32_array(shapes[name]) for name in cls.TENSOR_NAMES}
    reader.expect_eof()
    return cls(**tensors), maxlen, emb_fp


def save_checkpoint(directory, params, embedding: EmbeddingMatrix,
                    vocab: Vocabulary, maxlen: int, tokenizer_mode: str,
                    extra: dict = None):
    """Write model.bin / embeddings.bin / vocab.tsv / manifest.json into
    `directory`. Deterministic: no timestamps, sorted manifest keys."""
    os.makedirs(directory, exist_ok=True)
    vocab_path = os.path.join(directory, VOCAB_FILE)
    emb_path = os.path.join(directory, EMBEDDINGS_FILE)
    model_path = os.path.join(directory, MODEL_FILE)

    if embedding.vocab_fingerprint != vocab.fingerprint():
        raise FormatError("embedding matrix does not match the vocabulary being saved")
    save_vocabulary(vocab, vocab_path)
    save_embeddings(embedding, emb_path)
    save_model(params, model_path, embedding.fingerprint(), maxlen)

    manifest = {
        "format": "senti-checkpoint",
        "version": 1,
        "kind": "lstm" if isinstance(params, LstmParams) else "rnn",
        "hidden": params.hidden,
        "input_dim": params.input_dim,
        "classes": params.classes,
        "maxlen": maxlen,
        "tokenizer": tokenizer_mode,
        "checksums": {
            MODEL_FILE: binio.sha256_file(model_path),
            EMBEDDINGS_FILE: binio.sha256_file(emb_path),
            VOCAB_FILE: binio.sha256_file(vocab_path),
        },
    }
    if extra:
        manifest["extra"] = extra
    with open(os.path.join(directory, MANIFEST_NAME), "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")


def load_checkpoint(directory):
    """Load and cross-validate a checkpoint directory.

    Returns (params, embedding, vocab, manifest). Any broken link in the
    integrity chain (manifest digests, embedding->vocab binding, or the
    model's recorded embedding checksum) raises FormatError.
    """
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    try:
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise FormatError(f"{directory}: missing {MANIFEST_NAME}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid JSON ({exc})") from None
    if manifest.get("format") != "senti-checkpoint":
        raise FormatError(f"{manifest_path}: not a senti-checkpoint manifest")
    if manifest.get("version") != 1:
        raise FormatError(
            f"{manifest_path}: unsupported checkpoint version {manifest.get('version')!r}"
        )

    checksums = manifest.get("checksums", {})
    for name in (MODEL_FILE, EMBEDDINGS_FILE, VOCAB_FILE):
        path = os.path.join(directory, name)
        if not os.path.exists(path):
            raise FormatError(f"{directory}: checkpoint is missing {name}")
        digest = binio.sha256_file(path)
        if checksums.get(name) != digest:
            raise FormatError(f"{directory}: {name} does not match its manifest checksum")

    vocab = load_vocabulary(os.path.join(directory, VOCAB_FILE))
    embedding = load_embeddings(os.path.join(directory, EMBEDDINGS_FILE), vocab=vocab)
    params, maxlen, emb_fp = load_model(os.path.join(directory, MODEL_FILE))
    if emb_fp != embedding.fingerprint():
        raise FormatError(
            f"{directory}: model was trained against a different embedding matrix"
        )
    if maxlen != manifest.get("maxlen"):
        raise FormatError(f"{directory}: manifest maxlen disagrees with model file")
    return params, embedding, vocab, manifest
