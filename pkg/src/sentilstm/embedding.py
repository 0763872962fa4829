"""Skip-gram word embeddings with negative sampling, trained from scratch.

For a (center, context) pair with center vector v, context vector u, and
sampled noise vectors u_n, the per-pair loss is

    L = -log sigma(u . v) - sum_n log sigma(-u_n . v)

minimized by plain SGD with a learning rate that decays linearly to 10% of
its initial value over the whole run. Context windows are dynamic: each
center draws an effective width uniformly from [1, window], as the usual
implementations of this objective do. Negatives are drawn from the unigram
distribution raised to the 0.75 power.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import binio
from .corpus import PAD_INDEX, UNK_INDEX, Vocabulary
from .errors import FormatError, TrainingError

log = logging.getLogger(__name__)

NEGATIVE_POWER = 0.75
FINAL_LR_FRACTION = 0.1

EMB_MAGIC = b"SENTI-EMB\x00"
EMB_VERSION = 1


@dataclass
class EmbeddingConfig:
    dim: int = 100
    window: int = 7
    min_count: int = 10
    iterations: int = 10
    negatives: int = 5
    learning_rate: float = 0.025
    seed: int = 1
    dynamic_window: bool = True

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.negatives < 0:
            raise ValueError("negatives must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class EmbeddingMatrix:
    """(vocab+2) x dim dense matrix; row 0 is the all-zero padding vector."""

    rows: np.ndarray
    vocab_fingerprint: bytes = b"\x00" * 32

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")

    @property
    def dim(self):
        return self.rows.shape[1]

    @property
    def n_rows(self):
        return self.rows.shape[0]

    def copy(self):
        return EmbeddingMatrix(rows=self.rows.copy(), vocab_fingerprint=self.vocab_fingerprint)

    def fingerprint(self) -> bytes:
        """Checksum over shape, vocab binding, and float32 payload."""
        return binio.sha256(
            binio.pack_u32(self.n_rows),
            binio.pack_u32(self.dim),
            self.vocab_fingerprint,
            binio.pack_f32_array(self.rows),
        )


def random_embedding(vocab: Vocabulary, dim: int, seed: int) -> EmbeddingMatrix:
    """Randomly initialized embeddings (pad row zero), for training without
    skip-gram pretraining."""
    rng = np.random.default_rng(seed)
    rows = rng.uniform(-0.5 / dim, 0.5 / dim, size=(len(vocab), dim))
    rows[PAD_INDEX] = 0.0
    return EmbeddingMatrix(rows=rows, vocab_fingerprint=vocab.fingerprint())


def generate_pairs(sequences, window: int, seed, dynamic: bool = True):
    """Yield (center, context) index pairs, excluding pad/unk everywhere.

    Pad and unk positions are dropped before windowing (the remaining tokens
    close ranks, as in standard implementations of this objective). With
    `dynamic`, each center position draws its effective window width
    uniformly from [1, window] in a fixed order, so a given seed replays the
    identical stream.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    rng = np.random.default_rng(seed)
    for seq in sequences:
        tokens = [int(t) for t in np.asarray(seq).ravel()
                  if int(t) not in (PAD_INDEX, UNK_INDEX)]
        n = len(tokens)
        for p in range(n):
            w = int(rng.integers(1, window + 1)) if dynamic else window
            for q in range(max(0, p - w), min(n, p + w + 1)):
                if q != p:
                    yield tokens[p], tokens[q]


class NegativeSampler:
    """Draws token indices from the unigram^0.75 distribution."""

    def __init__(self, vocab: Vocabulary):
        counts = np.array(
            [vocab.frequencies[t] for t in vocab.index_to_token[2:]], dtype=np.float64
        )
        if len(counts) == 0:
            raise TrainingError("cannot build a negative sampler from an empty vocabulary")
        weights = counts ** NEGATIVE_POWER
        self.probabilities = weights / weights.sum()
        self._cumulative = np.cumsum(self.probabilities)
        self._cumulative[-1] = 1.0

    def sample(self, rng, k: int) -> np.ndarray:
        """k token indices (>= 2, never pad/unk)."""
        u = rng.random(k)
        return 2 + np.searchsorted(self._cumulative, u, side="right")


def _log_sigmoid(x: float) -> float:
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    ex = np.exp(x)
    return ex / (1.0 + ex)


def sgns_gradient(center, context, negatives):
    """Loss and analytic gradients for one (center, context, negatives) sample.

    Returns (loss, g_center, g_context, g_negatives) where g_negatives has one
    row per negative vector. The positive pair contributes coefficient
    (sigma(u.v) - 1) and each negative contributes sigma(u_n.v) on its dot
    product.
    """
    center = np.asarray(center, dtype=np.float64)
    context = np.asarray(context, dtype=np.float64)
    negatives = np.asarray(negatives, dtype=np.float64).reshape(-1, center.shape[0])

    s_pos = _sigmoid(float(context @ center))
    loss = -_log_sigmoid(float(context @ center))
    coef_pos = s_pos - 1.0
    g_center = coef_pos * context
    g_context = coef_pos * center

    g_negatives = np.zeros_like(negatives)
    for n in range(negatives.shape[0]):
        dot = float(negatives[n] @ center)
        s_neg = _sigmoid(dot)
        loss -= _log_sigmoid(-dot)
        g_center = g_center + s_neg * negatives[n]
        g_negatives[n] = s_neg * center
    return float(loss), g_center, g_context, g_negatives


def train_skipgram(sequences, config: EmbeddingConfig, vocab: Vocabulary) -> EmbeddingMatrix:
    """Train the embedding matrix on encoded token sequences.

    Center vectors start uniform in [-0.5/dim, 0.5/dim], context vectors at
    zero. The pad row is never touched; the unk row (excluded from pairs) is
    set to the mean of all trained token rows at the end. Deterministic for a
    fixed seed.
    """
    if vocab.n_tokens < 2:
        raise TrainingError(f"vocabulary too small to train embeddings ({vocab.n_tokens} tokens)")
    dim = config.dim
    rng_init = np.random.default_rng((config.seed, 0))
    W = rng_init.uniform(-0.5 / dim, 0.5 / dim, size=(len(vocab), dim))
    W[PAD_INDEX] = 0.0
    W[UNK_INDEX] = 0.0
    C = np.zeros_like(W)

    sampler = NegativeSampler(vocab)
    rng_neg = np.random.default_rng((config.seed, 1))
    lr0 = config.learning_rate
    total_epochs = config.iterations

    for epoch in range(total_epochs):
        pairs = list(generate_pairs(sequences, config.window,
                                    seed=(config.seed, 2, epoch),
                                    dynamic=config.dynamic_window))
        if not pairs:
            log.warning("epoch %d: no training pairs produced", epoch)
            continue
        n_pairs = len(pairs)
        loss_sum = 0.0
        for j, (center_idx, context_idx) in enumerate(pairs):
            progress = (epoch + j / n_pairs) / total_epochs
            lr = lr0 * (1.0 - (1.0 - FINAL_LR_FRACTION) * progress)

            negs = sampler.sample(rng_neg, config.negatives) if config.negatives else np.empty(0, dtype=int)
            negs = negs[negs != context_idx]
            loss, g_center, g_context, g_negs = sgns_gradient(
                W[center_idx], C[context_idx], C[negs]
            )
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at iteration {epoch}, pair {j}")
            loss_sum += loss
            C[context_idx] -= lr * g_context
            for n, neg_idx in enumerate(negs):
                C[neg_idx] -= lr * g_negs[n]
            W[center_idx] -= lr * g_center
        log.info("embedding iteration %d/%d: mean loss %.4f over %d pairs",
                 epoch + 1, total_epochs, loss_sum / n_pairs, n_pairs)

    W[UNK_INDEX] = W[2:].mean(axis=0)
    return EmbeddingMatrix(rows=W, vocab_fingerprint=vocab.fingerprint())


def save_embeddings(matrix: EmbeddingMatrix, path):
    """Binary format: magic, version, rows, dim, vocab checksum, f32 payload."""
    if not np.all(np.isfinite(matrix.rows)):
        raise FormatError("refusing to save embeddings containing non-finite values")
    if len(matrix.vocab_fingerprint) != 32:
        raise FormatError("embedding matrix has no 32-byte vocabulary fingerprint")
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(binio.pack_u32(EMB_VERSION))
        f.write(binio.pack_u32(matrix.n_rows))
        f.write(binio.pack_u32(matrix.dim))
        f.write(matrix.vocab_fingerprint)
        f.write(binio.pack_f32_array(matrix.rows))


def load_embeddings(path, vocab: Vocabulary = None) -> EmbeddingMatrix:
    """Load and validate; if `vocab` is given, its fingerprint must match."""
    with open(path, "rb") as f:
        reader = binio.Reader(f.read(), str(path))
    reader.expect_magic(EMB_MAGIC, "senti-embedding")
    reader.expect_version(EMB_VERSION, "senti-embedding")
    n_rows = reader.u32()
    dim = reader.u32()
    vocab_fp = reader.take(32)
    rows = reader.f32_array((n_rows, dim))
    reader.expect_eof()
    if vocab is not None and vocab.fingerprint() != vocab_fp:
        raise FormatError(f"{path}: embeddings were built for a different vocabulary")
    return EmbeddingMatrix(rows=rows, vocab_fingerprint=vocab_fp)
