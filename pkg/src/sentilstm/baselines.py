"""Classical baselines over bag-of-token-count features.

All three baselines share one featurization: raw token counts over the real
vocabulary (padding and unknown indices are excluded), kept as a CSR sparse
matrix. Naive Bayes consumes the raw counts; logistic regression consumes
TF-IDF-weighted, L2-normalized rows. Everything here is deterministic: no
RNG is involved anywhere (zero-initialized weights, full-batch descent).
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import binio
from .errors import FormatError, TrainingError
from .metrics import N_CLASSES

log = logging.getLogger(__name__)

BASE_MAGIC = b"SENTI-BASE\x00"
BASE_VERSION = 1

NB_ALPHA = 1.0


def count_features(sequences, n_tokens: int) -> sparse.csr_matrix:
    """Token-count matrix, one row per sequence, one column per vocabulary
    token (column j holds the count of vocabulary index j+2)."""
    indptr = [0]
    col_indices = []
    data = []
    for seq in sequences:
        arr = np.asarray(seq).ravel()
        arr = arr[arr >= 2] - 2
        if arr.size and arr.max() >= n_tokens:
            raise TrainingError(
                f"token index {int(arr.max()) + 2} out of range for vocabulary of {n_tokens}"
            )
        if arr.size:
            counts = np.bincount(arr)
            nz = np.flatnonzero(counts)
            col_indices.extend(nz.tolist())
            data.extend(counts[nz].tolist())
        indptr.append(len(col_indices))
    return sparse.csr_matrix(
        (np.array(data, dtype=np.float64),
         np.array(col_indices, dtype=np.int64),
         np.array(indptr, dtype=np.int64)),
        shape=(len(indptr) - 1, n_tokens),
    )


@dataclass
class TfidfModel:
    idf: np.ndarray  # (n_tokens,)
    sublinear_tf: bool = False
    norm: str = "l2"

    def __post_init__(self):
        self.idf = np.asarray(self.idf, dtype=np.float64).ravel()
        if self.norm not in ("l2", "none"):
            raise ValueError(f"unknown norm {self.norm!r} (expected 'l2' or 'none')")


def tfidf_fit(counts: sparse.csr_matrix, sublinear_tf: bool = False,
              norm: str = "l2") -> TfidfModel:
    """idf_t = ln((1 + N) / (1 + df_t)) + 1 with df counted on nonzero cells."""
    n_docs = counts.shape[0]
    if n_docs == 0:
        raise TrainingError("cannot fit tf-idf on an empty matrix")
    df = np.asarray((counts > 0).sum(axis=0)).ravel().astype(np.float64)
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
    return TfidfModel(idf=idf, sublinear_tf=sublinear_tf, norm=norm)


def tfidf_transform(model: TfidfModel, counts: sparse.csr_matrix) -> sparse.csr_matrix:
    """Apply tf weighting (raw, or 1+ln(tf) when sublinear), scale by idf,
    and L2-normalize rows when configured (all-zero rows stay zero)."""
    if counts.shape[1] != model.idf.shape[0]:
        raise TrainingError(
            f"feature width {counts.shape[1]} does not match fitted idf ({model.idf.shape[0]})"
        )
    tf = counts.copy().astype(np.float64)
    if model.sublinear_tf:
        tf.data = 1.0 + np.log(tf.data)
    weighted = tf.multiply(model.idf[np.newaxis, :]).tocsr()
    if model.norm == "l2":
        norms = np.sqrt(np.asarray(weighted.multiply(weighted).sum(axis=1)).ravel())
        scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        weighted = sparse.diags(scale).dot(weighted).tocsr()
    return weighted


@dataclass
class NaiveBayesModel:
    log_prior: np.ndarray       # (3,)
    log_likelihood: np.ndarray  # (3, n_tokens)

    def __post_init__(self):
        self.log_prior = np.asarray(self.log_prior, dtype=np.float64).ravel()
        self.log_likelihood = np.asarray(self.log_likelihood, dtype=np.float64)


def naive_bayes_fit(counts: sparse.csr_matrix, labels, alpha: float = NB_ALPHA) -> NaiveBayesModel:
    """Multinomial Naive Bayes with Laplace smoothing on raw counts."""
    labels = np.asarray(labels, dtype=np.int64)
    if counts.shape[0] != labels.shape[0]:
        raise TrainingError("feature matrix and labels disagree on the number of rows")
    n_docs, n_tokens = counts.shape
    class_counts = np.zeros(N_CLASSES, dtype=np.float64)
    token_counts = np.zeros((N_CLASSES, n_tokens), dtype=np.float64)
    for c in range(N_CLASSES):
        mask = labels == c
        class_counts[c] = mask.sum()
        if class_counts[c]:
            token_counts[c] = np.asarray(counts[mask].sum(axis=0)).ravel()
    if np.any(class_counts == 0):
        missing = [c for c in range(N_CLASSES) if class_counts[c] == 0]
        raise TrainingError(f"no training examples for class(es) {missing}")
    log_prior = np.log(class_counts / n_docs)
    totals = token_counts.sum(axis=1, keepdims=True)
    log_likelihood = np.log((token_counts + alpha) / (totals + alpha * n_tokens))
    return NaiveBayesModel(log_prior=log_prior, log_likelihood=log_likelihood)


def naive_bayes_predict(model: NaiveBayesModel, counts: sparse.csr_matrix) -> np.ndarray:
    scores = counts.dot(model.log_likelihood.T) + model.log_prior
    return np.argmax(np.asarray(scores), axis=1).astype(np.int64)


@dataclass
class LogRegConfig:
    iterations: int = 300
    learning_rate: float = 0.5
    l2: float = 1e-4

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")


@dataclass
class LogRegModel:
    W: np.ndarray  # (3, n_tokens)
    b: np.ndarray  # (3,)
    idf: np.ndarray  # (n_tokens,) so raw counts can be transformed at predict time

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64).ravel()
        self.idf = np.asarray(self.idf, dtype=np.float64).ravel()


def _loss_and_grad(W, b, X, labels, l2):
    """Mean softmax cross-entropy with an L2 penalty on W (not b)."""
    n = X.shape[0]
    scores = np.asarray(X.dot(W.T)) + b
    shift = scores - scores.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shift).sum(axis=1, keepdims=True))
    log_probs = shift - log_z
    loss = -log_probs[np.arange(n), labels].mean() + 0.5 * l2 * float(np.sum(W * W))
    delta = np.exp(log_probs)
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    grad_W = np.asarray(X.T.dot(delta)).T + l2 * W
    grad_b = delta.sum(axis=0)
    return loss, grad_W, grad_b


def logreg_fit(counts: sparse.csr_matrix, labels,
               config: LogRegConfig = None) -> LogRegModel:
    """Softmax regression on TF-IDF features by full-batch gradient descent
    from zero weights."""
    config = config or LogRegConfig()
    labels = np.asarray(labels, dtype=np.int64)
    if counts.shape[0] != labels.shape[0]:
        raise TrainingError("feature matrix and labels disagree on the number of rows")
    tfidf = tfidf_fit(counts)
    X = tfidf_transform(tfidf, counts)
    W = np.zeros((N_CLASSES, counts.shape[1]), dtype=np.float64)
    b = np.zeros(N_CLASSES, dtype=np.float64)
    for it in range(config.iterations):
        loss, grad_W, grad_b = _loss_and_grad(W, b, X, labels, config.l2)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at logistic regression iteration {it}")
        W -= config.learning_rate * grad_W
        b -= config.learning_rate * grad_b
    log.info("logistic regression: final loss %.4f after %d iterations", loss, config.iterations)
    return LogRegModel(W=W, b=b, idf=tfidf.idf)


def logreg_predict(model: LogRegModel, counts: sparse.csr_matrix) -> np.ndarray:
    X = tfidf_transform(TfidfModel(idf=model.idf), counts)
    scores = np.asarray(X.dot(model.W.T)) + model.b
    return np.argmax(scores, axis=1).astype(np.int64)


def rnn_classifier_train(examples, embedding, hidden: int = 50,
                         config=None, seed: int = 1):
    """Vanilla-RNN classifier through the shared training loop: the same
    pipeline as the LSTM with the recurrence swapped. Returns (params, report)."""
    from .nnet import init_rnn_params
    from .train import TrainConfig, train
    params = init_rnn_params(hidden, embedding.dim, seed=(seed, 7))
    return train(examples, params, embedding, config or TrainConfig(seed=seed))


_KIND_TENSORS = {
    "tfidf": ("idf", "options"),
    "naive-bayes": ("log_prior", "log_likelihood"),
    "logreg": ("W", "b", "idf"),
}


def _model_kind(model):
    if isinstance(model, TfidfModel):
        return "tfidf"
    if isinstance(model, NaiveBayesModel):
        return "naive-bayes"
    if isinstance(model, LogRegModel):
        return "logreg"
    raise TypeError(f"unsupported baseline model {type(model).__name__}")


def _model_tensors(model, kind):
    if kind == "tfidf":
        return {"idf": model.idf,
                "options": np.array([float(model.sublinear_tf),
                                     float(model.norm == "l2")])}
    return {name: np.asarray(getattr(model, name), dtype=np.float64)
            for name in _KIND_TENSORS[kind]}


def save_baseline(model, path, vocab_fingerprint: bytes):
    """Container: magic, version, kind, vocab checksum, named f64 tensors,
    trailing CRC32."""
    if len(vocab_fingerprint) != 32:
        raise FormatError("vocab fingerprint must be 32 bytes")
    kind = _model_kind(model)
    chunks = [BASE_MAGIC, binio.pack_u32(BASE_VERSION)]
    encoded_kind = kind.encode("ascii")
    chunks.append(binio.pack_u32(len(encoded_kind)))
    chunks.append(encoded_kind)
    chunks.append(vocab_fingerprint)
    tensors = _model_tensors(model, kind)
    chunks.append(binio.pack_u32(len(tensors)))
    for name in _KIND_TENSORS[kind]:
        tensor = np.asarray(tensors[name], dtype=np.float64)
        encoded_name = name.encode("ascii")
        chunks.append(binio.pack_u32(len(encoded_name)))
        chunks.append(encoded_name)
        chunks.append(binio.pack_u32(tensor.ndim))
        for d in tensor.shape:
            chunks.append(binio.pack_u32(d))
        chunks.append(binio.pack_f64_array(tensor))
    with open(path, "wb") as f:
        f.write(binio.append_crc(chunks))


def load_baseline(path, vocab=None):
    """Returns the reconstructed model; validates CRC, kind, and (when a
    vocabulary is supplied) the recorded vocabulary checksum."""
    with open(path, "rb") as f:
        body = binio.strip_crc(f.read(), str(path))
    reader = binio.Reader(body, str(path))
    reader.expect_magic(BASE_MAGIC, "senti-baseline")
    reader.expect_version(BASE_VERSION, "senti-baseline")
    kind = reader.take(reader.u32()).decode("ascii")
    if kind not in _KIND_TENSORS:
        raise FormatError(f"{path}: unknown baseline kind {kind!r}")
    vocab_fp = reader.take(32)
    if vocab is not None and vocab.fingerprint() != vocab_fp:
        raise FormatError(f"{path}: baseline was built for a different vocabulary")
    n_tensors = reader.u32()
    tensors = {}
    for _ in range(n_tensors):
        name = reader.take(reader.u32()).decode("ascii")
        ndim = reader.u32()
        shape = tuple(reader.u32() for _ in range(ndim))
        tensors[name] = reader.f64_array(shape)
    reader.expect_eof()
    expected = set(_KIND_TENSORS[kind])
    if set(tensors) != expected:
        raise FormatError(f"{path}: baseline tensors {sorted(tensors)} do not match kind {kind!r}")
    if kind == "tfidf":
        options = tensors["options"]
        return TfidfModel(idf=tensors["idf"], sublinear_tf=bool(options[0]),
                          norm="l2" if options[1] else "none")
    if kind == "naive-bayes":
        return NaiveBayesModel(log_prior=tensors["log_prior"],
                               log_likelihood=tensors["log_likelihood"])
    return LogRegModel(W=tensors["W"], b=tensors["b"], idf=tensors["idf"])
