"""Independent reference implementations used as test oracles.

Everything here is deliberately written in the most naive style available
(scalar loops, math.* calls, char-by-char scanners) so that agreement with
the package's vectorized code is meaningful. Nothing in this module imports
from sentilstm.
"""

import math
import string
import unicodedata

import numpy as np


def sigmoid_ref(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def lstm_step_ref(weights: dict, h, c, x):
    """Scalar-loop LSTM cell: gates from sigma(W [h,x] + b), candidate from
    tanh, elementwise cell update, h = o * tanh(c). Returns (h_new, c_new,
    gates) with gates = dict of f/i/cbar/o lists."""
    h = list(map(float, h))
    c = list(map(float, c))
    x = list(map(float, x))
    z = h + x
    hidden = len(h)

    def affine(W, b, row):
        total = float(b[row])
        for col in range(len(z)):
            total += float(W[row][col]) * z[col]
        return total

    f = [sigmoid_ref(affine(weights["W_f"], weights["b_f"], r)) for r in range(hidden)]
    i = [sigmoid_ref(affine(weights["W_i"], weights["b_i"], r)) for r in range(hidden)]
    cbar = [math.tanh(affine(weights["W_c"], weights["b_c"], r)) for r in range(hidden)]
    o = [sigmoid_ref(affine(weights["W_o"], weights["b_o"], r)) for r in range(hidden)]
    c_new = [f[r] * c[r] + i[r] * cbar[r] for r in range(hidden)]
    h_new = [o[r] * math.tanh(c_new[r]) for r in range(hidden)]
    return h_new, c_new, {"f": f, "i": i, "cbar": cbar, "o": o}


def rnn_step_ref(weights: dict, h, x):
    h = list(map(float, h))
    x = list(map(float, x))
    z = h + x
    hidden = len(h)
    out = []
    for row in range(hidden):
        total = float(weights["b"][row])
        for col in range(len(z)):
            total += float(weights["W"][row][col]) * z[col]
        out.append(math.tanh(total))
    return out


def softmax_ref(logits):
    exps = [math.exp(float(v)) for v in logits]
    total = sum(exps)
    return [e / total for e in exps]


def cross_entropy_ref(logits, label: int) -> float:
    return -math.log(softmax_ref(logits)[label])


def lstm_forward_ref(weights: dict, emb_rows, indices, pad_index=0):
    """Full scalar forward pass: embed, skip pad positions, run the cell,
    apply the head to the final h, softmax. Returns (logits, probs)."""
    hidden = len(weights["b_f"])
    h = [0.0] * hidden
    c = [0.0] * hidden
    for idx in indices:
        idx = int(idx)
        if idx == pad_index:
            continue
        x = [float(v) for v in emb_rows[idx]]
        h, c, _ = lstm_step_ref(weights, h, c, x)
    logits = []
    for row in range(len(weights["head_b"])):
        total = float(weights["head_b"][row])
        for col in range(hidden):
            total += float(weights["head_W"][row][col]) * h[col]
        logits.append(total)
    return logits, softmax_ref(logits)


def finite_difference(loss_fn, array: np.ndarray, eps: float = 1e-4) -> np.ndarray:
    """Central finite differences of loss_fn() w.r.t. every entry of `array`
    (perturbed in place and restored)."""
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    gflat = grad.reshape(-1)
    for j in range(flat.size):
        original = flat[j]
        flat[j] = original + eps
        up = loss_fn()
        flat[j] = original - eps
        down = loss_fn()
        flat[j] = original
        gflat[j] = (up - down) / (2.0 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.linalg.norm(a) + np.linalg.norm(n)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - n) / denom)


def sgns_loss_ref(center, context, negatives) -> float:
    """Scalar SGNS loss: -log sig(u.v) - sum_n log sig(-u_n.v)."""

    def log_sigmoid(v):
        if v >= 0:
            return -math.log1p(math.exp(-v))
        return v - math.log1p(math.exp(v))

    dot = sum(float(a) * float(b) for a, b in zip(context, center))
    loss = -log_sigmoid(dot)
    for neg in negatives:
        ndot = sum(float(a) * float(b) for a, b in zip(neg, center))
        loss -= log_sigmoid(-ndot)
    return loss


def metrics_ref(counts) -> dict:
    """Brute-force recomputation of every metric from a 3x3 count matrix."""
    counts = [[int(v) for v in row] for row in counts]
    total = sum(sum(row) for row in counts)
    correct = sum(counts[k][k] for k in range(3))
    accuracy = correct / total

    per_class = []
    pooled_tp = pooled_fp = pooled_fn = 0
    for k in range(3):
        tp = counts[k][k]
        fp = sum(counts[a][k] for a in range(3) if a != k)
        fn = sum(counts[k][p] for p in range(3) if p != k)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append({"precision": precision, "recall": recall, "f1": f1,
                          "support": tp + fn})
        pooled_tp += tp
        pooled_fp += fp
        pooled_fn += fn

    macro = {m: sum(pc[m] for pc in per_class) / 3.0 for m in ("precision", "recall", "f1")}
    weighted = {m: sum(pc[m] * pc["support"] for pc in per_class) / total
                for m in ("precision", "recall", "f1")}
    micro_p = pooled_tp / (pooled_tp + pooled_fp) if pooled_tp + pooled_fp else 0.0
    micro_r = pooled_tp / (pooled_tp + pooled_fn) if pooled_tp + pooled_fn else 0.0
    micro_f1 = (2.0 * micro_p * micro_r / (micro_p + micro_r)) if micro_p + micro_r else 0.0
    return {
        "accuracy": accuracy,
        "per_class": per_class,
        "macro": macro,
        "micro": {"precision": micro_p, "recall": micro_r, "f1": micro_f1},
        "weighted": weighted,
    }


def adam_ref(param, grad, m, v, t, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Straight-line evaluation of the bias-corrected update formulas.
    Returns fresh (param, m, v) arrays."""
    param = np.array(param, dtype=np.float64)
    grad = np.array(grad, dtype=np.float64)
    m = beta1 * np.array(m, dtype=np.float64) + (1.0 - beta1) * grad
    v = beta2 * np.array(v, dtype=np.float64) + (1.0 - beta2) * grad ** 2
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


def _is_punct_ref(ch: str) -> bool:
    if ch in string.punctuation:
        return True
    if unicodedata.category(ch).startswith("P"):
        return True
    cp = ord(ch)
    if 0xFF01 <= cp <= 0xFF5E and chr(cp - 0xFEE0) in string.punctuation:
        return True
    return 0xFFE0 <= cp <= 0xFFE6


def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def clean_ref(raw: str) -> str:
    """Char-scanner twin of the cleaning contract: strip URLs, then #...#
    spans, then @mentions (each leaving one space), blank out punctuation,
    collapse whitespace."""
    out = []
    i = 0
    while i < len(raw):
        rest = raw[i:]
        prefix = next((p for p in ("https://", "http://", "www.") if rest.startswith(p)), None)
        if prefix is not None and len(rest) > len(prefix) and not rest[len(prefix)].isspace():
            while i < len(raw) and not raw[i].isspace():
                i += 1
            out.append(" ")
            continue
        out.append(raw[i])
        i += 1
    text = "".join(out)

    out = []
    i = 0
    while i < len(text):
        if text[i] == "#":
            close = text.find("#", i + 1)
            if close != -1:
                out.append(" ")
                i = close + 1
                continue
        out.append(text[i])
        i += 1
    text = "".join(out)

    out = []
    i = 0
    while i < len(text):
        if text[i] == "@":
            i += 1
            while i < len(text) and _is_word_char(text[i]):
                i += 1
            out.append(" ")
            continue
        out.append(text[i])
        i += 1
    text = "".join(out)

    text = "".join(" " if _is_punct_ref(ch) else ch for ch in text)
    return " ".join(text.split())
