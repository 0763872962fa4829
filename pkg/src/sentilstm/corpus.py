"""Dataset ingestion, text cleaning, tokenization, vocabulary, and encoding.

The cleaning rules target social-media comment text: URLs, ``#...#`` topic
spans, and ``@user`` mentions are stripped before punctuation removal, and
whitespace runs collapse to single spaces so the result is stable under
re-cleaning.
"""

import csv
import functools
import re
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .binio import sha256
from .errors import DatasetError, FormatError

PAD_INDEX = 0
UNK_INDEX = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

TOKENIZER_MODES = ("whitespace", "character", "presegmented")

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_TOPIC_RE = re.compile(r"#[^#]*#")
_MENTION_RE = re.compile(r"@\w*")


class Sentiment(IntEnum):
    negative = 0
    neutral = 1
    positive = 2


_LABEL_NAMES = {s.name: s for s in Sentiment}
_LABEL_DIGITS = {str(int(s)): s for s in Sentiment}


def parse_label(raw: str) -> Sentiment:
    key = raw.strip().lower()
    if key in _LABEL_DIGITS:
        return _LABEL_DIGITS[key]
    if key in _LABEL_NAMES:
        return _LABEL_NAMES[key]
    raise DatasetError(f"unknown label {raw!r} (expected 0/1/2 or negative/neutral/positive)")


@dataclass
class RawRecord:
    text: str
    label: Sentiment


@functools.lru_cache(maxsize=None)
def _is_punct(ch: str) -> bool:
    # ASCII punctuation-class symbols, every Unicode P* character, and the
    # full-width CJK forms of both (including currency signs U+FFE0..U+FFE6).
    if ch in string.punctuation:
        return True
    if unicodedata.category(ch).startswith("P"):
        return True
    cp = ord(ch)
    if 0xFF01 <= cp <= 0xFF5E and chr(cp - 0xFEE0) in string.punctuation:
        return True
    return 0xFFE0 <= cp <= 0xFFE6


def clean_text(raw: str) -> str:
    """Strip URLs, #topic# spans, @mentions, and punctuation; collapse whitespace.

    Idempotent: cleaning already-clean text returns it unchanged. May return
    an empty string.
    """
    text = _URL_RE.sub(" ", raw)
    text = _TOPIC_RE.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    text = "".join(" " if _is_punct(ch) else ch for ch in text)
    return " ".join(text.split())


def tokenize(cleaned: str, mode: str = "whitespace") -> list:
    """Split cleaned text into tokens.

    ``whitespace`` and ``presegmented`` split on spaces (the latter signals
    that an external segmenter already joined tokens with spaces);
    ``character`` emits one token per non-space scalar, for unsegmented CJK
    text.
    """
    if mode in ("whitespace", "presegmented"):
        return cleaned.split()
    if mode == "character":
        return [ch for ch in cleaned if not ch.isspace()]
    raise ValueError(f"unknown tokenizer mode {mode!r} (expected one of {TOKENIZER_MODES})")


def detect_tokenizer_mode(texts) -> str:
    """Pick 'character' when CJK scalars dominate the letters, else 'whitespace'."""
    cjk = 0
    letters = 0
    for text in texts:
        for ch in text:
            if not ch.isalpha():
                continue
            letters += 1
            if 0x4E00 <= ord(ch) <= 0x9FFF or 0x3400 <= ord(ch) <= 0x4DBF:
                cjk += 1
    if letters == 0:
        return "whitespace"
    return "character" if cjk / letters > 0.5 else "whitespace"


@dataclass
class Vocabulary:
    """Token<->index bijection with reserved pad (0) and unk (1) indices."""

    token_to_index: dict
    index_to_token: list
    frequencies: dict
    min_count: int

    pad_index: int = PAD_INDEX
    unk_index: int = UNK_INDEX

    def __len__(self):
        return len(self.index_to_token)

    @property
    def n_tokens(self):
        """Number of non-reserved tokens."""
        return len(self.index_to_token) - 2

    def index(self, token: str) -> int:
        return self.token_to_index.get(token, self.unk_index)

    def fingerprint(self) -> bytes:
        """SHA-256 over the canonical serialized form, binding downstream artifacts."""
        return sha256(serialize_vocabulary(self).encode("utf-8"))


def build_vocabulary(corpus, min_count: int) -> Vocabulary:
    """Index every token whose corpus frequency is >= min_count.

    Indices are assigned frequency-descending with lexicographic tie-break,
    starting at 2 (0 and 1 are reserved), so the assignment is deterministic.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter()
    for tokens in corpus:
        counts.update(tokens)
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    index_to_token = [PAD_TOKEN, UNK_TOKEN] + kept
    token_to_index = {t: i + 2 for i, t in enumerate(kept)}
    frequencies = {t: counts[t] for t in kept}
    return Vocabulary(token_to_index, index_to_token, frequencies, min_count)


def encode(tokens, vocab: Vocabulary, maxlen: int) -> np.ndarray:
    """Map tokens to indices, truncating to the first maxlen and right-padding."""
    if maxlen < 1:
        raise ValueError("maxlen must be >= 1")
    out = np.full(maxlen, vocab.pad_index, dtype=np.int32)
    for pos, token in enumerate(tokens[:maxlen]):
        out[pos] = vocab.token_to_index.get(token, vocab.unk_index)
    return out


@dataclass
class EncodedExample:
    indices: np.ndarray
    label: Sentiment
    original_length: int = field(default=-1)

    def __post_init__(self):
        if self.original_length < 0:
            nonpad = np.nonzero(self.indices != PAD_INDEX)[0]
            self.original_length = int(nonpad[-1]) + 1 if len(nonpad) else 0


def encode_example(tokens, label, vocab: Vocabulary, maxlen: int) -> EncodedExample:
    return EncodedExample(
        indices=encode(tokens, vocab, maxlen),
        label=label,
        original_length=min(len(tokens), maxlen),
    )


def load_dataset(path) -> list:
    """Read a UTF-8 `label,text` CSV (RFC-4180 quoting) into RawRecords."""
    records = []
    try:
        f = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise DatasetError(f"{path}: no such file") from None
    with f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file, expected a 'label,text' header") from None
        if [h.strip().lower() for h in header] != ["label", "text"]:
            raise DatasetError(f"{path}: expected header 'label,text', got {','.join(header)!r}")
        for row_num, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise DatasetError(f"{path}: row {row_num}: expected 2 fields, got {len(row)}")
            try:
                label = parse_label(row[0])
            except DatasetError as exc:
                raise DatasetError(f"{path}: row {row_num}: {exc}") from None
            records.append(RawRecord(text=row[1], label=label))
    return records


def save_dataset(records, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["label", "text"])
        for rec in records:
            writer.writerow([int(rec.label), rec.text])


def stratified_split(records, test_fraction: float, seed: int):
    """Deterministic per-class split; returns (train, test) in original order.

    Each class contributes round(n_class * test_fraction) examples to the test
    side, clamped so both sides keep at least one example per class.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    by_class = {}
    for i, rec in enumerate(records):
        by_class.setdefault(int(rec.label), []).append(i)
    for label, idx in sorted(by_class.items()):
        if len(idx) < 2:
            raise DatasetError(f"cannot stratify: class {label} has only {len(idx)} example(s)")
    rng = np.random.default_rng(seed)
    test_idx = set()
    for label in sorted(by_class):
        idx = np.array(by_class[label])
        n_test = int(len(idx) * test_fraction + 0.5)
        n_test = min(max(n_test, 1), len(idx) - 1)
        chosen = rng.permutation(len(idx))[:n_test]
        test_idx.update(int(i) for i in idx[chosen])
    train = [rec for i, rec in enumerate(records) if i not in test_idx]
    test = [rec for i, rec in enumerate(records) if i in test_idx]
    return train, test


# --- vocabulary file format: "#senti-vocab v1 min_count=<k>" header, then
# --- index<TAB>token<TAB>frequency lines sorted by index (0/1 are reserved).

def serialize_vocabulary(vocab: Vocabulary) -> str:
    lines = [f"#senti-vocab v1 min_count={vocab.min_count}"]
    lines.append(f"0\t{PAD_TOKEN}\t0")
    lines.append(f"1\t{UNK_TOKEN}\t0")
    for i, token in enumerate(vocab.index_to_token[2:], start=2):
        lines.append(f"{i}\t{token}\t{vocab.frequencies[token]}")
    return "\n".join(lines) + "\n"


def save_vocabulary(vocab: Vocabulary, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(serialize_vocabulary(vocab))


_VOCAB_HEADER_RE = re.compile(r"#senti-vocab v1 min_count=(\d+)$")


def load_vocabulary(path) -> Vocabulary:
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except FileNotFoundError:
        raise FormatError(f"{path}: no such file") from None
    if not lines:
        raise FormatError(f"{path}: empty vocabulary file")
    m = _VOCAB_HEADER_RE.match(lines[0])
    if not m:
        raise FormatError(f"{path}: bad vocabulary header {lines[0]!r}")
    min_count = int(m.group(1))
    index_to_token = [PAD_TOKEN, UNK_TOKEN]
    token_to_index = {}
    frequencies = {}
    for line_num, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}: line {line_num}: expected index<TAB>token<TAB>frequency")
        idx, token, freq = int(parts[0]), parts[1], int(parts[2])
        if idx != line_num - 2:
            raise FormatError(f"{path}: line {line_num}: indices out of order (got {idx})")
        if idx == PAD_INDEX or idx == UNK_INDEX:
            expected = PAD_TOKEN if idx == PAD_INDEX else UNK_TOKEN
            if token != expected:
                raise FormatError(f"{path}: line {line_num}: reserved index {idx} must be {expected}")
            continue
        if freq < min_count:
            raise FormatError(f"{path}: line {line_num}: frequency {freq} below min_count {min_count}")
        token_to_index[token] = idx
        index_to_token.append(token)
        frequencies[token] = freq
    return Vocabulary(token_to_index, index_to_token, frequencies, min_count)


# --- encoded dataset file: "#senti-encoded v1 maxlen=<m>" header, then
# --- label<TAB>original_length<TAB>space-joined indices per example.

_ENCODED_HEADER_RE = re.compile(r"#senti-encoded v1 maxlen=(\d+)$")


def save_encoded(examples, maxlen: int, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"#senti-encoded v1 maxlen={maxlen}\n")
        for ex in examples:
            joined = " ".join(str(int(i)) for i in ex.indices)
            f.write(f"{int(ex.label)}\t{ex.original_length}\t{joined}\n")


def load_encoded(path):
    """Returns (examples, maxlen)."""
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except FileNotFoundError:
        raise FormatError(f"{path}: no such file") from None
    if not lines:
        raise FormatError(f"{path}: empty encoded dataset")
    m = _ENCODED_HEADER_RE.match(lines[0])
    if not m:
        raise FormatError(f"{path}: bad encoded-dataset header {lines[0]!r}")
    maxlen = int(m.group(1))
    examples = []
    for line_num, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}: line {line_num}: expected 3 tab-separated fields")
        label = Sentiment(int(parts[0]))
        original_length = int(parts[1])
        indices = np.array([int(tok) for tok in parts[2].split()], dtype=np.int32)
        if len(indices) != maxlen:
            raise FormatError(f"{path}: line {line_num}: expected {maxlen} indices, got {len(indices)}")
        examples.append(EncodedExample(indices=indices, label=label, original_length=original_length))
    return examples, maxlen
