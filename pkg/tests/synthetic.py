"""Synthetic corpora used by the unit and acceptance tests.

Three families:
- keyword corpus: trivially separable short texts, one keyword set per class
- long-range corpus: the class is determined purely by token ORDER in a
  3-token prelude, followed by a long constant filler tail; bag-of-words
  counts are identical across classes by construction
- co-occurrence corpus: disjoint token groups that never mix, for embedding
  similarity checks
"""

import csv

import numpy as np

LABELS = ("negative", "neutral", "positive")

_KEYWORDS = (
    ("awful", "hate", "terrible", "worst"),
    ("table", "report", "street", "normal"),
    ("great", "love", "wonderful", "best"),
)
_FILLERS = ("the", "day", "was", "really", "quite")


def keyword_corpus(n_per_class=10, words_per_text=6, seed=0):
    """Returns (texts, labels): each text carries words from exactly one
    class keyword set plus neutral filler."""
    rng = np.random.default_rng((seed, 23))
    texts, labels = [], []
    for label in range(3):
        for _ in range(n_per_class):
            k = rng.integers(2, 4)
            words = list(rng.choice(_KEYWORDS[label], size=k, replace=True))
            words += list(rng.choice(_FILLERS, size=words_per_text - k, replace=True))
            rng.shuffle(words)
            texts.append(" ".join(words))
            labels.append(label)
    return texts, labels


MARKERS = ("aaa", "bbb", "ccc")
END_HINTS = ("rrr", "sss", "ttt")
FILLER = "mmm"


def _ordered_triple(rng, tokens, label, agreement):
    """Permutation of `tokens` whose first element names `label` with
    probability `agreement`, else one of the other two."""
    if rng.random() < agreement:
        leader = label
    else:
        leader = int((label + 1 + rng.integers(0, 2)) % 3)
    rest = [tokens[k] for k in range(3) if k != leader]
    if rng.integers(0, 2):
        rest.reverse()
    return [tokens[leader]] + rest


def long_range_corpus(n_train=2000, n_test=500, length=48, seed=0,
                      end_agreement=0.6):
    """Last-write-wins corpus for long-range order sensitivity.

    The three class markers land in three randomly chosen slots among the
    first seven positions, in random order; the label is named by the
    LATEST of them, so it is set >= length-7 tokens before the sequence
    end and the two earlier markers are overwritten decoys. The last three
    tokens are a hint triple whose leading token agrees with the label
    with probability `end_agreement`; everything else is one constant
    filler token.

    Every example contains each marker and each hint token exactly once,
    so token counts are identical across examples and carry no label
    signal; bag-of-features models are structurally blind here. Reading
    the hint needs three steps of memory, while beating the hint ceiling
    requires carrying (and correctly overwriting) marker state across the
    whole filler span.

    Returns (train_texts, train_labels, test_texts, test_labels).
    """
    rng = np.random.default_rng((seed, 29))
    total = n_train + n_test
    texts, labels = [], []
    for _ in range(total):
        slots = sorted(int(s) for s in rng.choice(7, size=3, replace=False))
        perm = [int(p) for p in rng.permutation(3)]
        prefix = [FILLER] * 7
        for slot, marker in zip(slots, perm):
            prefix[slot] = MARKERS[marker]
        label = perm[-1]
        tokens = prefix + [FILLER] * (length - 10)
        tokens += _ordered_triple(rng, END_HINTS, label, end_agreement)
        texts.append(" ".join(tokens))
        labels.append(label)
    return texts[:n_train], labels[:n_train], texts[n_train:], labels[n_train:]


def cooccurrence_corpus(n_groups=6, group_size=3, sentences_per_group=30,
                        sentence_length=8, seed=0):
    """Sentences drawn entirely from one token group at a time. Returns
    (texts, within_pairs, across_pairs) where pairs are (token, token)."""
    rng = np.random.default_rng((seed, 31))
    groups = [[f"g{g}w{w}" for w in range(group_size)] for g in range(n_groups)]
    texts = []
    for g in range(n_groups):
        for _ in range(sentences_per_group):
            words = rng.choice(groups[g], size=sentence_length, replace=True)
            texts.append(" ".join(words))
    rng.shuffle(texts)
    within = [(groups[g][0], groups[g][1]) for g in range(n_groups)]
    across = [(groups[g][0], groups[(g + 1) % n_groups][1]) for g in range(n_groups)]
    return texts, within, across


def write_csv(path, texts, labels):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "text"])
        for text, label in zip(texts, labels):
            writer.writerow([LABELS[label], text])
