"""Count-based n-gram language model with additive smoothing.

Used only as a local fluency filter: candidates for a position are ranked by
the log-probability of every n-gram window that touches that position.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import tokenize
from .errors import ContractViolation, LoadError, TrainError

BOS = "<s>"
EOS = "</s>"
FORMAT_TAG = "genattack-ngram v1"


@dataclass
class NGramModel:
    order: int
    counts: dict[tuple[str, ...], int]
    smoothing: float = 0.1
    context_counts: dict[tuple[str, ...], int] = field(default_factory=dict, repr=False)
    vocab_size: int = 0

    def __post_init__(self):
        if self.order < 2:
            raise ContractViolation("order must be >= 2")
        if self.smoothing <= 0:
            raise ContractViolation("smoothing constant must be positive")
        if not self.context_counts:
            ctx = Counter()
            for gram, c in self.counts.items():
                ctx[gram[:-1]] += c
            self.context_counts = dict(ctx)
        if not self.vocab_size:
            self.vocab_size = sum(1 for g in self.counts if len(g) == 1)

    def log_prob(self, context: Sequence[str], word: str) -> float:
        """log P(word | last order-1 tokens of context), add-k smoothed."""
        ctx = tuple(context[-(self.order - 1):]) if self.order > 1 else ()
        num = self.counts.get(ctx + (word,), 0) + self.smoothing
        den = self.context_counts.get(ctx, 0) + self.smoothing * self.vocab_size
        return math.log(num / den)

    def padded(self, tokens: Sequence[str]) -> list[str]:
        return [BOS] * (self.order - 1) + list(tokens) + [EOS]

    def sentence_log_prob(self, tokens: Sequence[str]) -> float:
        seq = self.padded(tokens)
        n = self.order
        return sum(self.log_prob(seq[j - n + 1:j], seq[j]) for j in range(n - 1, len(seq)))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{FORMAT_TAG}\norder\t{self.order}\nsmoothing\t{self.smoothing!r}\n")
            for gram in sorted(self.counts, key=lambda g: (len(g), g)):
                fh.write(f"{self.counts[gram]}\t{' '.join(gram)}\n")

    @classmethod
    def load(cls, path) -> NGramModel:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
        if not lines or lines[0] != FORMAT_TAG:
            raise LoadError("not a language model file (missing version tag)", 1)
        try:
            order = int(lines[1].split("\t")[1])
            smoothing = float(lines[2].split("\t")[1])
        except (IndexError, ValueError):
            raise LoadError("malformed header", 2) from None
        counts = {}
        for lineno, line in enumerate(lines[3:], start=4):
            if not line:
                continue
            try:
                count, gram = line.split("\t")
                counts[tuple(gram.split(" "))] = int(count)
            except ValueError:
                raise LoadError("malformed gram record", lineno) from None
        return cls(order, counts, smoothing)


def count_ngrams(sentences: Iterable[Sequence[str]], order: int) -> dict[tuple[str, ...], int]:
    """Count every gram of length 1..order that ends on a non-BOS token."""
    counts = Counter()
    for tokens in sentences:
        seq = [BOS] * (order - 1) + list(tokens) + [EOS]
        for j in range(order - 1, len(seq)):
            for m in range(1, order + 1):
                counts[tuple(seq[j - m + 1:j + 1])] += 1
    return dict(counts)


def train_from_sentences(sentences: Iterable[Sequence[str]], order: int = 3, smoothing: float = 0.1) -> NGramModel:
    sentences = [list(s) for s in sentences]
    if not sentences:
        raise TrainError("empty corpus")
    return NGramModel(order, count_ngrams(sentences, order), smoothing)


def train_ngram(corpus_path, order: int = 3, smoothing: float = 0.1) -> NGramModel:
    with open(corpus_path, encoding="utf-8") as fh:
        sentences = [tokenize(line) for line in fh if line.strip()]
    return train_from_sentences(sentences, order, smoothing)


def score_candidate_in_context(model: NGramModel, tokens: Sequence[str], position: int, candidate: str) -> float:
    """Sum of log-probabilities of the n-gram windows overlapping ``position``
    once ``candidate`` is substituted there."""
    if not 0 <= position < len(tokens):
        raise ContractViolation(f"position {position} out of range")
    n = model.order
    seq = model.padded(tokens)
    p = position + n - 1
    seq[p] = candidate
    last = min(p + n - 1, len(seq) - 1)
    return sum(model.log_prob(seq[j - n + 1:j], seq[j]) for j in range(p, last + 1))


def filter_top_k(model: NGramModel, tokens: Sequence[str], position: int, candidates: Sequence[str], k: int) -> list[str]:
    if not candidates:
        raise ContractViolation("empty candidate list")
    if k < 1:
        raise ContractViolation("k must be positive")
    scored = [
        (-score_candidate_in_context(model, tokens, position, c), i, c)
        for i, c in enumerate(candidates)
    ]
    scored.sort()
    return [c for _, _, c in scored[:k]]
