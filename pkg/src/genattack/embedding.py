"""Word vectors and Euclidean distance-budget neighbor queries."""

from __future__ import annotations

import math
import threading
from typing import Sequence

import numpy as np

from .errors import LoadError, WordNotFound


class EmbeddingSpace:
    """Immutable vocabulary -> vector table.

    Neighbor queries are answered with a vectorized scan over all rows and
    memoized per query; ``brute_force_neighbors`` is the plain-Python reference
    the fast path is tested against.
    """

    def __init__(self, words: Sequence[str], vectors):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(words):
            raise ValueError("vectors must be a (len(words), dim) matrix")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("vectors must be finite")
        vocab = {}
        for i, w in enumerate(words):
            if w in vocab:
                raise ValueError(f"duplicate word {w!r}")
            vocab[w] = i
        self.words = tuple(words)
        self.vocab = vocab
        self.vectors = vectors
        self.vectors.setflags(write=False)
        self._neighbor_cache: dict = {}
        self._count_cache: dict = {}
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.vocab

    def _distances(self, word):
        i = self.vocab[word]
        diff = self.vectors - self.vectors[i]
        return i, np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def neighbors(self, word: str, n: int, delta: float) -> list[tuple[str, float]]:
        if word not in self.vocab:
            raise WordNotFound(word)
        key = (word, n, delta)
        cached = self._neighbor_cache.get(key)
        if cached is None:
            i, dist = self._distances(word)
            dist[i] = np.inf
            order = np.lexsort((np.arange(len(dist)), dist))[:n]
            cached = tuple((self.words[j], float(dist[j])) for j in order if dist[j] <= delta)
            with self._lock:
                self._neighbor_cache[key] = cached
        return list(cached)

    def count_within(self, word: str, delta: float) -> int:
        if word not in self.vocab:
            return 0
        key = (word, delta)
        cached = self._count_cache.get(key)
        if cached is None:
            _, dist = self._distances(word)
            cached = int(np.count_nonzero(dist <= delta)) - 1
            with self._lock:
                self._count_cache[key] = cached
        return cached

    def brute_force_neighbors(self, word: str, n: int, delta: float) -> list[tuple[str, float]]:
        if word not in self.vocab:
            raise WordNotFound(word)
        i = self.vocab[word]
        query = self.vectors[i].tolist()
        scored = []
        for j, row in enumerate(self.vectors.tolist()):
            if j != i:
                scored.append((math.dist(query, row), j))
        scored.sort()
        return [(self.words[j], d) for d, j in scored[:n] if d <= delta]


def load_embeddings(path, expected_dim: int = 300) -> EmbeddingSpace:
    """Read ``word v1 ... v_dim`` lines (GloVe text format)."""
    words = []
    rows = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if not parts or not parts[0]:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != expected_dim:
                raise LoadError(
                    f"expected {expected_dim} components for {word!r}, got {len(values)}", lineno
                )
            if word in seen:
                raise LoadError(f"duplicate word {word!r}", lineno)
            try:
                vec = [float(v) for v in values]
            except ValueError as exc:
                raise LoadError(str(exc), lineno) from None
            if not all(math.isfinite(v) for v in vec):
                raise LoadError(f"non-finite component for {word!r}", lineno)
            seen.add(word)
            words.append(word)
            rows.append(vec)
    vectors = np.array(rows, dtype=np.float64).reshape(len(rows), expected_dim)
    return EmbeddingSpace(words, vectors)


def save_embeddings(space: EmbeddingSpace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for word, vec in zip(space.words, space.vectors):
            fh.write(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def nearest_neighbors(space: EmbeddingSpace, word: str, n: int, delta: float) -> list[tuple[str, float]]:
    """The ``n`` closest other words, then restricted to distance <= ``delta``.

    Ascending by distance, ties by vocabulary row. Raises WordNotFound for OOV.
    """
    return space.neighbors(word, n, delta)


def neighbor_counts(space: EmbeddingSpace, tokens: Sequence[str], delta: float) -> list[int]:
    """Number of other vocabulary words within ``delta`` of each token (0 if OOV)."""
    return [space.count_within(t, delta) for t in tokens]
