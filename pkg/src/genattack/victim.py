"""Query-only classifiers.

Every victim exposes ``predict_probs(batch)``; attack code never looks past
that method. Sentiment batches are lists of documents, entailment batches
are lists of (premise, hypothesis) pairs.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests

from .corpus import Document, LabeledExample, detokenize
from .errors import ContractViolation, LoadError, TrainError, VictimUnavailable

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QueryLedger:
    total_queries: int = 0
    total_documents: int = 0


class Victim:
    """Base class handling arity checks and query accounting."""

    task: str = "sentiment"
    num_classes: int = 2

    def __init__(self):
        self._ledger_lock = threading.Lock()
        self._queries = 0
        self._documents = 0

    @property
    def arity(self) -> int:
        return 1 if self.task == "sentiment" else 2

    def predict_probs(self, batch: Sequence) -> np.ndarray:
        """Return a (len(batch), num_classes) array of class probabilities."""
        if len(batch) == 0:
            raise ContractViolation("empty batch")
        items = [self._as_item(x) for x in batch]
        probs = np.asarray(self._predict(items), dtype=np.float64)
        if probs.shape != (len(items), self.num_classes):
            raise VictimUnavailable(f"victim returned shape {probs.shape}")
        with self._ledger_lock:
            self._queries += 1
            self._documents += len(items)
        return probs

    def query_stats(self) -> QueryLedger:
        with self._ledger_lock:
            return QueryLedger(self._queries, self._documents)

    def predict_labels(self, batch: Sequence) -> np.ndarray:
        return self.predict_probs(batch).argmax(axis=1)

    def _as_item(self, x):
        if isinstance(x, LabeledExample):
            x = x.documents[0] if self.arity == 1 else x.documents
        if self.arity == 1:
            tokens = _tokens(x)
            if tokens is None:
                raise ContractViolation("sentiment victim expects single documents")
            return tokens
        if isinstance(x, (list, tuple)) and len(x) == 2:
            pair = (_tokens(x[0]), _tokens(x[1]))
            if None not in pair:
                return pair
        raise ContractViolation("entailment victim expects (premise, hypothesis) pairs")

    def _predict(self, items):
        raise NotImplementedError


def _tokens(x):
    if isinstance(x, Document):
        return x.tokens
    if isinstance(x, (list, tuple)) and all(isinstance(t, str) for t in x):
        return tuple(x)
    return None


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr: float = 0.5
    l2: float = 1e-4
    batch_size: int = 32
    seed: int = 0


class Featurizer:
    """Bag-of-words counts; pairs map to [premise, hypothesis, premise - hypothesis]."""

    def __init__(self, words: Sequence[str], arity: int):
        self.words = tuple(words)
        self.index = {w: i for i, w in enumerate(self.words)}
        self.arity = arity

    @property
    def num_features(self) -> int:
        v = len(self.words)
        return v if self.arity == 1 else 3 * v

    def bag(self, tokens) -> np.ndarray:
        x = np.zeros(len(self.words))
        for t in tokens:
            j = self.index.get(t)
            if j is not None:
                x[j] += 1.0
        return x

    def transform(self, items) -> np.ndarray:
        rows = []
        for item in items:
            if self.arity == 1:
                rows.append(self.bag(item))
            else:
                p, h = self.bag(item[0]), self.bag(item[1])
                rows.append(np.concatenate([p, h, p - h]))
        return np.array(rows).reshape(len(rows), self.num_features)


def loss_and_grad(weights: np.ndarray, bias: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its analytic gradient."""
    probs = softmax(X @ weights.T + bias)
    n = X.shape[0]
    loss = -np.mean(np.log(probs[np.arange(n), y] + 1e-300)) + 0.5 * l2 * np.sum(weights**2)
    err = probs.copy()
    err[np.arange(n), y] -= 1.0
    err /= n
    return loss, err.T @ X + l2 * weights, err.sum(axis=0)


class BuiltinVictim(Victim):
    """Multinomial logistic regression over bag-of-words features."""

    def __init__(self, featurizer: Featurizer, weights, bias, task: str = "sentiment"):
        super().__init__()
        self.task = task
        self.featurizer = featurizer
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        self.num_classes = self.weights.shape[0]
        self.weights.setflags(write=False)
        self.bias.setflags(write=False)

    def _predict(self, items):
        return softmax(self.featurizer.transform(items) @ self.weights.T + self.bias)

    def accuracy(self, examples: Sequence[LabeledExample]) -> float:
        if not examples:
            return float("nan")
        pred = self.predict_labels(examples)
        return float(np.mean(pred == np.array([ex.label for ex in examples])))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            np.savez(
                fh,
                words=np.array(self.featurizer.words, dtype=str),
                weights=self.weights,
                bias=self.bias,
                task=np.array(self.task),
            )

    @classmethod
    def load(cls, path) -> BuiltinVictim:
        try:
            with np.load(path, allow_pickle=False) as data:
                task = str(data["task"])
                feats = Featurizer(data["words"].tolist(), 1 if task == "sentiment" else 2)
                return cls(feats, data["weights"], data["bias"], task)
        except (OSError, KeyError, ValueError) as exc:
            raise LoadError(f"cannot read victim weights from {path}: {exc}") from None


def train_builtin(
    train: Sequence[LabeledExample],
    config: TrainConfig = TrainConfig(),
    num_classes: int | None = None,
    validation: Sequence[LabeledExample] | None = None,
) -> BuiltinVictim:
    """Seeded mini-batch gradient descent on softmax cross-entropy."""
    if not train:
        raise TrainError("empty training set")
    labels = np.array([ex.label for ex in train])
    if len(np.unique(labels)) < 2:
        raise TrainError("training data must contain at least two classes")
    task = train[0].task
    arity = 1 if task == "sentiment" else 2
    if num_classes is None:
        num_classes = 2 if task == "sentiment" else 3
    vocab = sorted({t for ex in train for d in ex.documents for t in d.tokens})
    feats = Featurizer(vocab, arity)
    items = [ex.documents[0].tokens if arity == 1 else tuple(d.tokens for d in ex.documents) for ex in train]
    X = feats.transform(items)

    rng = np.random.default_rng(config.seed)
    W = np.zeros((num_classes, feats.num_features))
    b = np.zeros(num_classes)
    n = len(train)
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            _, gW, gb = loss_and_grad(W, b, X[idx], labels[idx], config.l2)
            W -= config.lr * gW
            b -= config.lr * gb
    victim = BuiltinVictim(feats, W, b, task)
    if validation:
        log.info("held-out accuracy %.4f", victim.accuracy(validation))
    return victim


class RemoteVictim(Victim):
    """HTTP client for ``POST <base>/predict``.

    Sentiment requests send ``{"texts": [...]}``, entailment requests
    ``{"pairs": [[premise, hypothesis], ...]}``; the server answers
    ``{"probabilities": [[...], ...]}`` in request order.
    """

    def __init__(self, base_url: str, task: str = "sentiment", num_classes: int | None = None,
                 timeout: float = 30.0, retries: int = 2, session: requests.Session | None = None):
        super().__init__()
        self.base_url = base_url.rstrip("/")
        self.task = task
        self.num_classes = num_classes or (2 if task == "sentiment" else 3)
        self.timeout = timeout
        self.retries = retries
        self.session = session or requests.Session()

    def request_body(self, items) -> dict:
        if self.arity == 1:
            return {"texts": [detokenize(t) for t in items]}
        return {"pairs": [[detokenize(p), detokenize(h)] for p, h in items]}

    def _predict(self, items):
        body = self.request_body(items)
        last_error = None
        for attempt in range(self.retries + 1):
            try:
                resp = self.session.post(f"{self.base_url}/predict", json=body, timeout=self.timeout)
                resp.raise_for_status()
                probs = resp.json()["probabilities"]
                break
            except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
                last_error = exc
                log.warning("victim request failed (attempt %d): %s", attempt + 1, exc)
                if attempt < self.retries:
                    time.sleep(min(0.1 * 2**attempt, 2.0))
        else:
            raise VictimUnavailable(f"{self.base_url}/predict: {last_error}")
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (len(items), self.num_classes) or not np.all(np.isfinite(probs)):
            raise VictimUnavailable(f"malformed probabilities of shape {probs.shape}")
        return probs


def load_victim(spec: str, task: str, timeout: float = 30.0, retries: int = 2) -> Victim:
    """Parse a ``builtin:PATH`` or ``http:URL`` victim reference."""
    kind, _, target = spec.partition(":")
    if kind == "builtin":
        victim = BuiltinVictim.load(target)
        if victim.task != task:
            raise LoadError(f"victim was trained for {victim.task}, not {task}")
        return victim
    if kind == "http":
        url = target if target.startswith("http") else "http://" + target.lstrip("/")
        return RemoteVictim(url, task, timeout=timeout, retries=retries)
    raise LoadError(f"unknown victim reference {spec!r} (expected builtin:PATH or http:URL)")


def serve_json(victim: Victim, body: dict) -> dict:
    """Server-side handler for the wire protocol, backed by any victim."""
    from .corpus import tokenize

    if "texts" in body:
        batch = [tokenize(t) for t in body["texts"]]
    elif "pairs" in body:
        batch = [(tokenize(p), tokenize(h)) for p, h in body["pairs"]]
    else:
        raise ContractViolation("request needs 'texts' or 'pairs'")
    return {"probabilities": victim.predict_probs(batch).tolist()}


__all__ = [
    "BuiltinVictim",
    "Featurizer",
    "QueryLedger",
    "RemoteVictim",
    "TrainConfig",
    "Victim",
    "load_victim",
    "loss_and_grad",
    "serve_json",
    "softmax",
    "train_builtin",
]
