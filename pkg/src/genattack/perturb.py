"""Single-word substitution step shared by the genetic and greedy attacks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Sequence

import numpy as np

from .corpus import Document
from .embedding import EmbeddingSpace, nearest_neighbors, neighbor_counts
from .errors import ContractViolation, EmptyCandidates, NoReplaceablePositions
from .language_model import NGramModel, filter_top_k
from .victim import Victim


def load_stopwords(path=None) -> frozenset[str]:
    """One token per line; defaults to the bundled article/preposition list."""
    if path is None:
        text = resources.files("genattack").joinpath("data/stopwords.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


@dataclass(frozen=True)
class PerturbContext:
    space: EmbeddingSpace
    lm: NGramModel
    victim: Victim
    stopwords: frozenset[str] = field(default_factory=load_stopwords)
    neighbors: int = 8
    top_k: int = 4
    delta: float = 0.5
    max_change_fraction: float = 0.2
    # entailment: fixed premise sent with every hypothesis query
    premise: Document | None = None
    rng: np.random.Generator | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.neighbors < 1 or self.top_k < 1:
            raise ContractViolation("neighbors and top_k must be >= 1")
        if self.delta < 0:
            raise ContractViolation("delta must be nonnegative")
        if not 0 < self.max_change_fraction <= 1:
            raise ContractViolation("max_change_fraction must be in (0, 1]")

    def with_premise(self, premise: Document | None) -> PerturbContext:
        return replace(self, premise=premise)

    def query(self, docs: Sequence[Document]) -> np.ndarray:
        if self.premise is None:
            return self.victim.predict_probs(list(docs))
        return self.victim.predict_probs([(self.premise, d) for d in docs])

    def _rng(self, rng):
        if rng is not None:
            return rng
        if self.rng is None:
            raise ContractViolation("no random generator supplied")
        return self.rng


def position_weights(doc: Document, ctx: PerturbContext) -> np.ndarray:
    """Unnormalized sampling weights over positions.

    Weights come from the neighbor count of the original word. Stopwords get
    zero; once one more fresh substitution would break the change cap, only
    already-modified positions keep their weight.
    """
    weights = np.array(neighbor_counts(ctx.space, doc.origin_tokens, ctx.delta), dtype=np.float64)
    for i, tok in enumerate(doc.origin_tokens):
        if tok in ctx.stopwords:
            weights[i] = 0.0
    if len(doc) and (doc.num_modified + 1) / len(doc) > ctx.max_change_fraction:
        weights[~np.array(doc.modified_mask, dtype=bool)] = 0.0
    return weights


def select_position(doc: Document, ctx: PerturbContext, rng=None) -> int:
    if len(doc) == 0:
        raise ContractViolation("empty document")
    weights = position_weights(doc, ctx)
    total = weights.sum()
    if total <= 0:
        raise NoReplaceablePositions("no position has an in-budget neighbor")
    return int(ctx._rng(rng).choice(len(doc), p=weights / total))


def propose_candidates(doc: Document, position: int, ctx: PerturbContext) -> list[str]:
    """In-delta neighbors of the original word, reduced to the LM's top K."""
    if not 0 <= position < len(doc):
        raise ContractViolation(f"position {position} out of range")
    anchor = doc.origin_tokens[position]
    incumbent = doc.tokens[position]
    words = [w for w, _ in nearest_neighbors(ctx.space, anchor, ctx.neighbors, ctx.delta) if w != incumbent]
    if not words:
        raise EmptyCandidates(anchor)
    return filter_top_k(ctx.lm, doc.tokens, position, words, ctx.top_k)


def perturb_with_probs(doc: Document, target: int, ctx: PerturbContext, rng=None):
    """Like :func:`perturb`, also returning the victim's probabilities for the
    returned document (None when nothing was queried)."""
    try:
        position = select_position(doc, ctx, rng)
        candidates = propose_candidates(doc, position, ctx)
    except (NoReplaceablePositions, EmptyCandidates):
        return doc, None
    trials = [doc.replace(position, c) for c in candidates]
    probs = ctx.query(trials)
    best = int(np.argmax(probs[:, target]))
    return trials[best], probs[best]


def perturb(doc: Document, target: int, ctx: PerturbContext, rng=None) -> Document:
    """Replace one sampled word with the candidate that maximizes ``target``.

    The winner is applied even when it does not beat the incoming document;
    selection pressure lives in the caller.
    """
    return perturb_with_probs(doc, target, ctx, rng)[0]
