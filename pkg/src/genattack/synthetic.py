"""Desk-scale synthetic worlds for end-to-end runs without external data.

A world is a set of synonym clusters ("concepts") embedded so that every
cluster is tight (members well inside the default distance budget) and
clusters are far apart. Sentiment concepts carry a polarity; within every
concept the surface forms follow a Zipf-like frequency, and neutral surface
forms lean slightly toward one class. A bag-of-words victim trained on such
text learns strong weights for common forms and weak or spurious weights for
rare synonyms, which is exactly the gap a substitution attack exploits.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Document, LabeledExample, write_dataset
from .embedding import EmbeddingSpace, save_embeddings
from .perturb import load_stopwords

_ONSETS = "b c d f g h j k l m n p r s t v w z br dr gr kl pl st tr sh ch".split()
_VOWELS = "a e i o u ai ou ee oo".split()
_STOPWORDS = ("the", "a", "of", "to", "and", "in", "with", "for", "on", "at")


@dataclass(frozen=True)
class WorldConfig:
    seed: int = 0
    dim: int = 50
    n_polar_concepts: int = 16
    n_neutral_concepts: int = 90
    max_variants: int = 9
    min_length: int = 25
    max_length: int = 50
    stop_rate: float = 0.2
    polar_rate: float = 0.12
    polar_agreement: float = 0.75
    zipf: float = 1.2
    neutral_bias: float = 0.5
    cluster_radius: tuple[float, float] = (0.025, 0.045)


@dataclass
class Concept:
    words: list[str]
    polarity: int  # +1 positive, -1 negative, 0 neutral
    freq: np.ndarray
    bias: np.ndarray


@dataclass
class SyntheticWorld:
    config: WorldConfig
    concepts: list[Concept]
    space: EmbeddingSpace
    rng: np.random.Generator

    def sentiment_document(self, label: int) -> list[str]:
        cfg, rng = self.config, self.rng
        sign = 1 if label == 1 else -1
        polar = [c for c in self.concepts if c.polarity != 0]
        neutral = [c for c in self.concepts if c.polarity == 0]
        length = int(rng.integers(cfg.min_length, cfg.max_length + 1))
        tokens = []
        for _ in range(length):
            u = rng.random()
            if u < cfg.stop_rate:
                tokens.append(_STOPWORDS[rng.integers(len(_STOPWORDS))])
                continue
            if u < cfg.stop_rate + cfg.polar_rate:
                want = sign if rng.random() < cfg.polar_agreement else -sign
                pool = [c for c in polar if c.polarity == want]
                concept = pool[rng.integers(len(pool))]
                weights = concept.freq
            else:
                concept = neutral[rng.integers(len(neutral))]
                weights = concept.freq * np.exp(sign * concept.bias)
            tokens.append(concept.words[rng.choice(len(concept.words), p=weights / weights.sum())])
        return tokens

    def sentiment_examples(self, n: int) -> list[LabeledExample]:
        out = []
        for _ in range(n):
            label = int(self.rng.integers(2))
            out.append(LabeledExample(label, (Document.from_tokens(self.sentiment_document(label)),)))
        return out

    def entailment_examples(self, n: int) -> list[LabeledExample]:
        """Premise: a handful of neutral words. Entailment hypotheses restate
        premise concepts (possibly via synonyms); contradictions add a
        negative-polarity cue; neutral hypotheses introduce unrelated concepts."""
        rng = self.rng
        neutral = [c for c in self.concepts if c.polarity == 0]
        negative = [c for c in self.concepts if c.polarity < 0]

        def draw(concept):
            return concept.words[rng.choice(len(concept.words), p=concept.freq / concept.freq.sum())]

        out = []
        for _ in range(n):
            label = int(rng.integers(3))
            picked = [neutral[i] for i in rng.choice(len(neutral), size=6, replace=False)]
            premise = []
            for c in picked:
                premise += [_STOPWORDS[rng.integers(len(_STOPWORDS))], draw(c)]
            if label == 0:
                hyp = [draw(c) for c in picked[:4]]
            elif label == 2:
                hyp = [draw(c) for c in picked[:3]] + [draw(negative[rng.integers(len(negative))])]
            else:
                others = [neutral[i] for i in rng.choice(len(neutral), size=4, replace=False)]
                hyp = [draw(c) for c in others]
            hyp = [t for w in hyp for t in (_STOPWORDS[rng.integers(len(_STOPWORDS))], w)][1:]
            hyp = hyp + [draw(neutral[rng.integers(len(neutral))])]
            docs = (Document.from_tokens(premise), Document.from_tokens(hyp))
            out.append(LabeledExample(label, docs))
        return out


def _word_factory(rng):
    seen = set(_STOPWORDS) | load_stopwords()

    def make():
        while True:
            n = int(rng.integers(2, 4))
            w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))] for _ in range(n))
            if w not in seen:
                seen.add(w)
                return w

    return make


def make_world(config: WorldConfig = WorldConfig()) -> SyntheticWorld:
    rng = np.random.default_rng(config.seed)
    new_word = _word_factory(rng)
    concepts = []
    words, vectors = [], []
    kinds = [1, -1] * (config.n_polar_concepts // 2) + [0] * config.n_neutral_concepts
    for polarity in kinds:
        n = int(rng.integers(1 if polarity == 0 else 3, config.max_variants + 1))
        ws = [new_word() for _ in range(n)]
        freq = 1.0 / np.arange(1, n + 1) ** config.zipf
        bias = rng.uniform(-config.neutral_bias, config.neutral_bias, size=n) if polarity == 0 else np.zeros(n)
        concepts.append(Concept(ws, polarity, freq, bias))
        center = rng.normal(size=config.dim)
        radius = rng.uniform(*config.cluster_radius)
        for w in ws:
            words.append(w)
            vectors.append(center + rng.normal(scale=radius, size=config.dim))
    for w in _STOPWORDS:
        words.append(w)
        vectors.append(rng.normal(size=config.dim))
    space = EmbeddingSpace(words, np.array(vectors))
    return SyntheticWorld(config, concepts, space, rng)


def write_world(directory, config: WorldConfig = WorldConfig(), n_train: int = 2000, n_test: int = 1000,
                n_lm: int = 2000, n_entailment: int = 0) -> dict[str, Path]:
    """Materialize a world as TSV/text files; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    world = make_world(config)
    paths = {
        "embeddings": directory / "embeddings.txt",
        "train": directory / "sentiment_train.tsv",
        "test": directory / "sentiment_test.tsv",
        "lm_corpus": directory / "lm_corpus.txt",
    }
    save_embeddings(world.space, paths["embeddings"])
    write_dataset(world.sentiment_examples(n_train), paths["train"])
    write_dataset(world.sentiment_examples(n_test), paths["test"])
    with open(paths["lm_corpus"], "w", encoding="utf-8", newline="\n") as fh:
        for ex in world.sentiment_examples(n_lm):
            fh.write(ex.documents[0].text() + "\n")
    if n_entailment:
        paths["entailment"] = directory / "entailment.tsv"
        write_dataset(world.entailment_examples(n_entailment), paths["entailment"])
    return paths
