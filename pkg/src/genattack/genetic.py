"""Population-based attack and the greedy single-trajectory baseline."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import Document
from .errors import ContractViolation, VictimUnavailable
from .perturb import PerturbContext, perturb, perturb_with_probs, position_weights
from .victim import Victim

GENERATIONS_EXHAUSTED = "generations exhausted"
NO_POSITIONS = "no replaceable positions"
VICTIM_UNAVAILABLE = "victim unavailable"


@dataclass(frozen=True)
class AttackConfig:
    pop_size: int = 60
    max_generations: int = 20
    neighbors: int = 8
    top_k: int = 4
    delta: float = 0.5
    max_change_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 2:
            raise ContractViolation("pop_size must be >= 2")
        if self.max_generations < 1:
            raise ContractViolation("max_generations must be >= 1")

    @classmethod
    def for_task(cls, task: str, **overrides) -> AttackConfig:
        overrides.setdefault("max_change_fraction", 0.25 if task == "entailment" else 0.2)
        return cls(**overrides)


@dataclass(frozen=True)
class AttackResult:
    success: bool
    target: int
    document: Document
    modified_fraction: float
    generations_used: int
    queries: int
    documents_scored: int
    predicted_label: int
    failure_reason: str | None = None
    # best target probability at each fitness evaluation
    fitness_trace: tuple[float, ...] = field(default=(), compare=False)

    @property
    def aborted(self) -> bool:
        return self.failure_reason == VICTIM_UNAVAILABLE

    @property
    def adversarial(self) -> Document | None:
        return self.document if self.success else None


class _CountingVictim(Victim):
    """Per-attack query tally in front of the shared victim."""

    def __init__(self, inner: Victim):
        super().__init__()
        self.inner = inner
        self.task = inner.task
        self.num_classes = inner.num_classes

    def predict_probs(self, batch):
        probs = self.inner.predict_probs(batch)
        with self._ledger_lock:
            self._queries += 1
            self._documents += len(batch)
        return probs


def _attack_context(ctx: PerturbContext, config: AttackConfig):
    counter = _CountingVictim(ctx.victim)
    ctx = replace(
        ctx,
        victim=counter,
        neighbors=config.neighbors,
        top_k=config.top_k,
        delta=config.delta,
        max_change_fraction=config.max_change_fraction,
    )
    return ctx, counter


def member_rng(seed: int, generation: int, member: int) -> np.random.Generator:
    """Independent stream per population slot, so results do not depend on
    evaluation order."""
    return np.random.default_rng([seed, generation, member])


def crossover(parent1: Document, parent2: Document, rng: np.random.Generator) -> Document:
    if len(parent1) != len(parent2) or parent1.origin_tokens != parent2.origin_tokens:
        raise ContractViolation("crossover parents must share an origin")
    take_first = rng.random(len(parent1)) < 0.5
    tokens = [a if f else b for a, b, f in zip(parent1.tokens, parent2.tokens, take_first)]
    return parent1.with_tokens(tokens)


def normalize_fitness(fitness) -> np.ndarray:
    f = np.asarray(fitness, dtype=np.float64)
    if np.any(f < 0):
        raise ContractViolation("fitness values must be nonnegative")
    total = f.sum()
    if total <= 0:
        return np.full(len(f), 1.0 / len(f))
    return f / total


def enforce_cap(doc: Document, max_change_fraction: float, rng: np.random.Generator) -> Document:
    """Revert randomly chosen substitutions until ``doc`` is within the cap.

    Crossover of two feasible parents can exceed the cap when their changes
    sit at different positions.
    """
    allowed = int(np.floor(max_change_fraction * len(doc) + 1e-9))
    modified = np.flatnonzero(doc.modified_mask)
    if len(modified) <= allowed:
        return doc
    tokens = list(doc.tokens)
    for i in rng.choice(modified, size=len(modified) - allowed, replace=False):
        tokens[i] = doc.origin_tokens[i]
    return doc.with_tokens(tokens)


def _result(success, target, doc, generations, counter, predicted, reason=None, trace=()):
    stats = counter.query_stats()
    return AttackResult(
        success=success,
        target=target,
        document=doc,
        modified_fraction=doc.modified_fraction,
        generations_used=generations,
        queries=stats.total_queries,
        documents_scored=stats.total_documents,
        predicted_label=predicted,
        failure_reason=reason,
        fitness_trace=tuple(trace),
    )


def _breed(population, probs, target, ctx, seed, generation, member):
    rng = member_rng(seed, generation, member)
    i, j = rng.choice(len(population), size=2, p=probs)
    child = enforce_cap(crossover(population[i], population[j], rng), ctx.max_change_fraction, rng)
    return perturb(child, target, ctx, rng)


def attack_genetic(origin: Document, target: int, ctx: PerturbContext, config: AttackConfig,
                   executor=None) -> AttackResult:
    """Evolve a population of perturbed copies of ``origin`` toward ``target``.

    Each generation keeps the fittest member unchanged and fills the other
    S-1 slots by fitness-proportional parent sampling, uniform crossover and
    one Perturb step. Child construction may be farmed out to ``executor``
    (anything with ``map``); per-slot random streams keep the outcome
    identical to sequential evaluation.
    """
    ctx, counter = _attack_context(ctx, config)
    S, seed = config.pop_size, config.seed
    if position_weights(origin, ctx).sum() <= 0:
        return _result(False, target, origin, 0, counter, -1, NO_POSITIONS)

    mapper = executor.map if executor is not None else map
    trace = []
    best_doc, predicted, generation = origin, -1, 0
    try:
        population = list(mapper(lambda i: perturb(origin, target, ctx, member_rng(seed, 0, i)), range(S)))
        for generation in range(1, config.max_generations + 1):
            probs = ctx.query(population)
            fitness = probs[:, target]
            best = int(np.argmax(fitness))
            best_doc = population[best]
            predicted = int(np.argmax(probs[best]))
            trace.append(float(fitness[best]))
            if predicted == target and best_doc.modified_fraction <= config.max_change_fraction:
                return _result(True, target, best_doc, generation, counter, predicted, trace=trace)
            if generation == config.max_generations:
                # the next population would never be scored
                break
            p = normalize_fitness(fitness)
            children = mapper(
                lambda i, pop=population, p=p, g=generation: _breed(pop, p, target, ctx, seed, g, i),
                range(1, S),
            )
            population = [best_doc, *children]
    except VictimUnavailable:
        return _result(False, target, best_doc, generation, counter, predicted, VICTIM_UNAVAILABLE, trace)
    return _result(False, target, best_doc, generation, counter, predicted, GENERATIONS_EXHAUSTED, trace)


def attack_greedy(origin: Document, target: int, ctx: PerturbContext, config: AttackConfig) -> AttackResult:
    """Hill-climb with Perturb, keeping a step only if the target probability
    strictly rises. Budget is S*G Perturb calls, the genetic attack's count."""
    ctx, counter = _attack_context(ctx, config)
    rng = np.random.default_rng([config.seed, 1 << 20])
    current, iteration = origin, 0
    try:
        current_probs = ctx.query([origin])[0]
        trace = [float(current_probs[target])]
        if int(np.argmax(current_probs)) == target:
            return _result(True, target, origin, 0, counter, target, trace=trace)
        if position_weights(origin, ctx).sum() <= 0:
            return _result(False, target, origin, 0, counter, int(np.argmax(current_probs)), NO_POSITIONS, trace)
        for iteration in range(1, config.pop_size * config.max_generations + 1):
            candidate, probs = perturb_with_probs(current, target, ctx, rng)
            if probs is None or probs[target] <= current_probs[target]:
                continue
            current, current_probs = candidate, probs
            trace.append(float(probs[target]))
            if int(np.argmax(probs)) == target:
                return _result(True, target, current, iteration, counter, target, trace=trace)
    except VictimUnavailable:
        return _result(False, target, current, iteration, counter, -1, VICTIM_UNAVAILABLE)
    return _result(False, target, current, iteration, counter, int(np.argmax(current_probs)),
                   GENERATIONS_EXHAUSTED, trace)
