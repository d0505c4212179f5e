"""Campaign orchestration, adversarial-training cycle and JSON reports."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .corpus import LabeledExample, load_dataset
from .embedding import EmbeddingSpace, load_embeddings
from .errors import CampaignError, ContractViolation
from .genetic import AttackConfig, AttackResult, attack_genetic, attack_greedy
from .language_model import NGramModel, train_ngram
from .perturb import PerturbContext, load_stopwords
from .victim import TrainConfig, Victim, load_victim, train_builtin

log = logging.getLogger(__name__)

ENTAILMENT, NEUTRAL, CONTRADICTION = 0, 1, 2

DEVIATIONS = (
    "change cap is enforced while sampling positions: once one more fresh substitution would exceed "
    "the cap, only already-modified positions may be re-substituted",
    "a crossover child over the change cap has randomly chosen substitutions reverted to the original "
    "words before mutation",
    "replacement candidates are neighbors of the original word at a position, so every substitution "
    "stays within the distance budget of the original text",
    "Perturb applies its best candidate even when the target probability does not improve",
    "greedy baseline accepts only strict improvements and has a budget of pop_size * max_generations "
    "Perturb calls",
    "language model is a trainable additive-smoothed n-gram model",
    "the population after the final generation is not bred, since it would never be scored",
    "per-example runtimes are reported under 'timings', outside 'results', so results stay deterministic",
)


class UnsupportedOperation(CampaignError):
    pass


def flip_target(label: int, task: str) -> int:
    if task == "sentiment":
        return 1 - label
    if label == ENTAILMENT:
        return CONTRADICTION
    if label == CONTRADICTION:
        return ENTAILMENT
    raise ContractViolation("neutral examples have no flip target")


@dataclass(frozen=True)
class CampaignConfig:
    task: str = "sentiment"
    kind: str = "genetic"
    sample_size: int | None = None
    attack: AttackConfig | None = None
    seed: int = 0
    dataset: str | None = None
    embeddings: str | None = None
    embedding_dim: int = 300
    lm: str | None = None
    lm_corpus: str | None = None
    lm_order: int = 3
    victim: str | None = None
    stopwords: str | None = None
    timeout: float = 30.0
    retries: int = 2

    def __post_init__(self):
        if self.task not in ("sentiment", "entailment"):
            raise ContractViolation(f"unknown task {self.task!r}")
        if self.kind not in ("genetic", "greedy"):
            raise ContractViolation(f"unknown attack kind {self.kind!r}")
        if self.sample_size is None:
            object.__setattr__(self, "sample_size", 1000 if self.task == "sentiment" else 500)
        if self.attack is None:
            object.__setattr__(self, "attack", AttackConfig.for_task(self.task, seed=self.seed))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["attack"] = asdict(self.attack)
        return d


@dataclass
class Resources:
    examples: list[LabeledExample]
    space: EmbeddingSpace
    lm: NGramModel
    victim: Victim | None
    stopwords: frozenset[str] = field(default_factory=load_stopwords)


def load_resources(config: CampaignConfig, need_victim: bool = True) -> Resources:
    """Load everything up front so path errors surface before any attack runs."""
    for name in ("dataset", "embeddings"):
        if getattr(config, name) is None:
            raise CampaignError(f"campaign needs a {name} path")
    examples = load_dataset(config.dataset, config.task)
    space = load_embeddings(config.embeddings, config.embedding_dim)
    if config.lm is not None:
        lm = NGramModel.load(config.lm)
    elif config.lm_corpus is not None:
        lm = train_ngram(config.lm_corpus, config.lm_order)
    else:
        raise CampaignError("campaign needs --lm or --lm-corpus")
    victim = None
    if need_victim:
        if config.victim is None:
            raise CampaignError("campaign needs a victim")
        victim = load_victim(config.victim, config.task, config.timeout, config.retries)
    stopwords = load_stopwords(config.stopwords)
    return Resources(examples, space, lm, victim, stopwords)


def sample_correct(dataset: Sequence[LabeledExample], victim: Victim, n: int, seed: int,
                   task: str, batch_size: int = 512) -> list[tuple[int, LabeledExample]]:
    """Uniformly sample up to ``n`` examples the victim gets right.

    Entailment sampling skips gold-neutral examples. Returns (dataset index,
    example) pairs in dataset order.
    """
    if not dataset:
        raise CampaignError("empty dataset")
    eligible = [i for i, ex in enumerate(dataset) if task == "sentiment" or ex.label != NEUTRAL]
    correct = []
    for start in range(0, len(eligible), batch_size):
        chunk = eligible[start:start + batch_size]
        pred = victim.predict_labels([dataset[i] for i in chunk])
        correct.extend(i for i, p in zip(chunk, pred) if p == dataset[i].label)
    if not correct:
        raise CampaignError("victim classifies no eligible example correctly")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(correct), size=min(n, len(correct)), replace=False)
    return [(correct[k], dataset[correct[k]]) for k in sorted(chosen)]


@dataclass
class CampaignReport:
    config: dict
    results: list[dict]
    aggregates: dict
    deviations: list[str] = field(default_factory=lambda: list(DEVIATIONS))
    warnings: list[str] = field(default_factory=list)
    timings: list[float] = field(default_factory=list)
    # in-memory only; not serialized
    attack_results: list[AttackResult] = field(default_factory=list, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "results": self.results,
            "aggregates": self.aggregates,
            "deviations": self.deviations,
            "warnings": self.warnings,
            "timings": self.timings,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CampaignReport:
        return cls(d["config"], d["results"], d["aggregates"], d.get("deviations", []),
                   d.get("warnings", []), d.get("timings", []))


def aggregate(results: Sequence[dict], timings: Sequence[float] | None = None) -> dict:
    """Table-style metrics; a pure function of the per-example records."""
    attempted = [r for r in results if r["failure_reason"] != "victim unavailable"]
    wins = [r for r in attempted if r["success"]]
    win_times = [t for r, t in zip(results, timings or []) if r["success"]]
    return {
        "attempted": len(attempted),
        "successes": len(wins),
        "aborted": len(results) - len(attempted),
        "success_rate": len(wins) / len(attempted) if attempted else 0.0,
        "mean_modified_fraction": float(np.mean([r["modified_fraction"] for r in wins])) if wins else None,
        "mean_seconds_per_success": float(np.mean(win_times)) if win_times else None,
        "total_queries": sum(r["queries"] for r in results),
        "total_documents_scored": sum(r["documents_scored"] for r in results),
    }


def result_record(index: int, example: LabeledExample, result: AttackResult) -> dict:
    record = {
        "index": index,
        "success": result.success,
        "modified_fraction": result.modified_fraction,
        "generations_used": result.generations_used,
        "queries": result.queries,
        "original_text": example.attacked.text(),
        "adversarial_text": result.document.text() if result.success else None,
        "original_label": example.label,
        "predicted_label": result.predicted_label,
        "target_label": result.target,
        "failure_reason": result.failure_reason,
        "documents_scored": result.documents_scored,
    }
    if example.premise is not None:
        record["premise"] = example.premise.text()
    return record


def example_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def attack_examples(sample: Sequence[tuple[int, LabeledExample]], ctx: PerturbContext, kind: str,
                    attack: AttackConfig, seed: int, executor=None) -> tuple[list[AttackResult], list[float]]:
    """Attack each (index, example) toward its flipped label.

    Every example gets its own seed derived from (campaign seed, index), so
    results do not depend on which worker runs which example.
    """
    attack_fn = attack_genetic if kind == "genetic" else attack_greedy

    def run(item):
        index, ex = item
        started = time.perf_counter()
        result = attack_fn(
            ex.attacked,
            flip_target(ex.label, ex.task),
            ctx.with_premise(ex.premise),
            replace(attack, seed=example_seed(seed, index)),
        )
        return result, time.perf_counter() - started

    mapper = executor.map if executor is not None else map
    pairs = list(mapper(run, sample))
    return [r for r, _ in pairs], [t for _, t in pairs]


def run_campaign(config: CampaignConfig, resources: Resources | None = None, executor=None) -> CampaignReport:
    if resources is None:
        resources = load_resources(config)
    if resources.victim is None:
        raise CampaignError("campaign needs a victim")
    if config.sample_size < 1:
        raise CampaignError("campaign needs at least one example")
    sample = sample_correct(resources.examples, resources.victim, config.sample_size, config.seed, config.task)
    warnings = []
    if len(sample) < config.sample_size:
        warnings.append(f"requested {config.sample_size} examples, only {len(sample)} correctly classified")
        log.warning(warnings[-1])
    a = config.attack
    ctx = PerturbContext(
        resources.space, resources.lm, resources.victim, resources.stopwords,
        neighbors=a.neighbors, top_k=a.top_k, delta=a.delta, max_change_fraction=a.max_change_fraction,
    )
    results, timings = attack_examples(sample, ctx, config.kind, a, config.seed, executor)
    records = [result_record(i, ex, r) for (i, ex), r in zip(sample, results)]
    return CampaignReport(config.to_dict(), records, aggregate(records, timings), warnings=warnings,
                          timings=timings, attack_results=results)


def write_report(report: CampaignReport | dict, path) -> None:
    data = report.to_dict() if hasattr(report, "to_dict") else report
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def read_report(path) -> CampaignReport:
    with open(path, encoding="utf-8") as fh:
        return CampaignReport.from_dict(json.load(fh))


@dataclass
class AdvTrainReport:
    before: CampaignReport
    after: CampaignReport
    n_adversarial: int
    adversarial_accuracy_before: float
    adversarial_accuracy_after: float
    clean_accuracy_before: float
    clean_accuracy_after: float
    generation: CampaignReport | None = None

    def summary(self) -> dict:
        return {
            "n_adversarial": self.n_adversarial,
            "adversarial_accuracy_before": self.adversarial_accuracy_before,
            "adversarial_accuracy_after": self.adversarial_accuracy_after,
            "clean_accuracy_before": self.clean_accuracy_before,
            "clean_accuracy_after": self.clean_accuracy_after,
            "success_rate_before": self.before.aggregates["success_rate"],
            "success_rate_after": self.after.aggregates["success_rate"],
        }


def split_holdout(examples: Sequence[LabeledExample], fraction: float, seed: int):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(examples))
    cut = int(round(len(examples) * (1 - fraction)))
    return [examples[i] for i in sorted(order[:cut])], [examples[i] for i in sorted(order[cut:])]


def adv_train_cycle(config: CampaignConfig, train_config: TrainConfig = TrainConfig(),
                    resources: Resources | None = None, test_examples: Sequence[LabeledExample] | None = None,
                    eval_samples: int = 100, executor=None) -> AdvTrainReport:
    """Train clean, attack the training split, retrain from scratch on
    clean + adversarial (original gold labels), then attack both victims on
    held-out data."""
    if config.victim is not None and not config.victim.startswith("builtin"):
        raise UnsupportedOperation("adversarial training needs the built-in victim")
    if resources is None:
        resources = load_resources(config, need_victim=False)
    train = list(resources.examples)
    if test_examples is None:
        train, test_examples = split_holdout(train, 0.2, config.seed)
    test_examples = list(test_examples)

    clean = train_builtin(train, train_config)
    gen = run_campaign(config, replace(resources, examples=train, victim=clean), executor)
    adversarial = []
    for record, result in zip(gen.results, gen.attack_results):
        if result.success:
            adversarial.append(train[record["index"]].with_attacked(result.document))
    retrained = train_builtin(train + adversarial, train_config)

    eval_config = replace(config, sample_size=eval_samples)
    before = run_campaign(eval_config, replace(resources, examples=test_examples, victim=clean), executor)
    after = run_campaign(eval_config, replace(resources, examples=test_examples, victim=retrained), executor)
    return AdvTrainReport(
        before=before,
        after=after,
        n_adversarial=len(adversarial),
        adversarial_accuracy_before=clean.accuracy(adversarial),
        adversarial_accuracy_after=retrained.accuracy(adversarial),
        clean_accuracy_before=clean.accuracy(test_examples),
        clean_accuracy_after=retrained.accuracy(test_examples),
        generation=gen,
    )


__all__ = [
    "AdvTrainReport",
    "CampaignConfig",
    "CampaignReport",
    "Resources",
    "UnsupportedOperation",
    "adv_train_cycle",
    "aggregate",
    "flip_target",
    "load_resources",
    "read_report",
    "run_campaign",
    "sample_correct",
    "write_report",
]
