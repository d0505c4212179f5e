import json
from dataclasses import replace

import numpy as np
import pytest

from genattack.corpus import Document, LabeledExample
from genattack.embedding import EmbeddingSpace
from genattack.errors import CampaignError, ContractViolation, LoadError
from genattack.genetic import AttackConfig
from genattack.harness import (
    CampaignConfig,
    Resources,
    UnsupportedOperation,
    adv_train_cycle,
    aggregate,
    flip_target,
    load_resources,
    read_report,
    run_campaign,
    sample_correct,
    write_report,
)
from genattack.language_model import train_from_sentences
from genattack.synthetic import WorldConfig, make_world
from genattack.victim import TrainConfig, train_builtin

from conftest import FunctionVictim, constant_victim, stump_victim


def sentiment(label, text):
    return LabeledExample(label, (Document.from_text(text),))


@pytest.fixture(scope="module")
def stump_world():
    """20 negative reviews, each holding 'good', whose only neighbor 'great'
    flips the stump victim."""
    space = EmbeddingSpace(
        ["good", "great", "movie", "plot", "was", "the", "actors"],
        [[0, 0], [0.2, 0], [5, 5], [-5, 5], [5, -5], [-5, -5], [9, 0]],
    )
    rng = np.random.default_rng(0)
    fillers = ["movie", "plot", "was", "the", "actors"]
    examples = []
    for _ in range(20):
        words = list(rng.choice(fillers, size=4)) + ["good"]
        rng.shuffle(words)
        examples.append(sentiment(0, " ".join(words)))
    lm = train_from_sentences([ex.documents[0].tokens for ex in examples], 3)
    return Resources(examples, space, lm, stump_victim("great"))


@pytest.fixture(scope="module")
def small_world():
    world = make_world(WorldConfig(seed=1))
    train, test = world.sentiment_examples(500), world.sentiment_examples(200)
    lm = train_from_sentences([world.sentiment_document(i % 2) for i in range(400)], 3)
    victim = train_builtin(train, TrainConfig(seed=0))
    return world, train, test, lm, victim


def small_config(**kw):
    attack = AttackConfig(pop_size=kw.pop("pop_size", 20), max_generations=kw.pop("generations", 8),
                          max_change_fraction=kw.pop("cap", 0.2))
    return CampaignConfig(attack=attack, **kw)


def test_flip_target():
    assert flip_target(0, "sentiment") == 1 and flip_target(1, "sentiment") == 0
    assert flip_target(0, "entailment") == 2 and flip_target(2, "entailment") == 0
    with pytest.raises(ContractViolation):
        flip_target(1, "entailment")


def test_config_defaults():
    assert CampaignConfig().sample_size == 1000
    ent = CampaignConfig(task="entailment")
    assert ent.sample_size == 500 and ent.attack.max_change_fraction == 0.25
    with pytest.raises(ContractViolation):
        CampaignConfig(kind="beam")


def test_sample_correct_requires_correct_examples(stump_world):
    wrong = constant_victim(1)
    with pytest.raises(CampaignError):
        sample_correct(stump_world.examples, wrong, 5, 0, "sentiment")


def test_sample_correct_is_seeded(stump_world):
    a = sample_correct(stump_world.examples, stump_world.victim, 5, 3, "sentiment")
    b = sample_correct(stump_world.examples, stump_world.victim, 5, 3, "sentiment")
    assert [i for i, _ in a] == [i for i, _ in b]
    assert len(a) == 5 and [i for i, _ in a] == sorted(i for i, _ in a)
    everything = sample_correct(stump_world.examples, stump_world.victim, 500, 3, "sentiment")
    assert len(everything) == 20


def test_sample_correct_skips_neutral():
    doc = Document.from_text("x")
    data = [LabeledExample(label, (doc, doc)) for label in (0, 1, 2, 1)]
    victim = FunctionVictim(lambda _: [0.2, 0.6, 0.2], num_classes=3, task="entailment")
    with pytest.raises(CampaignError):
        sample_correct(data, victim, 10, 0, "entailment")


def test_stump_campaign_always_succeeds(stump_world):
    report = run_campaign(small_config(sample_size=20, cap=0.2), stump_world)
    assert report.aggregates["attempted"] == 20
    assert report.aggregates["success_rate"] == 1.0
    assert report.aggregates["mean_modified_fraction"] == pytest.approx(0.2)
    for r in report.results:
        assert "great" in r["adversarial_text"].split() and r["predicted_label"] == 1


def test_shortfall_is_warned(stump_world):
    report = run_campaign(small_config(sample_size=50), stump_world)
    assert len(report.results) == 20
    assert report.warnings and "50" in report.warnings[0]


def test_zero_samples_is_an_error(stump_world):
    with pytest.raises(CampaignError):
        run_campaign(small_config(sample_size=0), stump_world)


def test_report_round_trip(tmp_path, stump_world):
    report = run_campaign(small_config(sample_size=2), stump_world)
    path = tmp_path / "r.json"
    write_report(report, path)
    data = json.loads(path.read_text())
    assert list(data) == ["config", "results", "aggregates", "deviations", "warnings", "timings"]
    assert len(data["results"]) == 2
    assert list(data["results"][0])[:9] == [
        "index", "success", "modified_fraction", "generations_used", "queries",
        "original_text", "adversarial_text", "original_label", "predicted_label",
    ]
    again = read_report(path)
    assert again.aggregates == report.aggregates
    assert again.results == report.results
    assert aggregate(again.results, again.timings) == again.aggregates


def test_unwritable_report(tmp_path, stump_world):
    report = run_campaign(small_config(sample_size=1), stump_world)
    with pytest.raises(OSError):
        write_report(report, tmp_path / "missing" / "r.json")


def test_aggregates_recomputable(small_world):
    world, train, test, lm, victim = small_world
    res = Resources(test, world.space, lm, victim)
    report = run_campaign(small_config(sample_size=30, seed=2), res)
    results = report.results
    wins = [r for r in results if r["success"]]
    assert report.aggregates["success_rate"] == len(wins) / len(results)
    assert report.aggregates["mean_modified_fraction"] == pytest.approx(
        np.mean([r["modified_fraction"] for r in wins])
    )
    assert report.aggregates["total_queries"] == sum(r["queries"] for r in results)
    for r in results:
        assert r["predicted_label"] != r["original_label"] or not r["success"]


def test_campaign_is_deterministic(small_world):
    world, train, test, lm, victim = small_world
    res = Resources(test, world.space, lm, victim)
    cfg = small_config(sample_size=15, seed=4)
    first = json.dumps(run_campaign(cfg, res).results)
    second = json.dumps(run_campaign(cfg, res).results)
    assert first == second


def test_parallel_campaign_matches_sequential(small_world):
    from concurrent.futures import ThreadPoolExecutor

    world, train, test, lm, victim = small_world
    res = Resources(test, world.space, lm, victim)
    cfg = small_config(sample_size=12, seed=5)
    with ThreadPoolExecutor(4) as pool:
        parallel = run_campaign(cfg, res, executor=pool)
    assert parallel.results == run_campaign(cfg, res).results


def test_genetic_not_worse_than_greedy(small_world):
    world, train, test, lm, victim = small_world
    res = Resources(test, world.space, lm, victim)
    genetic = run_campaign(small_config(sample_size=40, seed=1, kind="genetic"), res)
    greedy = run_campaign(small_config(sample_size=40, seed=1, kind="greedy"), res)
    assert genetic.aggregates["success_rate"] >= greedy.aggregates["success_rate"]


def test_entailment_campaign_keeps_premise():
    world = make_world()
    data = world.entailment_examples(300)
    victim = train_builtin(data, TrainConfig(seed=0))
    seen = []
    original = victim._predict

    def recording(items):
        seen.extend(p for p, _ in items)
        return original(items)

    victim._predict = recording
    lm = train_from_sentences([world.sentiment_document(i % 2) for i in range(300)], 3)
    res = Resources(data, world.space, lm, victim)
    cfg = CampaignConfig(task="entailment", sample_size=20,
                         attack=AttackConfig.for_task("entailment", pop_size=10, max_generations=5))
    report = run_campaign(cfg, res)
    premises = {ex.premise.tokens for ex in data}
    assert seen and all(p in premises for p in seen)
    for r in report.results:
        assert data[r["index"]].premise.text() == r["premise"]
        assert data[r["index"]].label != 1


def test_load_resources_fails_early(tmp_path):
    with pytest.raises(CampaignError):
        load_resources(CampaignConfig())
    (tmp_path / "d.tsv").write_text("1\tgood\n", encoding="utf-8")
    (tmp_path / "e.txt").write_text("good 1 2 3\n", encoding="utf-8")
    cfg = CampaignConfig(dataset=str(tmp_path / "d.tsv"), embeddings=str(tmp_path / "e.txt"), embedding_dim=2)
    with pytest.raises(LoadError):
        load_resources(cfg)


def test_adv_train_rejects_remote_victim(small_world):
    with pytest.raises(UnsupportedOperation):
        adv_train_cycle(CampaignConfig(victim="http://localhost:1"))


@pytest.fixture(scope="module")
def cycle_inputs(small_world):
    world, train, test, lm, _ = small_world
    return Resources(train, world.space, lm, None), test


def test_adv_train_cycle(cycle_inputs):
    res, test = cycle_inputs
    cfg = small_config(sample_size=60, seed=0)
    cycle = adv_train_cycle(cfg, TrainConfig(seed=0), res, test, eval_samples=30)
    assert cycle.n_adversarial > 0
    assert cycle.adversarial_accuracy_before == 0.0
    assert cycle.adversarial_accuracy_after >= cycle.adversarial_accuracy_before
    again = adv_train_cycle(cfg, TrainConfig(seed=0), res, test, eval_samples=30)
    assert again.summary() == cycle.summary()
    assert again.after.results == cycle.after.results


def test_adv_train_without_successes_is_a_plain_retrain(cycle_inputs):
    res, test = cycle_inputs
    # a 1% cap forbids every substitution, so nothing is appended
    cfg = small_config(sample_size=20, seed=0, cap=0.01)
    cycle = adv_train_cycle(cfg, TrainConfig(seed=0), res, test, eval_samples=20)
    assert cycle.n_adversarial == 0
    assert cycle.before.results == cycle.after.results
    assert cycle.clean_accuracy_before == cycle.clean_accuracy_after


def test_adv_train_holdout_split(cycle_inputs):
    res, _ = cycle_inputs
    cfg = small_config(sample_size=10, seed=0, generations=3)
    cycle = adv_train_cycle(cfg, TrainConfig(seed=0, epochs=5), replace(res, examples=res.examples[:200]),
                            eval_samples=10)
    assert len(cycle.before.results) <= 10
