import numpy as np
import pytest

from genattack.corpus import Document
from genattack.embedding import EmbeddingSpace
from genattack.errors import ContractViolation, EmptyCandidates, NoReplaceablePositions
from genattack.language_model import score_candidate_in_context, train_from_sentences
from genattack.perturb import (
    PerturbContext,
    load_stopwords,
    perturb,
    position_weights,
    propose_candidates,
    select_position,
)
from genattack.victim import QueryLedger

from conftest import FunctionVictim, constant_victim, stump_victim


def clustered_space():
    """x has 3 in-budget neighbors, y none, z one."""
    words = ["x", "x1", "x2", "x3", "y", "z", "z1", "the"]
    vecs = [[0, 0], [0.1, 0], [0, 0.1], [-0.1, 0], [10, 10], [-10, 10], [-10, 10.2], [0, -10]]
    return EmbeddingSpace(words, vecs)


def ctx_for(space, lm=None, victim=None, **kw):
    lm = lm or train_from_sentences([["x", "y", "z"]], 3)
    return PerturbContext(space, lm, victim or constant_victim(0), **kw)


def test_bundled_stopwords():
    stop = load_stopwords()
    assert {"a", "an", "the", "to", "of", "in", "on", "at", "by", "for", "with", "from"} <= stop
    assert "good" not in stop


def test_weights_proportional_to_counts():
    ctx = ctx_for(clustered_space(), max_change_fraction=1.0)
    doc = Document.from_tokens(["x", "y", "z"])
    np.testing.assert_array_equal(position_weights(doc, ctx), [3, 0, 1])
    rng = np.random.default_rng(0)
    picks = np.bincount([select_position(doc, ctx, rng) for _ in range(20000)], minlength=3) / 20000
    np.testing.assert_allclose(picks, [0.75, 0, 0.25], atol=0.015)


def test_stopword_positions_excluded():
    ctx = ctx_for(clustered_space(), stopwords=frozenset({"z"}), max_change_fraction=1.0)
    doc = Document.from_tokens(["x", "z"])
    rng = np.random.default_rng(1)
    assert {select_position(doc, ctx, rng) for _ in range(200)} == {0}


def test_oov_everywhere_raises():
    ctx = ctx_for(clustered_space(), max_change_fraction=1.0)
    with pytest.raises(NoReplaceablePositions):
        select_position(Document.from_tokens(["foo", "bar"]), ctx, np.random.default_rng(0))


def test_cap_restricts_to_modified_positions():
    ctx = ctx_for(clustered_space(), max_change_fraction=0.2)
    origin = Document.from_tokens(["x"] * 10)
    one = origin.replace(3, "x1")
    # 2/10 stays within the cap, so fresh positions are still open
    assert np.count_nonzero(position_weights(one, ctx)) == 10
    two = one.replace(7, "x2")
    weights = position_weights(two, ctx)
    assert np.flatnonzero(weights).tolist() == [3, 7]


def test_cap_below_one_word_blocks_everything():
    ctx = ctx_for(clustered_space(), max_change_fraction=0.2)
    with pytest.raises(NoReplaceablePositions):
        select_position(Document.from_tokens(["x", "z", "x"]), ctx, np.random.default_rng(0))


def test_context_validation():
    with pytest.raises(ContractViolation):
        ctx_for(clustered_space(), neighbors=0)
    with pytest.raises(ContractViolation):
        ctx_for(clustered_space(), max_change_fraction=0)


def test_single_neighbor_survives_filter():
    ctx = ctx_for(clustered_space(), top_k=1)
    assert propose_candidates(Document.from_tokens(["z", "x"]), 0, ctx) == ["z1"]


def test_no_neighbors_raises():
    ctx = ctx_for(clustered_space())
    with pytest.raises(EmptyCandidates):
        propose_candidates(Document.from_tokens(["y"]), 0, ctx)


def test_incumbent_never_proposed():
    ctx = ctx_for(clustered_space())
    doc = Document.from_tokens(["x", "y"]).replace(0, "x2")
    assert "x2" not in propose_candidates(doc, 0, ctx)
    assert set(propose_candidates(doc, 0, ctx)) == {"x1", "x3"}


def test_lm_top_k_of_six_neighbors():
    words = ["w"] + [f"s{i}" for i in range(6)] + ["far", "ctx", "end"]
    vecs = [[0, 0]] + [[0.05 * (i + 1), 0] for i in range(6)] + [[0, 0.9], [20, 0], [0, 20]]
    space = EmbeddingSpace(words, vecs)
    lines = [["ctx", "s3", "end"]] * 5 + [["ctx", "s0", "end"]] * 3 + [["ctx", "s5", "end"]] * 2
    lines += [["ctx", "s1", "end"], ["s2", "end"], ["ctx", "s4"]]
    lm = train_from_sentences(lines, 3)
    ctx = PerturbContext(space, lm, constant_victim(0), neighbors=8, top_k=4)
    doc = Document.from_tokens(["ctx", "w", "end"])
    # oracle: score all six in-budget neighbors and keep the best four
    six = [f"s{i}" for i in range(6)]
    scores = {c: score_candidate_in_context(lm, doc.tokens, 1, c) for c in six}
    expected = sorted(six, key=lambda c: (-scores[c], six.index(c)))[:4]
    got = propose_candidates(doc, 1, ctx)
    assert got == expected
    assert got[:3] == ["s3", "s0", "s5"]


def test_perturb_picks_target_maximizer(movie_space, movie_lm):
    ctx = PerturbContext(movie_space, movie_lm, stump_victim("great"), max_change_fraction=0.5)
    out = perturb(Document.from_tokens(["good", "movie"]), 1, ctx, np.random.default_rng(0))
    assert out.tokens == ("great", "movie")
    assert ctx.victim.query_stats() == QueryLedger(1, 2)


def test_perturb_no_op_without_positions(movie_space, movie_lm):
    victim = constant_victim(0)
    ctx = PerturbContext(movie_space, movie_lm, victim)
    doc = Document.from_tokens(["movie", "plot", "the"])
    assert perturb(doc, 1, ctx, np.random.default_rng(0)) == doc
    assert victim.query_stats() == QueryLedger(0, 0)


def test_perturb_applies_even_without_improvement(movie_space, movie_lm):
    ctx = PerturbContext(movie_space, movie_lm, constant_victim(0), max_change_fraction=1.0)
    out = perturb(Document.from_tokens(["good"]), 1, ctx, np.random.default_rng(0))
    assert out.tokens == ("great",)


def test_premise_sent_with_every_query(movie_space, movie_lm):
    seen = []

    def fn(pair):
        seen.append(pair[0])
        return [0.5, 0.3, 0.2]

    victim = FunctionVictim(fn, num_classes=3, task="entailment")
    premise = Document.from_tokens(["the", "plot"])
    ctx = PerturbContext(movie_space, movie_lm, victim, max_change_fraction=1.0).with_premise(premise)
    perturb(Document.from_tokens(["good", "movie"]), 2, ctx, np.random.default_rng(0))
    assert seen and all(p == premise.tokens for p in seen)


def test_random_walk_invariants():
    from genattack.synthetic import make_world

    world = make_world()
    lm = train_from_sentences([world.sentiment_document(i % 2) for i in range(300)], 3)
    victim = constant_victim(0)
    ctx = PerturbContext(world.space, lm, victim, max_change_fraction=0.2)
    rng = np.random.default_rng(5)
    for trial in range(30):
        origin = Document.from_tokens(world.sentiment_document(trial % 2))
        doc = origin
        for _ in range(15):
            before = victim.query_stats().total_queries
            frac_before = doc.modified_fraction
            doc = perturb(doc, 1, ctx, rng)
            assert victim.query_stats().total_queries - before <= 1
            assert len(doc) == len(origin)
            assert doc.modified_fraction <= max(0.2, frac_before) + 1e-12
            for i in np.flatnonzero(doc.modified_mask):
                assert origin.tokens[i] not in ctx.stopwords
                a, b = world.space.vocab[origin.tokens[i]], world.space.vocab[doc.tokens[i]]
                assert np.linalg.norm(world.space.vectors[a] - world.space.vectors[b]) <= 0.5
