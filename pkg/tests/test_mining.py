import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
import synth
from wikibitext.embeddings import SentenceVector, builtin_fallback_embed
from wikibitext.errors import DegenerateNeighborhoodError, ShapeError
from wikibitext.ingest import SentenceRef
from wikibitext.mining import (CandidatePair, MiningConfig, NeighborSet, intersect_multiway,
                               margin_score, mine_many, mine_pairs, nearest_neighbors, pairs_tsv)


def ref(lang, i, title="T"):
    return SentenceRef(lang, title, i)


def vec(values, r=None):
    return SentenceVector(np.asarray(values, dtype=np.float64), r)


def nset(sims, lang="zz"):
    return NeighborSet(None, tuple((ref(lang, i), s) for i, s in enumerate(sims)))


def as_tuples(pairs):
    return [(p.source_ref, p.target_ref) for p in pairs]


# --- nearest_neighbors -------------------------------------------------------

def test_self_match():
    corpus = [vec([1, 0], ref("es", 0)), vec([0, 1], ref("es", 1))]
    nn = nearest_neighbors(vec([0, 1]), corpus, 1)
    assert nn.neighbors == ((ref("es", 1), 1.0),)


def test_k_larger_than_corpus_returns_everything_descending():
    corpus = [vec([1, 0], ref("es", 0)), vec([0.6, 0.8], ref("es", 1)), vec([0, 1], ref("es", 2))]
    nn = nearest_neighbors(vec([0, 1]), corpus, 10)
    assert [r.index for r, _ in nn.neighbors] == [2, 1, 0]


def test_five_angles_k2():
    angles = [0, 30, 60, 90, 135]
    corpus = [vec([math.cos(math.radians(a)), math.sin(math.radians(a))], ref("es", i))
              for i, a in enumerate(angles)]
    q = [math.cos(math.radians(10)), math.sin(math.radians(10))]
    # by hand: angular gaps 10, 20, 50, 80, 125 degrees -> vectors 0 and 1 win
    nn = nearest_neighbors(vec(q), corpus, 2)
    assert [r.index for r, _ in nn.neighbors] == [0, 1]
    assert nn.similarities == pytest.approx([math.cos(math.radians(10)), math.cos(math.radians(20))])
    brute = oracles.knn(q, [(v.sentence_ref, list(v.values)) for v in corpus], 2)
    assert [r for r, _ in brute] == [r for r, _ in nn.neighbors]


def test_ties_broken_by_reference_order():
    corpus = [vec([1, 0], ref("es", 2, "B")), vec([1, 0], ref("es", 0, "B")),
              vec([1, 0], ref("es", 5, "A"))]
    nn = nearest_neighbors(vec([1, 0]), corpus, 2)
    assert [r for r, _ in nn.neighbors] == [ref("es", 5, "A"), ref("es", 0, "B")]


def test_dimension_mismatch():
    with pytest.raises(ShapeError):
        nearest_neighbors(vec([1, 0, 0]), [vec([1, 0], ref("es", 0))], 1)


# --- margin_score ------------------------------------------------------------

def test_margin_identity_case():
    x = vec([1, 0])
    assert margin_score(x, x, nset([1.0]), nset([1.0]), 1) == 1.0


def test_margin_zero_numerator():
    assert margin_score(vec([1, 0]), vec([0, 1]), nset([0.5]), nset([0.7]), 1) == 0.0


def test_margin_worked_example():
    x, y = vec([1, 0]), vec([0.8, 0.6])
    got = margin_score(x, y, nset([0.8, 0.6]), nset([0.9, 0.8]), 2)
    assert got == pytest.approx(oracles.margin([1, 0], [0.8, 0.6], [0.8, 0.6], [0.8, 0.9], 2), abs=1e-12)
    assert got == pytest.approx(0.8 / 0.775, abs=1e-12)
    assert round(got, 4) == 1.0323


def test_margin_degenerate_denominator():
    with pytest.raises(DegenerateNeighborhoodError):
        margin_score(vec([1, 0]), vec([0, 1]), nset([0.0]), nset([0.0]), 1)


def test_neighbor_set_invariants():
    with pytest.raises(ValueError):
        NeighborSet(None, ((ref("es", 0), 0.5), (ref("es", 1), 0.9)))
    with pytest.raises(ValueError):
        NeighborSet(None, ((ref("es", 0), 0.9), (ref("es", 0), 0.5)))


def test_config_validation():
    MiningConfig(margin_threshold=0)
    with pytest.raises(ValueError):
        MiningConfig(k=0)
    with pytest.raises(ValueError):
        MiningConfig(margin_threshold=-1)
    with pytest.raises(ValueError):
        MiningConfig(retrieval_strategy="best")


# --- mine_pairs ----------------------------------------------------------------

def random_unit(rng, n, d, lang):
    # positive orthant keeps neighbourhood averages away from zero
    m = np.abs(rng.normal(size=(n, d)))
    m /= np.linalg.norm(m, axis=1, keepdims=True)
    return [vec(row, ref(lang, i)) for i, row in enumerate(m)]


def relabel(vectors, lang):
    return [vec(v.values, ref(lang, v.sentence_ref.index, v.sentence_ref.title)) for v in vectors]


def test_planted_identity():
    src = random_unit(np.random.default_rng(3), 12, 16, "en")
    tgt = relabel(src, "es")
    pairs = mine_pairs(src, tgt, MiningConfig(margin_threshold=1.0))
    assert sorted((p.source_ref.index, p.target_ref.index) for p in pairs) == [(i, i) for i in range(12)]


def test_threshold_above_everything_yields_nothing():
    src = random_unit(np.random.default_rng(4), 8, 8, "en")
    tgt = random_unit(np.random.default_rng(5), 8, 8, "es")
    top = max(p.margin for p in mine_pairs(src, tgt, MiningConfig(margin_threshold=0)))
    assert mine_pairs(src, tgt, MiningConfig(margin_threshold=top + 1e-9)) == []


def fallback_fixture(seed, n_planted=7, n_random=3, dim=256):
    rng = random.Random(seed)
    vocab = synth.vocabulary(rng)
    src_text = [synth.sentence(rng, vocab) for _ in range(n_planted)]
    tgt_text = [synth.perturb(rng, s, vocab) for s in src_text]
    src_text += [synth.sentence(rng, vocab) for _ in range(n_random)]
    tgt_text += [synth.sentence(rng, vocab) for _ in range(n_random)]
    src = [builtin_fallback_embed(t, dim, ref("en", i)) for i, t in enumerate(src_text)]
    tgt = [builtin_fallback_embed(t, dim, ref("es", i)) for i, t in enumerate(tgt_text)]
    return src, tgt


def test_ten_by_ten_fallback_against_exhaustive_oracle():
    src, tgt = fallback_fixture(seed=11)
    config = MiningConfig()
    pairs = mine_pairs(src, tgt, config)
    expected, table = oracles.mine_max([(v.sentence_ref, list(v.values)) for v in src],
                                       [(v.sentence_ref, list(v.values)) for v in tgt],
                                       config.k, config.margin_threshold)
    assert len(table) == 100
    assert as_tuples(pairs) == [(s, t) for s, t, _, _ in expected]
    for p, (_, _, m, c) in zip(pairs, expected):
        assert p.margin == pytest.approx(m, abs=1e-9)
        assert p.cosine == pytest.approx(c, abs=1e-9)
    assert sorted((s.index, t.index) for s, t in as_tuples(pairs)) == [(i, i) for i in range(7)]


@pytest.mark.parametrize("strategy", ["max", "forward", "backward", "intersection"])
def test_strategies_are_one_to_one_and_sorted(strategy):
    src = random_unit(np.random.default_rng(8), 30, 6, "en")
    tgt = random_unit(np.random.default_rng(9), 25, 6, "es")
    pairs = mine_pairs(src, tgt, MiningConfig(margin_threshold=0.5, retrieval_strategy=strategy))
    assert len({p.source_ref for p in pairs}) == len(pairs) == len({p.target_ref for p in pairs})
    keys = [(-p.margin, p.source_ref, p.target_ref) for p in pairs]
    assert keys == sorted(keys)


def test_intersection_is_subset_of_max():
    src = random_unit(np.random.default_rng(1), 30, 6, "en")
    tgt = random_unit(np.random.default_rng(2), 30, 6, "es")
    inter = set(as_tuples(mine_pairs(src, tgt, MiningConfig(1, 0.5, "intersection"))))
    fwd = set(as_tuples(mine_pairs(src, tgt, MiningConfig(1, 0.5, "forward"))))
    assert inter <= fwd


unit_sets = st.tuples(st.integers(1, 12), st.integers(1, 12), st.integers(2, 6),
                      st.integers(0, 2**32 - 1))


@settings(max_examples=60, deadline=None)
@given(unit_sets, st.floats(0.5, 1.3), st.floats(0.0, 0.3))
def test_monotone_in_threshold(shape, lo, extra):
    n, m, d, seed = shape
    rng = np.random.default_rng(seed)
    src, tgt = random_unit(rng, n, d, "en"), random_unit(rng, m, d, "es")
    loose = set(as_tuples(mine_pairs(src, tgt, MiningConfig(margin_threshold=lo))))
    strict = set(as_tuples(mine_pairs(src, tgt, MiningConfig(margin_threshold=lo + extra))))
    assert strict <= loose


@settings(max_examples=60, deadline=None)
@given(unit_sets, st.floats(0.01, 100.0))
def test_scale_invariance(shape, scale):
    from wikibitext.embeddings import unit_normalize
    n, m, d, seed = shape
    rng = np.random.default_rng(seed)
    raw_s, raw_t = rng.random(size=(n, d)), rng.random(size=(m, d))

    def vectors(raw, lang):
        return [vec(row, ref(lang, i)) for i, row in enumerate(unit_normalize(raw))]

    a = mine_pairs(vectors(raw_s, "en"), vectors(raw_t, "es"), MiningConfig(margin_threshold=0.9))
    b = mine_pairs(vectors(raw_s * scale, "en"), vectors(raw_t * scale, "es"),
                   MiningConfig(margin_threshold=0.9))
    assert as_tuples(a) == as_tuples(b)
    assert [p.margin for p in a] == pytest.approx([p.margin for p in b], abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(unit_sets)
def test_matches_exhaustive_oracle(shape):
    n, m, d, seed = shape
    rng = np.random.default_rng(seed)
    src, tgt = random_unit(rng, n, d, "en"), random_unit(rng, m, d, "es")
    got = mine_pairs(src, tgt, MiningConfig(margin_threshold=0.8))
    want, _ = oracles.mine_max([(v.sentence_ref, list(v.values)) for v in src],
                               [(v.sentence_ref, list(v.values)) for v in tgt], 4, 0.8)
    # near-equal margins could order differently under float noise; compare as sets
    assert set(as_tuples(got)) == {(s, t) for s, t, _, _ in want}


def test_worker_count_does_not_change_output():
    rng = np.random.default_rng(21)
    jobs = [(f"doc{i}", random_unit(rng, 9, 5, "en"), random_unit(rng, 7, 5, "es")) for i in range(12)]
    jobs.append(("empty", [], random_unit(rng, 3, 5, "es")))
    serial = mine_many(jobs, MiningConfig(margin_threshold=0.9), workers=1)
    parallel = mine_many(jobs, MiningConfig(margin_threshold=0.9), workers=4)
    assert [k for k, _ in serial] == [job[0] for job in jobs]
    assert [(k, pairs_tsv(p)) for k, p in serial] == [(k, pairs_tsv(p)) for k, p in parallel]


def test_pairs_tsv_format():
    p = CandidatePair(ref("en", 3, "Aurelia Arkotxa"), ref("es", 1, "Aurelia Arkotxa"), 1.25, 0.5)
    assert pairs_tsv([p]) == "1.250000\t0.500000\ten|Aurelia Arkotxa|3\tes|Aurelia Arkotxa|1\n"


# --- intersect_multiway -------------------------------------------------------------

def cp(s, t, m=1.1):
    return CandidatePair(s, t, m, 0.9)


def test_single_language_is_identity_lift():
    pairs = [cp(ref("en", 1), ref("es", 4)), cp(ref("en", 0), ref("es", 2))]
    tuples = intersect_multiway({"es": pairs})
    assert [(t.pivot_ref, t.per_language["es"][0]) for t in tuples] == [
        (ref("en", 0), ref("es", 2)), (ref("en", 1), ref("es", 4))]


def test_two_language_intersection():
    e1, e2, e3 = ref("en", 1), ref("en", 2), ref("en", 3)
    s1, s2, c1, c3 = ref("es", 1), ref("es", 2), ref("ca", 1), ref("ca", 3)
    tuples = intersect_multiway({"es": [cp(e1, s1), cp(e2, s2)], "ca": [cp(e1, c1), cp(e3, c3)]})
    assert len(tuples) == 1
    assert tuples[0].pivot_ref == e1
    assert {lang: r for lang, (r, _) in tuples[0].per_language.items()} == {"es": s1, "ca": c1}


def test_planted_coverage_twenty_twelve_nine():
    pivots = [ref("en", i) for i in range(20)]
    es_cov, ca_cov = set(range(12)), set(range(9))
    es = [cp(pivots[i], ref("es", 100 + i)) for i in sorted(es_cov)]
    ca = [cp(pivots[i], ref("ca", 200 + i)) for i in sorted(ca_cov)]
    tuples = intersect_multiway({"es": es, "ca": ca})
    assert [t.pivot_ref.index for t in tuples] == sorted(es_cov & ca_cov)
    assert len(tuples) == 9 <= min(len(es), len(ca))
    assert all(set(t.languages()) == {"es", "ca"} for t in tuples)
