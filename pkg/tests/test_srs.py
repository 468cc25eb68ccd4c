import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oocstance.entitymatch import EntitySet, build_frequency_index
from oocstance.srs import SrsConfig, g_weight, srs_score, srs_vector, zeta

from oracles import srs_bruteforce

ALPHABET = [
    "paris", "tokyo", "nairobi", "lima", "oslo", "cairo",
    "boeing", "fifa", "unicef", "danube", "havana", "siemens",
]


def es(*xs):
    return EntitySet(tuple(xs))


@pytest.mark.parametrize(
    "rank,a,b,expected",
    [(1, 0, 2, math.exp(-1)), (2, 0, 2, math.exp(-math.sqrt(2))), (1, 1, 1, 1 / (1 + math.e))],
)
def test_g_weight(rank, a, b, expected):
    assert g_weight(rank, a, b) == pytest.approx(expected, abs=1e-12)


def test_g_weight_values_to_six_places():
    assert round(g_weight(1), 6) == 0.367879
    assert round(g_weight(2), 6) == 0.243117
    assert round(g_weight(1, 1, 1), 6) == 0.268941


@given(st.integers(1, 200), st.sampled_from([0, 1, 2, 4, 8]), st.sampled_from([1, 2]))
def test_g_strictly_decreasing(rank, a, b):
    assert g_weight(rank + 1, a, b) < g_weight(rank, a, b)


def test_zeta():
    assert zeta(0, "binarization", 1) == 1
    assert zeta(3, "binarization", 1) == 2
    assert zeta(2, "proportion", 1) == 3
    assert zeta(0, "proportion", 0.5) == 0.5


def test_config_validation():
    with pytest.raises(ValueError):
        SrsConfig(zeta_scale=0)
    with pytest.raises(ValueError):
        SrsConfig(zeta_mode="linear")
    with pytest.raises(ValueError):
        SrsConfig(variant="nope")


def test_worked_example_single_shared():
    idx = build_frequency_index([es("paris")])
    assert srs_score(es("paris"), es("paris"), idx).value == 1.0


DOCS3 = [es("paris", "tokyo"), es("tokyo"), es("tokyo", "lima")]


def test_worked_example_three_docs():
    idx = build_frequency_index(DOCS3)
    s = srs_score(DOCS3[0], es("paris"), idx)
    assert s.value == pytest.approx(1 - math.exp(-1) / 2, abs=1e-12)
    assert round(s.value, 5) == 0.81606
    assert s.shared_count == 1 and s.zeta == 2
    assert [(t.entity, t.rank) for t in s.conflict_terms] == [("tokyo", 1)]


def test_worked_example_two_conflicts():
    docs = [es("tokyo", "lima"), es("tokyo", "lima")]
    idx = build_frequency_index(docs)
    s = srs_score(docs[0], es("paris"), idx)
    assert round(s.value, 5) == -0.61100
    assert s.value == pytest.approx(-(math.exp(-1) + math.exp(-math.sqrt(2))), abs=1e-12)


def test_srs_vector_three_docs():
    # lima appears in one doc only (count 1 < tau = 2) so it adds no penalty
    v = srs_vector(DOCS3, es("paris"))
    expected = [srs_bruteforce([list(d) for d in DOCS3], {"paris"}, i) for i in range(3)]
    np.testing.assert_allclose(v, expected, atol=1e-12)
    np.testing.assert_allclose(v, [0.81606, -0.36788, -0.36788], atol=1e-5)


def test_srs_vector_degenerate():
    assert srs_vector([], es("paris")) == []
    assert srs_vector([es("paris")], es("paris")) == [1.0]
    assert srs_vector([es(), es()], es("paris")) == [0.0, 0.0]


def test_binary_nei():
    cfg = SrsConfig(variant="binary_nei")
    assert srs_vector(DOCS3, es("paris"), cfg) == [1.0, 0.0, 0.0]


def test_variants():
    idx = build_frequency_index(DOCS3)
    cap = es("paris")
    doc = DOCS3[0]
    g1 = math.exp(-1)
    assert srs_score(doc, cap, idx, SrsConfig(variant="positive_only")).value == 1.0
    assert srs_score(doc, cap, idx, SrsConfig(variant="negative_fixed_one")).value == pytest.approx(0.5)
    assert srs_score(doc, cap, idx, SrsConfig(variant="g_fixed_half")).value == pytest.approx(0.75)
    assert srs_score(DOCS3[1], cap, idx, SrsConfig(variant="zeta_fixed_two")).value == pytest.approx(-g1 / 2)
    assert srs_score(doc, cap, idx, SrsConfig(zeta_mode="proportion", zeta_scale=0.5)).value == pytest.approx(
        1 - g1 / 1.0
    )


def test_score_recomputable():
    idx = build_frequency_index(DOCS3)
    for v in ("full", "g_fixed_half", "zeta_fixed_two"):
        s = srs_score(DOCS3[0], es("paris"), idx, SrsConfig(variant=v))
        assert s.value == pytest.approx(s.shared_count - sum(t.weight for t in s.conflict_terms) / s.zeta)


doc_lists = st.lists(
    st.lists(st.sampled_from(ALPHABET), max_size=6, unique=True), min_size=1, max_size=8
)
captions = st.lists(st.sampled_from(ALPHABET), max_size=4, unique=True)


@settings(max_examples=200)
@given(doc_lists, captions, st.sampled_from(["binarization", "proportion"]), st.sampled_from([0.25, 1, 4]))
def test_oracle_equivalence(docs, cap, mode, scale):
    cfg = SrsConfig(zeta_mode=mode, zeta_scale=scale)
    got = srs_vector([EntitySet(tuple(d)) for d in docs], EntitySet(tuple(cap)), cfg)
    want = [srs_bruteforce(docs, set(cap), i, zeta_mode=mode, scale=scale) for i in range(len(docs))]
    np.testing.assert_allclose(got, want, atol=1e-12, rtol=0)


@given(doc_lists, captions)
def test_binary_nei_indicator(docs, cap):
    got = srs_vector([EntitySet(tuple(d)) for d in docs], EntitySet(tuple(cap)), SrsConfig(variant="binary_nei"))
    assert got == [1.0 if set(d) & set(cap) else 0.0 for d in docs]


@given(doc_lists, captions, st.data())
def test_monotone_in_shared(docs, cap, data):
    sets = [EntitySet(tuple(d)) for d in docs]
    idx = build_frequency_index(sets)
    i = data.draw(st.integers(0, len(docs) - 1))
    missing = [c for c in cap if c not in docs[i]]
    if not missing:
        return
    capset = EntitySet(tuple(cap))
    before = srs_score(sets[i], capset, idx).value
    after = srs_score(EntitySet(tuple(docs[i]) + (missing[0],)), capset, idx).value
    assert after >= before - 1e-12


@given(doc_lists, captions, st.data())
def test_conflict_monotone(docs, cap, data):
    sets = [EntitySet(tuple(d)) for d in docs]
    idx = build_frequency_index(sets)
    i = data.draw(st.integers(0, len(docs) - 1))
    from oocstance.srs import tau_for

    tau = tau_for(idx)
    extra = [e.entity for e in idx.entries if e.count >= tau and e.entity not in cap and e.entity not in docs[i]]
    if not extra:
        return
    capset = EntitySet(tuple(cap))
    before = srs_score(sets[i], capset, idx).value
    after = srs_score(EntitySet(tuple(docs[i]) + (extra[0],)), capset, idx).value
    assert after <= before + 1e-12
