import random
from fractions import Fraction
from itertools import combinations

import pytest

from hypertile.constructions import build_space_B, complete_graph, near_extremal_instance
from hypertile.errors import (
    BadModulus,
    ClassificationFailed,
    CoverFailed,
    NotFound,
    ParityUnreachable,
)
from hypertile.extremal import (
    RefinedPartition,
    _m2_types,
    allgood_factor,
    balance_and_parity,
    cover_bad,
    extremal_factor,
    find_parity_breakers,
    refine_partition,
)
from hypertile.hypergraph import Uniform3Graph, copy_type, to_mask
from hypertile.solver import Tiling, Verdict, verify_tiling


def with_even_edges(a, b, extra, seed):
    """B[a, b] plus ``extra`` random triples with an even number of vertices in A."""
    G, _ = build_space_B(a, b)
    rng = random.Random(seed)
    even = [t for t in combinations(range(a + b), 3) if sum(v < a for v in t) % 2 == 0]
    return Uniform3Graph(a + b, list(G.edges) + rng.sample(even, extra))


def test_refine_leaves_the_model_alone():
    G, _ = build_space_B(6, 6)
    r = refine_partition(G, range(6), range(6, 12))
    assert r.moved == [] and r.bad == frozenset()
    assert r.A == frozenset(range(6))


def test_refine_moves_a_misplaced_vertex():
    G, _ = build_space_B(7, 5)
    r = refine_partition(G, range(6), range(6, 12))
    assert r.moved == [(6, "B->A")]
    assert r.A1 == frozenset(range(7)) and r.B1 == frozenset(range(7, 12))
    assert r.checks["initial_bad"] == [6]


def test_refine_reports_unclassifiable_vertex():
    G, _ = build_space_B(6, 6)
    H = G.without_edges([e for e in G.edges if 0 in e and max(e) < 6])
    with pytest.raises(ClassificationFailed) as info:
        refine_partition(H, range(6), range(6, 12))
    assert info.value.vertex == 0
    assert info.value.counts["ab"] == 0 and info.value.counts["aa"] == 0


def test_breakers():
    K = complete_graph(12)
    br = find_parity_breakers(K, range(6), range(6, 12))
    assert br.case == "i"
    assert copy_type(br.K, to_mask(range(6))) == (2, 2)
    assert copy_type(br.K2, to_mask(range(6))) == (3, 1)
    br = find_parity_breakers(K, range(6), range(6, 12), prefer=("iii",))
    assert br.case == "iii" and not set(br.K) & set(br.K2)
    with pytest.raises(NotFound):
        find_parity_breakers(build_space_B(6, 6)[0], range(6), range(6, 12))
    with pytest.raises(ValueError):
        find_parity_breakers(K, range(6), range(6, 12), prefer=("iv",))


def test_cover_bad():
    G, _ = build_space_B(6, 6)
    A, B = range(6), range(6, 12)
    T = cover_bad(G, A, B, [0, 6])
    assert {0, 6} <= T.covered
    assert all(copy_type(b, to_mask(A)) == (1, 3) for b in T.blocks)
    assert verify_tiling(G, T)[0]
    assert len(cover_bad(G, A, B, [])) == 0
    with pytest.raises(CoverFailed) as info:
        cover_bad(G, A, B, [0], forbidden=[0])
    assert info.value.vertex == 0
    with pytest.raises(CoverFailed):
        cover_bad(G, A, B, [0, 1, 2], forbidden=range(8, 12))  # three (1,3) copies need 9 B-vertices


def test_m2_type_arithmetic():
    assert _m2_types(0) == []
    assert _m2_types(-4) == [(1, 3), (1, 3)]
    assert _m2_types(8) == [(4, 0), (4, 0)]
    assert _m2_types(2) == [(1, 3), (4, 0)]
    with pytest.raises(ParityUnreachable):
        _m2_types(3)


@pytest.mark.parametrize(
    "a,b,extra,case,m3",
    [(13, 11, 30, "b", 1), (11, 13, 20, "c", 2), (12, 12, 30, "a", 0)],
)
def test_pipeline_residue_cases(a, b, extra, case, m3):
    H = with_even_edges(a, b, extra, 1)
    r = extremal_factor(H)
    assert r.verdict is Verdict.FACTOR and r.stage == "allgood"
    assert r.trace["M3"]["residue_case"] == case
    assert len(r.trace["M3"]["blocks"]) == m3
    a4, b4 = r.trace["parity_ledger"]["after_M4"]
    assert a4 == b4 and a4 % 6 == 0


def test_exposed_bad_vertex_is_recovered():
    H = with_even_edges(13, 11, 30, 1)
    A, B = frozenset(range(13)), frozenset(range(13, 24))
    br = find_parity_breakers(H, A, B)
    assert br.case == "i"
    v = next(u for u in br.K2 if u not in br.K)
    assert v in A
    refined = RefinedPartition(A - {v}, frozenset({v}), B, frozenset(), [])
    res = balance_and_parity(H, refined, Tiling.of(()), br)
    assert res.residue_case == "b" and len(res.M3) == 1
    assert v in res.M4.covered and 0 < len(res.M4) <= 24
    assert res.ledger["after_M4"][0] == res.ledger["after_M4"][1]


def test_parity_unreachable_without_breakers():
    G, _ = build_space_B(13, 11)
    refined = refine_partition(G, range(13), range(13, 24))
    with pytest.raises(ParityUnreachable):
        balance_and_parity(G, refined, Tiling.of(()), None)


def test_allgood_on_space_b():
    for half in (12, 18):
        G, _ = build_space_B(half, half)
        res = allgood_factor(G, range(half), range(half, 2 * half), Fraction(1, 50))
        assert verify_tiling(G, res.tiling, True)[0]
        assert res.M1.covered >= frozenset(range(half, 2 * half))
        assert len(res.M1.covered & frozenset(range(half))) == half // 3
        assert res.all_good
    with pytest.raises(BadModulus):
        allgood_factor(G, range(18), range(18, 30), Fraction(1, 50))


def test_pipeline_examples():
    G, _ = build_space_B(12, 12)
    r = extremal_factor(G)
    assert (r.verdict, r.stage, r.fallback_used) == (Verdict.FACTOR, "allgood", False)
    assert verify_tiling(G, r.tiling, True)[0]
    assert r.to_json()["verdict"] == "Factor"
    H, _ = near_extremal_instance(12, 6, 3)
    assert extremal_factor(H).stage == "allgood"
    with pytest.raises(BadModulus):
        extremal_factor(build_space_B(5, 5)[0])


def test_pipeline_without_fallback_reports_unknown():
    G, _ = build_space_B(13, 11)
    r = extremal_factor(G, fallback=False)
    assert (r.verdict, r.stage, r.tiling) == (Verdict.UNKNOWN, "failed", None)
    assert any("parity" in line for line in r.trace["log"])


def test_pipeline_falls_back_on_unclassifiable_input():
    G, _ = build_space_B(6, 6)
    H = G.without_edges([e for e in G.edges if 0 in e and max(e) < 6])
    r = extremal_factor(H)
    assert r.fallback_used and r.stage == "fallback-whole"
    assert "vertex" in r.trace["refine"]


@pytest.mark.slow
def test_bad_vertex_at_n48():
    G, _ = build_space_B(24, 24)
    x = 47
    keep = lambda e: any(v < 7 for v in e) and any(24 <= v < 36 for v in e)  # noqa: E731
    H = G.without_edges([e for e in G.edges if x in e and not keep(e)])
    r = extremal_factor(H)
    assert (r.verdict, r.stage) == (Verdict.FACTOR, "allgood")
    assert r.trace["refine"]["B2"] == [x]
    assert r.trace["M1"]["size"] == 1 and r.trace["M1"]["within_budget"]
    assert x in r.trace["M1"]["blocks"][0]
