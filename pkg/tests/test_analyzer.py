import random
from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypertile.analyzer import (
    axy_inequality,
    best_balanced_bipartition,
    check_le_bound,
    classify_alpha_good,
    count_copies_by_type,
    good_pairs_triples,
    is_gamma_extremal,
    jsystem_degree_sequence,
    mincut_bipartition,
    missing_from_B,
    typical_triples,
    xxy_density_report,
)
from hypertile.constructions import (
    build_space_B,
    complete_graph,
    disjoint_union,
    random_with_min_codegree,
)
from hypertile.errors import NotAPartition, TooLopsided
from hypertile.hypergraph import Graph2, Uniform3Graph, link_graph, to_mask

import oracles


A4, B4 = range(4), range(4, 8)


def test_missing_from_model_examples():
    G, _ = build_space_B(4, 4)
    assert missing_from_B(G, A4, B4) == 0
    assert missing_from_B(Uniform3Graph(8), A4, B4) == 28
    assert missing_from_B(G.without_edges([(0, 4, 5)]), A4, B4) == 1
    with pytest.raises(NotAPartition):
        missing_from_B(G, range(5), B4)


def test_best_bipartition_finds_the_planted_split():
    G, _ = build_space_B(6, 6)
    split = best_balanced_bipartition(G, "exact")
    assert split.missing_from_B_model == 0
    assert split.A in (frozenset(range(6)), frozenset(range(6, 12)))


def test_exact_never_worse_than_local():
    agree = 0
    for seed in range(20):
        G = random_with_min_codegree(12, 4, 0.5, seed)
        exact = best_balanced_bipartition(G, "exact").missing_from_B_model
        local = best_balanced_bipartition(G, "local", seed=seed).missing_from_B_model
        assert exact <= local
        assert exact == oracles.best_balanced_missing(12, oracles.edge_set(G))
        agree += exact == local
    assert agree >= 18


def test_gamma_extremal_examples_and_monotonicity():
    G, _ = build_space_B(4, 4)
    assert is_gamma_extremal(G, Fraction(1, 20)).verdict
    assert is_gamma_extremal(complete_graph(12), 0).verdict  # odd-triple model is inside K_12
    empty = Uniform3Graph(12)
    verdicts = [is_gamma_extremal(empty, Fraction(k, 200)).verdict for k in range(0, 60, 5)]
    assert verdicts == sorted(verdicts)
    assert is_gamma_extremal(empty, Fraction(1, 20)).to_json()["missing"] == 20 + 6 * 15


def test_alpha_good_classification():
    G, _ = build_space_B(6, 6)
    good, bad = classify_alpha_good(G, range(6), range(6, 12), Fraction(1, 50))
    assert bad == frozenset() and len(good) == 12
    H = G.without_edges([e for e in G.edges if 0 in e])
    # vertex 0 misses all 25 of its model triples, every other vertex at most 10
    good, bad = classify_alpha_good(H, range(6), range(6, 12), Fraction(1, 10))
    assert bad == frozenset({0})


def test_le_bound_examples():
    assert check_le_bound(complete_graph(6)).slack == 0
    assert check_le_bound(Uniform3Graph(6)).no_edges
    G, _ = build_space_B(4, 4)
    assert check_le_bound(G).slack == 1


def test_le_bound_matches_oracle():
    rng = random.Random(7)
    for _ in range(30):
        n = rng.choice([5, 6, 8])
        edges = oracles.random_edges(n, rng.random(), rng)
        G = Uniform3Graph(n, edges)
        U = [v for v in range(n) if rng.random() < 0.7]
        assert check_le_bound(G, U).slack == oracles.le_slack(n, edges, U)
        assert check_le_bound(G).slack is not None or not edges


def test_xxy_report():
    rep = xxy_density_report(complete_graph(10), range(5), range(5, 10), Fraction(1, 20))
    assert (rep["e_XXY"], rep["e_XYY"]) == (50, 50)
    assert rep["XXY_ok"] and rep["XYY_ok"]
    with pytest.raises(TooLopsided):
        xxy_density_report(complete_graph(10), range(1), range(1, 10), Fraction(1, 20))


def test_copy_types_and_axy():
    G, _ = build_space_B(4, 4)
    assert count_copies_by_type(G, to_mask(A4)) == {(4, 0): 1, (1, 3): 16}
    rep = axy_inequality(complete_graph(8), A4, B4, Fraction(1, 20))
    assert rep.hypothesis_failed  # K_8 has 36 (2,2)-copies
    rep = axy_inequality(G, A4, B4, Fraction(1, 20))
    assert rep.hypothesis_ok and rep.holds
    assert rep.lhs == 3 * 0 + 3 * 24


def test_good_pairs():
    rep = good_pairs_triples(Uniform3Graph(10), range(10), Fraction(1, 100))
    assert rep.bad_pair_count == 0 and len(rep.good_triples) == 120
    assert rep.sparse and rep.observation_ok
    rep = good_pairs_triples(complete_graph(10), range(10), Fraction(1, 100))
    assert rep.bad_pair_count == 45 and not rep.sparse


def test_jsystem_sequence():
    assert jsystem_degree_sequence(complete_graph(8)) == (8, 7, 6, 5)
    assert jsystem_degree_sequence(Uniform3Graph(5)) == (5, 4, 0, None)
    assert jsystem_degree_sequence(build_space_B(4, 4)[0])[3] == 1


def test_typicality():
    G, _ = build_space_B(6, 6)
    # Within B the link of two B-vertices in A is all of A, and A-pairs see all of B.
    rep = typical_triples(G, range(6), range(6, 12), Fraction(1, 10))
    assert rep.count == 0
    assert rep.flag_counts()[0] == 0
    K = complete_graph(12)
    counts = [typical_triples(K, range(6), range(6, 12), Fraction(k, 10)).count for k in range(0, 11, 2)]
    assert counts == sorted(counts)
    assert counts[-1] == 90


def test_mincut_examples():
    L = Graph2.from_pairs(12, [p for p in combinations(range(6), 2)] + [p for p in combinations(range(6, 12), 2)])
    rep = mincut_bipartition(L, Fraction(1, 20))
    assert rep.cut == 0 and rep.X == frozenset(range(6))
    K66 = Graph2.from_pairs(12, [(a, b) for a in range(6) for b in range(6, 12)])
    assert mincut_bipartition(K66, Fraction(1, 20)).hypothesis_failed
    with pytest.raises(TooLopsided):
        mincut_bipartition(Graph2.from_pairs(1, []), Fraction(1, 20))


@settings(max_examples=25)
@given(st.integers(0, 2**32), st.integers(4, 9), st.floats(0.2, 0.9))
def test_mincut_matches_enumeration(seed, n, p):
    rng = random.Random(seed)
    pairs = [e for e in combinations(range(n), 2) if rng.random() < p]
    rep = mincut_bipartition(Graph2.from_pairs(n, pairs), Fraction(1, 20))
    assert rep.cut == oracles.min_cut(n, pairs)
    assert rep.X and rep.Y


def test_mincut_on_link_of_space_b():
    G, _ = build_space_B(6, 6)
    L = link_graph(G, 0)
    rep = mincut_bipartition(L, Fraction(1, 20))
    assert rep.cut == oracles.min_cut(L.n, L.edges)
