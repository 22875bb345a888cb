import math
import random
from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypertile.absorbing import (
    AbsorbingSet,
    CopyIndex,
    absorb,
    bridges,
    build_absorbing_set,
    close_neighborhood,
    closed_partition,
    compose_bridge,
    connector_lower_bound,
    connectors,
    is_close,
)
from hypertile.constructions import build_space_B, complete_graph, random_with_min_codegree
from hypertile.errors import (
    AbsorbFailed,
    BadModulus,
    NotAConnector,
    NotClosed,
    OverlapError,
    SameVertex,
)
from hypertile.hypergraph import Uniform3Graph
from hypertile.params import DeskParams
from hypertile.solver import verify_tiling

import oracles


def test_length_one_counts():
    assert connectors(complete_graph(8), 0, 1).total == math.comb(6, 3)
    G, _ = build_space_B(4, 4)
    res = connectors(G, 0, 1)
    assert res.exact and res.method == "exact"
    assert res.total == 4 == oracles.connector_count(8, oracles.edge_set(G), 0, 1)
    assert all(k.verify(G) for k in res.connectors)
    assert connectors(G, 4, 5).total == 4
    with pytest.raises(SameVertex):
        connectors(G, 2, 2)


@settings(max_examples=30)
@given(st.integers(0, 2**32), st.sampled_from([6, 8, 10]), st.floats(0.3, 0.9))
def test_length_one_matches_oracle(seed, n, p):
    rng = random.Random(seed)
    edges = oracles.random_edges(n, p, rng)
    G = Uniform3Graph(n, edges)
    x, y = rng.sample(range(n), 2)
    assert connectors(G, x, y).total == oracles.connector_count(n, edges, x, y)


def test_length_two_exhaustive_matches_oracle():
    G, _ = build_space_B(5, 5)
    edges = oracles.edge_set(G)
    res = connectors(G, 0, 1, c=2)
    assert res.exact and res.method == "exhaustive"
    assert res.total == oracles.connector_count(10, edges, 0, 1, 2)
    assert all(k.verify(G) for k in res.connectors)
    assert connectors(build_space_B(4, 4)[0], 0, 1, c=2).total == 0  # a 7-set does not fit


@pytest.mark.parametrize("a,b", [(4, 4), (6, 6), (5, 7)])
def test_no_connectors_across_the_parity_split(a, b):
    G, _ = build_space_B(a, b)
    for x in range(a):
        for y in range(a, a + b):
            assert connectors(G, x, y).total == 0


def test_lower_bound_monotone_in_length():
    G = random_with_min_codegree(16, 7, 0.6, 3)
    index = CopyIndex(G)
    one = connector_lower_bound(G, 0, 1, 1, index=index)
    two = connector_lower_bound(G, 0, 1, 2, index=index)
    assert two >= one // math.comb(7, 4)
    assert is_close(G, 0, 1, 1, max(one, 1)) == (one >= 1)
    with pytest.raises(ValueError):
        is_close(G, 0, 1, 1, 0)


def test_closed_partitions():
    K8 = complete_graph(8)
    part = closed_partition(K8)
    assert part.d == 1 and part.classes == [frozenset(range(8))]
    G, _ = build_space_B(6, 6)
    part = closed_partition(G)
    assert part.d == 2
    assert sorted(map(sorted, part.classes)) == [list(range(6)), list(range(6, 12))]
    assert part.cross_max == 0 and min(part.within_min) >= part.tau
    assert close_neighborhood(G, 0, 1, part.tau) == frozenset(range(1, 6))
    assert part.to_json()["d"] == 2


def test_bridges():
    assert bridges(complete_graph(8), [0, 1], [2, 3]).total == 4 * math.comb(6, 3)
    G, _ = build_space_B(4, 4)
    assert bridges(G, range(4), range(4, 8)).total == 0
    assert bridges(G, [0, 1], [2, 3]).total == 16
    with pytest.raises(OverlapError):
        bridges(G, [0, 1], [1, 2])


def _three_connectors(G, F, F2, index):
    out, used = [], set(F) | set(F2)
    for a, b in zip(sorted(F)[:3], sorted(F2)[:3]):
        for t in index.triples(a, b):
            S = {v for v in range(G.n) if t >> v & 1}
            if not S & used:
                out.append(connectors(G, a, b, cap=10**6, index=index).connectors)
                out[-1] = [k for k in out[-1] if k.S == frozenset(S)][0]
                used |= S
                break
        else:
            return None
    return out


def test_compose_bridge_in_complete_graph():
    G = complete_graph(20)
    index = CopyIndex(G)
    F, F2 = (0, 1, 2, 3), (4, 5, 6, 7)
    S1, S2, S3 = _three_connectors(G, F, F2, index)
    con = compose_bridge(G, F, F2, S1, S2, S3)
    assert (con.x, con.y, con.c) == (3, 7, 4)
    assert len(con.S) == 15 and con.verify(G)
    with pytest.raises(OverlapError):
        compose_bridge(G, F, F, S1, S2, S3)
    with pytest.raises(NotAConnector):
        compose_bridge(G, F, F2, S1, S2.__class__(S2.x, S2.y, 2, S2.S, S2.factor_x, S2.factor_y), S3)


def test_compose_bridge_on_random_instance():
    for seed in range(10):
        G = random_with_min_codegree(24, 11, 0.7, seed)
        index = CopyIndex(G)
        for F in index.copies[:5]:
            fv = [v for v in range(24) if F >> v & 1]
            for F2 in index.copies:
                if F2 & F:
                    continue
                f2v = [v for v in range(24) if F2 >> v & 1]
                parts = _three_connectors(G, fv, f2v, index)
                if parts:
                    con = compose_bridge(G, fv, f2v, *parts)
                    assert con.c == 4 and con.verify(G)
                    return
    pytest.fail("no composable configuration found")


def test_builder_on_complete_graph_absorbs_everything():
    G = complete_graph(16)
    A = build_absorbing_set(G)
    assert len(A.W) <= A.budget
    free = [v for v in range(16) if v not in A.W]
    for U in combinations(free, 4):
        T = absorb(G, A, U)
        assert verify_tiling(G, T, True, A.W | set(U))[0]


def test_builder_refuses_unclosed_graphs():
    with pytest.raises(NotClosed):
        build_absorbing_set(build_space_B(6, 6)[0])
    with pytest.raises(NotClosed):
        build_absorbing_set(Uniform3Graph(12))


def test_builder_on_dense_random_graph():
    G = random_with_min_codegree(16, 9, 0.7, 1)
    params = DeskParams(epsilon=Fraction(1, 2))
    A = build_absorbing_set(G, params)
    assert isinstance(A, AbsorbingSet) and len(A.W) <= A.budget
    assert verify_tiling(G, A.factor, True, A.W)[0]
    assert A.to_json()["size"] == len(A.W)


def test_absorb_errors_and_empty_set():
    G = complete_graph(12)
    A = build_absorbing_set(G)
    assert verify_tiling(G, absorb(G, A, []), True, A.W)[0]
    free = [v for v in range(12) if v not in A.W]
    with pytest.raises(BadModulus):
        absorb(G, A, free[:3])
    if A.W:
        with pytest.raises(OverlapError):
            absorb(G, A, [min(A.W)] + free[:3])
    G2, _ = build_space_B(4, 4)
    with pytest.raises(AbsorbFailed):
        absorb(G2, [], [0, 1, 4, 5])
    with pytest.raises(OverlapError):
        absorb(G2, [0], [0, 1, 2, 3])
