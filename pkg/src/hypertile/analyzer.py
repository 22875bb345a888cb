"""Bipartition-relative diagnostics for near-extremal 3-graphs.

Thresholds of the form ``k * n**j`` are compared in exact rational arithmetic.
Thresholds involving square roots of a parameter are compared after squaring
both (non-negative) sides, so no float ever decides a verdict.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable

import networkx as nx
import numpy as np

from .errors import ResourceLimit, TooLopsided
from .hypergraph import (
    Bipartition,
    Graph2,
    Uniform3Graph,
    check_partition,
    copy_type,
    edge_census,
    from_mask,
    k4minus_masks,
    link_set_mask,
    min_codegree,
    model_missing,
    model_missing_degrees,
    popcount,
    to_mask,
)

EXACT_SPLIT_LIMIT = 250_000


def _q(x) -> Fraction:
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)


def _le_sqrt(value: int | Fraction, coef: Fraction, param: Fraction, scale: int | Fraction) -> bool:
    """value <= coef * sqrt(param) * scale, decided exactly (coef, scale >= 0)."""
    if value <= 0:
        return True
    return Fraction(value) ** 2 <= coef**2 * param * Fraction(scale) ** 2


# -- gamma-extremality ------------------------------------------------------------


def missing_from_B(G: Uniform3Graph, A: Iterable[int], B: Iterable[int]) -> int:
    """|E(B[A,B]) \\ E(G)|."""
    a_mask, _ = check_partition(G.n, A, B)
    return model_missing(G, a_mask)


def _odd_edge_counts(edges: np.ndarray, splits: np.ndarray) -> np.ndarray:
    """For each row of ``splits`` (0/1 membership in A), count edges meeting A oddly."""
    if edges.shape[0] == 0:
        return np.zeros(splits.shape[0], dtype=np.int64)
    s = splits.astype(np.uint8)
    parity = s[:, edges[:, 0]] ^ s[:, edges[:, 1]] ^ s[:, edges[:, 2]]
    return parity.sum(axis=1, dtype=np.int64)


def _model_size(a: int, b: int) -> int:
    return math.comb(a, 3) + a * math.comb(b, 2)


def best_balanced_bipartition(
    G: Uniform3Graph, mode: str = "auto", seed: int = 0, starts: int = 32
) -> Bipartition:
    """Balanced split (|A| = floor(n/2)) minimising the edges of B[A,B] missing from G.

    ``exact`` enumerates every balanced split (feasible up to n = 20),
    ``local`` runs steepest-descent swaps from ``starts`` seeded random splits,
    ``auto`` picks exact when the enumeration fits.
    """
    n = G.n
    a_size = n // 2
    if mode == "auto":
        mode = "exact" if math.comb(n, a_size) <= EXACT_SPLIT_LIMIT else "local"
    edges = np.array(G.edges, dtype=np.int64).reshape(-1, 3)
    model = _model_size(a_size, n - a_size)
    if mode == "exact":
        total = math.comb(n, a_size)
        if total > EXACT_SPLIT_LIMIT:
            raise ResourceLimit(f"{total} balanced splits exceed the exact limit {EXACT_SPLIT_LIMIT}")
        best_missing, best_A = None, None
        it = combinations(range(n), a_size)
        while True:
            chunk = [c for _, c in zip(range(8192), it)]
            if not chunk:
                break
            splits = np.zeros((len(chunk), n), dtype=np.uint8)
            rows = np.repeat(np.arange(len(chunk)), a_size)
            splits[rows, np.array(chunk, dtype=np.int64).reshape(-1)] = 1
            missing = model - _odd_edge_counts(edges, splits)
            i = int(np.argmin(missing))
            if best_missing is None or missing[i] < best_missing:
                best_missing, best_A = int(missing[i]), chunk[i]
        return Bipartition.of(G, best_A)
    if mode != "local":
        raise ValueError(f"unknown mode {mode!r}")
    rng = random.Random(seed)
    best_missing, best_A = None, None
    for _ in range(starts):
        A = sorted(rng.sample(range(n), a_size))
        current = np.zeros(n, dtype=np.uint8)
        current[A] = 1
        cur_missing = model - int(_odd_edge_counts(edges, current[None, :])[0])
        while True:
            ins = np.flatnonzero(current == 1)
            outs = np.flatnonzero(current == 0)
            if len(ins) == 0 or len(outs) == 0:
                break
            pairs = [(i, o) for i in ins for o in outs]
            cand = np.repeat(current[None, :], len(pairs), axis=0)
            idx = np.arange(len(pairs))
            cand[idx, [p[0] for p in pairs]] = 0
            cand[idx, [p[1] for p in pairs]] = 1
            missing = model - _odd_edge_counts(edges, cand)
            j = int(np.argmin(missing))
            if missing[j] >= cur_missing:
                break
            current = cand[j]
            cur_missing = int(missing[j])
        if best_missing is None or cur_missing < best_missing:
            best_missing, best_A = cur_missing, sorted(np.flatnonzero(current == 1).tolist())
    return Bipartition.of(G, best_A)


@dataclass
class GammaVerdict:
    verdict: bool
    witness: Bipartition
    gamma: Fraction
    bound: Fraction
    mode: str

    def __bool__(self) -> bool:
        return self.verdict

    def to_json(self) -> dict:
        return {
            "gamma": str(self.gamma),
            "verdict": self.verdict,
            "missing": self.witness.missing_from_B_model,
            "A": sorted(self.witness.A),
            "B": sorted(self.witness.B),
            "mode": self.mode,
        }


def is_gamma_extremal(G: Uniform3Graph, gamma, mode: str = "auto", seed: int = 0) -> GammaVerdict:
    gamma = _q(gamma)
    if mode == "auto":
        mode = "exact" if math.comb(G.n, G.n // 2) <= EXACT_SPLIT_LIMIT else "local"
    witness = best_balanced_bipartition(G, mode, seed)
    bound = gamma * G.n**3
    return GammaVerdict(witness.missing_from_B_model <= bound, witness, gamma, bound, mode)


def classify_alpha_good(G: Uniform3Graph, A: Iterable[int], B: Iterable[int], alpha) -> tuple[frozenset[int], frozenset[int]]:
    """Split V into vertices whose B[A,B]-minus-G degree is at most alpha*n^2, and the rest."""
    a_mask, _ = check_partition(G.n, A, B)
    bound = _q(alpha) * G.n**2
    deg = model_missing_degrees(G, a_mask)
    good = frozenset(v for v in range(G.n) if deg[v] <= bound)
    return good, frozenset(range(G.n)) - good


# -- counting inequalities --------------------------------------------------------


@dataclass
class LeSlack:
    slack: int | None  # None when the graph has no edges
    edge: tuple[int, int, int] | None = None

    @property
    def no_edges(self) -> bool:
        return self.slack is None


def check_le_bound(G: Uniform3Graph, U: Iterable[int] | None = None) -> LeSlack:
    """Worst slack of |L(e) & U| >= ceil((deg(xy,U)+deg(yz,U)+deg(xz,U)-|U|)/2) over edges e."""
    u_mask = G.vertex_mask() if U is None else to_mask(U)
    size = popcount(u_mask)
    worst: LeSlack = LeSlack(None)
    for x, y, z in G.edges:
        lhs = popcount(link_set_mask(G, (x, y, z)) & u_mask)
        total = (
            popcount(G.nbr_mask(x, y) & u_mask)
            + popcount(G.nbr_mask(y, z) & u_mask)
            + popcount(G.nbr_mask(x, z) & u_mask)
            - size
        )
        rhs = max(0, -(-total // 2))
        slack = lhs - rhs
        if worst.slack is None or slack < worst.slack:
            worst = LeSlack(slack, (x, y, z))
    return worst


def xxy_density_report(G: Uniform3Graph, X: Iterable[int], Y: Iterable[int], gamma) -> dict:
    X, Y = list(X), list(Y)
    check_partition(G.n, X, Y)
    n = G.n
    if 5 * len(X) < n or 5 * len(Y) < n:
        raise TooLopsided(f"|X|={len(X)}, |Y|={len(Y)} below n/5 for n={n}")
    _, xxy, xyy, _ = edge_census(G, X, Y)
    threshold = _q(gamma) ** 2 * n**3
    return {
        "e_XXY": xxy,
        "e_XYY": xyy,
        "threshold": threshold,
        "XXY_ok": xxy >= threshold,
        "XYY_ok": xyy >= threshold,
    }


def count_copies_by_type(G: Uniform3Graph, a_mask: int) -> dict[tuple[int, int], int]:
    counts: dict[tuple[int, int], int] = {}
    for m in k4minus_masks(G):
        t = copy_type(from_mask(m), a_mask)
        counts[t] = counts.get(t, 0) + 1
    return counts


@dataclass
class AxyReport:
    hypothesis_ok: bool
    copies_22: int
    hypothesis_bound: Fraction
    lhs: int
    rhs: Fraction

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs

    @property
    def hypothesis_failed(self) -> bool:
        return not self.hypothesis_ok


def axy_inequality(G: Uniform3Graph, X: Iterable[int], Y: Iterable[int], beta) -> AxyReport:
    """(|Y|-1)e(XXY) + (|X|-1)e(XYY) <= 2(1+beta) C(|X|,2) C(|Y|,2), with its hypothesis."""
    X, Y = list(X), list(Y)
    x_mask, _ = check_partition(G.n, X, Y)
    beta = _q(beta)
    pairs = math.comb(len(X), 2) * math.comb(len(Y), 2)
    copies_22 = count_copies_by_type(G, x_mask).get((2, 2), 0)
    _, xxy, xyy, _ = edge_census(G, X, Y)
    lhs = (len(Y) - 1) * xxy + (len(X) - 1) * xyy
    return AxyReport(copies_22 <= beta * pairs, copies_22, beta * pairs, lhs, 2 * (1 + beta) * pairs)


@dataclass
class GoodReport:
    good_pairs: frozenset[tuple[int, int]]
    good_triples: frozenset[tuple[int, int, int]]
    bad_pair_count: int
    edges_in_U: int
    sparse: bool  # e(H[U]) < beta n^3
    observation_ok: bool  # bad pairs <= beta^(1/2) n^2 (vacuously true when not sparse)


def good_pairs_triples(G: Uniform3Graph, U: Iterable[int], beta) -> GoodReport:
    """U-good pairs (deg in H[U] at most 3 beta^(1/2) n) and triples made of U-good pairs."""
    U = sorted(set(U))
    beta = _q(beta)
    n = G.n
    u_mask = to_mask(U)
    good = set()
    for x, y in combinations(U, 2):
        if _le_sqrt(popcount(G.nbr_mask(x, y) & u_mask), Fraction(3), beta, n):
            good.add((x, y))
    triples = frozenset(t for t in combinations(U, 3) if (t[0], t[1]) in good and (t[0], t[2]) in good and (t[1], t[2]) in good)
    bad = math.comb(len(U), 2) - len(good)
    e_u = len(G.edges_within(u_mask))
    sparse = e_u < beta * n**3
    observation = (not sparse) or _le_sqrt(bad, Fraction(1), beta, n**2)
    return GoodReport(frozenset(good), triples, bad, e_u, sparse, observation)


def jsystem_degree_sequence(G: Uniform3Graph) -> tuple[int, int, int, int | None]:
    """(n, n-1, min codegree, min over edges of |L(e)|); the last is None without edges."""
    d3 = min((popcount(link_set_mask(G, e)) for e in G.edges), default=None)
    return G.n, max(G.n - 1, 0), min_codegree(G), d3


# -- typicality ---------------------------------------------------------------------


@dataclass
class TypicalityReport:
    rho: Fraction
    flags: dict[tuple[int, int, int], tuple[bool, bool, bool]]

    @property
    def typical(self) -> list[tuple[int, int, int]]:
        return [t for t, f in self.flags.items() if all(f)]

    @property
    def count(self) -> int:
        return sum(1 for f in self.flags.values() if all(f))

    def flag_counts(self) -> tuple[int, int, int]:
        return tuple(sum(1 for f in self.flags.values() if f[i]) for i in range(3))  # type: ignore[return-value]


def typical_triples(G: Uniform3Graph, X: Iterable[int], Y: Iterable[int], rho) -> TypicalityReport:
    """Flags (T1, T2, T3) for every x < x' in X and y in Y."""
    X, Y = sorted(X), sorted(Y)
    x_mask, y_mask = check_partition(G.n, X, Y)
    rho = _q(rho)
    slack = rho * G.n
    flags = {}
    for x, x2 in combinations(X, 2):
        t1 = popcount(G.nbr_mask(x, x2) & y_mask) >= len(Y) - slack
        for y in Y:
            nx_ = G.nbr_mask(x, y) & x_mask
            nx2 = G.nbr_mask(x2, y) & x_mask
            t2 = popcount(nx_ & nx2) <= slack
            t3 = len(X) - slack <= popcount(nx_) + popcount(nx2)
            flags[(x, x2, y)] = (t1, t2, t3)
    return TypicalityReport(rho, flags)


# -- graph min-cut bipartition -------------------------------------------------------


@dataclass
class MinCutReport:
    X: frozenset[int]
    Y: frozenset[int]
    cut: int
    hypotheses_ok: bool
    conclusion_ok: bool | None  # None when the hypotheses fail
    details: dict = field(default_factory=dict)

    @property
    def hypothesis_failed(self) -> bool:
        return not self.hypotheses_ok


def cut_size(L: Graph2, x_mask: int) -> int:
    return sum(1 for u, v in L.edges if (x_mask >> u & 1) != (x_mask >> v & 1))


def mincut_bipartition(L: Graph2, gamma) -> MinCutReport:
    """Bipartition (both sides non-empty) minimising crossing edges, plus the degree verdict.

    The cut is computed exactly: Stoer-Wagner on connected graphs, the
    component of vertex 0 otherwise.
    """
    gamma = _q(gamma)
    n = L.n
    if n < 2:
        raise TooLopsided("a bipartition needs at least two vertices")
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(L.edges)
    if nx.is_connected(g):
        cut, (side0, _) = nx.stoer_wagner(g)
        x_set = frozenset(side0)
        if 0 not in x_set:
            x_set = frozenset(range(n)) - x_set
    else:
        cut = 0
        x_set = frozenset(nx.node_connected_component(g, 0))
    y_set = frozenset(range(n)) - x_set
    degrees = [L.degree(v) for v in range(n)]
    hyp_degree = (Fraction(1, 2) - gamma) * n <= min(degrees) and 5 * max(degrees) <= 3 * n
    worst_sym = 0
    for u, v in L.edges:
        worst_sym = max(worst_sym, popcount(L.adj[u] ^ L.adj[v]))
    hyp_sym = worst_sym <= gamma * n
    hypotheses = hyp_degree and hyp_sym
    x_mask, y_mask = to_mask(x_set), to_mask(y_set)
    min_x = min(popcount(L.adj[v] & x_mask) for v in x_set)
    min_y = min(popcount(L.adj[v] & y_mask) for v in y_set)
    low, high = (Fraction(1, 2) - 5 * gamma) * n, (Fraction(1, 2) + 5 * gamma) * n
    conclusion = min_x >= low and min_y >= low and all(low <= len(s) <= high for s in (x_set, y_set))
    details = {
        "min_degree": min(degrees),
        "max_degree": max(degrees),
        "max_symmetric_difference": worst_sym,
        "min_degree_in_X": min_x,
        "min_degree_in_Y": min_y,
    }
    return MinCutReport(x_set, y_set, int(cut), hypotheses, conclusion if hypotheses else None, details)

