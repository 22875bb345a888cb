"""Constructive K4^- factors for 3-graphs close to the space construction B[A,B].

The pipeline refines a near-optimal bipartition, picks two parity-breaking
copies, covers bad vertices, balances the two sides, fixes their residue
mod 6 and finishes with the all-good matching argument. Wherever the
asymptotic slack runs out at desk scale, the exact solver takes over on the
residual vertex set and the trace records it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import networkx as nx

from .analyzer import is_gamma_extremal
from .errors import (
    BadModulus,
    ClassificationFailed,
    CoverFailed,
    InvariantViolation,
    MatchingFailed,
    NotFound,
    ParityUnreachable,
)
from .hypergraph import (
    Uniform3Graph,
    check_partition,
    copy_type,
    from_mask,
    k4minus_masks,
    model_missing_degrees,
    popcount,
    spans_k4minus,
    to_mask,
)
from .params import DeskParams
from .solver import FactorOracle, RGraph, Tiling, Verdict, default_budget, perfect_matching_rgraph, verify_tiling

SEARCH_BUDGET = 200_000

AB, AA, BB = "ab", "aa", "bb"


def _pair_counts(G: Uniform3Graph, x: int, a_mask: int, b_mask: int) -> dict[str, int]:
    """Pairs {u, w} with uwx an edge, split by how many of u, w lie in A."""
    counts = {AB: 0, AA: 0, BB: 0}
    others = (a_mask | b_mask) & ~(1 << x)
    for u in from_mask(others):
        nbrs = G.nbr_mask(x, u) & others
        if a_mask >> u & 1:
            counts[AA] += popcount(nbrs & a_mask & ~((1 << (u + 1)) - 1))
            counts[AB] += popcount(nbrs & b_mask)
        else:
            counts[BB] += popcount(nbrs & b_mask & ~((1 << (u + 1)) - 1))
    return counts


# -- partition refinement ------------------------------------------------------------


@dataclass
class RefinedPartition:
    A1: frozenset[int]
    A2: frozenset[int]
    B1: frozenset[int]
    B2: frozenset[int]
    moved: list[tuple[int, str]]
    checks: dict = field(default_factory=dict)

    @property
    def A(self) -> frozenset[int]:
        return self.A1 | self.A2

    @property
    def B(self) -> frozenset[int]:
        return self.B1 | self.B2

    @property
    def bad(self) -> frozenset[int]:
        return self.A2 | self.B2

    def to_json(self) -> dict:
        return {
            "A1": sorted(self.A1),
            "A2": sorted(self.A2),
            "B1": sorted(self.B1),
            "B2": sorted(self.B2),
            "moved": [[v, d] for v, d in self.moved],
            "checks": self.checks,
        }


def refine_partition(G: Uniform3Graph, A: Iterable[int], B: Iterable[int], params: DeskParams | None = None) -> RefinedPartition:
    """Relocate acceptable bad vertices, then split each side into good and bad.

    Bad means missing more than gamma1 * n^2 model edges. A bad vertex is
    B-acceptable with at least n^2/40 (A, B) link pairs; otherwise it must
    have at least floor(3/4 C(k, 2)) link pairs inside each side, or the
    classification fails. After the moves, A1/B1 are the gamma2-good vertices
    and the remaining vertices are checked against the 2/3 C(k, 2) and n^2/50
    pair thresholds (recorded, not enforced).
    """
    params = params or DeskParams()
    g1, g2, _ = params.gamma_chain
    n = G.n
    a_mask, b_mask = check_partition(n, A, B)
    missing = model_missing_degrees(G, a_mask)
    bad = [v for v in range(n) if missing[v] > g1 * n * n]
    moved: list[tuple[int, str]] = []
    new_a = a_mask
    for x in bad:
        counts = _pair_counts(G, x, a_mask, b_mask)
        if counts[AB] >= Fraction(n * n, 40):
            if a_mask >> x & 1:
                new_a &= ~(1 << x)
                moved.append((x, "A->B"))
            continue
        a_size = popcount(a_mask & ~(1 << x))
        b_size = popcount(b_mask & ~(1 << x))
        need_aa = math.floor(Fraction(3, 4) * math.comb(a_size, 2))
        need_bb = math.floor(Fraction(3, 4) * math.comb(b_size, 2))
        if counts[AA] < need_aa or counts[BB] < need_bb:
            raise ClassificationFailed(
                f"bad vertex {x} is neither B- nor A-acceptable",
                vertex=x,
                counts={**counts, "need_ab": str(Fraction(n * n, 40)), "need_aa": need_aa, "need_bb": need_bb},
            )
        if b_mask >> x & 1:
            new_a |= 1 << x
            moved.append((x, "B->A"))
    new_b = G.vertex_mask() & ~new_a
    missing = model_missing_degrees(G, new_a)
    A1, A2, B1, B2 = set(), set(), set(), set()
    for v in range(n):
        good = missing[v] <= g2 * n * n
        if new_a >> v & 1:
            (A1 if good else A2).add(v)
        else:
            (B1 if good else B2).add(v)
    a_size, b_size = popcount(new_a), popcount(new_b)
    alpha3 = {}
    for x in sorted(A2):
        c = _pair_counts(G, x, new_a, new_b)
        alpha3[x] = c[AA] >= Fraction(2, 3) * math.comb(a_size - 1, 2) and c[BB] >= Fraction(2, 3) * math.comb(b_size, 2)
    beta3 = {x: _pair_counts(G, x, new_a, new_b)[AB] >= Fraction(n * n, 50) for x in sorted(B2)}
    checks = {
        "gamma1": str(g1),
        "gamma2": str(g2),
        "initial_bad": bad,
        "bad_budget": str(g1 * n),
        "alpha1": len(A2) <= g1 * n,
        "beta1": len(B2) <= g1 * n,
        "alpha3": all(alpha3.values()),
        "beta3": all(beta3.values()),
    }
    return RefinedPartition(frozenset(A1), frozenset(A2), frozenset(B1), frozenset(B2), moved, checks)


# -- parity breakers ------------------------------------------------------------------


@dataclass(frozen=True)
class ParityBreakers:
    K: tuple[int, ...]
    K2: tuple[int, ...]
    case: str

    def to_json(self) -> dict:
        return {"K": list(self.K), "K2": list(self.K2), "case": self.case}


def _typed_copies(G: Uniform3Graph, a_mask: int, within: int | None = None) -> dict[tuple[int, int], list[int]]:
    out: dict[tuple[int, int], list[int]] = {}
    for k in k4minus_masks(G, within=within):
        out.setdefault(copy_type(from_mask(k), a_mask), []).append(k)
    return out


def find_parity_breakers(
    G: Uniform3Graph,
    A: Iterable[int],
    B: Iterable[int],
    prefer: Sequence[str] = ("i", "ii", "iii"),
    bad: Iterable[int] = (),
) -> ParityBreakers:
    """Two K4^- copies matching one of the three breaker cases, tried in ``prefer`` order.

    Case i: a (2,2) copy and a (3,1) copy, possibly overlapping. Case ii:
    two disjoint (3,1) copies. Case iii: two disjoint (2,2) copies. Among
    pairs of the first available case, fewest bad vertices wins, then the
    lexicographically smallest pair.
    """
    a_mask, _ = check_partition(G.n, A, B)
    bad_mask = to_mask(bad)
    typed = _typed_copies(G, a_mask)
    t22, t31 = typed.get((2, 2), []), typed.get((3, 1), [])

    def key(pair):
        k, k2 = pair
        return (popcount((k | k2) & bad_mask), from_mask(k), from_mask(k2))

    for case in prefer:
        if case == "i":
            pairs = [(k, k2) for k in t22 for k2 in t31]
        elif case == "ii":
            pairs = [(k, k2) for k, k2 in combinations(t31, 2) if not k & k2]
        elif case == "iii":
            pairs = [(k, k2) for k, k2 in combinations(t22, 2) if not k & k2]
        else:
            raise ValueError(f"unknown breaker case {case!r}")
        if pairs:
            k, k2 = min(pairs, key=key)
            return ParityBreakers(tuple(from_mask(k)), tuple(from_mask(k2)), case)
    raise NotFound(f"no parity-breaking pair: {len(t22)} copies of type (2,2), {len(t31)} of type (3,1)")


# -- disjoint copy search ----------------------------------------------------------------


class _Exhausted(Exception):
    pass


def _pick_disjoint(slots: Sequence[Sequence[int]], avoid: int, budget: int = SEARCH_BUDGET) -> list[int] | None:
    """One copy per slot, pairwise disjoint and disjoint from ``avoid``; None if impossible."""
    nodes = 0
    chosen: list[int] = []

    def go(i: int, used: int) -> bool:
        nonlocal nodes
        if i == len(slots):
            return True
        for k in slots[i]:
            if k & used:
                continue
            nodes += 1
            if nodes > budget:
                raise _Exhausted
            chosen.append(k)
            if go(i + 1, used | k):
                return True
            chosen.pop()
        return False

    try:
        return list(chosen) if go(0, avoid) else None
    except _Exhausted:
        return None


def cover_bad(
    G: Uniform3Graph,
    A: Iterable[int],
    B: Iterable[int],
    bad: Iterable[int],
    forbidden: Iterable[int] = (),
    budget: int = SEARCH_BUDGET,
) -> Tiling:
    """Vertex-disjoint (1,3) copies covering every bad vertex and avoiding ``forbidden``.

    Depth-first search over the lowest uncovered bad vertex, so a greedy
    choice that strands a later vertex is undone.
    """
    a_mask, _ = check_partition(G.n, A, B)
    bad_mask = to_mask(bad)
    forbidden_mask = to_mask(forbidden)
    if bad_mask & forbidden_mask:
        raise CoverFailed(f"bad vertex {from_mask(bad_mask & forbidden_mask)[0]} is forbidden", from_mask(bad_mask & forbidden_mask)[0])
    through: dict[int, list[int]] = {v: [] for v in from_mask(bad_mask)}
    for k in _typed_copies(G, a_mask, within=G.vertex_mask() & ~forbidden_mask).get((1, 3), []):
        for v in from_mask(k & bad_mask):
            through[v].append(k)
    # cheap necessary check first, so the error can name the vertex
    for v, options in through.items():
        if not options:
            raise CoverFailed(f"vertex {v} lies in no (1,3) copy avoiding the forbidden set", v)
    nodes = 0
    chosen: list[int] = []
    stuck = [None]

    def go(remaining: int, used: int) -> bool:
        nonlocal nodes
        if not remaining:
            return True
        v = (remaining & -remaining).bit_length() - 1
        for k in through[v]:
            if k & used:
                continue
            nodes += 1
            if nodes > budget:
                raise _Exhausted
            chosen.append(k)
            if go(remaining & ~k, used | k):
                return True
            chosen.pop()
        stuck[0] = v
        return False

    try:
        ok = go(bad_mask, forbidden_mask)
    except _Exhausted:
        raise CoverFailed(f"search budget {budget} exhausted covering bad vertices", stuck[0]) from None
    if not ok:
        raise CoverFailed(f"no disjoint (1,3) cover; vertex {stuck[0]} cannot be covered", stuck[0])
    return Tiling.from_masks(chosen)


# -- balancing and parity ------------------------------------------------------------------


@dataclass
class BalanceResult:
    M2: Tiling
    M3: Tiling
    M4: Tiling
    residue_case: str
    ledger: dict


def _m2_types(diff: int) -> list[tuple[int, int]]:
    """Copy types that bring |A| - |B| = diff to zero: (4,0) shifts by -4, (1,3) by +2."""
    if diff % 2:
        raise ParityUnreachable(f"|A'| - |B'| = {diff} is odd")
    if diff < 0:
        return [(1, 3)] * (-diff // 2)
    if diff % 4:
        return [(1, 3)] + [(4, 0)] * ((diff + 2) // 4)
    return [(4, 0)] * (diff // 4)


def balance_and_parity(
    G: Uniform3Graph,
    refined: RefinedPartition,
    M1: Tiling,
    breakers: ParityBreakers | None,
    budget: int = SEARCH_BUDGET,
) -> BalanceResult:
    """Choose M2 (equal sides), M3 (sides divisible by 6) and M4 (re-cover exposed bad vertices)."""
    a_mask = to_mask(refined.A)
    typed = _typed_copies(G, a_mask)
    reserved = to_mask(breakers.K + breakers.K2) if breakers else 0
    used = M1.mask()
    bad_mask = to_mask(refined.bad)
    pool = lambda t: [k for k in typed.get(t, []) if not k & bad_mask]  # noqa: E731
    a_free = popcount(a_mask & ~used)
    b_free = popcount(G.vertex_mask() & ~a_mask & ~used)
    need = _m2_types(a_free - b_free)
    picked = _pick_disjoint([pool(t) for t in need], used | reserved, budget)
    if picked is None:
        raise ParityUnreachable(f"no disjoint copies of types {need} to balance the sides")
    M2 = Tiling.from_masks(picked)
    used |= M2.mask()
    a2 = popcount(a_mask & ~used)
    b2 = popcount(G.vertex_mask() & ~a_mask & ~used)
    if a2 != b2:
        raise InvariantViolation(f"after M2 the sides differ: {a2} vs {b2}")
    residue = a2 % 6
    case = {0: "a", 2: "b", 4: "c"}[residue]
    M3_blocks: list[int] = []
    if case != "a":
        if breakers is None:
            raise ParityUnreachable(f"sides are {residue} mod 6 and no parity breakers exist")
        K, K2 = to_mask(breakers.K), to_mask(breakers.K2)
        extra = 0
        if case == "b":
            M3_blocks = [K] if breakers.case in ("i", "iii") else [K, K2]
            extra = 2 if breakers.case == "ii" else 0
        else:
            M3_blocks = [K, K2] if breakers.case == "iii" else [K2]
            extra = 1 if breakers.case in ("i", "ii") else 0
        if extra:
            # the extra (1,3) copies must also avoid the unused breaker
            more = _pick_disjoint([pool((1, 3))] * extra, used | reserved, budget)
            if more is None:
                raise ParityUnreachable(f"no {extra} spare (1,3) copies for M3")
            M3_blocks += more
    M3 = Tiling.from_masks(M3_blocks)
    used |= M3.mask()
    a3 = popcount(a_mask & ~used)
    b3 = popcount(G.vertex_mask() & ~a_mask & ~used)
    if a3 != b3 or a3 % 6:
        raise InvariantViolation(f"after M3 the sides are {a3}, {b3}")
    exposed = from_mask(bad_mask & ~used)
    M4_blocks: list[int] = []
    if exposed:
        units = math.ceil(len(exposed) / 2)
        slots: list[list[int]] = []
        for i in range(units):
            targets = exposed[2 * i : 2 * i + 2]
            for v in targets:
                slots.append([k for k in typed.get((1, 3), []) if k >> v & 1 and not k & bad_mask & ~(1 << v)])
            if len(targets) == 1:
                slots.append(pool((1, 3)))
            slots.append(pool((4, 0)))
        found = _pick_disjoint(slots, used, budget)
        if found is None:
            raise ParityUnreachable(f"cannot re-cover exposed bad vertices {exposed}")
        M4_blocks = found
    M4 = Tiling.from_masks(M4_blocks)
    used |= M4.mask()
    a4 = popcount(a_mask & ~used)
    b4 = popcount(G.vertex_mask() & ~a_mask & ~used)
    if a4 != b4 or a4 % 6 or bad_mask & ~used:
        raise InvariantViolation(f"after M4 the sides are {a4}, {b4}")
    ledger = {
        "after_M1": [a_free, b_free],
        "after_M2": [a2, b2],
        "after_M3": [a3, b3],
        "after_M4": [a4, b4],
        "M4_size": len(M4),
        "M4_within_budget": len(M4) <= 24,
    }
    return BalanceResult(M2, M3, M4, case, ledger)


# -- all-good endgame --------------------------------------------------------------------------


@dataclass
class AllGoodResult:
    tiling: Tiling
    M1: Tiling
    M2: Tiling
    triple_edges: int
    threshold: str
    all_good: bool


def allgood_factor(G: Uniform3Graph, A: Iterable[int], B: Iterable[int], alpha, budget: int | None = None) -> AllGoodResult:
    """K4^- factor of H[A + B] when |A| = |B| = 6m and every vertex is alpha-good.

    A B-triple is kept when at least |A| - 3 sqrt(alpha) n vertices of A (and
    at least one) complete it to a K4^- copy. A perfect matching of those
    triples is paired with distinct A-vertices by bipartite matching, and the
    remaining 4m A-vertices are split by a perfect matching of spanning
    4-sets. Goodness is measured inside H[A + B] and reported, not enforced.
    """
    A, B = sorted(set(A)), sorted(set(B))
    if set(A) & set(B):
        raise ValueError("A and B overlap")
    if len(A) != len(B) or len(A) % 6:
        raise BadModulus(f"need |A| = |B| divisible by 6, got {len(A)} and {len(B)}")
    alpha = Fraction(str(alpha)) if isinstance(alpha, float) else Fraction(alpha)
    if not A:
        return AllGoodResult(Tiling.of(()), Tiling.of(()), Tiling.of(()), 0, "empty", True)
    n = len(A) + len(B)
    a_mask = to_mask(A)
    sub_mask = a_mask | to_mask(B)
    sub_edges = [e for e in G.edges if not to_mask(e) & ~sub_mask]
    sub = Uniform3Graph(G.n, sub_edges)
    missing = model_missing_degrees(sub, a_mask)
    all_good = all(missing[v] <= alpha * n * n for v in A + B)

    def completers(t: Sequence[int]) -> list[int]:
        return [a for a in A if spans_k4minus(G, sorted((*t, a)))]

    def keep(count: int) -> bool:
        # count >= |A| - 3 sqrt(alpha) n, decided by squaring
        gap = len(A) - count
        return count >= 1 and (gap <= 0 or gap * gap <= 9 * alpha * n * n)

    local = {v: i for i, v in enumerate(B)}
    completing: dict[tuple[int, ...], list[int]] = {}
    for t in combinations(B, 3):
        cs = completers(t)
        if keep(len(cs)):
            completing[t] = cs
    aux = RGraph.of(len(B), 3, [tuple(local[v] for v in t) for t in completing])
    res = perfect_matching_rgraph(aux, budget)
    if res.verdict is not Verdict.FACTOR:
        raise MatchingFailed(f"triple graph on B has no perfect matching ({res.verdict.value}, {len(completing)} triples)")
    triples = [tuple(B[i] for i in e) for e in res.matching.blocks]
    bip = nx.Graph()
    left = [("t", i) for i in range(len(triples))]
    bip.add_nodes_from(left)
    for i, t in enumerate(triples):
        for a in completing[t]:
            bip.add_edge(("t", i), ("a", a))
    pairing = nx.bipartite.hopcroft_karp_matching(bip, top_nodes=left)
    if any(node not in pairing for node in left):
        raise MatchingFailed("matched triples cannot be paired with distinct A-vertices")
    m1_blocks = [sorted((*t, pairing[("t", i)][1])) for i, t in enumerate(triples)]
    used_a = {pairing[("t", i)][1] for i in range(len(triples))}
    rest = [a for a in A if a not in used_a]
    rest_local = {v: i for i, v in enumerate(rest)}
    quads = [q for q in combinations(rest, 4) if spans_k4minus(G, q)]
    aux4 = RGraph.of(len(rest), 4, [tuple(rest_local[v] for v in q) for q in quads])
    res4 = perfect_matching_rgraph(aux4, budget)
    if res4.verdict is not Verdict.FACTOR:
        raise MatchingFailed(f"4-graph on the remaining A-vertices has no perfect matching ({res4.verdict.value})")
    m2_blocks = [[rest[i] for i in q] for q in res4.matching.blocks]
    M1, M2 = Tiling.of(m1_blocks), Tiling.of(m2_blocks)
    threshold = f"|A| - 3*sqrt({alpha})*{n}, at least 1"
    return AllGoodResult(M1 + M2, M1, M2, len(completing), threshold, all_good)


# -- full pipeline ------------------------------------------------------------------------------


@dataclass
class ExtremalResult:
    verdict: Verdict
    tiling: Tiling | None
    stage: str
    fallback_used: bool
    trace: dict
    wall_ms: float = 0.0

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "stage": self.stage,
            "fallback_used": self.fallback_used,
            "blocks": [list(b) for b in self.tiling.blocks] if self.tiling else [],
            "trace": self.trace,
            "wall_ms": round(self.wall_ms, 3),
        }


def _blocks(t: Tiling) -> list[list[int]]:
    return [list(b) for b in t.blocks]


def extremal_factor(
    G: Uniform3Graph,
    gamma=None,
    params: DeskParams | None = None,
    fallback: bool = True,
    budget: int | None = None,
) -> ExtremalResult:
    """Run analyze, refine, breakers, M1 to M5 and return a verified factor or a fallback verdict.

    A failing stage is logged in ``trace["log"]``; with ``fallback`` the
    exact solver is tried on the residual vertex set and then on all of V.
    NoFactor is reported only when the whole-graph search is exhaustive.
    """
    start = time.perf_counter()
    params = params or DeskParams()
    gamma = params.gamma if gamma is None else gamma
    budget = default_budget() if budget is None else budget
    n = G.n
    if n % 4:
        raise BadModulus(f"n = {n} is not divisible by 4")
    trace: dict = {"params": params.to_json(), "log": []}
    oracle = FactorOracle(G)
    placed = Tiling.of(())

    def done(verdict: Verdict, tiling: Tiling | None, stage: str, fell_back: bool) -> ExtremalResult:
        if tiling is not None:
            ok, why = verify_tiling(G, tiling, require_perfect=True)
            if not ok:
                raise InvariantViolation(f"stage {stage} produced an invalid factor: {why}")
        return ExtremalResult(verdict, tiling, stage, fell_back, trace, (time.perf_counter() - start) * 1000)

    def fall_back(reason: str, partial: Tiling) -> ExtremalResult:
        trace["log"].append(reason)
        if not fallback:
            return done(Verdict.UNKNOWN, None, "failed", False)
        residual = G.vertex_mask() & ~partial.mask()
        if partial.blocks:
            res = oracle.solve(residual, budget)
            trace["fallback_residual"] = res.verdict.value
            if res.verdict is Verdict.FACTOR:
                return done(Verdict.FACTOR, partial + res.tiling, "fallback-residual", True)
        res = oracle.solve(None, budget)
        trace["fallback_whole"] = res.verdict.value
        if res.verdict is Verdict.FACTOR:
            return done(Verdict.FACTOR, res.tiling, "fallback-whole", True)
        return done(res.verdict, None, "fallback-whole", True)

    verdict = is_gamma_extremal(G, gamma)
    trace["analyze"] = verdict.to_json()
    if not verdict:
        trace["log"].append("input is not gamma-extremal at the requested gamma; continuing")
    witness = verdict.witness
    try:
        refined = refine_partition(G, witness.A, witness.B, params)
    except ClassificationFailed as exc:
        trace["refine"] = {"error": str(exc), "vertex": exc.vertex, "counts": exc.counts}
        return fall_back(f"refine: {exc}", placed)
    trace["refine"] = refined.to_json()
    try:
        breakers = find_parity_breakers(G, refined.A, refined.B, bad=refined.bad)
        trace["breakers"] = breakers.to_json()
    except NotFound as exc:
        breakers = None
        trace["breakers"] = {"error": str(exc)}
    g1 = params.gamma_chain[0]
    reserved = set(breakers.K + breakers.K2) if breakers else set()
    try:
        M1 = cover_bad(G, refined.A, refined.B, refined.bad - reserved, reserved)
    except CoverFailed as exc:
        trace["M1"] = {"error": str(exc), "vertex": exc.vertex}
        return fall_back(f"M1: {exc}", placed)
    trace["M1"] = {"blocks": _blocks(M1), "size": len(M1), "budget": str(2 * g1 * n), "within_budget": len(M1) <= 2 * g1 * n}
    placed = M1
    try:
        bal = balance_and_parity(G, refined, M1, breakers)
    except ParityUnreachable as exc:
        trace["M2"] = {"error": str(exc)}
        return fall_back(f"balance: {exc}", placed)
    trace["M2"] = {"blocks": _blocks(bal.M2), "size": len(bal.M2), "budget": str(8 * g1 * n), "within_budget": len(bal.M2) <= 8 * g1 * n}
    trace["M3"] = {"blocks": _blocks(bal.M3), "residue_case": bal.residue_case}
    trace["M4"] = {"blocks": _blocks(bal.M4), "size": len(bal.M4), "budget": 24, "within_budget": len(bal.M4) <= 24}
    trace["parity_ledger"] = bal.ledger
    placed = M1 + bal.M2 + bal.M3 + bal.M4
    rest = G.vertex_mask() & ~placed.mask()
    a_star = [v for v in from_mask(rest) if v in refined.A]
    b_star = [v for v in from_mask(rest) if v in refined.B]
    try:
        good = allgood_factor(G, a_star, b_star, params.gamma_chain[2], budget)
    except MatchingFailed as exc:
        trace["M5"] = {"error": str(exc)}
        return fall_back(f"M5: {exc}", placed)
    trace["M5"] = {"blocks": _blocks(good.tiling), "triple_edges": good.triple_edges, "threshold": good.threshold, "all_good": good.all_good}
    return done(Verdict.FACTOR, placed + good.tiling, "allgood", False)
