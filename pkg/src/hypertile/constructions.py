"""Extremal constructions and seeded random instances near the codegree threshold."""

from __future__ import annotations

import random
from itertools import combinations

from .errors import BadModulus, Infeasible, TooSmall
from .hypergraph import Bipartition, Uniform3Graph, popcount


def build_space_B(a: int, b: int) -> tuple[Uniform3Graph, Bipartition]:
    """B[A,B] with A = {0..a-1}, B = {a..a+b-1}: every triple meeting A an odd number of times."""
    if a < 0 or b < 0 or a + b < 3:
        raise TooSmall(f"need at least 3 vertices, got a={a}, b={b}")
    n = a + b
    edges = []
    for t in combinations(range(n), 3):
        if sum(1 for v in t if v < a) % 2 == 1:
            edges.append(t)
    G = Uniform3Graph(n, edges)
    return G, Bipartition.of(G, range(a), range(a, n))


def build_vertexdeg_extremal(n: int) -> tuple[Uniform3Graph, Bipartition]:
    """|X| = n/4+1, |Y| = 3n/4-1, edges are the triples meeting Y at least twice.

    The returned Bipartition has A = X, B = Y.
    """
    if n % 4 != 0 or n < 8:
        raise BadModulus(f"n must be a multiple of 4 and at least 8, got {n}")
    x = n // 4 + 1
    edges = [t for t in combinations(range(n), 3) if sum(1 for v in t if v >= x) >= 2]
    G = Uniform3Graph(n, edges)
    return G, Bipartition.of(G, range(x), range(x, n))


def augment_to_floor(G: Uniform3Graph, floor: int, rng: random.Random) -> Uniform3Graph:
    """Raise every codegree to at least ``floor`` by adding edges.

    Pairs are visited in lexicographic order; a deficient pair gets edges
    through third vertices drawn uniformly without replacement from its
    non-neighbours. Added edges only increase other codegrees, so one pass
    suffices.
    """
    n = G.n
    if floor > n - 2:
        raise Infeasible(f"codegree floor {floor} exceeds n-2 = {n - 2}")
    if floor <= 0:
        return G
    nbr = [[G.nbr_mask(x, y) for y in range(n)] for x in range(n)]
    added = []
    for x, y in combinations(range(n), 2):
        deficit = floor - popcount(nbr[x][y])
        if deficit <= 0:
            continue
        candidates = [z for z in range(n) if z != x and z != y and not nbr[x][y] >> z & 1]
        for z in rng.sample(candidates, deficit):
            added.append((x, y, z))
            nbr[x][y] |= 1 << z
            nbr[y][x] |= 1 << z
            nbr[x][z] |= 1 << y
            nbr[z][x] |= 1 << y
            nbr[y][z] |= 1 << x
            nbr[z][y] |= 1 << x
    return G.with_edges(added) if added else G


def random_with_min_codegree(n: int, t: int, p: float, seed: int) -> Uniform3Graph:
    """Sample each triple with probability ``p``, then repair pairs below codegree ``t``.

    The output is not uniform over graphs with minimum codegree at least ``t``:
    the repair step biases toward edges through previously deficient pairs.
    """
    if t > n - 2:
        raise Infeasible(f"codegree floor {t} exceeds n-2 = {n - 2}")
    rng = random.Random(seed)
    edges = [tri for tri in combinations(range(n), 3) if rng.random() < p]
    return augment_to_floor(Uniform3Graph(n, edges), t, rng)


def perturb(G: Uniform3Graph, k: int, floor: int, seed: int) -> tuple[Uniform3Graph, list[tuple[int, int, int]]]:
    """Remove up to ``k`` random edges without pushing any codegree below ``floor``.

    Returns the new graph and the edges actually removed.
    """
    if k <= 0 or G.m == 0:
        return G, []
    rng = random.Random(seed)
    order = list(G.edges)
    rng.shuffle(order)
    codeg = {}
    for x, y in combinations(range(G.n), 2):
        codeg[x, y] = popcount(G.nbr_mask(x, y))
    removed = []
    for a, b, c in order:
        if len(removed) == k:
            break
        pairs = ((a, b), (a, c), (b, c))
        if any(codeg[p] - 1 < floor for p in pairs):
            continue
        for p in pairs:
            codeg[p] -= 1
        removed.append((a, b, c))
    return G.without_edges(removed), removed


def near_extremal_instance(half: int, removals: int, seed: int) -> tuple[Uniform3Graph, Bipartition]:
    """B[half, half] augmented to codegree n/2-1 and then perturbed at that floor."""
    n = 2 * half
    base, part = build_space_B(half, half)
    rng = random.Random(seed)
    floor = n // 2 - 1
    G = augment_to_floor(base, floor, rng)
    G, _ = perturb(G, removals, floor, rng.randrange(2**63))
    return G, Bipartition.of(G, part.A, part.B)


def lower_bound_instance(n: int) -> tuple[Uniform3Graph, Bipartition]:
    """A space construction with codegree n/2-2 and no K4^- factor, for n divisible by 4.

    Sides are n/2 and n/2 when 3 does not divide n, else n/2+1 and n/2-1.
    """
    if n % 4 or n < 8:
        raise BadModulus(f"n must be a multiple of 4 and at least 8, got {n}")
    if n % 3:
        return build_space_B(n // 2, n // 2)
    return build_space_B(n // 2 + 1, n // 2 - 1)


def complete_graph(n: int) -> Uniform3Graph:
    return Uniform3Graph.complete(n)


def disjoint_union(*graphs: Uniform3Graph) -> Uniform3Graph:
    edges = []
    offset = 0
    for H in graphs:
        edges.extend((a + offset, b + offset, c + offset) for a, b, c in H.edges)
        offset += H.n
    return Uniform3Graph(offset, edges)


__all__ = [
    "augment_to_floor",
    "build_space_B",
    "build_vertexdeg_extremal",
    "complete_graph",
    "disjoint_union",
    "lower_bound_instance",
    "near_extremal_instance",
    "perturb",
    "random_with_min_codegree",
]
