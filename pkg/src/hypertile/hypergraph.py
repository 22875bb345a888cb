"""Core 3-uniform hypergraph representation and degree/link/copy primitives.

Vertices are the integers ``0..n-1``. Vertex sets are passed around either as
Python collections or as integer bitmasks (bit ``v`` set iff ``v`` is a member);
the ``*_mask`` helpers convert between the two.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

from .errors import DegenerateTriple, EmptyGraph, NotAPartition, OutOfRange, SameVertex

Triple = tuple[int, int, int]
FourSet = tuple[int, int, int, int]


def to_mask(vertices: Iterable[int]) -> int:
    mask = 0
    for v in vertices:
        mask |= 1 << v
    return mask


def from_mask(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def lowest_bit(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def four_set(vertices: Iterable[int]) -> FourSet:
    """Normalise four distinct vertices into a sorted FourSet."""
    fs = tuple(sorted(vertices))
    if len(fs) != 4 or len(set(fs)) != 4:
        raise DegenerateTriple(f"a FourSet needs four distinct vertices, got {fs}")
    return fs  # type: ignore[return-value]


class Uniform3Graph:
    """An immutable 3-uniform hypergraph on ``n`` vertices.

    Edges are kept twice: as a sorted tuple of triples (for iteration and
    serialisation) and as a per-pair neighbourhood bitmask, so that edge
    membership, codegrees and common neighbourhoods are single integer
    operations.
    """

    __slots__ = ("n", "edges", "_nbr", "_deg")

    def __init__(self, n: int, edges: Iterable[Sequence[int]] = ()):
        if n < 0:
            raise OutOfRange(f"vertex count must be non-negative, got {n}")
        nbr = [[0] * n for _ in range(n)]
        deg = [0] * n
        canon: set[Triple] = set()
        for triple in edges:
            a, b, c = _check_triple(triple, n)
            if (a, b, c) in canon:
                continue
            canon.add((a, b, c))
            nbr[a][b] |= 1 << c
            nbr[b][a] |= 1 << c
            nbr[a][c] |= 1 << b
            nbr[c][a] |= 1 << b
            nbr[b][c] |= 1 << a
            nbr[c][b] |= 1 << a
            deg[a] += 1
            deg[b] += 1
            deg[c] += 1
        self.n = n
        self.edges: tuple[Triple, ...] = tuple(sorted(canon))
        self._nbr = nbr
        self._deg = deg

    @classmethod
    def complete(cls, n: int) -> "Uniform3Graph":
        return cls(n, combinations(range(n), 3))

    @property
    def m(self) -> int:
        return len(self.edges)

    def __repr__(self) -> str:
        return f"Uniform3Graph(n={self.n}, m={self.m})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Uniform3Graph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    def has_edge(self, a: int, b: int, c: int) -> bool:
        if a == b:
            return False
        return bool(self._nbr[a][b] >> c & 1)

    def nbr_mask(self, x: int, y: int) -> int:
        """Bitmask of N(xy), the vertices completing ``xy`` to an edge."""
        return self._nbr[x][y]

    def degree(self, v: int) -> int:
        return self._deg[v]

    def edge_set(self) -> frozenset[Triple]:
        return frozenset(self.edges)

    def vertex_mask(self) -> int:
        return (1 << self.n) - 1

    def edges_within(self, mask: int) -> list[Triple]:
        return [e for e in self.edges if (mask >> e[0] & 1) and (mask >> e[1] & 1) and (mask >> e[2] & 1)]

    def without_edges(self, removed: Iterable[Sequence[int]]) -> "Uniform3Graph":
        drop = {tuple(sorted(t)) for t in removed}
        return Uniform3Graph(self.n, (e for e in self.edges if e not in drop))

    def with_edges(self, added: Iterable[Sequence[int]]) -> "Uniform3Graph":
        return Uniform3Graph(self.n, list(self.edges) + [tuple(t) for t in added])


def _check_triple(triple: Sequence[int], n: int) -> Triple:
    if len(triple) != 3:
        raise DegenerateTriple(f"edge must have 3 vertices, got {tuple(triple)}")
    a, b, c = sorted(int(v) for v in triple)
    if a < 0 or c >= n:
        raise OutOfRange(f"edge {tuple(triple)} has a vertex outside 0..{n - 1}")
    if a == b or b == c:
        raise DegenerateTriple(f"edge {tuple(triple)} repeats a vertex")
    return a, b, c


def from_edges(n: int, triples: Iterable[Sequence[int]]) -> Uniform3Graph:
    return Uniform3Graph(n, triples)


@dataclass(frozen=True)
class Graph2:
    """A simple 2-graph, optionally carrying the original labels of its vertices."""

    n: int
    edges: frozenset[tuple[int, int]]
    vertex_map: tuple[int, ...] = ()
    adj: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        adj = [0] * self.n
        for u, v in self.edges:
            if u == v:
                raise DegenerateTriple(f"loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise OutOfRange(f"edge {(u, v)} outside 0..{self.n - 1}")
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        object.__setattr__(self, "adj", tuple(adj))

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[Sequence[int]], vertex_map: Sequence[int] = ()) -> "Graph2":
        return cls(n, frozenset(tuple(sorted(p)) for p in pairs), tuple(vertex_map))

    def degree(self, v: int) -> int:
        return popcount(self.adj[v])

    def neighbours(self, v: int) -> int:
        return self.adj[v]

    def original(self, v: int) -> int:
        return self.vertex_map[v] if self.vertex_map else v


# -- degree primitives ------------------------------------------------------


def codegree(G: Uniform3Graph, x: int, y: int) -> int:
    if x == y:
        raise SameVertex(f"codegree needs two distinct vertices, got {x} twice")
    _check_vertex(G, x)
    _check_vertex(G, y)
    return popcount(G.nbr_mask(x, y))


def min_codegree(G: Uniform3Graph) -> int:
    if G.n < 2:
        return 0
    return min(popcount(G.nbr_mask(x, y)) for x, y in combinations(range(G.n), 2))


def min_vertex_degree(G: Uniform3Graph) -> int:
    if G.n < 1:
        raise EmptyGraph("minimum vertex degree of the graph on no vertices")
    return min(G.degree(v) for v in range(G.n))


def deg_into(G: Uniform3Graph, x: int, y: int, mask: int) -> int:
    """deg(xy, U) for U given as a bitmask."""
    return popcount(G.nbr_mask(x, y) & mask)


def link_graph(G: Uniform3Graph, x: int) -> Graph2:
    """The link of ``x``, relabelled onto ``0..n-2``; ``vertex_map`` holds the old labels."""
    _check_vertex(G, x)
    others = [v for v in range(G.n) if v != x]
    index = {v: i for i, v in enumerate(others)}
    pairs = []
    for y in others:
        for z in from_mask(G.nbr_mask(x, y)):
            if y < z:
                pairs.append((index[y], index[z]))
    return Graph2.from_pairs(G.n - 1, pairs, others)


# -- K4^- copies --------------------------------------------------------------


def edges_in_four_set(G: Uniform3Graph, s: Sequence[int]) -> int:
    a, b, c, d = s
    return G.has_edge(a, b, c) + G.has_edge(a, b, d) + G.has_edge(a, c, d) + G.has_edge(b, c, d)


def spans_k4minus(G: Uniform3Graph, s: Sequence[int]) -> bool:
    """True iff at least three of the four triples inside ``s`` are edges."""
    return edges_in_four_set(G, s) >= 3


def _edge_link_mask(G: Uniform3Graph, a: int, b: int, c: int) -> int:
    ab, bc, ac = G.nbr_mask(a, b), G.nbr_mask(b, c), G.nbr_mask(a, c)
    return (ab & bc) | (ab & ac) | (bc & ac)


def link_set_mask(G: Uniform3Graph, T: Sequence[int]) -> int:
    a, b, c = T
    if G.has_edge(a, b, c):
        mask = _edge_link_mask(G, a, b, c)
    else:
        mask = G.nbr_mask(a, b) & G.nbr_mask(b, c) & G.nbr_mask(a, c)
    return mask & ~((1 << a) | (1 << b) | (1 << c))


def link_set(G: Uniform3Graph, T: Sequence[int]) -> frozenset[int]:
    """L(T): the vertices v outside T such that T+v spans a copy of K4^-."""
    if len(set(T)) != 3 or len(T) != 3:
        raise DegenerateTriple(f"L(T) needs three distinct vertices, got {tuple(T)}")
    for v in T:
        _check_vertex(G, v)
    return frozenset(from_mask(link_set_mask(G, T)))


def k4minus_masks(G: Uniform3Graph, within: int | None = None) -> list[int]:
    """All 4-sets spanning K4^-, as bitmasks in ascending order.

    With ``within`` given, only copies inside that vertex mask are returned.
    """
    found: set[int] = set()
    for a, b, c in G.edges:
        base = (1 << a) | (1 << b) | (1 << c)
        if within is not None and base & ~within:
            continue
        rest = _edge_link_mask(G, a, b, c)
        if within is not None:
            rest &= within
        while rest:
            low = rest & -rest
            found.add(base | low)
            rest ^= low
    return sorted(found)


def copy_type(s: Sequence[int], a_mask: int) -> tuple[int, int]:
    i = sum(1 for v in s if a_mask >> v & 1)
    return i, len(s) - i


def enumerate_k4minus(G: Uniform3Graph, A: Iterable[int] | None = None) -> list:
    """Every 4-set spanning K4^-, each counted once.

    Without ``A`` the result is a sorted list of FourSets. With ``A`` each entry
    is ``(fourset, (i, j))`` where ``i`` vertices lie in ``A`` and ``j`` outside.
    """
    copies = sorted(tuple(from_mask(m)) for m in k4minus_masks(G))
    if A is None:
        return copies
    a_mask = to_mask(A)
    return [(s, copy_type(s, a_mask)) for s in copies]


# -- bipartition census -------------------------------------------------------


def check_partition(n: int, X: Iterable[int], Y: Iterable[int]) -> tuple[int, int]:
    xs, ys = list(X), list(Y)
    x_mask, y_mask = to_mask(xs), to_mask(ys)
    if (
        len(set(xs)) != len(xs)
        or len(set(ys)) != len(ys)
        or x_mask & y_mask
        or (x_mask | y_mask) != (1 << n) - 1
        or any(v < 0 or v >= n for v in xs + ys)
    ):
        raise NotAPartition("X and Y must partition the vertex set")
    return x_mask, y_mask


def edge_census(G: Uniform3Graph, X: Iterable[int], Y: Iterable[int]) -> tuple[int, int, int, int]:
    """(e(XXX), e(XXY), e(XYY), e(YYY)) for a partition X, Y."""
    x_mask, _ = check_partition(G.n, X, Y)
    counts = [0, 0, 0, 0]
    for e in G.edges:
        inside = (x_mask >> e[0] & 1) + (x_mask >> e[1] & 1) + (x_mask >> e[2] & 1)
        counts[3 - inside] += 1
    return counts[0], counts[1], counts[2], counts[3]


def _check_vertex(G: Uniform3Graph, v: int) -> None:
    if not 0 <= v < G.n:
        raise OutOfRange(f"vertex {v} outside 0..{G.n - 1}")


# -- B[A,B] model bookkeeping ----------------------------------------------------


def in_space_model(triple: Sequence[int], a_mask: int) -> bool:
    """True iff the triple meets A in an odd number of vertices."""
    return bool(((a_mask >> triple[0]) ^ (a_mask >> triple[1]) ^ (a_mask >> triple[2])) & 1)


def model_missing(G: Uniform3Graph, a_mask: int) -> int:
    """|E(B[A,B]) minus E(G)| for A given as a mask and B its complement."""
    a = popcount(a_mask & G.vertex_mask())
    b = G.n - a
    model_size = a * (a - 1) * (a - 2) // 6 + a * (b * (b - 1) // 2)
    present = sum(1 for e in G.edges if in_space_model(e, a_mask))
    return model_size - present


def model_missing_degrees(G: Uniform3Graph, a_mask: int) -> list[int]:
    """Per-vertex degree in B[A,B] minus G."""
    a = popcount(a_mask & G.vertex_mask())
    b = G.n - a
    in_a = (a - 1) * (a - 2) // 2 + b * (b - 1) // 2
    in_b = a * (b - 1)
    deg = [in_a if a_mask >> v & 1 else in_b for v in range(G.n)]
    for e in G.edges:
        if in_space_model(e, a_mask):
            for v in e:
                deg[v] -= 1
    return deg


@dataclass(frozen=True)
class Bipartition:
    """A split (A, B) of the vertex set, with optional census data attached."""

    A: frozenset[int]
    B: frozenset[int]
    census: tuple[int, int, int, int] | None = None
    missing_from_B_model: int | None = None

    @classmethod
    def of(cls, G: Uniform3Graph, A: Iterable[int], B: Iterable[int] | None = None) -> "Bipartition":
        A = frozenset(A)
        B = frozenset(range(G.n)) - A if B is None else frozenset(B)
        a_mask, _ = check_partition(G.n, A, B)
        return cls(A, B, edge_census(G, A, B), model_missing(G, a_mask))

    @property
    def a_mask(self) -> int:
        return to_mask(self.A)

    @property
    def b_mask(self) -> int:
        return to_mask(self.B)

    def swapped(self) -> "Bipartition":
        return Bipartition(self.B, self.A)

    def to_json(self) -> dict:
        return {
            "A": sorted(self.A),
            "B": sorted(self.B),
            "census": list(self.census) if self.census is not None else None,
            "missing": self.missing_from_B_model,
        }
