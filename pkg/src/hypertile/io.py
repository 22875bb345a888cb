"""Plain-text hypergraph files and partition sidecars.

Graph files start with ``p h3 <n> <m>`` followed by ``e <a> <b> <c>`` lines;
lines starting with ``#`` are comments. Serialization is canonical: sorted
triples, sorted edge list, LF line endings, no comments.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import ParseError
from .hypergraph import Uniform3Graph


def _ints(tokens: list[str], lineno: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ParseError(f"expected integers, got {' '.join(tokens)!r}", lineno) from None


@dataclass
class Parsed:
    graph: Uniform3Graph
    notes: list[str]


def parse_graph_text(text: str) -> Parsed:
    """Parse the text format; unsorted triples are accepted and noted."""
    notes: list[str] = []
    header: tuple[int, int] | None = None
    edges: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int, int]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            notes.append(f"line {lineno}: blank line dropped")
            continue
        if line.startswith("#"):
            notes.append(f"line {lineno}: comment dropped")
            continue
        parts = line.split()
        if parts[0] == "p":
            if header is not None:
                raise ParseError("second header line", lineno)
            if len(parts) != 4 or parts[1] != "h3":
                raise ParseError("header must read 'p h3 <n> <m>'", lineno)
            n, m = _ints(parts[2:], lineno)
            if n < 0 or m < 0:
                raise ParseError("n and m must be non-negative", lineno)
            header = (n, m)
        elif parts[0] == "e":
            if header is None:
                raise ParseError("edge line before the header", lineno)
            if len(parts) != 4:
                raise ParseError("edge line must read 'e <a> <b> <c>'", lineno)
            triple = _ints(parts[1:], lineno)
            n = header[0]
            for v in triple:
                if not 0 <= v < n:
                    raise ParseError(f"vertex {v} outside 0..{n - 1}", lineno)
            if len(set(triple)) != 3:
                raise ParseError(f"repeated vertex in {tuple(triple)}", lineno)
            canon = tuple(sorted(triple))
            if list(canon) != triple:
                notes.append(f"line {lineno}: triple {tuple(triple)} sorted to {canon}")
            if canon in seen:
                raise ParseError(f"duplicate edge {canon}", lineno)
            seen.add(canon)
            edges.append(canon)  # type: ignore[arg-type]
        else:
            raise ParseError(f"unknown line type {parts[0]!r}", lineno)
    if header is None:
        raise ParseError("missing 'p h3 <n> <m>' header", 1)
    if len(edges) != header[1]:
        raise ParseError(f"header announces {header[1]} edges, found {len(edges)}", len(text.splitlines()))
    if edges != sorted(edges):
        notes.append("edge order canonicalized")
    return Parsed(Uniform3Graph(header[0], edges), notes)


def parse_graph(text: str) -> Uniform3Graph:
    return parse_graph_text(text).graph


def serialize_graph(G: Uniform3Graph) -> str:
    lines = [f"p h3 {G.n} {G.m}"]
    lines.extend(f"e {a} {b} {c}" for a, b, c in G.edges)
    return "\n".join(lines) + "\n"


def read_graph(path: str | Path) -> Uniform3Graph:
    return parse_graph(Path(path).read_text())


def write_graph(G: Uniform3Graph, path: str | Path) -> None:
    Path(path).write_text(serialize_graph(G))


def serialize_partition(A: Iterable[int], B: Iterable[int]) -> str:
    return "A " + " ".join(map(str, sorted(A))) + "\nB " + " ".join(map(str, sorted(B))) + "\n"


def parse_partition(text: str, n: int | None = None) -> tuple[list[int], list[int]]:
    sides: dict[str, list[int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] not in ("A", "B"):
            raise ParseError(f"partition lines start with A or B, got {parts[0]!r}", lineno)
        if parts[0] in sides:
            raise ParseError(f"side {parts[0]} given twice", lineno)
        vs = _ints(parts[1:], lineno)
        if n is not None:
            for v in vs:
                if not 0 <= v < n:
                    raise ParseError(f"vertex {v} outside 0..{n - 1}", lineno)
        sides[parts[0]] = vs
    if set(sides) != {"A", "B"}:
        raise ParseError("partition needs both an A line and a B line", None)
    A, B = sides["A"], sides["B"]
    if set(A) & set(B):
        raise ParseError(f"sides overlap in {sorted(set(A) & set(B))}", None)
    if n is not None and len(set(A)) + len(set(B)) != n:
        raise ParseError(f"sides cover {len(set(A) | set(B))} of {n} vertices", None)
    return sorted(set(A)), sorted(set(B))


def sidecar_path(path: str | Path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".part")


@dataclass
class RoundTrip:
    ok: bool
    normalized: bool
    notes: list[str]


def roundtrip_text(text: str) -> RoundTrip:
    """Parse, serialize and re-parse; ``normalized`` is set when the input was not canonical."""
    parsed = parse_graph_text(text)
    once = serialize_graph(parsed.graph)
    twice = serialize_graph(parse_graph(once))
    return RoundTrip(once == twice, once != text, parsed.notes)
