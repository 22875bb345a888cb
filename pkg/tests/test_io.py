import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypertile.constructions import build_space_B
from hypertile.errors import ParseError
from hypertile.hypergraph import Uniform3Graph
from hypertile.io import (
    parse_graph,
    parse_graph_text,
    parse_partition,
    read_graph,
    roundtrip_text,
    serialize_graph,
    serialize_partition,
    sidecar_path,
    write_graph,
)

import oracles


def test_canonical_text():
    G = Uniform3Graph(4, [(1, 2, 3), (0, 1, 2)])
    assert serialize_graph(G) == "p h3 4 2\ne 0 1 2\ne 1 2 3\n"
    assert serialize_graph(Uniform3Graph(0)) == "p h3 0 0\n"


def test_unsorted_input_is_normalized():
    text = "# demo\np h3 4 2\ne 3 2 1\n\ne 0 1 2\n"
    parsed = parse_graph_text(text)
    assert list(parsed.graph.edges) == [(0, 1, 2), (1, 2, 3)]
    assert "line 3: triple (3, 2, 1) sorted to (1, 2, 3)" in parsed.notes
    assert any("comment" in note for note in parsed.notes)
    rt = roundtrip_text(text)
    assert rt.ok and rt.normalized
    assert not roundtrip_text(serialize_graph(parsed.graph)).normalized


@pytest.mark.parametrize(
    "text,line,fragment",
    [
        ("e 0 1 2\n", 1, "before the header"),
        ("p h3 4 1\ne 0 1 4\n", 2, "outside"),
        ("p h3 4 1\ne 0 1 1\n", 2, "repeated vertex"),
        ("p h3 4 2\ne 0 1 2\ne 2 1 0\n", 3, "duplicate"),
        ("p h3 4 2\ne 0 1 2\n", 2, "announces 2"),
        ("p h3 4 0\np h3 4 0\n", 2, "second header"),
        ("p h2 4 0\n", 1, "header must read"),
        ("p h3 4 1\nx 0 1 2\n", 2, "unknown line"),
        ("p h3 4 1\ne 0 one 2\n", 2, "integers"),
        ("", 1, "missing"),
    ],
)
def test_parse_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ParseError) as info:
        parse_graph(text)
    assert info.value.line == line
    assert fragment in str(info.value)


def test_files_and_sidecars(tmp_path):
    G, part = build_space_B(4, 4)
    path = tmp_path / "b44.h3"
    write_graph(G, path)
    assert read_graph(path) == G
    assert sidecar_path(path).name == "b44.h3.part"
    text = serialize_partition(part.A, part.B)
    assert text == "A 0 1 2 3\nB 4 5 6 7\n"
    assert parse_partition(text, 8) == ([0, 1, 2, 3], [4, 5, 6, 7])
    with pytest.raises(ParseError):
        parse_partition("A 0 1\nB 1 2\n", 3)
    with pytest.raises(ParseError):
        parse_partition("A 0 1\n", 2)
    with pytest.raises(ParseError):
        parse_partition("A 0 1\nB 2\n", 4)


@given(st.integers(0, 10), st.floats(0, 1), st.integers(0, 2**32))
def test_roundtrip_property(n, p, seed):
    edges = oracles.random_edges(n, p, random.Random(seed))
    G = Uniform3Graph(n, edges)
    text = serialize_graph(G)
    assert parse_graph(text) == G
    assert oracles.edge_set(parse_graph(text)) == edges
    rt = roundtrip_text(text)
    assert rt.ok and not rt.normalized


@given(st.integers(3, 9), st.integers(0, 2**32))
def test_shuffled_input_roundtrips_to_canonical(n, seed):
    rng = random.Random(seed)
    edges = list(oracles.random_edges(n, 0.5, rng))
    rng.shuffle(edges)
    lines = [f"p h3 {n} {len(edges)}"] + ["e " + " ".join(map(str, rng.sample(e, 3))) for e in edges]
    G = parse_graph("\n".join(lines))
    assert serialize_graph(G) == serialize_graph(Uniform3Graph(n, edges))
