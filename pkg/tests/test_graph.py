import pytest
from hypothesis import given, strategies as st

from qgnls.errors import DanglingEndpoint, Disconnected, NonPositiveLength
from qgnls.graph import interval, star, terminal_vertices, total_length, validate_graph


def test_single_edge(edge4):
    assert total_length(edge4) == 4
    assert terminal_vertices(edge4) == [("a", "e"), ("b", "e")]


def test_star_degrees(star3):
    assert star3.degrees() == {"c": 3, "v1": 1, "v2": 1, "v3": 1}
    assert total_length(star3) == 6
    assert [v for v, _ in terminal_vertices(star3)] == ["v1", "v2", "v3"]


def test_triangle(triangle):
    assert terminal_vertices(triangle) == []
    assert total_length(triangle) == 3


def test_disjoint_edges_rejected():
    with pytest.raises(Disconnected):
        validate_graph({"vertices": ["a", "b", "c", "d"],
                        "edges": [{"id": "1", "from": "a", "to": "b", "length": 1},
                                  {"id": "2", "from": "c", "to": "d", "length": 1}]})


@pytest.mark.parametrize("length", [0, -1, float("inf"), float("nan")])
def test_bad_lengths(length):
    with pytest.raises(NonPositiveLength):
        interval(length)


def test_dangling_endpoint():
    with pytest.raises(DanglingEndpoint):
        validate_graph({"vertices": ["a"], "edges": [{"id": "e", "from": "a", "to": "z", "length": 1}]})


def test_scientific_notation_and_orientation():
    g = validate_graph({"vertices": ["a", "b"], "edges": [{"id": "e", "from": "b", "to": "a", "length": "4e0"}]})
    e = g.edge("e")
    assert (e.a, e.b, e.length) == (0, 1, 4.0)


def test_self_loop_and_parallel_edges():
    g = validate_graph({"vertices": ["a", "b"],
                        "edges": [{"id": "l", "from": "a", "to": "a", "length": 1},
                                  {"id": "p1", "from": "a", "to": "b", "length": 1},
                                  {"id": "p2", "from": "a", "to": "b", "length": 2}]})
    assert g.degrees() == {"a": 4, "b": 2}
    assert terminal_vertices(g) == []


def test_idempotent(tailed_triangle):
    assert validate_graph(tailed_triangle) == tailed_triangle
    assert validate_graph(tailed_triangle.to_dict()).to_dict() == tailed_triangle.to_dict()


@given(st.lists(st.floats(0.1, 10), min_size=1, max_size=6), st.permutations(range(6)), st.data())
def test_relabel_and_reorient_invariance(lengths, perm, data):
    n = len(lengths)
    g = star(n, lengths)
    names = ["c"] + [f"v{i + 1}" for i in range(n)]
    relabel = {old: f"w{perm[i % 6]}_{i}" for i, old in enumerate(names)}
    flips = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    raw = {"vertices": [relabel[v] for v in reversed(names)], "edges": []}
    for k, e in enumerate(g.edges):
        a, b = relabel[g.vertices[e.a]], relabel[g.vertices[e.b]]
        if flips[k]:
            a, b = b, a
        raw["edges"].append({"id": e.id, "from": a, "to": b, "length": e.length})
    h = validate_graph(raw)
    assert total_length(h) == pytest.approx(total_length(g), rel=1e-15)
    degree_one = sum(1 for d in h.degrees().values() if d == 1)
    assert len(terminal_vertices(h)) == degree_one
