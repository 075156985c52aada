"""Compact metric graphs: validation and topology queries."""

import json
import math
from dataclasses import dataclass, field

from .errors import DanglingEndpoint, Disconnected, GraphError, NonPositiveLength


@dataclass(frozen=True)
class Edge:
    id: str
    a: int  # dense vertex index, a <= b after canonicalization
    b: int
    length: float


@dataclass(frozen=True)
class EdgeCoordinate:
    edge: str
    x: float


@dataclass(frozen=True, eq=False)
class MetricGraph:
    """Validated, immutable metric graph.

    Vertices are opaque string ids mapped to dense indices in input order.
    Self-loops and parallel edges are allowed.
    """

    vertices: tuple
    edges: tuple
    vertex_index: dict = field(repr=False)
    edge_index: dict = field(repr=False)
    # vertex index -> tuple of (edge index, end) with end in {"a", "b"}
    adjacency: tuple = field(repr=False)

    def degree(self, v):
        return len(self.adjacency[self._vidx(v)])

    def degrees(self):
        return {vid: len(self.adjacency[i]) for i, vid in enumerate(self.vertices)}

    def edge(self, eid):
        try:
            return self.edges[self.edge_index[eid]]
        except KeyError:
            raise GraphError(f"unknown edge {eid!r}") from None

    def _vidx(self, v):
        if isinstance(v, int):
            return v
        try:
            return self.vertex_index[v]
        except KeyError:
            raise GraphError(f"unknown vertex {v!r}") from None

    def to_dict(self):
        return {
            "vertices": list(self.vertices),
            "edges": [
                {"id": e.id, "from": self.vertices[e.a], "to": self.vertices[e.b], "length": e.length}
                for e in self.edges
            ],
        }

    def __eq__(self, other):
        return isinstance(other, MetricGraph) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))


def validate_graph(raw):
    """Build a MetricGraph from a parsed description (dict) or an existing graph."""
    if isinstance(raw, MetricGraph):
        raw = raw.to_dict()
    if not isinstance(raw, dict) or "vertices" not in raw or "edges" not in raw:
        raise GraphError("graph description needs 'vertices' and 'edges'")
    vertices = [str(v) for v in raw["vertices"]]
    if len(set(vertices)) != len(vertices):
        raise GraphError("duplicate vertex ids")
    if not vertices:
        raise GraphError("graph has no vertices")
    vindex = {v: i for i, v in enumerate(vertices)}

    edges = []
    eindex = {}
    for k, e in enumerate(raw["edges"]):
        eid = str(e.get("id", f"e{k}"))
        if eid in eindex:
            raise GraphError(f"duplicate edge id {eid!r}")
        try:
            a, b = vindex[str(e["from"])], vindex[str(e["to"])]
        except KeyError as exc:
            raise DanglingEndpoint(f"edge {eid!r} references unknown vertex {exc.args[0]!r}") from None
        length = float(e["length"])
        if not (math.isfinite(length) and length > 0):
            raise NonPositiveLength(f"edge {eid!r} has length {e['length']!r}")
        if a > b:
            a, b = b, a
        eindex[eid] = len(edges)
        edges.append(Edge(eid, a, b, length))

    adjacency = [[] for _ in vertices]
    for k, e in enumerate(edges):
        adjacency[e.a].append((k, "a"))
        adjacency[e.b].append((k, "b"))
    isolated = [vertices[i] for i, adj in enumerate(adjacency) if not adj]
    if isolated and len(vertices) > 1:
        raise Disconnected(f"isolated vertices {isolated}")
    if not edges:
        raise GraphError("graph has no edges")

    # union-find over vertices
    parent = list(range(len(vertices)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for e in edges:
        parent[find(e.a)] = find(e.b)
    if len({find(i) for i in range(len(vertices))}) > 1:
        raise Disconnected("graph has more than one connected component")

    return MetricGraph(
        vertices=tuple(vertices),
        edges=tuple(edges),
        vertex_index=vindex,
        edge_index=eindex,
        adjacency=tuple(tuple(adj) for adj in adjacency),
    )


def load_graph(path):
    with open(path) as fh:
        return validate_graph(json.load(fh))


def terminal_vertices(g):
    """Degree-1 vertices paired with their unique incident edge id."""
    return [
        (g.vertices[i], g.edges[adj[0][0]].id)
        for i, adj in enumerate(g.adjacency)
        if len(adj) == 1
    ]


def total_length(g):
    return math.fsum(e.length for e in g.edges)


def vertex_end(g, vertex, edge_id):
    """Which end ("a" or "b") of ``edge_id`` sits at ``vertex``."""
    e = g.edge(edge_id)
    v = g._vidx(vertex)
    if e.a == v:
        return "a"
    if e.b == v:
        return "b"
    raise GraphError(f"vertex {vertex!r} is not an endpoint of edge {edge_id!r}")


# Small builders used by tests, examples and the CLI.

def interval(length, ids=("a", "b"), eid="e"):
    return validate_graph(
        {"vertices": list(ids), "edges": [{"id": eid, "from": ids[0], "to": ids[1], "length": length}]}
    )


def star(n, length, center="c"):
    lengths = [length] * n if not hasattr(length, "__len__") else list(length)
    leaves = [f"v{i + 1}" for i in range(n)]
    return validate_graph(
        {
            "vertices": [center] + leaves,
            "edges": [
                {"id": f"e{i + 1}", "from": center, "to": v, "length": l}
                for i, (v, l) in enumerate(zip(leaves, lengths))
            ],
        }
    )


def triangle_with_tail(side=1.0, tail=2.0):
    return validate_graph(
        {
            "vertices": ["a", "b", "c", "t"],
            "edges": [
                {"id": "ab", "from": "a", "to": "b", "length": side},
                {"id": "bc", "from": "b", "to": "c", "length": side},
                {"id": "ca", "from": "c", "to": "a", "length": side},
                {"id": "tail", "from": "a", "to": "t", "length": tail},
            ],
        }
    )
