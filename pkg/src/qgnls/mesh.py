"""P1 finite elements on metric graphs.

Each edge carries a uniform mesh. Edge-end nodes share the degree of freedom
of their vertex, which is all that continuity on the graph requires; the
Kirchhoff condition is the natural boundary condition of the weak form and is
never imposed explicitly.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import GraphError, HTooLarge, OutOfRange

# 4-point Gauss-Legendre rule mapped to [0, 1]
_GX, _GW = np.polynomial.legendre.leggauss(4)
GAUSS_POINTS = 0.5 * (_GX + 1.0)
GAUSS_WEIGHTS = 0.5 * _GW


@dataclass(frozen=True, eq=False)
class Mesh:
    graph: object
    h_target: float
    nodes_per_edge: tuple
    # per edge: int array of global dofs along the edge, from end a to end b
    edge_dofs: tuple = field(repr=False)
    ndof: int = 0
    # flattened element table
    elem_i: np.ndarray = field(default=None, repr=False)
    elem_j: np.ndarray = field(default=None, repr=False)
    elem_h: np.ndarray = field(default=None, repr=False)

    def h(self, k):
        e = self.graph.edges[k]
        return e.length / (self.nodes_per_edge[k] - 1)

    @property
    def h_max(self):
        return float(self.elem_h.max())

    def edge_x(self, k):
        e = self.graph.edges[k]
        return np.linspace(0.0, e.length, self.nodes_per_edge[k])

    def vertex_dof(self, v):
        return self.graph._vidx(v)

    def descriptor(self):
        return {
            "h_target": self.h_target,
            "h_max": self.h_max,
            "ndof": self.ndof,
            "nodes_per_edge": {e.id: n for e, n in zip(self.graph.edges, self.nodes_per_edge)},
            "vertex_index": {v: i for i, v in enumerate(self.graph.vertices)},
            "edge_index": {e.id: k for k, e in enumerate(self.graph.edges)},
        }


@dataclass(eq=False)
class DiscreteFunction:
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.ndof,):
            raise ValueError(f"expected {self.mesh.ndof} values, got {self.values.shape}")

    def on_edge(self, k):
        return self.values[self.mesh.edge_dofs[k]]

    def __add__(self, other):
        return DiscreteFunction(self.mesh, self.values + _vals(other))

    def __sub__(self, other):
        return DiscreteFunction(self.mesh, self.values - _vals(other))

    def __mul__(self, a):
        return DiscreteFunction(self.mesh, self.values * a)

    __rmul__ = __mul__


def _vals(u):
    return u.values if isinstance(u, DiscreteFunction) else np.asarray(u, dtype=float)


def build_mesh(g, h_target, nodes=None):
    """Uniform mesh with ``max(2, ceil(l_e / h_target) + 1)`` nodes per edge.

    ``nodes`` overrides the per-edge node counts (used when reloading data).
    """
    if not h_target > 0:
        raise ValueError("h_target must be positive")
    if nodes is None:
        nodes = [max(2, math.ceil(e.length / h_target - 1e-9) + 1) for e in g.edges]
    for e, n in zip(g.edges, nodes):
        if n < 2:
            raise HTooLarge(f"edge {e.id!r} would get fewer than 2 nodes")
    nv = len(g.vertices)
    next_dof = nv
    edge_dofs = []
    ei, ej, eh = [], [], []
    for e, n in zip(g.edges, nodes):
        dofs = np.empty(n, dtype=np.int64)
        dofs[0], dofs[-1] = e.a, e.b
        dofs[1:-1] = np.arange(next_dof, next_dof + n - 2)
        next_dof += n - 2
        edge_dofs.append(dofs)
        ei.append(dofs[:-1])
        ej.append(dofs[1:])
        eh.append(np.full(n - 1, e.length / (n - 1)))
    return Mesh(
        graph=g,
        h_target=float(h_target),
        nodes_per_edge=tuple(nodes),
        edge_dofs=tuple(edge_dofs),
        ndof=next_dof,
        elem_i=np.concatenate(ei),
        elem_j=np.concatenate(ej),
        elem_h=np.concatenate(eh),
    )


def _assemble(m, kii, kij):
    """Symmetric 2x2 element matrices [[kii, kij], [kij, kii]] -> global CSR."""
    rows = np.concatenate([m.elem_i, m.elem_j, m.elem_i, m.elem_j])
    cols = np.concatenate([m.elem_i, m.elem_j, m.elem_j, m.elem_i])
    data = np.concatenate([kii, kii, kij, kij])
    return sp.csr_matrix((data, (rows, cols)), shape=(m.ndof, m.ndof))


def assemble_stiffness(m):
    inv = 1.0 / m.elem_h
    return _assemble(m, inv, -inv)


def assemble_mass(m):
    return _assemble(m, m.elem_h / 3.0, m.elem_h / 6.0)


def quad_values(m, u):
    """Interpolated values at the Gauss points, shape (n_elem, 4)."""
    v = _vals(u)
    ui, uj = v[m.elem_i], v[m.elem_j]
    return ui[:, None] * (1.0 - GAUSS_POINTS) + uj[:, None] * GAUSS_POINTS


def integrate(m, qvals):
    """Integral over the graph of a function sampled at Gauss points."""
    return math.fsum((qvals @ GAUSS_WEIGHTS) * m.elem_h)


def load_vector(m, qvals):
    """Entries int g * phi_i for g sampled at the Gauss points."""
    wi = (qvals * (GAUSS_WEIGHTS * (1.0 - GAUSS_POINTS))).sum(axis=1) * m.elem_h
    wj = (qvals * (GAUSS_WEIGHTS * GAUSS_POINTS)).sum(axis=1) * m.elem_h
    out = np.zeros(m.ndof)
    np.add.at(out, m.elem_i, wi)
    np.add.at(out, m.elem_j, wj)
    return out


def weighted_mass(m, qvals):
    """Matrix with entries int c * phi_i phi_j for c sampled at Gauss points."""
    s, t = 1.0 - GAUSS_POINTS, GAUSS_POINTS
    kii = (qvals * (GAUSS_WEIGHTS * s * s)).sum(axis=1) * m.elem_h
    kjj = (qvals * (GAUSS_WEIGHTS * t * t)).sum(axis=1) * m.elem_h
    kij = (qvals * (GAUSS_WEIGHTS * s * t)).sum(axis=1) * m.elem_h
    rows = np.concatenate([m.elem_i, m.elem_j, m.elem_i, m.elem_j])
    cols = np.concatenate([m.elem_i, m.elem_j, m.elem_j, m.elem_i])
    data = np.concatenate([kii, kjj, kij, kij])
    return sp.csr_matrix((data, (rows, cols)), shape=(m.ndof, m.ndof))


def lambda_norm(u, lam, K=None, M=None):
    m = u.mesh
    K = assemble_stiffness(m) if K is None else K
    M = assemble_mass(m) if M is None else M
    v = u.values
    return math.sqrt(v @ (K @ v) + lam * (v @ (M @ v)))


def lp_norm(u, q):
    if q < 1:
        raise ValueError("q must be >= 1")
    return integrate(u.mesh, np.abs(quad_values(u.mesh, u)) ** q) ** (1.0 / q)


def interpolate(m, func):
    """Nodal interpolant of ``func(edge, x)``; x is the array of edge nodes.

    Vertex values are taken from the first edge touching each vertex, so
    ``func`` must itself be continuous at vertices.
    """
    vals = np.zeros(m.ndof)
    for k, e in enumerate(m.graph.edges):
        vals[m.edge_dofs[k]] = np.asarray(func(e, m.edge_x(k)), dtype=float)
    # re-write vertex dofs from the first incident edge in edge order
    seen = set()
    for k, e in enumerate(m.graph.edges):
        x = m.edge_x(k)
        ends = func(e, np.array([x[0], x[-1]]))
        for dof, val in ((e.a, ends[0]), (e.b, ends[1])):
            if dof not in seen:
                vals[dof] = val
                seen.add(dof)
    return DiscreteFunction(m, vals)


def evaluate(u, at):
    m = u.mesh
    k = m.graph.edge_index.get(at.edge)
    if k is None:
        raise OutOfRange(f"unknown edge {at.edge!r}")
    length = m.graph.edges[k].length
    if not (-1e-12 * length <= at.x <= length * (1 + 1e-12)):
        raise OutOfRange(f"x={at.x} outside [0, {length}] on edge {at.edge!r}")
    vals = u.on_edge(k)
    n = len(vals)
    s = min(max(at.x, 0.0), length) / m.h(k)
    j = min(int(s), n - 2)
    t = s - j
    return float(vals[j] * (1.0 - t) + vals[j + 1] * t)


def resample(u, new_mesh):
    """Piecewise-linear transfer of ``u`` onto another mesh of the same graph."""
    if new_mesh.graph != u.mesh.graph:
        raise GraphError("meshes live on different graphs")

    def f(e, x):
        k = u.mesh.graph.edge_index[e.id]
        return np.interp(x, u.mesh.edge_x(k), u.on_edge(k))

    return interpolate(new_mesh, f)


def _fmt(x):
    return repr(float(x))


def write_csv(u, path):
    """Write edge samples (edge_id, x, value) and a companion vertex table."""
    m = u.mesh
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge_id", "x", "value"])
        for k, e in enumerate(m.graph.edges):
            for x, val in zip(m.edge_x(k), u.on_edge(k)):
                w.writerow([e.id, _fmt(x), _fmt(val)])
    vpath = _vertex_table_path(path)
    with open(vpath, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vertex_id", "value"])
        for i, v in enumerate(m.graph.vertices):
            w.writerow([v, _fmt(u.values[i])])
    return path, vpath


def _vertex_table_path(path):
    path = str(path)
    stem = path[:-4] if path.endswith(".csv") else path
    return stem + "_vertices.csv"


def read_csv(path, g):
    """Rebuild a DiscreteFunction on ``g`` from a file written by write_csv."""
    per_edge = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            per_edge.setdefault(row["edge_id"], []).append((float(row["x"]), float(row["value"])))
    nodes = []
    for e in g.edges:
        if e.id not in per_edge:
            raise GraphError(f"edge {e.id!r} missing from {path}")
        nodes.append(len(per_edge[e.id]))
    h = max(e.length / (n - 1) for e, n in zip(g.edges, nodes))
    m = build_mesh(g, h, nodes=nodes)
    vals = np.zeros(m.ndof)
    for k, e in enumerate(g.edges):
        vals[m.edge_dofs[k]] = [v for _, v in sorted(per_edge[e.id])]
    return DiscreteFunction(m, vals)
