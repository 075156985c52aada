"""Soliton profile on the line, its rescalings, cutoffs and peaked ansatz."""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import GraphError, PeakOnNonTerminalVertex, SupportTooLong
from .graph import vertex_end
from .mesh import interpolate

DEFAULT_CUT_FRACTION = 0.9


def _check_p(p):
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")


def _log_cosh(y):
    y = np.abs(y)
    return y + np.log1p(np.exp(-2.0 * y)) - math.log(2.0)


def soliton_peak(p):
    """U(0) = ((p+1)/2)^(1/(p-1))."""
    _check_p(p)
    return ((p + 1) / 2.0) ** (1.0 / (p - 1))


def soliton(p, x):
    """Positive even solution of -U'' + U = U^p on the line.

    U(x) = ((p+1)/2)^(1/(p-1)) cosh((p-1)x/2)^(-2/(p-1)), evaluated in log
    form so large |x| underflows gracefully instead of overflowing cosh.
    """
    _check_p(p)
    x = np.asarray(x, dtype=float)
    logu = math.log((p + 1) / 2.0) / (p - 1) - 2.0 / (p - 1) * _log_cosh(0.5 * (p - 1) * x)
    out = np.exp(logu)
    return float(out) if out.ndim == 0 else out


def soliton_derivative(p, x):
    x = np.asarray(x, dtype=float)
    out = -soliton(p, x) * np.tanh(0.5 * (p - 1) * x)
    return float(out) if np.ndim(out) == 0 else out


def tail_constant(p):
    """C0 with U(x) <= C0 exp(-|x|)."""
    return soliton_peak(p) * 2.0 ** (2.0 / (p - 1))


def quadrature_cutoff(p, tol=1e-12):
    """X such that the tails of U^2 and U'^2 beyond X are below ``tol``."""
    c0 = tail_constant(p)
    # int_X^inf (U^2 + U'^2) <= C0^2 exp(-2X)
    return max(20.0, 0.5 * math.log(c0 * c0 / tol))


@lru_cache(maxsize=None)
def _norms(p, X):
    opts = dict(epsabs=1e-15, epsrel=1e-13, limit=400)
    u2, _ = quad(lambda x: soliton(p, x) ** 2, 0.0, X, **opts)
    du2, _ = quad(lambda x: soliton_derivative(p, x) ** 2, 0.0, X, **opts)
    return u2, du2


def soliton_norms(p, X=None):
    """(||U||^2_{H^1(R)}, |U|^2_{L^2(R+)}, m_inf) for exponent p."""
    _check_p(p)
    X = quadrature_cutoff(p) if X is None else float(X)
    u2, du2 = _norms(float(p), X)
    h1 = 2.0 * (u2 + du2)
    return h1, u2, 0.5 * (0.5 - 1.0 / (p + 1)) * h1


def m_infinity(p):
    return soliton_norms(p)[2]


def rescaled_soliton(p, lam, x):
    """lam^(1/(p-1)) U(sqrt(lam) x)."""
    return lam ** (1.0 / (p - 1)) * soliton(p, math.sqrt(lam) * np.asarray(x, dtype=float))


def cutoff(x, l_cut):
    """C^1 cutoff: 1 on [0, l/2], 0 beyond l, raised-cosine ramp in between."""
    if not l_cut > 0:
        raise ValueError("l_cut must be positive")
    x = np.asarray(x, dtype=float)
    ramp = 0.5 * (1.0 + np.cos(np.pi * (2.0 * x / l_cut - 1.0)))
    out = np.where(x <= 0.5 * l_cut, 1.0, np.where(x >= l_cut, 0.0, ramp))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PeakSpec:
    """Peaks at terminal vertices; ``peaks`` holds (vertex id, l_cut or None)."""

    peaks: tuple
    lam: float

    @classmethod
    def at(cls, vertices, lam, l_cut=None):
        return cls(tuple((v, l_cut) for v in vertices), float(lam))

    @property
    def vertices(self):
        return [v for v, _ in self.peaks]

    def resolve(self, g):
        """[(vertex, edge id, l_cut)] after checking against ``g``."""
        term = {}
        for i, adj in enumerate(g.adjacency):
            if len(adj) == 1:
                term[g.vertices[i]] = g.edges[adj[0][0]]
        chosen = []
        for v, _ in self.peaks:
            if v not in g.vertex_index:
                raise GraphError(f"unknown vertex {v!r}")
            if v not in term:
                raise PeakOnNonTerminalVertex(f"vertex {v!r} has degree {g.degree(v)}, not 1")
            chosen.append(term[v])
        ids = [e.id for e in chosen]
        if len(set(ids)) != len(ids):
            raise SupportTooLong("two peaks requested on the same edge")
        if len(set(self.vertices)) != len(self.vertices):
            raise SupportTooLong("duplicate peak vertex")
        default = DEFAULT_CUT_FRACTION * min(e.length for e in chosen) if chosen else None
        out = []
        for (v, lc), e in zip(self.peaks, chosen):
            lc = default if lc is None else float(lc)
            if not 0 < lc < e.length:
                raise SupportTooLong(f"cutoff length {lc} must lie in (0, {e.length}) on edge {e.id!r}")
            out.append((v, e.id, lc))
        return out


def distance_from(g, vertex, edge_id, x):
    """Arc length from ``vertex`` along ``edge_id`` for edge coordinates ``x``."""
    end = vertex_end(g, vertex, edge_id)
    return x if end == "a" else g.edge(edge_id).length - x


def build_ansatz(mesh, peaks, p):
    """Nodal interpolant of sum_i cutoff_i * rescaled soliton at vertex v_i."""
    g = mesh.graph
    resolved = peaks.resolve(g)
    by_edge = {eid: (v, lc) for v, eid, lc in resolved}

    def f(e, x):
        if e.id not in by_edge:
            return np.zeros_like(x)
        v, lc = by_edge[e.id]
        s = distance_from(g, v, e.id, x)
        return cutoff(s, lc) * rescaled_soliton(p, peaks.lam, s)

    return interpolate(mesh, f)
