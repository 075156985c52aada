"""Linearized operator around a state and its low generalized spectrum."""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import EigenNoConvergence
from .functionals import hessian, operators
from .mesh import DiscreteFunction, interpolate
from .profiles import distance_from, rescaled_soliton, soliton_derivative

KERNEL_TOL = 1e-3
DENSE_LIMIT = 400


@dataclass(eq=False)
class LinearizedOperator:
    """A = K + lam M - P(u) against B = M; A is exactly functionals.hessian(u)."""

    A: object
    B: object
    params: object
    base: DiscreteFunction

    @property
    def mesh(self):
        return self.base.mesh

    def lower_bound(self):
        """Strict lower bound of the spectrum: lam - p max(u+)^(p-1) - 1."""
        top = max(float(self.base.values.max()), 0.0)
        return self.params.lam - self.params.p * top ** (self.params.p - 1) - 1.0


@dataclass(eq=False)
class EigenReport:
    eigenvalues: np.ndarray
    vectors: np.ndarray = field(repr=False)
    mesh: object = field(repr=False, default=None)

    def kernel_count(self, tol=KERNEL_TOL):
        return kernel_count(self, tol)

    def vector(self, i):
        return DiscreteFunction(self.mesh, self.vectors[:, i])

    def to_dict(self, tol=KERNEL_TOL):
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "kernel_tol": tol,
            "kernel_count": self.kernel_count(tol),
        }


def linearized_operator(mesh, params, u):
    if u.mesh is not mesh:
        raise ValueError("state lives on a different mesh")
    return LinearizedOperator(hessian(u, params), operators(mesh).M.tocsc(), params, u)


def _b_orthonormalize(V, B):
    G = V.T @ (B @ V)
    L = np.linalg.cholesky(0.5 * (G + G.T))
    return np.linalg.solve(L, V.T).T


def smallest_eigenpairs(op, k, shift=None, seed=0):
    """k algebraically smallest eigenpairs of A v = mu B v, B-orthonormal.

    Shift-invert Lanczos about ``shift``; the default shift sits strictly
    below the whole spectrum so the eigenvalues nearest to it are the
    smallest ones. Small systems go through a dense solver.
    """
    n = op.A.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < {n}, got {k}")
    if n <= DENSE_LIMIT or k >= n - 1:
        w, V = scipy.linalg.eigh(op.A.toarray(), op.B.toarray())
        w, V = w[:k], V[:, :k]
    else:
        sigma = op.lower_bound() if shift is None else shift
        # seeded generic start vector: a symmetric one would never reach
        # antisymmetric modes such as the star kernel
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            w, V = eigsh(op.A, k=k, M=op.B, sigma=sigma, which="LM", v0=v0, tol=1e-14, maxiter=5000)
        except ArpackNoConvergence as exc:
            raise EigenNoConvergence(str(exc)) from None
        order = np.argsort(w)
        w, V = w[order], V[:, order]
        V = _b_orthonormalize(V, op.B)
    # fix the sign so the largest-magnitude entry is positive
    idx = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[idx, np.arange(V.shape[1])])
    return EigenReport(np.asarray(w, dtype=float), V, op.mesh)


def kernel_count(report, tol=KERNEL_TOL):
    if not tol > 0:
        raise ValueError("tol must be positive")
    return int(np.sum(np.abs(report.eigenvalues) < tol))


def eigen_residual(op, report, i):
    """||A v - mu B v|| / ||B v|| for the i-th pair."""
    v = report.vectors[:, i]
    Bv = op.B @ v
    return float(np.linalg.norm(op.A @ v - report.eigenvalues[i] * Bv) / np.linalg.norm(Bv))


# -- model states -----------------------------------------------------------

def star_state(mesh, p, center, lam=1.0):
    """Rescaled soliton U_lam(distance from ``center``) on every incident edge, 0 elsewhere."""
    g = mesh.graph
    incident = {g.edges[k].id for k, _ in g.adjacency[g.vertex_index[center]]}

    def f(e, x):
        if e.id not in incident:
            return np.zeros_like(x)
        return rescaled_soliton(p, lam, distance_from(g, center, e.id, x))

    return interpolate(mesh, f)


def shifted_soliton_state(mesh, p, edge, x0, lam=1.0):
    """Rescaled soliton centred at ``x0`` on ``edge`` (edge coordinates), 0 elsewhere."""
    k = mesh.graph.edge_index[edge]
    vals = np.zeros(mesh.ndof)
    vals[mesh.edge_dofs[k]] = rescaled_soliton(p, lam, np.abs(mesh.edge_x(k) - x0))
    return DiscreteFunction(mesh, vals)


def edge_projection(mesh, vec, edge, profile):
    """Coefficient c with vec|_edge ~ c * profile, by trapezoidal L2 projection."""
    k = mesh.graph.edge_index[edge]
    x = mesh.edge_x(k)
    y = vec[mesh.edge_dofs[k]]
    q = np.asarray(profile(x), dtype=float)
    return float(np.trapezoid(y * q, x) / np.trapezoid(q * q, x))


def star_kernel_coefficients(report, p, center, tol=KERNEL_TOL, lam=1.0):
    """Normalized per-edge U' coefficients of each near-kernel eigenvector.

    Returns a list (one per near-kernel vector) of dicts edge id -> c_e with
    sum c_e^2 = 1; kernel modes satisfy the sum rule sum c_e ~ 0.
    """
    mesh = report.mesh
    g = mesh.graph
    edges = [g.edges[k].id for k, _ in g.adjacency[g.vertex_index[center]]]
    scale = math.sqrt(lam)
    out = []
    for i in np.nonzero(np.abs(report.eigenvalues) < tol)[0]:
        vec = report.vectors[:, i]
        coeffs = {}
        for eid in edges:
            def prof(x, eid=eid):
                s = distance_from(g, center, eid, x)
                return soliton_derivative(p, scale * s)
            coeffs[eid] = edge_projection(mesh, vec, eid, prof)
        norm = math.sqrt(sum(c * c for c in coeffs.values()))
        out.append({e: c / norm for e, c in coeffs.items()})
    return out


def correlation(mesh, a, b):
    """|<a, b>_M| / (|a|_M |b|_M)."""
    M = operators(mesh).M
    a = a.values if isinstance(a, DiscreteFunction) else np.asarray(a)
    b = b.values if isinstance(b, DiscreteFunction) else np.asarray(b)
    return float(abs(a @ (M @ b)) / math.sqrt((a @ (M @ a)) * (b @ (M @ b))))
