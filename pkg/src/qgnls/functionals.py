"""Action functionals, their derivatives, and the Nehari projection.

All nonlinear integrals use the 4-point Gauss rule on interpolated values, so
``gradient`` is the exact derivative of ``action`` and ``hessian`` the exact
derivative of ``gradient`` for the discrete problem.
"""

import math
import weakref
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NoPositivePart, NotOnNehari
from .mesh import (
    DiscreteFunction,
    assemble_mass,
    assemble_stiffness,
    integrate,
    load_vector,
    quad_values,
    weighted_mass,
)

NEHARI_TOL = 1e-8


@dataclass(frozen=True)
class ProblemParams:
    lam: float
    p: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")

    @property
    def renorm(self):
        """Factor lambda^(1/2 - (p+1)/(p-1)) turning I+ into J_lambda."""
        return self.lam ** (0.5 - (self.p + 1) / (self.p - 1))

    @property
    def constant_level(self):
        """The positive constant solution lambda^(1/(p-1))."""
        return self.lam ** (1.0 / (self.p - 1))


@dataclass(frozen=True)
class FunctionalReport:
    action_I: float
    action_J: float
    mass_sq: float
    lambda_norm_sq: float
    nehari_defect: float  # relative: (||u||^2 - |u+|^{p+1}) / ||u||^2

    def to_dict(self):
        return asdict(self)


class _Operators:
    __slots__ = ("K", "M", "_shifted", "__weakref__")

    def __init__(self, mesh):
        self.K = assemble_stiffness(mesh)
        self.M = assemble_mass(mesh)
        self._shifted = {}

    def shifted(self, lam):
        A = self._shifted.get(lam)
        if A is None:
            A = (self.K + lam * self.M).tocsc()
            self._shifted[lam] = A
        return A


_OPS = weakref.WeakKeyDictionary()


def operators(mesh):
    """Cached stiffness and mass matrices of a mesh."""
    ops = _OPS.get(mesh)
    if ops is None:
        ops = _OPS[mesh] = _Operators(mesh)
    return ops


def _pos(v):
    return np.maximum(v, 0.0)


def lambda_norm_sq(u, lam):
    ops = operators(u.mesh)
    v = u.values
    return float(v @ (ops.K @ v) + lam * (v @ (ops.M @ v)))


def positive_power_integral(u, q):
    """int (u+)^q over the graph."""
    return integrate(u.mesh, _pos(quad_values(u.mesh, u)) ** q)


def action(u, params):
    """I+(u) = 1/2 int u'^2 + lam/2 int u^2 - 1/(p+1) int (u+)^(p+1)."""
    p = params.p
    return 0.5 * lambda_norm_sq(u, params.lam) - positive_power_integral(u, p + 1) / (p + 1)


def renormalized_action(u, params):
    return params.renorm * action(u, params)


def nonlinear_load(u, p):
    """Vector with entries int (u+)^p phi_i."""
    return load_vector(u.mesh, _pos(quad_values(u.mesh, u)) ** p)


def gradient(u, params):
    ops = operators(u.mesh)
    return ops.shifted(params.lam) @ u.values - nonlinear_load(u, params.p)


def hessian(u, params):
    p = params.p
    ops = operators(u.mesh)
    weight = p * _pos(quad_values(u.mesh, u)) ** (p - 1)
    return (ops.shifted(params.lam) - weighted_mass(u.mesh, weight)).tocsc()


def nehari_scale(u, params):
    """Scalar t > 0 with t*u on the Nehari manifold."""
    p = params.p
    pos = positive_power_integral(u, p + 1)
    if not pos > 0:
        raise NoPositivePart("u has no positive part; the Nehari ray does not meet the manifold")
    return (lambda_norm_sq(u, params.lam) / pos) ** (1.0 / (p - 1))


def nehari_project(u, params):
    return u * nehari_scale(u, params)


def nehari_defect(u, params):
    """Relative defect (||u||^2 - |u+|^{p+1}_{p+1}) / ||u||^2."""
    nsq = lambda_norm_sq(u, params.lam)
    if nsq == 0:
        return 0.0
    return (nsq - positive_power_integral(u, params.p + 1)) / nsq


def nehari_action(u, params, tol=NEHARI_TOL):
    """J restricted to the Nehari manifold: renorm * (1/2 - 1/(p+1)) ||u||^2."""
    d = nehari_defect(u, params)
    if abs(d) > tol or not np.any(u.values):
        raise NotOnNehari(f"relative Nehari defect {d:.3e} exceeds {tol:.1e}")
    p = params.p
    return params.renorm * (0.5 - 1.0 / (p + 1)) * lambda_norm_sq(u, params.lam)


def constant_branch_action(params, total_len):
    """Nehari action of the constant solution, lam^(1/2) (1/2 - 1/(p+1)) |G|."""
    return math.sqrt(params.lam) * (0.5 - 1.0 / (params.p + 1)) * total_len


def report(u, params):
    nsq = lambda_norm_sq(u, params.lam)
    I = action(u, params)
    return FunctionalReport(
        action_I=I,
        action_J=params.renorm * I,
        mass_sq=float(u.values @ (operators(u.mesh).M @ u.values)),
        lambda_norm_sq=nsq,
        nehari_defect=nehari_defect(u, params),
    )


def constant(mesh, value):
    return DiscreteFunction(mesh, np.full(mesh.ndof, float(value)))
