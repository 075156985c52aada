"""Stationary NLS standing waves on compact metric graphs with Kirchhoff vertices."""

__version__ = "0.1.0"

from .graph import MetricGraph, validate_graph, load_graph, terminal_vertices, total_length  # noqa: E402,F401
from .functionals import ProblemParams  # noqa: E402,F401
from .solvers import (  # noqa: E402,F401
    SolverConfig,
    continuation_sweep,
    least_action_solve,
    linear_kirchhoff_solve,
    newton_solve,
    peaked_solve,
)
