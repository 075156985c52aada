import math

import numpy as np
import pytest
from conftest import l2_error_vs

from qgnls.errors import OnlyConstantBranchFound, PeakOnNonTerminalVertex, PeakSetMismatch
from qgnls.functionals import ProblemParams, constant, nehari_action, operators
from qgnls.graph import interval, star
from qgnls.mesh import DiscreteFunction, build_mesh, interpolate
from qgnls.profiles import PeakSpec, build_ansatz, m_infinity
from qgnls.solvers import (
    SolverConfig,
    continuation_sweep,
    least_action_solve,
    linear_kirchhoff_solve,
    newton_solve,
    peaked_solve,
)
from qgnls.spectral import linearized_operator, smallest_eigenpairs

# h proportional to lam^-2.25, matching h*sqrt(lam) = 0.1 at lam = 50
FINE = SolverConfig(c_mesh=0.1 * 50 ** 1.75, mesh_exponent=2.25)


def test_linear_solve_constants(tailed_triangle):
    m = build_mesh(tailed_triangle, 0.1)
    lam, c = 3.0, 1.7
    u = linear_kirchhoff_solve(m, lam, constant(m, lam * c))
    np.testing.assert_allclose(u.values, c, rtol=1e-12)


@pytest.mark.parametrize("graph", [interval(2.0), star(3, [1.0, 2.0, 0.5]), star(4, 1.0)])
def test_adjoint_identity(graph):
    m = build_mesh(graph, 0.05)
    lam = 2.5
    ops = operators(m)
    rng = np.random.default_rng(11)
    for _ in range(20):
        f = DiscreteFunction(m, rng.standard_normal(m.ndof))
        v = rng.standard_normal(m.ndof)
        u = linear_kirchhoff_solve(m, lam, f)
        lhs = u.values @ ((ops.K + lam * ops.M) @ v)
        rhs = f.values @ (ops.M @ v)
        assert abs(lhs - rhs) <= 1e-10 * (abs(rhs) + 1e-300 + np.linalg.norm(f.values) * np.linalg.norm(v) * 1e-3)


def test_manufactured_linear_solve():
    errs = []
    for n in (20, 40, 80):
        m = build_mesh(interval(1.0), 1.0 / n)
        f = interpolate(m, lambda e, x: (1 + math.pi ** 2) * np.cos(math.pi * x))
        u = linear_kirchhoff_solve(m, 1.0, f)
        errs.append(l2_error_vs(u, lambda e, x: np.cos(math.pi * x)))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.1)


def test_newton_constant_and_trivial(star3):
    m = build_mesh(star3, 0.1)
    params = ProblemParams(5.0, 3.0)
    rec = newton_solve(m, params, constant(m, math.sqrt(5.0)))
    assert rec.newton_iters <= 2 and rec.branch == "constant"
    rec0 = newton_solve(m, params, constant(m, 0.0))
    assert rec0.branch == "trivial" and rec0.nehari_action is None and rec0.peaks == []


def test_newton_from_ansatz(edge4):
    params = ProblemParams(100.0, 3.0)
    cfg = SolverConfig()
    m = build_mesh(edge4, cfg.h_target(100.0))
    W = build_ansatz(m, PeakSpec.at(["a"], 100.0), 3.0)
    rec = newton_solve(m, params, W, cfg)
    assert rec.residual_norm <= cfg.newton_tol * (1 + math.sqrt(rec.functionals.lambda_norm_sq))
    assert rec.u.values.min() >= -10 * cfg.newton_tol
    assert nehari_action(rec.u, params) == pytest.approx(rec.functionals.action_J, rel=1e-8)


def test_least_action_interval(edge4):
    rec = least_action_solve(edge4, ProblemParams(100.0, 3.0))
    assert rec.nehari_action == pytest.approx(2 / 3, rel=0.01)
    assert len(rec.peaks) == 1 and rec.peaks[0].is_vertex
    assert edge4.degree(rec.peaks[0].vertex) == 1


@pytest.mark.parametrize("lam", [100.0, 400.0])
def test_least_action_profile_claims(lam, edge4, star3, tailed_triangle):
    for g in (edge4, star3, tailed_triangle):
        rec = least_action_solve(g, ProblemParams(lam, 3.0))
        assert rec.branch == "least_action"
        assert len(rec.peaks) == 1
        pk = rec.peaks[0]
        assert pk.is_vertex and g.degree(pk.vertex) == 1
        assert pk.value >= 0.99 * math.sqrt(lam)


def test_star_least_action_below_multipeak(star3):
    params = ProblemParams(100.0, 3.0)
    la = least_action_solve(star3, params)
    multi = [peaked_solve(star3, params, ["v1", "v2", "v3"][:k]).record.nehari_action for k in (2, 3)]
    assert la.nehari_action < multi[0] < multi[1]
    assert la.nehari_action == pytest.approx(m_infinity(3), rel=0.01)


def test_random_restarts_without_terminal_edges(triangle):
    # no terminal vertex: the search starts from seeded random bumps
    cfg = SolverConfig(random_seed=3)
    rec = least_action_solve(triangle, ProblemParams(100.0, 3.0), cfg)
    assert rec.branch == "least_action" and rec.nehari_action < math.sqrt(100) * 0.25 * 3


def test_small_lambda_constant_only(edge4):
    try:
        rec = least_action_solve(edge4, ProblemParams(0.1, 3.0))
    except OnlyConstantBranchFound:
        return
    assert rec.branch == "least_action"


def test_solution_kirchhoff_balance():
    g = star(3, [1.0, 1.5, 2.0])
    params = ProblemParams(10.0, 3.0)
    sums = []
    for h in (0.05, 0.025, 0.0125):
        m = build_mesh(g, h)
        rec = peaked_solve(g, params, ["v3"], mesh=m).record
        total = sum((rec.u.on_edge(k)[1] - rec.u.on_edge(k)[0]) / m.h(k) for k in range(3))
        sums.append(abs(total))
    assert sums[1] < sums[0] and sums[2] < sums[1]


def test_nondegenerate_single_peak(edge4):
    for h in (0.01, 0.005):
        rec = peaked_solve(edge4, ProblemParams(100.0, 3.0), ["a"], mesh=build_mesh(edge4, h)).record
        op = linearized_operator(rec.mesh, rec.params, rec.u)
        ev = smallest_eigenpairs(op, 4).eigenvalues
        assert np.all(np.abs(ev) > 1e-4)


def test_peaked_errors(star3):
    params = ProblemParams(100.0, 3.0)
    with pytest.raises(PeakOnNonTerminalVertex):
        peaked_solve(star3, params, ["c"])
    m = build_mesh(star3, 0.01)
    other = build_ansatz(m, PeakSpec.at(["v2"], 100.0), 3.0)
    with pytest.raises(PeakSetMismatch) as info:
        peaked_solve(star3, params, ["v1"], mesh=m, init=other)
    assert info.value.found == ["v2"]


def test_single_edge_mass():
    rec = peaked_solve(interval(4.0), ProblemParams(400.0, 3.0), ["a"])
    assert rec.record.functionals.mass_sq == pytest.approx(2 * math.sqrt(400.0), rel=0.05)


def test_sweep_preconditions(edge4):
    with pytest.raises(ValueError):
        continuation_sweep(edge4, 3.0, [])
    with pytest.raises(ValueError):
        continuation_sweep(edge4, 3.0, [100, 50, 200])


def test_least_action_sweep_approaches_m_inf(edge4):
    cfg = SolverConfig(c_mesh=5.0, mesh_exponent=1.5)
    sw = continuation_sweep(edge4, 3.0, [50, 100, 200, 400, 800], "least_action", cfg)
    J = sw.action_values
    assert len(J) == 5
    gaps = [j - 2 / 3 for j in J]
    assert all(g > 0 for g in gaps)
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_critical_power_mass_constant(edge4):
    sw = continuation_sweep(edge4, 5.0, [50, 100, 200, 400, 800], "peaked", peaks=["a"])
    _, mass = sw.observable("mass_sq")
    assert max(mass) / min(mass) < 1.01


def test_unwarmed_parallel_sweep_matches_sequential(edge4):
    lams = [50, 100, 200]
    a = continuation_sweep(edge4, 3.0, lams, "peaked", peaks=["a"], warm_start=False, workers=3)
    b = continuation_sweep(edge4, 3.0, lams, "peaked", peaks=["a"], warm_start=False, workers=1)
    assert a.observable("mass_sq") == b.observable("mass_sq")


@pytest.mark.parametrize("p", [3.0, 5.0])
def test_correction_and_residual_beat_powers(edge4, p):
    sw = continuation_sweep(edge4, p, [50, 100, 200, 400], "peaked", FINE, peaks=["a"])
    for name in ("correction_norm", "residual_R"):
        lams, vals = sw.observable(name)
        assert len(vals) == 4
        for alpha in (1, 2):
            scaled = [v * l ** alpha for l, v in zip(lams, vals)]
            assert all(b < a for a, b in zip(scaled, scaled[1:])), (name, alpha, scaled)
