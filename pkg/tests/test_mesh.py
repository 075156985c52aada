import math

import numpy as np
import pytest
from conftest import l2_error_vs

from qgnls.errors import OutOfRange
from qgnls.functionals import operators
from qgnls.graph import EdgeCoordinate, interval, star
from qgnls.mesh import (
    DiscreteFunction,
    assemble_mass,
    assemble_stiffness,
    build_mesh,
    evaluate,
    interpolate,
    lambda_norm,
    lp_norm,
    read_csv,
    resample,
    write_csv,
)
from qgnls.solvers import linear_kirchhoff_solve


def test_dof_counts(edge4, star3, triangle):
    m = build_mesh(edge4, 1.0)
    assert m.nodes_per_edge == (5,) and m.ndof == 5
    m = build_mesh(star3, 1.0)
    assert m.nodes_per_edge == (3, 3, 3) and m.ndof == 7
    m = build_mesh(triangle, 0.5)
    assert m.ndof == 6
    for g, h in [(edge4, 0.3), (star3, 0.7), (triangle, 0.11)]:
        m = build_mesh(g, h)
        assert m.ndof == sum(n - 2 for n in m.nodes_per_edge) + len(g.vertices)
        assert m.h_max <= h


def test_edge_ends_share_vertex_dofs(star3):
    m = build_mesh(star3, 0.5)
    for k, e in enumerate(star3.edges):
        assert m.edge_dofs[k][0] == e.a and m.edge_dofs[k][-1] == e.b


def test_unit_element(unit_edge):
    m = build_mesh(unit_edge, 1.0)
    np.testing.assert_allclose(assemble_stiffness(m).toarray(), [[1, -1], [-1, 1]])
    np.testing.assert_allclose(assemble_mass(m).toarray(), [[1 / 3, 1 / 6], [1 / 6, 1 / 3]])


def test_constants(tailed_triangle):
    m = build_mesh(tailed_triangle, 0.13)
    one = np.ones(m.ndof)
    K, M = assemble_stiffness(m), assemble_mass(m)
    assert abs(one @ K @ one) < 1e-12
    assert one @ M @ one == pytest.approx(5.0, rel=1e-13)
    assert abs(K - K.T).max() == 0 and abs(M - M.T).max() == 0
    assert np.linalg.eigvalsh(M.toarray()).min() > 0


def test_norms(edge4, unit_edge):
    m = build_mesh(edge4, 0.5)
    u = DiscreteFunction(m, np.ones(m.ndof))
    assert lambda_norm(u, 1.0) == pytest.approx(2.0, rel=1e-14)
    for q in (1, 2, 3.5):
        assert lp_norm(u * 1.7, q) == pytest.approx(1.7 * 4 ** (1 / q), rel=1e-13)
    m1 = build_mesh(unit_edge, 1.0)
    hat = DiscreteFunction(m1, [1.0, 0.0])
    assert lp_norm(hat, 2) ** 2 == pytest.approx(1 / 3, rel=1e-14)


def test_lambda_norm_matches_operator(star3):
    m = build_mesh(star3, 0.2)
    v = np.random.default_rng(1).standard_normal(m.ndof)
    ops = operators(m)
    A = ops.K + 3.0 * ops.M
    assert lambda_norm(DiscreteFunction(m, v), 3.0) ** 2 == pytest.approx(v @ (A @ v), rel=1e-14)


def test_evaluate(edge4):
    m = build_mesh(edge4, 0.5)
    u = interpolate(m, lambda e, x: x)
    assert evaluate(u, EdgeCoordinate("e", 2.0)) == pytest.approx(2.0)
    assert evaluate(u, EdgeCoordinate("e", 0.0)) == u.values[0]
    m1 = build_mesh(interval(1.0), 1.0)
    assert evaluate(DiscreteFunction(m1, [1.0, 3.0]), EdgeCoordinate("e", 0.5)) == pytest.approx(2.0)
    with pytest.raises(OutOfRange):
        evaluate(u, EdgeCoordinate("e", 4.5))
    with pytest.raises(OutOfRange):
        evaluate(u, EdgeCoordinate("nope", 1.0))


def _manufactured_error(n_cells, length=1.0):
    g = interval(length)
    m = build_mesh(g, length / n_cells)
    k = math.pi / length
    f = interpolate(m, lambda e, x: (1 + k * k) * np.cos(k * x))
    u = linear_kirchhoff_solve(m, 1.0, f)
    return l2_error_vs(u, lambda e, x: np.cos(k * x))


def test_fem_order_two():
    errs = [_manufactured_error(n) for n in (10, 20, 40, 80, 160)]
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(abs(r - 2.0) <= 0.1 for r in rates), rates


def test_kirchhoff_is_natural():
    # one-sided derivative sums at the centre shrink with h
    g = star(3, [1.0, 1.5, 2.0])
    sums = []
    for h in (0.1, 0.05, 0.025, 0.0125):
        m = build_mesh(g, h)
        f = interpolate(m, lambda e, x: np.cos(x) * (1 + int(e.id[1:])) + x)
        u = linear_kirchhoff_solve(m, 2.0, f)
        total = 0.0
        for k, e in enumerate(g.edges):
            vals, x = u.on_edge(k), m.edge_x(k)
            total += (vals[1] - vals[0]) / (x[1] - x[0])
        sums.append(abs(total))
    assert all(b < a for a, b in zip(sums, sums[1:])), sums
    assert sums[-1] < 0.25 * sums[0]  # O(h) over an 8x refinement


def test_csv_roundtrip(tmp_path, star3):
    m = build_mesh(star3, 0.3)
    u = DiscreteFunction(m, np.random.default_rng(2).standard_normal(m.ndof))
    path, vpath = write_csv(u, tmp_path / "u.csv")
    v = read_csv(path, star3)
    assert v.mesh.nodes_per_edge == m.nodes_per_edge
    np.testing.assert_array_equal(v.values, u.values)
    assert open(vpath).readline().strip() == "vertex_id,value"


def test_resample_linear_exact(edge4):
    u = interpolate(build_mesh(edge4, 0.5), lambda e, x: 3 * x - 1)
    v = resample(u, build_mesh(edge4, 0.07))
    np.testing.assert_allclose(v.values[v.mesh.edge_dofs[0]], 3 * v.mesh.edge_x(0) - 1, atol=1e-13)
