import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import grid_minimum, random_qp
from sprc.errors import ConfigurationError
from sprc.qpsolver import INFEASIBLE, OPTIMAL, dump_problem, load_problem, objective, solve


def test_clipped_parabola():
    sol = solve(np.array([[1.0]]), np.array([-3.0]), np.array([[1.0]]), np.array([1.0]))
    assert sol.status == OPTIMAL
    assert sol.u_star[0] == pytest.approx(1.0, abs=1e-12)
    assert sol.active_rows == frozenset({0})
    assert sol.multipliers[0] == pytest.approx(4.0)


def test_unconstrained_normal_equations():
    rng = np.random.default_rng(0)
    H, f, _, _ = random_qp(rng, 5, 0)
    sol = solve(H, f)
    np.testing.assert_allclose(sol.u_star, -np.linalg.solve(H, f), atol=1e-12)


def test_inactive_constraints_give_unconstrained_point():
    H = np.eye(2)
    f = np.array([0.1, -0.2])
    sol = solve(H, f, np.eye(2), np.array([5.0, 5.0]))
    np.testing.assert_allclose(sol.u_star, [-0.1, 0.2], atol=1e-14)
    assert not sol.active_rows


@pytest.mark.parametrize("seed", range(6))
def test_matches_grid_oracle(seed):
    H, f, G, W = random_qp(np.random.default_rng(seed), 2, 4, box=True)
    sol = solve(H, f, G, W)
    assert sol.ok
    assert objective(H, f, sol.u_star) <= grid_minimum(H, f) + 2e-3


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 12), st.integers(0, 60))
def test_kkt_and_no_better_feasible_point(seed, n, m):
    rng = np.random.default_rng(seed)
    H, f, G, W = random_qp(rng, n, m)
    sol = solve(H, f, G, W)
    assert sol.ok
    assert sol.kkt_residual <= 1e-7
    best = objective(H, f, sol.u_star)
    for _ in range(50):
        x = sol.u_star + 0.3 * rng.standard_normal(n)
        if m == 0 or np.all(G @ x <= W):
            assert objective(H, f, x) >= best - 1e-9


def test_deterministic():
    H, f, G, W = random_qp(np.random.default_rng(4), 8, 40)
    a, b = solve(H, f, G, W), solve(H, f, G, W)
    np.testing.assert_array_equal(a.u_star, b.u_star)
    assert a.active_rows == b.active_rows


def test_scaling_invariance():
    H, f, G, W = random_qp(np.random.default_rng(5), 6, 30)
    a = solve(H, f, G, W)
    b = solve(1e3 * H, 1e3 * f, G, W)
    np.testing.assert_allclose(a.u_star, b.u_star, atol=1e-9)


def test_redundant_rows_at_vertex():
    # more active rows than variables, the degenerate case that once broke the solver
    H = np.eye(2)
    f = np.array([-5.0, -5.0])
    G = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0], [1.0, 2.0]])
    W = np.array([1.0, 1.0, 2.0, 3.0, 3.0])
    sol = solve(H, f, G, W)
    assert sol.ok
    np.testing.assert_allclose(sol.u_star, [1.0, 1.0], atol=1e-12)
    assert sol.kkt_residual <= 1e-9


def test_infeasible_start_uses_phase_one():
    H = np.eye(2)
    f = np.zeros(2)
    G = np.array([[-1.0, 0.0], [0.0, -1.0]])
    W = np.array([-2.0, -3.0])          # u >= (2, 3), zero infeasible
    sol = solve(H, f, G, W)
    assert sol.ok
    np.testing.assert_allclose(sol.u_star, [2.0, 3.0], atol=1e-10)


def test_infeasible_status():
    G = np.array([[1.0], [-1.0]])
    W = np.array([-1.0, -1.0])           # u <= -1 and u >= 1
    sol = solve(np.eye(1), np.zeros(1), G, W)
    assert sol.status == INFEASIBLE
    assert not sol.ok


@pytest.mark.parametrize("H", [np.array([[1.0, 0.0], [0.0, -1.0]]),
                               np.array([[1.0, 2.0], [0.0, 1.0]]),
                               np.zeros((2, 2))])
def test_rejects_bad_hessian(H):
    with pytest.raises(ConfigurationError):
        solve(H, np.zeros(2))


def test_problem_file_round_trip(tmp_path):
    H, f, G, W = random_qp(np.random.default_rng(6), 4, 9)
    path = tmp_path / "qp.txt"
    dump_problem(path, H, f, G, W)
    for a, b in zip((H, f, G, W), load_problem(path)):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(solve(H, f, G, W).u_star, solve(*load_problem(path)).u_star)


def test_malformed_file(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 1\n1 0\n0 1\n0 0\n1 1\n")
    with pytest.raises(ConfigurationError):
        load_problem(path)
