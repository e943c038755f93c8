import math

import numpy as np
import pytest
from scipy import integrate

from bruijnregret.experts import compute_A, random_grid_panel, static_panel
from bruijnregret.local import DegenerateGradient
from bruijnregret.payoff import linear_payoff, max_payoff, softmax_payoff
from bruijnregret.pde import (CoordinateMap, PdeSolution, SingularDiffusion, gh_rule, heat_kernel,
                              heat_residual, monte_carlo_u, operator_residual, two_expert_residual)

STATIC = static_panel([1, -1])
SQRT_2_PI = math.sqrt(2 / math.pi)


@pytest.fixture(scope="module")
def static_sol():
    return PdeSolution(STATIC, max_payoff())


@pytest.fixture(scope="module")
def three():
    P = random_grid_panel(3, 2, seed=0)
    return P, PdeSolution(P, max_payoff())


def test_heat_kernel_examples():
    assert heat_kernel([[1.0]], [0.0], 1.0) == pytest.approx((4 * math.pi) ** -0.5, abs=1e-15)
    A = compute_A(random_grid_panel(3, 2, seed=1))
    y = np.array([0.3, -0.7])
    assert heat_kernel(A, y, 0.4) == heat_kernel(A, -y, 0.4)
    with pytest.raises(SingularDiffusion):
        heat_kernel([[0.0]], [0.0], 1.0)


def test_heat_kernel_normalized_and_moments():
    A = np.array([[1.0, 0.3], [0.3, 0.5]])
    t = 0.7
    f = lambda v, u: heat_kernel(A, [u, v], t)
    mass = integrate.dblquad(f, -12, 12, -12, 12, epsabs=1e-11)[0]
    assert mass == pytest.approx(1.0, abs=1e-8)
    cov = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            cov[i, j] = integrate.dblquad(lambda v, u: [u, v][i] * [u, v][j] * f(v, u),
                                          -12, 12, -12, 12, epsabs=1e-10)[0]
    assert np.allclose(cov, 2 * t * A, atol=1e-6)


def test_gh_rule_normalized():
    nodes, w = gh_rule(20, 2)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(w @ nodes, 0, atol=1e-14)
    assert np.allclose((nodes * w[:, None]).T @ nodes, np.eye(2), atol=1e-12)


def test_coordinate_map():
    for n in (2, 3, 5):
        c = CoordinateMap(n)
        assert np.allclose(c.R @ c.Rinv, np.eye(n), atol=1e-12)
        assert np.all(c.R[-1] == 1)
        x = np.random.default_rng(n).normal(size=n)
        assert np.allclose(c.to_x(c.to_y(x)), x, atol=1e-12)


def test_static_value(static_sol):
    assert static_sol.evaluate_u([0, 0], 0.0) == pytest.approx(SQRT_2_PI, abs=1e-12)
    assert static_sol.evaluate_h([0.0], 0.0) == pytest.approx(SQRT_2_PI, abs=1e-12)
    mean, se = monte_carlo_u(STATIC, max_payoff(), [0, 0], 0.0, 400_000, seed=1)
    assert abs(mean - SQRT_2_PI) <= 4 * se


def test_terminal_exact(three):
    P, sol = three
    x = np.array([0.2, -0.4, 0.1])
    assert sol.evaluate_u(x, 1.0) == 0.2
    # h is u with the last coordinate pinned at 0 and the mean removed
    assert sol.evaluate_h([0.3, 0.1], 1.0) == pytest.approx(0.3 - 0.4 / 3, abs=1e-15)


def test_linear_payoff():
    P = random_grid_panel(3, 2, seed=2)
    w = np.array([0.2, 0.3, 0.5])
    sol = PdeSolution(P, linear_payoff(w))
    x = np.array([1.0, -0.5, 0.25])
    for t in (0.0, 0.5, 0.9):
        assert sol.evaluate_u(x, t) == pytest.approx(w @ x, abs=1e-8)
        g, H, ut = sol.derivatives(x, t)
        assert np.allclose(g, w, atol=1e-8) and np.allclose(H, 0, atol=1e-8) and abs(ut) <= 1e-8
    assert operator_residual(lambda x, t: (w, np.zeros((3, 3)), 0.0), x, 0.3, P) == 0.0


@pytest.mark.parametrize("t", [0.0, 0.5, 0.9])
def test_translation(three, t):
    P, sol = three
    x = np.array([0.3, -0.2, 0.5])
    u = sol.evaluate_u(x, t)
    for s in (-1.5, 0.25, 2.0):
        assert sol.evaluate_u(x + s, t) == pytest.approx(u + s, abs=1e-8)


def test_derivative_identities(three):
    P, sol = three
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.normal(scale=0.5, size=3)
        t = rng.uniform(0, 0.9)
        g, H, _ = sol.derivatives(x, t)
        assert g.sum() == pytest.approx(1.0, abs=1e-6)
        assert np.allclose(H @ np.ones(3), 0, atol=1e-6)


def test_fd_and_quadrature_modes_agree(three):
    P, sol = three
    x = np.array([0.1, -0.3, 0.2])
    g1, H1, u1 = sol.derivatives(x, 0.4, "fd")
    g2, H2, u2 = sol.derivatives(x, 0.4, "quadrature")
    assert np.allclose(g1, g2, atol=1e-7)
    assert np.allclose(H1, H2, atol=1e-6)
    assert u1 == pytest.approx(u2, abs=1e-6)


def test_residual_forms_agree_two_experts(static_sol):
    P = random_grid_panel(2, 2, seed=3)
    sol = PdeSolution(P, max_payoff())
    for x, t in (([0.2, 0.0], 0.3), ([-0.5, 0.1], 0.8)):
        a = operator_residual(sol, x, t, P)
        b = heat_residual(sol, x, t, P)
        c = two_expert_residual(sol, x, t, P)
        assert abs(a) <= 1e-5 and abs(a - b) <= 1e-10 and abs(a - c) <= 1e-10


def test_three_expert_value_against_mc(three):
    P, sol = three
    x = np.array([0.2, 0.0, -0.1])
    u = sol.evaluate_u(x, 0.2)
    mean, se = monte_carlo_u(P, max_payoff(), x, 0.2, 400_000, seed=2)
    assert abs(u - mean) <= 4 * se


def test_four_experts_line_method():
    P = random_grid_panel(4, 2, seed=1)
    sol = PdeSolution(P, max_payoff())
    assert sol.method == "line"
    x = np.array([0.3, 0.0, -0.2, 0.1])
    u = sol.evaluate_u(x, 0.3)
    mean, se = monte_carlo_u(P, max_payoff(), x, 0.3, 400_000, seed=3)
    assert abs(u - mean) <= 4 * se


def test_softmax_residual():
    P = random_grid_panel(3, 1, seed=6)
    sol = PdeSolution(P, softmax_payoff(0.3))
    assert sol.method == "gh"
    assert abs(heat_residual(sol, [0.1, 0.0, -0.1], 0.4, P)) <= 1e-5


def test_lipschitz(three):
    P, sol = three
    rng = np.random.default_rng(5)
    for _ in range(10):
        x, y = rng.normal(size=(2, 3))
        assert abs(sol.evaluate_u(x, 0.3) - sol.evaluate_u(y, 0.3)) <= np.linalg.norm(x - y) + 1e-8


def test_ut_envelope(static_sol):
    ts = [0.5, 0.9, 0.99]
    scaled = [abs(static_sol.derivatives([0.0, 0.0], t)[2]) * math.sqrt(1 - t) for t in ts]
    C = max(scaled)
    assert all(s <= C for s in scaled)
    # for the static panel h_t = -sqrt(2/pi)/(2 sqrt(1-t)) at the kink
    assert scaled[0] == pytest.approx(SQRT_2_PI / 2, abs=1e-6)


def test_order_doubling_stable(three):
    P, sol = three
    y = np.array([0.2, -0.1])
    fine = PdeSolution(P, max_payoff(), order=256)
    assert sol.evaluate_h(y, 0.1) == pytest.approx(fine.evaluate_h(y, 0.1), abs=1e-8)


def test_h0_level_set_identity(three):
    P, sol = three
    y = np.array([0.4, -0.3])
    s = 0.7
    yn = sol.h0(y, s)
    assert sol.gbar_full(np.append(y, yn)) == pytest.approx(s, abs=1e-12)


def test_singular_panel_rejected():
    with pytest.raises(SingularDiffusion):
        PdeSolution(static_panel([0.5, 0.5]), max_payoff())


def test_non_translation_payoff_rejected():
    with pytest.raises(ValueError):
        PdeSolution(STATIC, linear_payoff([1.0, 1.0]))


def test_degenerate_gradient():
    with pytest.raises(DegenerateGradient):
        operator_residual(lambda x, t: (np.array([1.0, -1.0]), np.zeros((2, 2)), 0.0), [0, 0], 0.5, STATIC)
