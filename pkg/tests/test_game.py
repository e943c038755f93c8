import math

import numpy as np
import pytest

from bruijnregret.debruijn import HistoryState, shift
from bruijnregret.experts import random_grid_panel, static_panel
from bruijnregret.game import (GameSpec, HorizonTooLarge, dpp_check, ell_from_t, g3_step, optimal_move,
                               rescaled_value, rescaled_values, value_bruteforce, value_exact)
from bruijnregret.payoff import linear_payoff, max_payoff, softmax_payoff


def naive_value(panel, g, x, m, T, fs):
    """Plain nested min-max over an explicit f list (tiny horizons only)."""
    if T == 0:
        return float(g(x))
    q = panel.q(m)
    best = math.inf
    for f in fs:
        up = naive_value(panel, g, x + (q - f), shift(m, 1), T - 1, fs)
        dn = naive_value(panel, g, x - (q - f), shift(m, -1), T - 1, fs)
        best = min(best, max(up, dn))
    return best


@pytest.mark.parametrize("a, b, want", [(0, 0, (0, 0)), (1, 0, (0.5, 0.5)), (4, 0, (3, 1))])
def test_g3_step_examples(a, b, want):
    assert g3_step(a, b) == want


def test_g3_step_against_grid():
    fs = np.linspace(-1, 1, 200001)
    rng = np.random.default_rng(0)
    for a, b in rng.uniform(-3, 3, size=(20, 2)):
        v, f = g3_step(a, b)
        obj = np.maximum(a - fs, b + fs)
        assert v == pytest.approx(obj.min(), abs=1e-5)
        assert v <= obj.min() + 1e-15
        assert v == pytest.approx(max(a - f, b + f), abs=1e-15)


def test_g3_step_monotone_lipschitz():
    rng = np.random.default_rng(1)
    for a, b, da in rng.uniform(-3, 3, size=(200, 3)):
        v0 = g3_step(a, b)[0]
        v1 = g3_step(a + abs(da), b)[0]
        assert v0 <= v1 <= v0 + abs(da) + 1e-12


def test_terminal_day_returns_payoff():
    P = random_grid_panel(3, 2, seed=0)
    spec = GameSpec(P, max_payoff(), 5, [0.3, -1, 2], "+-", ell=5)
    for engine in ("path", "lattice", "brute"):
        assert value_exact(spec, engine) == 2.0


def test_static_last_step():
    spec = GameSpec(static_panel([1, -1]), max_payoff(), 5, [0, 0], "-", ell=4)
    for engine in ("path", "lattice"):
        assert value_exact(spec, engine) == 1.0
    assert value_bruteforce(spec, 1e-4) == pytest.approx(1.0, abs=2e-4)


@pytest.mark.parametrize("seed", range(4))
def test_engines_agree_with_naive_oracle(seed):
    P = random_grid_panel(2, 1, D=4, seed=seed)
    rng = np.random.default_rng(seed)
    x = rng.normal(size=2)
    m = HistoryState(1, seed % 2)
    spec = GameSpec(P, max_payoff(), 3, x, m, ell=1)
    fs = np.linspace(-1, 1, 101)
    oracle = naive_value(P, max_payoff(2), x, m, 2, fs)
    for engine in ("path", "lattice"):
        assert value_exact(spec, engine) == pytest.approx(oracle, abs=3 * 0.02)
    assert value_bruteforce(spec, 0.02) == pytest.approx(oracle, abs=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_lattice_equals_path(seed):
    P = random_grid_panel(2 + seed % 2, 1 + seed % 3, seed=seed)
    rng = np.random.default_rng(seed)
    spec = GameSpec(P, max_payoff(), 10, rng.normal(size=P.n), HistoryState(P.d, 0))
    assert value_exact(spec, "lattice") == value_exact(spec, "path")


def test_linear_value_is_inner_product():
    P = random_grid_panel(3, 2, seed=3)
    w = np.array([0.2, 0.3, 0.5])
    x = np.array([1.0, -2.0, 0.5])
    for ell in (1, 3, 5):
        spec = GameSpec(P, linear_payoff(w), 5, x, "++", ell)
        assert value_exact(spec, "path") == pytest.approx(w @ x, abs=1e-12)
        assert value_bruteforce(spec, 1e-3) == pytest.approx(w @ x, abs=1e-3)


def test_bruteforce_horizon_guard():
    spec = GameSpec(static_panel([1, -1]), max_payoff(), 9, [0, 0], "-")
    with pytest.raises(HorizonTooLarge):
        value_bruteforce(spec)


def test_non_g3_payoff_uses_brute():
    g = linear_payoff([0.5, 0.25])  # weights do not sum to one
    spec = GameSpec(static_panel([1, -1]), g, 3, [1, 1], "-")
    with pytest.raises(ValueError):
        value_exact(spec, "path")
    assert value_exact(spec) == value_bruteforce(spec)
    assert value_exact(spec) == pytest.approx(0.75, abs=2e-3)


def test_softmax_engines_agree():
    g = softmax_payoff(0.5)
    spec = GameSpec(static_panel([1, -1]), g, 4, [0.2, 0], "-")
    assert value_exact(spec, "path") == pytest.approx(value_bruteforce(spec, 1e-3), abs=3e-3)


def test_optimal_move_attains_value():
    P = random_grid_panel(3, 2, seed=2)
    spec = GameSpec(P, max_payoff(), 7, [0.5, 0, -0.5], "-+")
    f, v = optimal_move(spec)
    assert v == value_exact(spec)
    q = P.q(spec.m0)
    nxt = [value_exact(spec.replace(x0=spec.x0 + b * (q - f), m0=shift(spec.m0, b), ell=2))
           for b in (1, -1)]
    assert max(nxt) == pytest.approx(v, abs=1e-12)


def test_ell_from_t_snaps():
    assert ell_from_t(10, 0.3) == 3
    assert ell_from_t(10, 0.30000000000001) == 3
    assert ell_from_t(10, 0.31) == 4
    assert ell_from_t(10, 0.0) == 1
    assert ell_from_t(10, 1.0) == 10


def test_rescaled_envelope_and_terminal():
    P = random_grid_panel(2, 2, seed=5)
    vals = rescaled_values(P, max_payoff(), 16, [0.1, -0.1], 0.25)
    assert rescaled_value(P, max_payoff(), 16, [0.1, -0.1], 0.25, which="plus") == vals.max()
    assert rescaled_value(P, max_payoff(), 16, [0.1, -0.1], 0.25, which="minus") == vals.min()
    assert np.all(rescaled_values(P, max_payoff(), 16, [0.3, 0.1], 1.0) == 0.3)


def test_rescaled_small_N_matches_bruteforce():
    P = static_panel([1, -1])
    lat = rescaled_value(P, max_payoff(), 4, [0, 0], 0.0, "-", engine="lattice")
    spec = GameSpec(P, max_payoff(), 4, [0, 0], "-", 1)
    assert lat == pytest.approx(value_bruteforce(spec, 1e-4) / 2, abs=2e-4)
    assert lat == 0.75


def test_translation_exact():
    P = random_grid_panel(3, 1, seed=9)
    spec = GameSpec(P, max_payoff(), 8, [0.25, -0.5, 0.0], "+")
    v = value_exact(spec, "path")
    for s in (0.5, -1.25, 3.0):
        assert value_exact(spec.replace(x0=spec.x0 + s), "path") - s == pytest.approx(v, abs=1e-12)


def test_dpp_exact_and_brute():
    P = random_grid_panel(2, 2, seed=1)
    spec = GameSpec(P, max_payoff(), 7, [0, 0], "--", ell=2)
    for k in (1, 2, 5):
        assert dpp_check(spec, k, probes=3) <= 1e-9
    small = GameSpec(P, max_payoff(), 4, [0, 0], "--", ell=1)
    assert dpp_check(small, 1, probes=2, engine="brute", f_grid=1e-2) <= 4e-2
