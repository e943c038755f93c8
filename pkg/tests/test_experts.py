import numpy as np
import pytest

from bruijnregret.experts import (ExpertPanel, PanelParseError, compute_A, compute_B, compute_r_table,
                                  compute_vartheta, diagnostics, format_panel, parity_panel, parse_panel,
                                  random_grid_panel, static_panel)


def test_vartheta_examples():
    assert compute_vartheta(static_panel([1, -1])) == 1.0
    t = np.array([[1.0, 1.0], [0.5, -0.5]])
    assert compute_vartheta(ExpertPanel(t)) == 0.0
    assert compute_vartheta(static_panel([0, 0, 0])) == 3.0


def test_r_table_examples():
    assert np.array_equal(compute_r_table(static_panel([1, -1])), [[2.0], [2.0]])
    assert np.array_equal(compute_r_table(static_panel([0.3, 0.3, 0.3])), np.zeros((2, 2)))
    assert np.allclose(compute_r_table(static_panel([0.5, -0.5, 0])), [[0.5, -0.5]] * 2)


def test_A_B_static():
    P = static_panel([1, -1])
    assert np.array_equal(compute_A(P), [[2.0]])
    assert np.allclose(compute_B(P), [[0.5, -0.5], [-0.5, 0.5]])
    assert np.array_equal(compute_A(static_panel([0.2, 0.2])), [[0.0]])
    assert np.array_equal(compute_B(static_panel([0, 0])), np.zeros((2, 2)))


def test_A_equals_c_sharp_for_two_experts():
    P = random_grid_panel(2, 3, seed=4)
    c_sharp = ((P.table[:, 1] - P.table[:, 0]) ** 2).sum() / 2 ** (P.d + 1)
    assert compute_A(P)[0, 0] == pytest.approx(c_sharp, abs=1e-15)


def test_diagnostics_verdicts():
    diag = diagnostics(static_panel([1, -1]))
    assert diag.e1_holds and diag.e2_holds and diag.lambda_min == 2.0 and diag.lambda_r == 1.0
    assert not diagnostics(static_panel([0.5, 0.5])).e2_holds
    assert not diagnostics(ExpertPanel([[1, 1], [0, 0]])).e1_holds


@pytest.mark.parametrize("seed", range(10))
def test_gamma_p_inequality(seed):
    rng = np.random.default_rng(seed)
    P = random_grid_panel(3, 2, seed=seed)
    theta = compute_vartheta(P)
    for _ in range(50):
        p = rng.uniform(0.01, 2.0, size=3)
        lhs = p.sum() - np.abs(P.table @ p)
        assert np.all(lhs >= theta * p.min() - 1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_B_positive_forces_A_positive(seed):
    P = random_grid_panel(3, 2, seed=seed, require_e1=False)
    d = diagnostics(P)
    assert d.b_implies_a
    assert np.allclose(d.A, d.A.T) and np.linalg.eigvalsh(d.A).min() >= -1e-12


def test_A_invariant_under_relabeling():
    P = random_grid_panel(3, 2, seed=1)
    perm = np.random.default_rng(0).permutation(P.num_states)
    assert np.allclose(compute_A(P), compute_A(P.relabeled(perm)), atol=1e-15)


def test_parity_panel():
    P = parity_panel([0, 1], d=2, amplitude=0.5)
    assert np.all(P.table[:, 0] == 0.5)
    assert compute_vartheta(P) > 0


def test_file_round_trip():
    P = random_grid_panel(3, 2, seed=7)
    Q = parse_panel(format_panel(P))
    assert np.array_equal(P.table, Q.table) and Q.D == 8


@pytest.mark.parametrize("text, line", [
    ("2 1 8\n- 1 -1\n", 2),
    ("2 1 8\n- 1 -1\n+ 1 2\n", 3),
    ("2 1 8\n+ 1 -1\n- 1 -1\n", 2),
    ("2 x 8\n", 1),
    ("2 1 8\n- 0.3 -1\n+ 1 -1\n", 2),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(PanelParseError) as ei:
        parse_panel(text)
    assert ei.value.line == line


def test_panel_validation():
    with pytest.raises(ValueError):
        ExpertPanel([[1.5, 0], [0, 0]])
    with pytest.raises(ValueError):
        ExpertPanel(np.zeros((3, 2)))
