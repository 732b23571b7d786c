import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import fd_grad, fd_hess, p_loop, z_loop
from xorselftest.game import (
    XorGame,
    chsh,
    eval_P,
    eval_P_on_torus,
    eval_Z,
    grad_Z,
    h_alpha,
    hess_Z,
    load_game,
    save_game,
    transform_angles_back,
    transform_angles_forward,
    transform_game,
    wrapped_distance,
)
from xorselftest.optimizer import compute_qf, grid_oracle_qf

CHSH_MAX = np.array([-np.pi / 4, np.pi / 2, np.pi / 2])
angle = st.floats(-10, 10, allow_nan=False)


@st.composite
def game_and_point(draw, max_players=4):
    n = draw(st.integers(1, max_players))
    table = draw(st.lists(st.floats(-3, 3, allow_nan=False), min_size=2 ** n, max_size=2 ** n))
    point = draw(st.lists(angle, min_size=n + 1, max_size=n + 1))
    return XorGame(n, table), np.array(point)


def test_eval_P_chsh_examples():
    g = chsh()
    assert eval_P(g, [1, 1]) == pytest.approx(2)
    val = eval_P(g, [1j, 1j])
    assert val == pytest.approx(2 + 2j)
    assert abs(val) == pytest.approx(2 * math.sqrt(2))
    assert eval_P(XorGame(2, [0, 0, 0, 0]), [np.exp(0.3j), np.exp(-2j)]) == 0


def test_eval_Z_chsh_examples():
    g = chsh()
    assert eval_Z(g, CHSH_MAX) == pytest.approx(2 * math.sqrt(2), abs=1e-12)
    assert eval_Z(g, [0, 0, 0]) == pytest.approx(2, abs=1e-12)


def test_eval_Z_batch_matches_single(rng):
    g = XorGame(3, rng.normal(size=8))
    pts = rng.uniform(-np.pi, np.pi, size=(5, 4))
    batch = eval_Z(g, pts)
    assert np.allclose(batch, [eval_Z(g, p) for p in pts], atol=1e-13)


def test_input_order_first_player_most_significant():
    g = XorGame(2, [0, 1, 2, 3])
    assert g.value(0, 1) == 1
    assert g.value(1, 0) == 2


def test_bad_games_rejected():
    with pytest.raises(ValueError):
        XorGame(2, [1, 2, 3])
    with pytest.raises(ValueError):
        XorGame(2, [1, np.nan, 0, 0])
    with pytest.raises(ValueError):
        XorGame(0, [1])


def test_grad_chsh_stationary():
    assert np.max(np.abs(grad_Z(chsh(), CHSH_MAX))) < 1e-12


def test_zero_game_derivatives_vanish():
    g = XorGame(2, [0, 0, 0, 0])
    p = np.array([0.3, -1.2, 2.0])
    assert np.all(grad_Z(g, p) == 0)
    assert np.all(hess_Z(g, p) == 0)


def test_hessian_chsh_matches_known_matrix():
    expected = -np.array([[4, 2, 2], [2, 2, 1], [2, 1, 2]]) / math.sqrt(2)
    assert np.allclose(hess_Z(chsh(), CHSH_MAX), expected, atol=1e-12)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_hessian_h_alpha_known_matrix_up_to_player_order(alpha):
    # The published matrix lists the two players in the opposite order.
    a0 = -math.atan(1 / alpha)
    point = np.array([a0, np.pi / 2, 2 * math.atan(1 / alpha)])
    assert eval_Z(h_alpha(alpha), point) == pytest.approx(2 * math.sqrt(alpha ** 2 + 1), abs=1e-12)
    a2 = alpha ** 2
    expected = -np.array([[2 * a2 + 2, a2 + 1, 2], [a2 + 1, a2 + 1, 1], [2, 1, 2]]) / math.sqrt(1 + a2)
    perm = [0, 2, 1]
    H = hess_Z(h_alpha(alpha), point)
    assert np.allclose(H[np.ix_(perm, perm)], expected, atol=1e-10)


@given(game_and_point())
def test_Z_matches_loop_oracle(gp):
    g, p = gp
    assert eval_Z(g, p) == pytest.approx(z_loop(g.table, p), abs=1e-10)


@given(game_and_point())
def test_identity_Z_is_real_part_of_phase_times_P(gp):
    g, p = gp
    lhs = eval_Z(g, p)
    rhs = (np.exp(1j * p[0]) * eval_P(g, np.exp(1j * p[1:]))).real
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, g.scale)
    assert eval_P(g, np.exp(1j * p[1:])) == pytest.approx(p_loop(g.table, np.exp(1j * p[1:])), abs=1e-10)


@given(game_and_point(max_players=3))
def test_modulus_of_P_is_max_over_phase(gp):
    g, p = gp
    t0 = np.linspace(-np.pi, np.pi, 10_000, endpoint=False)
    pts = np.tile(p, (t0.size, 1))
    pts[:, 0] = t0
    assert abs(eval_P_on_torus(g, p[1:])) == pytest.approx(np.max(eval_Z(g, pts)), abs=1e-6 * max(1, g.scale))


@given(game_and_point(), st.integers(-3, 3))
def test_even_and_periodic(gp, shift):
    g, p = gp
    z = eval_Z(g, p)
    tol = 1e-12 * max(1.0, g.scale) * (1 + np.abs(p).max())
    assert abs(eval_Z(g, -p) - z) <= tol
    q = p.copy()
    q[-1] += 2 * np.pi * shift
    assert abs(eval_Z(g, q) - z) <= tol * 4


@given(game_and_point())
def test_derivatives_match_finite_differences(gp):
    g, p = gp
    f = lambda x: z_loop(g.table, x)
    s = max(1.0, g.scale)
    assert np.allclose(grad_Z(g, p), fd_grad(f, p), atol=1e-6 * s)
    assert np.allclose(hess_Z(g, p), fd_hess(f, p), atol=1e-5 * s)


def test_transform_identity_and_negation():
    g = chsh()
    assert transform_game(g, 0, (0, 0)) == g
    neg = transform_game(g, 1, (0, 0))
    assert np.array_equal(neg.table, -g.table)
    flip = transform_game(g, 0, (1, 1))
    assert sorted(flip.table) == sorted(g.table)
    ref = grid_oracle_qf(g, 200)[0]
    for h in (neg, flip):
        assert grid_oracle_qf(h, 200)[0] == pytest.approx(ref, abs=1e-9)


@given(st.integers(0, 1), st.lists(st.integers(0, 1), min_size=2, max_size=2),
       st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_transform_preserves_qf(b0, b, table):
    g = XorGame(2, table)
    assert compute_qf(transform_game(g, b0, tuple(b))) == pytest.approx(compute_qf(g), abs=1e-8)


@given(st.integers(0, 1), st.lists(st.integers(0, 1), min_size=3, max_size=3),
       st.lists(angle, min_size=4, max_size=4))
def test_transformed_score_relation(b0, b, alpha):
    g = XorGame(3, np.arange(8) - 3.5)
    alpha = np.array(alpha)
    beta = transform_angles_forward(b0, tuple(b), alpha)
    assert eval_Z(transform_game(g, b0, tuple(b)), beta) == pytest.approx(eval_Z(g, alpha), abs=1e-9)
    back = transform_angles_back(b0, tuple(b), beta)
    assert wrapped_distance(back, alpha) < 1e-9


def test_json_round_trip(tmp_path):
    g = XorGame(3, [1, -2.5, 0, 0, 1e-3, 7, 0.125, -1])
    path = tmp_path / "g.json"
    save_game(g, path)
    assert load_game(path) == g


def test_load_game_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"players": 2,\n "table": [1, 2, 3, 4,]}')
    with pytest.raises(ValueError, match="line 2"):
        load_game(path)
