"""Acceptance criteria, each at its stated tolerance and time budget.

Run ``pytest tests/test_acceptance.py`` to get one PASS/FAIL line per
criterion in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from oracles import constrained_grid_qprime
from xorselftest import _linalg as la
from xorselftest.game import XorGame, chsh, eval_Z, ghz3, h_alpha, wrapped_distance
from xorselftest.ghz import (
    check_all_qubit_bounds,
    check_entangled_bound,
    ideal_device,
    pass_probability_direct,
    pass_probability_formula,
    phase_term,
    random_canonical_device,
    random_qubit_device,
)
from xorselftest.jordan import (
    ORIGIN_SINGLE,
    InvolutionPair,
    block_decompose,
    random_block_pair,
    random_involution,
)
from xorselftest.optimizer import OptimizerConfig, find_global_maxima, grid_error_bound, grid_oracle_qf, refine_maximum
from xorselftest.robustness import quadform_project, run_robustness_experiment
from xorselftest.strategy import build_game_operator, make_T_strategy, reverse_diagonal_entries, score
from xorselftest.verdict import classify

SQ2 = math.sqrt(2)


def _has(points, target, tol):
    return any(wrapped_distance(p, target) <= tol for p in points)


@pytest.mark.criterion(1)
def test_criterion_01_chsh():
    t0 = time.perf_counter()
    v = classify(chsh())
    elapsed = time.perf_counter() - t0
    assert abs(v.q_f - 2 * SQ2) <= 1e-9
    target = np.array([-np.pi / 4, np.pi / 2, np.pi / 2])
    pts = v.maxima.points()
    assert len(pts) == 2 and _has(pts, target, 1e-6) and _has(pts, -target, 1e-6)
    expected = -np.array([[4, 2, 2], [2, 2, 1], [2, 1, 2]]) / SQ2
    H = v.maxima.maxima[v.witness_index].hessian
    assert np.max(np.abs(H - expected)) <= 1e-8
    assert v.is_robust_self_test
    assert elapsed < 1.0


@pytest.mark.criterion(2)
def test_criterion_02_h_alpha():
    t0 = time.perf_counter()
    for alpha in (1.5, 2.0, 3.0):
        v = classify(h_alpha(alpha))
        assert abs(v.q_f - 2 * math.sqrt(alpha ** 2 + 1)) <= 1e-9
        a2 = alpha ** 2
        expected = -np.array([[2 * a2 + 2, a2 + 1, 2], [a2 + 1, a2 + 1, 1], [2, 1, 2]]) / math.sqrt(1 + a2)
        H = v.maxima.maxima[v.witness_index].hessian
        # reference matrix orders the two players the other way round
        perm = [0, 2, 1]
        assert np.max(np.abs(H[np.ix_(perm, perm)] - expected)) <= 1e-8
        assert v.is_robust_self_test
    assert time.perf_counter() - t0 < 5.0


@pytest.mark.criterion(3)
def test_criterion_03_ghz():
    t0 = time.perf_counter()
    v = classify(ghz3())
    assert abs(v.q_f - 4) <= 1e-9
    oracle, _ = grid_oracle_qf(ghz3(), 60)
    assert oracle <= v.q_f + 1e-12
    assert v.q_f - oracle <= grid_error_bound(ghz3(), 60)
    assert v.is_robust_self_test
    assert time.perf_counter() - t0 < 10.0


@pytest.mark.criterion(4)
def test_criterion_04_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    cfg = OptimizerConfig()
    for k in range(50):
        n = 2 + k % 2
        g = XorGame(n, rng.standard_normal(2 ** n))
        q = find_global_maxima(g, cfg).q_f
        grid_k = 400 if n == 2 else 60
        gv, gp = grid_oracle_qf(g, grid_k)
        assert q - gv <= grid_error_bound(g, grid_k) and gv <= q + 1e-9
        refined = refine_maximum(g, gp, cfg).value
        assert abs(q - refined) <= 1e-6, (k, q, refined)
    assert time.perf_counter() - t0 < 180


@pytest.mark.criterion(5)
def test_criterion_05_score_identity():
    rng = np.random.default_rng(505)
    for _ in range(10):
        n = int(rng.integers(1, 5))
        g = XorGame(n, rng.standard_normal(2 ** n))
        for _ in range(10):
            pt = rng.uniform(-np.pi, np.pi, n + 1)
            s = make_T_strategy(pt)
            assert abs(score(g, s) - eval_Z(g, pt)) <= 1e-10
            angles = rng.uniform(0, np.pi, n)
            m = build_game_operator(g, make_T_strategy(np.concatenate([[0.0], angles])))
            e = reverse_diagonal_entries(g, angles)
            mods = np.abs(e[: e.size // 2])
            expected = np.sort(np.concatenate([mods, -mods]))
            assert np.max(np.abs(np.linalg.eigvalsh(m) - expected)) <= 1e-9


@pytest.mark.criterion(6)
def test_criterion_06_robustness_law():
    t0 = time.perf_counter()
    eps = [1e-4, 1e-3, 1e-2, 1e-1]
    for name, game in (("chsh", chsh()), ("ghz", ghz3()), ("h2", h_alpha(2.0))):
        v = classify(game)
        for cls in ("T", "S", "qubit", "canonical"):
            cert = run_robustness_experiment(game, cls, eps, 200, seed=6, verdict=v, game_id=name)
            assert not cert.warnings, (name, cls, cert.warnings)
            assert math.isfinite(cert.fitted_C)
            assert all(d <= cert.fitted_C * math.sqrt(e) * (1 + 1e-12) for e, d in cert.samples)
            assert 0.4 <= cert.fitted_slope <= 0.6, (name, cls, cert.fitted_slope)
            double = run_robustness_experiment(game, cls, eps, 400, seed=66, verdict=v, game_id=name)
            assert 0.5 < double.fitted_C / cert.fitted_C < 2.0, (name, cls)
            assert 0.4 <= double.fitted_slope <= 0.6, (name, cls, double.fitted_slope)
    assert time.perf_counter() - t0 < 600


def _theta_multiset_gap(a, b):
    a, b = np.sort(a), np.sort(b)
    return float(np.max(np.abs(a - b))) if a.size else 0.0


@pytest.mark.criterion(7)
def test_criterion_07_jordan():
    t0 = time.perf_counter()
    rng = np.random.default_rng(707)
    for k in range(100):
        d = 1 + k % 16
        pair = InvolutionPair(random_involution(d, rng), random_involution(d, rng))
        dec = block_decompose(pair)
        assert np.all((dec.thetas >= 0) & (dec.thetas <= np.pi))
        assert max(dec.residuals(pair)) <= 1e-9
        for l, b in enumerate(dec.blocks):
            rows = dec.embedding[2 * l: 2 * l + 2]
            rank = np.linalg.matrix_rank(rows, tol=1e-9)
            assert rank == (1 if b.origin == ORIGIN_SINGLE else 2)
        assert sum(1 if b.origin == ORIGIN_SINGLE else 2 for b in dec.blocks) == d
    for _ in range(100):
        thetas = rng.uniform(0.01, np.pi - 0.01, int(rng.integers(1, 7)))
        pair = random_block_pair(thetas, [], rng)
        assert _theta_multiset_gap(block_decompose(pair).thetas, thetas) <= 1e-9
    assert time.perf_counter() - t0 < 30


@pytest.mark.criterion(8)
def test_criterion_08_K2_chsh():
    v = classify(chsh())
    assert abs(v.K2 - 2 / math.sqrt(2 * SQ2 - 2)) <= 1e-6
    assert abs(constrained_grid_qprime(chsh().table, 400) - 2) <= 1e-4
    assert abs(v.q_f_prime - 2) <= 1e-4


@pytest.mark.criterion(9)
def test_criterion_09_ghz_device():
    t0 = time.perf_counter()
    assert abs(pass_probability_formula(ideal_device()) - 1) <= 1e-12
    rng = np.random.default_rng(909)
    for k in range(10_000):
        d = random_qubit_device(rng, bias=0.0 if k % 2 else 3.0)
        assert abs(pass_probability_formula(d) - pass_probability_direct(d)) <= 1e-12
    for _ in range(1000):
        rep = check_all_qubit_bounds(random_qubit_device(rng))
        assert rep.ok, [c.to_dict() for c in rep.violations]
    for _ in range(200):
        rep = check_entangled_bound(random_canonical_device(rng, max_env=4))
        assert rep.ok, [c.to_dict() for c in rep.violations]
    assert time.perf_counter() - t0 < 300


def _random_contraction(d, rng):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return a / la.opnorm(a) * rng.uniform(0, 1)


@pytest.mark.criterion(10)
def test_criterion_10_inequality_harnesses():
    rng = np.random.default_rng(1010)
    bad = 0
    for _ in range(10_000):
        m = int(rng.integers(2, 9))
        a = rng.standard_normal((m, m))
        y = rng.standard_normal(m)
        y /= np.linalg.norm(y)
        z, bound = quadform_project(a + a.T, y)
        bad += np.linalg.norm(z - y) > bound + 1e-12
    assert bad == 0

    t = rng.uniform(0, np.pi, size=(3, 100_000))
    a, b, c = np.exp(1j * t)
    lhs = np.abs(phase_term(a, b, c))
    assert np.all(lhs <= np.sqrt(np.maximum(0.0, 1 - np.abs(a - 1j) ** 2 / 4)) + 1e-12)
    assert np.all(np.abs(phase_term(a, b, np.conj(c))) <= SQ2 / 2 + 1e-12)

    for _ in range(1000):
        d1, d2 = (int(x) for x in rng.integers(1, 5, size=2))
        A, A2 = _random_contraction(d1, rng), _random_contraction(d1, rng)
        B, B2 = _random_contraction(d2, rng), _random_contraction(d2, rng)
        lhs = la.opnorm(np.kron(A, B) - np.kron(A2, B2))
        assert lhs <= la.opnorm(A - A2) + la.opnorm(B - B2) + 1e-12
