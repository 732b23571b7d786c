"""n-qubit strategies: construction, scoring, canonical form, distances.

Every player holds one qubit and two +/-1-valued observables.  The
optimal family ``make_T_strategy(theta)`` uses the state
(|0..0> + e^{i t_0}|1..1>)/sqrt(2), the observable sigma_x for input 0 and
[[0, e^{i t_k}], [e^{-i t_k}, 0]] for input 1; its score is Z_f(theta).
"""

import json
from dataclasses import dataclass

import numpy as np

from . import _linalg as la
from .game import MAX_PLAYERS, eval_P_on_torus, eval_Z

STATE_TOL = 1e-12
INVOLUTION_TOL = 1e-10


@dataclass(eq=False)
class QubitStrategy:
    state: np.ndarray
    measurements: list  # per player: (M0, M1)

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=complex).reshape(-1)
        self.measurements = [
            (np.asarray(m0, dtype=complex), np.asarray(m1, dtype=complex))
            for m0, m1 in self.measurements
        ]
        n = len(self.measurements)
        if not 1 <= n <= MAX_PLAYERS:
            raise ValueError(f"player count must be in [1, {MAX_PLAYERS}]")
        if self.state.size != 2 ** n:
            raise ValueError(f"state has {self.state.size} amplitudes, expected {2 ** n}")

    @property
    def players(self):
        return len(self.measurements)

    def validate(self, state_tol=1e-10, op_tol=INVOLUTION_TOL):
        """Raise ValueError if the state or an observable is invalid."""
        if abs(np.linalg.norm(self.state) - 1.0) > state_tol:
            raise ValueError("state is not normalised")
        for j, pair in enumerate(self.measurements):
            for i, m in enumerate(pair):
                if m.shape != (2, 2):
                    raise ValueError(f"player {j + 1} observable {i} is not 2x2")
                if la.involution_defect(m) > op_tol:
                    raise ValueError(f"player {j + 1} observable {i} is not a Hermitian involution")
        return self

    def to_dict(self):
        return {
            "state": la.complex_to_pairs(self.state),
            "measurements": [[la.complex_to_pairs(m) for m in pair] for pair in self.measurements],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            meas = [
                tuple(la.pairs_to_complex(m, (2, 2)) for m in pair)
                for pair in d["measurements"]
            ]
            state = la.pairs_to_complex(d["state"])
        except KeyError as exc:
            raise ValueError(f"strategy is missing field {exc}") from None
        if any(len(p) != 2 for p in meas):
            raise ValueError("each player needs exactly two observables")
        return cls(state, meas).validate()


def load_strategy(path):
    with open(path) as fh:
        return QubitStrategy.from_dict(json.load(fh))


@dataclass(eq=False)
class SClassStrategy:
    """Qubit strategy with sigma_x / antidiag(e^{i t}, e^{-i t}) observables.

    ``angles`` are in [0, pi]; ``radii`` and ``phases`` are the polar form of
    the amplitudes, with the phase of |0..0> equal to 0.
    """

    strategy: QubitStrategy
    angles: np.ndarray
    radii: np.ndarray
    phases: np.ndarray

    @classmethod
    def from_angles_and_state(cls, angles, state):
        angles = np.clip(np.asarray(angles, dtype=float), 0.0, np.pi)
        state = np.array(state, dtype=complex)
        # global phase removed so the |0..0> amplitude is real and >= 0
        if abs(state[0]) > 0:
            state *= np.conj(state[0]) / abs(state[0])
            state[0] = abs(state[0])
        meas = [(la.SIGMA_X.copy(), la.antidiag_phase(t)) for t in angles]
        radii = np.abs(state)
        phases = np.angle(state)
        phases[0] = 0.0
        return cls(QubitStrategy(state, meas), angles, radii, phases)


def make_T_strategy(angles):
    angles = np.asarray(angles, dtype=float)
    n = angles.size - 1
    if n < 1:
        raise ValueError("need at least one player angle")
    state = np.zeros(2 ** n, dtype=complex)
    state[0] = 1 / np.sqrt(2)
    state[-1] = np.exp(1j * angles[0]) / np.sqrt(2)
    meas = [(la.SIGMA_X.copy(), la.antidiag_phase(t)) for t in angles[1:]]
    return QubitStrategy(state, meas)


def _check_players(game, strategy):
    if strategy.players != game.players:
        raise ValueError(f"strategy has {strategy.players} players, game has {game.players}")


def build_game_operator(game, strategy):
    """Dense sum_i f(i) M_1^(i_1) (x) ... (x) M_n^(i_n)."""
    _check_players(game, strategy)

    def build(table, ops):
        if not ops:
            return np.array([[table[0]]], dtype=complex)
        half = len(table) // 2
        m0, m1 = ops[0]
        return np.kron(m0, build(table[:half], ops[1:])) + np.kron(m1, build(table[half:], ops[1:]))

    return build(game.table, strategy.measurements)


def apply_game_operator(game, strategy, vec=None):
    """Game operator applied to a vector, without forming the dense matrix."""
    _check_players(game, strategy)
    psi = strategy.state if vec is None else np.asarray(vec, dtype=complex)
    out = la.apply_game_tensor(game.table, strategy.measurements, psi.reshape((2,) * game.players))
    return out.reshape(-1)


def score(game, strategy):
    """<psi| M |psi> for the game operator M."""
    v = apply_game_operator(game, strategy)
    val = np.vdot(strategy.state, v)
    tol = 1e-10 * max(1.0, game.scale)
    if abs(val.imag) > tol:
        raise ValueError(f"score has imaginary part {val.imag:.3e}; observables are not Hermitian")
    return float(val.real)


def reverse_diagonal_entries(game, angles):
    """Entries M[a, not a] of the game operator for canonical observables.

    Entry ``a`` (table order) is P_f(e^{i s_1 t_1}, ..., e^{i s_n t_n}) with
    s_k = +1 when a_k = 0 and -1 when a_k = 1.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.size != game.players:
        raise ValueError(f"expected {game.players} angles")
    signs = 1 - 2 * game.bits
    return eval_P_on_torus(game, signs * angles[None, :])


def strategy_distance(s1, s2):
    """Smallest delta for which the two strategies are delta-close."""
    if s1.players != s2.players:
        raise ValueError("strategies have different player counts")
    d = float(np.linalg.norm(s1.state - s2.state))
    for p1, p2 in zip(s1.measurements, s2.measurements):
        for a, b in zip(p1, p2):
            d = max(d, la.opnorm(a - b))
    return d


def _canonical_local_unitary(m0, m1, tol=1e-9):
    """Unitary U and angle theta with U m0 U* = sigma_x, U m1 U* = antidiag(e^{i theta}, .)."""
    w, vecs = np.linalg.eigh(0.5 * (m0 + la.dagger(m0)))
    if np.all(np.abs(w - w[0]) < tol):
        raise ValueError(
            "observable for input 0 is a multiple of the identity; such a pair has no "
            "qubit canonical form, use jordan.to_canonical_form for the embedded form"
        )
    vecs = vecs[:, ::-1]  # +1 eigenvector first
    n1 = la.dagger(vecs) @ m1 @ vecs
    p = float(np.real(n1[0, 0]))
    q = n1[0, 1]
    aq = abs(q)
    # D = diag(1, e^{i phi}) rotates q onto -i|q|
    phase = np.exp(1j * (np.angle(q) + np.pi / 2)) if aq > 1e-14 else 1.0
    d = np.diag([1.0, phase])
    u = la.HADAMARD @ d @ la.dagger(vecs)
    theta = float(np.arctan2(aq, p))
    return u, theta


def canonicalize_qubit_strategy(strategy):
    """Move a qubit strategy into the canonical class by local unitaries.

    Returns ``(s, unitaries, phase)`` with ``s.strategy.state`` equal to
    ``phase * (U_1 (x) ... (x) U_n) psi`` and each observable conjugated by
    its player's unitary.  The score is unchanged.
    """
    n = strategy.players
    us, angles = [], []
    for m0, m1 in strategy.measurements:
        u, t = _canonical_local_unitary(m0, m1)
        us.append(u)
        angles.append(t)
    t = strategy.state.reshape((2,) * n)
    for k, u in enumerate(us):
        t = la.apply_on_axis(u, t, k)
    state = t.reshape(-1)
    lead = state[0]
    phase = np.conj(lead) / abs(lead) if abs(lead) > 1e-14 else 1.0 + 0j
    state = phase * state
    state[0] = abs(state[0])
    return SClassStrategy.from_angles_and_state(angles, state), us, complex(phase)


def s_score_decomposition(game, s):
    """Terms (weight, z_value) with score = sum weight * z_value.

    One term per input string a with a_1 = 0, paired with its complement:
    weight = 2 r_a r_{not a} and z_value = Z_f(t_{not a} - t_a, s_1 t_1, ...)
    where s_k = (-1)^{a_k} and t_k are the canonical angles.
    """
    n = game.players
    N = 2 ** n
    out = []
    for a in range(N // 2):
        b = N - 1 - a
        w = 2.0 * s.radii[a] * s.radii[b]
        signs = 1 - 2 * game.bits[a]
        point = np.concatenate([[s.phases[b] - s.phases[a]], signs * s.angles])
        out.append((float(w), float(eval_Z(game, point))))
    return out


def tangent_kick(state, sigma, rng):
    """Move a unit vector by a random step of size sigma orthogonal to it."""
    if sigma == 0:
        return state.copy()
    v = rng.standard_normal(state.size) + 1j * rng.standard_normal(state.size)
    v -= np.vdot(state, v) * state
    v *= sigma / np.linalg.norm(v)
    out = state + v
    return out / np.linalg.norm(out)


def perturb_T(angles, sigma, rng, state_kick=False):
    """T strategy at Gaussian-perturbed angles, optionally with a state kick."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    angles = np.asarray(angles, dtype=float)
    noisy = angles + sigma * rng.standard_normal(angles.size) if sigma else angles.copy()
    s = make_T_strategy(noisy)
    if state_kick:
        s = QubitStrategy(tangent_kick(s.state, sigma, rng), s.measurements)
    return s


def _phase_free_distance(s1, s2):
    # min over a global phase c of ||psi1 - c psi2|| is attained at c = <psi2, psi1> / |.|;
    # the difference is formed explicitly to avoid cancellation in 2 - 2|<psi1, psi2>|
    ov = np.vdot(s2.state, s1.state)
    c = ov / abs(ov) if abs(ov) > 0 else 1.0
    d = float(np.linalg.norm(s1.state - c * s2.state))
    for p1, p2 in zip(s1.measurements, s2.measurements):
        for a, b in zip(p1, p2):
            d = max(d, la.opnorm(a - b))
    return d


def distance_to_optimal(game, strategy, maxima, refs=None):
    """Distance to the nearest optimal T strategy, after canonicalisation.

    ``refs`` may hold precomputed canonical forms of the optimal strategies.
    """
    _check_players(game, strategy)
    s = canonicalize_qubit_strategy(strategy)[0].strategy
    if refs is None:
        refs = [
            canonicalize_qubit_strategy(make_T_strategy(sign * m.point))[0].strategy
            for m in maxima.maxima for sign in (1.0, -1.0)
        ]
    return float(min(_phase_free_distance(s, ref) for ref in refs))
