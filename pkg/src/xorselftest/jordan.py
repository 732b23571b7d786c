"""Simultaneous block decomposition of two +/-1-valued observables.

Two Hermitian involutions X1, X2 on C^d split C^d into mutually
orthogonal invariant pieces of dimension one or two.  After a unitary
embedding into C^(2m) every piece becomes a 2x2 block on which X1 is
sigma_x and X2 is [[0, e^{i t}], [e^{-i t}, 0]] with t in [0, pi].

The embedding rows are ordered block-major: row ``2*l + r`` is qubit
component ``r`` of block ``l``.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag, orth

from . import _linalg as la
from .game import eval_P_on_torus, wrap_angles
from .strategy import SClassStrategy, make_T_strategy, score as qubit_score

INVOLUTION_TOL = 1e-8
PHASE_TOL = 1e-10
MAX_JOINT_DIM = 2 ** 16

ORIGIN_2D = "2d"
ORIGIN_PAIRED = "1d-pair"
ORIGIN_SINGLE = "1d"
_ORIGIN_ORDER = {ORIGIN_2D: 0, ORIGIN_PAIRED: 1, ORIGIN_SINGLE: 2}


@dataclass(eq=False)
class InvolutionPair:
    X1: np.ndarray
    X2: np.ndarray

    def __post_init__(self):
        self.X1 = np.atleast_2d(np.asarray(self.X1, dtype=complex))
        self.X2 = np.atleast_2d(np.asarray(self.X2, dtype=complex))
        d = self.X1.shape[0]
        if self.X1.shape != (d, d) or self.X2.shape != (d, d) or d < 1:
            raise ValueError("X1 and X2 must be square matrices of equal size")

    @property
    def dim(self):
        return self.X1.shape[0]

    def validate(self, tol=INVOLUTION_TOL):
        for name in ("X1", "X2"):
            defect = la.involution_defect(getattr(self, name))
            if defect > tol:
                raise ValueError(f"{name} is not a Hermitian involution (defect {defect:.3e})")
        return self

    def to_dict(self):
        return {"dim": self.dim, "X1": la.complex_to_pairs(self.X1), "X2": la.complex_to_pairs(self.X2)}

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or not {"dim", "X1", "X2"} <= set(d):
            raise ValueError("matrix file needs fields 'dim', 'X1' and 'X2'")
        dim = d["dim"]
        if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
            raise ValueError("field 'dim' must be a positive integer")
        x1 = la.pairs_to_complex(d["X1"], (dim, dim))
        x2 = la.pairs_to_complex(d["X2"], (dim, dim))
        return cls(x1, x2)


def load_pair(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return InvolutionPair.from_dict(data)


@dataclass
class Block:
    theta: float
    origin: str
    signs: tuple = ()  # (x1, x2) eigenvalue signs of the source vectors for 1D pieces


@dataclass(eq=False)
class BlockDecomposition:
    embedding: np.ndarray  # (2m, d) isometry
    blocks: list

    @property
    def m(self):
        return len(self.blocks)

    @property
    def thetas(self):
        return np.array([b.theta for b in self.blocks])

    def canonical_matrices(self):
        x1 = block_diag(*([la.SIGMA_X] * self.m)) if self.m else np.zeros((0, 0))
        x2 = block_diag(*[la.antidiag_phase(b.theta) for b in self.blocks]) if self.m else np.zeros((0, 0))
        return x1, x2

    def isometry_defect(self):
        u = self.embedding
        return float(np.max(np.abs(la.dagger(u) @ u - np.eye(u.shape[1]))))

    def residuals(self, pair):
        u = self.embedding
        x1, x2 = self.canonical_matrices()
        return (float(np.max(np.abs(la.dagger(u) @ x1 @ u - pair.X1))),
                float(np.max(np.abs(la.dagger(u) @ x2 @ u - pair.X2))))

    def to_dict(self, pair=None):
        d = {
            "m": self.m,
            "blocks": [{"theta": b.theta, "origin": b.origin, "signs": list(b.signs)} for b in self.blocks],
            "embedding": la.complex_to_pairs(self.embedding),
            "isometry_defect": self.isometry_defect(),
        }
        if pair is not None:
            d["reconstruction_residual"] = max(self.residuals(pair))
        return d


# -- invariant subspace of a pair -------------------------------------

def invariant_subspace(p1, p2, tol=1e-8):
    """Orthonormal basis (columns) of a subspace of dimension <= 2 left
    invariant by both projectors."""
    p1 = np.atleast_2d(np.asarray(p1, dtype=complex))
    p2 = np.atleast_2d(np.asarray(p2, dtype=complex))
    d = p1.shape[0]
    q1 = orth(p1, rcond=1e-10)
    if q1.shape[1] == 0:
        q2 = orth(p2, rcond=1e-10)
        if q2.shape[1] == 0:
            return np.eye(d, 1, dtype=complex)
        return q2[:, :1]
    u_, s, vh = np.linalg.svd(p2 @ q1)
    u = q1 @ np.conj(vh[0])
    sigma = s[0]
    if sigma < tol or sigma > 1 - tol:
        return u[:, None]
    w = p2 @ u
    basis = orth(np.stack([u, w], axis=1))
    return basis


# -- spectral block decomposition ----------------------------------------

def _eig_split(h, basis):
    """Eigen-decomposition of a Hermitian operator compressed to ``basis``."""
    if basis.shape[1] == 0:
        return np.zeros(0), basis
    c = la.dagger(basis) @ h @ basis
    w, v = np.linalg.eigh(0.5 * (c + la.dagger(c)))
    return w, basis @ v


def block_decompose(pair, tol=INVOLUTION_TOL):
    """Jordan decomposition of an involution pair via the unitary X1 X2."""
    pair.validate(tol)
    x1, x2 = pair.X1, pair.X2
    d = pair.dim
    v = x1 @ x2
    # in a 2D block (u, X1 u) the product acts as diag(e^{-it}, e^{it});
    # its anti-Hermitian part separates the two halves
    a = (v - la.dagger(v)) / 2j
    wa, va = np.linalg.eigh(0.5 * (a + la.dagger(a)))
    neg = va[:, wa < -PHASE_TOL]
    zero = va[:, np.abs(wa) <= PHASE_TOL]

    vecs, blocks = [], []
    _, us = _eig_split(0.5 * (v + la.dagger(v)), neg)
    for k in range(us.shape[1]):
        u = us[:, k]
        theta = float(np.clip(-np.angle(np.vdot(u, v @ u)), 0.0, np.pi))
        vecs.append((u, x1 @ u))
        blocks.append(Block(theta, ORIGIN_2D))

    # on the zero space X1 and X2 commute: find joint eigenvectors
    groups = {(1, 1): [], (1, -1): [], (-1, 1): [], (-1, -1): []}
    w1, b1 = _eig_split(x1, zero)
    for s1 in (1, -1):
        sub = b1[:, np.sign(w1) == s1] if b1.shape[1] else b1
        w2, b2 = _eig_split(x2, sub)
        for k in range(b2.shape[1]):
            groups[(s1, 1 if w2[k] >= 0 else -1)].append(b2[:, k])

    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    # sigma_x eigenbasis: u_a -> |+>, u_b -> |->.  Stored as (image of |0>, image of |1>) rows
    for (sa, sb), theta in (((1, 1), (-1, -1)), 0.0), (((1, -1), (-1, 1)), np.pi):
        ga, gb = groups[sa], groups[sb]
        k = min(len(ga), len(gb))
        for ua, ub in zip(ga[:k], gb[:k]):
            vecs.append((plus[0] * ua + minus[0] * ub, plus[1] * ua + minus[1] * ub))
            blocks.append(Block(theta, ORIGIN_PAIRED, (sa, sb)))
        groups[sa], groups[sb] = ga[k:], gb[k:]
    for (s1, s2), rest in groups.items():
        for u in rest:
            e = plus if s1 == 1 else minus
            vecs.append((e[0] * u, e[1] * u))
            blocks.append(Block(0.0 if s1 == s2 else np.pi, ORIGIN_SINGLE, (s1, s2)))

    order = sorted(range(len(blocks)), key=lambda i: (blocks[i].theta, _ORIGIN_ORDER[blocks[i].origin], i))
    rows = []
    for i in order:
        r0, r1 = vecs[i]
        rows += [np.conj(r0), np.conj(r1)]
    emb = np.array(rows) if rows else np.zeros((0, d), dtype=complex)
    return BlockDecomposition(emb, [blocks[i] for i in order])


def canonicalize_pair(pair):
    """(U, X1', X2') with U* X_i' U = X_i."""
    dec = block_decompose(pair)
    x1c, x2c = dec.canonical_matrices()
    return dec.embedding, x1c, x2c


# -- arbitrary-dimension strategies --------------------------------------

@dataclass(eq=False)
class GeneralStrategy:
    """Joint pure state with one involution pair per player, any dimensions."""

    state: np.ndarray
    pairs: list

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=complex).reshape(-1)
        self.pairs = [p if isinstance(p, InvolutionPair) else InvolutionPair(*p) for p in self.pairs]
        dims = self.dims
        if int(np.prod(dims)) != self.state.size:
            raise ValueError(f"state has {self.state.size} entries, player dimensions {dims}")

    @property
    def dims(self):
        return tuple(p.dim for p in self.pairs)


def general_score(game, strategy):
    if len(strategy.pairs) != game.players:
        raise ValueError("player count mismatch")
    ops = [(p.X1, p.X2) for p in strategy.pairs]
    t = strategy.state.reshape(strategy.dims)
    return float(np.real(np.vdot(t, la.apply_game_tensor(game.table, ops, t))))


@dataclass(eq=False)
class CanonicalStrategy:
    """Canonical-form strategy: player k holds C^2 (x) C^{m_k}.

    ``state`` has shape (2, m_1, 2, m_2, ...); player k measures
    sigma_x (x) I for input 0 and sum_l antidiag(e^{i t_kl}) (x) |l><l| for
    input 1.
    """

    angles: list  # per player: array of m_k angles in [0, pi]
    state: np.ndarray

    def __post_init__(self):
        self.angles = [np.clip(np.asarray(a, dtype=float).reshape(-1), 0.0, np.pi) for a in self.angles]
        shape = tuple(x for a in self.angles for x in (2, a.size))
        self.state = np.asarray(self.state, dtype=complex).reshape(shape)

    @property
    def players(self):
        return len(self.angles)

    @property
    def block_counts(self):
        return tuple(a.size for a in self.angles)

    def player_operators(self, k):
        a = self.angles[k]
        m = a.size
        t1 = np.zeros((2 * m, 2 * m), dtype=complex)
        e = np.exp(1j * a)
        idx = np.arange(m)
        t1[idx, m + idx] = e
        t1[m + idx, idx] = np.conj(e)
        return np.kron(la.SIGMA_X, np.eye(m)), t1

    def flat_tensor(self):
        return self.state.reshape(tuple(2 * m for m in self.block_counts))

    def to_dict(self):
        return {"angles": [a.tolist() for a in self.angles],
                "state": la.complex_to_pairs(self.state.reshape(-1))}


def canonical_score(game, cs):
    ops = [cs.player_operators(k) for k in range(cs.players)]
    t = cs.flat_tensor()
    return float(np.real(np.vdot(t, la.apply_game_tensor(game.table, ops, t))))


def to_canonical_form(strategy):
    """Canonical form and per-player embeddings of a general strategy.

    Returns ``(cs, decompositions)``.  The state is mapped through the
    tensor product of the embeddings, with each player's block-major rows
    reordered to qubit-major.
    """
    dims = strategy.dims
    if int(np.prod(dims)) > MAX_JOINT_DIM:
        raise ValueError(f"joint dimension {int(np.prod(dims))} exceeds {MAX_JOINT_DIM}")
    decs = [block_decompose(p) for p in strategy.pairs]
    t = strategy.state.reshape(dims)
    for k, dec in enumerate(decs):
        t = la.apply_on_axis(dec.embedding, t, k)
    shape = []
    for dec in decs:
        shape += [dec.m, 2]
    t = t.reshape(shape)
    perm = []
    for k in range(len(decs)):
        perm += [2 * k + 1, 2 * k]
    t = np.transpose(t, perm)
    return CanonicalStrategy([dec.thetas for dec in decs], t), decs


@dataclass
class QubitComponent:
    index: tuple
    weight: float
    phase: complex
    state: np.ndarray
    score: float
    angles: np.ndarray = field(default=None, repr=False)


def decompose_canonical(game, cs):
    """Split a canonical strategy into weighted qubit strategies.

    The total score equals sum weight * score over the returned components.
    """
    n = cs.players
    if n != game.players:
        raise ValueError("player count mismatch")
    t = cs.state
    # bring to (l_1, ..., l_n, r_1, ..., r_n)
    t = np.transpose(t, [2 * k + 1 for k in range(n)] + [2 * k for k in range(n)])
    comps = []
    for idx in np.ndindex(*cs.block_counts):
        vec = t[idx].reshape(-1)
        nrm = float(np.linalg.norm(vec))
        if nrm == 0.0:
            continue
        lead = vec[0]
        ph = lead / abs(lead) if abs(lead) > 1e-14 else 1.0 + 0j
        lam = vec / (nrm * ph)
        lam[0] = abs(lam[0])
        angles = np.array([cs.angles[k][idx[k]] for k in range(n)])
        s = SClassStrategy.from_angles_and_state(angles, lam).strategy
        comps.append(QubitComponent(tuple(int(i) for i in idx), nrm ** 2, complex(ph), lam,
                                    qubit_score(game, s), angles))
    return comps


def quadrant_maximum(maxima):
    """The global maximum (or its negation) with all player angles in (0, pi)."""
    for m in maxima.maxima:
        for sign in (1.0, -1.0):
            p = wrap_angles(sign * m.point)
            if np.all((p[1:] > 0) & (p[1:] < np.pi)):
                return p
    raise ValueError("no global maximum lies in the positive quadrant; normalise the game first")


def ideal_state(game, alpha):
    """Optimal qubit state for the maximum ``alpha``.

    Its |1..1> amplitude carries the phase conj(P)/|P| with P = P_f(e^{i alpha}).
    """
    p = eval_P_on_torus(game, np.asarray(alpha)[1:])
    if abs(p) < 1e-9:
        raise ValueError("P_f vanishes at the maximum; the game is degenerate")
    a0 = -np.angle(p)
    return make_T_strategy(np.concatenate([[a0], np.asarray(alpha)[1:]])).state


def nearest_ideal_product(game, cs, maxima):
    """Return (gamma, ||Lambda - g (x) gamma||) for the ideal qubit state g."""
    alpha = quadrant_maximum(maxima)
    g = ideal_state(game, alpha)
    n = cs.players
    gamma = np.zeros(cs.block_counts, dtype=complex)
    for c in decompose_canonical(game, cs):
        gamma[c.index] = np.sqrt(c.weight) * c.phase
    prod = np.multiply.outer(g.reshape((2,) * n), gamma)
    # (r_1..r_n, l_1..l_n) -> (r_1, l_1, r_2, l_2, ...)
    perm = [x for k in range(n) for x in (k, n + k)]
    prod = np.transpose(prod, perm)
    return gamma, float(np.linalg.norm(cs.state - prod))


def random_involution(d, rng, plus_dim=None):
    """Random Hermitian involution with a given (or random) +1 multiplicity."""
    if plus_dim is None:
        plus_dim = int(rng.integers(0, d + 1))
    u = la.random_unitary(d, rng)
    signs = np.array([1.0] * plus_dim + [-1.0] * (d - plus_dim))
    return (u * signs) @ la.dagger(u)


def random_block_pair(thetas, extra_signs, rng):
    """Involution pair built from known blocks, hidden by a random unitary.

    ``thetas`` are 2D block angles in (0, pi); ``extra_signs`` lists (x1, x2)
    sign pairs of additional 1D pieces.
    """
    blocks1, blocks2 = [], []
    for t in thetas:
        blocks1.append(la.SIGMA_X)
        blocks2.append(la.antidiag_phase(t))
    for s1, s2 in extra_signs:
        blocks1.append(np.array([[s1]], dtype=complex))
        blocks2.append(np.array([[s2]], dtype=complex))
    x1 = block_diag(*blocks1)
    x2 = block_diag(*blocks2)
    u = la.random_unitary(x1.shape[0], rng)
    return InvolutionPair(u @ x1 @ la.dagger(u), u @ x2 @ la.dagger(u))
