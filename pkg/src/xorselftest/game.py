"""Binary nonlocal XOR games and their trigonometric score functions.

A game on ``n`` players is a real table ``f(i_1, ..., i_n)`` stored
lexicographically with ``i_1`` as the most significant bit, so the table
index of an input string is ``sum_k i_k * 2**(n - k)``.

Two functions are attached to every game::

    P_f(l_1, ..., l_n)        = sum_i f(i) l_1**i_1 ... l_n**i_n
    Z_f(t_0, t_1, ..., t_n)   = sum_i f(i) cos(t_0 + sum_k i_k t_k)

and they satisfy ``Z_f(t) = Re[exp(i t_0) P_f(exp(i t_1), ..., exp(i t_n))]``.
Angle vectors always carry the extra leading phase ``t_0``.
"""

import functools
import json
import math
from dataclasses import dataclass

import numpy as np

MAX_PLAYERS = 12


def wrap_angles(angles):
    """Reduce angles to the canonical interval (-pi, pi]."""
    a = np.asarray(angles, dtype=float)
    w = a - 2.0 * np.pi * np.round(a / (2.0 * np.pi))
    return np.where(w <= -np.pi, w + 2.0 * np.pi, w)


def wrapped_distance(p, q):
    """Infinity-norm distance between two angle vectors on the torus."""
    d = wrap_angles(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    return float(np.max(np.abs(d))) if d.size else 0.0


@functools.lru_cache(maxsize=None)
def input_bits(n):
    """All input strings as a (2**n, n) 0/1 array in table order."""
    idx = np.arange(2 ** n)
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    bits.setflags(write=False)
    return bits


@functools.lru_cache(maxsize=None)
def _extended_bits(n):
    # leading column of ones: the phase t_0 enters every cosine
    ext = np.hstack([np.ones((2 ** n, 1), dtype=int), input_bits(n)])
    ext.setflags(write=False)
    return ext


@dataclass(frozen=True, eq=False)
class XorGame:
    """An ``n``-player binary XOR game given by its score table."""

    players: int
    table: np.ndarray

    def __post_init__(self):
        n = int(self.players)
        if not 1 <= n <= MAX_PLAYERS:
            raise ValueError(f"players must be in [1, {MAX_PLAYERS}], got {self.players}")
        table = np.array(self.table, dtype=float).reshape(-1)
        if table.size != 2 ** n:
            raise ValueError(f"table has {table.size} entries, expected 2**{n} = {2 ** n}")
        if not np.all(np.isfinite(table)):
            raise ValueError("table entries must be finite")
        table.setflags(write=False)
        object.__setattr__(self, "players", n)
        object.__setattr__(self, "table", table)

    def __eq__(self, other):
        if not isinstance(other, XorGame):
            return NotImplemented
        return self.players == other.players and np.array_equal(self.table, other.table)

    def __hash__(self):
        return hash((self.players, self.table.tobytes()))

    def __repr__(self):
        return f"XorGame(players={self.players}, table={self.table.tolist()})"

    @property
    def bits(self):
        return input_bits(self.players)

    @property
    def scale(self):
        """Sum of absolute table entries; bounds |Z_f| and its derivatives."""
        return float(np.sum(np.abs(self.table)))

    def value(self, *inputs):
        """Score f(i_1, ..., i_n) for one input string."""
        if len(inputs) != self.players:
            raise ValueError(f"expected {self.players} input bits")
        idx = 0
        for b in inputs:
            idx = 2 * idx + (int(b) & 1)
        return float(self.table[idx])

    def to_dict(self):
        return {"players": self.players, "table": [float(x) for x in self.table]}

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ValueError("game must be a JSON object")
        missing = {"players", "table"} - set(data)
        if missing:
            raise ValueError(f"game is missing field(s): {', '.join(sorted(missing))}")
        players = data["players"]
        if isinstance(players, bool) or not isinstance(players, int):
            raise ValueError("field 'players' must be an integer")
        table = data["table"]
        if not isinstance(table, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in table
        ):
            raise ValueError("field 'table' must be a list of numbers")
        return cls(players, table)


def load_game(path):
    """Read a game from a JSON file ``{"players": n, "table": [...]}``."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return XorGame.from_dict(data)


def save_game(game, path):
    with open(path, "w") as fh:
        json.dump(game.to_dict(), fh, indent=2)
        fh.write("\n")


# -- named games ---------------------------------------------------------

def chsh():
    """CHSH: f(1,1) = -1 and every other entry 1."""
    return XorGame(2, [1.0, 1.0, 1.0, -1.0])


def ghz3():
    """Three-player GHZ game: f(000) = -1, f(011) = f(101) = f(110) = 1."""
    table = np.zeros(8)
    table[0b000] = -1.0
    table[0b011] = table[0b101] = table[0b110] = 1.0
    return XorGame(3, table)


def h_alpha(alpha):
    """The tilted family h(0,0) = h(0,1) = alpha, h(1,0) = 1, h(1,1) = -1."""
    return XorGame(2, [alpha, alpha, 1.0, -1.0])


def constant_game(n, c=1.0):
    return XorGame(n, np.full(2 ** n, float(c)))


BUILTIN_GAMES = {
    "chsh": chsh,
    "ghz3": ghz3,
    "const1": lambda: constant_game(2, 1.0),
}


# -- evaluation ----------------------------------------------------------

def _check_point(game, point):
    t = np.asarray(point, dtype=float)
    if t.shape[-1] != game.players + 1:
        raise ValueError(f"angle vector must have length {game.players + 1}, got {t.shape[-1]}")
    return t


def _phases(game, t):
    # t has shape (..., n+1); result (..., 2**n)
    return t[..., :1] + t[..., 1:] @ game.bits.T


def eval_P(game, lambdas):
    """Evaluate the multilinear polynomial P_f at complex arguments."""
    lam = np.asarray(lambdas, dtype=complex)
    if lam.shape[-1] != game.players:
        raise ValueError(f"expected {game.players} arguments, got {lam.shape[-1]}")
    # monomials prod_k lam_k**i_k, vectorised over leading axes
    mono = np.prod(np.where(game.bits.astype(bool), lam[..., None, :], 1.0), axis=-1)
    out = mono @ game.table
    return complex(out) if out.ndim == 0 else out


def eval_P_on_torus(game, angles):
    """P_f(exp(i*angles)) for angles of shape (..., n)."""
    a = np.asarray(angles, dtype=float)
    if a.shape[-1] != game.players:
        raise ValueError(f"expected {game.players} angles, got {a.shape[-1]}")
    out = np.exp(1j * (a @ game.bits.T)) @ game.table
    return complex(out) if out.ndim == 0 else out


def eval_Z(game, point):
    """Z_f at one point or a batch of points of shape (..., n+1)."""
    t = _check_point(game, point)
    out = np.cos(_phases(game, t)) @ game.table
    return float(out) if out.ndim == 0 else out


def grad_Z(game, point):
    t = _check_point(game, point)
    w = np.sin(_phases(game, t)) * game.table
    return -(w @ _extended_bits(game.players))


def hess_Z(game, point):
    t = _check_point(game, point)
    ext = _extended_bits(game.players)
    w = np.cos(_phases(game, t)) * game.table
    # -sum_i f(i) e_a e_b cos(...) with e = (1, i_1, ..., i_n)
    return -np.einsum("...k,ka,kb->...ab", w, ext, ext)


def transform_game(game, b0, b):
    """Game g(i) = (-1)**b0 * f(b XOR i)."""
    b = [int(x) & 1 for x in b]
    if len(b) != game.players:
        raise ValueError(f"flip vector must have length {game.players}")
    mask = 0
    for bit in b:
        mask = 2 * mask + bit
    idx = np.arange(2 ** game.players) ^ mask
    sign = -1.0 if int(b0) & 1 else 1.0
    return XorGame(game.players, sign * game.table[idx])


def transform_angles_back(b0, b, beta):
    """Map angles of the transformed game to the original game.

    If ``g = transform_game(f, b0, b)`` then ``Z_g(beta) = Z_f(alpha)`` with
    ``alpha`` returned here.
    """
    beta = np.asarray(beta, dtype=float)
    b = np.asarray([int(x) & 1 for x in b])
    alpha = np.empty_like(beta)
    alpha[1:] = np.where(b == 1, -beta[1:], beta[1:])
    alpha[0] = beta[0] + float(np.dot(b, beta[1:])) + (math.pi if int(b0) & 1 else 0.0)
    return alpha


def transform_angles_forward(b0, b, alpha):
    """Inverse of :func:`transform_angles_back`."""
    alpha = np.asarray(alpha, dtype=float)
    b = np.asarray([int(x) & 1 for x in b])
    beta = np.empty_like(alpha)
    beta[1:] = np.where(b == 1, -alpha[1:], alpha[1:])
    beta[0] = alpha[0] - (math.pi if int(b0) & 1 else 0.0) - float(np.dot(b, beta[1:]))
    return beta
