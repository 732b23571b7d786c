"""Global maximisation of Z_f on the torus [-pi, pi]^(n+1).

The optimal quantum score q_f is the maximum of Z_f.  Maxima are located by
multi-start Newton ascent and checked against an exhaustive grid search
(:func:`grid_oracle_qf`) that shares no code with the Newton path beyond
the game table itself.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .game import eval_P_on_torus, eval_Z, grad_Z, hess_Z, wrap_angles

log = logging.getLogger(__name__)

MAX_GRID_EVALS = 10 ** 9
MAX_MAXIMA = 64


class NonConvergenceError(RuntimeError):
    """Raised when Newton refinement does not reach the gradient tolerance."""


@dataclass(frozen=True)
class OptimizerConfig:
    grid_points_per_dim: int = 12
    newton_max_iters: int = 100
    gradient_tol: float = 1e-10
    dedup_angle_tol: float = 1e-6
    global_value_tol: float = 1e-8
    rng_seed: int = 0
    random_starts: int | None = None  # default 10 * (n + 1)

    def __post_init__(self):
        if self.grid_points_per_dim < 4:
            raise ValueError("grid_points_per_dim must be >= 4")
        if self.newton_max_iters < 1:
            raise ValueError("newton_max_iters must be >= 1")
        for name in ("gradient_tol", "dedup_angle_tol", "global_value_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")
        if self.random_starts is not None and self.random_starts < 0:
            raise ValueError("random_starts must be non-negative")

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class CriticalPoint:
    point: np.ndarray
    value: float
    gradient_norm: float
    hessian: np.ndarray
    hessian_eigenvalues: np.ndarray

    @classmethod
    def at(cls, game, point):
        point = np.asarray(point, dtype=float)
        h = hess_Z(game, point)
        h = 0.5 * (h + h.T)
        return cls(
            point=point,
            value=float(eval_Z(game, point)),
            gradient_norm=float(np.linalg.norm(grad_Z(game, point))),
            hessian=h,
            hessian_eigenvalues=np.linalg.eigvalsh(h),
        )

    def to_dict(self):
        return {
            "point": self.point.tolist(),
            "value": self.value,
            "gradient_norm": self.gradient_norm,
            "hessian": self.hessian.tolist(),
            "hessian_eigenvalues": self.hessian_eigenvalues.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            point=np.asarray(d["point"], dtype=float),
            value=float(d["value"]),
            gradient_norm=float(d["gradient_norm"]),
            hessian=np.asarray(d["hessian"], dtype=float),
            hessian_eigenvalues=np.asarray(d["hessian_eigenvalues"], dtype=float),
        )


@dataclass
class MaximaSet:
    q_f: float
    maxima: list
    converged_fraction: float
    degenerate: bool = False
    warnings: list = field(default_factory=list)

    def points(self):
        return np.array([m.point for m in self.maxima])

    def to_dict(self):
        return {
            "q_f": self.q_f,
            "maxima": [m.to_dict() for m in self.maxima],
            "converged_fraction": self.converged_fraction,
            "degenerate": self.degenerate,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            q_f=float(d["q_f"]),
            maxima=[CriticalPoint.from_dict(m) for m in d["maxima"]],
            converged_fraction=float(d["converged_fraction"]),
            degenerate=bool(d.get("degenerate", False)),
            warnings=list(d.get("warnings", [])),
        )


# -- brute-force oracle --------------------------------------------------

def grid_axis(points_per_dim):
    return np.linspace(-np.pi, np.pi, points_per_dim, endpoint=False)


def grid_oracle_qf(game, points_per_dim, chunk=1 << 22):
    """Exhaustive maximum of Z_f on the uniform grid with the given resolution.

    Returns ``(value, point)``.  The grid has ``points_per_dim**(n+1)`` nodes
    spaced ``2*pi/points_per_dim`` apart, starting at -pi.
    """
    n = game.players
    k = int(points_per_dim)
    if k < 4:
        raise ValueError("points_per_dim must be >= 4")
    if float(k) ** (n + 1) > MAX_GRID_EVALS:
        raise ValueError(f"grid of {k}**{n + 1} points exceeds {MAX_GRID_EVALS} evaluations")
    axis = grid_axis(k)
    # cos(t0 + s) = cos t0 cos s - sin t0 sin s, with s = sum_k i_k t_k over
    # the (t_1..t_n) grid; every grid node is still evaluated exactly.
    rest = np.array(list(itertools.product(axis, repeat=n)))
    s = rest @ game.bits.T
    a = np.cos(s) @ game.table
    b = np.sin(s) @ game.table
    c0, s0 = np.cos(axis), np.sin(axis)
    best_val, best_idx = -np.inf, (0, 0)
    step = max(1, chunk // k)
    for start in range(0, len(rest), step):
        block = np.outer(c0, a[start:start + step]) - np.outer(s0, b[start:start + step])
        j = int(np.argmax(block))
        v = block.flat[j]
        if v > best_val:
            best_val = float(v)
            best_idx = (j // block.shape[1], start + j % block.shape[1])
    point = np.concatenate([[axis[best_idx[0]]], rest[best_idx[1]]])
    return best_val, point


def grid_error_bound(game, points_per_dim):
    """Upper bound on q_f minus the grid maximum (first-order Lipschitz)."""
    h = 2 * np.pi / points_per_dim
    return game.scale * (game.players + 1) * h / 2


# -- Newton ascent -------------------------------------------------------

def _newton_batch(game, x, config):
    """Damped, eigenvalue-modified Newton ascent on a batch of points.

    Returns (points, converged mask).  Where the Hessian is not negative
    definite its eigenvalues are replaced by -max(|h|, floor); a nearly
    singular Hessian therefore degrades to a scaled gradient step.
    """
    x = np.array(x, dtype=float, copy=True)
    scale = max(1.0, game.scale)
    floor = 1e-6 * scale
    max_step = np.pi / 2
    slack = 64 * np.finfo(float).eps * scale
    converged = np.zeros(len(x), dtype=bool)
    active = np.ones(len(x), dtype=bool)
    for _ in range(config.newton_max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa = x[idx]
        g = grad_Z(game, xa)
        gn = np.linalg.norm(g, axis=1)
        done = gn <= config.gradient_tol
        converged[idx[done]] = True
        active[idx[done]] = False
        keep = ~done
        idx, xa, g = idx[keep], xa[keep], g[keep]
        if idx.size == 0:
            break
        h = hess_Z(game, xa)
        w, v = np.linalg.eigh(0.5 * (h + np.swapaxes(h, 1, 2)))
        wmod = np.maximum(np.abs(w), floor)
        coeff = np.einsum("nba,nb->na", v, g) / wmod
        p = np.einsum("nab,nb->na", v, coeff)
        pmax = np.max(np.abs(p), axis=1, keepdims=True)
        p *= np.minimum(1.0, max_step / np.maximum(pmax, 1e-300))
        z0 = eval_Z(game, xa)
        t = np.ones(len(idx))
        accepted = np.zeros(len(idx), dtype=bool)
        for _ in range(40):
            trial = xa + t[:, None] * p
            ok = (eval_Z(game, trial) >= z0 - slack) & ~accepted
            xa[ok] = trial[ok]
            accepted |= ok
            if accepted.all():
                break
            t[~accepted] *= 0.5
        x[idx] = xa
        stalled = ~accepted
        active[idx[stalled]] = False
    g = grad_Z(game, x)
    converged |= np.linalg.norm(g, axis=1) <= config.gradient_tol
    return x, converged


def refine_maximum(game, seed, config=None):
    """Newton-polish one seed into a critical point.

    Raises :class:`NonConvergenceError` if the gradient tolerance is not
    met within ``config.newton_max_iters`` iterations.
    """
    config = config or OptimizerConfig()
    seed = np.asarray(seed, dtype=float)
    if seed.shape != (game.players + 1,):
        raise ValueError(f"seed must have length {game.players + 1}")
    x, ok = _newton_batch(game, seed[None, :], config)
    if not ok[0]:
        gn = float(np.linalg.norm(grad_Z(game, x[0])))
        raise NonConvergenceError(f"Newton did not converge from {seed.tolist()} (|grad| = {gn:.3e})")
    return CriticalPoint.at(game, x[0])


def _periodic_local_maxima(values):
    mask = np.ones(values.shape, dtype=bool)
    for ax in range(values.ndim):
        mask &= values >= np.roll(values, 1, axis=ax)
        mask &= values >= np.roll(values, -1, axis=ax)
    return mask


def _seed_points(game, config, rng):
    n = game.players
    k = config.grid_points_per_dim
    axis = grid_axis(k)
    mesh = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1)
    pvals = eval_P_on_torus(game, mesh)
    mod = np.abs(pvals)
    mask = _periodic_local_maxima(np.round(mod, 12))
    flat = mod.reshape(-1)
    top = np.argsort(-flat, kind="stable")[: min(flat.size, 8 * (n + 1))]
    mask.reshape(-1)[top] = True
    rest = mesh.reshape(-1, n)[mask.reshape(-1)]
    # the phase t_0 that maximises Z over its own axis is -arg P
    t0 = -np.angle(pvals.reshape(-1)[mask.reshape(-1)])
    grid_seeds = np.hstack([t0[:, None], rest])
    count = 10 * (n + 1) if config.random_starts is None else config.random_starts
    rand_seeds = rng.uniform(-np.pi, np.pi, size=(count, n + 1))
    return np.vstack([grid_seeds, rand_seeds])


def _dedup(points, values, tol, limit=None):
    """Greedy clustering in wrapped infinity-norm; best value represents.

    Stops once ``limit`` representatives are exceeded.
    """
    order = np.lexsort(tuple(points[:, ::-1].T) + (-values,))
    reps = []
    for i in order:
        if reps:
            d = np.max(np.abs(wrap_angles(points[reps] - points[i])), axis=1)
            if np.min(d) <= tol:
                continue
        reps.append(i)
        if limit is not None and len(reps) > limit:
            break
    return reps


def find_global_maxima(game, config=None):
    """All global maxima of Z_f, up to wrapping, with their Hessians."""
    config = config or OptimizerConfig()
    n = game.players
    rng = np.random.default_rng(config.rng_seed)
    seeds = _seed_points(game, config, rng)
    warnings = []
    if n <= 3:
        oracle_k = {1: 64, 2: 48, 3: 24}[n]
        oracle_val, oracle_pt = grid_oracle_qf(game, oracle_k)
        seeds = np.vstack([seeds, oracle_pt[None, :]])
    x, ok = _newton_batch(game, seeds, config)
    converged_fraction = float(np.mean(ok))
    if converged_fraction < 0.5:
        warnings.append(f"only {converged_fraction:.0%} of Newton starts converged")
    if not ok.any():
        raise NonConvergenceError("no Newton start converged")
    pts = wrap_angles(x[ok])
    # Z is even, so every maximum comes with its negation
    pts = wrap_angles(np.vstack([pts, -pts]))
    vals = eval_Z(game, pts)
    q_f = float(np.max(vals))
    tol = config.global_value_tol * max(1.0, abs(q_f))
    top = vals >= q_f - tol
    pts, vals = pts[top], vals[top]
    if n <= 3 and oracle_val > q_f + tol:
        warnings.append(f"grid oracle value {oracle_val:.12g} exceeds optimiser value {q_f:.12g}")
    reps = _dedup(pts, vals, config.dedup_angle_tol, limit=MAX_MAXIMA)
    degenerate = False
    if len(reps) > MAX_MAXIMA:
        degenerate = True
        warnings.append(f"more than {MAX_MAXIMA} distinct maxima; keeping {MAX_MAXIMA} (maxima manifold)")
        reps = reps[:MAX_MAXIMA]
    maxima = [CriticalPoint.at(game, pts[i]) for i in reps]
    maxima.sort(key=lambda m: tuple(np.round(m.point, 9)))
    for w in warnings:
        log.warning(w)
    return MaximaSet(q_f=q_f, maxima=maxima, converged_fraction=converged_fraction,
                     degenerate=degenerate, warnings=warnings)


def compute_qf(game, config=None):
    """Optimal quantum score q_f = max Z_f."""
    return find_global_maxima(game, config).q_f


# -- restricted maximum --------------------------------------------------

def _neg_modsq_and_grad(game, theta):
    p = eval_P_on_torus(game, theta)
    mono = np.exp(1j * (theta @ game.bits.T)) * game.table
    dp = 1j * (mono @ game.bits)
    return -abs(p) ** 2, -2.0 * np.real(np.conj(p) * dp)


def _box_max(game, lo, hi, pinned, seeds_per_dim, rng):
    """Maximise |P_f(e^{i theta})| over a box, with some coordinates fixed."""
    n = game.players
    free = [j for j in range(n) if j not in pinned]
    base = np.zeros(n)
    for j, v in pinned.items():
        base[j] = v
    if not free:
        return abs(eval_P_on_torus(game, base))
    axes = [np.linspace(lo[j], hi[j], seeds_per_dim) for j in free]
    grid = np.array(list(itertools.product(*axes)))
    full = np.tile(base, (len(grid), 1))
    full[:, free] = grid
    vals = np.abs(eval_P_on_torus(game, full))
    best = float(np.max(vals))
    order = np.argsort(-vals, kind="stable")[:8]
    starts = [grid[i] for i in order]
    starts += [rng.uniform([lo[j] for j in free], [hi[j] for j in free]) for _ in range(4)]
    bounds = [(lo[j], hi[j]) for j in free]

    def fun(y):
        th = base.copy()
        th[free] = y
        f, g = _neg_modsq_and_grad(game, th)
        return f, g[free]

    for s in starts:
        res = minimize(fun, s, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 500})
        best = max(best, math.sqrt(max(0.0, -float(res.fun))))
    return best


def compute_qf_prime(game, config=None, allow_large=False, seeds_per_dim=9):
    """Maximum of Z_f outside the open quadrant pair A and -A.

    ``A`` is the set of angle vectors with every t_j in (0, pi) for j >= 1.
    The complement is covered by the closed mixed-sign boxes together with
    the faces where some t_j is pinned to 0 or pi.  The free phase t_0 is
    eliminated analytically: max over t_0 of Z_f is |P_f|.
    """
    config = config or OptimizerConfig()
    n = game.players
    if n > 4 and not allow_large:
        raise ValueError("compute_qf_prime enumerates 2**n regions; pass allow_large=True for n > 4")
    rng = np.random.default_rng(config.rng_seed)
    best = 0.0
    for signs in itertools.product((1, -1), repeat=n):
        if all(s == 1 for s in signs) or all(s == -1 for s in signs):
            continue
        lo = [0.0 if s == 1 else -np.pi for s in signs]
        hi = [np.pi if s == 1 else 0.0 for s in signs]
        best = max(best, _box_max(game, lo, hi, {}, seeds_per_dim, rng))
    lo, hi = [-np.pi] * n, [np.pi] * n
    for j in range(n):
        for v in (0.0, np.pi):
            best = max(best, _box_max(game, lo, hi, {j: v}, seeds_per_dim, rng))
    return best
