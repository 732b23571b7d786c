"""Empirical second-order robustness: distance <= C * sqrt(eps).

Near-optimal strategies are sampled at prescribed score deficits eps and
their distance to the optimal strategy is recorded.  The envelope constant
C and the log-log slope of the envelope are then fitted.  The module also
holds the quadratic-form projection and the near-maximum check on Z_f.
"""

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import _linalg as la
from .game import eval_Z, transform_game
from .jordan import CanonicalStrategy, canonical_score, ideal_state, nearest_ideal_product, quadrant_maximum
from .optimizer import find_global_maxima
from .strategy import (
    QubitStrategy,
    canonicalize_qubit_strategy,
    distance_to_optimal,
    make_T_strategy,
    score,
)
from .verdict import check_condition_A, classify

log = logging.getLogger(__name__)

STRATEGY_CLASSES = ("T", "S", "qubit", "canonical")
EPS_WINDOW = 0.2
MAX_ATTEMPTS = 10 ** 5


class NotRobustError(RuntimeError):
    """The game is not a second-order robust self-test, so no experiment runs."""

    def __init__(self, verdict):
        super().__init__(f"game is not a robust self-test (fails {verdict.reason()})")
        self.verdict = verdict


def quadform_project(H, y, tol=1e-10):
    """Project a unit vector onto the top eigenspace of a symmetric matrix.

    Returns ``(z, bound)`` where ``z`` is the normalised projection, so that
    z^T H z is the top eigenvalue h1 and
    ||z - y|| <= bound = sqrt(2 (h1 - y^T H y) / (h1 - h2)).
    """
    H = np.asarray(H, dtype=float)
    y = np.asarray(y, dtype=float)
    if abs(np.linalg.norm(y) - 1) > tol:
        raise ValueError("y must be a unit vector")
    w, v = np.linalg.eigh(0.5 * (H + H.T))
    h1 = w[-1]
    top = w >= h1 - tol * max(1.0, abs(h1))
    if top.all():
        raise ValueError("H needs at least two distinct eigenvalues")
    h2 = w[~top][-1]
    coeff = v.T @ y
    proj = v[:, top] @ coeff[top]
    pn = np.linalg.norm(proj)
    if pn < 1e-12:
        raise ValueError("y is orthogonal to the top eigenspace")
    z = proj / pn
    qy = float(y @ H @ y)
    bound = math.sqrt(max(0.0, 2 * (h1 - qy) / (h1 - h2)))
    return z, bound


def _witness(maxima):
    ok, wi = check_condition_A(maxima)
    if not ok:
        raise ValueError("no maximum with all player angles away from multiples of pi")
    return maxima.maxima[wi].point


def near_maximum_check(game, maxima, samples, rng, exclusion=1e-12):
    """Envelope of ||y - z||_inf / sqrt(Z(z) - Z(y)) over the witness box.

    The box spans a full period in t_0 centred on the witness and, for each
    player angle, the closed interval between 0 and +/-pi that contains the
    witness angle.  Half the samples are uniform in the box, the rest are
    local perturbations at logarithmically spread radii.

    Returns ``(C3_estimate, violations)``; a violation is a sample away from
    the maximum where the square root argument is not positive.
    """
    z = _witness(maxima)
    qz = float(eval_Z(game, z))
    lo = np.empty_like(z)
    hi = np.empty_like(z)
    lo[0], hi[0] = z[0] - np.pi, z[0] + np.pi
    s = np.sign(z[1:])
    lo[1:] = np.where(s > 0, 0.0, -np.pi)
    hi[1:] = np.where(s > 0, np.pi, 0.0)
    n_uni = samples // 2
    ys = [rng.uniform(lo, hi, size=(n_uni, z.size))]
    n_loc = samples - n_uni
    dirs = rng.standard_normal((n_loc, z.size))
    dirs /= np.max(np.abs(dirs), axis=1, keepdims=True)
    radii = 10.0 ** rng.uniform(-4, 0, size=(n_loc, 1))
    ys.append(np.clip(z + radii * dirs, lo, hi))
    ys = np.vstack(ys)
    zy = eval_Z(game, ys)
    dist = np.max(np.abs(ys - z), axis=1)
    gap = qz - zy
    keep = dist > exclusion
    bad = keep & ~(gap > 0)
    good = keep & (gap > 0)
    c3 = float(np.max(dist[good] / np.sqrt(gap[good]))) if good.any() else float("nan")
    return c3, int(bad.sum())


def fit_envelope(samples, bin_width=0.5, min_fill=0.1):
    """Envelope constant and log-log slope of (eps, distance) samples.

    C is the largest distance / sqrt(eps).  For the slope the samples are
    grouped into bins of ``bin_width`` decades of eps, centred on multiples
    of ``bin_width``; the largest distance in each bin (with its own eps)
    enters a least-squares line in log-log coordinates.  Bins holding fewer
    than ``min_fill`` times the median bin count are skipped, since the
    maximum of a handful of samples understates the envelope.  The slope is
    None when fewer than three bins remain.
    """
    arr = np.asarray(samples, dtype=float).reshape(-1, 2)
    pos = arr[arr[:, 0] > 0]
    if pos.shape[0] == 0:
        raise ValueError("fit_envelope needs samples with eps > 0")
    eps, dist = pos[:, 0], pos[:, 1]
    C = float(np.max(dist / np.sqrt(eps)))
    le = np.log10(eps)
    bins = np.rint(le / bin_width).astype(int)
    labels, counts = np.unique(bins, return_counts=True)
    floor = min_fill * np.median(counts)
    xs, ys = [], []
    for b, cnt in zip(labels, counts):
        if cnt < floor:
            continue
        sel = np.flatnonzero(bins == b)
        k = sel[np.argmax(dist[sel])]
        if dist[k] > 0:
            xs.append(le[k])
            ys.append(np.log10(dist[k]))
    if len(xs) < 3:
        return C, None
    slope = float(np.polyfit(xs, ys, 1)[0])
    return C, slope


@dataclass
class RobustnessCertificate:
    game_id: str
    q_f: float
    q_f_prime: float | None
    K2: float | None
    strategy_class: str
    samples: list
    fitted_C: float
    fitted_slope: float | None
    max_violation: float
    seed: int | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "game_id": self.game_id,
            "q_f": self.q_f,
            "q_f_prime": self.q_f_prime,
            "K2": self.K2,
            "strategy_class": self.strategy_class,
            "seed": self.seed,
            "fitted_C": self.fitted_C,
            "fitted_slope": self.fitted_slope,
            "max_violation": self.max_violation,
            "samples": [[float(e), float(d)] for e, d in self.samples],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            game_id=d["game_id"], q_f=d["q_f"], q_f_prime=d["q_f_prime"], K2=d["K2"],
            strategy_class=d["strategy_class"], samples=[tuple(s) for s in d["samples"]],
            fitted_C=d["fitted_C"], fitted_slope=d["fitted_slope"],
            max_violation=d["max_violation"], seed=d.get("seed"), warnings=list(d.get("warnings", [])),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "distance", "bound_C_sqrt_eps"])
        for e, d in self.samples:
            w.writerow([repr(float(e)), repr(float(d)), repr(self.fitted_C * math.sqrt(max(e, 0.0)))])
        return buf.getvalue()


# -- perturbation families ---------------------------------------------------
#
# Each family maps a magnitude s >= 0 to a strategy along a fixed random
# direction drawn once per sample, so the realised deficit can be tuned by
# bisection on s.

def _random_hermitian(rng):
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    h = a + la.dagger(a)
    return h / la.opnorm(h)


def _kicked_state(state, w, s):
    v = w - np.vdot(state, w) * state
    nv = np.linalg.norm(v)
    if s == 0 or nv == 0:
        return state
    out = state + (s / nv) * v
    return out / np.linalg.norm(out)


class _Family:
    def __init__(self, kind, game, alpha, rng, context):
        self.kind = kind
        self.game = game
        self.alpha = alpha
        self.context = context
        n = game.players
        u = rng.standard_normal(n + 1)
        self.u = u / np.linalg.norm(u)
        if kind in ("S", "qubit"):
            self.w = rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n)
        if kind == "qubit":
            self.frames = [la.random_unitary(2, rng) for _ in range(n)]
            self.kicks = [(_random_hermitian(rng), _random_hermitian(rng)) for _ in range(n)]
        if kind == "canonical":
            m = context["blocks"]
            self.block_dirs = rng.standard_normal((n, m))
            junk = la.random_state(m ** n, rng)
            self.junk = junk
            size = (2 * m) ** n
            self.w = rng.standard_normal(size) + 1j * rng.standard_normal(size)

    def build(self, s):
        """(deficit, strategy-like object) at magnitude s."""
        g = self.game
        if self.kind == "T":
            pt = self.alpha + s * self.u
            return self.context["q_f"] - float(eval_Z(g, pt)), make_T_strategy(pt)
        if self.kind == "S":
            t = make_T_strategy(self.alpha + s * self.u)
            st = QubitStrategy(_kicked_state(t.state, self.w, s), t.measurements)
            st = canonicalize_qubit_strategy(st)[0].strategy
            return self.context["q_f"] - score(g, st), st
        if self.kind == "qubit":
            t = make_T_strategy(self.alpha + s * self.u)
            n = g.players
            meas = []
            for (m0, m1), u, (h0, h1) in zip(t.measurements, self.frames, self.kicks):
                w0, w1 = expm(1j * s * h0), expm(1j * s * h1)
                meas.append((u @ w0 @ m0 @ la.dagger(w0) @ la.dagger(u),
                             u @ w1 @ m1 @ la.dagger(w1) @ la.dagger(u)))
            psi = t.state.reshape((2,) * n)
            for k, u in enumerate(self.frames):
                psi = la.apply_on_axis(u, psi, k)
            psi = psi.reshape(-1)
            w = self.w.reshape((2,) * n)
            for k, u in enumerate(self.frames):
                w = la.apply_on_axis(u, w, k)
            st = QubitStrategy(_kicked_state(psi, w.reshape(-1), s), meas)
            return self.context["q_f"] - score(g, st), st
        if self.kind == "canonical":
            return self._canonical(s)
        raise ValueError(self.kind)

    def _canonical(self, s):
        n = self.game.players
        m = self.context["blocks"]
        gvec = self.context["ideal_state"]
        alpha = self.context["alpha_quadrant"]
        angles = [np.clip(alpha[1 + k] + s * self.block_dirs[k], 0.0, np.pi) for k in range(n)]
        base = np.multiply.outer(gvec.reshape((2,) * n), self.junk.reshape((m,) * n))
        perm = [x for k in range(n) for x in (k, n + k)]
        base = np.transpose(base, perm).reshape(-1)
        lam = _kicked_state(base, self.w, s)
        cs = CanonicalStrategy(angles, lam)
        return self.context["q_f"] - canonical_score(self.game, cs), cs


def _sample_one(kind, game, alpha, target, rng, context, refs):
    """Draw directions until bisection lands the deficit within the window."""
    lo_t, hi_t = (1 - EPS_WINDOW) * target, (1 + EPS_WINDOW) * target
    for _ in range(MAX_ATTEMPTS):
        fam = _Family(kind, game, alpha, rng, context)
        s_lo, s_hi = 0.0, math.sqrt(target) / 4
        e_hi, obj = fam.build(s_hi)
        while e_hi < lo_t and s_hi < 4.0:
            s_lo, s_hi = s_hi, 2 * s_hi
            e_hi, obj = fam.build(s_hi)
        if e_hi < lo_t:
            continue
        for _ in range(60):
            if lo_t <= e_hi <= hi_t:
                break
            mid = 0.5 * (s_lo + s_hi)
            e_mid, o_mid = fam.build(mid)
            if e_mid < lo_t:
                s_lo = mid
            else:
                s_hi, e_hi, obj = mid, e_mid, o_mid
        if not lo_t <= e_hi <= hi_t:
            continue
        if kind == "canonical":
            dist = nearest_ideal_product(context["game"], obj, context["maxima"])[1]
        else:
            dist = distance_to_optimal(game, obj, context["maxima"], refs=refs)
        return e_hi, dist
    return None


def _thread_count():
    try:
        return max(1, int(os.environ.get("SELFTEST_THREADS", "1")))
    except ValueError:
        return 1


def run_robustness_experiment(game, strategy_class, eps_grid, samples_per_eps, seed=0,
                              verdict=None, game_id="game", canonical_blocks=2):
    """Sample near-optimal strategies of one class and fit the envelope.

    Every (eps, sample) task draws from its own substream of ``seed`` so the
    result does not depend on the number of worker threads.
    """
    if strategy_class not in STRATEGY_CLASSES:
        raise ValueError(f"strategy_class must be one of {STRATEGY_CLASSES}")
    if verdict is None:
        verdict = classify(game)
    if not verdict.is_robust_self_test:
        raise NotRobustError(verdict)
    maxima = verdict.maxima
    alpha = verdict.witness
    context = {"q_f": verdict.q_f, "maxima": maxima, "game": game, "blocks": canonical_blocks}
    run_game = game
    if strategy_class == "canonical":
        try:
            aq = quadrant_maximum(maxima)
        except ValueError:
            # flip players so a maximum lies in the positive quadrant
            run_game = transform_game(game, 0, verdict.normalization[1])
            context["maxima"] = find_global_maxima(run_game)
            aq = quadrant_maximum(context["maxima"])
        context["game"] = run_game
        context["alpha_quadrant"] = aq
        context["ideal_state"] = ideal_state(run_game, aq)
        alpha = aq
    refs = optimal_references(maxima) if strategy_class != "canonical" else None

    eps_grid = [float(e) for e in eps_grid]
    children = np.random.SeedSequence(seed).spawn(len(eps_grid) * samples_per_eps)
    tasks = [(t, children[k * samples_per_eps + j]) for k, t in enumerate(eps_grid)
             for j in range(samples_per_eps)]

    def work(task):
        target, ss = task
        return _sample_one(strategy_class, run_game, alpha, target, np.random.default_rng(ss), context, refs)

    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, tasks))
    else:
        results = [work(t) for t in tasks]

    warnings = []
    samples = []
    for (target, _), r in zip(tasks, results):
        if r is None:
            warnings.append(f"no sample landed near eps = {target:g}")
        else:
            samples.append(r)
    if not samples:
        raise RuntimeError("no samples were collected")
    if min(e for e, _ in samples) < -1e-10:
        warnings.append("a sampled score exceeds q_f")
    C, slope = fit_envelope(samples)
    viol = max(d - C * math.sqrt(max(e, 0.0)) for e, d in samples)
    for w in warnings:
        log.warning(w)
    return RobustnessCertificate(
        game_id=game_id, q_f=verdict.q_f, q_f_prime=verdict.q_f_prime, K2=verdict.K2,
        strategy_class=strategy_class, samples=samples, fitted_C=C, fitted_slope=slope,
        max_violation=float(viol), seed=seed, warnings=warnings,
    )


def optimal_references(maxima):
    """Canonical forms of T(alpha) and T(-alpha) for every listed maximum."""
    refs = []
    for m in maxima.maxima:
        for sign in (1.0, -1.0):
            refs.append(canonicalize_qubit_strategy(make_T_strategy(sign * m.point))[0].strategy)
    return refs
