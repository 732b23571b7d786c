"""Self-test classification from the maxima of Z_f.

A game is a self-test when some global maximum has no angle at a multiple
of pi (condition A) and every maximum equals that one or its negation
modulo 2*pi (condition B).  It is additionally second-order robust when
every maximum has a nonsingular Hessian (condition C).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .game import transform_angles_forward, transform_game, wrap_angles, wrapped_distance
from .optimizer import OptimizerConfig, compute_qf_prime, find_global_maxima

ANGLE_TOL = 1e-6
HESSIAN_TOL = 1e-6


def distance_to_pi_multiple(angle):
    a = np.abs(wrap_angles(angle))
    return np.minimum(a, np.pi - a)


def equivalent_maxima(p, q, tol=ANGLE_TOL):
    """True if p = q or p = -q modulo 2*pi, up to ``tol`` in the inf-norm."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("angle vectors must have equal length")
    return wrapped_distance(p, q) <= tol or wrapped_distance(p, -q) <= tol


def check_condition_A(maxima, tol=ANGLE_TOL):
    """Return (holds, index of the first maximum with no angle in pi*Z)."""
    if maxima.degenerate:
        return False, None
    for k, m in enumerate(maxima.maxima):
        if np.all(distance_to_pi_multiple(m.point[1:]) > tol):
            return True, k
    return False, None


def check_condition_B(maxima, witness, tol=ANGLE_TOL):
    if maxima.degenerate:
        return False
    return all(equivalent_maxima(m.point, witness, tol) for m in maxima.maxima)


def check_condition_C(maxima, tol=HESSIAN_TOL):
    """Nonsingularity of every Hessian, relative to its largest eigenvalue.

    Returns (holds, list of min |eigenvalue| per maximum).
    """
    mins = []
    ok = not maxima.degenerate
    for m in maxima.maxima:
        w = np.abs(m.hessian_eigenvalues)
        lo, hi = float(np.min(w)), float(np.max(w))
        mins.append(lo)
        if not lo > tol * max(1.0, hi):
            ok = False
    return ok, mins


def normalizing_transform(witness):
    """Flip vector (b0, b) moving ``witness`` into the open positive quadrant.

    b_j = 1 exactly where the witness angle is negative, so the transformed
    angles are |alpha_j|; b0 is picked so the transformed phase lies in
    [0, pi).
    """
    alpha = wrap_angles(witness)
    b = tuple(int(a < 0) for a in alpha[1:])
    beta = wrap_angles(transform_angles_forward(0, b, alpha))
    b0 = 0 if 0 <= beta[0] < np.pi else 1
    return b0, b


@dataclass
class Verdict:
    condition_A: bool
    witness_index: int | None
    condition_B: bool
    condition_C: bool
    min_abs_eigenvalues: list
    q_f: float
    q_f_prime: float | None = None
    K2: float | None = None
    normalization: tuple | None = None
    witness: np.ndarray | None = None
    notes: list = field(default_factory=list)
    maxima: object = field(default=None, repr=False, compare=False)

    @property
    def is_self_test(self):
        return self.condition_A and self.condition_B

    @property
    def is_robust_self_test(self):
        return self.condition_A and self.condition_B and self.condition_C

    def reason(self):
        if not self.condition_A:
            return "condition A"
        if not self.condition_B:
            return "condition B"
        if not self.condition_C:
            return "condition C"
        return None

    def to_dict(self):
        return {
            "condition_A": self.condition_A,
            "witness_index": self.witness_index,
            "witness": None if self.witness is None else self.witness.tolist(),
            "condition_B": self.condition_B,
            "condition_C": self.condition_C,
            "min_abs_eigenvalues": list(self.min_abs_eigenvalues),
            "is_self_test": self.is_self_test,
            "is_robust_self_test": self.is_robust_self_test,
            "failed": self.reason(),
            "q_f": self.q_f,
            "q_f_prime": self.q_f_prime,
            "K2": self.K2,
            "normalization": None if self.normalization is None else {
                "b0": self.normalization[0], "b": list(self.normalization[1])},
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d):
        norm = d.get("normalization")
        return cls(
            condition_A=bool(d["condition_A"]),
            witness_index=d.get("witness_index"),
            condition_B=bool(d["condition_B"]),
            condition_C=bool(d["condition_C"]),
            min_abs_eigenvalues=list(d["min_abs_eigenvalues"]),
            q_f=float(d["q_f"]),
            q_f_prime=d.get("q_f_prime"),
            K2=d.get("K2"),
            normalization=None if norm is None else (norm["b0"], tuple(norm["b"])),
            witness=None if d.get("witness") is None else np.asarray(d["witness"]),
            notes=list(d.get("notes", [])),
        )


def classify(game, config=None, maxima=None, angle_tol=ANGLE_TOL, hessian_tol=HESSIAN_TOL):
    """Decide whether ``game`` is a self-test and whether it is robust."""
    config = config or OptimizerConfig()
    if maxima is None:
        maxima = find_global_maxima(game, config)
    notes = list(maxima.warnings)
    if maxima.degenerate:
        notes.append("maxima are not isolated; conditions B and C fail")
    a_ok, wi = check_condition_A(maxima, angle_tol)
    c_ok, mins = check_condition_C(maxima, hessian_tol)
    notes.append("condition C is tested as Hessian nonsingularity")
    v = Verdict(condition_A=a_ok, witness_index=wi, condition_B=False, condition_C=c_ok,
                min_abs_eigenvalues=mins, q_f=maxima.q_f, notes=notes, maxima=maxima)
    if not a_ok:
        return v
    witness = maxima.maxima[wi].point
    v.witness = witness
    v.condition_B = check_condition_B(maxima, witness, angle_tol)
    v.normalization = normalizing_transform(witness)
    if v.is_robust_self_test:
        n = game.players
        g = transform_game(game, *v.normalization)
        seeds = 9 if n <= 3 else (5 if n == 4 else 3)
        v.q_f_prime = float(compute_qf_prime(g, config, allow_large=True, seeds_per_dim=seeds))
        gap = v.q_f - v.q_f_prime
        if gap > 0:
            v.K2 = 2.0 / math.sqrt(gap)
        else:
            notes.append(f"restricted maximum {v.q_f_prime:.12g} does not lie below q_f")
    return v
