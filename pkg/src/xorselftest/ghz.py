"""Three-part GHZ devices: pass probability, post-measurement states, bounds.

A qubit device measures sigma_x on input 0 and [[0, z], [conj(z), 0]] on
input 1, with z = lambda, gamma, phi for the three parts (Im z >= 0).  The
inputs are drawn uniformly from the four strings of even parity; the test
passes when o_1 xor o_2 xor o_3 xor (i_1 or i_2 or i_3) = 1.

The input register holds only the four valid strings; its basis order is
``VALID_INPUTS``.  Outputs are indexed o_1 o_2 o_3 with o_1 most significant.
"""

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import _linalg as la
from .jordan import InvolutionPair, block_decompose, random_involution

VALID_INPUTS = ((0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0))
PHASE_TOL = 1e-12
MAX_DEVICE_DIM = 2 ** 14


def ghz_test(inputs, outputs):
    """Pass/fail of one round."""
    i = tuple(int(x) for x in inputs)
    o = tuple(int(x) for x in outputs)
    if len(i) != 3 or len(o) != 3:
        raise ValueError("need three input bits and three output bits")
    if i not in VALID_INPUTS:
        raise ValueError(f"input {i} has odd parity; valid inputs are {VALID_INPUTS}")
    return (o[0] ^ o[1] ^ o[2] ^ (i[0] | i[1] | i[2])) == 1


def _passing_pairs():
    pairs = []
    for ii, i in enumerate(VALID_INPUTS):
        for o in itertools.product((0, 1), repeat=3):
            if ghz_test(i, o):
                pairs.append((ii, i, o))
    return pairs


PASSING = _passing_pairs()


def _check_phase(z, name):
    z = complex(z)
    if abs(abs(z) - 1) > PHASE_TOL:
        raise ValueError(f"{name} must have unit modulus, got |{name}| = {abs(z):.15g}")
    if z.imag < -PHASE_TOL:
        raise ValueError(f"{name} must have non-negative imaginary part, got {z.imag:.3e}")
    return z


@dataclass(eq=False)
class Qubit222Device:
    c: np.ndarray  # amplitudes c_klm, index 4k + 2l + m
    lam: complex
    gamma: complex
    phi: complex

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=complex).reshape(-1)
        if self.c.size != 8:
            raise ValueError("state needs 8 amplitudes")
        if abs(np.linalg.norm(self.c) - 1) > PHASE_TOL:
            raise ValueError("state is not normalised")
        self.lam = _check_phase(self.lam, "lambda")
        self.gamma = _check_phase(self.gamma, "gamma")
        self.phi = _check_phase(self.phi, "phi")

    @property
    def phases(self):
        return self.lam, self.gamma, self.phi

    def observables(self):
        return [(la.SIGMA_X, _input1_op(z)) for z in self.phases]

    def to_dict(self):
        return {
            "c": la.complex_to_pairs(self.c),
            "lambda": [self.lam.real, self.lam.imag],
            "gamma": [self.gamma.real, self.gamma.imag],
            "phi": [self.phi.real, self.phi.imag],
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ValueError("device must be a JSON object")
        missing = {"c", "lambda", "gamma", "phi"} - set(d)
        if missing:
            raise ValueError(f"device is missing field(s): {', '.join(sorted(missing))}")
        c = la.pairs_to_complex(d["c"], (8,))
        zs = [complex(la.pairs_to_complex(d[k], ())) for k in ("lambda", "gamma", "phi")]
        return cls(c, *zs)


def load_device(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return Qubit222Device.from_dict(data)


def _input1_op(z):
    return np.array([[0, z], [np.conj(z), 0]], dtype=complex)


def ideal_state():
    g = np.zeros(8, dtype=complex)
    g[0] = 1 / np.sqrt(2)
    g[7] = -1 / np.sqrt(2)
    return g


def ideal_device():
    return Qubit222Device(ideal_state(), 1j, 1j, 1j)


def phase_term(x, y, z):
    """(-1 + xy + yz + zx) / 4, the coefficient pairing two complementary
    amplitudes in the pass probability.  Broadcasts over arrays."""
    return (-1 + x * y + y * z + z * x) / 4


def pass_probability_formula(device):
    """Closed form in the amplitudes and the three phases."""
    c = device.c
    a, b, f = device.phases
    ab, fb = np.conj(b), np.conj(f)

    def term(lo, hi, x, y, z):
        return np.real(np.conj(c[lo]) * c[hi] * phase_term(x, y, z))

    p = 0.5
    p += term(0b000, 0b111, a, b, f)
    p += term(0b001, 0b110, a, b, fb)
    p += term(0b010, 0b101, a, ab, f)
    p += term(0b011, 0b100, a, ab, fb)
    return float(p)


def _expectation(state, ops, inputs):
    t = state.reshape(2, 2, 2)
    for k, i in enumerate(inputs):
        t = la.apply_on_axis(ops[k][i], t, k)
    return float(np.real(np.vdot(state, t.reshape(-1))))


def pass_probability_direct(device):
    """Average over valid inputs of the projector expectation for passing."""
    ops = device.observables()
    p = 0.0
    for i in VALID_INPUTS:
        e = _expectation(device.c, ops, i)
        # pass needs outcome product -1 on input 000 and +1 otherwise
        p += (1 - e) / 2 if i == (0, 0, 0) else (1 + e) / 2
    return p / 4


def _post_map(phases):
    """Linear map (4*8*8, 8) sending a state to its passing post-measurement vector.

    Each valid input carries amplitude 1/2 so that the squared norm of the
    image is the pass probability.
    """
    ops = [(la.SIGMA_X, _input1_op(z)) for z in phases]
    eye = np.eye(2)
    out = np.zeros((4, 8, 8, 8), dtype=complex)
    for ii, i, o in PASSING:
        projs = [(eye + (-1) ** o[k] * ops[k][i[k]]) / 2 for k in range(3)]
        out[ii, 4 * o[0] + 2 * o[1] + o[2]] = 0.5 * la.kron_all(projs)
    return out.reshape(256, 8)


def post_measurement_state(device):
    """Vector over I (4) x O (8) x R (8), restricted to passing rounds."""
    return _post_map(device.phases) @ device.c


_IDEAL_POST = None


def ideal_post_state():
    global _IDEAL_POST
    if _IDEAL_POST is None:
        v = post_measurement_state(ideal_device())
        v.setflags(write=False)
        _IDEAL_POST = v
    return _IDEAL_POST


def ideal_io_density():
    """Reduced density operator of the ideal post-measurement state on I x O."""
    return la.partial_trace_keep(ideal_post_state(), (32, 8), [0])


def trace_distance(rho, sigma):
    """Trace norm of rho - sigma (sum of singular values, no factor 1/2)."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    return la.trace_norm(rho - sigma)


# -- bound checks ----------------------------------------------------------

@dataclass
class BoundCheck:
    name: str
    lhs: float
    rhs: float

    def __post_init__(self):
        self.lhs = float(self.lhs)
        self.rhs = float(self.rhs)

    @property
    def slack(self):
        return self.rhs - self.lhs

    @property
    def ok(self):
        # rounding slack scaled to the size of the quantities compared
        return bool(self.lhs <= self.rhs + 1e-12 * max(1.0, abs(self.rhs)))

    def to_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "ok": self.ok}


@dataclass
class BoundReport:
    epsilon: float
    checks: list = field(default_factory=list)

    @property
    def ok(self):
        return bool(all(c.ok for c in self.checks))

    @property
    def violations(self):
        return [c for c in self.checks if not c.ok]

    def to_dict(self):
        return {"epsilon": self.epsilon, "ok": self.ok, "checks": [c.to_dict() for c in self.checks]}


def failure_probability(p):
    """1 - p, with rounding residue below a few ulps of 1 reported as 0."""
    eps = 1.0 - p
    return 0.0 if eps < 8 * np.finfo(float).eps else float(eps)


def _epsilon(device):
    return failure_probability(pass_probability_formula(device))


def check_phase_bounds(device):
    eps = _epsilon(device)
    rep = BoundReport(eps)
    for name, z in zip(("lambda", "gamma", "phi"), device.phases):
        rep.checks.append(BoundCheck(f"|{name} - i|^2 <= 16 eps", abs(z - 1j) ** 2, 16 * eps))
    return rep


def check_state_bounds(device):
    eps = _epsilon(device)
    g = ideal_state()
    ov = np.vdot(g, device.c)
    zeta = ov / abs(ov) if abs(ov) > 0 else 1.0
    dist2 = float(np.linalg.norm(device.c - zeta * g) ** 2)
    rep = BoundReport(eps)
    # |<a, g>| >= 1 - 7 eps, written as lhs <= rhs
    rep.checks.append(BoundCheck("1 - |<alpha, g>| <= 7 eps", 1.0 - abs(ov), 7 * eps))
    rep.checks.append(BoundCheck("||alpha - zeta g||^2 <= 14 eps", dist2, 14 * eps))
    return rep


def _best_phase_distance2(v, ref):
    """min over unit zeta of ||v - zeta ref||^2, attained at zeta = <ref, v> / |.|."""
    ov = np.vdot(ref, v)
    zeta = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(v - zeta * ref) ** 2)


def check_post_state_bound(device):
    eps = _epsilon(device)
    d2 = max(0.0, _best_phase_distance2(post_measurement_state(device), ideal_post_state()))
    rep = BoundReport(eps)
    rep.checks.append(BoundCheck("||v_post - zeta v_ideal||^2 <= 150 eps", d2, 150 * eps))
    return rep


def check_all_qubit_bounds(device):
    rep = BoundReport(_epsilon(device))
    for r in (check_phase_bounds(device), check_state_bounds(device), check_post_state_bound(device)):
        rep.checks.extend(r.checks)
    return rep


# -- canonical devices with environment ----------------------------------

@dataclass(eq=False)
class CanonicalREDevice:
    """Block-canonical device.  ``state`` has shape (ka, 2, kb, 2, kc, 2, e)."""

    lambdas: np.ndarray
    gammas: np.ndarray
    phis: np.ndarray
    state: np.ndarray

    def __post_init__(self):
        self.lambdas = np.array([_check_phase(z, "lambda") for z in np.atleast_1d(self.lambdas)])
        self.gammas = np.array([_check_phase(z, "gamma") for z in np.atleast_1d(self.gammas)])
        self.phis = np.array([_check_phase(z, "phi") for z in np.atleast_1d(self.phis)])
        ka, kb, kc = self.lambdas.size, self.gammas.size, self.phis.size
        st = np.asarray(self.state, dtype=complex)
        e = st.size // (8 * ka * kb * kc)
        if e < 1 or st.size != 8 * ka * kb * kc * e:
            raise ValueError("state size does not match the block counts")
        if st.size > MAX_DEVICE_DIM:
            raise ValueError(f"total dimension {st.size} exceeds {MAX_DEVICE_DIM}")
        self.state = st.reshape(ka, 2, kb, 2, kc, 2, e)
        if abs(np.linalg.norm(self.state) - 1) > 1e-12:
            raise ValueError("state is not normalised")

    @property
    def env_dim(self):
        return self.state.shape[-1]

    def block_vectors(self):
        """Array (ka, kb, kc, e, 8) of the unnormalised qubit vectors alpha_klmn."""
        t = np.transpose(self.state, (0, 2, 4, 6, 1, 3, 5))
        return t.reshape(t.shape[:4] + (8,))

    def pass_probability(self):
        """Weighted average of the block devices' pass probabilities."""
        vecs = self.block_vectors()
        p = 0.0
        for (k, l, m, n) in np.ndindex(*vecs.shape[:4]):
            w = float(np.linalg.norm(vecs[k, l, m, n]) ** 2)
            if w == 0.0:
                continue
            dev = Qubit222Device(vecs[k, l, m, n] / np.sqrt(w), self.lambdas[k], self.gammas[l], self.phis[m])
            p += w * pass_probability_formula(dev)
        return p

    def post_state(self):
        """Passing post-measurement vector, shape (32, ka, kb, kc, e, 8): IO, blocks, E, R."""
        vecs = self.block_vectors()
        shp = vecs.shape[:4]
        out = np.zeros((32,) + shp + (8,), dtype=complex)
        for (k, l, m) in np.ndindex(*shp[:3]):
            L = _post_map((self.lambdas[k], self.gammas[l], self.phis[m])).reshape(32, 8, 8)
            out[:, k, l, m] = np.einsum("xst,nt->xns", L, vecs[k, l, m])
        return out

    def env_density(self):
        v = self.state.reshape(-1, self.env_dim)
        return v.T @ np.conj(v)


def check_entangled_bound(device):
    """The 2400 eps trace-norm bound and the intermediate 150 eps / 600 eps ones."""
    e = device.env_dim
    if e > 4:
        raise ValueError("environment dimension must be at most 4")
    eps = failure_probability(device.pass_probability())
    post = device.post_state()  # (32, ka, kb, kc, e, 8)
    # Gamma_post on I O E: trace out the blocks and R
    m = np.moveaxis(post, 4, 1).reshape(32 * e, -1)
    gamma_post = m @ la.dagger(m)
    gamma_io = ideal_io_density()
    target = np.kron(gamma_io, device.env_density())
    # target is ordered (IO, E); so is gamma_post
    d2400 = trace_distance(gamma_post, target) ** 2

    # optimal product vector: per block, the best phase times |alpha_klmn|
    vid = ideal_post_state().reshape(32, 8)
    vecs = device.block_vectors()
    w = np.zeros(vecs.shape[:4], dtype=complex)
    for idx in np.ndindex(*vecs.shape[:4]):
        nrm = np.linalg.norm(vecs[idx])
        if nrm == 0:
            continue
        ov = np.vdot(vid, post[(slice(None),) + idx])
        w[idx] = (ov / abs(ov) if abs(ov) > 0 else 1.0) * nrm
    ideal_full = np.einsum("klmn,ar->aklmnr", w, vid)
    d150 = float(np.linalg.norm(post - ideal_full) ** 2)
    wm = w.reshape(-1, e)
    phi_e = wm.T @ np.conj(wm)
    d600 = trace_distance(gamma_post, np.kron(gamma_io, phi_e)) ** 2

    rep = BoundReport(eps)
    rep.checks.append(BoundCheck("||v_post - w (x) v_ideal||^2 <= 150 eps", d150, 150 * eps))
    rep.checks.append(BoundCheck("||G_post - Phi_E (x) G_ideal||_1^2 <= 600 eps", d600, 600 * eps))
    rep.checks.append(BoundCheck("||G_post - G_E (x) G_ideal||_1^2 <= 2400 eps", d2400, 2400 * eps))
    return rep


# -- raw devices and canonicalisation ----------------------------------------

@dataclass(eq=False)
class RawREDevice:
    """Three components with arbitrary involution pairs, plus environment."""

    pairs: list  # three InvolutionPair (input 0, input 1)
    state: np.ndarray
    env_dim: int = 1

    def __post_init__(self):
        self.pairs = [p if isinstance(p, InvolutionPair) else InvolutionPair(*p) for p in self.pairs]
        if len(self.pairs) != 3:
            raise ValueError("a device has exactly three components")
        dims = [p.dim for p in self.pairs]
        if max(dims) > 16:
            raise ValueError("component dimensions must be at most 16")
        self.state = np.asarray(self.state, dtype=complex).reshape(*dims, self.env_dim)

    def pass_probability(self):
        ops = [(p.X1, p.X2) for p in self.pairs]
        p = 0.0
        for i in VALID_INPUTS:
            t = self.state
            for k in range(3):
                t = la.apply_on_axis(ops[k][i[k]], t, k)
            e = float(np.real(np.vdot(self.state, t)))
            p += (1 - e) / 2 if i == (0, 0, 0) else (1 + e) / 2
        return p / 4


def device_to_canonical(raw):
    """Embed a raw device into block-canonical form via the Jordan decomposition."""
    decs = [block_decompose(p) for p in raw.pairs]
    t = raw.state
    for k, dec in enumerate(decs):
        t = la.apply_on_axis(dec.embedding, t, k)
    shape = []
    for dec in decs:
        shape += [dec.m, 2]
    t = t.reshape(*shape, raw.env_dim)
    # block angles lie in [0, pi], so e^{i theta} already has Im >= 0
    zs = [np.exp(1j * dec.thetas) for dec in decs]
    return CanonicalREDevice(zs[0], zs[1], zs[2], t)


def qubit_to_raw(device, env_dim=1):
    pairs = [InvolutionPair(m0, m1) for m0, m1 in device.observables()]
    st = np.zeros((8, env_dim), dtype=complex)
    st[:, 0] = device.c
    return RawREDevice(pairs, st, env_dim)


# -- random samplers ----------------------------------------------------------

def _near_ideal_phase(rng, spread, size=None):
    th = np.clip(np.pi / 2 + spread * rng.standard_normal(size), 0.0, np.pi)
    return np.exp(1j * th)


def random_qubit_device(rng, bias=3.0):
    """Random device; ``bias`` > 0 concentrates samples near the ideal one.

    A mixing weight u**bias (u uniform) interpolates between a randomly
    phased copy of the ideal state and a Gaussian random state, and sets
    the spread of the measurement phases.  bias = 0 gives unbiased samples.
    """
    mix = rng.uniform() ** bias if bias > 0 else 1.0
    rnd = la.random_state(8, rng)
    c = (1 - mix) * np.exp(1j * rng.uniform(0, 2 * np.pi)) * ideal_state() + mix * rnd
    if np.linalg.norm(c) < 1e-12:
        c = rnd
    c /= np.linalg.norm(c)
    if bias > 0:
        zs = _near_ideal_phase(rng, 2 * mix, 3)
    else:
        zs = np.exp(1j * rng.uniform(0, np.pi, 3))
    return Qubit222Device(c, *zs)


def random_canonical_device(rng, max_blocks=2, max_env=4, bias=3.0):
    ka, kb, kc = (int(rng.integers(1, max_blocks + 1)) for _ in range(3))
    e = int(rng.integers(1, max_env + 1))
    mix = rng.uniform() ** bias if bias > 0 else 1.0
    junk = la.random_state(ka * kb * kc * e, rng).reshape(ka, kb, kc, e)
    near = np.einsum("klmn,r->klmnr", junk, ideal_state())
    rnd = la.random_state(near.size, rng).reshape(near.shape)
    t = (1 - mix) * near + mix * rnd
    t /= np.linalg.norm(t)
    t = t.reshape(ka, kb, kc, e, 2, 2, 2)
    t = np.transpose(t, (0, 4, 1, 5, 2, 6, 3))
    zs = [_near_ideal_phase(rng, 2 * mix, k) for k in (ka, kb, kc)]
    return CanonicalREDevice(zs[0], zs[1], zs[2], t)


def random_raw_device(rng, dims=(4, 4, 4), env_dim=1):
    pairs = [InvolutionPair(random_involution(d, rng), random_involution(d, rng)) for d in dims]
    st = la.random_state(int(np.prod(dims)) * env_dim, rng)
    return RawREDevice(pairs, st, env_dim)
