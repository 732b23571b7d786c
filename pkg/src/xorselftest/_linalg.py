"""Small dense linear-algebra helpers shared by the strategy modules."""

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def antidiag_phase(theta):
    """[[0, e^{i theta}], [e^{-i theta}, 0]]."""
    e = np.exp(1j * theta)
    return np.array([[0, e], [np.conj(e), 0]], dtype=complex)


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def opnorm(a):
    return float(np.linalg.norm(a, 2)) if np.size(a) else 0.0


def hermitian_defect(a):
    return float(np.max(np.abs(a - dagger(a)))) if np.size(a) else 0.0


def involution_defect(a):
    """Largest entry of X^2 - I, plus the Hermiticity defect."""
    d = a.shape[0]
    return max(hermitian_defect(a), float(np.max(np.abs(a @ a - np.eye(d)))) if d else 0.0)


def apply_on_axis(op, tensor, axis):
    """Apply a matrix to one tensor axis, leaving the axis order unchanged."""
    out = np.tensordot(op, tensor, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def partial_trace_keep(vec, dims, keep):
    """Reduced density operator of a pure state on the subsystems ``keep``."""
    t = np.asarray(vec).reshape(dims)
    keep = list(keep)
    drop = [k for k in range(len(dims)) if k not in keep]
    t = np.transpose(t, keep + drop)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    m = t.reshape(dk, -1)
    return m @ dagger(m)


def trace_norm(a):
    """Sum of singular values."""
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def complex_to_pairs(a):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def pairs_to_complex(data, shape=None):
    arr = np.asarray(data, dtype=float)
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise ValueError("complex entries must be [re, im] pairs")
    out = arr[..., 0] + 1j * arr[..., 1]
    if shape is not None and out.shape != tuple(shape):
        raise ValueError(f"expected complex array of shape {tuple(shape)}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError("complex entries must be finite")
    return out


def random_unitary(d, rng):
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(d, rng):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def apply_game_tensor(table, ops, tensor):
    """sum_i table[i] (A_1^(i_1) (x) ... (x) A_n^(i_n)) applied to a tensor.

    ``ops[k] = (A0, A1)`` acts on axis ``k``; ``table`` is in lexicographic
    order with the first axis most significant.
    """
    n = len(ops)

    def rec(tab, t, k):
        if k == n:
            return tab[0] * t
        half = len(tab) // 2
        out = np.zeros(tensor.shape, dtype=complex)
        for part, op in ((tab[:half], ops[k][0]), (tab[half:], ops[k][1])):
            if np.any(part):
                out += rec(part, apply_on_axis(op, t, k), k + 1)
        return out

    return rec(np.asarray(table, dtype=float), np.asarray(tensor, dtype=complex), 0)
