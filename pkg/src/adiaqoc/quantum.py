"""Dense quantum-state primitives.

States are plain numpy arrays: a 1-d complex vector is a pure state and a
2-d square array is a density matrix.  Stacks of states along a leading
axis are accepted by the ``*_series`` helpers.
"""
from __future__ import annotations

from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)
# |0> is the upper level of sigma_z; lowering maps |1> -> |0> only when |1>
# is the excited level, so the models build their own jump operators.
PROJ0 = np.array([[1, 0], [0, 0]], dtype=complex)
PROJ1 = np.array([[0, 0], [0, 1]], dtype=complex)

HERMITIAN_TOL = 1e-12
STATE_TOL = 1e-10


class ValidationError(ValueError):
    """Raised when an operator or state violates its invariants."""


class EigenSystem(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def is_hermitian(H: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    H = np.asarray(H)
    scale = max(np.linalg.norm(H), 1.0)
    return bool(np.linalg.norm(H - np.conj(np.swapaxes(H, -1, -2))) <= tol * scale)


def check_hermitian(H: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    H = np.asarray(H)
    if H.ndim < 2 or H.shape[-1] != H.shape[-2]:
        raise ValidationError(f"operator must be square, got shape {H.shape}")
    if not is_hermitian(H, tol):
        raise ValidationError("operator is not Hermitian")
    return H


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    # make the largest-magnitude component of every column real and positive
    idx = np.argmax(np.abs(vectors), axis=-2)
    pivots = np.take_along_axis(vectors, idx[..., None, :], axis=-2)
    phase = pivots / np.abs(pivots)
    return vectors / phase


def _order_degenerate(values: np.ndarray, vectors: np.ndarray, tol: float):
    d = values.shape[-1]
    order = np.arange(d)
    pivots = np.argmax(np.abs(vectors), axis=0)
    start = 0
    while start < d:
        stop = start + 1
        while stop < d and values[stop] - values[start] <= tol:
            stop += 1
        if stop - start > 1:
            block = order[start:stop]
            order[start:stop] = block[np.argsort(pivots[block], kind="stable")]
        start = stop
    return values[order], vectors[:, order]


def hermitian_eigen(H: np.ndarray, check: bool = True,
                    degeneracy_tol: float = 1e-10) -> EigenSystem:
    """Diagonalize a Hermitian matrix (or a stack of them).

    Eigenvalues come back ascending.  Each eigenvector is rescaled by a
    global phase so that its largest-magnitude entry is real and positive,
    and degenerate eigenvectors are ordered by the index of that entry, so
    repeated calls on the same input are bitwise identical.
    """
    H = np.asarray(H, dtype=complex)
    if check:
        check_hermitian(H)
    if H.shape[-1] == 2:
        values, vectors = _eigh_2x2(H)
    else:
        values, vectors = np.linalg.eigh(H)
    vectors = _fix_phases(vectors)
    if H.ndim == 2:
        gaps = np.diff(values)
        if gaps.size and np.any(gaps <= degeneracy_tol * max(1.0, np.abs(values).max())):
            values, vectors = _order_degenerate(
                values, vectors, degeneracy_tol * max(1.0, np.abs(values).max()))
    return EigenSystem(values, vectors)


def _eigh_2x2(H: np.ndarray):
    h0 = 0.5 * (H[..., 0, 0] + H[..., 1, 1]).real
    hz = 0.5 * (H[..., 0, 0] - H[..., 1, 1]).real
    off = H[..., 1, 0]  # hx + i hy
    r = np.sqrt(hz * hz + np.abs(off) ** 2)
    values = np.stack([h0 - r, h0 + r], axis=-1)
    # eigenvectors of the traceless part, built from the better-conditioned
    # column of (H - h0 -/+ r) adjugate
    up = hz >= 0
    ground = np.where(up[..., None],
                      np.stack([-np.conj(off), hz + r + 0j], axis=-1),
                      np.stack([r - hz + 0j, -off], axis=-1))
    excited = np.where(up[..., None],
                       np.stack([hz + r + 0j, off], axis=-1),
                       np.stack([np.conj(off), r - hz + 0j], axis=-1))
    vectors = np.stack([ground, excited], axis=-1)
    norms = np.linalg.norm(vectors, axis=-2, keepdims=True)
    degenerate = norms[..., 0, :] == 0
    if np.any(degenerate):
        eye = np.broadcast_to(np.eye(2, dtype=complex), vectors.shape)
        vectors = np.where(degenerate.any(axis=-1)[..., None, None], eye, vectors)
        norms = np.linalg.norm(vectors, axis=-2, keepdims=True)
    return values, vectors / norms


def expm_hermitian(H: np.ndarray, dt: float) -> np.ndarray:
    """Return exp(-i H dt) for a Hermitian matrix or a stack of them."""
    H = np.asarray(H, dtype=complex)
    if H.shape[-1] == 2:
        return _expm_2x2(H, dt)
    values, vectors = np.linalg.eigh(H)
    phases = np.exp(-1j * values * dt)
    return (vectors * phases[..., None, :]) @ np.conj(np.swapaxes(vectors, -1, -2))


def _expm_2x2(H: np.ndarray, dt: float) -> np.ndarray:
    # H = h0 I + hx X + hy Y + hz Z
    h0 = 0.5 * (H[..., 0, 0] + H[..., 1, 1]).real
    hz = 0.5 * (H[..., 0, 0] - H[..., 1, 1]).real
    hx = H[..., 1, 0].real
    hy = H[..., 1, 0].imag
    r = np.sqrt(hx * hx + hy * hy + hz * hz)
    c = np.cos(r * dt)
    s = np.where(r > 0, np.sin(r * dt) / np.where(r > 0, r, 1.0), dt)
    g = np.exp(-1j * h0 * dt)
    U = np.empty(H.shape, dtype=complex)
    U[..., 0, 0] = g * (c - 1j * s * hz)
    U[..., 1, 1] = g * (c + 1j * s * hz)
    U[..., 0, 1] = g * (-1j * s * (hx - 1j * hy))
    U[..., 1, 0] = g * (-1j * s * (hx + 1j * hy))
    return U


def ket(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def to_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def is_pure_vector(state: np.ndarray) -> bool:
    return np.ndim(state) == 1


def validate_state(state: np.ndarray, tol: float = STATE_TOL) -> np.ndarray:
    """Check the normalization invariants of a pure vector or density matrix."""
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        norm = np.linalg.norm(state)
        if abs(norm - 1.0) > tol:
            raise ValidationError(f"pure state norm {norm!r} differs from 1")
        return state
    if state.ndim != 2 or state.shape[0] != state.shape[1]:
        raise ValidationError(f"invalid state shape {state.shape}")
    if np.abs(state - state.conj().T).max() > tol:
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(state).real - 1.0) > tol:
        raise ValidationError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(state).min() < -tol:
        raise ValidationError("density matrix has negative eigenvalues")
    return state


def _sqrtm_psd(rho: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(rho)
    values = np.sqrt(np.clip(values, 0.0, None))
    return (vectors * values) @ vectors.conj().T


def fidelity_amplitude(a: np.ndarray, b: np.ndarray, psd_tol: float = 1e-8) -> float:
    """Fidelity amplitude Tr sqrt(sqrt(a) b sqrt(a)), in [0, 1].

    Pure arguments use the overlap shortcut: |<a|b>| for two vectors and
    sqrt(<psi|rho|psi>) when one side is mixed.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape[0] != b.shape[0]:
        raise ValidationError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.ndim == 1 and b.ndim == 1:
        return float(min(abs(np.vdot(a, b)), 1.0))
    if a.ndim == 1 or b.ndim == 1:
        psi, rho = (a, b) if a.ndim == 1 else (b, a)
        _check_psd(rho, psd_tol)
        return float(np.sqrt(min(max(np.vdot(psi, rho @ psi).real, 0.0), 1.0)))
    _check_psd(a, psd_tol)
    _check_psd(b, psd_tol)
    s = _sqrtm_psd(a)
    m = s @ b @ s
    m = 0.5 * (m + m.conj().T)
    ev = np.clip(np.linalg.eigvalsh(m), 0.0, None)
    return float(min(np.sqrt(ev).sum(), 1.0))


def _check_psd(rho: np.ndarray, tol: float) -> None:
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
        raise ValidationError("density matrix is not positive semidefinite")


def fidelity_series(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Fidelity amplitudes between two equally long stacks of states.

    ``a`` must be a stack of pure vectors, shape (n, d); ``b`` may hold
    vectors (n, d) or density matrices (n, d, d).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[0] != b.shape[0] or a.shape[1] != b.shape[1]:
        raise ValidationError(f"stack shapes differ: {a.shape} vs {b.shape}")
    if b.ndim == 2:
        overlap = np.abs(np.einsum("ni,ni->n", a.conj(), b))
        return np.minimum(overlap, 1.0)
    expect = np.einsum("ni,nij,nj->n", a.conj(), b, a).real
    return np.sqrt(np.clip(expect, 0.0, 1.0))


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of the given operators (or vectors), left to right."""
    if len(ops) == 1 and isinstance(ops[0], (list, tuple)):
        ops = tuple(ops[0])
    if not ops:
        raise ValidationError("tensor product of an empty list")
    return reduce(np.kron, (np.asarray(op, dtype=complex) for op in ops))


def embed(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Place a single-qubit operator on ``site`` of an ``n_sites`` register."""
    factors: Sequence[np.ndarray] = [IDENTITY2] * n_sites
    factors = list(factors)
    factors[site] = op
    return tensor(*factors)
