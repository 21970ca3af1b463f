"""Time evolution under piecewise-constant Hamiltonians.

Every backend samples ``H`` at the midpoint of each grid step and applies
the exact exponential of that sample, which keeps the scheme second order
in the step size and exactly norm (or trace) preserving per step.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .pulses import TimeGrid
from .quantum import (ValidationError, check_hermitian, expm_hermitian, fidelity_series,
                      hermitian_eigen, validate_state)

LINDBLAD_MAX_DIM = 64

Coefficient = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """``H(t) = drift + sum_j c_j(t) H_j`` together with jump operators.

    Rates are absorbed into the jump operators (``L = sqrt(gamma) * op``).
    """

    drift: np.ndarray
    terms: Sequence[tuple[np.ndarray, Coefficient]] = ()
    jumps: Sequence[np.ndarray] = ()

    def __post_init__(self):
        drift = np.asarray(self.drift, dtype=complex)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "terms", tuple((np.asarray(op, dtype=complex), c)
                                                for op, c in self.terms))
        object.__setattr__(self, "jumps", tuple(np.asarray(L, dtype=complex)
                                                for L in self.jumps))
        d = drift.shape[0]
        for op, _ in self.terms:
            if op.shape != (d, d):
                raise ValidationError("Hamiltonian term dimension mismatch")
        for L in self.jumps:
            if L.shape != (d, d):
                raise ValidationError("jump operator dimension mismatch")

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    def closed(self) -> "LindbladModel":
        return LindbladModel(self.drift, self.terms, ())

    def with_jumps(self, jumps) -> "LindbladModel":
        return LindbladModel(self.drift, self.terms, tuple(jumps))

    def coefficients(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if not self.terms:
            return np.zeros((0, times.size))
        return np.stack([np.broadcast_to(np.asarray(c(times), dtype=float), times.shape)
                         for _, c in self.terms])

    def hamiltonians(self, times) -> np.ndarray:
        """Stack of ``H(t)`` for every entry of ``times``."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        H = np.broadcast_to(self.drift, (times.size, self.dim, self.dim)).copy()
        coeffs = self.coefficients(times)
        for (op, _), c in zip(self.terms, coeffs):
            H += c[:, None, None] * op
        return H

    def hamiltonian_at(self, t: float) -> np.ndarray:
        return self.hamiltonians([t])[0]


@dataclass(eq=False)
class Trajectory:
    """States at the ``n_steps + 1`` grid edges.

    ``states`` has shape ``(n+1, d)`` for pure-state evolution and
    ``(n+1, d, d)`` for density matrices.
    """

    grid: TimeGrid
    states: np.ndarray
    observables: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.states) != self.grid.n_steps + 1:
            raise ValidationError("need one state per grid edge")

    @property
    def times(self) -> np.ndarray:
        return self.grid.edges

    @property
    def is_pure(self) -> bool:
        return self.states.ndim == 2

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def populations(self) -> np.ndarray:
        if self.is_pure:
            return np.abs(self.states) ** 2
        return np.einsum("nii->ni", self.states).real

    def to_csv(self, path, columns: Mapping[str, np.ndarray] | None = None) -> None:
        """Write ``t`` plus populations and any extra named series."""
        cols = {f"pop_{i}": p for i, p in enumerate(self.populations().T)}
        cols.update(self.observables)
        cols.update(columns or {})
        names = list(cols)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", *names])
            for k, t in enumerate(self.times):
                writer.writerow([f"{t:.10g}", *(f"{cols[n][k]:.12g}" for n in names)])


def _scan_2x2(U: np.ndarray) -> np.ndarray:
    # prefix products P[k] = U[k] ... U[0] by recursive doubling, with the
    # 2x2 products written out (much faster than batched matmul)
    a, b, c, d = (U[:, 0, 0].copy(), U[:, 0, 1].copy(), U[:, 1, 0].copy(), U[:, 1, 1].copy())
    n = len(a)
    shift = 1
    while shift < n:
        a1, b1, c1, d1 = a[shift:], b[shift:], c[shift:], d[shift:]
        a0, b0, c0, d0 = a[:-shift], b[:-shift], c[:-shift], d[:-shift]
        a, b, c, d = (np.concatenate([a[:shift], a1 * a0 + b1 * c0]),
                      np.concatenate([b[:shift], a1 * b0 + b1 * d0]),
                      np.concatenate([c[:shift], c1 * a0 + d1 * c0]),
                      np.concatenate([d[:shift], c1 * b0 + d1 * d0]))
        shift *= 2
    return a, b, c, d


def _step_products(U: np.ndarray, psi0: np.ndarray) -> np.ndarray:
    n, d = U.shape[0], U.shape[-1]
    states = np.empty((n + 1, d), dtype=complex)
    states[0] = psi0
    if d == 2:
        a, b, c, dd = _scan_2x2(U)
        states[1:, 0] = a * psi0[0] + b * psi0[1]
        states[1:, 1] = c * psi0[0] + dd * psi0[1]
        return states
    psi = psi0
    for k in range(n):
        psi = U[k] @ psi
        states[k + 1] = psi
    return states


def propagate_closed(model: LindbladModel, psi0: np.ndarray, grid: TimeGrid,
                     check: bool = True) -> Trajectory:
    """Unitary evolution of a pure state; jump operators are ignored."""
    psi0 = validate_state(np.asarray(psi0, dtype=complex))
    if psi0.ndim != 1:
        raise ValidationError("propagate_closed needs a pure state vector")
    H = model.hamiltonians(grid.points)
    if check:
        check_hermitian(H)
    U = expm_hermitian(H, grid.dt)
    return Trajectory(grid, _step_products(U, psi0))


def liouvillian(H: np.ndarray, jumps: Sequence[np.ndarray]) -> np.ndarray:
    """Row-major vectorized Lindblad generator; ``H`` may be a stack."""
    H = np.asarray(H, dtype=complex)
    d = H.shape[-1]
    eye = np.eye(d)
    # vec(A X B) = (A kron B^T) vec(X) for row-major flattening
    L = -1j * (np.einsum("...ij,kl->...ikjl", H, eye)
               - np.einsum("ij,...lk->...ikjl", eye, H)).reshape(H.shape[:-2] + (d * d, d * d))
    D = np.zeros((d * d, d * d), dtype=complex)
    for J in jumps:
        JdJ = J.conj().T @ J
        D += np.kron(J, J.conj()) - 0.5 * np.kron(JdJ, eye) - 0.5 * np.kron(eye, JdJ.T)
    return L + D


def sink_level(model: LindbladModel, H: np.ndarray | None = None, tol: float = 0.0) -> int | None:
    """Index ``s`` if every jump has the form ``c |s><k|`` with ``k != s`` and
    level ``s`` is decoupled from ``H``; otherwise ``None``.

    For such models the master equation only moves population into ``s``,
    so it reduces exactly to non-Hermitian evolution plus bookkeeping.
    """
    if not model.jumps:
        return None
    sink = None
    for L in model.jumps:
        rows, cols = np.nonzero(np.abs(L) > tol)
        if rows.size != 1 or rows[0] == cols[0]:
            return None
        if sink is None:
            sink = int(rows[0])
        elif rows[0] != sink:
            return None
    ops = [model.drift] + [op for op, _ in model.terms] if H is None else [H]
    for op in ops:
        off = np.delete(np.take(op, sink, axis=-1), sink, axis=-1)
        if np.any(np.abs(off) > tol) or np.any(np.abs(np.take(op, sink, axis=-1)[..., sink]) > tol):
            return None
    return sink


def _propagate_sink(model: LindbladModel, rho0: np.ndarray, grid: TimeGrid,
                    H: np.ndarray, sink: int) -> Trajectory:
    # rho(t) = U rho0 U^dag + (1 - tr) |s><s| with U generated by H_eff
    d = model.dim
    decay = sum(L.conj().T @ L for L in model.jumps)
    U = scipy.linalg.expm(-1j * (H - 0.5j * decay) * grid.dt)
    values, vectors = np.linalg.eigh(rho0)
    keep = values > 1e-15
    V = vectors[:, keep] * np.sqrt(values[keep])
    cols = np.empty((grid.n_steps + 1, d, V.shape[1]), dtype=complex)
    cols[0] = V
    for k in range(grid.n_steps):
        V = U[k] @ V
        cols[k + 1] = V
    rhos = cols @ np.conj(np.swapaxes(cols, -1, -2))
    lost = 1.0 - np.einsum("nii->n", rhos).real
    rhos[:, sink, sink] += lost
    return Trajectory(grid, rhos, metadata={"sink_level": sink})


def propagate_lindblad(model: LindbladModel, rho0: np.ndarray, grid: TimeGrid,
                       check: bool = True, reduce_sink: bool = True) -> Trajectory:
    """Density-matrix evolution by exponentiating the Liouvillian per step.

    With ``reduce_sink`` models whose jumps all feed one decoupled absorbing
    level (see :func:`sink_level`) take the exact non-Hermitian shortcut.
    """
    d = model.dim
    if d > LINDBLAD_MAX_DIM:
        raise ValidationError(
            f"dimension {d} exceeds the superoperator limit {LINDBLAD_MAX_DIM}; "
            "use propagate_trajectories instead")
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    validate_state(rho0)
    H = model.hamiltonians(grid.points)
    if check:
        check_hermitian(H)
    if reduce_sink:
        sink = sink_level(model, H)
        if sink is not None:
            return _propagate_sink(model, rho0, grid, H, sink)
    props = scipy.linalg.expm(liouvillian(H, model.jumps) * grid.dt)
    vecs = np.empty((grid.n_steps + 1, d * d), dtype=complex)
    v = rho0.reshape(-1)
    vecs[0] = v
    for k in range(grid.n_steps):
        v = props[k] @ v
        vecs[k + 1] = v
    rhos = vecs.reshape(-1, d, d)
    rhos = 0.5 * (rhos + np.conj(np.swapaxes(rhos, -1, -2)))
    return Trajectory(grid, rhos)


def trajectory_stream(seed: int, index: int, n_steps: int) -> np.ndarray:
    """Uniform draws ``(n_steps, 2)`` keyed by ``(seed, index)``.

    Row ``k`` holds the jump and channel numbers of step ``k``; the values
    depend only on the key, never on evaluation order.
    """
    key = np.random.SeedSequence([seed, index]).generate_state(2, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).random((n_steps, 2))


def propagate_trajectories(model: LindbladModel, psi0: np.ndarray, grid: TimeGrid,
                           n_traj: int, seed: int = 0) -> Trajectory:
    """Quantum-jump unraveling averaged into density matrices.

    Each step evolves with ``exp(-i H_eff dt)``, ``H_eff = H - i/2 sum L^dag L``;
    a jump happens when the first draw falls below the norm loss, and the
    second draw picks the channel in proportion to ``||L_k psi||^2``.
    """
    if n_traj < 1:
        raise ValidationError("n_traj must be at least 1")
    psi0 = validate_state(np.asarray(psi0, dtype=complex))
    d, n = model.dim, grid.n_steps
    H = model.hamiltonians(grid.points)
    jumps = np.array(model.jumps) if model.jumps else np.zeros((0, d, d), complex)
    decay = np.einsum("kji,kjl->il", jumps.conj(), jumps) if len(jumps) else np.zeros((d, d))
    U = scipy.linalg.expm(-1j * (H - 0.5j * decay) * grid.dt)
    draws = np.stack([trajectory_stream(seed, j, n) for j in range(n_traj)], axis=1)

    psi = np.broadcast_to(psi0, (n_traj, d)).copy()
    rho = np.empty((n + 1, d, d), dtype=complex)
    pop_sum = np.empty((n + 1, d))
    pop_sq = np.empty((n + 1, d))

    def record(k):
        rho[k] = np.einsum("ni,nj->ij", psi, psi.conj()) / n_traj
        p = np.abs(psi) ** 2
        pop_sum[k] = p.sum(axis=0)
        pop_sq[k] = (p * p).sum(axis=0)

    record(0)
    n_jumps = 0
    for k in range(n):
        phi = psi @ U[k].T
        norm2 = np.einsum("ni,ni->n", phi.conj(), phi).real
        jumped = draws[k, :, 0] < 1.0 - norm2
        if not len(jumps):
            jumped[:] = False
        stay = ~jumped
        phi[stay] /= np.sqrt(norm2[stay])[:, None]
        if np.any(jumped) and len(jumps):
            idx = np.nonzero(jumped)[0]
            cand = np.einsum("kij,nj->nki", jumps, psi[idx])
            weights = np.einsum("nki,nki->nk", cand.conj(), cand).real
            cum = np.cumsum(weights, axis=1)
            pick = (draws[k, idx, 1][:, None] * cum[:, -1:] >= cum).sum(axis=1)
            pick = np.minimum(pick, len(jumps) - 1)
            new = cand[np.arange(idx.size), pick]
            phi[idx] = new / np.linalg.norm(new, axis=1)[:, None]
            n_jumps += idx.size
        psi = phi
        record(k + 1)

    mean = pop_sum / n_traj
    var = np.clip(pop_sq / n_traj - mean**2, 0.0, None)
    meta = {"n_traj": n_traj, "seed": seed, "n_jumps": int(n_jumps),
            "population_stderr": np.sqrt(var / max(n_traj - 1, 1))}
    return Trajectory(grid, rho, metadata=meta)


def _align_phases(vectors: np.ndarray) -> np.ndarray:
    # rotate each vector so its overlap with the previous one is real positive
    ov = np.einsum("ni,ni->n", vectors[:-1].conj(), vectors[1:])
    mag = np.abs(ov)
    step = np.where(mag > 0, np.conj(ov) / np.where(mag > 0, mag, 1.0), 1.0)
    factors = np.concatenate([[1.0], np.cumprod(step)])
    return vectors * factors[:, None]


def instantaneous_ground_trajectory(model: LindbladModel, grid: TimeGrid,
                                    degeneracy_tol: float = 1e-10) -> Trajectory:
    """Ground state of ``H(t)`` at each grid edge, phases made continuous."""
    H = model.hamiltonians(grid.edges)
    values, vectors = hermitian_eigen(H)
    ground = _align_phases(vectors[:, :, 0])
    gaps = values[:, 1] - values[:, 0] if model.dim > 1 else np.full(len(values), np.inf)
    degenerate = np.nonzero(gaps < degeneracy_tol * np.maximum(1.0, np.abs(values).max(axis=1)))[0]
    meta = {"degenerate_indices": degenerate.tolist(), "min_gap": float(gaps.min())}
    return Trajectory(grid, ground, observables={"ground_energy": values[:, 0]}, metadata=meta)


def ground_fidelity(traj: Trajectory, reference: Trajectory) -> np.ndarray:
    """Fidelity amplitude with a pure reference trajectory at every edge."""
    if reference.grid != traj.grid:
        raise ValidationError("trajectories live on different grids")
    return fidelity_series(reference.states, traj.states)
