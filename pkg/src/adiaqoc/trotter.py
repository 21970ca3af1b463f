"""Digitized RAP: symmetric Rz-Rx-Rz Trotter steps and shot sampling.

Gates follow ``R_x(theta) = exp(-i theta sigma_x / 2)`` and
``R_z(phi) = exp(-i phi sigma_z / 2)``.  One step of
``H = eps Omega sigma_x + (Delta + delta) sigma_z`` sampled at the step
midpoint ``t_k`` is

    R_z(phi) R_x(theta) R_z(phi),   phi = (Delta(t_k) + delta) dt,
                                    theta = 2 eps Omega(t_k) dt,

which equals ``exp(-i H(t_k) dt)`` up to ``O(dt^3)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np
from scipy import ndimage

from .dynamics import _scan_2x2
from .models.rap import RapProblem, RapSpec
from .pulses import ControlSet, TimeGrid


@dataclass(frozen=True, eq=False)
class GateSequence:
    phi_half: np.ndarray
    theta: np.ndarray
    grid: TimeGrid

    def __post_init__(self):
        phi = np.asarray(self.phi_half, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if phi.shape != theta.shape or phi.shape != (self.grid.n_steps,):
            raise ValueError("one (phi, theta) pair per grid step is required")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(theta))):
            raise ValueError("gate angles must be finite")
        object.__setattr__(self, "phi_half", phi)
        object.__setattr__(self, "theta", theta)

    @property
    def n_steps(self) -> int:
        return self.phi_half.size

    @property
    def n_gates(self) -> int:
        return 3 * self.n_steps

    def step_unitaries(self) -> np.ndarray:
        """Per-step products ``R_z R_x R_z``, shape ``(n, 2, 2)``."""
        c, s = np.cos(self.theta / 2), np.sin(self.theta / 2)
        e = np.exp(-0.5j * self.phi_half)
        U = np.empty((self.n_steps, 2, 2), dtype=complex)
        U[:, 0, 0] = e * e * c
        U[:, 1, 1] = np.conj(e * e) * c
        U[:, 0, 1] = U[:, 1, 0] = -1j * s
        return U

    def final_state(self, psi0=None) -> np.ndarray:
        psi0 = np.array([1.0, 0.0], dtype=complex) if psi0 is None else np.asarray(psi0, complex)
        a, b, c, d = _scan_2x2(self.step_unitaries())
        return np.array([a[-1] * psi0[0] + b[-1] * psi0[1], c[-1] * psi0[0] + d[-1] * psi0[1]])

    def to_dict(self) -> dict:
        return {"phi_half": self.phi_half.tolist(), "theta": self.theta.tolist(),
                "grid": self.grid.to_dict()}


def digitize(spec: RapSpec, grid: TimeGrid) -> GateSequence:
    t = grid.points
    omega = spec.epsilon * spec.controls["Omega"](t)
    delta = spec.controls["Delta"](t) + spec.delta_dopp
    return GateSequence(delta * grid.dt, 2.0 * omega * grid.dt, grid)


class ShotResult(NamedTuple):
    shots: int
    ones: int
    estimate: float
    seed: int


def shot_generator(seed: int, index: int = 0) -> np.random.Generator:
    key = np.random.SeedSequence([seed, index]).generate_state(2, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def excited_probability(seq: GateSequence, depolarizing: float = 0.0) -> float:
    """``P(|1>)`` after the sequence from ``|0>``.

    A depolarizing error of strength ``p`` after every gate shrinks the
    Bloch vector by ``1 - p`` per gate and commutes with the rotations, so
    the noisy result follows from the ideal one in closed form.
    """
    if not 0.0 <= depolarizing <= 1.0:
        raise ValueError("depolarizing probability must lie in [0, 1]")
    psi = seq.final_state()
    z = abs(psi[0]) ** 2 - abs(psi[1]) ** 2
    z *= (1.0 - depolarizing) ** seq.n_gates
    return float(np.clip(0.5 * (1.0 - z), 0.0, 1.0))


def run_shots(seq: GateSequence, shots: int, seed: int = 0, index: int = 0,
              depolarizing: float = 0.0) -> ShotResult:
    """Sample Z-basis outcomes; the stream is keyed by ``(seed, index)``."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    p1 = excited_probability(seq, depolarizing)
    ones = int(shot_generator(seed, index).binomial(shots, p1))
    return ShotResult(int(shots), ones, ones / shots, int(seed))


class Plateau(NamedTuple):
    n_epsilon: int
    n_doppler: int
    epsilon_span: float
    doppler_span: float
    size: int


@dataclass
class RobustnessScan:
    """Terminal infidelity, rows = Doppler shifts, columns = area scales."""

    epsilons: np.ndarray
    dopplers: np.ndarray
    infidelity: np.ndarray
    shots: int | None = None
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta_dopp\\epsilon", *(f"{e:.10g}" for e in self.epsilons)])
            for d, row in zip(self.dopplers, self.infidelity):
                w.writerow([f"{d:.10g}", *(f"{v:.12g}" for v in row)])

    @classmethod
    def from_csv(cls, path) -> "RobustnessScan":
        with open(path) as fh:
            rows = list(csv.reader(fh))
        eps = np.array([float(x) for x in rows[0][1:]])
        body = np.array([[float(x) for x in r] for r in rows[1:]])
        return cls(eps, body[:, 0], body[:, 1:])

    def plateau(self, threshold: float, epsilon: float = 1.0, doppler: float = 0.0) -> Plateau:
        """Connected region below ``threshold`` containing the grid point
        nearest the nominal parameters (4-neighbour connectivity)."""
        j = int(np.argmin(np.abs(self.epsilons - epsilon)))
        i = int(np.argmin(np.abs(self.dopplers - doppler)))
        below = self.infidelity < threshold
        if not below[i, j]:
            return Plateau(0, 0, 0.0, 0.0, 0)
        labels, _ = ndimage.label(below)
        region = labels == labels[i, j]
        cols = np.nonzero(region.any(axis=0))[0]
        rows = np.nonzero(region.any(axis=1))[0]
        return Plateau(cols.size, rows.size,
                       float(self.epsilons[cols].max() - self.epsilons[cols].min()),
                       float(self.dopplers[rows].max() - self.dopplers[rows].min()),
                       int(region.sum()))


def robustness_scan(controls: ControlSet, grid: TimeGrid, epsilons: Sequence[float],
                    dopplers: Sequence[float], shots: int | None = None, seed: int = 0,
                    depolarizing: float = 0.0,
                    map_fn: Callable[[Callable, Iterable], Iterable] | None = None) -> RobustnessScan:
    """Infidelity ``1 - |<1|psi(tf)>|`` over the (Doppler, area scale) grid.

    Without ``shots`` the exact propagator is used; with ``shots`` each
    point is digitized and ``|<1|psi>|^2`` is estimated from ``shots``
    samples keyed by ``(seed, point index)``.
    """
    epsilons = np.asarray(epsilons, dtype=float)
    dopplers = np.asarray(dopplers, dtype=float)
    if not epsilons.size or not dopplers.size:
        raise ValueError("scan axes must be nonempty")
    points = [(i, j) for i in range(dopplers.size) for j in range(epsilons.size)]
    problem = RapProblem(grid)

    def evaluate(point):
        i, j = point
        if shots is None:
            traj = problem.run(controls, {"epsilon": epsilons[j], "delta_dopp": dopplers[i]})
            return 1.0 - min(abs(traj.final[1]), 1.0)
        spec = RapSpec(grid.tf, controls, epsilons[j], dopplers[i])
        res = run_shots(digitize(spec, grid), shots, seed, i * epsilons.size + j, depolarizing)
        return 1.0 - np.sqrt(res.estimate)

    values = list((map_fn or map)(evaluate, points))
    grid_values = np.array(values, dtype=float).reshape(dopplers.size, epsilons.size)
    meta = {"seed": seed, "depolarizing": depolarizing} if shots else {}
    return RobustnessScan(epsilons, dopplers, grid_values, shots, meta)
