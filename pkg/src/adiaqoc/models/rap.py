"""Rapid adiabatic passage in a driven two-level system.

``H = eps * Omega(t) sigma_x + (Delta(t) + delta_dopp) sigma_z`` on
``[0, tf]``.  With the reference sweep ``Delta`` runs from negative to
positive, so the ground state moves from |0> to |1>.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..dynamics import LindbladModel
from ..pulses import ControlPulse, ControlSet, TimeGrid, normalize_area
from ..quantum import SIGMA_X, SIGMA_Z, ket
from .base import ControlProblem

RAP_AREA = 4 * np.pi
POLY_OMEGA = {"A": 1.0, "B": 3.0, "C": 2.0}
POLY_DELTA = {"a": 0.6875, "b": 0.1375}
# area of A - B x^4 + C x^6 over x in [-1, 1], per unit tau
_POLY_AREA_PER_TAU = 2 * (1.0 - 3.0 / 5.0 + 2.0 / 7.0)


def default_tau(area: float = RAP_AREA) -> float:
    """Half-duration for which the normalized reference peaks at Omega = 1."""
    return area / _POLY_AREA_PER_TAU


@dataclass(frozen=True, eq=False)
class RapSpec:
    tf: float
    controls: ControlSet
    epsilon: float = 1.0
    delta_dopp: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def reference_polynomial_rap(tau: float, grid: TimeGrid | None = None,
                             area: float | None = RAP_AREA,
                             delta_scale: float = 1.0) -> ControlSet:
    """Polynomial Omega/Delta reference pair on ``[0, 2 tau]``.

    Omega is normalized to ``area`` on ``grid`` (pass ``area=None`` for the
    raw polynomial); Delta is left unnormalized.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    tf = 2.0 * tau
    omega = ControlPulse(tf, "rap_omega", POLY_OMEGA)
    delta = ControlPulse(tf, "rap_delta", {k: v * delta_scale for k, v in POLY_DELTA.items()})
    if area is not None:
        omega = normalize_area(omega, grid or TimeGrid(tf), area)
    return ControlSet((omega, delta), ("Omega", "Delta"))


def rap_hamiltonian_at(spec: RapSpec, t: float) -> np.ndarray:
    omega = spec.controls["Omega"](t)
    delta = spec.controls["Delta"](t)
    return spec.epsilon * omega * SIGMA_X + (delta + spec.delta_dopp) * SIGMA_Z


def rap_model(controls: ControlSet, epsilon: float = 1.0, delta_dopp: float = 0.0) -> LindbladModel:
    omega, delta = controls["Omega"], controls["Delta"]
    return LindbladModel(
        np.zeros((2, 2)),
        [(SIGMA_X, lambda t: epsilon * omega(t)),
         (SIGMA_Z, lambda t: delta(t) + delta_dopp)])


@dataclass(eq=False)
class RapProblem(ControlProblem):
    """Closed-system RAP transfer |0> -> |1> with optional perturbation."""

    grid: TimeGrid
    epsilon: float = 1.0
    delta_dopp: float = 0.0
    backend: str = "closed"
    jumps: tuple = field(default=())

    def model(self, controls: ControlSet, perturbation: Mapping | None = None) -> LindbladModel:
        p = perturbation or {}
        m = rap_model(controls, p.get("epsilon", self.epsilon), p.get("delta_dopp", self.delta_dopp))
        return m.with_jumps(self.jumps) if self.jumps else m

    def initial_state(self) -> np.ndarray:
        return ket(2, 0)

    def target_state(self) -> np.ndarray:
        return ket(2, 1)
