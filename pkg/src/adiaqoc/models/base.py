"""Common interface between physical models and the cost functionals."""
from __future__ import annotations

from typing import Mapping

import numpy as np

from ..dynamics import (LindbladModel, Trajectory, instantaneous_ground_trajectory,
                        propagate_closed, propagate_lindblad, propagate_trajectories)
from ..pulses import ControlSet, TimeGrid

BACKENDS = ("closed", "lindblad", "trajectories")


class ControlProblem:
    """A model that turns a ``ControlSet`` into dynamics.

    Subclasses implement :meth:`model`, :meth:`initial_state` and
    :meth:`target_state`; the reference trajectory used by the adiabatic
    cost defaults to the instantaneous ground state of ``H(t)``.
    ``perturbation`` is a mapping of model-specific knobs (amplitude
    scale, detuning offset, lifetimes) used by ensembles and scans.
    """

    grid: TimeGrid
    backend: str = "closed"
    n_traj: int = 500
    seed: int = 0

    def model(self, controls: ControlSet, perturbation: Mapping | None = None) -> LindbladModel:
        raise NotImplementedError

    def initial_state(self) -> np.ndarray:
        raise NotImplementedError

    def target_state(self) -> np.ndarray:
        raise NotImplementedError

    def propagate(self, model: LindbladModel) -> Trajectory:
        if self.backend == "closed" or not model.jumps:
            return propagate_closed(model, self.initial_state(), self.grid, check=False)
        if self.backend == "lindblad":
            return propagate_lindblad(model, self.initial_state(), self.grid, check=False)
        if self.backend == "trajectories":
            return propagate_trajectories(model, self.initial_state(), self.grid,
                                          self.n_traj, self.seed)
        raise ValueError(f"unknown backend {self.backend!r}")

    def reference_trajectory(self, model: LindbladModel, controls: ControlSet) -> Trajectory:
        return instantaneous_ground_trajectory(model.closed(), self.grid)

    def run(self, controls: ControlSet, perturbation: Mapping | None = None) -> Trajectory:
        return self.propagate(self.model(controls, perturbation))
