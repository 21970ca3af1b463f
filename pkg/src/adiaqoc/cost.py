"""Cost functionals for adiabatic and traditional pulse optimization.

The total cost is a weighted sum of fidelity terms plus ``eta`` times a
power penalty.  Fidelity terms use the (unsquared) fidelity amplitude:

* terminal: ``1 - F(target, rho(tf))``
* adiabatic: time average of ``1 - F(rho_g(t), rho(t))`` along the run
* ensemble: weighted mean of the terminal term over perturbed copies
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dynamics import Trajectory, ground_fidelity
from .pulses import ControlSet, TimeGrid, power_integral
from .quantum import ValidationError, fidelity_amplitude

log = logging.getLogger(__name__)

POWER_MODES = ("one_sided", "absolute")


class EnsembleMemberError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"ensemble member {index} failed: {cause}")
        self.index = index


@dataclass(frozen=True)
class EnsembleSpec:
    """Members ``(alpha_i, u_i)``: a perturbation mapping and a weight."""

    members: tuple

    def __post_init__(self):
        members = tuple((dict(a), float(u)) for a, u in self.members)
        if not members:
            raise ValueError("an ensemble needs at least one member")
        if any(u <= 0 for _, u in members):
            raise ValueError("ensemble weights must be positive")
        object.__setattr__(self, "members", members)

    @property
    def size(self) -> int:
        return len(self.members)

    @classmethod
    def product(cls, **axes: Sequence[float]) -> "EnsembleSpec":
        """Uniformly weighted Cartesian grid over the named perturbations."""
        names = list(axes)
        combos = itertools.product(*(axes[n] for n in names))
        return cls(tuple((dict(zip(names, map(float, c))), 1.0) for c in combos))

    def to_dict(self) -> dict:
        return {"members": [{"alpha": a, "u": u} for a, u in self.members]}


@dataclass(frozen=True)
class CostSpec:
    terminal: float = 1.0
    adiabatic: float = 0.0
    ensemble: float = 0.0
    ensemble_spec: EnsembleSpec | None = None
    eta: float = 1.0
    c0: float | None = None
    power_mode: str = "one_sided"

    def __post_init__(self):
        weights = (self.terminal, self.adiabatic, self.ensemble)
        if any(w < 0 for w in weights):
            raise ValueError("fidelity weights must be non-negative")
        active = [w for w in weights if w > 0]
        if not active:
            raise ValueError("at least one fidelity term must be active")
        if abs(sum(active) - 1.0) > 1e-9:
            raise ValueError("active fidelity weights must sum to 1")
        if self.ensemble > 0 and self.ensemble_spec is None:
            raise ValueError("ensemble term needs an EnsembleSpec")
        if self.eta < 0 or (self.c0 is not None and self.c0 < 0):
            raise ValueError("eta and c0 must be non-negative")
        if self.power_mode not in POWER_MODES:
            raise ValueError(f"power_mode must be one of {POWER_MODES}")

    def to_dict(self) -> dict:
        d = {"terminal": self.terminal, "adiabatic": self.adiabatic, "ensemble": self.ensemble,
             "eta": self.eta, "c0": self.c0, "power_mode": self.power_mode}
        if self.ensemble_spec is not None:
            d["ensemble_spec"] = self.ensemble_spec.to_dict()
        return d


@dataclass
class CostBreakdown:
    total: float
    components: dict = field(default_factory=dict)

    def __float__(self):
        return self.total


def terminal_infidelity(traj: Trajectory, target: np.ndarray) -> float:
    if len(traj.states) == 0:
        raise ValidationError("empty trajectory")
    return 1.0 - fidelity_amplitude(target, traj.final)


def adiabatic_infidelity(traj: Trajectory, ground: Trajectory) -> float:
    """Trapezoid time-average of the instantaneous infidelity."""
    f = ground_fidelity(traj, ground)
    return float(np.trapezoid(1.0 - f, traj.times) / traj.grid.duration)


def power_penalty(controls: ControlSet, grid: TimeGrid, c0: float,
                  mode: str = "one_sided") -> float:
    if c0 < 0:
        raise ValueError("c0 must be non-negative")
    excess = power_integral(controls, grid) - c0
    if mode == "one_sided":
        return max(excess, 0.0)
    if mode == "absolute":
        return abs(excess)
    raise ValueError(f"unknown power mode {mode!r}")


def ensemble_infidelity(problem, controls: ControlSet, ensemble: EnsembleSpec,
                        targets: Sequence[np.ndarray] | None = None) -> float:
    # weights are normalized to mean one, so (1/M) sum u_i reduces to the
    # plain mean for uniform weights and identical members ignore u entirely
    total = 0.0
    norm = sum(u for _, u in ensemble.members)
    for i, (alpha, u) in enumerate(ensemble.members):
        try:
            traj = problem.run(controls, alpha)
            target = problem.target_state() if targets is None else targets[i]
            value = terminal_infidelity(traj, target)
            if not np.isfinite(value):
                raise ValidationError("non-finite infidelity")
            total += u * value
        except Exception as exc:  # noqa: BLE001 - re-raised with the member index
            raise EnsembleMemberError(i, exc) from exc
    return total / norm


def composite_cost(problem, controls: ControlSet, spec: CostSpec) -> CostBreakdown:
    """Evaluate every active term; ``components`` also records the number of
    propagations the evaluation took."""
    comps: dict = {}
    fid = 0.0
    propagations = 0
    if spec.terminal > 0 or spec.adiabatic > 0:
        traj = problem.run(controls)
        propagations += 1
        if spec.terminal > 0:
            comps["terminal"] = terminal_infidelity(traj, problem.target_state())
            fid += spec.terminal * comps["terminal"]
        if spec.adiabatic > 0:
            ground = problem.reference_trajectory(problem.model(controls), controls)
            comps["adiabatic"] = adiabatic_infidelity(traj, ground)
            fid += spec.adiabatic * comps["adiabatic"]
    if spec.ensemble > 0:
        comps["ensemble"] = ensemble_infidelity(problem, controls, spec.ensemble_spec)
        propagations += spec.ensemble_spec.size
        fid += spec.ensemble * comps["ensemble"]
    penalty = 0.0
    if spec.c0 is not None and spec.eta > 0:
        penalty = power_penalty(controls, problem.grid, spec.c0, spec.power_mode)
    comps["fidelityTerm"] = fid
    comps["areaPenalty"] = penalty
    comps["propagations"] = propagations
    total = fid + spec.eta * penalty
    log.debug("cost evaluation", extra={"cost": {**comps, "total": total}})
    return CostBreakdown(total, comps)


class CostFunction:
    """Callable ``controls -> CostBreakdown`` bound to a problem and spec."""

    def __init__(self, problem, spec: CostSpec):
        self.problem = problem
        self.spec = spec
        self.n_propagations = 0

    def __call__(self, controls: ControlSet) -> CostBreakdown:
        result = composite_cost(self.problem, controls, self.spec)
        self.n_propagations += result.components["propagations"]
        return result
