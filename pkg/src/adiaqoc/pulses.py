"""CRAB-parameterized control pulses on a uniform time grid.

A pulse is a fixed reference shape plus a correction expanded in one of
three smooth bases (shifted Gaussians, sines, or Chebyshev polynomials
under a squared-sine envelope).  All pulses live on ``[0, tf]``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from numpy.polynomial import chebyshev

BASES = ("none", "gaussian", "sine", "chebyshev")
_DOMAIN_SLACK = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """``n_steps`` uniform subintervals of ``[t0, tf]``.

    ``points`` are the subinterval midpoints (where Hamiltonians are
    sampled) and ``edges`` the ``n_steps + 1`` boundaries (where states
    are recorded).
    """

    tf: float
    n_steps: int = 1000
    t0: float = 0.0

    def __post_init__(self):
        if not self.tf > self.t0:
            raise ValueError(f"tf={self.tf} must exceed t0={self.t0}")
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")

    @property
    def dt(self) -> float:
        return (self.tf - self.t0) / self.n_steps

    @property
    def duration(self) -> float:
        return self.tf - self.t0

    @property
    def points(self) -> np.ndarray:
        return self.t0 + (np.arange(self.n_steps) + 0.5) * self.dt

    @property
    def edges(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_steps + 1) * self.dt

    def to_dict(self) -> dict:
        return {"t0": self.t0, "tf": self.tf, "n_steps": self.n_steps}


# ---------------------------------------------------------------------------
# reference shapes

ReferenceFn = Callable[[np.ndarray, float, Mapping[str, float]], np.ndarray]
REFERENCES: dict[str, ReferenceFn] = {}


def register_reference(name: str):
    def deco(fn: ReferenceFn) -> ReferenceFn:
        REFERENCES[name] = fn
        return fn
    return deco


@register_reference("zero")
def _ref_zero(t, tf, params):
    return np.zeros_like(t)


@register_reference("constant")
def _ref_constant(t, tf, params):
    return np.full_like(t, params.get("value", 1.0))


@register_reference("sin2")
def _ref_sin2(t, tf, params):
    return params.get("amplitude", 1.0) * np.sin(np.pi * t / tf) ** 2


@register_reference("rap_omega")
def _ref_rap_omega(t, tf, params):
    # sixth-order polynomial on x = t/tau in [-1, 1], tau = tf/2
    x = 2.0 * t / tf - 1.0
    return params.get("A", 1.0) - params.get("B", 3.0) * x**4 + params.get("C", 2.0) * x**6


@register_reference("rap_delta")
def _ref_rap_delta(t, tf, params):
    x = 2.0 * t / tf - 1.0
    return params.get("a", 0.6875) * x - params.get("b", 0.1375) * x**3


# ---------------------------------------------------------------------------
# pulses


@dataclass(frozen=True, eq=False)
class ControlPulse:
    """Reference shape plus basis correction, times an overall ``scale``.

    ``coefficients`` holds the weights ``w_m`` for the sine and Chebyshev
    bases and an ``(M, 3)`` array of ``(w_m, mu_m, sigma_m)`` rows for the
    Gaussian basis.
    """

    tf: float
    reference: str = "zero"
    ref_params: Mapping[str, float] = field(default_factory=dict)
    basis: str = "none"
    coefficients: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sine_offset: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.reference not in REFERENCES:
            raise ValueError(f"unknown reference pulse {self.reference!r}")
        coeffs = np.asarray(self.coefficients, dtype=float)
        if self.basis == "gaussian":
            coeffs = coeffs.reshape(-1, 3)
            if np.any(coeffs[:, 2] <= 0):
                raise ValueError("Gaussian widths must be positive")
        else:
            coeffs = coeffs.ravel()
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "ref_params", dict(self.ref_params))

    @property
    def order(self) -> int:
        return 0 if self.basis == "none" else len(self.coefficients)

    @property
    def n_params(self) -> int:
        return self.coefficients.size if self.basis != "none" else 0

    def with_coefficients(self, coefficients) -> "ControlPulse":
        return replace(self, coefficients=np.asarray(coefficients, dtype=float))

    def scaled(self, factor: float) -> "ControlPulse":
        return replace(self, scale=self.scale * factor)

    def reference_values(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.scale * REFERENCES[self.reference](t, self.tf, self.ref_params)

    def correction(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        c = self.coefficients
        if self.basis == "none" or c.size == 0:
            return np.zeros_like(t)
        if self.basis == "gaussian":
            w, mu, sigma = c[:, 0], c[:, 1], c[:, 2]
            z = (t[..., None] - mu) / sigma
            return np.exp(-z * z) @ w
        if self.basis == "sine":
            m = np.arange(1, c.size + 1)
            return np.sin(np.pi * np.multiply.outer((t + self.sine_offset) / self.tf, m)) @ c
        # chebyshev: T_0 .. T_{M-1} under a squared-sine envelope
        z = 2.0 * t / self.tf - 1.0
        return np.sin(np.pi * t / self.tf) ** 2 * chebyshev.chebval(z, c)

    def __call__(self, t) -> np.ndarray:
        return evaluate(self, t)

    def to_dict(self) -> dict:
        return {
            "tf": self.tf,
            "reference": self.reference,
            "ref_params": dict(self.ref_params),
            "basis": self.basis,
            "coefficients": self.coefficients.tolist(),
            "sine_offset": self.sine_offset,
            "scale": self.scale,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ControlPulse":
        return cls(**{**data, "coefficients": np.asarray(data.get("coefficients", []), dtype=float)})


def evaluate(pulse: ControlPulse, t) -> np.ndarray:
    """Pulse value at time(s) ``t``; raises if ``t`` leaves ``[0, tf]``."""
    t = np.asarray(t, dtype=float)
    slack = _DOMAIN_SLACK * pulse.tf
    if np.any(t < -slack) or np.any(t > pulse.tf + slack):
        raise ValueError(f"time outside pulse domain [0, {pulse.tf}]")
    return pulse.reference_values(t) + pulse.scale * pulse.correction(t)


@dataclass(frozen=True, eq=False)
class ControlSet:
    """Ordered, labelled collection of the control fields of one model."""

    pulses: tuple
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.pulses:
            raise ValueError("a control set needs at least one pulse")
        if len(self.pulses) != len(self.labels):
            raise ValueError("one label per pulse")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("control labels must be unique")

    @classmethod
    def from_mapping(cls, pulses: Mapping[str, ControlPulse]) -> "ControlSet":
        return cls(tuple(pulses.values()), tuple(pulses.keys()))

    def __getitem__(self, label: str) -> ControlPulse:
        try:
            return self.pulses[self.labels.index(label)]
        except ValueError:
            raise KeyError(label) from None

    def __iter__(self):
        return iter(zip(self.labels, self.pulses))

    def __len__(self):
        return len(self.pulses)

    def replace(self, **updates: ControlPulse) -> "ControlSet":
        unknown = set(updates) - set(self.labels)
        if unknown:
            raise KeyError(sorted(unknown))
        return ControlSet(tuple(updates.get(lab, p) for lab, p in self), self.labels)

    def sample(self, t) -> np.ndarray:
        """Array of shape ``(len(self), len(t))`` with every control sampled."""
        return np.stack([evaluate(p, t) for p in self.pulses])

    def to_dict(self) -> dict:
        return {lab: p.to_dict() for lab, p in self}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ControlSet":
        return cls.from_mapping({lab: ControlPulse.from_dict(d) for lab, d in data.items()})


def pulse_area(pulse: ControlPulse, grid: TimeGrid) -> float:
    """Midpoint-rule integral of the pulse over the grid."""
    return float(np.sum(evaluate(pulse, grid.points)) * grid.dt)


def normalize_area(pulse: ControlPulse, grid: TimeGrid, target: float) -> ControlPulse:
    area = pulse_area(pulse, grid)
    if area == 0.0 or not np.isfinite(area):
        raise ValueError("cannot normalize a pulse with zero area")
    return pulse.scaled(target / area)


def power_integral(controls: ControlSet | Iterable[ControlPulse], grid: TimeGrid) -> float:
    pulses = controls.pulses if isinstance(controls, ControlSet) else tuple(controls)
    return float(sum(np.sum(evaluate(p, grid.points) ** 2) for p in pulses) * grid.dt)


def save_pulses(controls: ControlSet, path, grid: TimeGrid | None = None) -> None:
    record = {"controls": controls.to_dict()}
    if grid is not None:
        record["grid"] = grid.to_dict()
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)


def load_pulses(path) -> tuple[ControlSet, TimeGrid | None]:
    with open(path) as fh:
        record = json.load(fh)
    grid = TimeGrid(**record["grid"]) if "grid" in record else None
    return ControlSet.from_dict(record["controls"]), grid


def write_sampled_csv(path, grid: TimeGrid, controls: ControlSet,
                      labels: Sequence[str] | None = None) -> None:
    """Columns: t followed by one column per control, sampled at midpoints."""
    labels = list(labels or controls.labels)
    t = grid.points
    values = [evaluate(controls[lab], t) for lab in labels]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *labels])
        for i, ti in enumerate(t):
            writer.writerow([f"{ti:.10g}", *(f"{v[i]:.12g}" for v in values)])
