"""Two qubits exchanging an excitation through a multimode waveguide.

Single-excitation basis, in order: ``|1_a 0_b 0_c>`` (index 0),
``|0_a 1_b 0_c>`` (index 1), one photon in mode ``n`` for
``n = -nSidebands .. +nSidebands`` (indices 2..), and an absorbing vacuum
level last that collects decayed excitations.

Frequencies are measured in units of the coupling scale ``g`` and times in
``1 / g``; :class:`StirapDecay` converts laboratory lifetimes.

The parity of the guided modes alternates, which is carried by the qubit-B
coupling: ``g_bc^n = (-1)^n g_bc``, ``g_ac^n = g_ac``.  Only with the sign on
one of the two couplings does the dark state couple to the sidebands at
first order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..dynamics import LindbladModel, Trajectory
from ..pulses import ControlPulse, ControlSet, TimeGrid, register_reference
from .base import ControlProblem


# ---------------------------------------------------------------------------
# mixing-angle profiles: theta(s), dtheta/ds, d2theta/ds2 on s = t/tf in [0, 1]

def _theta_sin2(s):
    # (pi/2) sin^2(pi s / 2)
    return (np.pi / 2 * np.sin(np.pi * s / 2) ** 2,
            np.pi**2 / 4 * np.sin(np.pi * s),
            np.pi**3 / 4 * np.cos(np.pi * s))


def _theta_smoothstep(s):
    # (pi/2)(s - sin(2 pi s) / (2 pi)); first and second derivative vanish at both ends
    return (np.pi / 2 * (s - np.sin(2 * np.pi * s) / (2 * np.pi)),
            np.pi / 2 * (1 - np.cos(2 * np.pi * s)),
            np.pi**2 * np.sin(2 * np.pi * s))


THETA_PROFILES = {"sin2": _theta_sin2, "smoothstep": _theta_smoothstep}


def theta_profile(name: str, t, tf: float):
    """``(theta, theta_dot, theta_ddot)`` of a named profile at times ``t``."""
    try:
        fn = THETA_PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown theta profile {name!r}") from None
    th, d1, d2 = fn(np.asarray(t, dtype=float) / tf)
    return th, d1 / tf, d2 / tf**2


def satd_fields(theta, theta_dot, theta_ddot, g: float):
    """Superadiabatic pair ``(g_ac, g_bc)`` for a mixing angle and its derivatives."""
    corr = theta_ddot / (g**2 + theta_dot**2)
    return (g * (np.sin(theta) + np.cos(theta) * corr),
            g * (np.cos(theta) - np.sin(theta) * corr))


@register_reference("satd_ac")
def _satd_ac(t, tf, p):
    return satd_fields(*theta_profile(p.get("profile", "sin2"), t, tf), p.get("g", 1.0))[0]


@register_reference("satd_bc")
def _satd_bc(t, tf, p):
    return satd_fields(*theta_profile(p.get("profile", "sin2"), t, tf), p.get("g", 1.0))[1]


@register_reference("adiabatic_ac")
def _adiabatic_ac(t, tf, p):
    return p.get("g", 1.0) * np.sin(theta_profile(p.get("profile", "sin2"), t, tf)[0])


@register_reference("adiabatic_bc")
def _adiabatic_bc(t, tf, p):
    return p.get("g", 1.0) * np.cos(theta_profile(p.get("profile", "sin2"), t, tf)[0])


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StirapDecay:
    """Decay constants in model units (times in 1/g, rates in g).

    ``inf`` lifetimes or quality factor switch the channel off.
    """

    T1: float = np.inf
    Tphi: float = np.inf
    Qc: float = np.inf
    omega_c: float = 0.0

    def __post_init__(self):
        if self.T1 <= 0 or self.Tphi <= 0 or self.Qc <= 0:
            raise ValueError("lifetimes and quality factor must be positive")

    @property
    def gamma1(self) -> float:
        return 0.0 if np.isinf(self.T1) else 1.0 / self.T1

    @property
    def gamma_c(self) -> float:
        return 0.0 if np.isinf(self.Qc) else self.omega_c / self.Qc

    @classmethod
    def from_physical(cls, g_angular: float, T1: float = np.inf, Tphi: float = np.inf,
                      Qc: float = np.inf, omega_c: float = 2 * np.pi * 5e9) -> "StirapDecay":
        """Convert laboratory lifetimes (s) and angular frequencies (rad/s) to units of ``g``."""
        return cls(T1 * g_angular, Tphi * g_angular, Qc, omega_c / g_angular)


@dataclass(frozen=True, eq=False)
class StirapSpec:
    controls: ControlSet
    n_sidebands: int = 1
    fsr: float = 3.0
    coupling: float = 1.0
    decay: StirapDecay = field(default_factory=StirapDecay)
    epsilon: float = 1.0

    def __post_init__(self):
        if self.n_sidebands < 0:
            raise ValueError("n_sidebands must be non-negative")
        if not self.fsr > 0:
            raise ValueError("free spectral range must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.n_sidebands, self.n_sidebands + 1)

    @property
    def dim(self) -> int:
        """Dimension including the absorbing vacuum level."""
        return 2 + self.modes.size + 1

    @property
    def vacuum(self) -> int:
        return self.dim - 1

    def photon_index(self, n: int) -> int:
        return 2 + n + self.n_sidebands


def _stirap_operators(spec: StirapSpec):
    d = spec.dim
    drift = np.zeros((d, d), dtype=complex)
    h_ac = np.zeros((d, d), dtype=complex)
    h_bc = np.zeros((d, d), dtype=complex)
    for n in spec.modes:
        k = spec.photon_index(n)
        drift[k, k] = n * spec.fsr
        h_ac[0, k] = h_ac[k, 0] = 1.0
        h_bc[1, k] = h_bc[k, 1] = (-1.0) ** n
    return drift, h_ac, h_bc


def stirap_hamiltonian_at(spec: StirapSpec, t: float, include_vacuum: bool = False) -> np.ndarray:
    drift, h_ac, h_bc = _stirap_operators(spec)
    e = spec.epsilon
    H = drift + e * spec.controls["g_ac"](t) * h_ac + e * spec.controls["g_bc"](t) * h_bc
    return H if include_vacuum else H[:-1, :-1]


def stirap_jumps(spec: StirapSpec) -> list[np.ndarray]:
    """Relaxation into vacuum, qubit dephasing and photon loss."""
    d, v = spec.dim, spec.vacuum
    dec = spec.decay
    jumps = []
    if dec.gamma1 > 0:
        for q in (0, 1):
            L = np.zeros((d, d), dtype=complex)
            L[v, q] = np.sqrt(dec.gamma1)
            jumps.append(L)
    if not np.isinf(dec.Tphi):
        for q in (0, 1):
            # sigma_z of qubit q: -1 where it is excited, +1 elsewhere
            z = np.ones(d)
            z[q] = -1.0
            jumps.append(np.sqrt(1.0 / (2 * dec.Tphi)) * np.diag(z).astype(complex))
    if dec.gamma_c > 0:
        for n in spec.modes:
            L = np.zeros((d, d), dtype=complex)
            L[v, spec.photon_index(n)] = np.sqrt(dec.gamma_c)
            jumps.append(L)
    return jumps


def stirap_model(spec: StirapSpec) -> LindbladModel:
    drift, h_ac, h_bc = _stirap_operators(spec)
    g_ac, g_bc = spec.controls["g_ac"], spec.controls["g_bc"]
    e = spec.epsilon
    return LindbladModel(drift, [(h_ac, lambda t: e * g_ac(t)), (h_bc, lambda t: e * g_bc(t))],
                         stirap_jumps(spec))


def satd_controls(tf: float, coupling: float = 1.0, profile: str = "sin2") -> ControlSet:
    params = {"profile": profile, "g": coupling}
    return ControlSet((ControlPulse(tf, "satd_ac", params), ControlPulse(tf, "satd_bc", params)),
                      ("g_ac", "g_bc"))


def adiabatic_controls(tf: float, coupling: float = 1.0, profile: str = "sin2") -> ControlSet:
    """Uncorrected ``(g sin theta, g cos theta)`` pair."""
    params = {"profile": profile, "g": coupling}
    return ControlSet((ControlPulse(tf, "adiabatic_ac", params),
                       ControlPulse(tf, "adiabatic_bc", params)), ("g_ac", "g_bc"))


def quasi_dark_vectors(g_ac, g_bc, spec: StirapSpec) -> np.ndarray:
    """Normalized quasi-dark states for field values ``g_ac``, ``g_bc``.

    ``theta = atan2(g_ac, g_bc)`` and ``g = sqrt(g_ac^2 + g_bc^2)``; the
    nearest sidebands carry the first-order admixture
    ``-g sin(2 theta) / (n fsr)``.  Returned shape is ``(len, dim)``,
    zero on the vacuum level.
    """
    g_ac = np.atleast_1d(np.asarray(g_ac, dtype=float))
    g_bc = np.atleast_1d(np.asarray(g_bc, dtype=float))
    theta = np.arctan2(g_ac, g_bc)
    g = np.hypot(g_ac, g_bc)
    out = np.zeros((g_ac.size, spec.dim), dtype=complex)
    out[:, 0] = np.cos(theta)
    out[:, 1] = -np.sin(theta)
    if spec.n_sidebands >= 1:
        amp = g * np.sin(2 * theta) / spec.fsr
        out[:, spec.photon_index(-1)] = amp
        out[:, spec.photon_index(1)] = -amp
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def quasi_dark_state(spec: StirapSpec, t: float) -> np.ndarray:
    if spec.fsr == 0:
        raise ValueError("free spectral range must be nonzero")
    e = spec.epsilon
    return quasi_dark_vectors(e * spec.controls["g_ac"](t), e * spec.controls["g_bc"](t), spec)[0]


@dataclass(eq=False)
class StirapProblem(ControlProblem):
    """Transfer ``|1_a 0_b> -> |0_a 1_b>``; the adiabatic reference follows
    the quasi-dark state of the applied fields."""

    grid: TimeGrid
    n_sidebands: int = 1
    fsr: float = 3.0
    coupling: float = 1.0
    decay: StirapDecay = field(default_factory=StirapDecay)
    epsilon: float = 1.0
    backend: str = "lindblad"
    n_traj: int = 500
    seed: int = 0

    def spec(self, controls: ControlSet, perturbation: Mapping | None = None) -> StirapSpec:
        p = dict(perturbation or {})
        decay = self.decay
        if any(k in p for k in ("T1", "Tphi", "Qc")):
            decay = StirapDecay(p.get("T1", decay.T1), p.get("Tphi", decay.Tphi),
                                p.get("Qc", decay.Qc), decay.omega_c)
        return StirapSpec(controls, self.n_sidebands, self.fsr, self.coupling, decay,
                          p.get("epsilon", self.epsilon))

    def model(self, controls: ControlSet, perturbation: Mapping | None = None) -> LindbladModel:
        return stirap_model(self.spec(controls, perturbation))

    @property
    def dim(self) -> int:
        return 2 + 2 * self.n_sidebands + 1 + 1

    def initial_state(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def target_state(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[1] = 1.0
        return v

    def reference_trajectory(self, model: LindbladModel, controls: ControlSet) -> Trajectory:
        spec = self.spec(controls)
        t = self.grid.edges
        states = quasi_dark_vectors(spec.epsilon * controls["g_ac"](t),
                                    spec.epsilon * controls["g_bc"](t), spec)
        return Trajectory(self.grid, states)
