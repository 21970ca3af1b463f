"""Rydberg-atom annealer for the maximum independent set of a graph.

``H = sum_i [Omega sigma_x^i - Delta sigma_z^i] + V_r sum_(i,j in E) n_i n_j``
with ``|g> = |0>`` (``sigma_z = +1``) and ``n = |r><r| = |1><1|``.  A basis
state is a bitmask whose bit ``i`` marks node ``i`` as excited; the full
space is ``range(2**N)`` in ascending order.

Three levels of reduction are available:

* ``full``: all ``2**N`` states with finite ``V_r``
* ``blockade``: independent sets only (the ``V_r -> inf`` limit)
* ``symmetric``: for rings, the dihedral-invariant sector of the blockade
  space, spanned by normalized orbit sums.  The Hamiltonian, the all-ground
  initial state and the symmetric MIS target all live in it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from ..dynamics import LindbladModel, Trajectory
from ..pulses import ControlPulse, ControlSet, TimeGrid
from ..quantum import ValidationError
from .base import ControlProblem
from .rap import POLY_DELTA

REDUCTIONS = ("full", "blockade", "symmetric")


@dataclass(frozen=True)
class Graph:
    n_nodes: int
    edges: tuple

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("a graph needs at least one node")
        edges = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j or not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"invalid edge ({i}, {j})")
            edges.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(edges)))

    @classmethod
    def ring(cls, n: int) -> "Graph":
        if n < 2:
            raise ValueError("a ring needs at least two nodes")
        return cls(n, tuple((i, (i + 1) % n) for i in range(n)))

    @classmethod
    def from_edge_list(cls, path, n_nodes: int | None = None) -> "Graph":
        """Read ``i j`` pairs, one per line; ``#`` starts a comment."""
        edges = []
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if line:
                    i, j = line.split()[:2]
                    edges.append((int(i), int(j)))
        if n_nodes is None:
            n_nodes = 1 + max(max(e) for e in edges) if edges else 1
        return cls(n_nodes, tuple(edges))

    @property
    def is_ring(self) -> bool:
        return self.n_nodes >= 2 and self == Graph.ring(self.n_nodes)


def _bit_pairs(masks: np.ndarray, edges) -> np.ndarray:
    """Number of edges with both ends excited, per mask."""
    count = np.zeros(masks.shape, dtype=np.int64)
    for i, j in edges:
        count += (masks >> i) & (masks >> j) & 1
    return count


def popcount(masks: np.ndarray) -> np.ndarray:
    masks = np.asarray(masks, dtype=np.int64)
    out = np.zeros(masks.shape, dtype=np.int64)
    m = masks.copy()
    while np.any(m):
        out += m & 1
        m >>= 1
    return out


@dataclass(frozen=True, eq=False)
class BlockadeSubspace:
    n_nodes: int
    states: np.ndarray

    @property
    def dim(self) -> int:
        return self.states.size

    @cached_property
    def index(self) -> dict:
        return {int(m): k for k, m in enumerate(self.states)}

    def projector(self) -> np.ndarray:
        """Rows of the identity on the full space selecting the subspace."""
        P = np.zeros((self.dim, 2**self.n_nodes))
        P[np.arange(self.dim), self.states] = 1.0
        return P


def build_blockade_subspace(graph: Graph) -> BlockadeSubspace:
    masks = np.arange(2**graph.n_nodes, dtype=np.int64)
    ok = _bit_pairs(masks, graph.edges) == 0
    return BlockadeSubspace(graph.n_nodes, masks[ok])


def mis_operators(graph: Graph, masks: np.ndarray):
    """``(X, Z, V)`` on the basis ``masks``: ``X = sum sigma_x`` restricted to
    the basis, diagonals of ``sum sigma_z`` and of ``sum n_i n_j``."""
    masks = np.asarray(masks, dtype=np.int64)
    d = masks.size
    lookup = {int(m): k for k, m in enumerate(masks)}
    X = np.zeros((d, d))
    for k, m in enumerate(masks):
        for i in range(graph.n_nodes):
            j = lookup.get(int(m) ^ (1 << i))
            if j is not None:
                X[j, k] = 1.0
    Z = (graph.n_nodes - 2 * popcount(masks)).astype(float)
    V = _bit_pairs(masks, graph.edges).astype(float)
    return X, Z, V


@dataclass(frozen=True, eq=False)
class MisSpec:
    graph: Graph
    controls: ControlSet
    v_r: float | None = None
    use_blockade_subspace: bool = True

    def __post_init__(self):
        if self.graph.n_nodes < 2:
            raise ValueError("MIS graphs need at least two nodes")

    def interaction(self, grid: TimeGrid | None = None) -> float:
        """``V_r``, defaulting to ten times the largest |Omega| on the grid."""
        if self.v_r is not None:
            return self.v_r
        omega = self.controls["Omega"]
        t = (grid or TimeGrid(omega.tf)).edges
        return 10.0 * float(np.max(np.abs(omega(t))))


def mis_hamiltonian_at(spec: MisSpec, t: float, subspace: BlockadeSubspace | None = None) -> np.ndarray:
    """Hamiltonian on the full space, or on ``subspace`` (where ``V_r`` drops out)."""
    omega = float(spec.controls["Omega"](t))
    delta = float(spec.controls["Delta"](t))
    if subspace is None:
        masks = np.arange(2**spec.graph.n_nodes, dtype=np.int64)
        X, Z, V = mis_operators(spec.graph, masks)
        return omega * X - delta * np.diag(Z) + spec.interaction() * np.diag(V)
    X, Z, _ = mis_operators(spec.graph, subspace.states)
    return omega * X - delta * np.diag(Z)


def ring_rotations(n: int, masks: np.ndarray) -> list[np.ndarray]:
    """Images of ``masks`` under all rotations and reflections of an n-ring."""
    masks = np.asarray(masks, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)) & 1
    images = []
    for shift in range(n):
        for reflect in (False, True):
            src = (np.arange(n) - shift) % n
            if reflect:
                src = (-src) % n
            images.append(bits[:, src] @ (1 << np.arange(n)))
    return images


def symmetric_sector(graph: Graph, subspace: BlockadeSubspace) -> tuple[np.ndarray, np.ndarray]:
    """Isometry ``S`` (subspace dim x orbits) onto normalized dihedral orbit
    sums, and the smallest mask of each orbit."""
    if not graph.is_ring:
        raise ValidationError("the symmetric sector is only implemented for rings")
    images = np.stack(ring_rotations(graph.n_nodes, subspace.states))
    rep = images.min(axis=0)
    reps, orbit = np.unique(rep, return_inverse=True)
    S = np.zeros((subspace.dim, reps.size))
    S[np.arange(subspace.dim), orbit] = 1.0
    S /= np.sqrt(S.sum(axis=0))
    return S, reps


def alternating_configurations(n: int) -> tuple[int, int]:
    even = sum(1 << i for i in range(0, n, 2))
    return even, even << 1


def mis_solution_state(graph: Graph, masks: np.ndarray, symmetric: bool = True) -> np.ndarray:
    """Equal superposition of the two alternating configurations of an even
    ring (or only the even-site one with ``symmetric=False``) on ``masks``."""
    if not graph.is_ring or graph.n_nodes % 2:
        raise ValidationError("the MIS target is only known for even rings; supply one")
    lookup = {int(m): k for k, m in enumerate(np.asarray(masks))}
    configs = alternating_configurations(graph.n_nodes)
    if not symmetric:
        configs = configs[:1]
    v = np.zeros(len(lookup), dtype=complex)
    for c in configs:
        v[lookup[c]] = 1.0
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# reference controls


def mis_reference_controls(tf: float, omega: str = "sin2", delta_max: float = 3.0) -> ControlSet:
    """Omega reference (``sin2`` with unit peak or ``constant`` at 1/2; both
    have area ``tf/2``) and a detuning swept from ``+delta_max`` to
    ``-delta_max`` along the RAP cubic."""
    if omega == "sin2":
        om = ControlPulse(tf, "sin2", {"amplitude": 1.0})
    elif omega == "constant":
        om = ControlPulse(tf, "constant", {"value": 0.5})
    else:
        raise ValueError(f"unknown Omega reference {omega!r}")
    edge = POLY_DELTA["a"] - POLY_DELTA["b"]
    scale = -delta_max / edge
    de = ControlPulse(tf, "rap_delta", {k: v * scale for k, v in POLY_DELTA.items()})
    return ControlSet((om, de), ("Omega", "Delta"))


# ---------------------------------------------------------------------------


class SplitPropagator:
    """Strang splitting for ``H = Omega X + Delta Z`` with diagonal ``Z``:
    ``exp(-i Delta Z dt/2) exp(-i Omega X dt) exp(-i Delta Z dt/2)`` with ``X``
    diagonalized once.  ``substeps`` refines every grid step."""

    def __init__(self, X: np.ndarray, Z: np.ndarray, substeps: int = 1):
        self.x, self.W = np.linalg.eigh(X)
        self.Z = np.asarray(Z, dtype=float)
        self.substeps = int(substeps)
        if self.substeps < 1:
            raise ValueError("substeps must be positive")

    def run(self, psi0: np.ndarray, omega: np.ndarray, delta: np.ndarray, dt: float) -> np.ndarray:
        """States at every step edge; ``omega``/``delta`` are sampled at the
        midpoints of the substeps, shape ``(n_steps, substeps)``."""
        omega = np.asarray(omega, dtype=float).reshape(-1, self.substeps)
        delta = np.asarray(delta, dtype=float).reshape(-1, self.substeps)
        h = dt / self.substeps
        W, Wt, x, Z = self.W, self.W.T, self.x, self.Z
        zphase = np.exp(0.5j * h * delta[..., None] * Z)      # exp(-i (-Delta Z) h/2)
        xphase = np.exp(-1j * h * omega[..., None] * x)
        out = np.empty((omega.shape[0] + 1, Z.size), dtype=complex)
        psi = np.asarray(psi0, dtype=complex)
        out[0] = psi
        for k in range(omega.shape[0]):
            for s in range(self.substeps):
                psi = zphase[k, s] * psi
                psi = W @ (xphase[k, s] * (Wt @ psi))
                psi = zphase[k, s] * psi
            out[k + 1] = psi
        return out


class GroundTable:
    """Ground states of ``Omega X - Delta Z`` tabulated on the angle
    ``phi = atan2(Omega, Delta)``; the state only depends on ``phi``.

    Lookups interpolate linearly between sign-aligned neighbours and
    renormalize.
    """

    def __init__(self, X: np.ndarray, Z: np.ndarray, size: int = 8001):
        self.phi = np.linspace(-np.pi, np.pi, size)
        H = np.sin(self.phi)[:, None, None] * X - np.cos(self.phi)[:, None, None] * np.diag(Z)
        values, vectors = np.linalg.eigh(H)
        g = vectors[:, :, 0]
        sign = np.sign(np.einsum("ni,ni->n", g[:-1], g[1:]))
        sign[sign == 0] = 1.0
        g = g * np.concatenate([[1.0], np.cumprod(sign)])[:, None]
        self.states = g
        self.gaps = values[:, 1] - values[:, 0]

    def lookup(self, omega, delta) -> np.ndarray:
        phi = np.arctan2(np.asarray(omega, dtype=float), np.asarray(delta, dtype=float))
        pos = (phi - self.phi[0]) / (self.phi[1] - self.phi[0])
        k = np.clip(np.floor(pos).astype(int), 0, self.phi.size - 2)
        w = (pos - k)[:, None]
        v = (1 - w) * self.states[k] + w * self.states[k + 1]
        return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass(eq=False)
class MisProblem(ControlProblem):
    """AQC on a graph, starting in the all-ground state.

    ``backend="split"`` uses :class:`SplitPropagator`; any other backend
    goes through the generic propagators.  With ``reduction="symmetric"``
    the adiabatic reference comes from a :class:`GroundTable`.
    """

    graph: Graph
    grid: TimeGrid
    reduction: str = "symmetric"
    v_r: float | None = None
    backend: str = "split"
    substeps: int = 1
    symmetric_target: bool = True
    table_size: int = 8001
    n_traj: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.reduction not in REDUCTIONS:
            raise ValueError(f"reduction must be one of {REDUCTIONS}")
        if self.reduction == "symmetric" and not self.symmetric_target:
            raise ValueError("a single MIS configuration is not dihedral invariant; "
                             "use the blockade reduction")
        g = self.graph
        if self.reduction == "full":
            self.masks = np.arange(2**g.n_nodes, dtype=np.int64)
            self.X, self.Z, self.V = mis_operators(g, self.masks)
            self.isometry = None
        else:
            sub = build_blockade_subspace(g)
            self.masks = sub.states
            X, Z, _ = mis_operators(g, sub.states)
            if self.reduction == "blockade":
                self.X, self.Z, self.isometry = X, Z, None
            else:
                S, _ = symmetric_sector(g, sub)
                self.X = S.T @ X @ S
                # every orbit shares one excitation number
                self.Z = (S.T * Z) @ S
                self.Z = np.diag(self.Z).copy()
                self.isometry = S
            self.V = np.zeros_like(self.Z)
        self._split = None
        self._table = None

    @property
    def dim(self) -> int:
        return self.Z.size

    def interaction(self, controls: ControlSet) -> float:
        if self.reduction != "full":
            return 0.0
        return MisSpec(self.graph, controls, self.v_r).interaction(self.grid)

    def model(self, controls: ControlSet, perturbation: Mapping | None = None) -> LindbladModel:
        p = perturbation or {}
        eps = p.get("epsilon", 1.0)
        omega, delta = controls["Omega"], controls["Delta"]
        drift = self.interaction(controls) * np.diag(self.V)
        return LindbladModel(drift, [(self.X, lambda t: eps * omega(t)),
                                     (-np.diag(self.Z), lambda t: delta(t))])

    def initial_state(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0  # mask 0 (all ground) comes first in every basis
        return v

    def target_state(self) -> np.ndarray:
        v = mis_solution_state(self.graph, self.masks, self.symmetric_target)
        if self.isometry is not None:
            v = self.isometry.T @ v
        return v

    def run(self, controls: ControlSet, perturbation: Mapping | None = None) -> Trajectory:
        if self.backend != "split":
            return super().run(controls, perturbation)
        if self.reduction == "full":
            raise ValidationError("the split propagator needs a blockade reduction")
        eps = (perturbation or {}).get("epsilon", 1.0)
        if self._split is None:
            self._split = SplitPropagator(self.X, self.Z, self.substeps)
        n, s = self.grid.n_steps, self.substeps
        t = self.grid.t0 + (np.arange(n * s) + 0.5) * (self.grid.dt / s)
        states = self._split.run(self.initial_state(), eps * controls["Omega"](t),
                                 controls["Delta"](t), self.grid.dt)
        return Trajectory(self.grid, states)

    def propagate(self, model: LindbladModel) -> Trajectory:
        if self.backend == "split":
            raise ValidationError("the split backend propagates controls; call run()")
        return super().propagate(model)

    def reference_trajectory(self, model: LindbladModel, controls: ControlSet) -> Trajectory:
        if self.reduction != "symmetric":
            return super().reference_trajectory(model, controls)
        if self._table is None:
            self._table = GroundTable(self.X, self.Z, self.table_size)
        t = self.grid.edges
        return Trajectory(self.grid, self._table.lookup(controls["Omega"](t), controls["Delta"](t)))
