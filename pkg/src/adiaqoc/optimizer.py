"""Covariance matrix adaptation evolution strategy (CMA-ES).

A compact numpy implementation of the standard (mu/mu_w, lambda) CMA-ES
with cumulative step-size adaptation and rank-one plus rank-mu covariance
updates.  The search runs in coordinates normalized to the unit box, so a
single scalar step size serves parameters of very different scales.

Candidates falling outside the box are evaluated at their projection onto
the box and ranked with an added quadratic penalty on the projection
distance.  The sampling stream depends only on ``seed``; the objective may
be mapped over a generation in any order (or concurrently) without
changing the run.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], Any]
MapFn = Callable[[Callable, Iterable], Iterable]


@dataclass(frozen=True, eq=False)
class SearchSpace:
    """Box-constrained search domain.

    ``initial_sigma`` is measured in units of the box width of each
    coordinate.
    """

    lower: np.ndarray
    upper: np.ndarray
    initial_mean: np.ndarray | None = None
    initial_sigma: float = 0.3

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape:
            raise ValueError("bounds must have equal shapes")
        if np.any(lower >= upper):
            raise ValueError("lower bounds must be strictly below upper bounds")
        mean = 0.5 * (lower + upper) if self.initial_mean is None else \
            np.atleast_1d(np.asarray(self.initial_mean, dtype=float))
        if mean.shape != lower.shape or np.any(mean < lower) or np.any(mean > upper):
            raise ValueError("initial mean must lie inside the bounds")
        if not self.initial_sigma > 0:
            raise ValueError("initial sigma must be positive")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "initial_mean", mean)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def to_unit(self, x):
        return (np.asarray(x) - self.lower) / self.width

    def from_unit(self, y):
        return self.lower + np.asarray(y) * self.width


@dataclass
class OptimizationRun:
    best_params: np.ndarray
    best_cost: float
    history: list[dict] = field(default_factory=list)
    budget: int = 0
    seed: int = 0
    n_evaluations: int = 0
    n_flagged: int = 0
    population_size: int = 0
    stop_reason: str = "budget"
    best_components: dict = field(default_factory=dict)
    n_propagations: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([row.get(name, np.nan) for row in self.history], dtype=float)

    def to_csv(self, path, extra: Sequence[str] = ()) -> None:
        """Convergence log: one row per generation."""
        names = ["iteration", "meanCost", "bestCost", "fidelityTerm", "areaPenalty", *extra]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for row in self.history:
                writer.writerow([row["iteration"]] + [f"{row.get(n, float('nan')):.12g}"
                                                      for n in names[1:]])


def default_population_size(dim: int) -> int:
    return 4 + int(3 * math.log(max(dim, 1)))


def _split(value) -> tuple[float, dict]:
    if hasattr(value, "total"):
        return float(value.total), dict(getattr(value, "components", {}))
    return float(value), {}


class CMAES:
    """Ask/tell CMA-ES state in unit-box coordinates."""

    def __init__(self, space: SearchSpace, population_size: int | None = None,
                 seed: int = 0, boundary_penalty: float = 1.0):
        n = space.dim
        self.space = space
        self.n = n
        self.lam = population_size or default_population_size(n)
        if self.lam < 2:
            raise ValueError("population size must be at least 2")
        self.mu = self.lam // 2
        w = math.log(self.mu + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights**2)
        mueff = self.mueff
        self.cs = (mueff + 2) / (n + mueff + 5)
        self.ds = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + self.cs
        self.cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        self.c1 = 2 / ((n + 1.3) ** 2 + mueff)
        self.cmu = min(1 - self.c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
        self.chin = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))
        self.boundary_penalty = boundary_penalty

        self.rng = np.random.default_rng(seed)
        self.mean = space.to_unit(space.initial_mean)
        self.sigma = float(space.initial_sigma)
        self.C = np.eye(n)
        self.B = np.eye(n)
        self.D = np.ones(n)
        self.ps = np.zeros(n)
        self.pc = np.zeros(n)
        self.generation = 0

    def ask(self) -> np.ndarray:
        """Sample one generation in unit coordinates, shape (lambda, n)."""
        z = self.rng.standard_normal((self.lam, self.n))
        return self.mean + self.sigma * (z * self.D) @ self.B.T

    def project(self, y: np.ndarray) -> np.ndarray:
        return np.clip(y, 0.0, 1.0)

    def penalized(self, y: np.ndarray, costs: np.ndarray) -> np.ndarray:
        dist2 = np.sum((y - self.project(y)) ** 2, axis=-1)
        return costs + self.boundary_penalty * dist2

    def tell(self, y: np.ndarray, fitness: np.ndarray) -> None:
        n = self.n
        order = np.argsort(fitness, kind="stable")[: self.mu]
        old = self.mean
        ysel = (y[order] - old) / self.sigma
        yw = self.weights @ ysel
        self.mean = old + self.sigma * yw

        inv_sqrt = (self.B / self.D) @ self.B.T
        self.ps = (1 - self.cs) * self.ps + math.sqrt(self.cs * (2 - self.cs) * self.mueff) * (inv_sqrt @ yw)
        self.generation += 1
        norm_ps = np.linalg.norm(self.ps)
        hsig = norm_ps / math.sqrt(1 - (1 - self.cs) ** (2 * self.generation)) \
            < (1.4 + 2 / (n + 1)) * self.chin
        self.pc = (1 - self.cc) * self.pc + hsig * math.sqrt(self.cc * (2 - self.cc) * self.mueff) * yw

        rank_one = np.outer(self.pc, self.pc) + (1 - hsig) * self.cc * (2 - self.cc) * self.C
        rank_mu = (ysel.T * self.weights) @ ysel
        self.C = (1 - self.c1 - self.cmu) * self.C + self.c1 * rank_one + self.cmu * rank_mu
        self.C = 0.5 * (self.C + self.C.T)
        self.sigma *= math.exp(min(1.0, (self.cs / self.ds) * (norm_ps / self.chin - 1)))

        evals, self.B = np.linalg.eigh(self.C)
        self.D = np.sqrt(np.clip(evals, 1e-300, None))

    @property
    def spread(self) -> float:
        return self.sigma * float(self.D.max())


def cmaes_minimize(objective: Objective, space: SearchSpace, budget: int,
                   population_size: int | None = None, seed: int = 0,
                   map_fn: MapFn | None = None, boundary_penalty: float = 1.0,
                   tol_spread: float = 0.0, callback: Callable | None = None) -> OptimizationRun:
    """Minimize ``objective`` over the box for ``budget`` generations.

    The objective returns either a float or an object with ``total`` and
    ``components`` attributes; components of the best sample of each
    generation are logged.  Non-finite values receive the worst finite
    cost of their generation and are counted in ``n_flagged``.
    """
    if budget < 1:
        raise ValueError("budget must be at least one generation")
    es = CMAES(space, population_size, seed, boundary_penalty)
    mapper = map_fn or map
    best_x = space.initial_mean.copy()
    best_f = math.inf
    best_components: dict = {}
    run = OptimizationRun(best_x, best_f, budget=budget, seed=seed, population_size=es.lam)

    for it in range(budget):
        y = es.ask()
        x = space.from_unit(es.project(y))
        results = [_split(v) for v in mapper(objective, list(x))]
        raw = np.array([r[0] for r in results])
        finite = np.isfinite(raw)
        if not finite.all():
            run.n_flagged += int((~finite).sum())
            log.warning("generation %d: %d non-finite objective values", it, (~finite).sum())
            worst = raw[finite].max() if finite.any() else math.inf
            raw = np.where(finite, raw, worst)
        run.n_evaluations += len(raw)
        fitness = es.penalized(y, raw)

        k = int(np.argmin(np.where(finite, raw, math.inf))) if finite.any() else 0
        if finite[k] and raw[k] < best_f:
            best_f = float(raw[k])
            best_x = x[k].copy()
            best_components = results[k][1]
        gen_components = results[k][1]
        row = {"iteration": it, "meanCost": float(np.mean(raw[finite])) if finite.any() else math.inf,
               "generationBest": float(raw[k]), "bestCost": best_f, "sigma": es.sigma}
        row.update(gen_components)
        run.history.append(row)
        if callback is not None:
            callback(row)

        es.tell(y, fitness)
        if tol_spread and es.spread < tol_spread:
            run.stop_reason = "tol_spread"
            break

    run.best_params = best_x
    run.best_cost = best_f
    run.best_components = best_components
    return run


# ---------------------------------------------------------------------------
# pulse optimization


@dataclass(frozen=True)
class BasisConfig:
    """Correction basis attached to one labelled control.

    ``weight_bound`` bounds every weight to ``[-weight_bound, weight_bound]``.
    Gaussian centres are boxed to ``[0, tf]`` and widths to
    ``[tf/100, tf]``.
    """

    label: str
    basis: str
    order: int
    weight_bound: float = 1.0
    sine_offset: float = 0.0


class PulseParameterization:
    """Maps a flat parameter vector onto the corrections of a ControlSet.

    ``normalize`` optionally maps labels to a target pulse area enforced
    after every decode.
    """

    def __init__(self, reference, bases: Sequence[BasisConfig], grid,
                 normalize: dict | None = None):
        from .pulses import ControlSet

        self.reference: ControlSet = reference
        self.bases = tuple(bases)
        self.grid = grid
        self.normalize = dict(normalize or {})
        for b in self.bases:
            reference[b.label]  # raises KeyError for unknown labels
            if b.order < 0:
                raise ValueError("basis order must be non-negative")
        lower, upper, mean = [], [], []
        tf = grid.tf
        for b in self.bases:
            if b.basis == "gaussian":
                for m in range(b.order):
                    lower += [-b.weight_bound, 0.0, tf / 100]
                    upper += [b.weight_bound, tf, tf]
                    mean += [0.0, (m + 0.5) * tf / b.order, tf / (2 * b.order)]
            else:
                lower += [-b.weight_bound] * b.order
                upper += [b.weight_bound] * b.order
                mean += [0.0] * b.order
        self.lower = np.array(lower)
        self.upper = np.array(upper)
        self.initial_mean = np.array(mean)

    @property
    def dim(self) -> int:
        return self.lower.size

    def space(self, initial_sigma: float = 0.3) -> SearchSpace:
        return SearchSpace(self.lower, self.upper, self.initial_mean, initial_sigma)

    def decode(self, params):
        from .pulses import normalize_area

        params = np.clip(np.asarray(params, dtype=float), self.lower, self.upper)
        if params.size != self.dim:
            raise ValueError(f"expected {self.dim} parameters, got {params.size}")
        updates = {}
        pos = 0
        for b in self.bases:
            k = 3 * b.order if b.basis == "gaussian" else b.order
            chunk = params[pos:pos + k]
            pos += k
            base = self.reference[b.label]
            updates[b.label] = replace_pulse(base, b.basis, chunk, b.sine_offset)
        controls = self.reference.replace(**updates) if updates else self.reference
        if self.normalize:
            controls = controls.replace(**{lab: normalize_area(controls[lab], self.grid, area)
                                           for lab, area in self.normalize.items()})
        return controls


def replace_pulse(pulse, basis: str, coefficients, sine_offset: float = 0.0):
    from dataclasses import replace as dc_replace

    # the correction is scaled together with the reference, so undo the
    # reference scale to keep the weights in absolute units
    coeffs = np.array(coefficients, dtype=float)
    if basis == "gaussian":
        coeffs = coeffs.reshape(-1, 3)
        coeffs[:, 0] /= pulse.scale
    else:
        coeffs = coeffs / pulse.scale
    return dc_replace(pulse, basis=basis, coefficients=coeffs, sine_offset=sine_offset)


def optimize_pulse(problem, cost_spec, parameterization: PulseParameterization,
                   budget: int, seed: int = 0, population_size: int | None = None,
                   map_fn: MapFn | None = None, budget_unit: str = "generations",
                   initial_sigma: float = 0.3, callback: Callable | None = None):
    """Run CMA-ES over the basis corrections; returns ``(controls, run)``.

    ``budget_unit="evaluations"`` converts the budget into generations of
    the chosen population size.
    """
    from .cost import CostFunction, EnsembleMemberError

    cost = CostFunction(problem, cost_spec)
    if parameterization.dim == 0:
        controls = parameterization.decode(np.zeros(0))
        value = cost(controls)
        run = OptimizationRun(np.zeros(0), value.total, budget=0, seed=seed,
                              n_evaluations=1, best_components=value.components)
        return controls, run

    def objective(x):
        try:
            return cost(parameterization.decode(x))
        except (ArithmeticError, np.linalg.LinAlgError, ValueError, EnsembleMemberError) as exc:
            log.warning("evaluation failed: %s", exc)
            return math.nan

    lam = population_size or default_population_size(parameterization.dim)
    if budget_unit == "evaluations":
        generations = max(1, math.ceil(budget / lam))
    elif budget_unit == "generations":
        generations = budget
    else:
        raise ValueError(f"unknown budget unit {budget_unit!r}")
    run = cmaes_minimize(objective, parameterization.space(initial_sigma), generations,
                         population_size=lam, seed=seed, map_fn=map_fn, callback=callback)
    run.n_propagations = cost.n_propagations
    return parameterization.decode(run.best_params), run
