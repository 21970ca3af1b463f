"""RAP studies: pulse optimization, robustness maps, digitized runs and the
adiabatic-versus-ensemble benchmark."""
from __future__ import annotations

import logging
import time
from contextlib import nullcontext

import numpy as np

from ..cost import CostSpec, EnsembleSpec, composite_cost
from ..dynamics import ground_fidelity
from ..models.rap import RapProblem, RapSpec, default_tau, reference_polynomial_rap
from ..optimizer import BasisConfig, PulseParameterization, optimize_pulse
from ..pulses import ControlSet, TimeGrid, load_pulses, power_integral, pulse_area, save_pulses
from ..trotter import digitize, robustness_scan
from .bundle import ResultBundle
from .config import ExperimentConfig, linspace_spec, parse_number

log = logging.getLogger(__name__)

PULSES = ("reference", "traditional", "adiabatic")


class RapSetup:
    """Grid, reference pulses, problem and cost definitions of one config."""

    def __init__(self, params: dict):
        self.params = params
        self.area = parse_number(params["area"])
        tau = default_tau(self.area)
        self.grid = TimeGrid(2 * tau, int(params["n_steps"]))
        self.reference = reference_polynomial_rap(tau, self.grid, self.area,
                                                  float(params["delta_scale"]))
        self.c0 = power_integral(self.reference, self.grid)
        self.problem = RapProblem(self.grid)
        b = params["basis"]
        self.parameterization = PulseParameterization(
            self.reference,
            [BasisConfig("Omega", b["name"], int(b["order"]), float(b["weight_bound"])),
             BasisConfig("Delta", b["name"], int(b["order"]), float(b["weight_bound"]))],
            self.grid, normalize={"Omega": self.area})

    def cost_spec(self, kind: str) -> CostSpec:
        c = self.params["cost"]
        common = {"eta": float(c["eta"]), "c0": self.c0, "power_mode": c["power_mode"]}
        if kind == "traditional":
            return CostSpec(terminal=1.0, **common)
        if kind == "adiabatic":
            w = float(c["adiabatic_weight"])
            return CostSpec(terminal=1.0 - w, adiabatic=w, **common)
        if kind == "ensemble":
            e = self.params["ensemble"]
            ens = EnsembleSpec.product(epsilon=linspace_spec(e["epsilon"]),
                                       delta_dopp=linspace_spec(e["doppler"]))
            return CostSpec(terminal=0.0, ensemble=1.0, ensemble_spec=ens, **common)
        raise ValueError(f"unknown cost kind {kind!r}")

    def optimize(self, kind: str, seed: int, map_fn=None):
        o = self.params["optimizer"]
        return optimize_pulse(self.problem, self.cost_spec(kind), self.parameterization,
                              int(o["budget"]), seed=seed, population_size=o["population_size"],
                              map_fn=map_fn, budget_unit=o["budget_unit"],
                              initial_sigma=float(o["initial_sigma"]))

    def scan_axes(self):
        s = self.params["scan"]
        return linspace_spec(s["epsilon"]), linspace_spec(s["doppler"])


def _convergence(bundle: ResultBundle, name: str, run) -> None:
    rows = [[r["iteration"], r["meanCost"], r["bestCost"], r.get("fidelityTerm", np.nan),
             r.get("areaPenalty", np.nan), r.get("terminal", np.nan), r.get("adiabatic", np.nan),
             r.get("ensemble", np.nan), r["sigma"]] for r in run.history]
    bundle.write_rows(name, ["iteration", "meanCost", "bestCost", "fidelityTerm", "areaPenalty",
                             "terminal", "adiabatic", "ensemble", "sigma"], rows)


def optimized_pulses(setup: RapSetup, config: ExperimentConfig, bundle: ResultBundle | None,
                     map_fn=None) -> dict[str, ControlSet]:
    """Reference plus optimized pulses; loaded from ``rap.pulses`` files when given."""
    files = setup.params.get("pulses")
    out = {"reference": setup.reference}
    for kind in ("traditional", "adiabatic"):
        if files and kind in files:
            out[kind], _ = load_pulses(files[kind])
            continue
        with bundle.timed(f"optimize_{kind}") if bundle else nullcontext():
            controls, run = setup.optimize(kind, config.seed, map_fn)
        out[kind] = controls
        if bundle is not None:
            _convergence(bundle, f"convergence_{kind}.csv", run)
            bundle.summary.setdefault("optimization", {})[kind] = {
                "best_cost": run.best_cost, "n_evaluations": run.n_evaluations,
                "n_flagged": run.n_flagged, "population_size": run.population_size,
                "generations": len(run.history), "components": run.best_components}
    if bundle is not None:
        for kind, controls in out.items():
            save_pulses(controls, bundle.register(f"pulses_{kind}.json"), setup.grid)
    return out


def pulse_metrics(setup: RapSetup, controls: ControlSet) -> dict:
    spec = CostSpec(terminal=0.5, adiabatic=0.5, eta=0.0)
    c = composite_cost(setup.problem, controls, spec).components
    return {"terminal_infidelity": c["terminal"], "adiabatic_infidelity": c["adiabatic"],
            "omega_area": pulse_area(controls["Omega"], setup.grid),
            "power": power_integral(controls, setup.grid)}


def run_rap_study(config: ExperimentConfig, out_dir, map_fn=None) -> ResultBundle:
    setup = RapSetup(config.section("rap"))
    bundle = ResultBundle(out_dir, config.to_dict())
    pulses = optimized_pulses(setup, config, bundle, map_fn)
    grid = setup.grid
    t_mid, t_edge = grid.points, grid.edges
    shapes = {"t": t_mid}
    for kind, controls in pulses.items():
        shapes[f"Omega_{kind}"] = controls["Omega"](t_mid)
        shapes[f"Delta_{kind}"] = controls["Delta"](t_mid)
    bundle.write_table("pulse_shapes.csv", shapes)
    dyn = {"t": t_edge}
    metrics = {}
    for kind, controls in pulses.items():
        model = setup.problem.model(controls)
        traj = setup.problem.run(controls)
        ground = setup.problem.reference_trajectory(model, controls)
        psi = traj.states
        dyn[f"P1_{kind}"] = np.abs(psi[:, 1]) ** 2
        overlap = np.conj(psi[:, 0]) * psi[:, 1]
        dyn[f"x_{kind}"] = 2 * overlap.real
        dyn[f"y_{kind}"] = 2 * overlap.imag
        dyn[f"z_{kind}"] = np.abs(psi[:, 0]) ** 2 - np.abs(psi[:, 1]) ** 2
        dyn[f"groundFidelity_{kind}"] = ground_fidelity(traj, ground)
        metrics[kind] = pulse_metrics(setup, controls)
    bundle.write_table("dynamics.csv", dyn)
    bundle.summary["pulses"] = metrics
    bundle.finalize()
    return bundle


def run_rap_scan(config: ExperimentConfig, out_dir, map_fn=None) -> ResultBundle:
    setup = RapSetup(config.section("rap"))
    bundle = ResultBundle(out_dir, config.to_dict())
    pulses = optimized_pulses(setup, config, bundle, map_fn)
    eps, dopp = setup.scan_axes()
    s = setup.params["scan"]
    thresholds = {"adiabatic": float(s["plateau_threshold_adiabatic"]),
                  "traditional": float(s["plateau_threshold_traditional"])}
    plateaus = {}
    for kind, controls in pulses.items():
        with bundle.timed(f"scan_{kind}"):
            scan = robustness_scan(controls, setup.grid, eps, dopp, map_fn=map_fn)
        scan.to_csv(bundle.register(f"scan_{kind}.csv"))
        plateaus[kind] = {}
        for label, thr in sorted(thresholds.items()):
            p = scan.plateau(thr)
            plateaus[kind][f"threshold_{thr:g}"] = p._asdict()
        plateaus[kind]["nominal_infidelity"] = float(
            scan.infidelity[int(np.argmin(np.abs(scan.dopplers))),
                            int(np.argmin(np.abs(scan.epsilons - 1.0)))])
    bundle.summary["plateaus"] = plateaus
    bundle.summary["pulses"] = {k: pulse_metrics(setup, c) for k, c in pulses.items()}
    bundle.finalize()
    return bundle


def trotter_convergence(controls: ControlSet, tf: float, n_steps, reference_steps: int):
    """Distance between digitized and finely resolved exact final states,
    minimized over a global phase."""
    exact = RapProblem(TimeGrid(tf, reference_steps)).run(controls).final
    errors = []
    for n in n_steps:
        psi = digitize(RapSpec(tf, controls), TimeGrid(tf, int(n))).final_state()
        errors.append(float(np.sqrt(max(2.0 - 2.0 * abs(np.vdot(exact, psi)), 0.0))))
    slope = float(np.polyfit(np.log(np.asarray(n_steps, float)), np.log(errors), 1)[0])
    return np.asarray(errors), -slope


def run_rap_trotter_scan(config: ExperimentConfig, out_dir, map_fn=None) -> ResultBundle:
    setup = RapSetup(config.section("rap"))
    bundle = ResultBundle(out_dir, config.to_dict())
    pulses = optimized_pulses(setup, config, bundle, map_fn)
    tr = setup.params["trotter"]
    steps = [int(n) for n in tr["n_steps"]]
    conv = {"n_steps": steps, "dt": [setup.grid.tf / n for n in steps]}
    orders = {}
    for kind, controls in pulses.items():
        errors, order = trotter_convergence(controls, setup.grid.tf, steps, int(tr["reference_steps"]))
        conv[f"error_{kind}"] = errors
        orders[kind] = order
    bundle.write_table("trotter_convergence.csv", conv)
    eps, dopp = setup.scan_axes()
    scan_grid = TimeGrid(setup.grid.tf, int(tr["scan_steps"]))
    for index, (kind, controls) in enumerate(pulses.items()):
        with bundle.timed(f"shot_scan_{kind}"):
            scan = robustness_scan(controls, scan_grid, eps, dopp, shots=int(tr["shots"]),
                                   seed=config.seed + index, depolarizing=float(tr["depolarizing"]),
                                   map_fn=map_fn)
        scan.to_csv(bundle.register(f"trotter_scan_{kind}.csv"))
    bundle.summary["trotter_order"] = orders
    bundle.summary["shots"] = int(tr["shots"])
    bundle.finalize()
    return bundle


def run_benchmark(config: ExperimentConfig, out_dir, map_fn=None) -> ResultBundle:
    """Equal-budget CMA-ES runs with the adiabatic and the ensemble cost."""
    setup = RapSetup(config.section("rap"))
    bundle = ResultBundle(out_dir, config.to_dict())
    results = {}
    wall = {}
    pulses = {}
    for kind in ("adiabatic", "ensemble"):
        start = time.perf_counter()
        controls, run = setup.optimize(kind, config.seed, map_fn)
        wall[kind] = time.perf_counter() - start
        bundle.timings[f"optimize_{kind}"] = wall[kind]
        pulses[kind] = controls
        _convergence(bundle, f"convergence_{kind}.csv", run)
        generations = len(run.history)
        results[kind] = {"generations": generations, "n_evaluations": run.n_evaluations,
                         "propagations": run.n_propagations,
                         "propagations_per_generation": run.n_propagations / generations,
                         "propagations_per_evaluation": run.n_propagations / run.n_evaluations,
                         "best_cost": run.best_cost}
        save_pulses(controls, bundle.register(f"pulses_{kind}.json"), setup.grid)
    eps, dopp = setup.scan_axes()
    for kind, controls in pulses.items():
        scan = robustness_scan(controls, setup.grid, eps, dopp, map_fn=map_fn)
        scan.to_csv(bundle.register(f"scan_{kind}.csv"))
        results[kind]["plateau_1e-3"] = scan.plateau(1e-3)._asdict()
    results["propagation_ratio"] = (results["ensemble"]["propagations_per_generation"]
                                    / results["adiabatic"]["propagations_per_generation"])
    bundle.summary["benchmark"] = results
    # wall-times are hardware dependent and live with the timings only
    bundle.timings["speedup"] = wall["ensemble"] / wall["adiabatic"]
    bundle.finalize()
    return bundle
