"""Waveguide STIRAP studies: lifetime sweeps and amplitude robustness."""
from __future__ import annotations

import numpy as np

from ..cost import CostSpec
from ..models.stirap import StirapDecay, StirapProblem, satd_controls
from ..optimizer import BasisConfig, PulseParameterization, optimize_pulse
from ..pulses import ControlSet, TimeGrid, power_integral, save_pulses
from .bundle import ResultBundle
from .config import ExperimentConfig, linspace_spec
from .rap import _convergence

US = 1e-6


class StirapSetup:
    def __init__(self, params: dict):
        self.params = params
        self.g = 2 * np.pi * float(params["g_over_2pi_MHz"]) * 1e6
        self.omega_c = 2 * np.pi * float(params["omega_c_over_2pi_GHz"]) * 1e9
        tf = float(params["tf_times_g"])
        self.grid = TimeGrid(tf, int(params["n_steps"]))
        self.satd = satd_controls(tf, 1.0, params["theta_profile"])
        self.c0 = power_integral(self.satd, self.grid)
        b = params["basis"]
        self.parameterization = PulseParameterization(
            self.satd,
            [BasisConfig("g_ac", b["name"], int(b["order"]), float(b["weight_bound"])),
             BasisConfig("g_bc", b["name"], int(b["order"]), float(b["weight_bound"]))],
            self.grid)

    def decay(self, T1_us=np.inf, Tphi_us=np.inf, Qc=np.inf) -> StirapDecay:
        return StirapDecay.from_physical(self.g, T1_us * US, Tphi_us * US, Qc, self.omega_c)

    def problem(self, decay: StirapDecay) -> StirapProblem:
        return StirapProblem(self.grid, int(self.params["n_sidebands"]),
                             float(self.params["fsr_over_g"]), 1.0, decay)

    def model_time(self, lifetime_us: float) -> float:
        return lifetime_us * US * self.g

    def cost_spec(self, kind: str) -> CostSpec:
        c = self.params["cost"]
        common = {"eta": float(c["eta"]), "c0": self.c0, "power_mode": c["power_mode"]}
        if kind == "traditional":
            return CostSpec(terminal=1.0, **common)
        w = float(c["adiabatic_weight"])
        return CostSpec(terminal=1.0 - w, adiabatic=w, **common)

    def optimize(self, problem, kind: str, seed: int, budget: int | None = None, map_fn=None):
        o = self.params["optimizer"]
        return optimize_pulse(problem, self.cost_spec(kind), self.parameterization,
                              int(budget or o["budget"]), seed=seed,
                              population_size=o["population_size"], map_fn=map_fn,
                              budget_unit=o["budget_unit"], initial_sigma=float(o["initial_sigma"]))


def transfer_infidelity(problem: StirapProblem, controls: ControlSet, perturbation=None) -> float:
    rho = problem.run(controls, perturbation).final
    p = rho[1, 1].real if rho.ndim == 2 else abs(rho[1]) ** 2
    return 1.0 - float(np.sqrt(max(p, 0.0)))


def _optimize_set(setup, bundle, problem, tag, seed, kinds, budget=None, map_fn=None):
    out = {"satd": setup.satd}
    for kind in kinds:
        with bundle.timed(f"optimize_{kind}_{tag}"):
            controls, run = setup.optimize(problem, kind, seed, budget, map_fn)
        out[kind] = controls
        _convergence(bundle, f"convergence_{kind}_{tag}.csv", run)
        save_pulses(controls, bundle.register(f"pulses_{kind}_{tag}.json"), setup.grid)
        bundle.summary.setdefault("optimization", {})[f"{kind}_{tag}"] = {
            "best_cost": run.best_cost, "components": run.best_components,
            "n_evaluations": run.n_evaluations}
    return out


def _shapes(bundle, setup, pulses: dict, name: str):
    t = setup.grid.points
    cols = {"t": t}
    for kind, c in pulses.items():
        cols[f"g_ac_{kind}"] = c["g_ac"](t)
        cols[f"g_bc_{kind}"] = c["g_bc"](t)
    bundle.write_table(name, cols)


def run_stirap_lifetimes(config: ExperimentConfig, out_dir, map_fn=None) -> ResultBundle:
    """Optimize at the reference lifetime for every Q_c, then sweep T1
    (and T_phi when enabled) for SATD, adiabatic and traditional pulses."""
    setup = StirapSetup(config.section("stirap"))
    p = setup.params
    bundle = ResultBundle(out_dir, config.to_dict())
    sweep = linspace_spec(p["sweep_us"])
    comparisons = {}
    for qi, Qc in enumerate(p["Qc"]):
        Qc = float(Qc)
        tag = f"Q{Qc:.0e}".replace("+", "")
        problem = setup.problem(setup.decay(T1_us=float(p["optimize_T1_us"]), Qc=Qc))
        pulses = _optimize_set(setup, bundle, problem, f"T1_{tag}", config.seed + qi,
                               ("adiabatic", "traditional"), map_fn=map_fn)
        _shapes(bundle, setup, pulses, f"pulse_shapes_T1_{tag}.csv")
        cols = {"T1_us": sweep}
        for kind, controls in pulses.items():
            cols[kind] = [transfer_infidelity(problem, controls,
                                              {"T1": setup.model_time(T1), "Qc": Qc})
                          for T1 in sweep]
        bundle.write_table(f"infidelity_vs_T1_{tag}.csv", cols)
        comparisons[f"T1_{tag}"] = {
            "adiabatic_le_satd_everywhere": bool(np.all(np.array(cols["adiabatic"])
                                                        <= np.array(cols["satd"]))),
            "max_ratio_adiabatic_over_satd": float(np.max(np.array(cols["adiabatic"])
                                                          / np.array(cols["satd"])))}
        if p.get("dephasing", True):
            problem = setup.problem(setup.decay(Tphi_us=float(p["optimize_Tphi_us"]), Qc=Qc))
            budget = int(p["optimizer"]["dephasing_budget"])
            pulses = _optimize_set(setup, bundle, problem, f"Tphi_{tag}", config.seed + qi,
                                   ("adiabatic",), budget, map_fn)
            cols = {"Tphi_us": sweep}
            for kind, controls in pulses.items():
                cols[kind] = [transfer_infidelity(problem, controls,
                                                  {"Tphi": setup.model_time(T), "Qc": Qc})
                              for T in sweep]
            bundle.write_table(f"infidelity_vs_Tphi_{tag}.csv", cols)
            comparisons[f"Tphi_{tag}"] = {
                "adiabatic_le_satd_everywhere": bool(np.all(np.array(cols["adiabatic"])
                                                            <= np.array(cols["satd"])))}
    bundle.summary["comparisons"] = comparisons
    bundle.summary["units"] = {"g_angular_rad_per_s": setup.g, "omega_c_rad_per_s": setup.omega_c,
                               "time_unit_s": 1.0 / setup.g}
    bundle.finalize()
    return bundle


def run_stirap_amplitude(config: ExperimentConfig, out_dir, map_fn=None) -> ResultBundle:
    """Scale all couplings by ``epsilon`` for pulses optimized at the
    reference T1; evaluate with the amplitude-section lifetimes."""
    setup = StirapSetup(config.section("stirap"))
    p = setup.params
    a = p["amplitude"]
    bundle = ResultBundle(out_dir, config.to_dict())
    Qc = float(a["Qc"])
    problem = setup.problem(setup.decay(T1_us=float(p["optimize_T1_us"]), Qc=Qc))
    pulses = _optimize_set(setup, bundle, problem, "amplitude", config.seed,
                           ("adiabatic", "traditional"), map_fn=map_fn)
    _shapes(bundle, setup, pulses, "pulse_shapes.csv")
    evaluation = setup.problem(setup.decay(float(a["T1_us"]), float(a["Tphi_us"]), Qc))
    eps = linspace_spec(a["epsilon"])
    cols = {"epsilon": eps}
    for kind, controls in pulses.items():
        with bundle.timed(f"sweep_{kind}"):
            cols[kind] = [transfer_infidelity(evaluation, controls, {"epsilon": e}) for e in eps]
    bundle.write_table("infidelity_vs_epsilon.csv", cols)
    nominal = int(np.argmin(np.abs(np.asarray(eps) - 1.0)))
    bundle.summary["nominal"] = {k: cols[k][nominal] for k in pulses}
    bundle.finalize()
    return bundle
