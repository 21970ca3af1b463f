import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adiaqoc.cost import (CostFunction, CostSpec, EnsembleMemberError, EnsembleSpec,
                          adiabatic_infidelity, composite_cost, ensemble_infidelity, power_penalty,
                          terminal_infidelity)
from adiaqoc.dynamics import Trajectory
from adiaqoc.models.rap import RapProblem, default_tau, reference_polynomial_rap
from adiaqoc.pulses import ControlPulse, ControlSet, TimeGrid, power_integral
from adiaqoc.quantum import ket


def traj_of(states, tf=1.0):
    states = np.asarray(states, dtype=complex)
    return Trajectory(TimeGrid(tf, len(states) - 1), states)


@pytest.fixture(scope="module")
def rap():
    tau = default_tau()
    grid = TimeGrid(2 * tau, 400)
    return RapProblem(grid), reference_polynomial_rap(tau, grid)


def rabi_controls(tf):
    # constant Omega sigma_x with Omega tf = pi/2 flips |0> to |1> exactly
    return ControlSet((ControlPulse(tf, "constant", {"value": np.pi / 2 / tf}),
                       ControlPulse(tf, "zero")), ("Omega", "Delta"))


def test_terminal_examples():
    assert terminal_infidelity(traj_of([ket(2, 0), ket(2, 1)]), ket(2, 1)) == pytest.approx(0.0)
    assert terminal_infidelity(traj_of([ket(2, 0), ket(2, 0)]), ket(2, 1)) == pytest.approx(1.0)
    mixed = traj_of(np.stack([np.eye(2) / 2] * 3))
    assert terminal_infidelity(mixed, ket(2, 0)) == pytest.approx(1 - np.sqrt(0.5), abs=1e-12)


def test_adiabatic_examples():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(11, 3)) + 1j * rng.normal(size=(11, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    assert adiabatic_infidelity(traj_of(v), traj_of(v)) == pytest.approx(0.0, abs=1e-10)
    ground = traj_of(np.tile(ket(2, 0), (11, 1)))
    assert adiabatic_infidelity(traj_of(np.tile(ket(2, 1), (11, 1))), ground) == pytest.approx(1.0)
    # half the time on the ground state, half orthogonal: trapezoid average
    states = np.array([ket(2, 0)] * 5 + [ket(2, 1)] * 6)
    assert adiabatic_infidelity(traj_of(states), ground) == pytest.approx(0.55)
    with pytest.raises(Exception):
        adiabatic_infidelity(traj_of(states), traj_of(states, tf=2.0))


def test_ensemble_single_member_equals_terminal(rap):
    problem, controls = rap
    single = EnsembleSpec((({}, 1.0),))
    term = terminal_infidelity(problem.run(controls), problem.target_state())
    assert ensemble_infidelity(problem, controls, single) == pytest.approx(term, abs=1e-15)


def test_ensemble_identical_members_ignore_weights(rap):
    problem, controls = rap
    alpha = {"epsilon": 0.9, "delta_dopp": 0.05}
    value = ensemble_infidelity(problem, controls, EnsembleSpec(((alpha, 1.0),)))
    skewed = EnsembleSpec(((alpha, 0.2), (alpha, 3.0), (alpha, 7.5)))
    assert ensemble_infidelity(problem, controls, skewed) == pytest.approx(value, rel=1e-12)


def test_ensemble_grid_is_explicit_mean(rap):
    problem, controls = rap
    eps = np.linspace(0.8, 1.2, 5)
    dop = np.linspace(-0.1, 0.1, 5)
    spec = EnsembleSpec.product(epsilon=eps, delta_dopp=dop)
    assert spec.size == 25
    explicit = np.mean([1 - abs(problem.run(controls, {"epsilon": e, "delta_dopp": d}).final[1])
                        for e in eps for d in dop])
    assert ensemble_infidelity(problem, controls, spec) == pytest.approx(explicit, abs=1e-12)


def test_ensemble_failure_reports_member(rap):
    problem, controls = rap
    spec = EnsembleSpec((({"epsilon": 1.0}, 1.0), ({"delta_dopp": np.nan}, 1.0)))
    with pytest.raises(EnsembleMemberError) as err:
        ensemble_infidelity(problem, controls, spec)
    assert err.value.index == 1


def test_ensemble_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec(())
    with pytest.raises(ValueError):
        EnsembleSpec((({}, 0.0),))


def test_power_penalty_examples():
    T = 2.0
    grid = TimeGrid(T, 100)
    c = ControlSet((ControlPulse(T, "constant", {"value": 1.0}),), ("Omega",))
    p = power_integral(c, grid)
    for mode in ("one_sided", "absolute"):
        assert power_penalty(c, grid, p, mode) == 0.0
        assert power_penalty(c, grid, p / 2, mode) == pytest.approx(p / 2)
    assert power_penalty(c, grid, 2 * p, "one_sided") == 0.0
    assert power_penalty(c, grid, 2 * p, "absolute") == pytest.approx(p)
    with pytest.raises(ValueError):
        power_penalty(c, grid, -1.0)


@settings(max_examples=50, deadline=None)
@given(value=st.floats(-3, 3), c0=st.floats(0, 20))
def test_absolute_penalty_dominates_one_sided(value, c0):
    T = 2.0
    grid = TimeGrid(T, 20)
    c = ControlSet((ControlPulse(T, "constant", {"value": value}),), ("Omega",))
    a = power_penalty(c, grid, c0, "absolute")
    o = power_penalty(c, grid, c0, "one_sided")
    assert a >= o >= 0.0


def test_composite_terminal_only_equals_terminal(rap):
    problem, controls = rap
    b = composite_cost(problem, controls, CostSpec(terminal=1.0, eta=0.0))
    term = terminal_infidelity(problem.run(controls), problem.target_state())
    assert b.total == pytest.approx(term, abs=1e-15)
    assert b.components["propagations"] == 1


def test_composite_equal_weights_is_mean(rap):
    problem, controls = rap
    b = composite_cost(problem, controls, CostSpec(terminal=0.5, adiabatic=0.5, eta=0.0))
    traj = problem.run(controls)
    ground = problem.reference_trajectory(problem.model(controls), controls)
    expect = 0.5 * terminal_infidelity(traj, problem.target_state()) + \
        0.5 * adiabatic_infidelity(traj, ground)
    assert b.total == pytest.approx(expect, abs=1e-15)
    assert 0 <= b.components["terminal"] <= 1 and 0 <= b.components["adiabatic"] <= 1


def test_composite_perfect_transfer_at_reference_power():
    tf = 3.0
    grid = TimeGrid(tf, 50)
    controls = rabi_controls(tf)
    spec = CostSpec(terminal=1.0, eta=1.0, c0=power_integral(controls, grid))
    assert composite_cost(RapProblem(grid), controls, spec).total == pytest.approx(0.0, abs=1e-12)


def test_composite_monotone_in_eta(rap):
    problem, controls = rap
    c0 = 0.5 * power_integral(controls, problem.grid)
    totals = [composite_cost(problem, controls, CostSpec(terminal=1.0, eta=eta, c0=c0)).total
              for eta in (0.0, 0.1, 1.0, 5.0)]
    assert np.all(np.diff(totals) > 0)


def test_cost_function_counts_propagations(rap):
    problem, controls = rap
    ens = EnsembleSpec.product(epsilon=[0.9, 1.0, 1.1], delta_dopp=[0.0, 0.1])
    f = CostFunction(problem, CostSpec(terminal=0.0, ensemble=1.0, ensemble_spec=ens, eta=0.0))
    f(controls)
    f(controls)
    assert f.n_propagations == 12


def test_cost_spec_validation():
    with pytest.raises(ValueError):
        CostSpec(terminal=0.0)
    with pytest.raises(ValueError):
        CostSpec(terminal=0.6, adiabatic=0.6)
    with pytest.raises(ValueError):
        CostSpec(terminal=0.0, ensemble=1.0)
    with pytest.raises(ValueError):
        CostSpec(eta=-1.0)
    with pytest.raises(ValueError):
        CostSpec(power_mode="squared")
