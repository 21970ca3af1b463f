import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import (independence_number, independent_set_count, lucas, mis_full_hamiltonian,
                     schrodinger_ode)

from adiaqoc.models.mis import (GroundTable, Graph, MisProblem, MisSpec, SplitPropagator,
                                alternating_configurations, build_blockade_subspace,
                                mis_hamiltonian_at, mis_operators, mis_reference_controls,
                                mis_solution_state, popcount, symmetric_sector)
from adiaqoc.pulses import ControlPulse, ControlSet, TimeGrid
from adiaqoc.quantum import ValidationError, is_hermitian


def const_controls(tf, omega, delta):
    return ControlSet((ControlPulse(tf, "constant", {"value": omega}),
                       ControlPulse(tf, "constant", {"value": delta})), ("Omega", "Delta"))


@pytest.mark.parametrize("n", range(3, 13))
def test_ring_blockade_dimension(n):
    g = Graph.ring(n)
    sub = build_blockade_subspace(g)
    assert sub.dim == independent_set_count(n, g.edges) == lucas(n)


def test_known_dimensions():
    assert build_blockade_subspace(Graph.ring(8)).dim == 47
    assert build_blockade_subspace(Graph(3, ())).dim == 8
    assert build_blockade_subspace(Graph.ring(2)).dim == 3


edge_sets = st.integers(2, 7).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
             .filter(lambda e: e[0] != e[1]), max_size=12)))


@settings(max_examples=40, deadline=None)
@given(graph=edge_sets)
def test_random_graph_blockade_dimension(graph):
    n, edges = graph
    g = Graph(n, tuple(edges))
    sub = build_blockade_subspace(g)
    assert sub.dim == independent_set_count(n, g.edges)
    assert popcount(sub.states).max() == independence_number(n, g.edges)
    assert sub.states[0] == 0 and np.all(np.diff(sub.states) > 0)


@pytest.mark.parametrize("n", [6, 8])
def test_projected_hamiltonian_matches_kron_oracle(n):
    g = Graph.ring(n)
    tf = 5.0
    spec = MisSpec(g, mis_reference_controls(tf), v_r=7.0)
    t = 1.3
    om, de = spec.controls["Omega"](t), spec.controls["Delta"](t)
    full = mis_full_hamiltonian(n, g.edges, om, de, 7.0)
    np.testing.assert_allclose(mis_hamiltonian_at(spec, t), full, atol=1e-12)
    sub = build_blockade_subspace(g)
    P = sub.projector()
    np.testing.assert_allclose(mis_hamiltonian_at(spec, t, sub), P @ full @ P.T, atol=1e-12)
    assert is_hermitian(mis_hamiltonian_at(spec, t, sub))


def test_interaction_only_on_doubly_excited_pair():
    g = Graph.ring(2)
    spec = MisSpec(g, const_controls(1.0, 0.0, 0.0), v_r=5.0)
    np.testing.assert_allclose(mis_hamiltonian_at(spec, 0.5), np.diag([0, 0, 0, 5.0]))
    # default V_r is ten times the peak drive
    spec = MisSpec(g, const_controls(1.0, 0.3, 0.0))
    assert spec.interaction() == pytest.approx(3.0)


def test_operators_on_small_ring():
    X, Z, V = mis_operators(Graph.ring(3), np.arange(8))
    np.testing.assert_array_equal(Z, 3 - 2 * popcount(np.arange(8)))
    np.testing.assert_array_equal(V, [0, 0, 0, 1, 0, 1, 1, 3])
    assert np.all(X.sum(axis=0) == 3) and np.allclose(X, X.T)


@pytest.mark.parametrize("n", [4, 6, 8, 10])
def test_solution_states(n):
    g = Graph.ring(n)
    sub = build_blockade_subspace(g)
    even, odd = alternating_configurations(n)
    assert bin(even).count("1") == n // 2 == independence_number(n, g.edges)
    assert sub.index[even] >= 0 and sub.index[odd] >= 0
    v = mis_solution_state(g, sub.states)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    np.testing.assert_allclose(np.abs(v[[sub.index[even], sub.index[odd]]]) ** 2, 0.5)
    single = mis_solution_state(g, sub.states, symmetric=False)
    assert abs(single[sub.index[even]]) == 1.0
    with pytest.raises(ValidationError):
        mis_solution_state(Graph.ring(5), build_blockade_subspace(Graph.ring(5)).states)


@pytest.mark.parametrize("n,dim", [(2, 2), (4, 3), (6, 5), (8, 8), (10, 14), (12, 26), (14, 49)])
def test_symmetric_sector_dimension(n, dim):
    g = Graph.ring(n)
    S, reps = symmetric_sector(g, build_blockade_subspace(g))
    assert S.shape[1] == dim == reps.size
    np.testing.assert_allclose(S.T @ S, np.eye(dim), atol=1e-14)


@pytest.mark.parametrize("n", [6, 8])
def test_symmetric_sector_is_invariant(n):
    g = Graph.ring(n)
    sub = build_blockade_subspace(g)
    S, _ = symmetric_sector(g, sub)
    X, _, _ = mis_operators(g, sub.states)
    # the drive maps the sector into itself
    Pi = S @ S.T
    np.testing.assert_allclose(Pi @ X @ S, X @ S, atol=1e-12)
    with pytest.raises(ValidationError):
        symmetric_sector(Graph(4, ((0, 1),)), build_blockade_subspace(Graph(4, ((0, 1),))))


def test_symmetric_matches_blockade_propagation():
    n, tf = 6, 6.0
    grid = TimeGrid(tf, 400)
    controls = mis_reference_controls(tf)
    sym = MisProblem(Graph.ring(n), grid, "symmetric")
    blk = MisProblem(Graph.ring(n), grid, "blockade")
    a = sym.run(controls).states @ sym.isometry.T
    b = blk.run(controls).states
    np.testing.assert_allclose(a, b, atol=1e-12)
    fa = abs(np.vdot(sym.target_state(), sym.run(controls).final)) ** 2
    fb = abs(np.vdot(blk.target_state(), b[-1])) ** 2
    assert fa == pytest.approx(fb, abs=1e-12)


def test_full_space_approaches_blockade_with_growing_interaction():
    n, tf = 4, 4.0
    grid = TimeGrid(tf, 200)
    controls = mis_reference_controls(tf)
    blk = MisProblem(Graph.ring(n), grid, "blockade", backend="closed")
    target = blk.target_state()
    fb = abs(np.vdot(target, blk.run(controls).final)) ** 2
    sub = build_blockade_subspace(Graph.ring(n))
    P = sub.projector()
    errs = []
    for v_r in (10.0, 40.0, 160.0):
        full = MisProblem(Graph.ring(n), TimeGrid(tf, 4000), "full", v_r=v_r, backend="closed")
        ff = abs(np.vdot(P.T @ target, full.run(controls).final)) ** 2
        errs.append(abs(ff - fb))
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 5e-3


def test_split_propagator_against_ode():
    n, tf = 6, 3.0
    g = Graph.ring(n)
    controls = mis_reference_controls(tf)
    sub = build_blockade_subspace(g)
    X, Z, _ = mis_operators(g, sub.states)

    def H(t):
        return controls["Omega"](t) * X - controls["Delta"](t) * np.diag(Z)

    psi0 = np.zeros(sub.dim, complex)
    psi0[0] = 1.0
    exact = schrodinger_ode(H, psi0, 0.0, tf)
    errs = []
    for steps in (100, 200, 400):
        grid = TimeGrid(tf, steps)
        t = grid.points
        out = SplitPropagator(X, Z).run(psi0, controls["Omega"](t), controls["Delta"](t), grid.dt)
        errs.append(np.linalg.norm(out[-1] - exact))
        np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-12)
    assert errs[-1] < 1e-3
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    np.testing.assert_allclose(rates, 2.0, atol=0.2)


def test_split_matches_generic_propagator():
    tf = 5.0
    controls = mis_reference_controls(tf)
    grid = TimeGrid(tf, 600)
    a = MisProblem(Graph.ring(8), grid, "symmetric", substeps=4).run(controls).final
    b = MisProblem(Graph.ring(8), grid, "symmetric", backend="closed").run(controls).final
    assert abs(np.vdot(a, b)) ** 2 == pytest.approx(1.0, abs=1e-6)


def test_ground_table_matches_eigh():
    g = Graph.ring(8)
    p = MisProblem(g, TimeGrid(4.0, 10))
    table = GroundTable(p.X, p.Z, 8001)
    rng = np.random.default_rng(3)
    om = rng.uniform(0.01, 2, 20)
    de = rng.uniform(-3, 3, 20)
    got = table.lookup(om, de)
    for k in range(20):
        _, vec = np.linalg.eigh(om[k] * p.X - de[k] * np.diag(p.Z))
        assert abs(np.vdot(vec[:, 0], got[k])) ** 2 == pytest.approx(1.0, abs=1e-6)


def test_problem_endpoints():
    tf = 8 * np.pi
    p = MisProblem(Graph.ring(10), TimeGrid(tf, 100))
    controls = mis_reference_controls(tf)
    assert controls["Delta"](0.0) == pytest.approx(3.0) and controls["Delta"](tf) == pytest.approx(-3.0)
    ref = p.reference_trajectory(p.model(controls), controls)
    # the all-ground state is the start and the MIS superposition the end of the ground path
    assert abs(ref.states[0][0]) ** 2 == pytest.approx(1.0, abs=1e-12)
    assert abs(np.vdot(p.target_state(), ref.final)) ** 2 > 0.99
    with pytest.raises(ValueError):
        MisProblem(Graph.ring(4), TimeGrid(1.0, 10), "symmetric", symmetric_target=False)
    with pytest.raises(ValueError):
        MisProblem(Graph.ring(4), TimeGrid(1.0, 10), "diagonal")
    with pytest.raises(ValidationError):
        MisProblem(Graph.ring(4), TimeGrid(1.0, 10), "full").run(controls)


def test_graph_parsing(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("# ring of four\n0 1\n1 2\n2 3\n3 0\n")
    g = Graph.from_edge_list(path)
    assert g == Graph.ring(4) and g.is_ring
    assert not Graph(4, ((0, 1), (1, 2), (2, 3))).is_ring
    assert Graph(3, ((1, 0), (0, 1))).edges == ((0, 1),)
    with pytest.raises(ValueError):
        Graph(3, ((0, 3),))
    with pytest.raises(ValueError):
        Graph(3, ((1, 1),))
    with pytest.raises(ValueError):
        MisSpec(Graph(1, ()), const_controls(1.0, 1.0, 0.0))
