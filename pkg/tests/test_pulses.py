import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adiaqoc.models.rap import RAP_AREA, default_tau, reference_polynomial_rap
from adiaqoc.pulses import (ControlPulse, ControlSet, TimeGrid, load_pulses, normalize_area,
                            power_integral, pulse_area, save_pulses, write_sampled_csv)

weights = st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=8)


def test_time_grid():
    g = TimeGrid(2.0, 4)
    np.testing.assert_allclose(g.points, [0.25, 0.75, 1.25, 1.75])
    np.testing.assert_allclose(g.edges, [0, 0.5, 1, 1.5, 2])
    assert g.dt == 0.5
    with pytest.raises(ValueError):
        TimeGrid(0.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)


def test_chebyshev_endpoints_exact():
    p = ControlPulse(3.0, "sin2", {"amplitude": 0.7}, "chebyshev", [0.3, -1.2, 0.8, 2.0])
    assert p(0.0) == p.reference_values(0.0)
    assert abs(p(3.0) - p.reference_values(3.0)) < 1e-30 + 1e-15


@settings(max_examples=50, deadline=None)
@given(w=weights, tf=st.floats(0.5, 50))
def test_chebyshev_correction_vanishes_at_ends(w, tf):
    p = ControlPulse(tf, "constant", {"value": 0.3}, "chebyshev", w)
    assert p(0.0) == pytest.approx(0.3, abs=1e-12)
    assert p(tf) == pytest.approx(0.3, abs=1e-12)


def test_gaussian_peak():
    tf = 10.0
    p = ControlPulse(tf, "sin2", {}, "gaussian", [[1.0, tf / 2, tf / 10]])
    assert p(tf / 2) == pytest.approx(p.reference_values(tf / 2) + 1.0, abs=1e-14)
    with pytest.raises(ValueError):
        ControlPulse(tf, "zero", {}, "gaussian", [[1.0, 1.0, 0.0]])


def test_sine_zero_weights_is_reference():
    t = np.linspace(0, 4, 17)
    p = ControlPulse(4.0, "rap_delta", {}, "sine", np.zeros(6))
    np.testing.assert_array_equal(p(t), p.reference_values(t))
    q = ControlPulse(4.0, "zero", {}, "sine", [1.0])
    assert q(0.0) == 0.0 and q(2.0) == pytest.approx(1.0)


def test_evaluate_outside_domain():
    p = ControlPulse(1.0, "constant")
    with pytest.raises(ValueError):
        p(1.5)
    with pytest.raises(ValueError):
        p(-0.1)


def test_reference_polynomial_raw_values():
    tau = 2.0
    c = reference_polynomial_rap(tau, area=None)
    om, de = c["Omega"], c["Delta"]
    assert om(0.0) == pytest.approx(0.0, abs=1e-14)          # t = -tau
    assert om(2 * tau) == pytest.approx(0.0, abs=1e-14)      # t = +tau
    assert de(2 * tau) == pytest.approx(0.55, abs=1e-14)
    assert de(0.0) == pytest.approx(-0.55, abs=1e-14)
    # second-order one-sided slope at both ends
    h = 1e-4
    for t, s in ((0.0, 1.0), (2 * tau, -1.0)):
        slope = (-3 * om(t) + 4 * om(t + s * h) - om(t + 2 * s * h)) / (2 * h)
        assert abs(slope) < 1e-6
    with pytest.raises(ValueError):
        reference_polynomial_rap(-1.0)


def test_reference_polynomial_normalized():
    tau = default_tau()
    grid = TimeGrid(2 * tau, 1000)
    c = reference_polynomial_rap(tau, grid)
    assert pulse_area(c["Omega"], grid) == pytest.approx(RAP_AREA, abs=1e-9)
    # default tau makes the normalized peak one
    assert c["Omega"](tau) == pytest.approx(1.0, abs=1e-5)


def test_area_examples():
    T = 3.0
    grid = TimeGrid(T, 1000)
    assert pulse_area(ControlPulse(T, "constant", {"value": 0.4}), grid) == pytest.approx(1.2, abs=1e-12)
    sin2 = ControlPulse(T, "sin2", {"amplitude": 2.0})
    assert pulse_area(sin2, grid) == pytest.approx(2.0 * T / 2, abs=1e-8)


def test_normalize_examples():
    grid = TimeGrid(2 * np.pi, 500)
    p = normalize_area(ControlPulse(2 * np.pi, "constant"), grid, 4 * np.pi)
    np.testing.assert_allclose(p(grid.points), 2.0, atol=1e-12)
    again = normalize_area(p, grid, 4 * np.pi)
    np.testing.assert_allclose(again(grid.points), p(grid.points), atol=1e-12)
    with pytest.raises(ValueError):
        normalize_area(ControlPulse(1.0, "zero"), TimeGrid(1.0, 10), 1.0)


@settings(max_examples=40, deadline=None)
@given(w=weights, target=st.floats(0.5, 30))
def test_normalize_is_idempotent(w, target):
    tf = 5.0
    grid = TimeGrid(tf, 300)
    p = ControlPulse(tf, "sin2", {"amplitude": 3.0}, "sine", w)
    if abs(pulse_area(p, grid)) < 1e-6:
        return
    once = normalize_area(p, grid, target)
    assert pulse_area(once, grid) == pytest.approx(target, rel=1e-9)
    twice = normalize_area(once, grid, target)
    np.testing.assert_allclose(twice(grid.points), once(grid.points), rtol=1e-12, atol=1e-12)


def test_power_examples():
    T = 2.5
    grid = TimeGrid(T, 200)
    zero = ControlSet((ControlPulse(T, "zero"), ControlPulse(T, "zero")), ("a", "b"))
    assert power_integral(zero, grid) == 0.0
    c = ControlPulse(T, "constant", {"value": 0.6})
    assert power_integral([c], grid) == pytest.approx(0.36 * T, abs=1e-12)
    assert power_integral(ControlSet((c, c), ("a", "b")), grid) == pytest.approx(0.72 * T, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(w1=weights, w2=weights)
def test_power_permutation_invariant(w1, w2):
    T = 4.0
    grid = TimeGrid(T, 100)
    a = ControlPulse(T, "sin2", {}, "sine", w1)
    b = ControlPulse(T, "constant", {}, "chebyshev", w2)
    p1 = power_integral(ControlSet((a, b), ("a", "b")), grid)
    p2 = power_integral(ControlSet((b, a), ("b", "a")), grid)
    assert p1 == pytest.approx(p2, rel=1e-12)


def test_quadrature_second_order():
    # midpoint rule on a smooth non-polynomial integrand: error ~ n^-2
    T = 1.0
    p = ControlPulse(T, "sin2", {}, "gaussian", [[0.8, 0.3, 0.2]])
    fine = pulse_area(p, TimeGrid(T, 20000))
    errs = [abs(pulse_area(p, TimeGrid(T, n)) - fine) for n in (20, 40, 80, 160)]
    slope = -np.polyfit(np.log([20, 40, 80, 160]), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


def test_controlset_contract():
    a = ControlPulse(1.0, "constant")
    with pytest.raises(ValueError):
        ControlSet((a, a), ("x", "x"))
    with pytest.raises(ValueError):
        ControlSet((), ())
    s = ControlSet((a, a), ("x", "y"))
    with pytest.raises(KeyError):
        s["z"]
    s2 = s.replace(y=a.scaled(2.0))
    assert s2["y"](0.5) == 2.0 and s["y"](0.5) == 1.0


def test_serialization_roundtrip(tmp_path):
    tf = 6.0
    grid = TimeGrid(tf, 50)
    c = ControlSet((ControlPulse(tf, "sin2", {"amplitude": 0.5}, "gaussian",
                                 [[0.1, 2.0, 1.0], [-0.2, 4.0, 0.5]], scale=1.3),
                    ControlPulse(tf, "rap_delta", {}, "sine", [0.1, 0.2], sine_offset=0.4)),
                   ("Omega", "Delta"))
    path = tmp_path / "p.json"
    save_pulses(c, path, grid)
    loaded, g2 = load_pulses(path)
    assert g2 == grid
    for lab in ("Omega", "Delta"):
        np.testing.assert_array_equal(loaded[lab](grid.points), c[lab](grid.points))
    csv_path = tmp_path / "p.csv"
    write_sampled_csv(csv_path, grid, c)
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    assert data.shape == (50, 3)
    np.testing.assert_allclose(data[:, 1], c["Omega"](grid.points), rtol=1e-11)
