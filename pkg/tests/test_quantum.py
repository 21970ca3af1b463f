import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adiaqoc.quantum import (SIGMA_X, SIGMA_Z, ValidationError, expm_hermitian, fidelity_amplitude,
                             fidelity_series, hermitian_eigen, ket, tensor, validate_state)
from oracles import (random_density, random_hermitian, random_pure, random_unitary,
                     sqrtm_fidelity)

seeds = st.integers(0, 2**32 - 1)


def test_eigen_pauli_z():
    values, vectors = hermitian_eigen(SIGMA_Z)
    np.testing.assert_allclose(values, [-1, 1])
    np.testing.assert_allclose(vectors[:, 0], ket(2, 1), atol=1e-15)
    np.testing.assert_allclose(vectors[:, 1], ket(2, 0), atol=1e-15)


def test_eigen_pauli_x_ground():
    values, vectors = hermitian_eigen(SIGMA_X)
    np.testing.assert_allclose(values, [-1, 1], atol=1e-15)
    g = vectors[:, 0]
    assert abs(abs(np.vdot(g, np.array([1, -1]) / np.sqrt(2))) - 1) < 1e-12
    # largest component real positive (a tie here, so the first one wins)
    k = np.argmax(np.abs(g))
    assert g[k].real > 0 and abs(g[k].imag) < 1e-15


def test_eigen_reconstruction_6x6():
    H = random_hermitian(np.random.default_rng(7), 6)
    values, V = hermitian_eigen(H)
    assert np.all(np.diff(values) >= 0)
    np.testing.assert_allclose(V @ np.diag(values) @ V.conj().T, H, atol=1e-9)
    np.testing.assert_allclose(V.conj().T @ V, np.eye(6), atol=1e-10)


def test_eigen_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        hermitian_eigen(np.array([[0, 1], [0, 0]], dtype=complex))


@settings(max_examples=40, deadline=None)
@given(seed=seeds, d=st.integers(2, 7))
def test_eigen_properties(seed, d):
    H = random_hermitian(np.random.default_rng(seed), d)
    values, V = hermitian_eigen(H)
    norm = np.linalg.norm(H)
    assert np.abs(H @ V - V * values).max() <= 1e-9 * norm
    assert abs(values.sum() - np.trace(H).real) <= 1e-9 * norm
    idx = np.argmax(np.abs(V), axis=0)
    pivots = V[idx, np.arange(d)]
    assert np.all(pivots.real > 0) and np.all(np.abs(pivots.imag) < 1e-12)
    values2, V2 = hermitian_eigen(H.copy())
    assert np.array_equal(V, V2) and np.array_equal(values, values2)


def test_eigen_degenerate_order_is_deterministic():
    H = np.diag([1.0, 0.0, 1.0, 0.0]).astype(complex)
    values, V = hermitian_eigen(H)
    np.testing.assert_allclose(values, [0, 0, 1, 1])
    assert list(np.argmax(np.abs(V), axis=0)) == [1, 3, 0, 2]


def test_eigen_2x2_fast_path_matches_numpy():
    rng = np.random.default_rng(3)
    H = np.stack([random_hermitian(rng, 2) for _ in range(50)])
    values, V = hermitian_eigen(H)
    np.testing.assert_allclose(values, np.linalg.eigvalsh(H), atol=1e-12)
    np.testing.assert_allclose(V @ (values[..., None] * np.conj(np.swapaxes(V, -1, -2))), H,
                               atol=1e-12)


def test_expm_matches_scipy():
    import scipy.linalg
    rng = np.random.default_rng(1)
    for d in (2, 5):
        H = random_hermitian(rng, d)
        np.testing.assert_allclose(expm_hermitian(H, 0.3), scipy.linalg.expm(-0.3j * H),
                                   atol=1e-12)


def test_fidelity_examples():
    psi = random_pure(np.random.default_rng(0), 3)
    assert fidelity_amplitude(psi, psi) == pytest.approx(1.0, abs=1e-12)
    assert fidelity_amplitude(ket(2, 0), ket(2, 1)) == 0.0
    mixed = np.eye(2) / 2
    assert fidelity_amplitude(mixed, ket(2, 0)) == pytest.approx(np.sqrt(0.5), abs=1e-12)
    # the same value from the oracle's explicit matrix square roots
    assert sqrtm_fidelity(mixed, ket(2, 0)) == pytest.approx(np.sqrt(0.5), abs=1e-12)


def test_fidelity_errors():
    with pytest.raises(ValidationError):
        fidelity_amplitude(ket(2, 0), ket(3, 0))
    bad = np.diag([1.5, -0.5]).astype(complex)
    with pytest.raises(ValidationError):
        fidelity_amplitude(bad, np.eye(2) / 2)
    with pytest.raises(ValidationError):
        validate_state(np.array([1.0, 1.0]))


@pytest.mark.parametrize("d", [2, 3])
def test_fidelity_against_sqrtm_oracle(d):
    rng = np.random.default_rng(100 + d)
    for k in range(50):
        a = random_density(rng, d, rank=1 + k % d)
        b = random_density(rng, d) if k % 3 else random_pure(rng, d)
        assert fidelity_amplitude(a, b) == pytest.approx(sqrtm_fidelity(a, b), abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, d=st.integers(2, 4), pure_a=st.booleans(), pure_b=st.booleans())
def test_fidelity_properties(seed, d, pure_a, pure_b):
    rng = np.random.default_rng(seed)
    a = random_pure(rng, d) if pure_a else random_density(rng, d)
    b = random_pure(rng, d) if pure_b else random_density(rng, d)
    f = fidelity_amplitude(a, b)
    assert 0.0 <= f <= 1.0
    assert fidelity_amplitude(b, a) == pytest.approx(f, abs=1e-9)
    assert fidelity_amplitude(a, a) == pytest.approx(1.0, abs=1e-9)
    U = random_unitary(rng, d)

    def rot(x):
        return U @ x if x.ndim == 1 else U @ x @ U.conj().T

    assert fidelity_amplitude(rot(a), rot(b)) == pytest.approx(f, abs=1e-8)


def test_fidelity_series_matches_pointwise():
    rng = np.random.default_rng(5)
    a = np.stack([random_pure(rng, 3) for _ in range(6)])
    b = np.stack([random_density(rng, 3) for _ in range(6)])
    expect = [fidelity_amplitude(x, y) for x, y in zip(a, b)]
    np.testing.assert_allclose(fidelity_series(a, b), expect, atol=1e-12)


def test_tensor_examples():
    I2 = np.eye(2)
    np.testing.assert_allclose(tensor(SIGMA_X, I2) @ ket(4, 0), ket(4, 2))  # |00> -> |10>
    np.testing.assert_allclose(tensor(I2, I2), np.eye(4))
    np.testing.assert_allclose(tensor(SIGMA_Z, SIGMA_Z) @ ket(4, 1), -ket(4, 1))
    assert tensor([SIGMA_X, I2, I2]).shape == (8, 8)
    with pytest.raises(ValidationError):
        tensor()
