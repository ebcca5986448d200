import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fockbit.states import (
    DensityOperator,
    PureState,
    QubitState,
    StateError,
    ThermalParams,
    coherent_state,
    number_state,
    thermal_state,
    validate_density,
)


class TestThermal:
    @pytest.mark.parametrize("D", [1, 5, 32])
    def test_vacuum(self, D):
        rho = thermal_state(0.0, D)
        expected = np.zeros((D, D))
        expected[0, 0] = 1.0
        assert np.array_equal(rho.matrix, expected)
        assert rho.tail_mass == 0.0

    def test_n1_d4(self):
        rho = thermal_state(1.0, 4)
        assert_allclose(np.diag(rho.matrix).real, [0.5, 0.25, 0.125, 0.0625], atol=0)
        assert rho.tail_mass == 0.0625

    def test_n1_d64_tail(self):
        assert thermal_state(1.0, 64).tail_mass == pytest.approx(5.421010862427522e-20, rel=1e-15)

    def test_not_renormalized_by_default(self):
        rho = thermal_state(1.0, 4)
        assert rho.trace == pytest.approx(1 - 0.0625, abs=1e-15)
        assert thermal_state(1.0, 4, renormalize=True).trace == pytest.approx(1.0, abs=1e-15)

    def test_negative_n(self):
        with pytest.raises(StateError):
            thermal_state(-0.1, 4)

    @given(st.floats(0, 20), st.integers(1, 80))
    @settings(max_examples=60, deadline=None)
    def test_trace_is_finite_geometric_sum(self, N, D):
        v = N / (N + 1)
        rho = thermal_state(N, D)
        assert abs(rho.trace - (1 - v**D)) <= 1e-15 + 1e-15 * D
        assert rho.tail_mass == v**D
        validate_density(rho.matrix)

    def test_params(self):
        p = ThermalParams(1.0)
        assert p.v == 0.5
        assert ThermalParams.from_v(0.9).v == pytest.approx(0.9, abs=1e-15)
        with pytest.raises(StateError):
            ThermalParams.from_v(1.0)


class TestCoherent:
    def test_vacuum(self):
        psi = coherent_state(0, 8)
        assert np.array_equal(psi.amplitudes, number_state(0, 8).amplitudes)
        assert psi.tail_mass == 0.0

    def test_alpha1_d2(self):
        # Poisson weights of |0> and |1> are both e^-1
        psi = coherent_state(1.0, 2)
        assert_allclose(psi.amplitudes, [1 / math.sqrt(2)] * 2, atol=1e-15)

    def test_alpha1_d32_tail(self):
        psi = coherent_state(1.0, 32)
        assert 0 < psi.tail_mass < 1e-30

    def test_tail_matches_direct_sum(self):
        x = 4.0
        tail = math.exp(-x) * sum(x**n / math.factorial(n) for n in range(10, 120))
        assert coherent_state(2.0, 10).tail_mass == pytest.approx(tail, rel=1e-12)

    @given(st.complex_numbers(max_magnitude=3.0), st.integers(2, 60))
    @settings(max_examples=60, deadline=None)
    def test_recurrence_and_norm(self, alpha, D):
        amps = coherent_state(alpha, D).amplitudes
        assert abs(np.linalg.norm(amps) - 1) <= 1e-12
        for n in range(D - 1):
            assert abs(amps[n + 1] - amps[n] * alpha / math.sqrt(n + 1)) <= 1e-13


class TestNumber:
    def test_basis_vectors(self):
        assert np.array_equal(number_state(5, 8).amplitudes, np.eye(8)[5])

    def test_orthonormal(self):
        vecs = [number_state(m, 8).amplitudes for m in range(8)]
        gram = np.array([[np.vdot(a, b) for b in vecs] for a in vecs])
        assert np.array_equal(gram, np.eye(8))

    @pytest.mark.parametrize("m", [-1, 8, 2.5])
    def test_out_of_range(self, m):
        with pytest.raises(StateError):
            number_state(m, 8)


class TestValidate:
    def test_maximally_mixed(self):
        rho = validate_density(np.eye(2) / 2)
        assert rho.trace == pytest.approx(1.0)
        assert rho.tail_mass == 0.0

    def test_negative_eigenvalue(self):
        # eigenvalues 1.1 and -0.1
        with pytest.raises(StateError, match="negative eigenvalue -0.1"):
            validate_density([[0.5, 0.6], [0.6, 0.5]])

    def test_thermal_round_trip(self):
        rho = thermal_state(1.0, 16)
        again = validate_density(rho.matrix)
        assert np.array_equal(again.matrix, rho.matrix)
        assert again.tail_mass == pytest.approx(rho.tail_mass, abs=1e-15)

    def test_non_hermitian(self):
        with pytest.raises(StateError, match="Hermitian"):
            validate_density([[0.5, 0.1], [0.0, 0.5]])

    def test_trace_too_large(self):
        with pytest.raises(StateError, match="trace"):
            validate_density(np.eye(2))

    def test_explicit_tail_checked(self):
        with pytest.raises(StateError):
            validate_density(np.diag([0.5, 0.0]), tail_mass=0.1)

    def test_constructors_pass_without_clamping(self):
        for rho in (thermal_state(2.0, 32), coherent_state(1 + 0.5j, 32).to_density()):
            checked = validate_density(rho.matrix, tolerance=1e-15)
            assert checked.dim == 32


class TestQubitState:
    def test_matrix(self):
        q = QubitState(0.75, 0.25 + 0.1j)
        assert_allclose(q.matrix, [[0.75, 0.25 + 0.1j], [0.25 - 0.1j, 0.25]])

    def test_rejects_non_psd(self):
        with pytest.raises(StateError):
            QubitState(0.5, 0.6)
        with pytest.raises(StateError):
            QubitState(1.2)

    def test_from_matrix_normalizes(self):
        q = QubitState.from_matrix(np.array([[0.3, 0.1j], [-0.1j, 0.1]]))
        assert q.alpha == pytest.approx(0.75)
        assert q.beta == pytest.approx(0.25j)


def test_pure_state_requires_unit_norm():
    with pytest.raises(StateError):
        PureState(np.array([1.0, 1.0], dtype=complex))


def test_renormalized_keeps_tail():
    rho = DensityOperator(np.diag([0.5, 0.25]).astype(complex), tail_mass=0.25)
    r = rho.renormalized()
    assert r.trace == pytest.approx(1.0)
    assert r.tail_mass == 0.25
