import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fockbit.dynamics import protocol_step, step_unitary, StepSpec
from fockbit.metrics import (
    MetricsError,
    coherent_fprime_closed,
    entropy_balance,
    thermal_closed_forms,
    thermal_entropy,
    uhlmann_fidelity,
    vacuum_closeness,
    von_neumann_entropy,
)
from fockbit.protocol import ProtocolConfig, QubitRegisterState, convert_forward, reconstruct
from fockbit.states import DensityOperator, coherent_state, number_state, thermal_state

from helpers import random_density_matrix


def binary_entropy(p):
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


class TestEntropy:
    def test_pure(self, rng):
        psi = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        psi /= np.linalg.norm(psi)
        assert abs(von_neumann_entropy(np.outer(psi, psi.conj()))) <= 1e-12

    def test_diag_two_thirds(self):
        s = von_neumann_entropy(np.diag([2 / 3, 1 / 3]))
        assert s == pytest.approx(math.log2(1.5) + 1 / 3, abs=1e-14)
        assert s == pytest.approx(0.918296, abs=1e-6)

    def test_maximally_mixed(self):
        assert von_neumann_entropy(np.eye(2) / 2) == pytest.approx(1.0, abs=1e-15)
        assert von_neumann_entropy(np.eye(8) / 8) == pytest.approx(3.0, abs=1e-14)

    def test_accepts_state_objects(self):
        reg = QubitRegisterState(np.eye(4, dtype=complex) / 4, 2)
        assert von_neumann_entropy(reg) == pytest.approx(2.0, abs=1e-14)
        assert von_neumann_entropy(number_state(3, 8)) == 0.0

    def test_bounds(self, rng):
        for d in (2, 5, 16):
            s = von_neumann_entropy(random_density_matrix(rng, d))
            assert -1e-12 <= s <= math.log2(d) + 1e-9

    def test_rejects_negative_spectrum(self):
        with pytest.raises(MetricsError):
            von_neumann_entropy(np.diag([1.2, -0.2]))

    @pytest.mark.parametrize("v", [0.1, 0.5, 0.9])
    def test_thermal_entropy_against_series(self, v):
        m = np.arange(2000)
        p = (1 - v) * v**m
        p = p[p > 0]
        assert thermal_entropy(v) == pytest.approx(-np.sum(p * np.log2(p)), abs=1e-12)

    def test_unitary_invariance(self, rng):
        D = 32
        rho = random_density_matrix(rng, D)
        joint = np.kron(rho.matrix, np.diag([0.3, 0.7]))
        s0 = von_neumann_entropy(joint)
        for k in (1, 2, 3, 4):
            for theta in (0.3, math.pi / 2**k, 2.0):
                u = step_unitary(StepSpec(k, theta), D)
                assert abs(von_neumann_entropy(u @ joint @ u.conj().T) - s0) <= 1e-9


class TestFidelity:
    def test_self(self, rng):
        rho = random_density_matrix(rng, 8)
        assert uhlmann_fidelity(rho, rho) == pytest.approx(1.0, abs=1e-9)

    def test_symmetric(self, rng):
        for _ in range(10):
            a, b = random_density_matrix(rng, 6), random_density_matrix(rng, 6)
            assert abs(uhlmann_fidelity(a, b) - uhlmann_fidelity(b, a)) <= 1e-9

    def test_pure_pairs(self, rng):
        for _ in range(20):
            psi = rng.standard_normal(5) + 1j * rng.standard_normal(5)
            phi = rng.standard_normal(5) + 1j * rng.standard_normal(5)
            psi /= np.linalg.norm(psi)
            phi /= np.linalg.norm(phi)
            f = uhlmann_fidelity(np.outer(psi, psi.conj()), np.outer(phi, phi.conj()))
            # square roots of rank-one matrices carry ~sqrt(eps) noise
            assert f == pytest.approx(abs(np.vdot(psi, phi)), abs=1e-6)

    def test_commuting_states(self, rng):
        p, q = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
        assert uhlmann_fidelity(np.diag(p), np.diag(q)) == pytest.approx(np.sum(np.sqrt(p * q)), abs=1e-12)

    def test_orthogonal(self):
        assert uhlmann_fidelity(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == 0.0

    def test_thermal_k4(self):
        v, D = 0.9, 256
        rho = thermal_state(0.0, D, v=v, renormalize=True)
        f = uhlmann_fidelity(rho, reconstruct(rho, 4))
        assert f == pytest.approx(math.sqrt(1 - v**16), abs=1e-9)
        assert f == pytest.approx(0.9026, abs=5e-5)

    def test_dimension_mismatch(self):
        with pytest.raises(MetricsError):
            uhlmann_fidelity(np.eye(2) / 2, np.eye(3) / 3)

    def test_trace_scaling(self, rng):
        a, b = random_density_matrix(rng, 4), random_density_matrix(rng, 4)
        assert uhlmann_fidelity(0.5 * a.matrix, 3 * b.matrix) == pytest.approx(uhlmann_fidelity(a, b), abs=1e-12)


class TestVacuumCloseness:
    def test_vacuum(self):
        assert vacuum_closeness(number_state(0, 4)) == 1.0

    def test_thermal_residue(self):
        rho = thermal_state(0.0, 64, v=0.5, renormalize=True)
        res = convert_forward(rho, ProtocolConfig(3, 64)).residue_field
        assert vacuum_closeness(res) == pytest.approx(math.sqrt(1 - 0.5**8), abs=1e-12)

    def test_coherent_residue(self):
        res = convert_forward(coherent_state(1.0, 64), ProtocolConfig(2, 64)).residue_field
        assert vacuum_closeness(res) == pytest.approx(math.sqrt(math.exp(-1) * 8 / 3), abs=1e-12)
        assert vacuum_closeness(res) == pytest.approx(0.990460, abs=1e-6)

    def test_negative_population(self):
        with pytest.raises(MetricsError):
            vacuum_closeness(np.diag([-1e-6, 1.0]))
        assert vacuum_closeness(np.diag([-1e-13, 1.0])) == 0.0


class TestClosedForms:
    def test_zero_temperature(self):
        cf = thermal_closed_forms(0.0, 4)
        assert cf.qubit_entropies == (0.0,) * 4
        assert cf.residue_entropy == 0.0 and cf.input_entropy == 0.0
        assert cf.fidelity == 1.0

    def test_residue_entropy_v_half(self):
        cf = thermal_closed_forms(0.5, 2)
        assert cf.residue_entropy == pytest.approx(-math.log2(0.9375) + 4 * 0.0625 / 0.9375, abs=1e-14)
        assert cf.residue_entropy == pytest.approx(0.359776, abs=1e-6)

    def test_fidelity_v_half(self):
        assert thermal_closed_forms(0.5, 3).fidelity == pytest.approx(0.998045, abs=5e-7)

    @pytest.mark.parametrize("v", [0.1, 0.5, 0.9])
    def test_qubit_entropy_is_binary_entropy(self, v):
        cf = thermal_closed_forms(v, 5)
        for s, g in zip(cf.qubit_entropies, cf.qubit_ground_weights):
            assert s == pytest.approx(binary_entropy(g), abs=1e-13)

    @pytest.mark.parametrize("v", [0.1, 0.5, 0.9])
    @pytest.mark.parametrize("K", [1, 3, 6])
    def test_closed_forms_balance(self, v, K):
        cf = thermal_closed_forms(v, K)
        assert sum(cf.qubit_entropies) + cf.residue_entropy == pytest.approx(cf.input_entropy, abs=1e-12)

    @pytest.mark.parametrize("v", [-0.1, 1.0, 2.0])
    def test_bad_v(self, v):
        with pytest.raises(MetricsError):
            thermal_closed_forms(v, 2)


class TestCoherentClosed:
    def test_vacuum(self):
        assert coherent_fprime_closed(0, 3) == 1.0

    def test_alpha_one(self):
        assert coherent_fprime_closed(1.0, 2) == pytest.approx(math.sqrt(math.exp(-1) * 8 / 3), abs=1e-15)

    def test_phase_independent(self):
        assert coherent_fprime_closed(1j, 3) == pytest.approx(coherent_fprime_closed(-1.0, 3), abs=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.0, 4.0))
    def test_monotone_in_k(self, a):
        vals = [coherent_fprime_closed(a, K) for K in range(1, 7)]
        assert all(x <= y + 1e-15 for x, y in zip(vals, vals[1:]))
        assert all(0.0 <= x <= 1.0 for x in vals)


class TestEntropyBalance:
    def test_thermal(self):
        rho = thermal_state(0.0, 128, v=0.5, renormalize=True)
        rep = entropy_balance(convert_forward(rho, ProtocolConfig(4, 128)), rho)
        assert rep.balance_gap <= 1e-6
        assert len(rep.per_qubit) == 4

    def test_vacuum(self):
        rho = number_state(0, 16)
        rep = entropy_balance(convert_forward(rho, ProtocolConfig(2, 16)), rho)
        assert rep.per_qubit == (0.0, 0.0)
        assert rep.residue == rep.input == rep.register == rep.balance_gap == 0.0

    def test_entangled_register_reports_gap(self):
        psi = np.zeros(8, dtype=complex)
        psi[0] = psi[3] = 1 / math.sqrt(2)
        rho = DensityOperator(np.outer(psi, psi.conj()))
        rep = entropy_balance(convert_forward(rho, ProtocolConfig(2, 8)), rho)
        assert rep.register == pytest.approx(0.0, abs=1e-9)
        assert rep.balance_gap == pytest.approx(2.0, abs=1e-9)


@pytest.mark.parametrize("v", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("K", range(1, 7))
def test_per_qubit_entropy_matches_closed_form(v, K):
    D = max(64, (1 << K) * 8)
    rho = thermal_state(0.0, D, v=v, renormalize=True)
    res = convert_forward(rho, ProtocolConfig(K, D, "formula"))
    cf = thermal_closed_forms(v, K)
    for q, s in zip(res.per_qubit, cf.qubit_entropies):
        assert abs(von_neumann_entropy(q.matrix) - s) <= 1e-8
