import math

import numpy as np
import pytest
import scipy.linalg as sla

from daviesgap.davies import (GeneratorError, ThermalParams, apply_component,
                              build_generator, default_couplings,
                              detailed_balance_residual,
                              dissipativity_identity_check, fourier_decompose,
                              reconstruction_residual, stationarity_residual,
                              _beta_inner)
from daviesgap.pauli import PauliString, PauliSum


class TestThermalParams:
    def test_rate_constants(self):
        tp = ThermalParams.from_betaJ(0.3)
        g = math.exp(-0.6)
        assert abs(tp.gamma - g) < 1e-15
        assert abs(tp.h_plus - 2 / (g * g + 1)) < 1e-15
        assert abs(tp.h_minus - 2 * g * g / (g * g + 1)) < 1e-15
        assert tp.h_zero == 1.0

    def test_sum_rule_of_constants(self):
        for betaJ in (0.0, 0.17, 0.5, 2.0):
            tp = ThermalParams.from_betaJ(betaJ)
            assert abs(tp.h_plus + tp.h_minus - 2 * tp.h_zero) < 1e-14
            assert 0 < tp.gamma <= 1

    def test_rate_reproduces_constants_at_model_frequencies(self):
        tp = ThermalParams.from_betaJ(0.4)
        assert abs(tp.rate(4 * tp.coupling) - tp.h_plus) < 1e-14
        assert abs(tp.rate(-4 * tp.coupling) - tp.h_minus) < 1e-14
        assert abs(tp.rate(0.0) - tp.h_zero) < 1e-14

    def test_balance_relation(self):
        tp = ThermalParams(beta=0.7, coupling=1.3)
        for w in (0.5, 1.0, 4.0):
            assert abs(tp.rate(-w) - math.exp(-tp.beta * w) * tp.rate(w)) < 1e-14

    def test_invalid(self):
        with pytest.raises(GeneratorError):
            ThermalParams(beta=-0.1)


class TestFourierDecompose:
    def test_frequencies_of_flip_coupling(self, ising4):
        js = fourier_decompose(PauliString.single(4, 1, "X"), ising4)
        assert js.frequencies() == [-4.0, 0.0, 4.0]

    def test_commuting_coupling_single_zero_component(self, ising4):
        js = fourier_decompose(PauliString.single(4, 0, "Z"), ising4)
        assert js.frequencies() == [0.0]
        (w, op), = js.components
        assert op.terms == ((1.0, PauliString.single(4, 0, "Z")),)

    def test_projector_form_matches_bond_construction(self, ising4):
        # S(4J) = (1/4)(1 + Z_b)(1 + Z_b') sigma^x_j with bonds at sites (0,1), (1,2)
        js = fourier_decompose(PauliString.single(4, 1, "X"), ising4)
        zb = ising4.stabilizers[0]
        zbp = ising4.stabilizers[1]
        sx = PauliString.single(4, 1, "X")
        half = PauliSum(4, [(0.25, PauliString.identity(4)), (0.25, zb),
                            (0.25, zbp), (0.25, zb * zbp)])
        want = half * sx
        assert len(js.component(4.0) - want) == 0

    def test_sum_rule(self, ising4, toric2):
        for m in (ising4, toric2):
            for c in default_couplings(m):
                assert fourier_decompose(c, m).sum_rule_defect() == 0

    def test_adjoint_pairing(self, toric2):
        js = fourier_decompose(PauliString.single(8, 3, "X"), toric2)
        assert js.frequencies() == [-4.0, 0.0, 4.0]
        for w, op in js.components:
            assert len(op.adjoint() - js.component(-w)) == 0

    def test_wrong_register_rejected(self, ising4):
        with pytest.raises(GeneratorError):
            fourier_decompose(PauliString.single(5, 0, "X"), ising4)

    def test_evolution_reconstruction_dense(self, ising4, ising4_frame):
        # e^{itH} S e^{-itH} == sum_w e^{-iwt} S(w) at several times
        tp = ThermalParams.from_betaJ(0.3)
        rep = build_generator(ising4, tp=tp, frame=ising4_frame)
        n_couplings = len(default_couplings(ising4))
        for alpha in range(0, n_couplings, 5):
            assert reconstruction_residual(rep, alpha) < 1e-10


class TestGeneratorStructure:
    def test_beta_zero_kernel_is_one_dimensional(self, ising3, ising3_frame):
        rep = build_generator(ising3, tp=ThermalParams(beta=0.0),
                              frame=ising3_frame)
        dense = rep.dense()
        assert np.abs(dense - dense.conj().T).max() < 1e-12
        evals = np.linalg.eigvalsh(dense)
        assert evals[0] > -1e-10 * evals[-1]
        assert int(np.sum(evals < 1e-10 * evals[-1])) == 1

    def test_positive_semidefinite_in_weighted_sense(self, ising3, ising3_frame):
        tp = ThermalParams.from_betaJ(0.5)
        rep = build_generator(ising3, tp=tp, frame=ising3_frame)
        g = rep.gram_diag()
        sym = np.sqrt(g)[:, None] * rep.dense() * (1 / np.sqrt(g))[None, :]
        evals = np.linalg.eigvalsh((sym + sym.conj().T) / 2)
        assert evals[0] > -1e-10 * evals[-1]

    def test_detailed_balance(self, ising3, ising3_frame):
        tp = ThermalParams.from_betaJ(0.5)
        rep = build_generator(ising3, tp=tp, frame=ising3_frame)
        assert detailed_balance_residual(rep, samples=50) < 1e-12

    def test_detailed_balance_beta_zero_plain_hermitian(self, ising3, ising3_frame):
        rep = build_generator(ising3, tp=ThermalParams(beta=0.0),
                              frame=ising3_frame)
        assert detailed_balance_residual(rep, samples=20) < 1e-14

    def test_stationarity_of_gibbs_state(self, ising3, ising3_frame):
        tp = ThermalParams.from_betaJ(0.25)
        rep = build_generator(ising3, tp=tp, frame=ising3_frame)
        assert stationarity_residual(rep, samples=50) < 1e-12

    def test_hamiltonian_part_commutes_with_dissipator(self, ising3, ising3_frame):
        tp = ThermalParams.from_betaJ(0.4)
        rep = build_generator(ising3, tp=tp, frame=ising3_frame)
        delta = np.diag(rep.delta_diagonal())
        l = rep.dense()
        assert np.abs(delta @ l - l @ delta).max() < 1e-10 * np.abs(l).max()

    def test_dissipativity_identity(self, ising3, ising3_frame):
        tp = ThermalParams.from_betaJ(0.3)
        rep = build_generator(ising3, tp=tp, frame=ising3_frame)
        assert dissipativity_identity_check(rep, 1, omega=4.0, samples=20) < 1e-12
        assert dissipativity_identity_check(rep, 1, samples=20) < 1e-12

    def test_dissipativity_identity_trivial_on_identity(self, ising3, ising3_frame):
        tp = ThermalParams.from_betaJ(0.3)
        rep = build_generator(ising3, tp=tp, frame=ising3_frame)
        ident = np.eye(ising3_frame.dim, dtype=complex)
        out = apply_component(rep, 0, ident)
        assert np.abs(out).max() < 1e-12

    def test_quadratic_form_at_z_logical(self, ising3, ising3_frame):
        # -<Z, L_x1(Z)> equals twice the thermal weight of the site projectors
        # and is bounded below by 2 h_minus
        tp = ThermalParams.from_betaJ(0.5)
        rep = build_generator(ising3, tp=tp, frame=ising3_frame)
        z = ising3_frame.matrix_of(ising3.logicals[0][1]).toarray()
        val = -_beta_inner(rep.rho, z, apply_component(rep, 0, z))
        assert abs(val.imag) < 1e-12
        bonds = [ising3.stabilizers[2], ising3.stabilizers[0]]  # touch site 0
        proj_plus = 0.25 * ((np.eye(8) - bonds[0].matrix().toarray())
                            @ (np.eye(8) - bonds[1].matrix().toarray()))
        proj_minus = 0.25 * ((np.eye(8) + bonds[0].matrix().toarray())
                             @ (np.eye(8) + bonds[1].matrix().toarray()))
        proj_zero = np.eye(8) - proj_plus - proj_minus
        g_op = (tp.h_plus * proj_plus + tp.h_minus * proj_minus
                + tp.h_zero * proj_zero)
        rho_full = sla.expm(-tp.beta * ising3.hamiltonian().matrix().toarray())
        rho_full /= np.trace(rho_full)
        want = 2 * np.trace(rho_full @ g_op).real
        assert abs(val.real - want) < 1e-12
        assert val.real >= 2 * tp.h_minus - 1e-12

    def test_relaxation_to_gibbs(self, ising3, ising3_frame):
        tp = ThermalParams.from_betaJ(0.25)
        rep = build_generator(ising3, tp=tp, frame=ising3_frame)
        rng = np.random.default_rng(4)
        x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        x = x + x.conj().T
        prop = sla.expm(-40.0 * rep.dense())
        evolved = (prop @ x.reshape(-1, order="F")).reshape((8, 8), order="F")
        mean = np.sum(rep.rho * np.diagonal(x))
        assert np.abs(evolved - mean * np.eye(8)).max() < 1e-6

    def test_rate_table_override(self, ising3, ising3_frame):
        tp = ThermalParams.from_betaJ(0.25)
        rates = {(alpha, w): 1.0 for alpha in range(9)
                 for w in (-4.0, 0.0, 4.0)}
        rep = build_generator(ising3, tp=tp, frame=ising3_frame, rates=rates)
        assert all(abs(c.rate - 1.0) < 1e-15 for c in rep.components)
        # kernel structure unchanged by rescaling the rates
        dense = rep.dense()
        evals = np.sort(np.linalg.eigvals(dense).real)
        assert int(np.sum(np.abs(evals) < 1e-10 * evals[-1])) == 1

    def test_negative_rate_rejected(self, ising3, ising3_frame):
        with pytest.raises(GeneratorError):
            build_generator(ising3, tp=ThermalParams.from_betaJ(0.1),
                            frame=ising3_frame, rates={(0, 4.0): -1.0})


class TestToricGenerator:
    def test_structural_residuals(self, toric2, toric2_frame):
        tp = ThermalParams.from_betaJ(0.25)
        rep = build_generator(toric2, tp=tp, frame=toric2_frame)
        assert detailed_balance_residual(rep, samples=20) < 1e-12
        assert stationarity_residual(rep, samples=20) < 1e-12
        assert dissipativity_identity_check(rep, 0, samples=5) < 1e-12
        for alpha in (0, 9):
            assert reconstruction_residual(rep, alpha) < 1e-10
