"""
operator_core のテスト
"""

import numpy as np
import pytest

from conftest import random_density, random_hermitian
from errors import InvalidInputError
from lambda_model import couplings, eigenstates, lambda_family
from operator_core import (
    as_density_matrix,
    dagger,
    eigendecompose,
    expectation,
    lindblad_rhs,
    lindblad_superoperator,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# 基底 (|e⟩, |g⟩) で |e⟩ → |g⟩
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)


class TestEigendecompose:
    def test_diagonal(self):
        """対角行列は単位ベクトルを返す"""
        snap = eigendecompose(np.diag([0.0, 1.0]))
        np.testing.assert_allclose(snap.values, [0.0, 1.0])
        np.testing.assert_allclose(snap.vectors, np.eye(2), atol=1e-14)

    def test_pauli_x(self):
        snap = eigendecompose(SIGMA_X)
        np.testing.assert_allclose(snap.values, [-1.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(np.abs(snap.vectors), np.full((2, 2), 1 / np.sqrt(2)), atol=1e-14)

    @pytest.mark.parametrize("dim", [2, 3, 5, 8])
    def test_reconstruction(self, rng, dim):
        """V diag(E) V† が H を再構成し、V が正規直交"""
        h = random_hermitian(rng, dim)
        snap = eigendecompose(h)
        rebuilt = snap.vectors @ np.diag(snap.values) @ dagger(snap.vectors)
        assert np.linalg.norm(rebuilt - h) <= 1e-10 * np.linalg.norm(h, 2)
        np.testing.assert_allclose(dagger(snap.vectors) @ snap.vectors, np.eye(dim), atol=1e-10)
        assert np.all(np.diff(snap.values) >= 0)

    def test_gauge_continuity(self, rng):
        """隣接スナップショットとの重なりが実正"""
        h0, h1 = random_hermitian(rng, 4), random_hermitian(rng, 4)
        previous = eigendecompose(h0)
        for s in np.linspace(0.0, 1.0, 401)[1:]:
            snap = eigendecompose(h0 + s * h1, previous)
            overlaps = np.einsum("in,in->n", previous.vectors.conj(), snap.vectors)
            assert np.all(overlaps.real > 0)
            np.testing.assert_allclose(overlaps.imag, 0.0, atol=1e-12)
            previous = snap

    def test_lambda_block(self, symmetric_pap):
        """θ=π/4, G=1 の単一励起ブロックは (−1, 0, 1) で中央が暗状態"""
        fam = lambda_family(symmetric_pap)
        snap = fam.spectrum(couplings(np.pi / 4, symmetric_pap))
        np.testing.assert_allclose(snap.values, [-1.0, 0.0, 1.0], atol=1e-12)
        dark = fam.embed(snap.vectors[:, 1])
        assert abs(np.vdot(eigenstates(np.pi / 4).dark, dark)) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(InvalidInputError):
            eigendecompose(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_rejects_gauge_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            eigendecompose(SIGMA_Z, gauge_ref=eigendecompose(np.eye(3)))


class TestLindbladRhs:
    def test_coherent_only(self):
        plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
        rho = np.outer(plus, plus.conj())
        expected = -1j * (SIGMA_Z @ rho - rho @ SIGMA_Z)
        np.testing.assert_allclose(lindblad_rhs(rho, SIGMA_Z, []), expected, atol=1e-15)

    def test_decay_generator(self):
        """H=0, σ⁻ のみで d⟨e|ρ|e⟩/dt = −γ"""
        rho = np.diag([1.0, 0.0]).astype(complex)
        rate = lindblad_rhs(rho, np.zeros((2, 2)), [(SIGMA_MINUS, 0.3)])
        assert rate[0, 0].real == pytest.approx(-0.3)
        assert rate[1, 1].real == pytest.approx(0.3)

    def test_lambda_generator_traceless(self, rng, dephased):
        """Λ 系の生成子はトレースを保ちエルミート性を保つ"""
        fam = lambda_family(dephased)
        for _ in range(20):
            rho = random_density(rng, 4)
            h = fam.hamiltonian(rng.uniform(0.0, 1.0, size=2))
            out = lindblad_rhs(rho, h, fam.channels)
            assert abs(np.trace(out)) <= 1e-12
            np.testing.assert_allclose(out, dagger(out), atol=1e-12)

    def test_superoperator_matches_matrix_form(self, rng, dephased):
        """行優先ベクトル化した生成子が行列形と一致する"""
        fam = lambda_family(dephased)
        rho = random_density(rng, 4)
        h = fam.hamiltonian([0.4, 0.9])
        superop = lindblad_superoperator(h, fam.channels)
        np.testing.assert_allclose(
            superop @ rho.reshape(-1), lindblad_rhs(rho, h, fam.channels).reshape(-1), atol=1e-14
        )

    def test_rejects_negative_rate(self):
        with pytest.raises(InvalidInputError):
            lindblad_rhs(np.eye(2) / 2, SIGMA_Z, [(SIGMA_MINUS, -1.0)])

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            lindblad_rhs(np.eye(3) / 3, SIGMA_Z, [])
        with pytest.raises(InvalidInputError):
            lindblad_rhs(np.eye(2) / 2, SIGMA_Z, [(np.eye(3), 1.0)])


class TestExpectation:
    def test_pure_state(self):
        assert expectation(SIGMA_Z, np.array([1.0, 0.0])) == 1.0

    def test_identity_trace(self, rng):
        rho = random_density(rng, 3)
        assert expectation(np.eye(3), rho) == pytest.approx(1.0)

    def test_dark_state_has_no_photon(self):
        """暗状態はバスの光子を含まない"""
        number = np.diag([0.0, 0.0, 1.0, 0.0])
        for theta in np.linspace(0.0, np.pi / 2, 11):
            assert expectation(number, eigenstates(theta).dark) == pytest.approx(0.0, abs=1e-15)

    def test_hermitian_is_real(self, rng):
        value = expectation(random_hermitian(rng, 4), random_density(rng, 4))
        assert value.imag == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            expectation(SIGMA_Z, np.ones(3))


class TestDensityMatrix:
    def test_vector_becomes_projector(self):
        rho = as_density_matrix(np.array([0.0, 1.0]))
        np.testing.assert_allclose(rho, np.diag([0.0, 1.0]))

    def test_rejects_bad_trace(self):
        with pytest.raises(InvalidInputError):
            as_density_matrix(np.eye(2))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(InvalidInputError):
            as_density_matrix(np.diag([1.5, -0.5]))

    def test_rejects_wrong_dimension(self):
        with pytest.raises(InvalidInputError):
            as_density_matrix(np.eye(2) / 2, dim=3)
