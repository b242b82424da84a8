"""
lambda_model のテスト
"""

import logging

import numpy as np
import pytest
from pydantic import ValidationError

from action_framework import action, build_action_model
from errors import DivergentTransferError, InvalidInputError
from lambda_model import (
    HALF_PI,
    BoundedConstraint,
    LambdaParams,
    PAPConstraint,
    analytic_optimal_time,
    applicability_warning,
    closed_form,
    couplings,
    divergent_angle,
    eigenstates,
    energy_for_time,
    general_prefactor,
    gmax,
    lambda_family,
    lambda_params,
    minimal_loss,
    optimal_loss,
    optimal_time_equal_rates,
    optimal_trajectory,
    pap_prefactor,
    potential_theta,
    smooth_boundaries,
    transfer_time,
    weak_coupling_prefactor,
)

SQRT2_PI_QUARTER = np.pi * np.sqrt(2.0) / 4.0


def lambda_action(p: LambdaParams, path) -> float:
    model = build_action_model(lambda_family(p), [couplings(th, p) for th in np.linspace(0.05, 1.5, 16)])
    return action(model, path)


class TestLambdaParams:
    def test_derived_quantities(self, dephased):
        assert dephased.kappa_tot == pytest.approx(0.1)
        assert dephased.gamma_phi_tot == pytest.approx(2e-3)
        assert dephased.gamma_tot == pytest.approx(6.5e-3)
        assert dephased.r1 + dephased.r2 == pytest.approx(4.5 / 6.5)
        assert dephased.lam == pytest.approx(-0.5e-3 / 6.5e-3)
        assert dephased.v_max == pytest.approx(-2e-3)
        assert dephased.theta_bar == pytest.approx(np.pi / 4)

    def test_bounded_constraint(self, bounded_dephased):
        assert not bounded_dephased.is_pap
        assert bounded_dephased.g_weakest == 1.0
        assert bounded_dephased.theta_bar == pytest.approx(np.arctan(0.5))

    def test_rejects_negative_rate(self, pap):
        with pytest.raises(ValidationError):
            LambdaParams(gamma1_R=-1e-3, constraint=pap)

    def test_rejects_unknown_field(self, pap):
        with pytest.raises(ValidationError):
            LambdaParams(gamma3_R=1e-3, constraint=pap)

    def test_constraint_from_dict(self):
        p = LambdaParams.model_validate({"kappa_R": 0.1, "constraint": {"kind": "bounded", "g1_max": 1, "g2_max": 2}})
        assert isinstance(p.constraint, BoundedConstraint)

    def test_swap_is_involution(self, bounded_dephased):
        """2回入れ替えると元に戻る"""
        swapped = bounded_dephased.swapped()
        assert swapped.gamma1_R == bounded_dephased.gamma2_R
        assert swapped.g1_max == bounded_dephased.g2_max
        assert swapped.swapped() == bounded_dephased


class TestEigenstates:
    @pytest.mark.parametrize("theta", [0.0, 0.3, np.pi / 4, 1.2, HALF_PI])
    def test_eigenvalues(self, pap, theta):
        """暗状態は固有値0、|E±⟩ は ±G"""
        p = LambdaParams(constraint=pap)
        h = lambda_family(p).hamiltonian(couplings(theta, p))
        states = eigenstates(theta)
        np.testing.assert_allclose(h @ states.dark, 0.0, atol=1e-15)
        np.testing.assert_allclose(h @ states.plus, states.plus, atol=1e-15)
        np.testing.assert_allclose(h @ states.minus, -states.minus, atol=1e-15)
        np.testing.assert_allclose(h @ states.ground, 0.0, atol=1e-15)

    def test_orthonormal(self):
        basis = np.column_stack(eigenstates(0.7))
        np.testing.assert_allclose(basis.conj().T @ basis, np.eye(4), atol=1e-15)

    def test_boundary_states(self):
        """θ=0 で |e,g,0⟩、θ=π/2 で −|g,e,0⟩"""
        np.testing.assert_allclose(eigenstates(0.0).dark, [1, 0, 0, 0], atol=1e-15)
        np.testing.assert_allclose(eigenstates(HALF_PI).dark, [0, -1, 0, 0], atol=1e-15)

    def test_out_of_range(self):
        with pytest.raises(InvalidInputError):
            eigenstates(2.0)


class TestGmax:
    def test_pap_is_constant(self, dephased):
        np.testing.assert_array_equal(gmax(np.linspace(0, HALF_PI, 5), dephased), 1.0)

    def test_bounded_kink(self, bounded_dephased):
        """θ̄ で両側の上限が一致する"""
        p = bounded_dephased
        assert gmax(p.theta_bar, p) == pytest.approx(np.sqrt(5.0))
        assert gmax(0.0, p) == pytest.approx(2.0)
        assert gmax(HALF_PI, p) == pytest.approx(1.0)

    def test_matches_couplings_norm(self, rng, bounded_dephased):
        for theta in rng.uniform(0.0, HALF_PI, size=20):
            assert np.linalg.norm(couplings(theta, bounded_dephased)) == pytest.approx(gmax(theta, bounded_dephased))


class TestTransferTime:
    def test_symmetric_pap(self, symmetric_pap):
        """等レート PAP では V が一定なので t_f = (π/2)√(κ/γ)/G"""
        assert transfer_time(0.0, symmetric_pap) == pytest.approx(HALF_PI * np.sqrt(40.0), rel=1e-10)
        assert transfer_time(0.0, symmetric_pap) == pytest.approx(9.9346, abs=1e-4)

    def test_equal_rates_bounded(self):
        p = LambdaParams(
            kappa_R=0.1, gamma1_R=2.5e-3, gamma2_R=2.5e-3, constraint=BoundedConstraint(g1_max=1.0, g2_max=1.0)
        )
        assert optimal_time_equal_rates(p) == pytest.approx(np.sqrt(80.0), rel=1e-12)
        assert transfer_time(0.0, p) == pytest.approx(np.sqrt(80.0), rel=1e-9)

    def test_decreasing_in_energy(self, dephased):
        times = [transfer_time(e, dephased) for e in (-1.5e-3, -1e-3, 0.0, 1e-3, 1e-2)]
        assert all(a > b for a, b in zip(times, times[1:]))

    def test_divergent(self, dephased):
        """ℰ ≤ V_max で発散し、発散角は緩和の遅い側の端点"""
        with pytest.raises(DivergentTransferError) as exc:
            transfer_time(-3e-3, dephased)
        assert exc.value.theta == pytest.approx(HALF_PI)
        assert exc.value.exit_code == 3
        assert divergent_angle(-3e-3, dephased.swapped()) == 0.0
        assert divergent_angle(0.0, dephased) is None

    def test_requires_kappa(self, pap):
        with pytest.raises(InvalidInputError):
            transfer_time(0.0, LambdaParams(gamma1_R=1e-3, constraint=pap))

    def test_energy_inversion(self, dephased):
        for energy in (-1e-3, 0.0, 2e-3):
            t_f = transfer_time(energy, dephased)
            assert energy_for_time(t_f, dephased) == pytest.approx(energy, abs=1e-10)

    def test_energy_for_time_rejects_nonpositive(self, dephased):
        with pytest.raises(InvalidInputError):
            energy_for_time(0.0, dephased)


class TestLoss:
    def test_symmetric_pap_minimum(self, symmetric_pap):
        assert minimal_loss(symmetric_pap) == pytest.approx(0.049672, abs=1e-6)
        assert minimal_loss(symmetric_pap) == pytest.approx(closed_form(symmetric_pap), rel=1e-10)

    def test_bounded_equal_rates(self):
        p = LambdaParams(
            kappa_R=0.1, gamma1_R=2.5e-3, gamma2_R=2.5e-3, constraint=BoundedConstraint(g1_max=1.0, g2_max=2.0)
        )
        assert minimal_loss(p) == pytest.approx(0.0353553, abs=1e-7)

    def test_zero_rates(self, zero_rates):
        assert minimal_loss(zero_rates) == 0.0
        assert closed_form(zero_rates) == 0.0

    def test_optimal_loss_at_zero_energy(self, dephased):
        assert optimal_loss(0.0, dephased) == minimal_loss(dephased)

    def test_optimal_loss_above_minimum(self, dephased):
        floor = minimal_loss(dephased)
        for energy in (-1.5e-3, -5e-4, 5e-4, 5e-3):
            assert optimal_loss(energy, dephased) > floor

    def test_stationary_at_zero_energy(self, dephased):
        """ℰ=0 の転送時間で ΔF_opt(t_f) が停留する"""
        t_star = transfer_time(0.0, dephased)
        h = 1e-5 * t_star

        def loss_at(t):
            return optimal_loss(energy_for_time(t, dephased), dephased)

        slope = (loss_at(t_star + h) - loss_at(t_star - h)) / (2.0 * h)
        assert abs(slope) < 1e-4

    def test_slope_is_minus_energy(self, dephased):
        """dΔF_opt/dt_f = −ℰ"""
        t = 1.5 * transfer_time(0.0, dephased)
        h = 1e-4 * t

        def loss_at(t_f):
            return optimal_loss(energy_for_time(t_f, dephased), dephased)

        slope = (loss_at(t + h) - loss_at(t - h)) / (2.0 * h)
        assert slope == pytest.approx(-energy_for_time(t, dephased), rel=1e-3)

    def test_swap_invariance(self, bounded_dephased):
        p = bounded_dephased
        assert minimal_loss(p.swapped()) == pytest.approx(minimal_loss(p), rel=1e-10)
        assert transfer_time(0.0, p.swapped()) == pytest.approx(transfer_time(0.0, p), rel=1e-10)

    def test_generic_has_no_closed_form(self, dephased):
        assert closed_form(dephased) is None


class TestPrefactors:
    def test_pap_constants(self):
        """c(½,½) = π√2/4、c(0,0) = c(1,0) = c(0,1) = 1"""
        assert pap_prefactor(0.5, 0.5) == pytest.approx(SQRT2_PI_QUARTER, abs=1e-6)
        for r1, r2 in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)):
            assert pap_prefactor(r1, r2) == pytest.approx(1.0, abs=1e-6)

    def test_pap_range(self):
        grid = np.linspace(0.0, 1.0, 21)
        for r1 in grid:
            for r2 in grid:
                if r1 + r2 > 1.0 + 1e-12:
                    continue
                c = pap_prefactor(r1, r2)
                assert 1.0 - 1e-9 <= c <= SQRT2_PI_QUARTER + 1e-9

    def test_swap_symmetry(self, rng):
        """c(r₁,r₂,θ̄) = c(r₂,r₁,π/2−θ̄)"""
        for _ in range(100):
            r1, r2 = rng.uniform(0.0, 1.0, size=2)
            if r1 + r2 > 1.0:
                r1, r2 = 1.0 - r1, 1.0 - r2
            theta_bar = rng.uniform(0.01, HALF_PI - 0.01)
            assert abs(general_prefactor(r1, r2, theta_bar) - general_prefactor(r2, r1, HALF_PI - theta_bar)) <= 1e-10

    def test_weak_coupling_range(self):
        grid = np.linspace(0.0, 1.0, 11)
        for theta_bar in (0.01, np.pi / 8, np.pi / 4):
            for r1 in grid:
                for r2 in grid:
                    if r1 + r2 > 1.0 + 1e-12:
                        continue
                    c1 = weak_coupling_prefactor(r1, r2, theta_bar)
                    assert 0.5 - 1e-9 <= c1 <= 1.0 + 1e-9

    def test_weak_coupling_endpoints(self):
        assert weak_coupling_prefactor(1.0, 0.0, 1e-3) == pytest.approx(0.5, abs=1e-4)
        assert weak_coupling_prefactor(0.5, 0.5, np.pi / 4) == pytest.approx(1.0, abs=1e-4)

    def test_pap_route(self, dephased):
        """PAP: ΔF_min = 2c(r₁,r₂)√(κ_totγ_tot)/G"""
        expected = 2.0 * pap_prefactor(dephased.r1, dephased.r2) * np.sqrt(dephased.kappa_tot * dephased.gamma_tot)
        assert minimal_loss(dephased) == pytest.approx(expected, rel=1e-9)

    def test_bounded_routes(self, bounded_dephased):
        p = bounded_dephased
        root = np.sqrt(p.kappa_tot * p.gamma_tot)
        via_c = 2.0 * general_prefactor(p.r1, p.r2, p.theta_bar) * root / np.hypot(p.g1_max, p.g2_max)
        via_c1 = 2.0 * weak_coupling_prefactor(p.r1, p.r2, p.theta_bar) * root / p.g_weakest
        assert minimal_loss(p) == pytest.approx(via_c, rel=1e-9)
        assert minimal_loss(p) == pytest.approx(via_c1, rel=1e-9)

    def test_invalid_arguments(self):
        with pytest.raises(InvalidInputError):
            pap_prefactor(0.8, 0.5)
        with pytest.raises(InvalidInputError):
            general_prefactor(0.5, 0.5, HALF_PI)
        with pytest.raises(InvalidInputError):
            weak_coupling_prefactor(0.5, 0.5, 1.0)


class TestClosedForms:
    def test_examples(self):
        only_first = LambdaParams(kappa_R=0.1, gamma1_R=2.5e-3, constraint=BoundedConstraint(g1_max=1.0, g2_max=2.0))
        dephasing = LambdaParams(
            kappa_R=0.1, gamma1_phi=1e-3, gamma2_phi=1e-3, constraint=BoundedConstraint(g1_max=1.0, g2_max=1.0)
        )
        assert closed_form(only_first) == pytest.approx(0.019477, abs=1e-6)
        assert closed_form(dephasing) == pytest.approx(0.024379, abs=1e-6)

    @pytest.mark.parametrize("kind", ["equal", "first_only", "dephasing_only"])
    @pytest.mark.parametrize("bounded", [False, True])
    def test_against_quadrature(self, rng, kind, bounded):
        """3つの極限の閉形式が求積と一致する"""
        for _ in range(20):
            kappa = rng.uniform(0.01, 0.2)
            gamma = rng.uniform(1e-4, 5e-3)
            if bounded:
                constraint = BoundedConstraint(g1_max=rng.uniform(0.5, 2.0), g2_max=rng.uniform(0.5, 2.0))
            else:
                constraint = PAPConstraint(g_max=rng.uniform(0.5, 2.0))
            rates = {
                "equal": {"gamma1_R": gamma, "gamma2_R": gamma},
                "first_only": {"gamma1_R": gamma},
                "dephasing_only": {"gamma1_phi": 0.3 * gamma, "gamma2_phi": 0.7 * gamma},
            }[kind]
            p = LambdaParams(kappa_R=kappa, constraint=constraint, **rates)
            assert closed_form(p) == pytest.approx(minimal_loss(p), rel=1e-8)

    def test_divergent_but_finite_loss(self):
        """γ₂ᴿ = γ^φ = 0 では最適時間が発散しても ΔF_min は有限"""
        p = LambdaParams(kappa_R=0.1, gamma1_R=2.5e-3, constraint=BoundedConstraint(g1_max=1.0, g2_max=2.0))
        with pytest.raises(DivergentTransferError) as exc:
            transfer_time(0.0, p)
        assert exc.value.theta == pytest.approx(HALF_PI)
        assert np.isfinite(minimal_loss(p))
        assert minimal_loss(p) == pytest.approx(closed_form(p), rel=1e-8)

    def test_equal_rates_time_requires_limit(self, dephased, bounded_dephased):
        with pytest.raises(InvalidInputError):
            optimal_time_equal_rates(dephased)
        with pytest.raises(InvalidInputError):
            optimal_time_equal_rates(bounded_dephased)


class TestAnalyticOptimalTime:
    def test_finite_case(self, dephased):
        assert analytic_optimal_time(dephased) == transfer_time(0.0, dephased)

    def test_divergent_case(self):
        """発散する場合は ΔF_opt が ΔF_min を 0.1% 上回る時間を返す"""
        p = LambdaParams(kappa_R=0.1, gamma1_R=2.5e-3, constraint=PAPConstraint(g_max=1.0))
        t_f = analytic_optimal_time(p)
        assert np.isfinite(t_f) and t_f > 0
        assert optimal_loss(energy_for_time(t_f, p), p) == pytest.approx(1.001 * minimal_loss(p), rel=1e-6)


class TestOptimalTrajectory:
    def test_energy_conserved(self, bounded_dephased):
        sol = optimal_trajectory(0.0, bounded_dephased)
        np.testing.assert_allclose(sol.conserved_energy(), 0.0, atol=1e-12)
        assert sol.theta[0] == 0.0
        assert sol.theta[-1] == pytest.approx(HALF_PI)
        assert np.all(np.diff(sol.times) > 0)

    def test_duration_and_loss(self, dephased):
        sol = optimal_trajectory(1e-3, dephased)
        assert sol.t_f == pytest.approx(transfer_time(1e-3, dephased), rel=1e-9)
        assert sol.delta_F == pytest.approx(optimal_loss(1e-3, dephased), rel=1e-12)

    def test_action_of_path(self, dephased):
        """経路に沿った作用が ΔF_min に一致する"""
        sol = optimal_trajectory(0.0, dephased)
        assert lambda_action(dephased, sol.to_control_path()) == pytest.approx(minimal_loss(dephased), rel=1e-5)

    def test_divergent_energy(self, dephased):
        with pytest.raises(DivergentTransferError):
            optimal_trajectory(-5e-3, dephased)


class TestSmoothBoundaries:
    def test_boundary_values(self, dephased):
        sol = optimal_trajectory(0.0, dephased)
        path = smooth_boundaries(sol)
        assert path.boundary_smooth
        assert path.breakpoints == pytest.approx((sol.t_f / 200.0, sol.t_f - sol.t_f / 200.0))
        assert path.mixing_angle(0.0) == (0.0, 0.0)
        assert path.mixing_angle(sol.t_f)[0] == pytest.approx(HALF_PI, abs=1e-12)
        np.testing.assert_allclose(path.derivative(0.0), 0.0, atol=1e-15)
        np.testing.assert_allclose(path.derivative(sol.t_f), 0.0, atol=1e-15)

    def test_excess_loss(self, symmetric_pap):
        """平滑化による損失の増分は相対で約 Δt/(3t_f)"""
        sol = optimal_trajectory(0.0, symmetric_pap)
        floor = minimal_loss(symmetric_pap)
        excesses = []
        for delta in (0.02, 0.01):
            path = smooth_boundaries(sol, delta * sol.t_f)
            excess = lambda_action(symmetric_pap, path) / floor - 1.0
            assert 0.0 < excess <= 0.5 * delta
            assert excess == pytest.approx(delta / 3.0, rel=0.05)
            excesses.append(excess)
        assert excesses[1] < excesses[0]

    @pytest.mark.parametrize("delta_t", [0.0, -1.0, 6.0])
    def test_rejects_bad_width(self, symmetric_pap, delta_t):
        sol = optimal_trajectory(0.0, symmetric_pap)
        with pytest.raises(InvalidInputError):
            smooth_boundaries(sol, delta_t)


class TestHelpers:
    def test_potential_endpoints(self, dephased):
        assert potential_theta(0.0, dephased) == pytest.approx(-dephased.gamma1_R)
        assert potential_theta(HALF_PI, dephased) == pytest.approx(-dephased.gamma2_R)
        assert np.max(potential_theta(np.linspace(0, HALF_PI, 101), dephased)) <= dephased.v_max + 1e-15

    def test_applicability_warning(self, pap, dephased, caplog):
        with caplog.at_level(logging.WARNING):
            assert applicability_warning(LambdaParams(kappa_R=0.01, gamma1_R=2.5e-3, constraint=pap))
        assert "κ_tot" in caplog.text
        assert not applicability_warning(dephased)

    def test_lambda_params(self, lambda_base):
        assert lambda_params(lambda_base, 0.0).gamma1_R == pytest.approx(lambda_base.gamma2_R)
        assert lambda_params(lambda_base, 1.0).gamma1_R == 0.0
        assert lambda_params(lambda_base, 0.5).lam == pytest.approx(0.5)
        with pytest.raises(InvalidInputError):
            lambda_params(lambda_base, -1.0)
