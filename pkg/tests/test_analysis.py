import math

import numpy as np
import pytest
import sympy as sp

from l1equiv.analysis import (
    a0_matrix,
    charpoly_a0,
    convergence_check,
    correspondence_violations,
    critical_gain,
    equivalence_check,
    fragility_demo,
    fragility_l1ac_pair,
    high_gain_limit_check,
    linf_condition_norm,
    polynomial_agreement,
    report_text,
    stability_sweep,
)
from l1equiv.errors import BracketError, InvalidInputError, NotApplicableError
from l1equiv.models import L1Config, PlantParams, ReferenceModel, theta_from
from l1equiv.poly_linalg import Polynomial, Stability, poly_roots_oracle, routh_hurwitz
from l1equiv.simulator import InitialConditions, IntegratorConfig, ScriptedEstimate, Verdict, run_closed_loop

from .conftest import random_hurwitz_coeffs


def sympy_charpoly(M):
    s = sp.symbols("s")
    Ms = sp.Matrix([[sp.nsimplify(v) for v in row] for row in M])
    det = (s * sp.eye(Ms.shape[0]) - Ms).det(method="laplace")
    return [float(c) for c in sp.Poly(sp.expand(det), s).all_coeffs()[::-1]]


class TestCharpoly:
    def test_scalar_marginal(self):
        plant, ref = PlantParams([-1.0]), ReferenceModel([1.0])
        lhs, rhs = charpoly_a0(plant, ref, theta_from(plant, ref), 1.0)
        np.testing.assert_allclose(lhs.coeffs, [1, 0, 1], atol=1e-14)
        np.testing.assert_array_equal(rhs.coeffs, [1, 0, 1])
        assert routh_hurwitz(rhs).tag is Stability.MARGINAL

    def test_second_order_against_cofactor_expansion(self):
        plant, ref = PlantParams([2.0, 3.0]), ReferenceModel([1.0, 2.0])
        theta = theta_from(plant, ref)
        expected = sympy_charpoly(a0_matrix(plant, theta, 1.0))
        assert expected == [1.0, 4.0, 4.0, 1.0]
        lhs, rhs = charpoly_a0(plant, ref, theta, 1.0)
        np.testing.assert_allclose(lhs.coeffs, expected, rtol=1e-13)
        np.testing.assert_array_equal(rhs.coeffs, expected)

    def test_zero_gain(self):
        plant, ref = PlantParams([2.0, 3.0]), ReferenceModel([1.0, 2.0])
        lhs, rhs = charpoly_a0(plant, ref, theta_from(plant, ref), 0.0)
        np.testing.assert_allclose(lhs.coeffs, [0, 2, 3, 1], atol=1e-14)
        np.testing.assert_array_equal(rhs.coeffs, [0, 2, 3, 1])

    def test_a0_block_structure(self):
        plant = PlantParams([2.0, 3.0])
        M = a0_matrix(plant, np.array([1.0, 1.0]), 2.5)
        np.testing.assert_array_equal(M, [[0, 1, 0], [-2, -3, 1], [2.5, 2.5, -2.5]])

    def test_random_instances(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 7))
            plant, ref = PlantParams(rng.uniform(-5, 5, n)), ReferenceModel(random_hurwitz_coeffs(rng, n))
            lhs, rhs = charpoly_a0(plant, ref, theta_from(plant, ref), rng.uniform(0.01, 10))
            assert polynomial_agreement(lhs, rhs) <= 1e-9

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            charpoly_a0(PlantParams([1.0, 2.0]), ReferenceModel([1.0]), np.zeros(2), 1.0)

    def test_agreement_metric(self):
        assert polynomial_agreement(Polynomial([1, 2]), Polynomial([1, 2])) == 0.0
        assert polynomial_agreement(Polynomial([1.0, 200.0]), Polynomial([1.0, 100.0])) == 1.0


class TestEquivalence:
    def test_frozen_zero_estimate(self):
        plant, ref = PlantParams([2.0, -1.0]), ReferenceModel([1.0, 2.0])
        init = InitialConditions([1.0, -0.5], 0.2, None, [0.0, 0.0])
        rep = equivalence_check(plant, ref, L1Config(4.0, 10.0), init, IntegratorConfig(1e-4, 10, 10), "frozen")
        assert rep.passed and rep.max_u_gap <= 1e-6 and rep.v0_consistent and not rep.truncated

    def test_true_estimator_high_adaptation_rate(self):
        plant, ref = PlantParams([2.0, -1.0]), ReferenceModel([1.0, 2.0])
        rep = equivalence_check(plant, ref, L1Config(5.0, 100.0), None, IntegratorConfig(1e-4, 10, 10), "true")
        assert rep.max_u_gap <= 1e-5

    def test_scripted_estimate(self):
        plant, ref = PlantParams([-1.0, 0.5, 2.0]), ReferenceModel([1.0, 3.0, 3.0])
        script = ScriptedEstimate([0.5, -1.0, 2.0], omega=3.0)
        rep = equivalence_check(plant, ref, L1Config(8.0, 1.0), None, IntegratorConfig(1e-4, 10, 10), "scripted", script)
        assert rep.passed

    def test_wrong_initial_integrator_state_is_detected(self):
        plant, ref = PlantParams([2.0, -1.0]), ReferenceModel([1.0, 2.0])
        x0, u0, k = np.array([1.0, 0.0]), 0.0, 4.0
        init = InitialConditions(x0, u0, v0=u0 + k * x0[-1] + 1.0)
        rep = equivalence_check(plant, ref, L1Config(k, 10.0), init, IntegratorConfig(1e-4, 10, 10))
        assert not rep.passed and not rep.v0_consistent
        assert rep.max_u_gap > 0.1

    def test_gap_is_round_off_and_does_not_scale_with_step(self):
        # the PI loop is a linear change of variables of the adaptive loop and RK4
        # commutes with linear maps, so the residual gap is floating-point noise
        plant, ref = PlantParams([2.0, -1.0]), ReferenceModel([1.0, 2.0])
        cfg = L1Config(5.0, 20.0)
        gaps = [
            equivalence_check(plant, ref, cfg, None, IntegratorConfig(dt, 10, int(1e-2 / dt))).max_u_gap
            for dt in (1e-3, 5e-4)
        ]
        assert max(gaps) <= 1e-12
        assert gaps[1] > gaps[0] / 8

    def test_diverging_pair_is_truncated(self, scalar_unstable):
        rep = equivalence_check(*scalar_unstable, L1Config(0.5, 10.0), None, IntegratorConfig(1e-3, 100, 10), "frozen")
        assert rep.truncated and rep.horizon < 100

    def test_report_text(self):
        plant, ref = PlantParams([2.0, -1.0]), ReferenceModel([1.0, 2.0])
        rep = equivalence_check(plant, ref, L1Config(4.0, 10.0), None, IntegratorConfig(1e-3, 1, 10))
        text = report_text(rep)
        assert "max_u_gap = " in text and "passed = True" in text


class TestConvergence:
    def test_long_horizon_tail(self, scalar_unstable):
        run = run_closed_loop("l1ac", *scalar_unstable, L1Config(2.0, 10.0), None, IntegratorConfig(1e-3, 200, 10))
        rep = convergence_check(run)
        assert rep.bounded and rep.v_nonincreasing
        assert rep.tail_sup <= 1e-3

    def test_matched_plant_with_predictor_on_state(self):
        plant, ref = PlantParams([1.0, 2.0]), ReferenceModel([1.0, 2.0])
        x0 = np.array([1.0, -1.0])
        init = InitialConditions(x0, 0.0, x0, [0.0, 0.0])
        run = run_closed_loop("l1ac", plant, ref, L1Config(3.0, 10.0), init, IntegratorConfig(1e-3, 20, 10))
        assert np.max(np.abs(run.trace.ttx)) <= 1e-12
        assert convergence_check(run).tail_sup <= 1e-12

    def test_diverged_run(self, scalar_unstable):
        run = run_closed_loop("l1ac", *scalar_unstable, L1Config(0.5, 10.0), None, IntegratorConfig(1e-3, 100, 10))
        assert not run.completed
        with pytest.raises(NotApplicableError):
            convergence_check(run)

    def test_pi_run_has_no_estimator(self, scalar_unstable):
        run = run_closed_loop("pi", *scalar_unstable, L1Config(2.0, 10.0), None, IntegratorConfig(1e-3, 1))
        with pytest.raises(NotApplicableError):
            convergence_check(run)


class TestCriticalGain:
    def test_scalar(self, scalar_unstable):
        assert critical_gain(*scalar_unstable, 0.1, 10.0, 1e-9) == pytest.approx(1.0, abs=1e-9)

    def test_stable_plant_has_no_bracket(self):
        with pytest.raises(BracketError):
            critical_gain(PlantParams([1.0]), ReferenceModel([1.0]), 0.01, 10.0)

    def test_reversed_bracket(self, scalar_unstable):
        with pytest.raises(BracketError):
            critical_gain(*scalar_unstable, 2.0, 5.0)

    def test_second_order_against_grid_scan(self):
        plant, ref = PlantParams([-1.0, -1.0]), ReferenceModel([1.0, 2.0])
        kc = critical_gain(plant, ref, 0.1, 10.0, 1e-9)
        assert kc == pytest.approx(1 + math.sqrt(2) / 2, abs=1e-8)
        # independent oracle: the first grid gain whose roots are all in the open left half-plane
        grid = np.arange(1.0, 2.5, 1e-4)
        stable = [
            max(r.real for r in poly_roots_oracle(Polynomial([0, *plant.a, 1]) + k * Polynomial([*ref.a_m, 1]))) < 0
            for k in grid
        ]
        first = grid[int(np.argmax(stable))]
        assert abs(first - kc) <= 1e-4

    def test_verdict_flip_brackets_result(self, scalar_unstable):
        from l1equiv.analysis import loop_polynomial

        tol = 1e-9
        kc = critical_gain(*scalar_unstable, 0.1, 10.0, tol)
        assert routh_hurwitz(loop_polynomial(*scalar_unstable, kc - tol)).tag is not Stability.HURWITZ
        assert routh_hurwitz(loop_polynomial(*scalar_unstable, kc + tol)).tag is Stability.HURWITZ


def scalar_norm_closed_form():
    # h(t) = 2/3 e^-t - 8/3 e^-4t changes sign once at t* = ln(4)/3
    F = lambda t: -2 / 3 * math.exp(-t) + 2 / 3 * math.exp(-4 * t)  # antiderivative, F(0) = 0, F(inf) = 0
    ts = math.log(4) / 3
    return abs(F(ts)) + abs(F(ts))


class TestInducedNorm:
    def test_zero_parameter(self):
        assert linf_condition_norm(ReferenceModel([1.0, 2.0]), np.zeros(2), 3.0) == 0.0

    def test_scalar_closed_form(self):
        expected = scalar_norm_closed_form()
        assert expected == pytest.approx(0.6299605, abs=1e-7)
        assert abs(linf_condition_norm(ReferenceModel([1.0]), np.array([-2.0]), 4.0) - expected) <= 1e-4

    def test_homogeneous(self):
        ref = ReferenceModel([1.0, 2.0])
        theta = np.array([0.7, -1.3])
        base = linf_condition_norm(ref, theta, 3.0)
        for c in (-2.0, 0.5, 3.0):
            assert linf_condition_norm(ref, c * theta, 3.0) == pytest.approx(abs(c) * base, rel=1e-10)

    def test_decreases_with_filter_gain(self):
        ref = ReferenceModel([1.0])
        vals = [linf_condition_norm(ref, np.array([-2.0]), k) for k in (0.5, 2.0, 8.0, 32.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_requires_hurwitz_reference(self):
        with pytest.raises(InvalidInputError):
            linf_condition_norm(np.array([-1.0]), np.array([1.0]), 2.0)


class TestSweep:
    def test_scalar_grid(self, scalar_unstable):
        res = stability_sweep(*scalar_unstable, [0.5, 1.0, 2.0], [1.0, 10.0], IntegratorConfig(1e-3, 60, 100))
        assert res.pi == [Stability.UNSTABLE, Stability.MARGINAL, Stability.HURWITZ]
        assert res.l1[0] == [Verdict.DIVERGED, Verdict.DIVERGED]
        assert res.l1[2] == [Verdict.COMPLETED, Verdict.COMPLETED]
        violations, _ = correspondence_violations(res)
        assert violations == []
        lines = res.to_csv().splitlines()
        assert lines[0] == "k,pi,1,10"
        assert lines[1] == "0.5,U,D,D" and lines[2] == "1,M,C,C" and lines[3] == "2,H,C,C"

    def test_matched_plant_completes_everywhere(self):
        plant, ref = PlantParams([1.0]), ReferenceModel([1.0])
        res = stability_sweep(plant, ref, [0.2, 2.0], [1.0, 50.0], IntegratorConfig(1e-3, 20, 100))
        assert all(v is Verdict.COMPLETED for row in res.l1 for v in row)

    def test_parallel_matches_serial(self, scalar_unstable):
        cfg = IntegratorConfig(1e-3, 10, 100)
        a = stability_sweep(*scalar_unstable, [0.5, 2.0], [1.0, 10.0], cfg, workers=1)
        b = stability_sweep(*scalar_unstable, [0.5, 2.0], [1.0, 10.0], cfg, workers=2)
        assert a.to_csv() == b.to_csv()

    def test_empty_grid(self, scalar_unstable):
        with pytest.raises(InvalidInputError):
            stability_sweep(*scalar_unstable, [], [1.0], IntegratorConfig(1e-3, 1))


class TestHighGain:
    def test_tail_gap_decreases(self, scalar_unstable):
        entries = high_gain_limit_check(*scalar_unstable, 1.0, [5.0, 50.0, 500.0], IntegratorConfig(1e-3, 5, 1))
        assert all(e.bounded for e in entries)
        sups = [e.tail_sup for e in entries]
        assert sups[0] > sups[1] > sups[2]

    def test_step_size_guard(self, scalar_unstable):
        with pytest.raises(InvalidInputError, match="stability limit"):
            high_gain_limit_check(*scalar_unstable, 1.0, [500.0], IntegratorConfig(1e-2, 5))


class TestFragility:
    def test_on_manifold_decays(self):
        a, b = fragility_demo(0.0, IntegratorConfig(1e-3, 20, 100))
        assert a.completed and b.completed
        np.testing.assert_allclose(a.trace.y[-1], np.array([1.0, 0.5]) * math.exp(-20), atol=1e-9)
        assert np.max(np.abs(a.trace.y[-1])) < 1e-6

    @pytest.mark.parametrize("eps", [1e-6, 1.0])
    def test_blowup_time(self, eps):
        _, b = fragility_demo(eps, IntegratorConfig(1e-3, 40, 100))
        assert b.verdict is Verdict.DIVERGED
        assert b.diverged_at == pytest.approx(math.log(1e6 / eps), abs=0.5)

    def test_rejects_off_manifold_start(self):
        with pytest.raises(InvalidInputError):
            fragility_demo(0.0, IntegratorConfig(1e-3, 1), on_manifold=(1.0, 1.0))

    def test_negative_epsilon(self):
        with pytest.raises(InvalidInputError):
            fragility_demo(-1.0, IntegratorConfig(1e-3, 1))

    def test_adaptive_pair(self, scalar_unstable):
        matched, offset = fragility_l1ac_pair(*scalar_unstable, L1Config(2.0, 10.0), 0.1, IntegratorConfig(1e-3, 5, 10))
        np.testing.assert_array_equal(matched.trace.x_hat[0], matched.trace.x[0])
        np.testing.assert_allclose(offset.trace.x_hat[0] - offset.trace.x[0], [0.1])
