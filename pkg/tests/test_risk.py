"""Analytic risks, their Monte-Carlo oracles, and the exact gap formulas."""

from __future__ import annotations

import numpy as np
import pytest

from varcausal.errors import BadInputError
from varcausal.interventions import InterventionSpec
from varcausal.process import VarModel, exact_autocov, simulate
from varcausal.risk import (
    ModelPair,
    causal_risk,
    empirical_causal_risk,
    empirical_stat_risk,
    mc_causal_risk,
    mc_risk_gap,
    mc_stat_risk,
    noise_floor,
    relative_shift_gap,
    risk_difference,
    risk_quotient,
    risk_report,
    stat_risk,
)

from conftest import random_stable_model, random_stable_pair


class TestNoiseFloor:
    def test_one_step_is_noise_variance(self, rng):
        model = random_stable_model(rng, 3)
        assert noise_floor(model, 1)[0] == pytest.approx(model.noise_variance)

    def test_ar1_two_step(self):
        assert noise_floor(VarModel.from_coeffs([0.5]), 2)[0] == pytest.approx(1.25)

    def test_limit_is_marginal_variance(self):
        model = VarModel.from_coeffs([0.5])
        gamma0 = exact_autocov(model, 1).dense[0, 0]
        assert noise_floor(model, 200)[0] == pytest.approx(gamma0, rel=1e-10)

    def test_nondecreasing_in_horizon(self, rng):
        model = random_stable_model(rng, 4)
        floors = [noise_floor(model, w)[0] for w in range(1, 12)]
        assert all(b >= a - 1e-12 for a, b in zip(floors, floors[1:]))


class TestStatRisk:
    def test_perfect_model_has_only_noise(self, rng):
        model = random_stable_model(rng, 3)
        pair = ModelPair(truth=model, fitted=model)
        for w in (1, 2, 5):
            assert stat_risk(pair, w)[0] == pytest.approx(noise_floor(model, w)[0], abs=1e-12)

    def test_ar1_worked_example(self):
        pair = ModelPair(
            truth=VarModel.from_coeffs([0.5]), fitted=VarModel.from_coeffs([0.6])
        )
        gamma0 = 1.0 / (1 - 0.25)
        assert stat_risk(pair, 1)[0] == pytest.approx(0.01 * gamma0 + 1.0, rel=1e-12)

    def test_matches_monte_carlo(self, rng):
        for trial in range(3):
            pair = random_stable_pair(rng, 3, 3)
            s = float(stat_risk(pair, 2).sum())
            mc, se = mc_stat_risk(pair, 2, 400_000, 1000 + trial)
            assert abs(mc - s) < 4 * se


class TestCausalRisk:
    def test_perfect_model_has_only_noise(self, rng):
        model = random_stable_model(rng, 2)
        pair = ModelPair(truth=model, fitted=model)
        spec = InterventionSpec.averaged(1)
        assert causal_risk(pair, spec)[0] == pytest.approx(noise_floor(model, 1)[0], abs=1e-12)

    def test_first_order_models_have_no_gap(self, rng):
        for _ in range(20):
            pair = random_stable_pair(rng, 1, 1)
            spec = InterventionSpec.averaged(1)
            g = causal_risk(pair, spec)[0]
            s = stat_risk(pair, 1)[0]
            assert g == pytest.approx(s, abs=1e-12)

    def test_matches_monte_carlo(self, rng):
        for trial in range(3):
            pair = random_stable_pair(rng, 3, 3)
            spec = InterventionSpec.averaged(2)
            g = float(causal_risk(pair, spec).sum())
            mc, se = mc_causal_risk(pair, spec, 400_000, 2000 + trial)
            assert abs(mc - g) < 4 * se

    def test_vector_process_monte_carlo(self):
        rng = np.random.default_rng(8)
        truth = random_stable_model(rng, 2, d=2)
        fitted = random_stable_model(rng, 2, d=2)
        pair = ModelPair(truth=truth, fitted=fitted)
        spec = InterventionSpec.averaged(1, components=(2,))
        g = float(causal_risk(pair, spec).sum())
        mc, se = mc_causal_risk(pair, spec, 400_000, 4)
        assert abs(mc - g) < 4 * se


class TestRiskDifference:
    def test_first_order_gap_is_zero(self, rng):
        pair = random_stable_pair(rng, 1, 1)
        diff = risk_difference(pair, InterventionSpec.averaged(1))
        assert diff.quad_form == pytest.approx(0.0, abs=1e-14)

    def test_perfect_fit_gap_is_zero(self, rng):
        model = random_stable_model(rng, 4)
        pair = ModelPair(truth=model, fitted=model)
        diff = risk_difference(pair, InterventionSpec.averaged(3))
        assert diff.quad_form == 0.0 and diff.cross_term == 0.0

    def test_worked_two_lag_example(self):
        pair = ModelPair(
            truth=VarModel.from_coeffs([0.5, 0.3]),
            fitted=VarModel.from_coeffs([0.6, 0.2]),
        )
        gamma1 = exact_autocov(pair.truth, 2).dense[0, 1]
        diff = risk_difference(pair, InterventionSpec.averaged(1))
        assert diff.quad_form == pytest.approx(0.02 * gamma1, rel=1e-10)
        assert diff.cross_term == pytest.approx(0.02 * gamma1, rel=1e-10)

    def test_two_routes_agree_on_random_pairs(self, rng):
        for _ in range(200):
            p, q = int(rng.integers(1, 8)), int(rng.integers(1, 8))
            w = int(rng.integers(1, 6))
            pair = random_stable_pair(rng, p, q)
            diff = risk_difference(pair, InterventionSpec.averaged(w))
            assert diff.quad_form == pytest.approx(
                diff.cross_term, rel=1e-10, abs=1e-12
            )

    def test_gap_decays_geometrically_in_horizon(self, rng):
        # Stable pairs: the gap at horizon 20 is far below its one-step value.
        # The gap scales like max(delta, delta_hat)^(2 omega), so the 1e-3
        # factor is only guaranteed once the moduli stay below 0.8
        # (0.9^38 is already 2e-2).
        found = 0
        while found < 10:
            pair = random_stable_pair(rng, 3, 3)
            from varcausal.companion import build_companion, spectrum

            if spectrum(build_companion(pair.truth.coeffs)).max_modulus > 0.8:
                continue
            if spectrum(build_companion(pair.fitted.coeffs)).max_modulus > 0.8:
                continue
            gap1 = risk_difference(pair, InterventionSpec.averaged(1)).quad_form
            if gap1 < 1e-8:
                continue
            found += 1
            gap20 = risk_difference(pair, InterventionSpec.averaged(20)).quad_form
            assert gap20 < 1e-3 * gap1

    def test_matches_paired_monte_carlo(self, rng):
        pair = ModelPair(
            truth=VarModel.from_coeffs([0.5, 0.3]),
            fitted=VarModel.from_coeffs([0.6, 0.2]),
        )
        spec = InterventionSpec.averaged(1)
        gap, se = mc_risk_gap(pair, spec, 400_000, 31)
        analytic = float(
            causal_risk(pair, spec).sum() - stat_risk(pair, 1).sum()
        )
        assert abs(gap - analytic) < 3 * se


class TestRiskQuotient:
    def test_perfect_fit_quotient_is_one(self, rng):
        model = random_stable_model(rng, 3)
        pair = ModelPair(truth=model, fitted=model)
        assert risk_quotient(pair) == pytest.approx(1.0)

    def test_worked_example(self):
        truth = VarModel.from_coeffs([0.5, 0.3])
        u = np.array([1.0, -1.0]) / np.sqrt(2)
        fitted = VarModel.from_coeffs(truth.scalar_coeffs + u)
        gamma0 = exact_autocov(truth, 1).dense[0, 0]
        s2 = 1.0 / gamma0
        expect = (1 + s2) / (2 / 7 + s2)
        assert risk_quotient(ModelPair(truth=truth, fitted=fitted)) == pytest.approx(expect)

    def test_diverges_as_window_degenerates(self):
        # Stronger lag-1 correlation -> smaller lam_min -> larger quotient for
        # a perturbation along the small eigenvector.
        quotients = []
        for gamma in (0.5, 0.9, 0.99):
            truth = VarModel.from_coeffs([gamma, 0.0])
            u = np.array([1.0, -1.0]) / np.sqrt(2)
            fitted = VarModel.from_coeffs(truth.scalar_coeffs + u)
            quotients.append(risk_quotient(ModelPair(truth=truth, fitted=fitted)))
        assert quotients[0] < quotients[1] < quotients[2]


class TestRelativeShift:
    def test_zero_shift_zero_gap(self, rng):
        pair = random_stable_pair(rng, 2, 2)
        assert relative_shift_gap(pair, 1, 0.0) == 0.0

    def test_perfect_fit_zero_gap(self, rng):
        model = random_stable_model(rng, 2)
        pair = ModelPair(truth=model, fitted=model)
        assert relative_shift_gap(pair, 3, 2.0) == 0.0

    def test_worked_example(self):
        pair = ModelPair(
            truth=VarModel.from_coeffs([0.5]), fitted=VarModel.from_coeffs([0.6])
        )
        assert relative_shift_gap(pair, 2, 2.0) == pytest.approx(0.0484)

    def test_scales_quadratically_and_stays_nonnegative(self, rng):
        pair = random_stable_pair(rng, 3, 2)
        g1 = relative_shift_gap(pair, 2, 1.0)
        g2 = relative_shift_gap(pair, 2, 2.0)
        assert g1 >= 0.0 and g2 == pytest.approx(4 * g1, rel=1e-12)


class TestEmpiricalStatRisk:
    def test_true_model_one_step(self):
        model = VarModel.from_coeffs([0.7, -0.2])
        path = simulate(model, 300_000, 12)
        pair_risk = empirical_stat_risk(model, path, 1)
        assert pair_risk == pytest.approx(1.0, rel=0.02)

    def test_white_noise_zero_model_is_second_moment(self):
        truth = VarModel.from_coeffs([0.0])
        path = simulate(truth, 5000, 3)
        fitted = VarModel.from_coeffs([0.0])
        got = empirical_stat_risk(fitted, path, 1)
        assert got == pytest.approx(float((path.scalar[1:] ** 2).mean()), abs=1e-15)

    def test_matches_analytic_on_long_paths(self, rng):
        for trial in range(2):
            pair = random_stable_pair(np.random.default_rng(50 + trial), 3, 3)
            s = float(stat_risk(pair, 2).sum())
            path = simulate(pair.truth, 1_000_000, trial)
            emp = empirical_stat_risk(pair.fitted, path, 2)
            assert emp == pytest.approx(s, rel=0.01)

    def test_truncation_caps_errors(self):
        model = VarModel.from_coeffs([0.5])
        path = simulate(model, 5000, 4)
        full = empirical_stat_risk(model, path, 1)
        capped = empirical_stat_risk(model, path, 1, truncate=0.1)
        assert capped <= min(full, 0.1) + 1e-12

    def test_path_too_short(self):
        model = VarModel.from_coeffs([0.5, 0.1])
        path = simulate(model, 3, 0, burn_in=10)
        with pytest.raises(BadInputError):
            empirical_stat_risk(model, path, 1)


class TestEmpiricalCausalRisk:
    def test_true_model_one_step(self):
        model = VarModel.from_coeffs([0.5, 0.3])
        path = simulate(model, 100_000, 9)
        got = empirical_causal_risk(model, model, path, InterventionSpec.averaged(1), 100_000, 1)
        assert got == pytest.approx(1.0, rel=0.02)

    def test_converges_to_analytic(self, rng):
        pair = random_stable_pair(np.random.default_rng(60), 3, 3)
        spec = InterventionSpec.averaged(1)
        g = float(causal_risk(pair, spec).sum())
        path = simulate(pair.truth, 1_000_000, 2)
        emp = empirical_causal_risk(pair.truth, pair.fitted, path, spec, 1_000_000, 3)
        assert emp == pytest.approx(g, rel=0.01)

    def test_relative_shift_gap_recovered(self):
        pair = ModelPair(
            truth=VarModel.from_coeffs([0.5]), fitted=VarModel.from_coeffs([0.7])
        )
        spec = InterventionSpec.shift(2, 2.0)
        gap, se = mc_risk_gap(pair, spec, 300_000, 77)
        assert abs(gap - relative_shift_gap(pair, 2, 2.0)) < 3 * se


class TestRiskReport:
    def test_json_fields(self):
        pair = ModelPair(
            truth=VarModel.from_coeffs([0.5, 0.3]),
            fitted=VarModel.from_coeffs([0.6, 0.2]),
        )
        report = risk_report(pair, InterventionSpec.averaged(1))
        import json

        payload = json.loads(report.to_json())
        for key in ("s_omega", "g_do", "g_avg", "diff", "noise_floor", "quotient",
                    "method", "omega", "component", "spec"):
            assert key in payload
        assert payload["method"] == "analytic"
        assert payload["g_do"] is None
        assert payload["s_omega"] >= payload["noise_floor"] - 1e-12
        assert payload["g_avg"] >= payload["noise_floor"] - 1e-12

    def test_fixed_spec_reports_pinned_risk(self):
        pair = ModelPair(
            truth=VarModel.from_coeffs([0.5, 0.3]),
            fitted=VarModel.from_coeffs([0.6, 0.2]),
        )
        report = risk_report(pair, InterventionSpec.fixed(1, (1,), (0.0,)))
        assert report.g_do is not None
        assert report.g_do <= report.g_avg  # pinning at zero removes variance
