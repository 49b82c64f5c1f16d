"""Do-operator surgery on lag windows and interventional covariance."""

from __future__ import annotations

import numpy as np
import pytest

from varcausal.errors import BadInputError
from varcausal.interventions import (
    InterventionSpec,
    interventional_cov,
    marginal_variances,
    simulate_intervened,
)
from varcausal.process import VarModel, exact_autocov
from varcausal.risk import ModelPair, mc_causal_risk
from varcausal.seeding import derive_rng

from conftest import random_stable_model


class TestSpecValidation:
    def test_round_trip(self):
        spec = InterventionSpec.fixed(2, (1,), (0.7,))
        back = InterventionSpec.from_json(spec.to_json())
        assert back == spec

    def test_round_trip_with_lags(self):
        spec = InterventionSpec.averaged(1, (1,), time_lags=(0, 1, 2))
        assert InterventionSpec.from_json(spec.to_json()) == spec

    def test_shift_round_trip(self):
        spec = InterventionSpec.shift(3, 1.5)
        assert InterventionSpec.from_json(spec.to_json()) == spec

    def test_averaged_refuses_values(self):
        with pytest.raises(BadInputError):
            InterventionSpec(kind="atomicAveraged", omega=1, components=(1,), values=(1.0,))

    def test_fixed_needs_values(self):
        with pytest.raises(BadInputError):
            InterventionSpec(kind="atomicFixed", omega=1, components=(1,))

    def test_duplicate_components_rejected(self):
        with pytest.raises(BadInputError):
            InterventionSpec.averaged(1, (1, 1))

    def test_unknown_kind_rejected(self):
        with pytest.raises(BadInputError):
            InterventionSpec(kind="soft", omega=1, components=(1,))


class TestInterventionalCov:
    def test_averaged_zeroes_off_diagonals_keeps_diagonal(self):
        cov = exact_autocov(VarModel.from_coeffs([0.5, 0.3]), 2)
        gamma = interventional_cov(cov, InterventionSpec.averaged(1)).dense
        assert gamma[0, 1] == 0.0 and gamma[1, 0] == 0.0
        assert gamma[0, 0] == cov.dense[0, 0]
        assert gamma[1, 1] == cov.dense[1, 1]

    def test_all_slots_leaves_pure_diagonal(self, rng):
        model = random_stable_model(rng, 4)
        cov = exact_autocov(model, 4)
        spec = InterventionSpec.averaged(1, (1,), time_lags=(0, 1, 2, 3))
        gamma = interventional_cov(cov, spec).dense
        np.testing.assert_allclose(gamma, np.diag(np.diag(cov.dense)))

    def test_fixed_zero_value_squashes_diagonal(self):
        cov = exact_autocov(VarModel.from_coeffs([0.5, 0.3]), 2)
        averaged = interventional_cov(cov, InterventionSpec.averaged(1)).dense
        pinned = interventional_cov(cov, InterventionSpec.fixed(1, (1,), (0.0,))).dense
        averaged[0, 0] = 0.0
        np.testing.assert_allclose(pinned, averaged)

    def test_every_component_of_a_vector_process(self):
        rng = np.random.default_rng(12)
        model = random_stable_model(rng, 2, d=2)
        cov = exact_autocov(model, 2)
        gamma = interventional_cov(cov, InterventionSpec.averaged(1, (1, 2))).dense
        # Intervened rows keep only their diagonal; the untouched block stays.
        for i in (0, 1):
            row = gamma[i].copy()
            row[i] = 0.0
            assert np.all(row == 0.0)
            assert gamma[i, i] == cov.dense[i, i]
        np.testing.assert_array_equal(gamma[2:, 2:], cov.dense[2:, 2:])

    def test_untouched_entries_match_base(self, rng):
        model = random_stable_model(rng, 5)
        cov = exact_autocov(model, 5)
        gamma = interventional_cov(cov, InterventionSpec.averaged(1)).dense
        np.testing.assert_array_equal(gamma[1:, 1:], cov.dense[1:, 1:])

    def test_psd_and_eigenvalue_envelope(self, rng):
        # The averaged interventional matrix stays PSD, its top eigenvalue at
        # most doubles, and its bottom eigenvalue does not decrease.
        for _ in range(1000):
            p = int(rng.integers(1, 8))
            model = random_stable_model(rng, p)
            cov = exact_autocov(model, p)
            gamma = interventional_cov(cov, InterventionSpec.averaged(1)).dense
            ev_sigma = np.linalg.eigvalsh(cov.dense)
            ev_gamma = np.linalg.eigvalsh(gamma)
            gamma0 = cov.dense[0, 0]
            assert ev_gamma.min() > -1e-10 * gamma0
            assert ev_gamma.max() <= 2 * ev_sigma.max() * (1 + 1e-9)
            assert ev_gamma.min() >= ev_sigma.min() * (1 - 1e-9) - 1e-12 * gamma0

    def test_out_of_range_component(self):
        cov = exact_autocov(VarModel.from_coeffs([0.5]), 1)
        with pytest.raises(BadInputError):
            interventional_cov(cov, InterventionSpec.averaged(1, (2,)))

    def test_relative_shift_has_no_covariance_form(self):
        cov = exact_autocov(VarModel.from_coeffs([0.5]), 1)
        with pytest.raises(BadInputError):
            interventional_cov(cov, InterventionSpec.shift(1, 1.0))


class TestSimulateIntervened:
    def test_null_shift_equals_observational(self):
        model = VarModel.from_coeffs([0.5, 0.3])
        history = np.array([[0.4], [-0.2]])
        spec = InterventionSpec.shift(2, 0.0)
        win_a, x_a = simulate_intervened(model, spec, history, 99)
        np.testing.assert_array_equal(win_a, history)
        # Observational forward run with the same seed and window.
        rng = derive_rng(99)
        state = history[::-1].copy()
        for _ in range(2):
            new = rng.standard_normal(1) * 1.0
            new = new + model.coeffs[0] @ state[-1] + model.coeffs[1] @ state[-2]
            state = np.vstack([state, new])
        np.testing.assert_allclose(x_a, state[-1])

    def test_atomic_fixed_single_parent(self):
        # One-step-ahead after pinning the only parent: mean a * x*, var sigma^2.
        model = VarModel.from_coeffs([0.7])
        spec = InterventionSpec.fixed(1, (1,), (2.0,))
        draws = np.array(
            [
                simulate_intervened(model, spec, np.array([[5.0]]), seed)[1][0]
                for seed in range(4000)
            ]
        )
        assert draws.mean() == pytest.approx(0.7 * 2.0, abs=0.06)
        assert draws.var() == pytest.approx(1.0, rel=0.08)

    def test_atomic_averaged_true_model_noise_floor(self):
        # Predicting with the true coefficients under the averaged intervention
        # leaves exactly the one-step noise.
        model = VarModel.from_coeffs([0.5, 0.3])
        pair = ModelPair(truth=model, fitted=model)
        mc, se = mc_causal_risk(pair, InterventionSpec.averaged(1), 200_000, 17)
        assert mc == pytest.approx(1.0, abs=4 * se)

    def test_history_too_short(self):
        model = VarModel.from_coeffs([0.5, 0.3])
        with pytest.raises(BadInputError):
            simulate_intervened(model, InterventionSpec.averaged(1), np.array([[1.0]]), 0)

    def test_monte_carlo_window_covariance_matches_analytic(self, rng):
        # Second moment of surgically modified exact windows reproduces the
        # interventional covariance entrywise.
        from varcausal.risk import _draw_windows, _surgery

        model = random_stable_model(np.random.default_rng(3), 3)
        cov = exact_autocov(model, 3)
        spec = InterventionSpec.averaged(1)
        gen = derive_rng(123)
        windows = _draw_windows(model, 3, 1_000_000, gen)
        cut = _surgery(windows, spec, 1, np.sqrt(marginal_variances(model)), gen)
        emp = cut.T @ cut / len(cut)
        gamma = interventional_cov(cov, spec).dense
        gamma0 = cov.dense[0, 0]
        assert np.abs(emp - gamma).max() < 0.02 * gamma0

    def test_vectorized_path_matches_reference_loop(self):
        # empirical_causal_risk agrees with looping simulate_intervened over
        # the same windows when both use the true model as the predictor.
        from varcausal.risk import empirical_causal_risk
        from varcausal.process import simulate

        model = VarModel.from_coeffs([0.6, -0.2])
        path = simulate(model, 30_000, 21)
        spec = InterventionSpec.averaged(1)
        fast = empirical_causal_risk(model, model, path, spec, 30_000, 5)
        assert fast == pytest.approx(1.0, rel=0.05)
