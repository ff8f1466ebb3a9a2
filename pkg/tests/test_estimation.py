import json

import numpy as np
import pytest
from conftest import perturbed

from abmode import (ChoiceData, EstimationError, EstimationResult, LatentDrawPlan, estimate, fit_statistics,
                    reference_parameters)
from abmode.bikeability import BikeabilitySample, synthetic_bikeability_sample
from abmode.estimation import EstimationConfig, analytic_gradient, numeric_gradient
from abmode.likelihood import make_problem
from abmode.params import bikeability_parameters, mnl_parameters
from abmode.synthetic import recovery_parameters, synthetic_choice_data


def relative_gap(analytic, numeric):
    return np.max(np.abs(analytic - numeric)) / max(1.0, np.max(np.abs(numeric)))


@pytest.fixture(scope="module")
def binary_sample():
    return synthetic_bikeability_sample(150, reference_parameters("binary"), seed=4)


def gradient_cases(kind, mnl_data, mixl_data, hcm_data, binary_sample):
    plan = LatentDrawPlan(40, 1)
    if kind == "mnl":
        return make_problem("mnl", mnl_data, reference_parameters("mnl")), reference_parameters("mnl")
    if kind == "mixl":
        return make_problem("mixl", mixl_data, reference_parameters("mixl"), plan), reference_parameters("mixl")
    if kind == "hcm":
        return make_problem("hcm", hcm_data, reference_parameters("hcm"), plan), reference_parameters("hcm")
    return binary_sample.problem(reference_parameters("binary")), reference_parameters("binary")


@pytest.mark.parametrize("kind", ["mnl", "mixl", "hcm", "binary"])
def test_gradient_matches_finite_differences(kind, mnl_data, mixl_data, hcm_data, binary_sample):
    problem, center = gradient_cases(kind, mnl_data, mixl_data, hcm_data, binary_sample)
    rng = np.random.default_rng(2024)
    for _ in range(3):
        point = perturbed(center, rng)
        gap = relative_gap(analytic_gradient(problem, point), numeric_gradient(problem.loglik, point))
        assert gap < 1e-4


class TestNumericGradient:
    def test_quadratic(self):
        p = bikeability_parameters({n: 1.0 for n in bikeability_parameters()})
        g = numeric_gradient(lambda q: -float(np.sum(q.values ** 2)), p)
        np.testing.assert_allclose(g, -2.0, rtol=1e-8)

    def test_constant(self):
        p = bikeability_parameters()
        np.testing.assert_allclose(numeric_gradient(lambda q: 3.0, p), 0.0, atol=0)

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            numeric_gradient(lambda q: 0.0, bikeability_parameters(), h=0)


class TestFitStatistics:
    def test_published_example(self):
        s = fit_statistics(18, -3513.523, -4884.430, 4446)
        assert s["AIC"] == pytest.approx(7063.046, abs=1e-3)
        assert s["BIC"] == pytest.approx(7178.241, abs=1e-2)
        assert s["rho_bar_sq"] == pytest.approx(0.277, abs=1e-3)

    def test_definitions(self):
        s = fit_statistics(3, -10.0, -20.0, 100)
        assert s["AIC"] == 26.0
        assert s["BIC"] == pytest.approx(3 * np.log(100) + 20.0)
        assert s["rho_bar_sq"] == pytest.approx(1 - 13 / 20)


@pytest.fixture(scope="module")
def mnl_fit(mnl_data):
    return estimate("mnl", mnl_data)


class TestEstimate:
    def test_converges_and_improves(self, mnl_fit, mnl_data):
        from abmode import mnl_loglik

        assert mnl_fit.converged, mnl_fit.message
        assert mnl_fit.gradient_norm < 1e-5
        assert mnl_fit.ll_final >= mnl_loglik(mnl_data, reference_parameters("mnl")) - 1e-9
        assert mnl_fit.K == 18 and mnl_fit.n_obs == len(mnl_data)
        assert all(np.isfinite(v) and v > 0 for v in mnl_fit.robust_se.values())

    def test_reported_statistics_consistent(self, mnl_fit):
        r = mnl_fit
        assert r.aic == pytest.approx(2 * r.K - 2 * r.ll_final, abs=1e-9)
        assert r.bic == pytest.approx(r.K * np.log(r.n_obs) - 2 * r.ll_final, abs=1e-9)
        assert r.rho_bar_sq == pytest.approx(1 - (r.ll_final - r.K) / r.ll0, abs=1e-12)

    def test_json_round_trip(self, mnl_fit, tmp_path):
        path = tmp_path / "r.json"
        mnl_fit.to_json(path)
        back = EstimationResult.from_json(path)
        assert back.params.names == mnl_fit.params.names
        np.testing.assert_array_equal(back.params.values, mnl_fit.params.values)
        assert back.aic == mnl_fit.aic and back.converged == mnl_fit.converged
        assert json.loads(path.read_text())["K"] == 18

    def test_summary(self, mnl_fit):
        text = mnl_fit.summary()
        assert "B_cost" in text and "AIC" in text and "fixed" in text

    def test_perfect_separation_not_converged(self, mnl_data):
        frame = mnl_data.to_frame()
        frame["chosen"] = 5
        always_ab = ChoiceData.from_frame(frame)
        result = estimate("mnl", always_ab)
        assert not result.converged
        assert result.message

    def test_nonfinite_start_rejected(self, mnl_data):
        start = mnl_parameters().updated(B_cost=-1e6, ASC_ab=1e6)
        with pytest.raises(EstimationError, match="individual"):
            estimate("mnl", mnl_data, params=start)

    def test_iteration_cap_flags_non_convergence(self, mnl_data):
        result = estimate("mnl", mnl_data, config=EstimationConfig(max_iter=2, newton_steps=0))
        assert not result.converged

    def test_unknown_kind(self, mnl_data):
        from abmode import SpecificationError

        with pytest.raises(SpecificationError):
            estimate("probit", mnl_data)

    def test_fixed_parameters_stay_fixed(self):
        data = synthetic_choice_data(200, recovery_parameters(), seed=3)
        result = estimate("mnl", data, params=recovery_parameters().updated(**{n: 0.0 for n in
                                                                              recovery_parameters().free_names}))
        assert result.K == 12
        assert result.params["B_work"] == 0.0 and result.params.param("B_work").fixed


class TestBinary:
    def test_recovery_within_three_se(self):
        truth = reference_parameters("binary")
        sample = synthetic_bikeability_sample(1000, truth, seed=8)
        result = estimate("binary", sample)
        assert result.converged
        z = [(result.params[n] - truth[n]) / result.robust_se[n] for n in truth.free_names]
        assert max(abs(v) for v in z) < 3.0

    def test_scale_consistency(self, binary_sample):
        base = estimate("binary", binary_sample)
        stretched = BikeabilitySample(binary_sample.trip_id, binary_sample.mode, binary_sample.time_h * 4.0,
                                      binary_sample.purpose, binary_sample.flags, binary_sample.label,
                                      binary_sample.groups)
        scaled = estimate("binary", stretched)
        assert scaled.ll_final == pytest.approx(base.ll_final, abs=1e-6)
        assert scaled.params["B_time"] * 4.0 == pytest.approx(base.params["B_time"], rel=1e-4)

    def test_clusters_follow_groups(self, binary_sample):
        assert estimate("binary", binary_sample).n_individuals == 150
