import numpy as np
import pandas as pd
import pytest
from conftest import survey_sample
from hypothesis import given, settings
from hypothesis import strategies as st

from abmode import ConfigError, DataError, DomainError, MarginTargets, ipf_fit, margin_report, weighted_proportions
from abmode.weighting import (NHTS_BIKEABLE_MARGINS, InfeasibleTargetError, category_key, nhts_bikeable_targets,
                              read_weights, respondent_frame, write_weights)

TWO_BY_TWO = pd.DataFrame({"a": ["A", "A", "B", "B"], "x": ["X", "Y", "X", "Y"]})
TWO_BY_TWO_TARGETS = MarginTargets({"a": {"A": 0.75, "B": 0.25}, "x": {"X": 0.5, "Y": 0.5}})


class TestTargets:
    def test_must_sum_to_one(self):
        with pytest.raises(DomainError, match="sum"):
            MarginTargets({"mode": NHTS_BIKEABLE_MARGINS["mode"]})

    def test_normalized(self):
        t = nhts_bikeable_targets()
        for cats in t.margins.values():
            assert sum(cats.values()) == pytest.approx(1.0, abs=1e-12)
        assert t.margins["mode"]["bike"] == pytest.approx(0.785 / 0.998)

    @pytest.mark.parametrize("margins", [{"a": {}}, {"a": {"x": -0.5, "y": 1.5}}])
    def test_invalid(self, margins):
        with pytest.raises(DomainError):
            MarginTargets(margins)

    def test_category_keys_coincide(self):
        assert category_key(1) == category_key(1.0) == category_key("1") == category_key(True) == "1"
        assert category_key(" Car ") == "car"

    def test_read_ini(self, tmp_path):
        path = tmp_path / "t.ini"
        path.write_text("[options]\nnormalize = true\n[mode]\ncar = 2\nwalk = 2\n", encoding="utf-8")
        assert MarginTargets.read_ini(path).margins == {"mode": {"car": 0.5, "walk": 0.5}}

    @pytest.mark.parametrize("text", ["[mode]\ncar = lots\n", "[mode]\ncar = 0.3\n", "", "junk"])
    def test_read_ini_invalid(self, tmp_path, text):
        path = tmp_path / "t.ini"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(ConfigError):
            MarginTargets.read_ini(path)


class TestIPF:
    def test_two_by_two_exact(self):
        res = ipf_fit(TWO_BY_TWO, TWO_BY_TWO_TARGETS)
        assert res.converged
        np.testing.assert_array_equal(res.weights, [1.5, 1.5, 0.5, 0.5])

    def test_two_by_two_deviation_shrinks(self):
        before = max(margin_report(TWO_BY_TWO, np.ones(4), TWO_BY_TWO_TARGETS).values())
        res = ipf_fit(TWO_BY_TWO, TWO_BY_TWO_TARGETS)
        assert before == pytest.approx(0.25)
        assert res.history[0] < before and res.history[-1] == 0.0

    def test_fixed_point(self):
        targets = MarginTargets({"a": {"A": 0.5, "B": 0.5}, "x": {"X": 0.5, "Y": 0.5}})
        res = ipf_fit(TWO_BY_TWO, targets)
        assert res.iterations == 1
        np.testing.assert_array_equal(res.weights, np.ones(4))

    def test_reference_margins(self):
        sample = survey_sample()
        targets = nhts_bikeable_targets()
        res = ipf_fit(sample, targets, tol=1e-6, max_iter=200)
        assert res.converged and res.iterations <= 200
        for var, cats in targets.margins.items():
            props = weighted_proportions(sample, res.weights, var)
            for cat, value in cats.items():
                assert props[cat] == pytest.approx(value, abs=1e-6)
        assert all(d < 1e-6 for d in margin_report(sample, res.weights, targets).values())

    def test_deviation_history_decreases(self):
        res = ipf_fit(survey_sample(seed=3), nhts_bikeable_targets(), tol=1e-10)
        assert all(b <= a for a, b in zip(res.history, res.history[1:]))

    def test_weights_positive_mean_one(self):
        res = ipf_fit(survey_sample(), nhts_bikeable_targets())
        assert np.all(res.weights > 0)
        assert res.weights.mean() == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=15)
    @given(st.permutations(list(NHTS_BIKEABLE_MARGINS)))
    def test_cycle_order_irrelevant(self, order):
        sample = survey_sample(300, seed=5)
        targets = nhts_bikeable_targets().reordered(order)
        res = ipf_fit(sample, targets)
        assert res.converged
        assert max(margin_report(sample, res.weights, targets).values()) < 1e-6

    def test_relabel_invariance(self):
        sample = survey_sample(300, seed=6)
        targets = nhts_bikeable_targets()
        renamed = {"car": "auto", "walk": "foot", "bike": "cycle", "transit": "bus", "taxi": "cab"}
        sample2 = sample.assign(mode=sample["mode"].map(renamed))
        margins2 = dict(targets.margins, mode={renamed[k]: v for k, v in targets.margins["mode"].items()})
        a = ipf_fit(sample, targets).weights
        b = ipf_fit(sample2, MarginTargets(margins2)).weights
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_infeasible_target_named(self):
        sample = survey_sample(200).query("mode != 'taxi'")
        with pytest.raises(InfeasibleTargetError) as info:
            ipf_fit(sample, nhts_bikeable_targets())
        assert (info.value.variable, info.value.category) == ("mode", "taxi")

    def test_zero_target_for_empty_category_ok(self):
        sample = TWO_BY_TWO.assign(a=["A", "A", "A", "A"])
        res = ipf_fit(sample, MarginTargets({"a": {"A": 1.0, "B": 0.0}}))
        assert res.converged

    def test_nonconvergence_flagged(self):
        res = ipf_fit(survey_sample(), nhts_bikeable_targets(), max_iter=1)
        assert not res.converged and res.iterations == 1

    def test_trimming_caps_weights(self):
        full = ipf_fit(survey_sample(), nhts_bikeable_targets()).weights
        trimmed = ipf_fit(survey_sample(), nhts_bikeable_targets(), trim_quantile=0.9).weights
        assert trimmed.max() / trimmed.min() < full.max() / full.min()
        assert trimmed.mean() == pytest.approx(1.0)

    def test_unknown_category(self):
        sample = TWO_BY_TWO.assign(x=["X", "Y", "Z", "Y"])
        with pytest.raises(DataError, match="z"):
            ipf_fit(sample, TWO_BY_TWO_TARGETS)

    def test_missing_variable(self):
        with pytest.raises(DataError, match="x"):
            ipf_fit(TWO_BY_TWO.drop(columns="x"), TWO_BY_TWO_TARGETS)

    @pytest.mark.parametrize("kwargs", [{"tol": 0}, {"max_iter": 0}, {"base_weights": [1, 1, -1, 1]}])
    def test_bad_arguments(self, kwargs):
        with pytest.raises(DomainError):
            ipf_fit(TWO_BY_TWO, TWO_BY_TWO_TARGETS, **kwargs)


class TestProportions:
    def test_unit_weights(self):
        assert weighted_proportions(TWO_BY_TWO, np.ones(4), "a") == {"a": 0.5, "b": 0.5}

    def test_single_respondent(self):
        assert weighted_proportions(TWO_BY_TWO, [0, 0, 1, 0], "x") == {"x": 1.0, "y": 0.0}

    @given(st.lists(st.floats(0.01, 100), min_size=4, max_size=4))
    def test_sum_to_one_and_scale_free(self, w):
        p = weighted_proportions(TWO_BY_TWO, w, "a")
        q = weighted_proportions(TWO_BY_TWO, np.array(w) * 7.0, "a")
        assert sum(p.values()) == pytest.approx(1.0)
        assert p == pytest.approx(q)

    def test_unit_weight_report_is_raw_gap(self):
        report = margin_report(TWO_BY_TWO, np.ones(4), TWO_BY_TWO_TARGETS)
        assert report == {"a": pytest.approx(0.25), "x": 0.0}


def test_respondent_frame_and_weight_io(mnl_data, tmp_path):
    frame = respondent_frame(mnl_data)
    assert len(frame) == mnl_data.n_individuals
    assert set(frame["purpose"]) <= {"work", "leisure", "errands"}
    path = tmp_path / "w.csv"
    write_weights(path, frame["individual_id"], np.linspace(0.5, 1.5, len(frame)))
    back = read_weights(path)
    assert back[str(frame["individual_id"].iloc[-1])] == pytest.approx(1.5)


def test_read_weights_rejects_negative(tmp_path):
    path = tmp_path / "w.csv"
    path.write_text("individual_id,weight\na,1\nb,-2\n", encoding="utf-8")
    with pytest.raises(DataError, match="weight"):
        read_weights(path)
