import numpy as np
import pandas as pd
import pytest
from hypothesis import HealthCheck, settings

from abmode import (ChoiceData, ChoiceObservation, LatentDrawPlan, ModeId, Sociodemographics, TripAttributes,
                    reference_parameters)
from abmode.synthetic import synthetic_choice_data

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def fixture_trip():
    return TripAttributes.from_minutes(walk_min=40, bike_min=12, car_min=10, transit_min=25, abpt_bike_min=6,
                                       abpt_total_min=20, distance_mi=2.0, taxi_wait_min=5, pt_short_wait=1)


@pytest.fixture(scope="session")
def fixture_socio():
    return Sociodemographics(high_income=1, full_time=1, higher_ed=1, car_owner=1, white=1, older=1,
                             hot_summer=1, work_trip=1)


@pytest.fixture(scope="session")
def full_observation(fixture_trip, fixture_socio):
    return ChoiceObservation("fx", 1, fixture_trip, fixture_socio, ab_cost_rate=0.2, ab_wait_h=5 / 60,
                             availability=frozenset(ModeId), chosen=ModeId.CAR)


@pytest.fixture(scope="session")
def mnl_data():
    return synthetic_choice_data(300, reference_parameters("mnl"), seed=11)


@pytest.fixture(scope="session")
def mixl_data():
    return synthetic_choice_data(120, reference_parameters("mixl"), seed=12)


@pytest.fixture(scope="session")
def hcm_data():
    return synthetic_choice_data(120, reference_parameters("hcm"), seed=13)


@pytest.fixture(scope="session")
def small_plan():
    return LatentDrawPlan(n_draws=64, seed=3)


def one_individual(data: ChoiceData, index: int = 0) -> ChoiceData:
    return data.subset_individuals([data.ids[index]])


def survey_sample(n=600, seed=0):
    """Respondents with every raking variable drawn independently."""
    rng = np.random.default_rng(seed)
    frame = pd.DataFrame({
        "purpose": rng.choice(["work", "leisure", "errands"], n),
        "mode": rng.choice(["car", "walk", "bike", "transit", "taxi"], n, p=[0.5, 0.1, 0.1, 0.2, 0.1]),
    })
    for var in ("woman", "young", "older", "higher_ed", "low_income", "high_income"):
        frame[var] = (rng.random(n) < 0.4).astype(int)
    return frame


def perturbed(params, rng, scale=0.3):
    """Random point near ``params``: free values shifted, positive roles kept positive."""
    values = params.values.copy()
    for k, p in enumerate(params.parameters):
        if p.fixed:
            continue
        if p.role in ("sd", "scale", "threshold"):
            values[k] = p.value * np.exp(rng.uniform(-scale, scale))
        else:
            values[k] = p.value + rng.uniform(-scale, scale)
    return params.with_values(values)


@pytest.fixture(scope="session")
def mixl_quadrature_case():
    """One individual's panel under the mixed logit, with its quadrature likelihood."""
    from oracles import mixl_quadrature

    params = reference_parameters("mixl")
    data = one_individual(synthetic_choice_data(5, params, seed=1))
    return data, params, mixl_quadrature(data, params)


@pytest.fixture(scope="session")
def hcm_quadrature_case():
    from oracles import hcm_quadrature

    params = reference_parameters("hcm")
    data = one_individual(synthetic_choice_data(5, params, seed=2))
    return data, params, hcm_quadrature(data, params)
