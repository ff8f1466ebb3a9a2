"""Synthetic respondents, trips and choices used as fixtures and for recovery studies."""
from __future__ import annotations

import numpy as np

from .choice_core import (AB_MODES, LV_MASK, N_MODES, PURPOSE_FLAGS, SOCIO_FLAGS, UTILITY_PARAMS,
                          ChoiceData, CostBook, ModeId)
from .likelihood import mnl_prob, thresholds
from .params import INDICATORS, STRUCTURAL_NAMES, STRUCTURAL_VARIABLES, ParameterSet, mnl_parameters

COST_LEVELS = (0.1, 0.2, 0.4, 0.7, 1.5)
WAIT_LEVELS = (1, 3, 5, 7, 10, 15)

_FLAG_RATES = {
    "high_income": 0.25, "low_income": 0.3, "full_time": 0.55, "higher_ed": 0.6, "children": 0.3,
    "car_owner": 0.7, "white": 0.65, "woman": 0.5, "older": 0.2, "young": 0.3, "student": 0.15,
    "hot_summer": 0.2, "harsh_winter": 0.25,
}


def synthetic_respondents(n: int, rng: np.random.Generator, mode_probs=None) -> dict[str, np.ndarray]:
    """Respondent-level trip attributes (minutes/miles) and flags."""
    mode_probs = np.full(5, 0.2) if mode_probs is None else np.asarray(mode_probs, float)
    orig = rng.choice(5, size=n, p=mode_probs / mode_probs.sum())
    dist = np.clip(rng.lognormal(np.log(2.0), 0.7, size=n), 0.2, 25.0)
    # shorter trips for walkers
    dist = np.where(orig == ModeId.WALK, np.clip(dist * 0.4, 0.2, 25.0), dist)
    walk = dist / 3.0 * 60
    bike = dist / 10.0 * 60
    # door-to-door speeds vary by respondent (congestion, service quality)
    car = dist / rng.uniform(8.0, 35.0, size=n) * 60 + rng.uniform(1.0, 10.0, size=n)
    transit = dist / rng.uniform(5.0, 18.0, size=n) * 60 + rng.uniform(3.0, 20.0, size=n)
    abpt_bike = np.minimum(bike, 3.0 + 0.25 * bike)
    abpt_total = abpt_bike + 0.8 * transit
    out = {
        "orig": orig, "distance_mi": dist, "walk_min": walk, "bike_min": bike, "car_min": car,
        "transit_min": transit, "abpt_bike_min": abpt_bike, "abpt_total_min": abpt_total,
        "taxi_wait_min": rng.uniform(2.0, 10.0, size=n), "pt_short_wait": (rng.random(n) < 0.6).astype(int),
    }
    for flag in SOCIO_FLAGS:
        out[flag] = (rng.random(n) < _FLAG_RATES[flag]).astype(int)
    # mutually exclusive pairs
    out["older"] = np.where(out["young"] == 1, 0, out["older"])
    out["high_income"] = np.where(out["low_income"] == 1, 0, out["high_income"])
    purpose = rng.choice(3, size=n, p=[0.35, 0.3, 0.35])
    for k, flag in enumerate(PURPOSE_FLAGS):
        out[flag] = (purpose == k).astype(int)
    return out


def synthetic_tasks(resp: dict, n_tasks: int, rng: np.random.Generator, ids=None) -> ChoiceData:
    """Expand respondents into SP tasks on random cells of the cost x wait grid.

    Each task offers the respondent's original mode plus both adoption modes.
    Choices are placeholders (the original mode); see :func:`simulate_choices`.
    """
    n = len(resp["orig"])
    ids = np.array([f"r{i:05d}" for i in range(n)]) if ids is None else np.asarray(ids).astype(str)
    cells = [(c, w) for c in COST_LEVELS for w in WAIT_LEVELS]
    rows = np.repeat(np.arange(n), n_tasks)
    picks = np.concatenate([rng.choice(len(cells), size=n_tasks, replace=False) for _ in range(n)])
    avail = np.zeros((n * n_tasks, N_MODES), dtype=bool)
    avail[np.arange(n * n_tasks), resp["orig"][rows]] = True
    avail[:, list(AB_MODES)] = True
    cols = {
        "walk_time_h": resp["walk_min"][rows] / 60, "bike_time_h": resp["bike_min"][rows] / 60,
        "car_time_h": resp["car_min"][rows] / 60, "transit_time_h": resp["transit_min"][rows] / 60,
        "abpt_bike_time_h": resp["abpt_bike_min"][rows] / 60,
        "abpt_total_time_h": resp["abpt_total_min"][rows] / 60,
        "taxi_wait_h": resp["taxi_wait_min"][rows] / 60,
        "ab_wait_h": np.array([cells[p][1] for p in picks], float) / 60,
        "ab_cost_rate": np.array([cells[p][0] for p in picks], float),
        "distance_mi": resp["distance_mi"][rows],
        "pt_short_wait": resp["pt_short_wait"][rows],
        "I10": np.full(n * n_tasks, 3.0), "I11": np.full(n * n_tasks, 3.0),
    }
    for flag in SOCIO_FLAGS + PURPOSE_FLAGS:
        cols[flag] = resp[flag][rows]
    return ChoiceData(ids[rows], np.tile(np.arange(1, n_tasks + 1), n), resp["orig"][rows], avail, cols,
                      np.ones(n * n_tasks), CostBook())


def simulate_choices(data: ChoiceData, params: ParameterSet, rng: np.random.Generator) -> ChoiceData:
    """Draw choices (and indicators, for hybrid parameters) from the model.

    Random coefficients and the latent attitude are drawn once per individual.
    """
    X = data.design(UTILITY_PARAMS)
    n_ind = data.n_individuals
    beta = np.array([params[n] for n in UTILITY_PARAMS])
    B = np.repeat(beta[None, :], n_ind, axis=0)
    for name in params.random_coefficients:
        k = UTILITY_PARAMS.index(name)
        B[:, k] += params[f"{name}_sd"] * rng.standard_normal(n_ind)
    eff = np.zeros(n_ind)
    cols = dict(data.cols)
    if params.has_latent_variable:
        z = np.column_stack([data.individual_column(v) for v in STRUCTURAL_VARIABLES])
        coef = np.array([params[STRUCTURAL_NAMES[v]] for v in STRUCTURAL_VARIABLES])
        lv = params["coef_intercept"] + z @ coef + params["sigma_s"] * rng.standard_normal(n_ind)
        eff = -params["B_lv"] * np.tanh(lv)
        tau = thresholds(params["delta_1"], params["delta_2"])
        for ind in INDICATORS:
            ystar = params[f"INTER_{ind}"] + params[f"B_{ind}"] * lv + params[f"SIGMA_{ind}"] * rng.standard_normal(n_ind)
            y = np.searchsorted(tau[1:-1], ystar) + 1
            cols[ind] = y[data.ind_of_row].astype(float)
    V = np.einsum("tjk,tk->tj", X, B[data.ind_of_row]) + eff[data.ind_of_row][:, None] * LV_MASK
    P = mnl_prob(V, data.avail)
    u = rng.random(len(data))[:, None]
    chosen = np.minimum((P.cumsum(axis=1) < u).sum(axis=1), N_MODES - 1)
    # guard against round-off landing on an unavailable alternative
    chosen = np.where(data.avail[np.arange(len(data)), chosen], chosen, P.argmax(axis=1))
    return ChoiceData(data.individual_id, data.task_index, chosen, data.avail, cols, data.weight, data.book)


def synthetic_choice_data(n_individuals: int, params: ParameterSet, seed: int = 0, n_tasks: int = 6,
                          mode_probs=None) -> ChoiceData:
    rng = np.random.default_rng(seed)
    resp = synthetic_respondents(n_individuals, rng, mode_probs)
    return simulate_choices(synthetic_tasks(resp, n_tasks, rng), params, rng)



# Ground truth for MNL recovery studies: magnitudes chosen so every parameter
# has a relative standard error near 4% at 2000 individuals x 6 tasks.
RECOVERY_TRUTH = {
    "ASC_walk": 3.5, "ASC_bike": 3.0, "ASC_pt": -3.5, "ASC_taxi": -3.5, "ASC_ab": 2.5, "ASC_abpt": -3.0,
    "B_cost": -1.5, "B_time": -6.0, "B_activetime": -12.0, "B_wait": -12.0, "B_older": 2.5, "B_white": 2.5,
}


def recovery_parameters(truth=None) -> ParameterSet:
    """MNL parameters with ``truth`` free and every other coefficient fixed at 0."""
    truth = RECOVERY_TRUTH if truth is None else truth
    base = mnl_parameters(include_hcm_betas=True)
    others = [n for n in base.free_names if n not in truth]
    return base.fix(*others, value=0.0).updated(**truth)
