"""Mode-choice estimation and scenario simulation for autonomous-bicycle services."""

__version__ = "0.1.0"

from .bikeability import (BikeabilityRecord, BikeabilitySample, bikeability_prob, bikeability_utility, classify,
                          classify_sample, expected_weights)
from .choice_core import (MODE_NAMES, ChoiceData, ChoiceObservation, CostBook, ModeId, Sociodemographics,
                          TripAttributes, assemble_utilities, mode_costs, scale_inputs)
from .draws import LatentDrawPlan
from .errors import AbmodeError, ConfigError, DataError, DomainError, EstimationError, SpecificationError
from .estimation import EstimationConfig, EstimationResult, estimate, fit_statistics
from .impacts import (BACKGROUND_SCENARIOS, ABLifecycleTable, EmissionScenario, impact_grid, relative_change,
                      scenario_total, trip_emissions)
from .likelihood import (hcm_loglik, lv_effect, mixl_loglik, mnl_loglik, mnl_prob, ordered_probit_prob,
                         structural_lv)
from .metrics import FoldPlan, cv_evaluate, vot
from .params import ParameterSet, default_parameters, reference_parameters
from .simulation import (ScenarioCell, ScenarioGrid, ScenarioSimulator, aggregate_shares, combine_population,
                         predict_probabilities, predict_trip, shift_matrix, trip_table)
from .weighting import MarginTargets, ipf_fit, margin_report, respondent_frame, weighted_proportions

__all__ = [
    "ABLifecycleTable", "AbmodeError", "BACKGROUND_SCENARIOS", "BikeabilityRecord", "BikeabilitySample",
    "ChoiceData", "ChoiceObservation", "ConfigError", "CostBook", "DataError", "DomainError", "EmissionScenario",
    "EstimationConfig", "EstimationError", "EstimationResult", "FoldPlan", "LatentDrawPlan", "MODE_NAMES",
    "MarginTargets", "ModeId", "ParameterSet", "ScenarioCell", "ScenarioGrid", "ScenarioSimulator",
    "Sociodemographics", "SpecificationError", "TripAttributes", "aggregate_shares", "assemble_utilities",
    "bikeability_prob", "bikeability_utility", "classify", "classify_sample", "combine_population", "cv_evaluate",
    "default_parameters", "estimate", "expected_weights", "fit_statistics", "hcm_loglik", "impact_grid",
    "ipf_fit", "lv_effect", "margin_report", "mixl_loglik", "mnl_loglik", "mnl_prob", "mode_costs",
    "ordered_probit_prob", "predict_probabilities", "predict_trip", "reference_parameters", "relative_change",
    "respondent_frame", "scale_inputs", "scenario_total", "shift_matrix", "structural_lv", "trip_emissions",
    "trip_table", "vot", "weighted_proportions",
]
