"""Scenario simulation over the AB cost x wait grid."""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .choice_core import (AB_MODES, LV_MASK, MODE_NAMES, N_MODES, ORIGINAL_MODES, UTILITY_PARAMS, ChoiceData,
                          ChoiceObservation, Sociodemographics, TripAttributes, parse_mode)
from .draws import LatentDrawPlan
from .errors import ConfigError, DataError, DomainError
from .kernels import mean_probabilities
from .params import STRUCTURAL_NAMES, STRUCTURAL_VARIABLES, ParameterSet
from .synthetic import COST_LEVELS, WAIT_LEVELS

SHARE_COLUMNS = tuple(f"share_{m}" for m in MODE_NAMES)
LV_MODES = ("draws", "point")


@dataclass(frozen=True)
class ScenarioCell:
    cell_id: int
    cost: float
    wait: float

    @property
    def wait_h(self) -> float:
        return self.wait / 60.0


@dataclass(frozen=True)
class ScenarioGrid:
    """Cross product of AB cost rates (USD/min) and waits (min)."""

    costs: tuple = COST_LEVELS
    waits: tuple = WAIT_LEVELS

    def __post_init__(self):
        costs = tuple(float(c) for c in self.costs)
        waits = tuple(float(w) for w in self.waits)
        if not costs or not waits:
            raise ConfigError("grid needs at least one cost and one wait level")
        if any(c < 0 for c in costs) or any(w < 0 for w in waits):
            raise ConfigError("grid levels must be nonnegative")
        if len(set(costs)) != len(costs) or len(set(waits)) != len(waits):
            raise ConfigError("grid levels must be distinct")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "waits", waits)

    def cells(self) -> list[ScenarioCell]:
        return [ScenarioCell(i, c, w) for i, (c, w) in enumerate((c, w) for c in self.costs for w in self.waits)]

    def __len__(self):
        return len(self.costs) * len(self.waits)

    @classmethod
    def read_ini(cls, path) -> "ScenarioGrid":
        """``[grid]`` section with comma-separated ``costs`` and ``waits``."""
        cp = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
            sec = cp["grid"]
            costs = [float(x) for x in sec.get("costs", ",".join(map(str, COST_LEVELS))).split(",")]
            waits = [float(x) for x in sec.get("waits", ",".join(map(str, WAIT_LEVELS))).split(",")]
        except (configparser.Error, OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read grid file {path}: {exc}") from exc
        return cls(tuple(costs), tuple(waits))


def trip_table(data: ChoiceData) -> ChoiceData:
    """One trip per individual: the first task, offered as original mode plus AB and ABPT."""
    first = data.starts
    orig = data.original_mode()[first]
    bad = np.flatnonzero(orig < 0)
    if len(bad):
        raise DataError(f"individual {data.ids[bad[0]]!r} has no unique original mode", row=int(first[bad[0]]))
    avail = np.zeros((len(first), N_MODES), dtype=bool)
    avail[np.arange(len(first)), orig] = True
    avail[:, list(AB_MODES)] = True
    return ChoiceData(data.individual_id[first], data.task_index[first], orig, avail,
                      {k: v[first] for k, v in data.cols.items()}, data.weight[first], data.book)


def align_weights(trips: ChoiceData, weights=None) -> np.ndarray:
    """Weights per trip from an array aligned to ``trips.ids`` or a mapping by id."""
    if weights is None:
        return np.ones(trips.n_individuals)
    if isinstance(weights, Mapping):
        missing = [i for i in trips.ids if i not in weights]
        if missing:
            raise DataError(f"no weight for individual {missing[0]!r}", column="weight")
        w = np.array([float(weights[i]) for i in trips.ids])
    else:
        w = np.asarray(weights, float)
        if w.shape != (trips.n_individuals,):
            raise DataError("weights must align with the trips")
    if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
        raise DomainError("weights must be finite, nonnegative and not all zero")
    return w


@dataclass(frozen=True)
class DrawInputs:
    """Coefficients and per-individual draws feeding the averaged-probability kernel."""

    beta: np.ndarray
    rand_idx: np.ndarray
    sd: np.ndarray
    xi: np.ndarray
    eff: np.ndarray
    plan: LatentDrawPlan | None

    def probabilities(self, data: ChoiceData, backend=None) -> np.ndarray:
        return mean_probabilities(data.design(UTILITY_PARAMS), data.avail, data.ind_of_row, self.beta,
                                  self.rand_idx, self.sd, self.xi, self.eff, LV_MASK, backend=backend)


def draw_inputs(data: ChoiceData, params: ParameterSet, plan: LatentDrawPlan | None = None,
                lv_mode: str = "draws") -> DrawInputs:
    """Fix random-coefficient and latent-attitude draws for every individual in ``data``.

    The latent attitude is drawn from its structural distribution; indicators
    are not used.
    """
    if lv_mode not in LV_MODES:
        raise ConfigError(f"lv_mode must be one of {LV_MODES}")
    beta = np.array([params[n] for n in UTILITY_PARAMS])
    random = params.random_coefficients
    rand_idx = np.array([UTILITY_PARAMS.index(n) for n in random], np.int64)
    sd = np.array([params[f"{n}_sd"] for n in random])
    n = data.n_individuals
    needs_draws = bool(random) or (params.has_latent_variable and lv_mode == "draws")
    if needs_draws and plan is None:
        plan = LatentDrawPlan()
    R = int(plan.n_draws) if needs_draws else 1
    xi = plan.normal(data.ids, len(random)) if random else np.zeros((n, R, 0))
    if params.has_latent_variable:
        z = np.column_stack([data.individual_column(v) for v in STRUCTURAL_VARIABLES])
        coef = np.array([params[STRUCTURAL_NAMES[v]] for v in STRUCTURAL_VARIABLES])
        mean = params["coef_intercept"] + z @ coef
        if lv_mode == "draws":
            lv = mean[:, None] + params["sigma_s"] * plan.normal(data.ids, 1)[:, :, 0]
        else:
            lv = np.repeat(mean[:, None], R, axis=1)
        eff = -params["B_lv"] * np.tanh(lv)
    else:
        eff = np.zeros((n, R))
    return DrawInputs(beta, rand_idx, sd, xi, eff, plan if needs_draws else None)


def predict_probabilities(data: ChoiceData, params: ParameterSet, plan: LatentDrawPlan | None = None,
                          lv_mode: str = "draws", backend=None) -> np.ndarray:
    """Unconditional (draw-averaged) probabilities for every row of ``data``."""
    return draw_inputs(data, params, plan, lv_mode).probabilities(data, backend)


class ScenarioSimulator:
    """Draw-averaged choice probabilities of a trip table across grid cells.

    Draws are fixed per individual at construction, so probabilities at
    different cells differ only through the AB attributes. For the hybrid
    model the latent attitude is integrated over its structural distribution;
    ``lv_mode="point"`` evaluates it at the structural mean instead.
    """

    def __init__(self, trips: ChoiceData, params: ParameterSet, plan: LatentDrawPlan | None = None,
                 lv_mode: str = "draws", backend=None):
        orig = trips.original_mode()
        if np.any(orig < 0) or not trips.avail[:, list(AB_MODES)].all():
            raise DataError("every trip needs one original mode plus AB and ABPT")
        self.trips = trips
        self.params = params
        self.backend = backend
        self.origin = orig
        self.inputs = draw_inputs(trips, params, plan, lv_mode)
        self.plan = self.inputs.plan

    def probabilities(self, cell: ScenarioCell | None = None, adoption: bool = True) -> np.ndarray:
        """(n_trips, 7) probabilities at ``cell``; ``adoption=False`` keeps every trip on its original mode."""
        if not adoption:
            out = np.zeros((self.trips.n_individuals, N_MODES))
            out[np.arange(len(out)), self.origin] = 1.0
            return out
        data = self.trips if cell is None else self.trips.with_columns(ab_cost_rate=cell.cost, ab_wait_h=cell.wait_h)
        return self.inputs.probabilities(data, self.backend)

    def baseline(self) -> np.ndarray:
        return self.probabilities(adoption=False)


def predict_trip(trip: TripAttributes, socio: Sociodemographics, original_mode, cell: ScenarioCell,
                 params: ParameterSet, plan: LatentDrawPlan | None = None, individual_id: str = "trip",
                 backend=None) -> np.ndarray:
    """Probability vector over the seven modes for one trip at one grid cell.

    Only the original mode, AB and ABPT are available; the other entries are 0.
    """
    try:
        orig = parse_mode(original_mode)
    except (DomainError, ValueError):
        raise DataError(f"unknown original mode {original_mode!r}") from None
    if orig not in ORIGINAL_MODES:
        raise DataError(f"original mode must be one of {[MODE_NAMES[m] for m in ORIGINAL_MODES]}")
    obs = ChoiceObservation(individual_id, 1, trip, socio, cell.cost, cell.wait_h,
                            frozenset({orig, *AB_MODES}), orig)
    trips = ChoiceData.from_observations([obs])
    return ScenarioSimulator(trips, params, plan, backend=backend).probabilities(cell)[0]


def aggregate_shares(probs: np.ndarray, weights=None) -> np.ndarray:
    """Weighted mean of per-trip probability vectors."""
    P = np.atleast_2d(np.asarray(probs, float))
    w = np.ones(len(P)) if weights is None else np.asarray(weights, float)
    return w @ P / w.sum()


def shift_matrix(probs: np.ndarray, origin, weights=None) -> np.ndarray:
    """Weighted flows from each original mode (rows, 5) to each chosen mode (columns, 7).

    Entries are normalized by total weight, so row sums are the baseline
    origin shares and column sums the aggregate shares.
    """
    P = np.atleast_2d(np.asarray(probs, float))
    origin = np.asarray(origin, np.int64)
    w = np.ones(len(P)) if weights is None else np.asarray(weights, float)
    out = np.zeros((len(ORIGINAL_MODES), N_MODES))
    np.add.at(out, origin, w[:, None] * P)
    return out / w.sum()


def combine_population(bikeable_shares, bikeable_fraction: float, nonbikeable_baseline) -> np.ndarray:
    """Total shares when non-bikeable trips keep their original modes."""
    b = np.asarray(bikeable_shares, float)
    nb = np.asarray(nonbikeable_baseline, float)
    if not 0.0 <= bikeable_fraction <= 1.0:
        raise DomainError("bikeable_fraction must lie in [0, 1]")
    for name, v in (("bikeable_shares", b), ("nonbikeable_baseline", nb)):
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise DomainError(f"{name} must be a probability vector summing to 1")
    if len(nb) < len(b):
        nb = np.concatenate([nb, np.zeros(len(b) - len(nb))])
    return bikeable_fraction * b + (1.0 - bikeable_fraction) * nb


@dataclass(frozen=True)
class CellResult:
    cell: ScenarioCell
    shares: np.ndarray
    shifts: np.ndarray


def simulate_grid(simulator: ScenarioSimulator, weights=None, grid: ScenarioGrid = ScenarioGrid(),
                  adoption: bool = True) -> list[CellResult]:
    w = align_weights(simulator.trips, weights)
    out = []
    for cell in grid.cells():
        P = simulator.probabilities(cell, adoption=adoption)
        out.append(CellResult(cell, aggregate_shares(P, w), shift_matrix(P, simulator.origin, w)))
    return out


def shares_frame(results: Sequence[CellResult]) -> pd.DataFrame:
    rows = [{"cell_id": r.cell.cell_id, "cost": r.cell.cost, "wait": r.cell.wait,
             **dict(zip(SHARE_COLUMNS, r.shares))} for r in results]
    return pd.DataFrame(rows, columns=["cell_id", "cost", "wait", *SHARE_COLUMNS])


def shifts_frame(results: Iterable[CellResult]) -> pd.DataFrame:
    rows = []
    for r in results:
        for o, origin in enumerate(ORIGINAL_MODES):
            for d in range(N_MODES):
                rows.append({"cell_id": r.cell.cell_id, "origin": MODE_NAMES[origin],
                             "destination": MODE_NAMES[d], "flow": r.shifts[o, d]})
    return pd.DataFrame(rows, columns=["cell_id", "origin", "destination", "flow"])
