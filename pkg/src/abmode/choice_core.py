"""Domain data model: modes, trips, respondents and the seven utility expressions.

Times are stored in hours and costs enter utilities in tens of USD. The
conversion happens once, at ingestion, so estimated coefficients keep the
scale of the published tables.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import DataError, DomainError, SpecificationError

logger = logging.getLogger(__name__)


class ModeId(IntEnum):
    WALK = 0
    BIKE = 1
    CAR = 2
    TRANSIT = 3
    TAXI = 4
    AB = 5
    ABPT = 6


N_MODES = 7
MODE_NAMES = ("walk", "bike", "car", "transit", "taxi", "ab", "abpt")
ORIGINAL_MODES = (ModeId.WALK, ModeId.BIKE, ModeId.CAR, ModeId.TRANSIT, ModeId.TAXI)
AB_MODES = (ModeId.AB, ModeId.ABPT)
# alternatives that carry the latent-variable effect
LV_MASK = np.array([0, 0, 0, 0, 0, 1, 1], dtype=np.float64)

SOCIO_FLAGS = (
    "high_income", "low_income", "full_time", "higher_ed", "children", "car_owner",
    "white", "woman", "older", "young", "student", "hot_summer", "harsh_winter",
)
PURPOSE_FLAGS = ("work_trip", "leisure_trip", "errands_trip")

KM_PER_MILE = 1.60934
MIN_DISTANCE_MI = 0.1
MAX_DISTANCE_MI = 30.0


def parse_mode(value) -> ModeId:
    """Accept a mode index, a ``ModeId`` or a (case-insensitive) mode name."""
    if isinstance(value, ModeId):
        return value
    if isinstance(value, str):
        key = value.strip().lower()
        if key.isdigit():
            return ModeId(int(key))
        aliases = {"pt": "transit", "public_transit": "transit", "on_demand": "taxi"}
        key = aliases.get(key, key)
        if key in MODE_NAMES:
            return ModeId(MODE_NAMES.index(key))
        raise DomainError(f"unknown mode {value!r}")
    if isinstance(value, (int, np.integer, float, np.floating)) and float(value).is_integer():
        return ModeId(int(value))
    raise DomainError(f"unknown mode {value!r}")


@dataclass(frozen=True)
class TripAttributes:
    """Level-of-service attributes of the reference trip, in hours and miles."""

    walk_time_h: float
    bike_time_h: float
    car_time_h: float
    transit_time_h: float
    abpt_bike_time_h: float
    abpt_total_time_h: float
    distance_mi: float
    taxi_wait_h: float = 0.0
    pt_short_wait: int = 0

    def __post_init__(self):
        times = ("walk_time_h", "bike_time_h", "car_time_h", "transit_time_h",
                 "abpt_bike_time_h", "abpt_total_time_h", "taxi_wait_h")
        for name in times:
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise DomainError(f"{name} must be finite and >= 0, got {v}")
        if self.abpt_bike_time_h > self.abpt_total_time_h:
            raise DomainError("abpt_bike_time_h exceeds abpt_total_time_h")
        if not MIN_DISTANCE_MI <= self.distance_mi <= MAX_DISTANCE_MI:
            raise DomainError(
                f"distance_mi={self.distance_mi} outside [{MIN_DISTANCE_MI}, {MAX_DISTANCE_MI}]"
            )
        if self.pt_short_wait not in (0, 1):
            raise DomainError("pt_short_wait must be 0 or 1")

    @classmethod
    def from_minutes(cls, *, walk_min, bike_min, car_min, transit_min, abpt_bike_min,
                     abpt_total_min, distance_mi, taxi_wait_min=0.0, pt_short_wait=0):
        h = lambda m: scale_inputs(m, 0.0)[0]  # noqa: E731
        return cls(h(walk_min), h(bike_min), h(car_min), h(transit_min), h(abpt_bike_min),
                   h(abpt_total_min), float(distance_mi), h(taxi_wait_min), int(pt_short_wait))


@dataclass(frozen=True)
class Sociodemographics:
    high_income: int = 0
    low_income: int = 0
    full_time: int = 0
    higher_ed: int = 0
    children: int = 0
    car_owner: int = 0
    white: int = 0
    woman: int = 0
    older: int = 0
    young: int = 0
    student: int = 0
    hot_summer: int = 0
    harsh_winter: int = 0
    work_trip: int = 0
    leisure_trip: int = 0
    errands_trip: int = 0

    def __post_init__(self):
        for name in SOCIO_FLAGS + PURPOSE_FLAGS:
            if getattr(self, name) not in (0, 1):
                raise DomainError(f"{name} must be 0 or 1")
        if self.work_trip + self.leisure_trip + self.errands_trip > 1:
            raise DomainError("trip purpose flags are mutually exclusive")

    def as_dict(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in SOCIO_FLAGS + PURPOSE_FLAGS}


@dataclass(frozen=True)
class ChoiceObservation:
    """One stated-preference task."""

    individual_id: str
    task_index: int
    attributes: TripAttributes
    socio: Sociodemographics
    ab_cost_rate: float
    ab_wait_h: float
    availability: frozenset
    chosen: ModeId
    I10: int = 3
    I11: int = 3
    weight: float = 1.0

    def __post_init__(self):
        avail = frozenset(parse_mode(m) for m in self.availability)
        object.__setattr__(self, "availability", avail)
        object.__setattr__(self, "chosen", parse_mode(self.chosen))
        if self.chosen not in avail:
            raise DataError(f"chosen mode {self.chosen.name} is not available")
        if self.ab_cost_rate < 0 or self.ab_wait_h < 0:
            raise DomainError("AB cost rate and wait must be >= 0")
        if self.weight < 0:
            raise DomainError("weight must be nonnegative")

    @property
    def original_mode(self) -> ModeId | None:
        orig = [m for m in self.availability if m not in AB_MODES]
        return orig[0] if len(orig) == 1 else None


@dataclass(frozen=True)
class CostBook:
    """Out-of-pocket cost assumptions for the existing modes (USD)."""

    car_usd_per_mile: float = 0.72
    pt_usd_per_trip: float = 1.5
    taxi_fixed: float = 1.23
    taxi_usd_per_mile: float = 0.97
    taxi_usd_per_min: float = 0.28

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if v < 0:
                raise DomainError(f"{k} must be >= 0")


def scale_inputs(raw_minutes, raw_usd):
    """Convert minutes to hours and USD to tens of USD."""
    m = np.asarray(raw_minutes, dtype=float)
    c = np.asarray(raw_usd, dtype=float)
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(c))):
        raise DomainError("inputs must be finite")
    if np.any(m < 0) or np.any(c < 0):
        raise DomainError("inputs must be nonnegative")
    hours, tens = m / 60.0, c / 10.0
    if hours.ndim == 0:
        return float(hours), float(tens)
    return hours, tens


def _costs_usd(distance_mi, car_h, bike_h, abpt_bike_h, book: CostBook, ab_cost_rate):
    car_min = np.asarray(car_h) * 60.0
    zero = np.zeros_like(np.asarray(distance_mi, dtype=float))
    return {
        "walk": zero,
        "bike": zero,
        "car": np.asarray(distance_mi) * book.car_usd_per_mile,
        "transit": zero + book.pt_usd_per_trip,
        "taxi": book.taxi_fixed + book.taxi_usd_per_mile * np.asarray(distance_mi)
        + book.taxi_usd_per_min * car_min,
        "ab": np.asarray(ab_cost_rate) * np.asarray(bike_h) * 60.0,
        "abpt": np.asarray(ab_cost_rate) * np.asarray(abpt_bike_h) * 60.0 + book.pt_usd_per_trip,
    }


def mode_costs(attrs: TripAttributes, book: CostBook = CostBook(), ab_cost_rate: float = 0.1) -> np.ndarray:
    """Per-mode trip cost in USD, indexed by ``ModeId``."""
    if ab_cost_rate < 0:
        raise DomainError("ab_cost_rate must be >= 0")
    c = _costs_usd(attrs.distance_mi, attrs.car_time_h, attrs.bike_time_h,
                   attrs.abpt_bike_time_h, book, ab_cost_rate)
    return np.array([float(c[name]) for name in MODE_NAMES])


# (alternative, coefficient, sign, regressor) exactly as the utility expressions are written
UTILITY_TERMS = (
    (ModeId.WALK, "ASC_walk", 1, "one"),
    (ModeId.WALK, "B_activetime", 1, "walk_time_h"),
    (ModeId.WALK, "B_white", 1, "white"),
    (ModeId.WALK, "B_higher_ed", 1, "higher_ed"),
    (ModeId.WALK, "B_children", -1, "children"),
    (ModeId.WALK, "B_hotsummer", -1, "hot_summer"),

    (ModeId.BIKE, "ASC_bike", 1, "one"),
    (ModeId.BIKE, "B_activetime", 1, "bike_time_h"),
    (ModeId.BIKE, "B_carowner", -1, "car_owner"),
    (ModeId.BIKE, "B_highincome", -1, "high_income"),
    (ModeId.BIKE, "B_fulltime", -1, "full_time"),
    (ModeId.BIKE, "B_higher_ed", 1, "higher_ed"),
    (ModeId.BIKE, "B_leisure", -1, "leisure_trip"),
    (ModeId.BIKE, "B_work", 1, "work_trip"),

    (ModeId.CAR, "ASC_car", 1, "one"),
    (ModeId.CAR, "B_cost", 1, "car_cost"),
    (ModeId.CAR, "B_time", 1, "car_time_h"),
    (ModeId.CAR, "B_carowner", 1, "car_owner"),
    (ModeId.CAR, "B_white", -1, "white"),
    (ModeId.CAR, "B_older", 1, "older"),
    (ModeId.CAR, "B_leisure", -1, "leisure_trip"),
    (ModeId.CAR, "B_work", -1, "work_trip"),
    (ModeId.CAR, "B_errands", 1, "errands_trip"),

    (ModeId.TRANSIT, "ASC_pt", 1, "one"),
    (ModeId.TRANSIT, "B_cost", 1, "pt_cost"),
    (ModeId.TRANSIT, "B_time", 1, "transit_time_h"),
    (ModeId.TRANSIT, "B_fulltime", 1, "full_time"),
    (ModeId.TRANSIT, "B_higher_ed", 1, "higher_ed"),
    (ModeId.TRANSIT, "B_children", -1, "children"),
    (ModeId.TRANSIT, "B_leisure", -1, "leisure_trip"),
    (ModeId.TRANSIT, "B_work", 1, "work_trip"),
    (ModeId.TRANSIT, "B_hotsummer", -1, "hot_summer"),
    (ModeId.TRANSIT, "B_ptshortwait", 1, "pt_short_wait"),

    (ModeId.TAXI, "ASC_taxi", 1, "one"),
    (ModeId.TAXI, "B_cost", 1, "taxi_cost"),
    (ModeId.TAXI, "B_time", 1, "car_time_h"),
    (ModeId.TAXI, "B_wait", 1, "taxi_wait_h"),
    (ModeId.TAXI, "B_highincome", 1, "high_income"),
    (ModeId.TAXI, "B_leisure", 1, "leisure_trip"),
    (ModeId.TAXI, "B_hotsummer", 1, "hot_summer"),

    (ModeId.AB, "ASC_ab", 1, "one"),
    (ModeId.AB, "B_cost", 1, "ab_cost"),
    (ModeId.AB, "B_activetime", 1, "bike_time_h"),
    (ModeId.AB, "B_wait", 1, "ab_wait_h"),
    (ModeId.AB, "B_fulltime", -1, "full_time"),
    (ModeId.AB, "B_older", -1, "older"),
    (ModeId.AB, "B_higher_ed", -1, "higher_ed"),
    (ModeId.AB, "B_work", -1, "work_trip"),

    (ModeId.ABPT, "ASC_abpt", 1, "one"),
    (ModeId.ABPT, "B_cost", 1, "abpt_cost"),
    (ModeId.ABPT, "B_activetime", 1, "abpt_bike_time_h"),
    (ModeId.ABPT, "B_time", 1, "abpt_pt_time_h"),
    (ModeId.ABPT, "B_wait", 1, "ab_wait_h"),
    (ModeId.ABPT, "B_carowner", -1, "car_owner"),
    (ModeId.ABPT, "B_higher_ed", -1, "higher_ed"),
    (ModeId.ABPT, "B_hotsummer", 1, "hot_summer"),
    (ModeId.ABPT, "B_ptshortwait", 1, "pt_short_wait"),
)

UTILITY_PARAMS = tuple(dict.fromkeys(term[1] for term in UTILITY_TERMS))


def regressors(cols: Mapping[str, np.ndarray], book: CostBook = CostBook()) -> dict[str, np.ndarray]:
    """Derive every regressor used in the utilities from attribute columns.

    ``cols`` holds hour-scaled times, ``distance_mi``, ``ab_cost_rate`` (USD/min),
    ``ab_wait_h`` and the socio-demographic flags; all entries are arrays of
    equal length.
    """
    costs = _costs_usd(cols["distance_mi"], cols["car_time_h"], cols["bike_time_h"],
                       cols["abpt_bike_time_h"], book, cols["ab_cost_rate"])
    n = len(np.asarray(cols["distance_mi"]))
    out = {"one": np.ones(n)}
    for key in ("walk_time_h", "bike_time_h", "car_time_h", "transit_time_h",
                "abpt_bike_time_h", "taxi_wait_h", "ab_wait_h", "pt_short_wait"):
        out[key] = np.asarray(cols[key], dtype=float)
    out["abpt_pt_time_h"] = np.asarray(cols["abpt_total_time_h"], float) - out["abpt_bike_time_h"]
    for name in ("car", "transit", "taxi", "ab", "abpt"):
        key = "pt_cost" if name == "transit" else f"{name}_cost"
        out[key] = np.asarray(costs[name], dtype=float) / 10.0
    for flag in SOCIO_FLAGS + PURPOSE_FLAGS:
        out[flag] = np.asarray(cols[flag], dtype=float)
    return out


def design_matrix(cols: Mapping[str, np.ndarray], names: Sequence[str] = UTILITY_PARAMS,
                  book: CostBook = CostBook()) -> np.ndarray:
    """Stack utilities as ``X[n, alt, k]`` so that ``V = X @ beta``."""
    reg = regressors(cols, book)
    n = len(reg["one"])
    index = {name: k for k, name in enumerate(names)}
    X = np.zeros((n, N_MODES, len(names)))
    for alt, coef, sign, col in UTILITY_TERMS:
        if coef not in index:
            raise SpecificationError(f"utility coefficient {coef!r} missing from parameter list")
        X[:, alt, index[coef]] += sign * reg[col]
    return X


def observation_columns(obs: ChoiceObservation) -> dict[str, np.ndarray]:
    a = obs.attributes
    cols = {k: np.array([getattr(a, k)], dtype=float) for k in a.__dataclass_fields__}
    cols.update({k: np.array([v], dtype=float) for k, v in obs.socio.as_dict().items()})
    cols["ab_cost_rate"] = np.array([obs.ab_cost_rate])
    cols["ab_wait_h"] = np.array([obs.ab_wait_h])
    return cols


def availability_mask(modes: Iterable) -> np.ndarray:
    mask = np.zeros(N_MODES, dtype=bool)
    for m in modes:
        mask[parse_mode(m)] = True
    return mask


def assemble_utilities(obs: ChoiceObservation, params, lv_effect: float = 0.0,
                       book: CostBook = CostBook()) -> np.ma.MaskedArray:
    """Evaluate V0..V6 for one observation.

    Unavailable alternatives are masked rather than given a numeric value.
    ``params`` is anything mapping coefficient names to values (a
    ``ParameterSet`` or a plain dict).
    """
    beta = np.empty(len(UTILITY_PARAMS))
    for k, name in enumerate(UTILITY_PARAMS):
        try:
            beta[k] = params[name]
        except KeyError:
            raise SpecificationError(f"parameter {name!r} required by the utilities is missing") from None
    X = design_matrix(observation_columns(obs), UTILITY_PARAMS, book)[0]
    v = X @ beta + lv_effect * LV_MASK
    return np.ma.masked_array(v, mask=~availability_mask(obs.availability))


# ---------------------------------------------------------------------------
# columnar data
# ---------------------------------------------------------------------------

TIME_COLUMNS = {
    "walk_min": "walk_time_h",
    "bike_min": "bike_time_h",
    "car_min": "car_time_h",
    "transit_min": "transit_time_h",
    "abpt_bike_min": "abpt_bike_time_h",
    "abpt_total_min": "abpt_total_time_h",
    "taxi_wait_min": "taxi_wait_h",
    "ab_wait_min": "ab_wait_h",
}
AVAIL_COLUMNS = tuple(f"avail_{m}" for m in MODE_NAMES)
REQUIRED_COLUMNS = (
    ("individual_id", "task_index", "chosen") + AVAIL_COLUMNS + tuple(TIME_COLUMNS)
    + ("distance_mi", "ab_cost_rate", "I10", "I11") + SOCIO_FLAGS + PURPOSE_FLAGS
)
ATTRIBUTE_KEYS = tuple(TIME_COLUMNS.values()) + ("distance_mi", "pt_short_wait", "ab_cost_rate")


@dataclass(frozen=True, eq=False)
class ChoiceData:
    """Column-oriented choice observations grouped by individual.

    Rows are sorted by individual id and task index, so every statistic is
    independent of the order in which rows were supplied.
    """

    individual_id: np.ndarray
    task_index: np.ndarray
    chosen: np.ndarray
    avail: np.ndarray
    cols: dict
    weight: np.ndarray
    book: CostBook = field(default_factory=CostBook)

    def __post_init__(self):
        ids = np.asarray(self.individual_id).astype(str)
        order = np.lexsort((np.asarray(self.task_index), ids))
        object.__setattr__(self, "individual_id", ids[order])
        for name in ("task_index", "chosen", "avail", "weight"):
            object.__setattr__(self, name, np.ascontiguousarray(np.asarray(getattr(self, name))[order]))
        object.__setattr__(self, "cols", {k: np.asarray(v, dtype=float)[order] for k, v in self.cols.items()})
        object.__setattr__(self, "chosen", self.chosen.astype(np.int64))
        object.__setattr__(self, "avail", self.avail.astype(bool))
        uniq, starts, counts = np.unique(self.individual_id, return_index=True, return_counts=True)
        object.__setattr__(self, "ids", uniq)
        object.__setattr__(self, "starts", starts.astype(np.int64))
        object.__setattr__(self, "counts", counts.astype(np.int64))
        object.__setattr__(self, "ind_of_row", np.repeat(np.arange(len(uniq)), counts))
        if len(self.chosen) and not np.all(self.avail[np.arange(len(self.chosen)), self.chosen]):
            bad = int(np.flatnonzero(~self.avail[np.arange(len(self.chosen)), self.chosen])[0])
            raise DataError("chosen mode is not available", row=bad, column="chosen")

    def __len__(self):
        return len(self.chosen)

    @property
    def n_individuals(self) -> int:
        return len(self.ids)

    def design(self, names: Sequence[str] = UTILITY_PARAMS) -> np.ndarray:
        return design_matrix(self.cols, names, self.book)

    def individual_column(self, name: str) -> np.ndarray:
        """Per-individual value of a respondent-level column (first task)."""
        return self.cols[name][self.starts]

    def original_mode(self) -> np.ndarray:
        """Index of the non-AB alternative in each row's choice set (-1 if ambiguous)."""
        base = self.avail[:, :5]
        out = np.where(base.sum(axis=1) == 1, base.argmax(axis=1), -1)
        return out.astype(np.int64)

    def subset_individuals(self, ids) -> "ChoiceData":
        keep = np.isin(self.individual_id, np.asarray(list(ids)).astype(str))
        return ChoiceData(self.individual_id[keep], self.task_index[keep], self.chosen[keep],
                          self.avail[keep], {k: v[keep] for k, v in self.cols.items()},
                          self.weight[keep], self.book)

    def with_columns(self, **updates) -> "ChoiceData":
        cols = dict(self.cols)
        n = len(self)
        for k, v in updates.items():
            cols[k] = np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
        return ChoiceData(self.individual_id, self.task_index, self.chosen, self.avail, cols,
                          self.weight, self.book)

    @classmethod
    def from_observations(cls, observations: Sequence[ChoiceObservation],
                          book: CostBook = CostBook()) -> "ChoiceData":
        if not observations:
            raise DataError("no observations supplied")
        cols: dict[str, list] = {}
        for obs in observations:
            for k, v in observation_columns(obs).items():
                cols.setdefault(k, []).append(v[0])
            cols.setdefault("I10", []).append(obs.I10)
            cols.setdefault("I11", []).append(obs.I11)
        avail = np.array([availability_mask(o.availability) for o in observations])
        return cls(
            np.array([str(o.individual_id) for o in observations]),
            np.array([o.task_index for o in observations]),
            np.array([int(o.chosen) for o in observations]),
            avail,
            {k: np.array(v, dtype=float) for k, v in cols.items()},
            np.array([o.weight for o in observations], dtype=float),
            book,
        )

    @classmethod
    def from_frame(cls, df: pd.DataFrame, book: CostBook = CostBook(),
                   filter_distance: bool = True) -> "ChoiceData":
        """Build from a frame following the observation CSV schema (minutes, USD)."""
        df = df.copy()
        if "pt_short_wait" not in df.columns:
            if "transit_wait_min" in df.columns:
                df["pt_short_wait"] = (df["transit_wait_min"] < 10).astype(int)
            else:
                raise DataError("missing required column", column="pt_short_wait")
        missing = [c for c in REQUIRED_COLUMNS if c not in df.columns]
        if missing:
            raise DataError(f"missing required column {missing[0]!r}", column=missing[0])
        if df.empty:
            raise DataError("no observations supplied")
        numeric = [c for c in REQUIRED_COLUMNS if c not in ("individual_id", "chosen")] + ["pt_short_wait"]
        for c in numeric:
            values = pd.to_numeric(df[c], errors="coerce")
            bad = values.isna() | ~np.isfinite(values)
            if bad.any():
                raise DataError("non-numeric or missing value", row=int(np.flatnonzero(bad.to_numpy())[0]), column=c)
            df[c] = values
        for c in TIME_COLUMNS:
            neg = (df[c] < 0).to_numpy()
            if neg.any():
                raise DataError("negative time", row=int(np.flatnonzero(neg)[0]), column=c)
        if filter_distance:
            keep = df["distance_mi"].between(MIN_DISTANCE_MI, MAX_DISTANCE_MI).to_numpy()
            if not keep.all():
                logger.warning("dropping %d rows with distance outside [%.1f, %.1f] mi",
                               int((~keep).sum()), MIN_DISTANCE_MI, MAX_DISTANCE_MI)
                df = df.loc[keep]
        chosen = []
        for i, v in enumerate(df["chosen"].to_numpy()):
            try:
                chosen.append(int(parse_mode(v)))
            except (DomainError, ValueError):
                raise DataError(f"unknown mode {v!r}", row=i, column="chosen") from None
        cols = {}
        for raw, key in TIME_COLUMNS.items():
            cols[key] = df[raw].to_numpy(dtype=float) / 60.0
        for key in ("distance_mi", "pt_short_wait", "ab_cost_rate", "I10", "I11") + SOCIO_FLAGS + PURPOSE_FLAGS:
            cols[key] = df[key].to_numpy(dtype=float)
        weight = df["weight"].to_numpy(dtype=float) if "weight" in df.columns else np.ones(len(df))
        return cls(df["individual_id"].astype(str).to_numpy(), df["task_index"].to_numpy(),
                   np.array(chosen, dtype=np.int64), df[list(AVAIL_COLUMNS)].to_numpy().astype(bool),
                   cols, weight, book)

    @classmethod
    def read_csv(cls, path, book: CostBook = CostBook()) -> "ChoiceData":
        return cls.from_frame(pd.read_csv(path, encoding="utf-8"), book)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"individual_id": self.individual_id, "task_index": self.task_index,
                           "chosen": self.chosen})
        for j, c in enumerate(AVAIL_COLUMNS):
            df[c] = self.avail[:, j].astype(int)
        for raw, key in TIME_COLUMNS.items():
            df[raw] = self.cols[key] * 60.0
        for key in ("distance_mi", "pt_short_wait", "ab_cost_rate", "I10", "I11") + SOCIO_FLAGS + PURPOSE_FLAGS:
            v = self.cols[key]
            df[key] = v.astype(int) if key not in ("distance_mi", "ab_cost_rate") else v
        df["weight"] = self.weight
        return df
