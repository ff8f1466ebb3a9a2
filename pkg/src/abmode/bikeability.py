"""Binary logit of whether a trip is perceived as bikeable."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.special import expit

from .choice_core import ModeId, parse_mode
from .errors import DataError, DomainError, SpecificationError
from .likelihood import BinaryProblem
from .params import BIKEABILITY_PARAMS, ParameterSet

BIKEABILITY_MODES = (ModeId.CAR, ModeId.WALK, ModeId.TRANSIT, ModeId.TAXI)
PURPOSES = ("work", "leisure", "errands")
BIKEABILITY_FLAGS = ("full_time", "woman", "older", "student", "higher_ed", "children", "harsh_winter")
# coefficient -> socio flag it multiplies
_FLAG_COEFS = {
    "B_fulltime": "full_time", "B_woman": "woman", "B_older": "older", "B_student": "student",
    "B_higher_ed": "higher_ed", "B_children": "children", "B_harshwinter": "harsh_winter",
}
CSV_COLUMNS = ("trip_id", "mode", "time_min", "purpose") + BIKEABILITY_FLAGS


@dataclass(frozen=True)
class BikeabilityRecord:
    """One trip with its traveller's attributes; ``time_h`` in hours."""

    mode: ModeId
    time_h: float
    purpose: str = "work"
    full_time: int = 0
    woman: int = 0
    older: int = 0
    student: int = 0
    higher_ed: int = 0
    children: int = 0
    harsh_winter: int = 0
    label: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", parse_mode(self.mode))
        if self.mode not in BIKEABILITY_MODES:
            raise DomainError(f"bikeability covers car, walk, transit and taxi trips, not {self.mode.name.lower()}")
        if not (np.isfinite(self.time_h) and self.time_h >= 0):
            raise DomainError(f"time_h must be a nonnegative number, got {self.time_h}")
        if self.purpose not in PURPOSES:
            raise DomainError(f"purpose must be one of {PURPOSES}, got {self.purpose!r}")
        for flag in BIKEABILITY_FLAGS:
            if getattr(self, flag) not in (0, 1):
                raise DomainError(f"{flag} must be 0 or 1")
        if self.label is not None and self.label not in (0, 1):
            raise DomainError("label must be 0 or 1")

    def regressors(self) -> dict[str, float]:
        x = {
            "ASC": 1.0,
            "B_walk": float(self.mode == ModeId.WALK),
            "B_PT": float(self.mode == ModeId.TRANSIT),
            "B_taxi": float(self.mode == ModeId.TAXI),
            "B_time": self.time_h,
            "B_time_leisure": self.time_h * (self.purpose == "leisure"),
        }
        for coef, flag in _FLAG_COEFS.items():
            x[coef] = float(getattr(self, flag))
        return x


def _coefficients(params: Mapping[str, float]) -> np.ndarray:
    missing = [n for n in BIKEABILITY_PARAMS if n not in params]
    if missing:
        raise SpecificationError(f"bikeability coefficient {missing[0]!r} missing")
    return np.array([params[n] for n in BIKEABILITY_PARAMS], float)


def bikeability_utility(record: BikeabilityRecord, params: Mapping[str, float]) -> float:
    beta = _coefficients(params)
    x = record.regressors()
    return float(sum(b * x[n] for n, b in zip(BIKEABILITY_PARAMS, beta)))


def bikeability_prob(record: BikeabilityRecord, params: Mapping[str, float]) -> float:
    return float(expit(bikeability_utility(record, params)))


def classify(record: BikeabilityRecord, params: Mapping[str, float], threshold: float = 0.5) -> int:
    """1 if the bikeable probability reaches ``threshold`` (inclusive)."""
    _check_threshold(threshold)
    return int(bikeability_prob(record, params) >= threshold)


def _check_threshold(threshold):
    if not 0.0 < threshold < 1.0:
        raise DomainError(f"threshold must lie in (0, 1), got {threshold}")


@dataclass(frozen=True)
class BikeabilitySample:
    """Column-oriented batch of bikeability records.

    ``groups`` identifies the respondent behind each trip so that robust
    standard errors cluster trips of the same person.
    """

    trip_id: np.ndarray
    mode: np.ndarray
    time_h: np.ndarray
    purpose: np.ndarray
    flags: dict
    label: np.ndarray | None = None
    groups: np.ndarray | None = None

    def __len__(self):
        return len(self.mode)

    @classmethod
    def from_records(cls, records: Sequence[BikeabilityRecord], groups=None) -> "BikeabilitySample":
        labels = [r.label for r in records]
        label = None if any(v is None for v in labels) else np.array(labels, float)
        return cls(
            trip_id=np.array([str(i) for i in range(len(records))]),
            mode=np.array([int(r.mode) for r in records], np.int64),
            time_h=np.array([r.time_h for r in records], float),
            purpose=np.array([r.purpose for r in records]),
            flags={f: np.array([getattr(r, f) for r in records], float) for f in BIKEABILITY_FLAGS},
            label=label,
            groups=None if groups is None else np.asarray(groups).astype(str),
        )

    def records(self) -> list[BikeabilityRecord]:
        out = []
        for i in range(len(self)):
            flags = {f: int(self.flags[f][i]) for f in BIKEABILITY_FLAGS}
            label = None if self.label is None else int(self.label[i])
            out.append(BikeabilityRecord(ModeId(int(self.mode[i])), float(self.time_h[i]), str(self.purpose[i]),
                                         label=label, **flags))
        return out

    def design(self) -> np.ndarray:
        """Regressor matrix with columns in ``BIKEABILITY_PARAMS`` order."""
        leisure = (self.purpose == "leisure").astype(float)
        cols = {
            "ASC": np.ones(len(self)),
            "B_walk": (self.mode == ModeId.WALK).astype(float),
            "B_PT": (self.mode == ModeId.TRANSIT).astype(float),
            "B_taxi": (self.mode == ModeId.TAXI).astype(float),
            "B_time": self.time_h,
            "B_time_leisure": self.time_h * leisure,
        }
        for coef, flag in _FLAG_COEFS.items():
            cols[coef] = self.flags[flag]
        return np.column_stack([cols[n] for n in BIKEABILITY_PARAMS])

    def problem(self, params: ParameterSet) -> BinaryProblem:
        if self.label is None:
            raise DataError("estimation needs a label column", column="label")
        return BinaryProblem(self.design(), self.label, params, BIKEABILITY_PARAMS, groups=self.groups)

    def with_label(self, label) -> "BikeabilitySample":
        return BikeabilitySample(self.trip_id, self.mode, self.time_h, self.purpose, self.flags,
                                 np.asarray(label, float), self.groups)

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "BikeabilitySample":
        """Parse the trip CSV schema: mode name, time in minutes, purpose, 0/1 flags."""
        missing = [c for c in CSV_COLUMNS if c not in df.columns and c != "trip_id"]
        if missing:
            raise DataError(f"missing required column {missing[0]!r}", column=missing[0])
        if df.empty:
            raise DataError("no trips supplied")
        modes = []
        for i, v in enumerate(df["mode"].to_numpy()):
            try:
                m = parse_mode(v)
            except (DomainError, ValueError):
                raise DataError(f"unknown mode {v!r}", row=i, column="mode") from None
            if m not in BIKEABILITY_MODES:
                raise DataError(f"mode {m.name.lower()} has no bikeability regressor", row=i, column="mode")
            modes.append(int(m))
        time = pd.to_numeric(df["time_min"], errors="coerce").to_numpy(float)
        bad = ~np.isfinite(time) | (time < 0)
        if bad.any():
            raise DataError("time must be a nonnegative number", row=int(np.flatnonzero(bad)[0]), column="time_min")
        purpose = df["purpose"].astype(str).str.strip().str.lower().to_numpy()
        bad = ~np.isin(purpose, PURPOSES)
        if bad.any():
            raise DataError(f"purpose must be one of {PURPOSES}", row=int(np.flatnonzero(bad)[0]), column="purpose")
        flags = {}
        for f in BIKEABILITY_FLAGS + (("label",) if "label" in df.columns else ()):
            v = pd.to_numeric(df[f], errors="coerce").to_numpy(float)
            bad = ~np.isin(v, (0.0, 1.0))
            if bad.any():
                raise DataError("expected 0 or 1", row=int(np.flatnonzero(bad)[0]), column=f)
            flags[f] = v
        label = flags.pop("label", None)
        trip_id = df["trip_id"].astype(str).to_numpy() if "trip_id" in df.columns else np.arange(len(df)).astype(str)
        groups = df["individual_id"].astype(str).to_numpy() if "individual_id" in df.columns else None
        return cls(trip_id, np.array(modes, np.int64), time / 60.0, purpose, flags, label, groups)

    @classmethod
    def read_csv(cls, path) -> "BikeabilitySample":
        return cls.from_frame(pd.read_csv(path, encoding="utf-8"))

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({
            "trip_id": self.trip_id,
            "mode": [ModeId(int(m)).name.lower() for m in self.mode],
            "time_min": self.time_h * 60.0,
            "purpose": self.purpose,
        })
        for f in BIKEABILITY_FLAGS:
            df[f] = self.flags[f].astype(int)
        if self.label is not None:
            df["label"] = self.label.astype(int)
        if self.groups is not None:
            df["individual_id"] = self.groups
        return df


def score(sample: BikeabilitySample, params: Mapping[str, float]) -> np.ndarray:
    """Bikeable probability of every trip in ``sample``."""
    return expit(sample.design() @ _coefficients(params))


def classify_sample(sample: BikeabilitySample, params: Mapping[str, float], threshold: float = 0.5) -> np.ndarray:
    _check_threshold(threshold)
    return (score(sample, params) >= threshold).astype(int)


def expected_weights(sample: BikeabilitySample, params: Mapping[str, float], base_weights=None) -> np.ndarray:
    """Soft alternative to thresholding: each trip's weight times its bikeable probability."""
    w = np.ones(len(sample)) if base_weights is None else np.asarray(base_weights, float)
    return w * score(sample, params)


def classified_frame(sample: BikeabilitySample, params: Mapping[str, float], threshold: float = 0.5) -> pd.DataFrame:
    _check_threshold(threshold)
    df = sample.to_frame()
    df["prob"] = score(sample, params)
    df["bikeable"] = (df["prob"] >= threshold).astype(int)
    return df


def synthetic_bikeability_sample(n_people: int, params: Mapping[str, float], trips_per_person: int = 8,
                                 seed: int = 0) -> BikeabilitySample:
    """Random trips with labels drawn from the binary logit at ``params``."""
    rng = np.random.default_rng(seed)
    n = n_people * trips_per_person
    person = np.repeat(np.arange(n_people), trips_per_person)
    flags = {}
    rates = {"full_time": 0.55, "woman": 0.5, "older": 0.2, "student": 0.15, "higher_ed": 0.6,
             "children": 0.3, "harsh_winter": 0.25}
    for f in BIKEABILITY_FLAGS:
        flags[f] = (rng.random(n_people) < rates[f]).astype(float)[person]
    mode = rng.choice(np.array([int(m) for m in BIKEABILITY_MODES]), size=n)
    time_h = rng.uniform(5.0, 240.0, size=n) / 60.0
    purpose = np.array(PURPOSES)[rng.integers(0, 3, size=n)]
    sample = BikeabilitySample(np.arange(n).astype(str), mode, time_h, purpose, flags,
                               groups=np.array([f"p{i:05d}" for i in person]))
    y = (rng.random(n) < score(sample, params)).astype(float)
    return sample.with_label(y)

