"""Raking of respondent weights to one-way reference margins."""
from __future__ import annotations

import configparser
import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import pandas as pd

from .choice_core import MODE_NAMES, PURPOSE_FLAGS, SOCIO_FLAGS, ChoiceData
from .errors import ConfigError, DataError, DomainError

logger = logging.getLogger(__name__)


class InfeasibleTargetError(DomainError):
    """A positive target has no respondents to carry it."""

    def __init__(self, variable, category):
        self.variable = variable
        self.category = category
        super().__init__(f"target for {variable}={category} is positive but no respondent falls in that category")


def category_key(value) -> str:
    """Canonical string for a category label, so 1, 1.0 and "1" coincide."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)) and float(value).is_integer():
        return str(int(value))
    return str(value).strip().lower()


@dataclass(frozen=True)
class MarginTargets:
    """Target proportions per categorical variable.

    Each variable's proportions must sum to 1 within ``atol``. Published
    tables rounded to three decimals rarely do; :meth:`normalized` rescales
    them first.
    """

    margins: Mapping[str, Mapping[str, float]]
    atol: float = 1e-9

    def __post_init__(self):
        clean = {}
        for var, cats in self.margins.items():
            if not cats:
                raise DomainError(f"variable {var!r} has no categories")
            c = {category_key(k): float(v) for k, v in cats.items()}
            if any(not np.isfinite(v) or v < 0 for v in c.values()):
                raise DomainError(f"target proportions for {var!r} must be nonnegative")
            total = sum(c.values())
            if abs(total - 1.0) > self.atol:
                raise DomainError(f"target proportions for {var!r} sum to {total:.6g}, not 1")
            clean[str(var)] = c
        object.__setattr__(self, "margins", clean)

    @classmethod
    def normalized(cls, margins: Mapping[str, Mapping]) -> "MarginTargets":
        out = {}
        for var, cats in margins.items():
            total = float(sum(cats.values()))
            if total <= 0:
                raise DomainError(f"target proportions for {var!r} sum to zero")
            out[var] = {k: float(v) / total for k, v in cats.items()}
        return cls(out)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(self.margins)

    def reordered(self, order) -> "MarginTargets":
        return MarginTargets({v: self.margins[v] for v in order})

    @classmethod
    def read_ini(cls, path, normalize: bool = False) -> "MarginTargets":
        """One section per variable, one ``category = proportion`` line per category."""
        cp = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (configparser.Error, OSError) as exc:
            raise ConfigError(f"cannot read targets file {path}: {exc}") from exc
        margins = {}
        for section in cp.sections():
            if section == "options":
                normalize = cp.getboolean("options", "normalize", fallback=normalize)
                continue
            try:
                margins[section] = {k: float(v) for k, v in cp.items(section)}
            except ValueError as exc:
                raise ConfigError(f"non-numeric proportion in section [{section}]") from exc
        if not margins:
            raise ConfigError(f"no target sections in {path}")
        try:
            return cls.normalized(margins) if normalize else cls(margins)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc


# Reference margins of bikeable trips, as published (rounded to 3 decimals).
NHTS_BIKEABLE_MARGINS = {
    "purpose": {"work": 0.327, "leisure": 0.317, "errands": 0.357},
    "mode": {"car": 0.134, "walk": 0.012, "bike": 0.785, "transit": 0.060, "taxi": 0.007},
    "woman": {0: 0.596, 1: 0.404},
    "young": {1: 0.391, 0: 0.609},
    "older": {1: 0.211, 0: 0.789},
    "higher_ed": {1: 0.310, 0: 0.690},
    "low_income": {1: 0.222, 0: 0.778},
    "high_income": {1: 0.518, 0: 0.482},
}


def nhts_bikeable_targets() -> MarginTargets:
    return MarginTargets.normalized(NHTS_BIKEABLE_MARGINS)


@dataclass
class IPFResult:
    weights: np.ndarray
    iterations: int
    converged: bool
    max_deviation: float
    history: list = field(default_factory=list)


def _codes(sample: pd.DataFrame, targets: MarginTargets):
    """Integer category codes per variable plus the aligned target vectors."""
    out = []
    for var, cats in targets.margins.items():
        if var not in sample.columns:
            raise DataError(f"sample lacks raking variable {var!r}", column=var)
        keys = np.array([category_key(v) for v in sample[var].to_numpy()])
        names = list(cats)
        unknown = sorted(set(keys) - set(names))
        if unknown:
            raise DataError(f"category {unknown[0]!r} has no target", column=var)
        lookup = {k: i for i, k in enumerate(names)}
        code = np.array([lookup[k] for k in keys], np.int64)
        target = np.array([cats[k] for k in names])
        counts = np.bincount(code, minlength=len(names))
        for k, name in enumerate(names):
            if target[k] > 0 and counts[k] == 0:
                raise InfeasibleTargetError(var, name)
        out.append((var, code, target))
    return out


def _deviation(w, coded):
    total = w.sum()
    return max(float(np.max(np.abs(np.bincount(code, w, len(t)) / total - t))) for _, code, t in coded)


def ipf_fit(sample: pd.DataFrame, targets: MarginTargets, tol: float = 1e-6, max_iter: int = 200,
            base_weights=None, trim_quantile: float | None = None) -> IPFResult:
    """Rake weights so every weighted one-way margin matches ``targets``.

    Parameters
    ----------
    sample : one row per respondent; a column per raking variable
    targets : target proportions per variable
    tol : maximum absolute margin deviation accepted
    max_iter : maximum number of sweeps over all variables
    base_weights : starting weights, default 1
    trim_quantile : if set (e.g. 0.99), cap converged weights at that
        quantile and renormalize; margins then hold only approximately

    Returns
    -------
    IPFResult
        Weights normalized to mean 1, the number of sweeps, and a flag that
        is False when ``max_iter`` sweeps did not reach ``tol``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1")
    coded = _codes(sample, targets)
    n = len(sample)
    w = np.ones(n) if base_weights is None else np.asarray(base_weights, float).copy()
    if len(w) != n or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("base weights must be finite, nonnegative and aligned to the sample")
    history = []
    converged = False
    sweeps = 0
    dev = _deviation(w, coded)
    for sweeps in range(1, max_iter + 1):
        for var, code, target in coded:
            current = np.bincount(code, w, len(target))
            share = current / current.sum()
            empty = np.flatnonzero((share == 0) & (target > 0))
            if len(empty):
                raise InfeasibleTargetError(var, list(targets.margins[var])[empty[0]])
            factor = np.divide(target, share, out=np.zeros_like(target), where=share > 0)
            w = w * factor[code]
        dev = _deviation(w, coded)
        history.append(dev)
        if dev < tol:
            converged = True
            break
    w = w * (n / w.sum())
    if trim_quantile is not None:
        cap = np.quantile(w, trim_quantile)
        w = np.minimum(w, cap)
        w = w * (n / w.sum())
        dev = _deviation(w, coded)
    if not converged:
        logger.warning("raking stopped after %d sweeps with max deviation %.3g", sweeps, dev)
    return IPFResult(w, sweeps, converged, dev, history)


def weighted_proportions(sample: pd.DataFrame, weights, variable: str) -> dict[str, float]:
    w = np.asarray(weights, float)
    keys = np.array([category_key(v) for v in sample[variable].to_numpy()])
    total = w.sum()
    return {k: float(w[keys == k].sum() / total) for k in sorted(set(keys))}


def margin_report(sample: pd.DataFrame, weights, targets: MarginTargets) -> dict[str, float]:
    """Largest absolute gap between weighted and target proportion, per variable."""
    out = {}
    for var, cats in targets.margins.items():
        props = weighted_proportions(sample, weights, var)
        out[var] = max(abs(props.get(k, 0.0) - t) for k, t in cats.items())
    return out


def respondent_frame(data: ChoiceData) -> pd.DataFrame:
    """One row per individual with the categorical variables used for raking."""
    first = data.starts
    purpose_names = [f.removesuffix("_trip") for f in PURPOSE_FLAGS]
    flags = np.column_stack([data.cols[f][first] for f in PURPOSE_FLAGS])
    purpose = [purpose_names[int(np.argmax(row))] if row.any() else "errands" for row in flags]
    frame = pd.DataFrame({
        "individual_id": data.ids,
        "purpose": purpose,
        "mode": [MODE_NAMES[m] for m in data.original_mode()[first]],
    })
    for f in SOCIO_FLAGS:
        frame[f] = data.cols[f][first].astype(int)
    return frame


def write_weights(path, individual_ids, weights) -> None:
    pd.DataFrame({"individual_id": individual_ids, "weight": weights}).to_csv(
        path, index=False, float_format="%.12g", lineterminator="\n")


def read_weights(path) -> dict[str, float]:
    df = pd.read_csv(path, dtype={"individual_id": str})
    for c in ("individual_id", "weight"):
        if c not in df.columns:
            raise DataError(f"missing required column {c!r}", column=c)
    w = pd.to_numeric(df["weight"], errors="coerce").to_numpy(float)
    bad = ~np.isfinite(w) | (w < 0)
    if bad.any():
        raise DataError("weight must be a nonnegative number", row=int(np.flatnonzero(bad)[0]), column="weight")
    return dict(zip(df["individual_id"], w))
