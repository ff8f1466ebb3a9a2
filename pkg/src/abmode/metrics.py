"""Cross-validated predictive accuracy and value-of-time ratios."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import pandas as pd

from .choice_core import MODE_NAMES, N_MODES, ChoiceData
from .draws import LatentDrawPlan
from .errors import ConfigError, DomainError
from .estimation import EstimationConfig, estimate
from .params import ParameterSet
from .simulation import predict_probabilities

VOT_COMPONENTS = {"time": "B_time", "active": "B_activetime", "wait": "B_wait"}
SCORING = ("argmax", "expected")


def vot(params: Mapping[str, float], component: str) -> float:
    """Value of time in USD/h: ``10 * B_component / B_cost``.

    Times enter the utilities in hours and costs in tens of USD, hence the
    factor 10.
    """
    if component not in VOT_COMPONENTS:
        raise DomainError(f"component must be one of {tuple(VOT_COMPONENTS)}")
    b_cost = params["B_cost"]
    if b_cost == 0:
        raise DomainError("B_cost is zero; value of time is undefined")
    return 10.0 * params[VOT_COMPONENTS[component]] / b_cost


@dataclass(frozen=True)
class FoldPlan:
    """Seeded assignment of individuals to ``k`` folds of near-equal size."""

    k: int = 5
    seed: int = 0

    def __post_init__(self):
        if int(self.k) < 2:
            raise ConfigError("k must be at least 2")

    def assign(self, ids) -> dict[str, int]:
        unique = np.unique(np.asarray(ids).astype(str))
        if len(unique) < self.k:
            raise ConfigError(f"{len(unique)} individuals cannot fill {self.k} folds")
        order = np.random.default_rng(self.seed).permutation(len(unique))
        folds = np.empty(len(unique), np.int64)
        folds[order] = np.arange(len(unique)) % self.k
        return dict(zip(unique.tolist(), folds.tolist()))


def classify_rows(probs: np.ndarray, avail: np.ndarray, rng: np.random.Generator, tol: float = 1e-12) -> np.ndarray:
    """Highest-probability available alternative, ties broken at random."""
    P = np.where(avail, probs, -np.inf)
    best = P.max(axis=1, keepdims=True)
    tied = P >= best - tol
    u = np.where(tied, rng.random(P.shape), -1.0)
    return u.argmax(axis=1)


def fold_scores(probs: np.ndarray, data: ChoiceData, scoring: str = "argmax",
                rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode recall (NaN where the mode is never chosen) and per-mode share gap in points."""
    if scoring not in SCORING:
        raise ConfigError(f"scoring must be one of {SCORING}")
    chosen = data.chosen
    rows = np.arange(len(chosen))
    if scoring == "argmax":
        hit = (classify_rows(probs, data.avail, rng or np.random.default_rng(0)) == chosen).astype(float)
    else:
        hit = probs[rows, chosen]
    recall = np.full(N_MODES, np.nan)
    for m in range(N_MODES):
        sel = chosen == m
        if sel.any():
            recall[m] = hit[sel].mean()
    actual = np.bincount(chosen, minlength=N_MODES) / len(chosen)
    predicted = probs.mean(axis=0)
    return recall, 100.0 * np.abs(predicted - actual)


FitPredict = Callable[[ChoiceData, ChoiceData], np.ndarray]


def model_fit_predict(kind: str, params: ParameterSet | None = None, config: EstimationConfig | None = None,
                      plan: LatentDrawPlan | None = None, backend=None) -> FitPredict:
    """Estimate ``kind`` on the training folds, return held-out unconditional probabilities."""

    def fit_predict(train: ChoiceData, test: ChoiceData) -> np.ndarray:
        result = estimate(kind, train, config=config, params=params, plan=plan, backend=backend)
        return predict_probabilities(test, result.params, plan, backend=backend)

    return fit_predict


@dataclass
class CVResult:
    """Per-fold metrics; rows are folds, columns the seven modes."""

    recall: np.ndarray
    share_gap: np.ndarray
    folds: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.recall)

    def mean_accuracy(self) -> np.ndarray:
        """Per fold, the mean recall over modes chosen in that fold."""
        return np.nanmean(self.recall, axis=1)

    def accuracy_table(self) -> pd.DataFrame:
        rows = [_row(f"{MODE_NAMES[m]} ({m})", self.recall[:, m]) for m in range(N_MODES)]
        rows.append(_row("mean accuracy", self.mean_accuracy()))
        rows.append(_row("std dev (per mode)", np.nanstd(self.recall, axis=1, ddof=1)))
        return pd.DataFrame(rows, columns=["mode", "mean", "sd"])

    def share_mad_table(self) -> pd.DataFrame:
        rows = [_row(f"{MODE_NAMES[m]} ({m})", self.share_gap[:, m]) for m in range(N_MODES)]
        rows.append(_row("mean over modes", self.share_gap.mean(axis=1)))
        return pd.DataFrame(rows, columns=["mode", "mean", "sd"])


def _row(label, values):
    v = np.asarray(values, float)
    v = v[np.isfinite(v)]
    if len(v) == 0:
        return {"mode": label, "mean": np.nan, "sd": np.nan}
    return {"mode": label, "mean": float(v.mean()), "sd": float(v.std(ddof=1)) if len(v) > 1 else np.nan}


def cv_evaluate(data: ChoiceData, fit_predict: FitPredict | str, plan: FoldPlan = FoldPlan(),
                scoring: str = "argmax", **model_kw) -> CVResult:
    """k-fold cross-validation split by individual.

    Parameters
    ----------
    data : panel of choice tasks
    fit_predict : callable ``(train, test) -> probabilities`` or a model kind
        passed to :func:`model_fit_predict` together with ``model_kw``
    plan : fold assignment
    scoring : "argmax" counts the highest-probability alternative as the
        prediction (seeded random tie-breaking); "expected" credits the
        probability of the chosen mode

    Returns
    -------
    CVResult
        Per-fold, per-mode recall (NaN when a mode is absent from the fold)
        and absolute share gaps in percentage points.
    """
    if isinstance(fit_predict, str):
        fit_predict = model_fit_predict(fit_predict, **model_kw)
    assignment = plan.assign(data.ids)
    fold_of = np.array([assignment[i] for i in data.ids])
    recall = np.empty((plan.k, N_MODES))
    gap = np.empty((plan.k, N_MODES))
    for f in range(plan.k):
        test_ids = data.ids[fold_of == f]
        train = data.subset_individuals(data.ids[fold_of != f])
        test = data.subset_individuals(test_ids)
        probs = np.asarray(fit_predict(train, test), float)
        if probs.shape != (len(test), N_MODES):
            raise DomainError(f"fit_predict returned shape {probs.shape}, expected {(len(test), N_MODES)}")
        rng = np.random.default_rng([plan.seed, f])
        recall[f], gap[f] = fold_scores(probs, test, scoring, rng)
    return CVResult(recall, gap, assignment)


def cv_tables(results: Mapping[str, CVResult], which: str = "accuracy") -> pd.DataFrame:
    """Side-by-side ``mean`` and ``sd`` columns per model."""
    if which not in ("accuracy", "share_mad"):
        raise ConfigError("which must be 'accuracy' or 'share_mad'")
    out = None
    for name, res in results.items():
        t = res.accuracy_table() if which == "accuracy" else res.share_mad_table()
        t = t.rename(columns={"mean": f"{name}_mean", "sd": f"{name}_sd"})
        out = t if out is None else out.merge(t, on="mode", sort=False)
    return out
