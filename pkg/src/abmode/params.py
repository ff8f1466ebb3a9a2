"""Named parameter collections with fixed/free flags and positivity transforms."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Mapping

import numpy as np

from .choice_core import UTILITY_PARAMS
from .errors import SpecificationError

ROLES = ("asc", "beta", "sd", "structural", "loading", "intercept", "scale", "threshold")
# roles estimated on the log scale
POSITIVE_ROLES = frozenset({"sd", "scale", "threshold"})

RANDOM_COEFFICIENTS = ("ASC_ab", "ASC_abpt", "B_cost", "B_activetime")
STRUCTURAL_VARIABLES = ("children", "higher_ed", "high_income", "hot_summer", "white", "woman", "young")
STRUCTURAL_NAMES = {
    "children": "coef_children", "higher_ed": "coef_higher_ed", "high_income": "coef_highincome",
    "hot_summer": "coef_hotsummer", "white": "coef_white", "woman": "coef_woman", "young": "coef_young",
}
INDICATORS = ("I10", "I11")
# coefficients absent from the baseline and mixed logit models
HCM_ONLY_BETAS = ("B_errands", "B_highincome", "B_hotsummer", "B_ptshortwait")


@dataclass(frozen=True)
class Parameter:
    name: str
    value: float
    fixed: bool = False
    role: str = "beta"
    se: float | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise SpecificationError(f"unknown role {self.role!r} for {self.name}")
        if self.role in POSITIVE_ROLES and not self.fixed and not self.value > 0:
            raise SpecificationError(f"{self.name} must be positive, got {self.value}")


class ParameterSet(Mapping[str, float]):
    """Ordered, immutable collection of model parameters.

    Behaves as a read-only mapping from name to value. Free parameters with a
    positive role are optimized on the log scale; see :meth:`to_working`.
    """

    def __init__(self, params: Iterable[Parameter]):
        self._params = tuple(params)
        self._index = {p.name: i for i, p in enumerate(self._params)}
        if len(self._index) != len(self._params):
            raise SpecificationError("parameter names must be unique")
        if "ASC_car" in self._index and not (self.param("ASC_car").fixed and self["ASC_car"] == 0.0):
            raise SpecificationError("ASC_car must be fixed at 0")

    # mapping protocol
    def __getitem__(self, name: str) -> float:
        try:
            return self._params[self._index[name]].value
        except KeyError:
            raise SpecificationError(f"parameter {name!r} is not defined") from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._index)

    def __len__(self) -> int:
        return len(self._params)

    def __repr__(self):
        body = ", ".join(f"{p.name}={p.value:.4g}{'*' if p.fixed else ''}" for p in self._params)
        return f"ParameterSet({body})"

    def param(self, name: str) -> Parameter:
        try:
            return self._params[self._index[name]]
        except KeyError:
            raise SpecificationError(f"parameter {name!r} is not defined") from None

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SpecificationError(f"parameter {name!r} is not defined") from None

    @property
    def parameters(self) -> tuple[Parameter, ...]:
        return self._params

    @property
    def names(self) -> list[str]:
        return [p.name for p in self._params]

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self._params], dtype=float)

    @property
    def free_mask(self) -> np.ndarray:
        return np.array([not p.fixed for p in self._params])

    @property
    def free_names(self) -> list[str]:
        return [p.name for p in self._params if not p.fixed]

    @property
    def n_free(self) -> int:
        return int(self.free_mask.sum())

    @property
    def log_mask(self) -> np.ndarray:
        return np.array([p.role in POSITIVE_ROLES and not p.fixed for p in self._params])

    def names_with_role(self, role: str) -> list[str]:
        return [p.name for p in self._params if p.role == role]

    def with_values(self, values) -> "ParameterSet":
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self),):
            raise ValueError("value vector has the wrong length")
        return ParameterSet(replace(p, value=float(v)) for p, v in zip(self._params, values))

    def updated(self, **changes) -> "ParameterSet":
        """Copy with some values replaced; unknown names raise."""
        for name in changes:
            self.index(name)
        return ParameterSet(
            replace(p, value=float(changes[p.name])) if p.name in changes else p for p in self._params
        )

    def fix(self, *names: str, value: float | None = None) -> "ParameterSet":
        for name in names:
            self.index(name)
        out = []
        for p in self._params:
            if p.name in names:
                p = replace(p, fixed=True, value=p.value if value is None else float(value))
            out.append(p)
        return ParameterSet(out)

    def free(self, *names: str) -> "ParameterSet":
        for name in names:
            self.index(name)
        return ParameterSet(replace(p, fixed=False) if p.name in names else p for p in self._params)

    def with_se(self, se: Mapping[str, float]) -> "ParameterSet":
        return ParameterSet(replace(p, se=se.get(p.name)) for p in self._params)

    # working (unconstrained) space for the free subset
    def to_working(self) -> np.ndarray:
        v = self.values
        logm = self.log_mask
        v[logm] = np.log(v[logm])
        return v[self.free_mask]

    def from_working(self, w) -> "ParameterSet":
        v = self.values
        free = self.free_mask
        full = v.copy()
        full[free] = np.asarray(w, dtype=float)
        logm = self.log_mask
        full[logm] = np.exp(full[logm])
        return self.with_values(full)

    def working_jacobian(self) -> np.ndarray:
        """d(natural value)/d(working value) for each free parameter."""
        v = self.values
        return np.where(self.log_mask, v, 1.0)[self.free_mask]

    def to_dict(self) -> list[dict]:
        return [
            {"name": p.name, "value": p.value, "fixed": p.fixed, "role": p.role, "se": p.se}
            for p in self._params
        ]

    @classmethod
    def from_dict(cls, items) -> "ParameterSet":
        return cls(
            Parameter(d["name"], float(d["value"]), bool(d.get("fixed", False)), d.get("role", "beta"),
                      None if d.get("se") is None else float(d["se"]))
            for d in items
        )

    @property
    def random_coefficients(self) -> list[str]:
        """Utility coefficients that carry a normal mixing distribution."""
        return [p.name[:-3] for p in self._params if p.role == "sd"]

    @property
    def has_latent_variable(self) -> bool:
        return "B_lv" in self._index


def _utility_params(start: float = 0.0, excluded: Iterable[str] = ()) -> list[Parameter]:
    excluded = set(excluded)
    out = []
    for name in UTILITY_PARAMS:
        role = "asc" if name.startswith("ASC_") else "beta"
        if name == "ASC_car" or name in excluded:
            out.append(Parameter(name, 0.0, True, role))
        else:
            out.append(Parameter(name, start, False, role))
    return out


def mnl_parameters(include_hcm_betas: bool = False) -> ParameterSet:
    """Baseline logit parameter set: 18 free parameters."""
    return ParameterSet(_utility_params(excluded=() if include_hcm_betas else HCM_ONLY_BETAS))


def mixl_parameters(random: Iterable[str] = RANDOM_COEFFICIENTS, sd_start: float = float(np.exp(0.5))) -> ParameterSet:
    """Panel mixed logit: baseline terms plus a normal sd per random coefficient."""
    base = list(_utility_params(excluded=HCM_ONLY_BETAS))
    for name in random:
        if name not in UTILITY_PARAMS:
            raise SpecificationError(f"random coefficient {name!r} is not a utility parameter")
        base.append(Parameter(f"{name}_sd", sd_start, False, "sd"))
    return ParameterSet(base)


def hcm_parameters(estimate_sigma_s: bool = True, start_positive: float = float(np.exp(0.5))) -> ParameterSet:
    """Hybrid choice parameter set: utilities, latent-variable equations and the measurement model.

    With ``estimate_sigma_s`` the set has 37 free parameters. The I10 loading,
    intercept and scale are fixed at -1, 0 and 1.
    """
    out = _utility_params()
    out.append(Parameter("B_lv", 0.0, False, "beta"))
    out.append(Parameter("coef_intercept", 0.0, False, "structural"))
    for var in STRUCTURAL_VARIABLES:
        out.append(Parameter(STRUCTURAL_NAMES[var], 0.0, False, "structural"))
    out.append(Parameter("sigma_s", start_positive if estimate_sigma_s else 1.0, not estimate_sigma_s, "scale"))
    out += [
        Parameter("B_I10", -1.0, True, "loading"),
        Parameter("INTER_I10", 0.0, True, "intercept"),
        Parameter("SIGMA_I10", 1.0, True, "scale"),
        Parameter("B_I11", 0.0, False, "loading"),
        Parameter("INTER_I11", 0.0, False, "intercept"),
        Parameter("SIGMA_I11", start_positive, False, "scale"),
        Parameter("delta_1", start_positive, False, "threshold"),
        Parameter("delta_2", start_positive, False, "threshold"),
    ]
    return ParameterSet(out)


BIKEABILITY_PARAMS = (
    "ASC", "B_walk", "B_PT", "B_taxi", "B_time", "B_fulltime", "B_woman", "B_older",
    "B_student", "B_higher_ed", "B_children", "B_time_leisure", "B_harshwinter",
)


def bikeability_parameters(values: Mapping[str, float] | None = None) -> ParameterSet:
    values = values or {}
    return ParameterSet(
        Parameter(n, float(values.get(n, 0.0)), False, "asc" if n == "ASC" else "beta")
        for n in BIKEABILITY_PARAMS
    )


def default_parameters(kind: str) -> ParameterSet:
    kind = kind.lower()
    if kind == "mnl":
        return mnl_parameters()
    if kind == "mixl":
        return mixl_parameters()
    if kind == "hcm":
        return hcm_parameters()
    if kind in ("binary", "bikeability"):
        return bikeability_parameters()
    raise SpecificationError(f"unknown model kind {kind!r}")


def model_kind(params: ParameterSet) -> str:
    """Infer the likelihood family from the parameters present."""
    if params.has_latent_variable:
        return "hcm"
    if params.random_coefficients:
        return "mixl"
    if "ASC" in params and "B_time_leisure" in params:
        return "binary"
    return "mnl"


# Published point estimates, kept as fixtures for simulation and VOT checks.
REFERENCE_MNL = {
    "ASC_ab": 0.983, "ASC_abpt": -0.106, "ASC_bike": 0.84, "ASC_pt": -1.03, "ASC_taxi": -0.594,
    "ASC_walk": 1.23, "B_activetime": -4.35, "B_carowner": 0.152, "B_children": 0.555,
    "B_cost": -1.13, "B_fulltime": 0.346, "B_higher_ed": 0.259, "B_leisure": 0.191,
    "B_older": 0.822, "B_time": -1.79, "B_wait": -3.31, "B_white": 0.491, "B_work": 0.385,
}
REFERENCE_MIXL = {
    "ASC_ab": 4.12, "ASC_ab_sd": 4.8, "ASC_abpt": -1.33, "ASC_abpt_sd": 7.18, "ASC_bike": 3.05,
    "ASC_pt": -2.73, "ASC_taxi": -0.161, "ASC_walk": 3.57, "B_activetime": -18.9,
    "B_activetime_sd": 10.8, "B_carowner": 0.874, "B_children": 0.978, "B_cost": -7.95,
    "B_cost_sd": 6.13, "B_fulltime": 0.432, "B_higher_ed": 0.71, "B_leisure": 0.806,
    "B_older": 3.04, "B_time": -6.52, "B_wait": -9.52, "B_white": 1.56, "B_work": 0.599,
}
REFERENCE_HCM = {
    "ASC_ab": 0.712, "ASC_abpt": -0.695, "ASC_bike": 1.6, "ASC_pt": -0.785, "ASC_taxi": 0.591,
    "ASC_walk": 1.87, "B_activetime": -4.64, "B_carowner": 0.124, "B_children": 0.328,
    "B_cost": -1.17, "B_errands": 0.36, "B_fulltime": 0.315, "B_higher_ed": 0.22,
    "B_highincome": -0.0873, "B_hotsummer": 0.284, "B_leisure": 0.0353, "B_older": 0.878,
    "B_ptshortwait": 0.374, "B_time": -1.84, "B_wait": -3.75, "B_white": 0.477, "B_work": 0.363,
    "B_lv": 1.59,
    "coef_children": -0.494, "coef_higher_ed": 0.395, "coef_highincome": -0.198,
    "coef_hotsummer": -0.517, "coef_intercept": -1.88, "coef_white": 0.271, "coef_woman": 0.31,
    "coef_young": 0.0372,
    "B_I11": 0.934, "INTER_I11": 1.17, "SIGMA_I11": 1.75,
}
REFERENCE_BIKEABILITY = {
    "ASC": 1.370, "B_PT": 0.691, "B_children": 0.100, "B_fulltime": 0.147, "B_harshwinter": 0.154,
    "B_higher_ed": -0.123, "B_older": -0.262, "B_student": 0.239, "B_taxi": 0.389, "B_time": -0.540,
    "B_time_leisure": 0.164, "B_walk": 0.649, "B_woman": -0.271,
}


def reference_parameters(kind: str) -> ParameterSet:
    """Published point estimates loaded into the matching parameter set.

    Values not reported (``sigma_s`` and the thresholds of the hybrid model)
    keep their parameter-set defaults of 1.
    """
    kind = kind.lower()
    if kind == "mnl":
        return mnl_parameters().updated(**REFERENCE_MNL)
    if kind == "mixl":
        return mixl_parameters().updated(**REFERENCE_MIXL)
    if kind == "hcm":
        return hcm_parameters().updated(**REFERENCE_HCM, sigma_s=1.0, delta_1=1.0, delta_2=1.0)
    if kind in ("binary", "bikeability"):
        return bikeability_parameters(REFERENCE_BIKEABILITY)
    raise SpecificationError(f"unknown model kind {kind!r}")
