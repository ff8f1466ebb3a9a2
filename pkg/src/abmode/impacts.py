"""Expected CO2e emissions of a trip population with and without AB service."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .choice_core import KM_PER_MILE, N_MODES, ChoiceData, ModeId
from .errors import ConfigError, DomainError
from .simulation import ScenarioGrid, ScenarioSimulator, align_weights

IMPACT_COLUMNS = ("scenario", "variant", "cost", "wait", "percent_change")


@dataclass(frozen=True)
class EmissionScenario:
    """Background-fleet factors in gCO2e per passenger-km."""

    name: str
    car: float
    taxi: float
    bike: float
    walk: float
    transit: float

    def __post_init__(self):
        for k in ("car", "taxi", "bike", "walk", "transit"):
            v = getattr(self, k)
            if not (np.isfinite(v) and v >= 0):
                raise DomainError(f"{self.name}: {k} factor must be a nonnegative number")

    def with_transit(self, transit: float) -> "EmissionScenario":
        return EmissionScenario(self.name, self.car, self.taxi, self.bike, self.walk, float(transit))


# Transit factors are toolkit defaults (diesel bus for High, metro for Low,
# their mean for Mixed); override them for a specific city.
TRANSIT_PRESETS = {"High": 100.0, "Low": 30.0, "Mixed": 65.0}

BACKGROUND_SCENARIOS = {
    "High": EmissionScenario("High", 162.0, 91.0, 24.0, 0.0, TRANSIT_PRESETS["High"]),
    "Low": EmissionScenario("Low", 108.0, 52.0, 0.0, 0.0, TRANSIT_PRESETS["Low"]),
    "Mixed": EmissionScenario("Mixed", 135.0, 72.0, 12.0, 0.0, TRANSIT_PRESETS["Mixed"]),
}

AB_WAITS = (1.0, 3.0, 5.0, 7.0, 10.0, 15.0)
AB_LIFECYCLE = {
    "Baseline": (83.5, 57.5, 45.2, 42.5, 40.0, 38.1),
    "LongLifespan": (63.9, 48.3, 40.9, 39.3, 37.8, 36.7),
    "ShortLifespan": (181.8, 103.7, 66.9, 58.6, 51.2, 45.6),
    "HighInfrastructure": (104.6, 78.6, 66.4, 63.6, 61.2, 59.3),
}


@dataclass(frozen=True)
class ABLifecycleTable:
    """AB factors (gCO2e/pkm) per lifecycle variant and wait level (min).

    Waits between tabulated levels interpolate linearly unless
    ``interpolate`` is off; waits outside the tabulated range are rejected.
    """

    waits: tuple = AB_WAITS
    variants: Mapping[str, tuple] = field(default_factory=lambda: dict(AB_LIFECYCLE))
    interpolate: bool = True

    def __post_init__(self):
        waits = np.asarray(self.waits, float)
        if waits.ndim != 1 or len(waits) < 1 or np.any(np.diff(waits) <= 0):
            raise DomainError("AB table waits must be strictly increasing")
        clean = {}
        for name, vals in self.variants.items():
            v = tuple(float(x) for x in vals)
            if len(v) != len(waits):
                raise DomainError(f"variant {name!r} needs one factor per wait level")
            if any(x < 0 for x in v):
                raise DomainError(f"variant {name!r} has a negative factor")
            if np.any(np.diff(v) > 0):
                raise DomainError(f"variant {name!r} must be non-increasing in wait")
            clean[name] = v
        object.__setattr__(self, "waits", tuple(waits))
        object.__setattr__(self, "variants", clean)

    def factor(self, variant: str, wait: float) -> float:
        if variant not in self.variants:
            raise DomainError(f"unknown AB variant {variant!r}")
        waits = np.asarray(self.waits)
        vals = np.asarray(self.variants[variant])
        hit = np.flatnonzero(np.isclose(waits, wait, rtol=0, atol=1e-9))
        if len(hit):
            return float(vals[hit[0]])
        if not self.interpolate:
            raise DomainError(f"wait {wait} min is not a tabulated level and interpolation is off")
        if not waits[0] <= wait <= waits[-1]:
            raise DomainError(f"wait {wait} min lies outside [{waits[0]}, {waits[-1]}]")
        return float(np.interp(wait, waits, vals))


def mode_factors(scenario: EmissionScenario, ab_factor: float) -> np.ndarray:
    """Per-km factors in mode order; ABPT is handled separately."""
    f = np.zeros(N_MODES)
    f[ModeId.WALK] = scenario.walk
    f[ModeId.BIKE] = scenario.bike
    f[ModeId.CAR] = scenario.car
    f[ModeId.TRANSIT] = scenario.transit
    f[ModeId.TAXI] = scenario.taxi
    f[ModeId.AB] = ab_factor
    return f


def trip_emissions(distance_km, probs, abpt_bike_fraction, wait: float, scenario: EmissionScenario,
                   ab_table: ABLifecycleTable, variant: str = "Baseline"):
    """Expected gCO2e of trips given their mode probabilities.

    Parameters
    ----------
    distance_km : trip length(s) in km
    probs : probability vector(s) over the seven modes
    abpt_bike_fraction : share of an ABPT trip's distance ridden on the AB,
        taken as the bike share of its door-to-door time
    wait : AB wait (min) selecting the lifecycle factor
    scenario : background-fleet factors
    ab_table, variant : AB lifecycle factors

    Returns
    -------
    float or ndarray
        Expected emissions in grams, one per trip.
    """
    P = np.asarray(probs, float)
    d = np.asarray(distance_km, float)
    frac = np.asarray(abpt_bike_fraction, float)
    if np.any(d < 0):
        raise DomainError("distance must be nonnegative")
    if np.any((frac < 0) | (frac > 1)):
        raise DomainError("ABPT bike fraction must lie in [0, 1]")
    needs_ab = np.any(P[..., ModeId.AB] > 0) or np.any(P[..., ModeId.ABPT] > 0)
    ab = ab_table.factor(variant, wait) if needs_ab else 0.0
    f = mode_factors(scenario, ab)
    per_km = P @ f + P[..., ModeId.ABPT] * (frac * ab + (1.0 - frac) * scenario.transit)
    out = per_km * d
    return float(out) if np.ndim(out) == 0 else out


def trip_geometry(trips: ChoiceData) -> tuple[np.ndarray, np.ndarray]:
    """Distance in km and ABPT bike fraction per trip."""
    km = trips.cols["distance_mi"] * KM_PER_MILE
    total = trips.cols["abpt_total_time_h"]
    frac = np.divide(trips.cols["abpt_bike_time_h"], total, out=np.ones_like(total), where=total > 0)
    return km, np.clip(frac, 0.0, 1.0)


def scenario_total(probs, distance_km, abpt_bike_fraction, weights, wait: float, scenario: EmissionScenario,
                   ab_table: ABLifecycleTable, variant: str = "Baseline") -> float:
    e = trip_emissions(distance_km, probs, abpt_bike_fraction, wait, scenario, ab_table, variant)
    return float(np.dot(np.asarray(weights, float), np.atleast_1d(e)))


def relative_change(total_with_ab: float, total_baseline: float) -> float:
    """Percent change against the no-AB baseline; negative means fewer emissions."""
    if total_baseline == 0:
        raise DomainError("baseline emissions are zero; relative change is undefined")
    return 100.0 * (total_with_ab - total_baseline) / total_baseline


def impact_grid(simulator: ScenarioSimulator, weights=None, grid: ScenarioGrid = ScenarioGrid(),
                scenarios: Mapping[str, EmissionScenario] | None = None,
                ab_table: ABLifecycleTable | None = None, variants: Sequence[str] | None = None,
                adoption: bool = True) -> pd.DataFrame:
    """Percent change in emissions for every (scenario, variant, cell)."""
    scenarios = BACKGROUND_SCENARIOS if scenarios is None else scenarios
    ab_table = ABLifecycleTable() if ab_table is None else ab_table
    variants = tuple(ab_table.variants) if variants is None else tuple(variants)
    w = align_weights(simulator.trips, weights)
    km, frac = trip_geometry(simulator.trips)
    base_probs = simulator.baseline()
    cell_probs = [(cell, simulator.probabilities(cell, adoption=adoption)) for cell in grid.cells()]
    rows = []
    for sname, scen in scenarios.items():
        # the baseline has no AB trips, so its total does not depend on variant or wait
        base = scenario_total(base_probs, km, frac, w, grid.waits[0], scen, ab_table, variants[0])
        for variant in variants:
            for cell, P in cell_probs:
                total = scenario_total(P, km, frac, w, cell.wait, scen, ab_table, variant)
                rows.append({"scenario": sname, "variant": variant, "cost": cell.cost, "wait": cell.wait,
                             "percent_change": relative_change(total, base)})
    return pd.DataFrame(rows, columns=list(IMPACT_COLUMNS))


def read_emissions_ini(path) -> tuple[dict[str, EmissionScenario], ABLifecycleTable]:
    """Scenarios from ``[scenario NAME]`` sections, AB factors from ``[ab_table]``.

    A scenario section lists ``car``, ``taxi``, ``bike``, ``walk`` and
    ``transit``; transit may be omitted only for the built-in names, which
    then take the toolkit preset. ``[ab_table]`` has ``waits`` plus one
    comma-separated row per variant.
    """
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (configparser.Error, OSError) as exc:
        raise ConfigError(f"cannot read emissions file {path}: {exc}") from exc
    scenarios = {}
    try:
        for section in cp.sections():
            if not section.startswith("scenario "):
                continue
            name = section.split(" ", 1)[1].strip()
            sec = cp[section]
            if "transit" not in sec and name not in TRANSIT_PRESETS:
                raise ConfigError(f"[{section}] needs a transit factor")
            transit = sec.getfloat("transit", fallback=TRANSIT_PRESETS.get(name))
            scenarios[name] = EmissionScenario(name, sec.getfloat("car"), sec.getfloat("taxi"),
                                               sec.getfloat("bike"), sec.getfloat("walk", fallback=0.0), transit)
        table = ABLifecycleTable()
        if cp.has_section("ab_table"):
            sec = cp["ab_table"]
            waits = tuple(float(x) for x in sec.get("waits", ",".join(map(str, AB_WAITS))).split(","))
            variants = {k: tuple(float(x) for x in v.split(",")) for k, v in sec.items()
                        if k not in ("waits", "interpolate")}
            table = ABLifecycleTable(waits, variants or dict(AB_LIFECYCLE),
                                     sec.getboolean("interpolate", fallback=True))
    except (ValueError, TypeError, DomainError) as exc:
        raise ConfigError(f"invalid emissions file {path}: {exc}") from exc
    return scenarios or dict(BACKGROUND_SCENARIOS), table
