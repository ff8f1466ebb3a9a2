"""Plain-text model config files.

A spec file is INI with optional sections::

    [model]
    random = ASC_ab, ASC_abpt, B_cost, B_activetime   ; mixed logit
    estimate_sigma_s = true                            ; hybrid model
    include_hcm_betas = false                          ; logit
    reference_start = false                            ; start at published estimates

    [start]
    B_cost = -1.0

    [fix]
    B_errands = 0

    [optimizer]
    gtol = 1e-5
    max_iter = 500
"""
from __future__ import annotations

import configparser
from dataclasses import fields

from .errors import ConfigError, SpecificationError
from .estimation import EstimationConfig
from .params import (RANDOM_COEFFICIENTS, ParameterSet, bikeability_parameters, hcm_parameters, mixl_parameters,
                     mnl_parameters, reference_parameters)

MODEL_KINDS = ("mnl", "mixl", "hcm", "bikeability")


def _parser(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (configparser.Error, OSError) as exc:
        raise ConfigError(f"cannot read spec file {path}: {exc}") from exc
    return cp


def model_spec(kind: str, path=None) -> tuple[ParameterSet, EstimationConfig]:
    """Starting parameters and optimizer settings for ``kind``, optionally from a spec file."""
    if kind not in MODEL_KINDS:
        raise ConfigError(f"model must be one of {MODEL_KINDS}")
    cp = _parser(path) if path is not None else configparser.ConfigParser()
    model = cp["model"] if cp.has_section("model") else {}
    try:
        if kind == "mnl":
            flag = str(model.get("include_hcm_betas", "false")).lower() in ("1", "true", "yes", "on")
            params = mnl_parameters(include_hcm_betas=flag)
        elif kind == "mixl":
            random = model.get("random")
            names = RANDOM_COEFFICIENTS if random is None else tuple(s.strip() for s in random.split(",") if s.strip())
            params = mixl_parameters(names)
        elif kind == "hcm":
            flag = str(model.get("estimate_sigma_s", "true")).lower() in ("1", "true", "yes", "on")
            params = hcm_parameters(estimate_sigma_s=flag)
        else:
            params = bikeability_parameters()
        if str(model.get("reference_start", "false")).lower() in ("1", "true", "yes", "on"):
            ref = reference_parameters("binary" if kind == "bikeability" else kind)
            params = params.updated(**{n: ref[n] for n in params if n in ref and not params.param(n).fixed})
        if cp.has_section("start"):
            params = params.updated(**{k: float(v) for k, v in cp.items("start")})
        if cp.has_section("fix"):
            for k, v in cp.items("fix"):
                params = params.fix(k, value=float(v))
        opts = {}
        if cp.has_section("optimizer"):
            known = {f.name for f in fields(EstimationConfig)}
            for k, v in cp.items("optimizer"):
                if k not in known:
                    raise ConfigError(f"unknown optimizer option {k!r}")
                opts[k] = int(v) if k in ("max_iter", "newton_steps") else float(v)
        return params, EstimationConfig(**opts)
    except ConfigError:
        raise
    except SpecificationError as exc:
        raise ConfigError(f"invalid spec: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"invalid spec value: {exc}") from exc
