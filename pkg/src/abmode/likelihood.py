"""Choice kernels and log-likelihoods for the logit, panel mixed logit and hybrid models.

Each likelihood is exposed twice: a plain function returning the scalar
log-likelihood, and a ``*Problem`` class that caches the design and the draws
and returns per-individual contributions and scores, which is what the
estimator needs for the optimizer and for clustered covariance.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np
from scipy.special import ndtr

from .choice_core import LV_MASK, UTILITY_PARAMS, ChoiceData
from .draws import LatentDrawPlan
from .errors import ConfigError, DataError, DomainError, SpecificationError
from .kernels import panel_loglik
from .params import INDICATORS, STRUCTURAL_NAMES, STRUCTURAL_VARIABLES, ParameterSet

N_LIKERT = 5


def mnl_prob(utilities, availability) -> np.ndarray:
    """Logit probabilities over the available alternatives.

    Parameters
    ----------
    utilities : array_like, shape (J,) or (n, J)
    availability : boolean mask of the same shape, or an iterable of indices

    Returns
    -------
    ndarray
        Probabilities; exactly zero where unavailable.
    """
    v = np.asarray(utilities, dtype=float)
    avail = _as_mask(availability, v.shape)
    if not np.all(avail.any(axis=-1)):
        raise DomainError("at least one alternative must be available")
    vm = np.where(avail, v, -np.inf)
    vmax = vm.max(axis=-1, keepdims=True)
    e = np.where(avail, np.exp(vm - vmax), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


def _as_mask(availability, shape) -> np.ndarray:
    a = np.asarray(availability) if not isinstance(availability, (set, frozenset)) else None
    if a is not None and a.dtype == bool and a.shape == shape:
        return a
    mask = np.zeros(shape[-1], dtype=bool)
    mask[[int(i) for i in availability]] = True
    return np.broadcast_to(mask, shape)


def _utility_beta(params: ParameterSet) -> np.ndarray:
    return np.array([params[name] for name in UTILITY_PARAMS])


def _check_chosen(data: ChoiceData):
    ok = data.avail[np.arange(len(data)), data.chosen]
    if not ok.all():
        raise DataError("chosen mode is not available", row=int(np.flatnonzero(~ok)[0]), column="chosen")


class _Problem:
    """Shared bookkeeping: maps utility/structural scores onto a ParameterSet."""

    kind = ""

    def __init__(self, params: ParameterSet):
        self.params = params
        self.n_params = len(params)

    @property
    def n_obs(self) -> int:
        raise NotImplementedError

    def contributions(self, params: ParameterSet, want_grad: bool = True):
        raise NotImplementedError

    def loglik(self, params: ParameterSet) -> float:
        return float(np.sum(self.contributions(params, want_grad=False)[0]))

    def _scatter(self, target, names: Iterable[str], cols):
        for name, col in zip(names, cols.T if cols.ndim == 2 else [cols]):
            if name in self.params:
                target[:, self.params.index(name)] += col


class MNLProblem(_Problem):
    kind = "mnl"

    def __init__(self, data: ChoiceData, params: ParameterSet, weights=None):
        super().__init__(params)
        _check_chosen(data)
        self.data = data
        self.X = data.design(UTILITY_PARAMS)
        self.weights = np.ones(len(data)) if weights is None else np.asarray(weights, float)

    @property
    def n_obs(self):
        return len(self.data)

    def row_terms(self, params: ParameterSet, want_grad=True):
        beta = _utility_beta(params)
        V = self.X @ beta
        P = mnl_prob(V, self.data.avail)
        rows = np.arange(len(self.data))
        ch = self.data.chosen
        with np.errstate(divide="ignore"):
            logp = np.log(P[rows, ch])
        if not want_grad:
            return logp, None
        G = self.X[rows, ch, :] - np.einsum("tj,tjk->tk", P, self.X)
        return logp, G

    def contributions(self, params, want_grad=True):
        logp, G = self.row_terms(params, want_grad)
        seg = self.data.starts
        ll = np.add.reduceat(self.weights * logp, seg)
        if not want_grad:
            return ll, None
        score = np.zeros((self.data.n_individuals, self.n_params))
        self._scatter(score, UTILITY_PARAMS, np.add.reduceat(self.weights[:, None] * G, seg, axis=0))
        return ll, score

    def null_loglik(self) -> float:
        return float(-np.sum(self.weights * np.log(self.data.avail.sum(axis=1))))


class PanelProblem(_Problem):
    """Simulated panel likelihood shared by the mixed logit and hybrid models."""

    kind = "mixl"

    def __init__(self, data: ChoiceData, params: ParameterSet, plan: LatentDrawPlan, backend=None):
        super().__init__(params)
        if plan is None or int(plan.n_draws) < 1:
            raise ConfigError("a draw plan with at least one draw is required")
        _check_chosen(data)
        self.data = data
        self.plan = plan
        self.backend = backend
        self.X = data.design(UTILITY_PARAMS)
        self.random = params.random_coefficients
        for name in self.random:
            if name not in UTILITY_PARAMS:
                raise SpecificationError(f"random coefficient {name!r} is not a utility parameter")
        self.rand_idx = np.array([UTILITY_PARAMS.index(n) for n in self.random], dtype=np.int64)
        self.xi = plan.normal(data.ids, len(self.random)) if self.random else np.zeros((data.n_individuals, plan.n_draws, 0))

    @property
    def n_obs(self):
        return len(self.data)

    def _latent(self, params):
        n, R = self.data.n_individuals, int(self.plan.n_draws)
        return np.zeros((n, R)), np.zeros((n, R)), None

    def _run(self, params, want_grad):
        eff, extra, aux = self._latent(params)
        sd = np.array([params[f"{n}_sd"] for n in self.random])
        out = panel_loglik(self.X, self.data.avail, self.data.chosen, self.data.starts, self.data.counts,
                           _utility_beta(params), self.rand_idx, sd, self.xi, eff, LV_MASK, extra,
                           want_grad=want_grad, backend=self.backend)
        return out, aux

    def contributions(self, params, want_grad=True):
        (ll, g_beta, g_sd, w, de), aux = self._run(params, want_grad)
        if not want_grad:
            return ll, None
        score = np.zeros((self.data.n_individuals, self.n_params))
        self._scatter(score, UTILITY_PARAMS, g_beta)
        self._scatter(score, [f"{n}_sd" for n in self.random], g_sd)
        self._latent_scores(score, params, w, de, aux)
        return ll, score

    def _latent_scores(self, score, params, w, de, aux):
        pass

    def null_loglik(self) -> float:
        return float(-np.sum(np.log(self.data.avail.sum(axis=1))))


def structural_lv(socio, params, omega=0.0) -> np.ndarray | float:
    """Latent attitude: intercept + sum of coef_j * z_j + sigma_s * omega.

    ``socio`` is a ``Sociodemographics`` instance or a mapping of arrays.
    """
    get = (lambda k: getattr(socio, k)) if hasattr(socio, "as_dict") else (lambda k: np.asarray(socio[k], float))
    lv = params["coef_intercept"]
    for var in STRUCTURAL_VARIABLES:
        lv = lv + params[STRUCTURAL_NAMES[var]] * get(var)
    sigma = params["sigma_s"] if "sigma_s" in params else 1.0
    out = lv + sigma * np.asarray(omega, float)
    return float(out) if np.ndim(out) == 0 else out


def lv_effect(lv, b_lv):
    """Bounded utility shift of the AB alternatives: ``-b_lv * tanh(lv)``."""
    out = -b_lv * np.tanh(np.asarray(lv, float))
    return float(out) if np.ndim(out) == 0 else out


def thresholds(delta1, delta2) -> np.ndarray:
    if not (delta1 > 0 and delta2 > 0):
        raise DomainError("threshold parameters must be positive")
    return np.array([-np.inf, -delta1 - delta2, -delta1, delta1, delta1 + delta2, np.inf])


def _interval_prob(a, b):
    """Phi(a) - Phi(b) for a >= b, accurate in both tails."""
    return np.where(b > 0, ndtr(-b) - ndtr(-a), ndtr(a) - ndtr(b))


def ordered_probit_prob(y, lv, loading, intercept, scale, delta1, delta2):
    """P(y | lv) for a five-point ordered probit with symmetric thresholds."""
    if not scale > 0:
        raise DomainError("scale must be positive")
    tau = thresholds(delta1, delta2)
    y = np.asarray(y, dtype=np.int64)
    if np.any((y < 1) | (y > N_LIKERT)):
        raise DomainError("indicator responses must lie in 1..5")
    mu = intercept + loading * np.asarray(lv, float)
    p = _interval_prob((tau[y] - mu) / scale, (tau[y - 1] - mu) / scale)
    return float(p) if np.ndim(p) == 0 else p


def _phi(x):
    out = np.exp(-0.5 * np.where(np.isfinite(x), x, 0.0) ** 2) / np.sqrt(2 * np.pi)
    return np.where(np.isfinite(x), out, 0.0)


def _ordered_probit_terms(y, mu, scale, delta1, delta2):
    """log P(y) and its derivatives w.r.t. mu, scale, delta1, delta2."""
    tau = thresholds(delta1, delta2)
    dtau1 = np.array([0.0, -1.0, -1.0, 1.0, 1.0, 0.0])
    dtau2 = np.array([0.0, -1.0, 0.0, 0.0, 1.0, 0.0])
    hi, lo = tau[y], tau[y - 1]
    a = (hi - mu) / scale
    b = (lo - mu) / scale
    p = _interval_prob(a, b)
    fa, fb = _phi(a), _phi(b)
    afa = np.where(np.isfinite(a), a, 0.0) * fa
    bfb = np.where(np.isfinite(b), b, 0.0) * fb
    denom = scale * p
    d_mu = -(fa - fb) / denom
    d_scale = -(afa - bfb) / denom
    d_d1 = (fa * dtau1[y] - fb * dtau1[y - 1]) / denom
    d_d2 = (fa * dtau2[y] - fb * dtau2[y - 1]) / denom
    return np.log(p), d_mu, d_scale, d_d1, d_d2


class HCMProblem(PanelProblem):
    """Joint likelihood of choices and the two attitudinal indicators."""

    kind = "hcm"

    def __init__(self, data: ChoiceData, params: ParameterSet, plan: LatentDrawPlan, backend=None):
        super().__init__(data, params, plan, backend)
        if self.random:
            raise SpecificationError("random coefficients are not supported in the hybrid model")
        for ind in INDICATORS:
            if ind not in data.cols:
                raise DataError("missing indicator", column=ind)
            y = data.cols[ind]
            bad = ~np.isfinite(y) | (y < 1) | (y > N_LIKERT) | (y != np.round(y))
            if bad.any():
                raise DataError("indicator must be an integer in 1..5", row=int(np.flatnonzero(bad)[0]), column=ind)
        self.y = {ind: data.individual_column(ind).astype(np.int64) for ind in INDICATORS}
        self.z = np.column_stack([data.individual_column(v) for v in STRUCTURAL_VARIABLES])
        self.omega = plan.normal(data.ids, 1)[:, :, 0]

    def _latent(self, params):
        coef = np.array([params[STRUCTURAL_NAMES[v]] for v in STRUCTURAL_VARIABLES])
        mean = params["coef_intercept"] + self.z @ coef
        sigma_s = params["sigma_s"]
        lv = mean[:, None] + sigma_s * self.omega
        th = np.tanh(lv)
        eff = -params["B_lv"] * th
        extra = np.zeros_like(lv)
        meas = {}
        for ind in INDICATORS:
            lam, alpha, scale = params[f"B_{ind}"], params[f"INTER_{ind}"], params[f"SIGMA_{ind}"]
            if not scale > 0:
                raise DomainError(f"SIGMA_{ind} must be positive")
            terms = _ordered_probit_terms(self.y[ind][:, None], alpha + lam * lv, scale,
                                          params["delta_1"], params["delta_2"])
            extra += terms[0]
            meas[ind] = terms
        return eff, extra, (lv, th, meas)

    def _latent_scores(self, score, params, w, de, aux):
        lv, th, meas = aux
        b_lv = params["B_lv"]
        self._scatter(score, ["B_lv"], np.sum(w * de * (-th), axis=1))
        d_lv = de * (-b_lv * (1.0 - th ** 2))
        for ind in INDICATORS:
            _, d_mu, d_scale, d_d1, d_d2 = meas[ind]
            lam = params[f"B_{ind}"]
            d_lv = d_lv + d_mu * lam
            self._scatter(score, [f"B_{ind}"], np.sum(w * d_mu * lv, axis=1))
            self._scatter(score, [f"INTER_{ind}"], np.sum(w * d_mu, axis=1))
            self._scatter(score, [f"SIGMA_{ind}"], np.sum(w * d_scale, axis=1))
            self._scatter(score, ["delta_1"], np.sum(w * d_d1, axis=1))
            self._scatter(score, ["delta_2"], np.sum(w * d_d2, axis=1))
        g_lv = np.sum(w * d_lv, axis=1)
        self._scatter(score, ["coef_intercept"], g_lv)
        for j, var in enumerate(STRUCTURAL_VARIABLES):
            self._scatter(score, [STRUCTURAL_NAMES[var]], g_lv * self.z[:, j])
        self._scatter(score, ["sigma_s"], np.sum(w * d_lv * self.omega, axis=1))

    def null_loglik(self) -> float:
        choice = super().null_loglik()
        return choice - len(INDICATORS) * self.data.n_individuals * np.log(N_LIKERT)


class BinaryProblem(_Problem):
    """Binary logit on a plain design matrix; rows cluster by ``groups``."""

    kind = "binary"

    def __init__(self, X, y, params: ParameterSet, names, groups=None):
        super().__init__(params)
        self.X = np.asarray(X, float)
        self.y = np.asarray(y, float)
        self.names = list(names)
        for n in self.names:
            params.index(n)
        if groups is None:
            groups = np.arange(len(self.y))
        groups = np.asarray(groups).astype(str)
        order = np.argsort(groups, kind="stable")
        self.X, self.y, groups = self.X[order], self.y[order], groups[order]
        _, self.starts = np.unique(groups, return_index=True)

    @property
    def n_obs(self):
        return len(self.y)

    def contributions(self, params, want_grad=True):
        beta = np.array([params[n] for n in self.names])
        v = self.X @ beta
        # log-sigmoid without overflow
        logp = np.where(self.y > 0, -np.logaddexp(0.0, -v), -np.logaddexp(0.0, v))
        ll = np.add.reduceat(logp, self.starts)
        if not want_grad:
            return ll, None
        resid = self.y - 0.5 * (1.0 + np.tanh(0.5 * v))
        score = np.zeros((len(self.starts), self.n_params))
        self._scatter(score, self.names, np.add.reduceat(resid[:, None] * self.X, self.starts, axis=0))
        return ll, score

    def null_loglik(self) -> float:
        return float(-len(self.y) * np.log(2.0))


def make_problem(kind: str, data, params: ParameterSet, plan: LatentDrawPlan | None = None, **kw) -> _Problem:
    kind = kind.lower()
    if kind == "mnl":
        return MNLProblem(data, params, **kw)
    if kind == "mixl":
        return PanelProblem(data, params, plan, **kw)
    if kind == "hcm":
        return HCMProblem(data, params, plan, **kw)
    raise SpecificationError(f"unknown model kind {kind!r}")


def mnl_loglik(data: ChoiceData, params: ParameterSet, weights=None) -> float:
    """Weighted sum of log choice probabilities under the deterministic utilities."""
    return MNLProblem(data, params, weights).loglik(params)


def mixl_loglik(data: ChoiceData, params: ParameterSet, plan: LatentDrawPlan, backend=None) -> float:
    return PanelProblem(data, params, plan, backend).loglik(params)


def hcm_loglik(data: ChoiceData, params: ParameterSet, plan: LatentDrawPlan, backend=None) -> float:
    return HCMProblem(data, params, plan, backend).loglik(params)
