"""Maximum-likelihood estimation with robust (clustered sandwich) covariance."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .draws import LatentDrawPlan
from .errors import EstimationError, SpecificationError
from .likelihood import make_problem
from .params import ParameterSet, default_parameters

logger = logging.getLogger(__name__)

KINDS = ("mnl", "mixl", "hcm", "binary")


@dataclass(frozen=True)
class EstimationConfig:
    gtol: float = 1e-5
    max_iter: int = 500
    newton_steps: int = 10
    # a Newton step larger than this at the optimum means the likelihood has no interior maximum
    step_tol: float = 1e-3
    hessian_step: float = 1e-5


@dataclass
class EstimationResult:
    kind: str
    params: ParameterSet
    robust_se: dict
    std_err: dict
    ll0: float
    ll_final: float
    K: int
    n_obs: int
    n_individuals: int
    rho_bar_sq: float
    aic: float
    bic: float
    converged: bool
    gradient_norm: float
    iterations: int
    message: str = ""
    plan: LatentDrawPlan | None = None
    robust_cov: np.ndarray | None = field(default=None, repr=False)
    metadata: dict = field(default_factory=dict)

    def summary(self) -> str:
        lines = [f"{'name':<18}{'value':>12}{'rob.se':>10}{'t':>8}"]
        for p in self.params.parameters:
            se = self.robust_se.get(p.name)
            if p.fixed:
                lines.append(f"{p.name:<18}{p.value:>12.4f}{'fixed':>10}")
            else:
                t = p.value / se if se else float("nan")
                lines.append(f"{p.name:<18}{p.value:>12.4f}{se:>10.4f}{t:>8.2f}")
        lines += [
            f"K={self.K}  n={self.n_obs}  LL0={self.ll0:.3f}  LL={self.ll_final:.3f}",
            f"rho_bar_sq={self.rho_bar_sq:.3f}  AIC={self.aic:.3f}  BIC={self.bic:.3f}",
            f"converged={self.converged}  |grad|={self.gradient_norm:.2e}  iterations={self.iterations}",
        ]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "parameters": self.params.to_dict(),
            "robust_se": self.robust_se,
            "std_err": self.std_err,
            "LL0": self.ll0,
            "LL_final": self.ll_final,
            "K": self.K,
            "n_obs": self.n_obs,
            "n_individuals": self.n_individuals,
            "rho_bar_sq": self.rho_bar_sq,
            "AIC": self.aic,
            "BIC": self.bic,
            "convergence": {
                "converged": self.converged,
                "gradient_norm": self.gradient_norm,
                "iterations": self.iterations,
                "message": self.message,
            },
            "draws": None if self.plan is None else {
                "n_draws": self.plan.n_draws, "seed": self.plan.seed, "sequence_kind": self.plan.sequence_kind,
            },
            "metadata": self.metadata,
        }
        return _jsonable(d)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "EstimationResult":
        conv = d.get("convergence", {})
        draws = d.get("draws")
        return cls(
            kind=d["kind"],
            params=ParameterSet.from_dict(d["parameters"]),
            robust_se={k: _num(v) for k, v in d.get("robust_se", {}).items()},
            std_err={k: _num(v) for k, v in d.get("std_err", {}).items()},
            ll0=_num(d["LL0"]), ll_final=_num(d["LL_final"]), K=int(d["K"]), n_obs=int(d["n_obs"]),
            n_individuals=int(d.get("n_individuals", 0)), rho_bar_sq=_num(d["rho_bar_sq"]),
            aic=_num(d["AIC"]), bic=_num(d["BIC"]), converged=bool(conv.get("converged", False)),
            gradient_norm=_num(conv.get("gradient_norm", float("nan"))),
            iterations=int(conv.get("iterations", 0)), message=conv.get("message", ""),
            plan=None if not draws else LatentDrawPlan(int(draws["n_draws"]), int(draws["seed"]), draws["sequence_kind"]),
            metadata=d.get("metadata", {}),
        )

    @classmethod
    def from_json(cls, path) -> "EstimationResult":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _num(v):
    return float("nan") if v is None else float(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(float(obj)) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def fit_statistics(K: int, ll_final: float, ll0: float, n_obs: int) -> dict:
    """AIC, BIC and rho-bar-squared from the model summary quantities."""
    return {
        "AIC": 2 * K - 2 * ll_final,
        "BIC": K * math.log(n_obs) - 2 * ll_final,
        "rho_bar_sq": 1.0 - (ll_final - K) / ll0,
    }


def numeric_gradient(loglik_fn: Callable[[ParameterSet], float], params: ParameterSet, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient over the free parameters (natural scale).

    The step for parameter ``k`` is ``h * max(1, |theta_k|)``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    values = params.values
    grad = []
    for k in np.flatnonzero(params.free_mask):
        step = h * max(1.0, abs(values[k]))
        up, dn = values.copy(), values.copy()
        up[k] += step
        dn[k] -= step
        grad.append((loglik_fn(params.with_values(up)) - loglik_fn(params.with_values(dn))) / (2 * step))
    return np.array(grad)


def analytic_gradient(problem, params: ParameterSet) -> np.ndarray:
    """Gradient of the log-likelihood over the free parameters (natural scale)."""
    _, score = problem.contributions(params, want_grad=True)
    return score.sum(axis=0)[params.free_mask]


class _Objective:
    """Negative log-likelihood on the working (log-transformed) scale."""

    def __init__(self, problem, template: ParameterSet):
        self.problem = problem
        self.template = template
        self.free = template.free_mask
        self.n_evals = 0

    def params(self, w) -> ParameterSet:
        return self.template.from_working(w)

    def value_and_scores(self, w):
        p = self.params(w)
        ll, score = self.problem.contributions(p, want_grad=True)
        self.n_evals += 1
        S = score[:, self.free] * p.working_jacobian()[None, :]
        return ll, S

    def __call__(self, w):
        with np.errstate(all="ignore"):
            ll, S = self.value_and_scores(w)
        f = -float(np.sum(ll))
        if not np.isfinite(f):
            return np.inf, np.zeros_like(w)
        return f, -S.sum(axis=0)

    def hessian(self, w, h):
        """Hessian of the log-likelihood by central differences of the analytic gradient."""
        n = len(w)
        H = np.empty((n, n))
        for j in range(n):
            step = h * max(1.0, abs(w[j]))
            up, dn = w.copy(), w.copy()
            up[j] += step
            dn[j] -= step
            H[:, j] = (self.value_and_scores(up)[1].sum(axis=0) - self.value_and_scores(dn)[1].sum(axis=0)) / (2 * step)
        return 0.5 * (H + H.T)


def _newton_step(H, g):
    try:
        eig = np.linalg.eigvalsh(H)
    except np.linalg.LinAlgError:
        return None, False
    if not np.all(np.isfinite(eig)) or eig.max() >= 0:
        return None, False
    return -np.linalg.solve(H, g), True


def _check_start(problem, params: ParameterSet):
    ll, _ = problem.contributions(params, want_grad=False)
    bad = ~np.isfinite(ll)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        data = getattr(problem, "data", None)
        where = f"individual {data.ids[i]!r} (row {int(data.starts[i])})" if data is not None else f"group {i}"
        raise EstimationError(f"log-likelihood is not finite at the starting values for {where}")


def estimate(kind: str, data, config: EstimationConfig | None = None, params: ParameterSet | None = None,
             plan: LatentDrawPlan | None = None, problem=None, backend=None) -> EstimationResult:
    """Fit a model by quasi-Newton maximization of its log-likelihood.

    Parameters
    ----------
    kind : {"mnl", "mixl", "hcm", "binary"}
    data : ChoiceData, or a bikeability sample for ``binary``
    config : optimizer settings; convergence requires an infinity-norm
        gradient below ``gtol``, a negative-definite Hessian and a vanishing
        Newton step.
    params : starting values and fixed/free flags (defaults per kind)
    plan : draw plan for the simulated likelihoods

    Returns
    -------
    EstimationResult
        ``converged`` is False whenever the criteria fail, including when a
        parameter drifts off to infinity.
    """
    kind = kind.lower()
    if kind not in KINDS:
        raise SpecificationError(f"unknown model kind {kind!r}")
    config = config or EstimationConfig()
    params = params if params is not None else default_parameters(kind)
    if kind in ("mixl", "hcm") and plan is None:
        plan = LatentDrawPlan()
    if problem is None:
        if kind == "binary":
            problem = data.problem(params)
        else:
            extra = {"backend": backend} if kind in ("mixl", "hcm") else {}
            problem = make_problem(kind, data, params, plan, **extra)
    if len(problem.params) and problem.n_obs == 0:
        raise EstimationError("no observations")
    if not np.all(np.isfinite(params.values)):
        raise EstimationError("starting values must be finite")
    _check_start(problem, params)

    obj = _Objective(problem, params)
    w0 = params.to_working()
    res = minimize(obj, w0, jac=True, method="BFGS",
                   options={"gtol": config.gtol, "maxiter": config.max_iter, "norm": np.inf})
    w = res.x
    iterations = int(res.nit)
    f, g = obj(w)

    # Newton refinement on the finite-difference Hessian
    H = obj.hessian(w, config.hessian_step)
    step, negdef = _newton_step(H, -g)
    for _ in range(config.newton_steps):
        if step is None or np.max(np.abs(step)) < 1e-10:
            break
        w_new = w + step
        f_new, g_new = obj(w_new)
        if not (np.isfinite(f_new) and f_new <= f + 1e-9 * max(1.0, abs(f))):
            break
        w, f, g = w_new, f_new, g_new
        iterations += 1
        H = obj.hessian(w, config.hessian_step)
        step, negdef = _newton_step(H, -g)

    gnorm = float(np.max(np.abs(g))) if len(g) else 0.0
    step_norm = float(np.max(np.abs(step))) if step is not None and len(step) else (0.0 if negdef else np.inf)
    converged = bool(gnorm < config.gtol and negdef and step_norm < config.step_tol)
    if converged:
        message = "converged"
    elif not negdef:
        message = "Hessian not negative definite (parameter not identified or diverging)"
    elif step_norm >= config.step_tol:
        message = f"Newton step {step_norm:.3g} does not vanish (parameter diverging)"
    else:
        message = f"gradient norm {gnorm:.3g} above tolerance after {iterations} iterations ({res.message})"
    if not converged:
        logger.warning("estimation did not converge: %s", message)

    fitted = obj.params(w)
    ll_final = -f
    ll_i, S = obj.value_and_scores(w)
    jac = fitted.working_jacobian()
    names = fitted.free_names
    robust, classical, cov_nat = {}, {}, None
    try:
        Hinv = np.linalg.inv(H)
        cov_w = Hinv @ (S.T @ S) @ Hinv
        cov_nat = cov_w * jac[:, None] * jac[None, :]
        robust = {n: float(np.sqrt(max(v, 0.0))) for n, v in zip(names, np.diag(cov_nat))}
        classical = {n: float(np.sqrt(max(v, 0.0))) for n, v in zip(names, np.diag(-Hinv) * jac ** 2)}
    except np.linalg.LinAlgError:
        robust = {n: float("nan") for n in names}
        classical = dict(robust)
    fitted = fitted.with_se(robust)

    K = fitted.n_free
    ll0 = problem.null_loglik()
    n_obs = problem.n_obs
    stats = fit_statistics(K, ll_final, ll0, n_obs)
    return EstimationResult(
        kind=kind, params=fitted, robust_se=robust, std_err=classical, ll0=ll0, ll_final=ll_final, K=K,
        n_obs=n_obs, n_individuals=len(ll_i), rho_bar_sq=stats["rho_bar_sq"], aic=stats["AIC"],
        bic=stats["BIC"], converged=converged, gradient_norm=gnorm, iterations=iterations, message=message,
        plan=plan if kind in ("mixl", "hcm") else None, robust_cov=cov_nat,
    )

