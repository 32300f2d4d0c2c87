"""EM estimation of the latent logistic model under network dependence.

Each iteration computes posterior susceptibility weights, then updates in
turn the susceptibility coefficients, ``delta`` (with ``(beta0, beta)`` held
at their previous values) and ``(beta0, beta)``.

The default ``(beta0, beta)`` update maximises the expected complete
log-likelihood exactly, with ``beta`` also entering the susceptible nodes'
network term; this keeps the marginal likelihood non-decreasing.  The
``"profiled"`` variant instead freezes the offset ``delta * s_i`` at the new
``delta`` and the previous ``beta``.  By default each EM pass is followed by
a damped Newton step on the marginal likelihood, kept only when it improves
on the EM step.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .graph import neighbor_covariate_sum, neighbor_feature_sum
from .logistic import NullFit, SeparationError, fit_logistic, newton_maximize
from .model import (
    Dataset,
    FullParams,
    log1pexp,
    marginal_log_likelihood,
    node_log_components,
    sigmoid,
)

__all__ = [
    "EmConfig",
    "FitResult",
    "e_step",
    "posterior_weights",
    "phi_objective",
    "delta_objective",
    "profiled_objective",
    "m_step_phi",
    "m_step_delta",
    "m_step_beta",
    "m_step_beta_exact",
    "expected_outcome_objective",
    "em_update",
    "marginal_gradient",
    "fit_em",
]

logger = logging.getLogger(__name__)

PARAM_BOUND = 50.0
UNIDENTIFIED_DELTA = 1e-4
MAX_EXPANSIONS = 8
SATURATED_PREDICTOR = 30.0


@dataclass(frozen=True)
class EmConfig:
    tol: float = 1e-6
    max_iter: int = 500
    inner_newton_iter: int = 50
    beta_update: str = "exact"
    accelerate: str = "newton"

    def __post_init__(self):
        if self.accelerate not in ("none", "squarem", "newton"):
            raise ValueError("accelerate must be 'none', 'squarem' or 'newton'")
        if self.beta_update not in ("exact", "profiled"):
            raise ValueError("beta_update must be 'exact' or 'profiled'")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1 or self.inner_newton_iter < 1:
            raise ValueError("iteration limits must be at least 1")


@dataclass(frozen=True)
class FitResult:
    params: FullParams
    weights: np.ndarray
    iterations: int
    converged: bool
    marginal_loglik_trace: list
    init: FullParams
    null_fit: NullFit | None = field(default=None, repr=False)

    @property
    def phi_identified(self) -> bool:
        return abs(self.params.delta) > UNIDENTIFIED_DELTA

    @property
    def final_loglik(self) -> float:
        return self.marginal_loglik_trace[-1]

    def to_dict(self, include_weights: bool = True) -> dict:
        d = {
            "params": self.params.to_dict(),
            "init": self.init.to_dict(),
            "converged": self.converged,
            "iterations": self.iterations,
            "final_marginal_loglik": self.final_loglik,
            "phi_identified": self.phi_identified,
            "marginal_loglik_trace": list(self.marginal_loglik_trace),
        }
        if include_weights:
            d["weights"] = self.weights.tolist()
        return d


def e_step(params: FullParams, data: Dataset, s=None) -> np.ndarray:
    """Posterior probability that each node is susceptible."""
    log_t1, log_t0 = node_log_components(params, data, s)
    return np.exp(log_t1 - np.logaddexp(log_t1, log_t0))


def posterior_weights(params: FullParams, data: Dataset) -> np.ndarray:
    """Posterior susceptible probabilities at a final parameter estimate."""
    return e_step(params, data)


def phi_objective(phi, weights, Xd) -> float:
    t = Xd @ phi
    return float(np.sum(weights * t - log1pexp(t)))


def m_step_phi(weights, X, start=None, max_iter: int = 50, tol: float = 1e-8):
    """Weighted logistic fit of the susceptibility model to soft labels.

    Warns when the fit saturates, i.e. some fitted prior is numerically 0
    or 1 or a coefficient reaches the cap.
    """
    weights = np.asarray(weights, dtype=float)
    X = np.asarray(X, dtype=float).reshape(len(weights), -1)
    Xd = np.column_stack([np.ones(len(weights)), X])
    if start is None:
        start = np.zeros(Xd.shape[1])

    def fun(phi):
        t = Xd @ phi
        pr = sigmoid(t)
        H = -(Xd * (pr - pr * pr)[:, None]).T @ Xd
        return float(np.sum(weights * t - log1pexp(t))), Xd.T @ (weights - pr), H

    phi, _, converged, _, _ = newton_maximize(
        fun, start, tol=tol, max_iter=max_iter,
        name="susceptibility Hessian", bound=PARAM_BOUND,
    )
    if np.any(np.abs(phi) >= PARAM_BOUND) or np.max(np.abs(Xd @ phi)) > SATURATED_PREDICTOR:
        warnings.warn("susceptibility model saturated (fitted priors at 0 or 1)",
                      RuntimeWarning, stacklevel=2)
    elif not converged:
        logger.debug("phi M-step stopped before convergence")
    return phi


def delta_objective(delta, lin, s, weights, Y) -> float:
    """``delta`` part of the expected complete log-likelihood."""
    t = lin + delta * s
    return float(np.sum(weights * (Y * delta * s - log1pexp(t))))


def _maximize_delta(lin, s, weights, Y, start, bound=PARAM_BOUND,
                    tol=1e-10, max_iter=100) -> float:
    ws = weights * s

    def deriv(d):
        t = lin + d * s
        pr = sigmoid(t)
        return float(ws @ (Y - pr)), float(-(ws * s) @ (pr - pr * pr))

    lo, hi = -bound, bound
    g_lo, _ = deriv(lo)
    g_hi, _ = deriv(hi)
    if g_lo <= 0:
        warnings.warn("delta M-step hit the lower cap", RuntimeWarning, stacklevel=3)
        return lo
    if g_hi >= 0:
        warnings.warn("delta M-step hit the upper cap", RuntimeWarning, stacklevel=3)
        return hi
    d = float(np.clip(start, lo, hi))
    for _ in range(max_iter):
        g, h = deriv(d)
        if abs(g) < tol:
            return d
        if g > 0:
            lo = d
        else:
            hi = d
        d_new = d - g / h if h < 0 else np.nan
        if not (lo < d_new < hi):
            d_new = 0.5 * (lo + hi)
        if hi - lo < 1e-14 * max(1.0, abs(d)):
            return d_new
        d = d_new
    return d


def m_step_delta(params: FullParams, weights, data: Dataset, s=None) -> float:
    """Maximise the ``delta`` objective with ``(beta0, beta)`` fixed."""
    weights = np.asarray(weights, dtype=float)
    if s is None:
        s = neighbor_feature_sum(data.graph, data.X, params.beta)
    if not np.any(weights * s != 0):
        warnings.warn("delta is not identifiable: no weighted neighbor signal",
                      RuntimeWarning, stacklevel=2)
        return params.delta
    lin = params.beta0 + data.X @ params.beta
    return _maximize_delta(lin, s, weights, data.Y, params.delta)


def profiled_objective(eta, offset, weights, Xd, Y) -> float:
    """Offset logistic objective for ``(beta0, beta)``, constants dropped."""
    t = Xd @ eta
    return float(np.sum(Y * t - weights * log1pexp(t + offset)
                        - (1 - weights) * log1pexp(t)))


def m_step_beta(delta_new: float, params: FullParams, weights, data: Dataset,
                max_iter: int = 50, tol: float = 1e-10, s=None) -> np.ndarray:
    """Maximise the profiled likelihood of ``(beta0, beta)``.

    The offset is ``delta_new`` times the neighbor sums at the current
    ``beta``; it is not differentiated.
    """
    weights = np.asarray(weights, dtype=float)
    if s is None:
        s = neighbor_feature_sum(data.graph, data.X, params.beta)
    offset = delta_new * s
    Xd = data.X_design
    Y = data.Y

    def fun(eta):
        t = Xd @ eta
        p1 = sigmoid(t + offset)
        p0 = sigmoid(t)
        f = float(np.sum(Y * t - weights * log1pexp(t + offset)
                         - (1 - weights) * log1pexp(t)))
        g = Xd.T @ (Y - weights * p1 - (1 - weights) * p0)
        w = weights * (p1 - p1 * p1) + (1 - weights) * (p0 - p0 * p0)
        return f, g, -(Xd * w[:, None]).T @ Xd

    eta, _, _, _, _ = newton_maximize(
        fun, params.eta, tol=tol, max_iter=max_iter,
        name="profiled information matrix", bound=PARAM_BOUND,
    )
    return eta


def expected_outcome_objective(eta, delta, weights, data: Dataset, neighbor_x=None) -> float:
    """Outcome part of the expected complete log-likelihood at ``(delta, eta)``.

    Unlike :func:`profiled_objective` the neighbor sums move with ``beta``.
    """
    if neighbor_x is None:
        neighbor_x = neighbor_covariate_sum(data.graph, data.X)
    Xd = data.X_design
    X1 = Xd + delta * np.column_stack([np.zeros(data.n), neighbor_x])
    t1 = X1 @ eta
    t0 = Xd @ eta
    Y = data.Y
    return float(np.sum(weights * (Y * t1 - log1pexp(t1))
                        + (1 - weights) * (Y * t0 - log1pexp(t0))))


def m_step_beta_exact(delta_new: float, params: FullParams, weights, data: Dataset,
                      max_iter: int = 50, tol: float = 1e-10,
                      neighbor_x=None) -> np.ndarray:
    """Maximise the expected complete log-likelihood over ``(beta0, beta)``.

    For susceptible nodes the predictor ``beta0 + x'beta + delta * s(beta)``
    is linear in ``(beta0, beta)`` with design row ``(1, x + delta * sum of
    neighbor x)``, so this is a concave two-component logistic problem.
    """
    weights = np.asarray(weights, dtype=float)
    if neighbor_x is None:
        neighbor_x = neighbor_covariate_sum(data.graph, data.X)
    Xd = data.X_design
    X1 = Xd + delta_new * np.column_stack([np.zeros(data.n), neighbor_x])
    Y = data.Y

    def fun(eta):
        t1 = X1 @ eta
        t0 = Xd @ eta
        p1 = sigmoid(t1)
        p0 = sigmoid(t0)
        f = float(np.sum(weights * (Y * t1 - log1pexp(t1))
                         + (1 - weights) * (Y * t0 - log1pexp(t0))))
        g = X1.T @ (weights * (Y - p1)) + Xd.T @ ((1 - weights) * (Y - p0))
        H = -((X1 * (weights * (p1 - p1 * p1))[:, None]).T @ X1
              + (Xd * ((1 - weights) * (p0 - p0 * p0))[:, None]).T @ Xd)
        return f, g, H

    eta, _, _, _, _ = newton_maximize(
        fun, params.eta, tol=tol, max_iter=max_iter,
        name="expected information matrix", bound=PARAM_BOUND,
    )
    return eta


def em_update(params: FullParams, data: Dataset, cfg: EmConfig,
              s=None, neighbor_x=None) -> FullParams:
    """One EM pass: E-step, then the susceptibility, delta and
    ``(beta0, beta)`` updates in that order."""
    if s is None:
        s = neighbor_feature_sum(data.graph, data.X, params.beta)
    w = e_step(params, data, s)
    phi = m_step_phi(w, data.X, start=params.phi, max_iter=cfg.inner_newton_iter)
    delta = m_step_delta(params, w, data, s=s)
    if cfg.beta_update == "exact":
        eta = m_step_beta_exact(delta, params, w, data,
                                max_iter=cfg.inner_newton_iter, neighbor_x=neighbor_x)
    else:
        eta = m_step_beta(delta, params, w, data, max_iter=cfg.inner_newton_iter, s=s)
    return FullParams.from_parts(delta, eta, phi)


def _run_plain(params, update, loglik, cfg):
    trace = [loglik(params)]
    for it in range(1, cfg.max_iter + 1):
        new = update(params)
        step = np.linalg.norm(new.to_vector() - params.to_vector())
        params = new
        trace.append(loglik(params))
        if step < cfg.tol:
            return params, trace, True, it
    return params, trace, False, cfg.max_iter


def _safe_eval(vec, p, update, loglik):
    try:
        cand = update(FullParams.from_vector(
            np.clip(vec, -PARAM_BOUND, PARAM_BOUND), p))
        return cand, loglik(cand)
    except (ValueError, np.linalg.LinAlgError):
        return None, -np.inf


def _run_squarem(params, update, loglik, cfg, p):
    trace = [loglik(params)]
    for it in range(1, cfg.max_iter + 1):
        t1 = update(params)
        v0 = params.to_vector()
        r = t1.to_vector() - v0
        if np.linalg.norm(r) < cfg.tol:
            trace.append(loglik(t1))
            return t1, trace, True, it
        t2 = update(t1)
        candidate, ll_c = t2, loglik(t2)
        v = t2.to_vector() - t1.to_vector() - r
        nv = np.linalg.norm(v)
        if nv > 0:
            alpha = -np.linalg.norm(r) / nv
            while alpha < -1:
                t3, ll3 = _safe_eval(v0 - 2 * alpha * r + alpha**2 * v, p, update, loglik)
                if ll3 >= trace[-1]:
                    candidate, ll_c = t3, ll3
                    break
                alpha = 0.5 * (alpha - 1)
        params = candidate
        trace.append(ll_c)
    return params, trace, False, cfg.max_iter


def marginal_gradient(params: FullParams, data: Dataset, neighbor_x=None) -> np.ndarray:
    """Gradient of the marginal log-likelihood in ``to_vector`` order.

    Uses Fisher's identity: the observed-data score equals the gradient of the
    expected complete log-likelihood with weights at the same parameters.
    """
    if neighbor_x is None:
        neighbor_x = neighbor_covariate_sum(data.graph, data.X)
    s = neighbor_x @ params.beta
    w = e_step(params, data, s)
    Xd = data.X_design
    Y = data.Y
    lin = Xd @ params.eta
    r1 = Y - sigmoid(lin + params.delta * s)
    r0 = Y - sigmoid(lin)
    X1 = Xd + params.delta * np.column_stack([np.zeros(data.n), neighbor_x])
    g_delta = float((w * s) @ r1)
    g_eta = X1.T @ (w * r1) + Xd.T @ ((1 - w) * r0)
    g_phi = Xd.T @ (w - sigmoid(Xd @ params.phi))
    return np.concatenate([[g_delta], g_eta, g_phi])


def _marginal_hessian(params, data, neighbor_x, h=1e-5):
    # central differences of the analytic gradient
    p = data.p
    x = params.to_vector()
    k = x.size
    H = np.empty((k, k))
    for j in range(k):
        e = np.zeros(k)
        e[j] = h * max(1.0, abs(x[j]))
        gp = marginal_gradient(FullParams.from_vector(x + e, p), data, neighbor_x)
        gm = marginal_gradient(FullParams.from_vector(x - e, p), data, neighbor_x)
        H[:, j] = (gp - gm) / (2 * e[j])
    return 0.5 * (H + H.T)


def _run_newton(params, update, loglik, cfg, p, data, neighbor_x):
    """EM passes with a damped Newton step on the marginal likelihood.

    Each iteration computes the plain EM update, then tries Newton steps
    ``(-H + lam I)^{-1} g`` for increasing ``lam`` and keeps the first one
    whose marginal log-likelihood beats the EM update.
    """
    trace = [loglik(params)]
    lam_scale = 1e-12
    for it in range(1, cfg.max_iter + 1):
        fx = update(params)
        if np.linalg.norm(fx.to_vector() - params.to_vector()) < cfg.tol:
            trace.append(loglik(fx))
            return fx, trace, True, it
        best, ll_best = fx, loglik(fx)
        x0 = params.to_vector()
        try:
            g = marginal_gradient(params, data, neighbor_x)
            negH = -_marginal_hessian(params, data, neighbor_x)
            evals, evecs = np.linalg.eigh(negH)
        except (ValueError, np.linalg.LinAlgError):
            evals = None
        if evals is not None and np.all(np.isfinite(evals)):
            scale = max(np.abs(evals).max(), 1e-12)
            shift = max(0.0, -evals[0])
            gq = evecs.T @ g
            lam = shift + lam_scale * scale
            for _ in range(12):
                cand = np.clip(x0 + evecs @ (gq / (evals + lam)), -PARAM_BOUND, PARAM_BOUND)
                try:
                    cp = FullParams.from_vector(cand, p)
                    ll_c = loglik(cp)
                except ValueError:
                    ll_c = -np.inf
                if ll_c > ll_best:
                    best, ll_best = cp, ll_c
                    step = cand - x0
                    for _ in range(MAX_EXPANSIONS):
                        # plateaus toward the cap: keep doubling while it pays
                        step = 2 * step
                        far = np.clip(x0 + step, -PARAM_BOUND, PARAM_BOUND)
                        try:
                            fp = FullParams.from_vector(far, p)
                            ll_f = loglik(fp)
                        except ValueError:
                            break
                        if not ll_f > ll_best:
                            break
                        best, ll_best = fp, ll_f
                    break
                lam = shift + 10 * (lam - shift)
        params = best
        trace.append(ll_best)
    return params, trace, False, cfg.max_iter


def fit_em(data: Dataset, cfg: EmConfig | None = None,
           null_fit: NullFit | None = None) -> FitResult:
    """Fit all parameters by EM starting from the classical logistic MLE.

    Stops once a plain EM pass moves the full parameter vector by less than
    ``cfg.tol`` in Euclidean norm.  With ``cfg.accelerate`` each iteration
    also tries a squared extrapolation step built from two EM passes and
    keeps it only if the marginal log-likelihood does not drop.
    """
    cfg = cfg or EmConfig()
    if null_fit is None:
        null_fit = fit_logistic(data.X, data.Y)
    if null_fit.separated:
        raise SeparationError("classical logistic initialiser diverged")
    p = data.p
    init = FullParams(delta=0.0, beta0=null_fit.beta0, beta=null_fit.beta,
                      gamma0=0.0, gamma=np.zeros(p))
    nx = neighbor_covariate_sum(data.graph, data.X)

    def loglik(theta):
        return marginal_log_likelihood(theta, data)

    def update(theta):
        return em_update(theta, data, cfg, neighbor_x=nx)

    if cfg.accelerate == "squarem":
        params, trace, converged, it = _run_squarem(init, update, loglik, cfg, p)
    elif cfg.accelerate == "newton":
        params, trace, converged, it = _run_newton(init, update, loglik, cfg, p, data, nx)
    else:
        params, trace, converged, it = _run_plain(init, update, loglik, cfg)
    if not converged:
        logger.warning("EM did not converge in %d iterations", cfg.max_iter)
    return FitResult(
        params=params,
        weights=posterior_weights(params, data),
        iterations=it,
        converged=converged,
        marginal_loglik_trace=trace,
        init=init,
        null_fit=null_fit,
    )
