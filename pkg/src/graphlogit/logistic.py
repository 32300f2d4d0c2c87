"""Classical logistic regression by Newton's method with step halving.

This is the ``delta = 0`` null model.  Its fit supplies the coefficients and
Fisher information used by the score test and the EM starting point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .model import log1pexp, sigmoid

__all__ = [
    "NullFit",
    "SeparationError",
    "SingularMatrixError",
    "fit_logistic",
    "information_matrix",
    "logistic_loglik",
    "logistic_gradient",
    "solve_spd",
    "newton_maximize",
]

logger = logging.getLogger(__name__)

SEPARATION_BOUND = 30.0
MAX_HALVINGS = 30


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class SeparationError(RuntimeError):
    """The null logistic fit diverged (complete or quasi separation)."""


@dataclass(frozen=True)
class NullFit:
    eta: np.ndarray
    information: np.ndarray
    log_lik: float
    converged: bool
    iterations: int
    separated: bool = False

    @property
    def beta0(self) -> float:
        return float(self.eta[0])

    @property
    def beta(self) -> np.ndarray:
        return self.eta[1:]


def solve_spd(M, v, name: str = "matrix") -> np.ndarray:
    """Solve ``M w = v`` for symmetric positive definite ``M``.

    A singular or indefinite ``M`` gets one ridge of ``1e-8 * trace / dim`` on
    the diagonal before :class:`SingularMatrixError` is raised.
    """
    M = np.asarray(M, dtype=float)
    v = np.asarray(v, dtype=float)
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(M), v)
    except np.linalg.LinAlgError:
        pass
    dim = M.shape[0]
    ridge = 1e-8 * np.trace(M) / dim
    if not np.isfinite(ridge) or ridge <= 0:
        raise SingularMatrixError(f"{name} is singular (non-positive trace)")
    try:
        return scipy.linalg.cho_solve(
            scipy.linalg.cho_factor(M + ridge * np.eye(dim)), v
        )
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{name} is singular even after ridge") from exc


def newton_maximize(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]],
    x0,
    tol: float = 1e-10,
    max_iter: int = 100,
    name: str = "Hessian",
    bound: float | None = None,
) -> tuple[np.ndarray, float, bool, int, list[float]]:
    """Maximise a concave function by Newton steps with step halving.

    ``fun(x)`` returns ``(value, gradient, hessian)`` of the objective.  A
    step is halved until the objective does not decrease.  Convergence means
    the gradient max-norm is below ``tol``, or no ascent is possible and the
    Newton decrement is at rounding level.  When ``bound`` is given the
    iterate is clipped to ``[-bound, bound]`` on every coordinate.

    Returns ``(x, value, converged, iterations, trace)``.
    """
    x = np.array(x0, dtype=float)
    f, g, H = fun(x)
    trace = [f]
    for it in range(max_iter):
        if np.max(np.abs(g)) < tol:
            return x, f, True, it, trace
        step = solve_spd(-H, g, name=name)
        t = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            x_new = x + t * step
            if bound is not None:
                x_new = np.clip(x_new, -bound, bound)
            f_new, g_new, H_new = fun(x_new)
            if np.isfinite(f_new) and f_new >= f:
                accepted = True
                break
            t *= 0.5
        if not accepted or np.array_equal(x_new, x):
            # no ascent left at working precision: accept if the Newton
            # decrement is at rounding level relative to the objective
            decrement = float(g @ step)
            at_precision = decrement <= 1e-12 * max(1.0, abs(f))
            done = bool(np.max(np.abs(g)) < max(tol, 1e-8) or at_precision)
            return x, f, done, it + 1, trace
        x, f, g, H = x_new, f_new, g_new, H_new
        trace.append(f)
    return x, f, bool(np.max(np.abs(g)) < tol), max_iter, trace


def logistic_loglik(eta, Xd, Y) -> float:
    t = Xd @ eta
    return float(np.sum(Y * t - log1pexp(t)))


def logistic_gradient(eta, Xd, Y) -> np.ndarray:
    return Xd.T @ (Y - sigmoid(Xd @ eta))


def _information_design(eta, Xd) -> np.ndarray:
    p = sigmoid(Xd @ eta)
    w = p - p * p
    info = (Xd * w[:, None]).T @ Xd
    return 0.5 * (info + info.T)


def information_matrix(eta, X) -> np.ndarray:
    """Fisher information ``sum_i p_i (1 - p_i) x_i x_i'`` with intercept."""
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    Xd = np.column_stack([np.ones(X.shape[0]), X])
    return _information_design(np.asarray(eta, dtype=float), Xd)


def fit_logistic(X, Y, tol: float = 1e-10, max_iter: int = 100) -> NullFit:
    """Maximum likelihood logistic regression with an intercept.

    Single-class responses, a perfect in-sample fit, or any coefficient
    exceeding 30 in absolute value set ``separated=True``; such fits are not
    usable as a null model.
    """
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    Y = np.asarray(Y, dtype=float)
    n, p = X.shape
    if n < p + 1:
        raise ValueError(f"need at least {p + 1} observations, got {n}")
    Xd = np.column_stack([np.ones(n), X])

    def fun(eta):
        t = Xd @ eta
        pr = sigmoid(t)
        w = pr - pr * pr
        H = -(Xd * w[:, None]).T @ Xd
        return float(np.sum(Y * t - log1pexp(t))), Xd.T @ (Y - pr), H

    eta, ll, converged, iters, _ = newton_maximize(
        fun, np.zeros(p + 1), tol=tol, max_iter=max_iter,
        name="logistic information matrix",
    )
    single_class = bool(np.all(Y == Y[0]))
    perfect = bool(np.max(np.abs(Y - sigmoid(Xd @ eta))) < 1e-6)
    separated = (single_class or perfect
                 or bool(np.any(np.abs(eta) > SEPARATION_BOUND)))
    if separated:
        logger.warning("logistic fit looks separable: eta=%s", eta)
    if not converged:
        logger.warning("logistic fit did not converge in %d iterations", iters)
    return NullFit(
        eta=eta,
        information=_information_design(eta, Xd),
        log_lik=ll,
        converged=converged and not separated,
        iterations=iters,
        separated=separated,
    )
