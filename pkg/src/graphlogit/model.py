"""Latent logistic model: parameters, links and likelihoods.

A node's outcome follows a logistic regression whose linear predictor gains
``delta * zeta_i * s_i`` when the node is susceptible (``zeta_i = 1``), where
``s_i`` sums the neighbors' ``X_j @ beta``.  Susceptibility itself is a
logistic function of the node's own covariates with coefficients
``(gamma0, gamma)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .graph import Graph, neighbor_feature_sum

__all__ = [
    "FullParams",
    "Dataset",
    "sigmoid",
    "log1pexp",
    "log_sigmoid",
    "bernoulli_loglik",
    "outcome_prob",
    "susceptible_prior",
    "complete_log_likelihood",
    "marginal_log_likelihood",
    "node_log_components",
]

@dataclass(frozen=True)
class FullParams:
    delta: float
    beta0: float
    beta: np.ndarray
    gamma0: float
    gamma: np.ndarray

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).reshape(-1)
        gamma = np.array(self.gamma, dtype=float).reshape(-1)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "beta0", float(self.beta0))
        object.__setattr__(self, "gamma0", float(self.gamma0))
        if beta.shape != gamma.shape:
            raise ValueError("beta and gamma must have the same length")
        if not np.all(np.isfinite(self.to_vector())):
            raise ValueError("parameters must be finite")

    def __eq__(self, other):
        if not isinstance(other, FullParams):
            return NotImplemented
        return self.p == other.p and np.array_equal(self.to_vector(), other.to_vector())

    def __hash__(self):
        return hash(self.to_vector().tobytes())

    @property
    def p(self) -> int:
        return self.beta.size

    @property
    def eta(self) -> np.ndarray:
        """Outcome coefficients ``(beta0, beta)``."""
        return np.concatenate([[self.beta0], self.beta])

    @property
    def phi(self) -> np.ndarray:
        """Susceptibility coefficients ``(gamma0, gamma)``."""
        return np.concatenate([[self.gamma0], self.gamma])

    def to_vector(self) -> np.ndarray:
        """Concatenate as ``(delta, beta0, beta, gamma0, gamma)``."""
        return np.concatenate(
            [[self.delta, self.beta0], self.beta, [self.gamma0], self.gamma]
        )

    @classmethod
    def from_vector(cls, v, p: int) -> "FullParams":
        v = np.asarray(v, dtype=float)
        if v.shape != (2 * p + 3,):
            raise ValueError(f"expected {2 * p + 3} entries, got {v.shape}")
        return cls(
            delta=v[0], beta0=v[1], beta=v[2:p + 2],
            gamma0=v[p + 2], gamma=v[p + 3:],
        )

    @classmethod
    def from_parts(cls, delta, eta, phi) -> "FullParams":
        eta = np.asarray(eta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        return cls(delta=delta, beta0=eta[0], beta=eta[1:],
                   gamma0=phi[0], gamma=phi[1:])

    def replace(self, **changes) -> "FullParams":
        kw = dict(delta=self.delta, beta0=self.beta0, beta=self.beta,
                  gamma0=self.gamma0, gamma=self.gamma)
        kw.update(changes)
        return FullParams(**kw)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "beta0": self.beta0,
            "beta": self.beta.tolist(),
            "gamma0": self.gamma0,
            "gamma": self.gamma.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FullParams":
        return cls(delta=d["delta"], beta0=d["beta0"], beta=d["beta"],
                   gamma0=d["gamma0"], gamma=d["gamma"])


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    graph: Graph

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        Y = np.asarray(self.Y)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        if X.shape[0] != self.graph.n or Y.shape != (self.graph.n,):
            raise ValueError(
                f"X has {X.shape[0]} rows and Y has {Y.size} entries but "
                f"the graph has {self.graph.n} nodes"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        if not np.all((Y == 0) | (Y == 1)):
            raise ValueError("Y entries must be 0 or 1")
        X.setflags(write=False)
        Y = Y.astype(float)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def X_design(self) -> np.ndarray:
        """Covariates with a leading intercept column."""
        return np.column_stack([np.ones(self.n), self.X])


def sigmoid(x):
    """Logistic function, overflow free for any finite input."""
    return expit(x)


def log_sigmoid(x):
    return log_expit(x)


def log1pexp(x):
    """``log(1 + exp(x))`` evaluated as ``max(x, 0) + log1p(exp(-|x|))``."""
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def bernoulli_loglik(y, t):
    """Log-likelihood of outcome ``y`` under a logistic model with predictor ``t``."""
    return y * t - log1pexp(t)


def outcome_prob(params: FullParams, x_i, s_i, zeta):
    """P(Y = 1 | x, zeta) for one node (or vectorised over rows of ``x_i``)."""
    x_i = np.asarray(x_i, dtype=float)
    t = params.beta0 + x_i @ params.beta + params.delta * np.asarray(zeta) * s_i
    return sigmoid(t)


def susceptible_prior(params: FullParams, x_i):
    """P(zeta = 1 | x)."""
    x_i = np.asarray(x_i, dtype=float)
    return sigmoid(params.gamma0 + x_i @ params.gamma)


def complete_log_likelihood(params: FullParams, data: Dataset, zeta) -> float:
    """Joint log-likelihood of outcomes and a given indicator vector ``zeta``."""
    zeta = np.asarray(zeta, dtype=float)
    if zeta.shape != (data.n,):
        raise ValueError("zeta must have one entry per node")
    s = neighbor_feature_sum(data.graph, data.X, params.beta)
    lin = params.beta0 + data.X @ params.beta
    t_y = lin + params.delta * zeta * s
    t_z = params.gamma0 + data.X @ params.gamma
    return float(np.sum(bernoulli_loglik(data.Y, t_y) + bernoulli_loglik(zeta, t_z)))


def node_log_components(params: FullParams, data: Dataset, s=None):
    """Per-node log joint terms for ``zeta = 1`` and ``zeta = 0``.

    Returns ``(log_t1, log_t0)`` where ``log_t1 = log f(Y | zeta=1) + log P``
    and ``log_t0 = log f(Y | zeta=0) + log(1 - P)``.
    """
    if s is None:
        s = neighbor_feature_sum(data.graph, data.X, params.beta)
    lin = params.beta0 + data.X @ params.beta
    t_z = params.gamma0 + data.X @ params.gamma
    log_t1 = bernoulli_loglik(data.Y, lin + params.delta * s) + log_sigmoid(t_z)
    log_t0 = bernoulli_loglik(data.Y, lin) + log_sigmoid(-t_z)
    return log_t1, log_t0


def marginal_log_likelihood(params: FullParams, data: Dataset, s=None) -> float:
    """Observed-data log-likelihood with each ``zeta_i`` summed out."""
    log_t1, log_t0 = node_log_components(params, data, s)
    return float(np.sum(np.logaddexp(log_t1, log_t0)))
