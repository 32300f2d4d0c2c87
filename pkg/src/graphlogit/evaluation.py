"""Predictions from a fitted latent model, ROC curves and model comparison."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .em import FitResult
from .graph import neighbor_feature_sum
from .logistic import NullFit
from .model import Dataset, sigmoid

__all__ = ["RocCurve", "predict_proba", "roc_curve", "auc_pair_count", "compare_models"]


@dataclass(frozen=True)
class RocCurve:
    points: np.ndarray  # (k, 2) rows of (fpr, tpr)
    auc: float
    n_pos: int
    n_neg: int

    @property
    def fpr(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def tpr(self) -> np.ndarray:
        return self.points[:, 1]

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "points": self.points.tolist(),
        }


def predict_proba(fit: FitResult, data: Dataset, mode: str = "marginal",
                  seed: int = 0) -> np.ndarray:
    """P(Y = 1) for every node under the fitted model.

    ``mode="marginal"`` mixes the two outcome probabilities with the posterior
    weights ``w_i``.  ``mode="sampled"`` draws ``zeta_i ~ Bernoulli(w_i)``
    from ``default_rng(seed)`` and plugs the draw in.
    """
    if mode not in ("marginal", "sampled"):
        raise ValueError(f"mode must be 'marginal' or 'sampled', got {mode!r}")
    w = np.asarray(fit.weights, dtype=float)
    if w.shape != (data.n,):
        raise ValueError("fit weights do not match the number of nodes")
    if not fit.converged:
        warnings.warn("predicting from an EM fit that did not converge",
                      RuntimeWarning, stacklevel=2)
    prm = fit.params
    s = neighbor_feature_sum(data.graph, data.X, prm.beta)
    lin = prm.beta0 + data.X @ prm.beta
    p1 = sigmoid(lin + prm.delta * s)
    p0 = sigmoid(lin)
    if mode == "marginal":
        return w * p1 + (1.0 - w) * p0
    zeta = np.random.default_rng(seed).random(data.n) < w
    return np.where(zeta, p1, p0)


def roc_curve(scores, labels) -> RocCurve:
    """Empirical ROC with one step per distinct score, highest first.

    Tied scores move the curve diagonally, so the trapezoidal area equals
    the Mann-Whitney statistic with ties counted one half.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    if np.isnan(scores).any():
        raise ValueError("scores contain NaN")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs at least one positive and one negative label")

    order = np.argsort(-scores, kind="mergesort")
    s_sorted = scores[order]
    pos_sorted = pos[order]
    # last index of each tie group in descending order
    ends = np.flatnonzero(np.diff(s_sorted) != 0)
    ends = np.append(ends, s_sorted.size - 1)
    tp = np.cumsum(pos_sorted)[ends]
    fp = (ends + 1) - tp
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    auc = float(trapezoid(tpr, fpr))
    return RocCurve(np.column_stack([fpr, tpr]), auc, n_pos, n_neg)


def auc_pair_count(scores, labels) -> float:
    """AUC by counting positive/negative pairs, ties worth one half.  O(n^2)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    sp = scores[labels == 1][:, None]
    sn = scores[labels == 0][None, :]
    return float(((sp > sn).sum() + 0.5 * (sp == sn).sum()) / (sp.size * sn.size))


def compare_models(data: Dataset, fit_latent: FitResult, fit_null: NullFit) -> dict:
    """In-sample AUCs of the latent model (marginal scores) and the logistic fit."""
    latent_scores = predict_proba(fit_latent, data, mode="marginal")
    null_scores = sigmoid(data.X_design @ fit_null.eta)
    roc_latent = roc_curve(latent_scores, data.Y)
    roc_null = roc_curve(null_scores, data.Y)
    return {
        "auc_latent": roc_latent.auc,
        "auc_logistic": roc_null.auc,
        "auc_difference": roc_latent.auc - roc_null.auc,
        "roc_latent": roc_latent.to_dict(),
        "roc_logistic": roc_null.to_dict(),
    }
