"""Monte Carlo studies on stochastic block model graphs.

Two covariate designs are available.  Case I draws a Bernoulli(0.5) and a
Uniform(-1, 1) covariate; Case II draws two centred normals, the second with
variance ``x2_variance`` (2 by default).  Replicate ``b`` of a study runs on
the ``b``-th child of ``SeedSequence(seed)``, so reports do not depend on the
number of worker threads.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .em import EmConfig, fit_em
from .graph import SbmConfig, from_edge_list, default_sbm_config, sbm_generate
from .logistic import SeparationError, fit_logistic
from .model import Dataset, FullParams, sigmoid
from .score_test import default_grid, run_test

__all__ = [
    "SimConfig",
    "StudyReport",
    "default_truth",
    "generate_case",
    "generate_case_with_latent",
    "replicate_rng",
    "size_power_study",
    "bias_mse_study",
]

logger = logging.getLogger(__name__)

PARAM_NAMES = ("delta", "beta0", "beta1", "beta2", "gamma0", "gamma1", "gamma2")


def default_truth(delta: float = 0.0) -> FullParams:
    return FullParams(delta=delta, beta0=0.5, beta=[-1.0, 1.0],
                      gamma0=0.0, gamma=[-1.0, 1.0])


@dataclass(frozen=True)
class SimConfig:
    case: str = "I"
    delta_true: float = 0.0
    theta_true: FullParams = field(default_factory=default_truth)
    sbm: SbmConfig = field(default_factory=default_sbm_config)
    replicates: int = 100
    test_B: int = 500
    alpha: float = 0.05
    seed: int = 0
    x2_variance: float = 2.0
    fixed_graph: bool = False
    empty_graph: bool = False
    grid_levels: tuple = (-2.0, -1.0, 0.0, 1.0, 2.0)
    n_workers: int = 1
    em: EmConfig = field(default_factory=EmConfig)

    def __post_init__(self):
        case = str(self.case).upper()
        if case not in ("I", "II"):
            raise ValueError(f"case must be 'I' or 'II', got {self.case!r}")
        object.__setattr__(self, "case", case)
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.theta_true.p != 2:
            raise ValueError("the simulation designs have two covariates")
        if self.x2_variance <= 0:
            raise ValueError("x2_variance must be positive")

    @property
    def truth(self) -> FullParams:
        """``theta_true`` with ``delta`` replaced by ``delta_true``."""
        return self.theta_true.replace(delta=self.delta_true)

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "delta_true": self.delta_true,
            "theta_true": self.theta_true.to_dict(),
            "sbm": {"block_sizes": list(self.sbm.block_sizes),
                    "P": self.sbm.P.tolist()},
            "replicates": self.replicates,
            "test_B": self.test_B,
            "alpha": self.alpha,
            "seed": self.seed,
            "x2_variance": self.x2_variance,
            "fixed_graph": self.fixed_graph,
            "empty_graph": self.empty_graph,
            "grid_levels": list(self.grid_levels),
            "em": asdict(self.em),
        }


def replicate_rng(seed: int, b: int) -> np.random.Generator:
    """Generator for replicate ``b``; the ``b``-th child of ``SeedSequence(seed)``."""
    child = np.random.SeedSequence(seed, spawn_key=(b,))
    return np.random.default_rng(child)


def _draw_covariates(cfg: SimConfig, n: int, rng) -> np.ndarray:
    if cfg.case == "I":
        x1 = rng.binomial(1, 0.5, size=n).astype(float)
        x2 = rng.uniform(-1.0, 1.0, size=n)
    else:
        x1 = rng.standard_normal(n)
        x2 = rng.normal(0.0, np.sqrt(cfg.x2_variance), size=n)
    return np.column_stack([x1, x2])


def generate_case_with_latent(cfg: SimConfig, rng, graph=None):
    """Like :func:`generate_case` but also returns the drawn indicators."""
    if graph is None:
        if cfg.empty_graph:
            graph = from_edge_list([], cfg.sbm.n)
        else:
            graph = sbm_generate(cfg.sbm, rng)
    n = graph.n
    X = _draw_covariates(cfg, n, rng)
    truth = cfg.truth
    zeta = (rng.random(n) < sigmoid(truth.gamma0 + X @ truth.gamma)).astype(float)
    s = graph.adjacency @ (X @ truth.beta)
    t = truth.beta0 + X @ truth.beta + truth.delta * zeta * s
    Y = (rng.random(n) < sigmoid(t)).astype(float)
    return Dataset(X=X, Y=Y, graph=graph), zeta


def generate_case(cfg: SimConfig, rng, graph=None) -> Dataset:
    """Draw graph, covariates, latent indicators and responses.

    The indicators are discarded.  A ``graph`` argument overrides the drawn
    graph (used for ``fixed_graph`` studies).
    """
    return generate_case_with_latent(cfg, rng, graph)[0]


@dataclass
class StudyReport:
    kind: str
    config: dict
    summary: dict
    records: list
    failures: int
    runtime_seconds: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "kind": self.kind,
            "config": self.config,
            "summary": self.summary,
            "failures": self.failures,
            "records": self.records,
        }
        if include_timing:
            d["runtime_seconds"] = self.runtime_seconds
        return d


def _run_replicates(fn, cfg: SimConfig):
    fixed = None
    if cfg.fixed_graph and not cfg.empty_graph:
        fixed = sbm_generate(cfg.sbm, np.random.default_rng(
            np.random.SeedSequence(cfg.seed, spawn_key=(2**31,))))

    def one(b):
        rng = replicate_rng(cfg.seed, b)
        data = generate_case(cfg, rng, graph=fixed)
        rec = {"replicate": b, "seed": [cfg.seed, b]}
        try:
            rec.update(fn(data, b))
            rec["ok"] = True
        except (SeparationError, np.linalg.LinAlgError) as exc:
            logger.warning("replicate %d failed: %s", b, exc)
            rec.update(ok=False, error=str(exc))
        return rec

    idx = range(cfg.replicates)
    if cfg.n_workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_workers) as pool:
            return list(pool.map(one, idx))
    return [one(b) for b in idx]


def size_power_study(cfg: SimConfig, deltas=(0.0, 0.01, 0.03, 0.05, 0.10)) -> StudyReport:
    """Rejection rate of the score test for each true ``delta``."""
    start = time.perf_counter()
    grid = default_grid(2, cfg.grid_levels)
    summary, records, failures = {}, [], 0
    for k, delta in enumerate(deltas):
        sub = replace(cfg, delta_true=float(delta), seed=_sub_seed(cfg.seed, k))

        def fn(data, b, sub=sub):
            res = run_test(data, grid, B=sub.test_B, alpha=sub.alpha,
                           seed=_sub_seed(sub.seed, b))
            return {"t_n": res.t_n, "c_alpha": res.c_alpha,
                    "p_value": res.p_value, "reject": res.reject}

        recs = _run_replicates(fn, sub)
        ok = [r for r in recs if r["ok"]]
        failures += len(recs) - len(ok)
        rate = float(np.mean([r["reject"] for r in ok])) if ok else float("nan")
        summary[repr(float(delta))] = {
            "delta": float(delta),
            "rejection_rate": rate,
            "completed": len(ok),
            "failed": len(recs) - len(ok),
        }
        for r in recs:
            r["delta"] = float(delta)
        records.extend(recs)
    return StudyReport("size_power", _config_echo(cfg, deltas=list(map(float, deltas))),
                       summary, records, failures, time.perf_counter() - start)


def _sub_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(k,)).generate_state(1)[0])


def _config_echo(cfg: SimConfig, **extra) -> dict:
    d = cfg.to_dict()
    d.pop("n_workers", None)
    d.update(extra)
    return d


def _bias_mse(estimates: np.ndarray, truth: np.ndarray):
    bias = estimates.mean(axis=0) - truth
    mse = ((estimates - truth) ** 2).mean(axis=0)
    return bias, mse


def bias_mse_study(cfg: SimConfig, deltas=(0.1, 0.3), estimator: str = "em") -> StudyReport:
    """Bias and MSE across replicates for the EM or classical logistic fit.

    ``estimator="logistic"`` ignores the graph and reports ``(beta0, beta)``
    only.  ``estimator="both"`` fits both on every replicate.
    """
    if estimator not in ("em", "logistic", "both"):
        raise ValueError(f"unknown estimator {estimator!r}")
    start = time.perf_counter()
    summary, records, failures = {}, [], 0
    for k, delta in enumerate(deltas):
        sub = replace(cfg, delta_true=float(delta), seed=_sub_seed(cfg.seed, k))
        truth = sub.truth

        def fn(data, b, sub=sub):
            null = fit_logistic(data.X, data.Y)
            if null.separated:
                raise SeparationError("logistic fit separated")
            rec = {"logistic": null.eta.tolist()}
            if estimator in ("em", "both"):
                fit = fit_em(data, sub.em, null_fit=null)
                rec.update(em=fit.params.to_vector().tolist(),
                           em_converged=fit.converged, em_iterations=fit.iterations)
            return rec

        recs = _run_replicates(fn, sub)
        ok = [r for r in recs if r["ok"]]
        failures += len(recs) - len(ok)
        entry = {"delta": float(delta), "completed": len(ok), "failed": len(recs) - len(ok)}
        if ok and estimator in ("em", "both"):
            est = np.array([r["em"] for r in ok])
            bias, mse = _bias_mse(est, truth.to_vector())
            entry["em"] = {nm: {"bias": float(b_), "mse": float(m_)}
                           for nm, b_, m_ in zip(PARAM_NAMES, bias, mse)}
            entry["em_converged"] = int(sum(r["em_converged"] for r in ok))
        if ok and estimator in ("logistic", "both"):
            est = np.array([r["logistic"] for r in ok])
            bias, mse = _bias_mse(est, truth.eta)
            entry["logistic"] = {nm: {"bias": float(b_), "mse": float(m_)}
                                 for nm, b_, m_ in zip(("beta0", "beta1", "beta2"), bias, mse)}
        summary[repr(float(delta))] = entry
        for r in recs:
            r["delta"] = float(delta)
        records.extend(recs)
    return StudyReport("bias_mse", _config_echo(cfg, deltas=list(map(float, deltas)),
                                                estimator=estimator),
                       summary, records, failures, time.perf_counter() - start)
