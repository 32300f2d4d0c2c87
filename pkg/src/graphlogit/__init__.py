"""Latent logistic regression with graph data.

Detects and estimates network dependence in binary node outcomes: a node's
response may be shifted by its neighbors' covariates, but only if a latent
indicator marks it as susceptible.
"""

from .graph import (
    Graph,
    GraphError,
    SbmConfig,
    from_edge_list,
    neighbor_feature_sum,
    default_sbm_config,
    sbm_generate,
    validate_graph,
)
from .model import (
    Dataset,
    FullParams,
    complete_log_likelihood,
    marginal_log_likelihood,
    outcome_prob,
    sigmoid,
    susceptible_prior,
)
from .logistic import NullFit, SeparationError, fit_logistic, information_matrix, solve_spd
from .score_test import PhiGrid, TestResult, default_grid, random_grid, run_test, sup_statistic
from .em import EmConfig, FitResult, fit_em, posterior_weights
from .simulation import SimConfig, StudyReport, generate_case, size_power_study, bias_mse_study
from .evaluation import RocCurve, compare_models, predict_proba, roc_curve
from .io import load_dataset, pca_fit, pca_reduce, save_dataset

__version__ = "0.1.0"
