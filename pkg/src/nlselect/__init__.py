"""Bayesian variable selection with hierarchical non-local (hyper-pMOM) priors."""

__version__ = "0.1.0"

from .data import Dataset, ModelIndex, make_model, train_test_split
from .errors import NLSelectError
from .laplace import (ModeResult, ParamPoint, ScoredModel, find_mode, gradient, hessian,
                      log_marginal, log_posterior_ratio, score_model)
from .priors import HyperConfig, ModelPriorSpec, log_joint, log_model_prior
from .search import ScoredModelSet, SearchConfig, map_model, run_search

__all__ = [
    "Dataset", "ModelIndex", "make_model", "train_test_split", "NLSelectError",
    "ModeResult", "ParamPoint", "ScoredModel", "find_mode", "gradient", "hessian",
    "log_marginal", "log_posterior_ratio", "score_model", "HyperConfig", "ModelPriorSpec",
    "log_joint", "log_model_prior", "ScoredModelSet", "SearchConfig", "map_model", "run_search",
]
