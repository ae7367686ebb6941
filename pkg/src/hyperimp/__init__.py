"""Hyperparameter importance across datasets: functional ANOVA on forest
surrogates, data-driven sampling priors, and multi-fidelity optimizers."""

__version__ = "0.1.0"

from .configspace import (
    Config,
    ConfigSpace,
    HyperparameterSpec,
    builtin_space,
    load_space,
    sample_uniform,
    save_space,
)
from .errors import HyperimpError
from .fanova import decompose_tree, importance, marginal, top_interactions
from .forest import ForestSettings, RegressionForest, RegressionTree, fit, leaf_partition
from .optimize import (
    HyperbandSettings,
    SurrogateObjective,
    SyntheticObjective,
    hyperband,
    random_search,
    successive_halving,
    verify_importance,
)
from .priors import PriorModel, build_prior, sample_prior
from .rundata import RunCollection, filter_datasets, load_runs, top_n_configs
from .stats import ScoreMatrix, friedman_statistic, nemenyi_cd, nemenyi_test, rank_rows

__all__ = [
    "Config",
    "ConfigSpace",
    "ForestSettings",
    "HyperbandSettings",
    "HyperimpError",
    "HyperparameterSpec",
    "PriorModel",
    "RegressionForest",
    "RegressionTree",
    "RunCollection",
    "ScoreMatrix",
    "SurrogateObjective",
    "SyntheticObjective",
    "builtin_space",
    "build_prior",
    "decompose_tree",
    "filter_datasets",
    "fit",
    "friedman_statistic",
    "hyperband",
    "importance",
    "leaf_partition",
    "load_runs",
    "load_space",
    "marginal",
    "nemenyi_cd",
    "nemenyi_test",
    "random_search",
    "rank_rows",
    "sample_prior",
    "sample_uniform",
    "save_space",
    "successive_halving",
    "top_interactions",
    "top_n_configs",
    "verify_importance",
]
