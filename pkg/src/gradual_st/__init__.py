"""Gradual self-training for domain adaptation.

Linear margin classifiers are adapted through a sequence of slowly shifting
unlabeled domains by repeated pseudolabeling. The package provides the data
types and generators, exact and iterative solvers, W-infinity transport
utilities, an experiment runner and an executable check of the theory.
"""

from .distributions import (
    DataError,
    DiscreteDistribution,
    DomainSequence,
    GaussianMixtureDomain,
    LabeledPoints,
)
from .experiment import parse_config, run_ablation, run_experiment
from .models import LinearModel, Loss, population_loss, zero_one_error
from .optimize import SolverConfig, erm_constrained, erm_exact_1d2d
from .selftrain import SelfTrainConfig, gradual_self_train, self_train_step
from .theory import VerificationResult, run_suite
from .wasserstein import rho_conditional, winf_discrete

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "DiscreteDistribution",
    "DomainSequence",
    "GaussianMixtureDomain",
    "LabeledPoints",
    "LinearModel",
    "Loss",
    "SelfTrainConfig",
    "SolverConfig",
    "VerificationResult",
    "erm_constrained",
    "erm_exact_1d2d",
    "gradual_self_train",
    "parse_config",
    "population_loss",
    "rho_conditional",
    "run_ablation",
    "run_experiment",
    "run_suite",
    "self_train_step",
    "winf_discrete",
    "zero_one_error",
]
