"""Renormalisation-group audit of deep binary RBM stacks.

Estimates layer-to-layer stability matrices from Monte Carlo samples, flags
relevant (expanding) modes, assembles the input-space Fisher information
by the chain rule and probes the network along its stiffest direction.
Every sampled quantity has an enumeration oracle in :mod:`rgaudit.exact`.
"""

from .exact import (
    ExactDistribution,
    EnumerationLimitError,
    exact_expectations,
    exact_kl,
    exact_layer_distribution,
    exact_rg_step,
    exact_second_moments,
    fim_fd,
    jacobian_fd,
)
from .fim import (
    AdversarialReport,
    FimMatrix,
    FirstLayerJacobian,
    assemble_fim,
    chain_jacobian,
    evaluate_attack,
    exact_fim,
    first_layer_jacobian,
    top_mode,
)
from .mcrg import (
    EigenMode,
    ExpectationSet,
    FlowConfig,
    FlowReport,
    StabilityEstimate,
    eigen_analysis,
    estimate_expectations,
    flow_report,
    solve_stability,
)
from .operators import (
    CouplingVector,
    OperatorBasis,
    OperatorId,
    couplings_from_distribution,
    distribution_from_couplings,
    enumerate_basis,
    evaluate,
)
from .rbm import (
    DeepStack,
    LayerEnsemble,
    RbmLayer,
    TrainConfig,
    hidden_given_visible,
    propagate,
    sample_layer,
    train_layerwise,
)
from .tasks import TaskSpec, gen_data, posterior

__version__ = "0.1.0"

__all__ = [
    "ExactDistribution",
    "EnumerationLimitError",
    "exact_expectations",
    "exact_kl",
    "exact_layer_distribution",
    "exact_rg_step",
    "exact_second_moments",
    "fim_fd",
    "jacobian_fd",
    "AdversarialReport",
    "FimMatrix",
    "FirstLayerJacobian",
    "assemble_fim",
    "chain_jacobian",
    "evaluate_attack",
    "exact_fim",
    "first_layer_jacobian",
    "top_mode",
    "EigenMode",
    "ExpectationSet",
    "FlowConfig",
    "FlowReport",
    "StabilityEstimate",
    "eigen_analysis",
    "estimate_expectations",
    "flow_report",
    "solve_stability",
    "CouplingVector",
    "OperatorBasis",
    "OperatorId",
    "couplings_from_distribution",
    "distribution_from_couplings",
    "enumerate_basis",
    "evaluate",
    "DeepStack",
    "LayerEnsemble",
    "RbmLayer",
    "TrainConfig",
    "hidden_given_visible",
    "propagate",
    "sample_layer",
    "train_layerwise",
    "TaskSpec",
    "gen_data",
    "posterior",
]
