"""Background-contrastive non-negative matrix factorization.

Factor a target matrix ``X`` and a background matrix ``Y`` over one shared
non-negative basis ``W`` while rewarding a good fit of ``X`` and penalizing
a good fit of ``Y``, so the learned topics emphasize target-specific
structure.
"""
from .core import (
    EPS,
    BcnmfError,
    FactorModel,
    Likelihood,
    LikelihoodSpec,
    Termination,
    TrainConfig,
    TrainReport,
    as_nonneg,
    init_factors,
    sparsity_mask,
    validate_problem,
)
from .objective import contrastive_objective, evaluate_loss, gradient_split
from .updates import update_basis, update_coefficients
from .trainer import Health, NoViableAlpha, check_degeneracy, fit, select_alpha
from .minibatch import WGradAccumulator, epoch
from .baselines import cpca_fit, nmf_fit
from .evaluation import ari, kmeans, topic_associations, welch_t
from .simulate import make_composite, make_planted
from .io import read_matrix, read_model, write_model

__version__ = "0.1.0"

__all__ = [
    "EPS", "BcnmfError", "FactorModel", "Likelihood", "LikelihoodSpec", "Termination",
    "TrainConfig", "TrainReport", "as_nonneg", "init_factors", "sparsity_mask", "validate_problem",
    "contrastive_objective", "evaluate_loss", "gradient_split", "update_basis", "update_coefficients",
    "Health", "NoViableAlpha", "check_degeneracy", "fit", "select_alpha", "WGradAccumulator", "epoch",
    "cpca_fit", "nmf_fit", "ari", "kmeans", "topic_associations", "welch_t", "make_composite",
    "make_planted", "read_matrix", "read_model", "write_model",
]
