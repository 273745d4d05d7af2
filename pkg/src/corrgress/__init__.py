"""Latent-variable models with covariate-dependent correlation matrices.

Estimation is two-step: marginal maximum likelihood for the measurement
parameters, then a constrained Metropolis-within-Gibbs sampler for the
structural parameters that keeps every retained correlation matrix positive
definite at every point of a declared covariate test set.
"""

from .diagnostics import convergence, fitted_class_probs, fitted_correlations, \
    summarize
from .engine import DrawStore, EngineError, PriorConfig, SamplerConfig, \
    run_alpha_only, run_chain
from .feasibility import CovariateExpansion, FeasibleInterval, TestSet, \
    alpha_interval, build_test_set, is_feasible
from .linalg import CholeskyFactor, CorrelationState, NotPositiveDefiniteError, \
    SingularUpdateError, assemble_matrix, chol_rank1_modify, is_positive_definite, \
    move_target_to_last, pair_indices, perturb_offdiagonal, \
    perturb_offdiagonal_chol, rank1_inverse_det_update, try_cholesky
from .measurement import ConvergenceReport, Step1Params, fit_measurement, \
    step1_loglik
from .model import ClassSide, Dataset, LatentDim, LatentState, \
    MeasurementParams, ModelSpec, StructuralParams, class_probs, item_prob, \
    simulate_dataset, structural_moments, unit_loglik
from .samplers import LogDensity, NotLogConcaveError, RandomStream, ars_sample, \
    rw_mh_step, truncated_normal

__version__ = "0.1.0"
