"""Robust tensor decomposition: bounded low-rank approximation, robust Kruskal
rank, factor alignment and moment-based learners for latent-variable models."""
from .decompose import (
    ApproximationResult,
    LatticeNet,
    NetSearchConfig,
    bounded_low_rank_3,
    bounded_low_rank_general,
    bounded_low_rank_symmetric,
    build_eps_net,
    compute_mode_subspaces,
    project_candidate_guarantee_check,
)
from .matching import (
    AlignmentResult,
    align,
    align_symmetric,
    necessary_condition_check,
    recover_weight,
    sign_fix,
    split_rank_one,
)
from .spectral import (
    BudgetExceeded,
    KrankCertificate,
    SeparationFailure,
    check_kruskal_condition,
    find_separating_vector,
    nz_count,
    robust_krank,
    sigma_min,
    svd,
    top_r_subspace,
)
from .tensor_core import (
    CPDecomposition,
    expand,
    fold,
    frobenius_distance,
    khatri_rao,
    mode_contract,
    multilinear_transform,
    symmetric_cp,
    unfold,
)

__version__ = "0.1.0"
