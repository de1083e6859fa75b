"""Moment-based learners for latent-variable models."""
from ._common import LearnerConfig, RecoveryFailure
from .gaussian import (
    GaussianMixtureParams,
    estimate_sigma,
    gaussian_noise_tensor,
    gaussian_univariate_moment,
    learn_gaussian_from_moments,
    learn_gaussian_mixture,
    mom_tensor,
)
from .hmm import HMMParams, hmm_embed, learn_hmm, learn_hmm_from_tensors, reverse_transition
from .multiview import (
    MultiViewParams,
    estimate_moment_tensor,
    learn_multiview,
    learn_multiview_from_tensor,
    learn_topic,
    required_samples_multiview,
    sample_multiview,
)
