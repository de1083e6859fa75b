"""Hidden Markov models and spherical Gaussian mixtures."""
# %%
import numpy as np

from robustcp.models import gaussian as gm
from robustcp.models import hmm

# %% [markdown]
# HMM: three consecutive observations form a three-view mixture whose hidden
# variable is the middle state.

# %%
par = hmm.random_hmm(n=3, rank=2, seed=4)
est, diag = hmm.learn_hmm_from_tensors({1: hmm.population_tensor(par, 1)}, rank=2, q=1, n=3)
print("exact tensors:", hmm.hmm_error(par, est))

x = hmm.sample_hmm(par, 200_000, length=3, seed=0)
est, diag = hmm.learn_hmm(x, rank=2, q=1, n=3)
err = hmm.hmm_error(par, est)
print(f"200k windows: P error {err['transition']:.3f}, M error {err['observation']:.3f}")

# %% [markdown]
# Gaussian mixture with known sigma: subtract the noise contributions from the
# raw moments, decompose Mom_3 and read the weights off Mom_2.

# %%
g = gm.GaussianMixtureParams([0.35, 0.65], [[0.6, -0.3], [0.2, 0.5], [-0.4, 0.1]], sigma=0.5)
est, _ = gm.learn_gaussian_from_moments(gm.population_moms(g, 3), rank=2, order=3, sigma=0.5)
print("analytic moments:", gm.gaussian_error(g, est))

x = gm.sample_gaussian_mixture(g, 400_000, seed=1)
print("estimated sigma :", round(gm.estimate_sigma(x), 4))
est, _ = gm.learn_gaussian_mixture(x, rank=2, order=3, sigma="estimate")
print("from samples    :", {k: round(v, 3) for k, v in gm.gaussian_error(g, est).items() if k != "permutation"})
