"""Learning multi-view mixtures and topic models from samples."""
# %%
import numpy as np

from robustcp.experiments import planted_multiview
from robustcp.models import multiview as mv

# %% [markdown]
# Three views, three symbols per view, two hidden components.

# %%
params = planted_multiview(seed=0)
print("weights:", np.round(params.weights, 3))

# %% [markdown]
# From the exact moment tensor the parameters come back to machine precision.

# %%
est, diag = mv.learn_multiview_from_tensor(mv.population_tensor(params), rank=2)
print("exact-tensor error:", mv.parameter_error(params, est)["max"])

# %% [markdown]
# With samples the error shrinks roughly like 1 / sqrt(N).

# %%
for n in (1_000, 10_000, 100_000):
    x = mv.sample_multiview(params, n, seed=1)
    est, diag = mv.learn_multiview(x, rank=2, order=3, dims=3)
    print(f"N={n:>7d}  error={mv.parameter_error(params, est)['max']:.4f}  target eps={diag['target_eps']:.4f}")

# %% [markdown]
# Exchangeable topic model: every view shares one topic matrix.

# %%
topics = np.array([[0.7, 0.1], [0.2, 0.1], [0.1, 0.8]])
x = mv.sample_multiview(mv.topic_params([0.4, 0.6], topics, 3), 100_000, seed=2)
est, _ = mv.learn_topic(x, rank=2, order=3, dims=3)
print(np.round(est.means[0], 3))
