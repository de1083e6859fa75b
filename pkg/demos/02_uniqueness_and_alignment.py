"""Certify uniqueness, decompose, and align with the planted factors."""
# %%
import numpy as np

from robustcp import CPDecomposition, NetSearchConfig, align, bounded_low_rank_general, check_kruskal_condition
from robustcp.experiments import planted_tensor
from robustcp.matching import necessary_condition_check

# %% [markdown]
# Planted 5 x 5 x 5 tensor of rank 4 whose factors pass the robust Kruskal
# condition at tau = 10, perturbed by 1e-5.

# %%
t, truth, _ = planted_tensor((5, 5, 5), rank=4, eps=1e-5, seed=0, tau=10.0)
report = check_kruskal_condition(truth, 10.0)
print("robust Kruskal ranks:", report.kranks, "sum", report.total, ">= 2R + 2 =", report.required)

# %%
res = bounded_low_rank_general(t, NetSearchConfig(rank=4, target_eps=1e-5))
print("achieved error:", res.achieved_error, res.status)

# %% [markdown]
# The recovered decomposition matches the planted one up to a column
# permutation and per-mode scalings whose product is one.

# %%
al = align(truth, res.decomposition)
print("permutation   :", al.permutation)
print("mode residuals:", np.round(al.per_mode_residuals, 8))
print("scaling dev.  :", al.scaling_product_deviation)

# %% [markdown]
# When A (.) B has dependent columns the third factor is not unique: the
# diagnostic returns a second decomposition of the same tensor.

# %%
rng = np.random.default_rng(1)
A, B, C = rng.standard_normal((2, 5)), rng.standard_normal((2, 5)), rng.standard_normal((3, 5))
diag = necessary_condition_check(A, B)
print("sigma_min(A (.) B):", diag.sigma_min, "unique-compatible:", diag.unique_compatible)
cp = CPDecomposition([A, B, C])
alt = diag.alternative(cp)
print("same tensor:", np.allclose(cp.expand(), alt.expand()), " different C:", not np.allclose(C, alt.factors[2]))
