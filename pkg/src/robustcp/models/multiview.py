"""Multi-view mixtures and the exchangeable topic model."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..decompose import bounded_low_rank_general
from ..matching import sign_fix
from ..tensor_core import CPDecomposition, check_shape, expand
from ._common import EXACT_EPS, LearnerConfig, RecoveryFailure, match_columns


@dataclass(frozen=True)
class MultiViewParams:
    """Mixing weights and one n x R mean matrix per view."""

    weights: np.ndarray
    means: tuple
    probability_columns: bool = True

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        means = tuple(np.asarray(m, dtype=np.float64) for m in self.means)
        if w.ndim != 1 or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a positive probability vector")
        if not means or any(m.ndim != 2 or m.shape[1] != w.size for m in means):
            raise ValueError("every mean matrix needs one column per component")
        if self.probability_columns:
            for m in means:
                if np.any(m < 0) or np.max(np.abs(m.sum(axis=0) - 1.0)) > 1e-12:
                    raise ValueError("mean columns must be probability vectors")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", means)

    @property
    def rank(self) -> int:
        return self.weights.size

    @property
    def order(self) -> int:
        return len(self.means)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": [m.tolist() for m in self.means],
        }


def random_multiview_params(n: int, rank: int, order: int, seed: int = 0,
                            concentration: float = 0.5) -> MultiViewParams:
    """Dirichlet-drawn probability columns and weights bounded away from 0."""
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.full(rank, 5.0))
    means = [rng.dirichlet(np.full(n, concentration), size=rank).T for _ in range(order)]
    return MultiViewParams(w, tuple(means))


def population_tensor(params: MultiViewParams) -> np.ndarray:
    """``E[x1 (x) ... (x) xl]`` with the weights absorbed into the last view."""
    mats = list(params.means)
    mats[-1] = mats[-1] * params.weights
    return expand(CPDecomposition(mats))


def sample_multiview(params: MultiViewParams, n_samples: int, seed: int = 0) -> np.ndarray:
    """Indicator-view samples stored as category indices, shape (N, l)."""
    if n_samples < 0:
        raise ValueError("n_samples must be nonnegative")
    rng = np.random.default_rng(seed)
    h = rng.choice(params.rank, size=n_samples, p=params.weights)
    out = np.empty((n_samples, params.order), dtype=np.int64)
    for j, m in enumerate(params.means):
        cdf = np.cumsum(m, axis=0)
        cdf[-1] = 1.0
        u = rng.random(n_samples)
        # inverse-cdf draw from column h of view j
        out[:, j] = np.sum(u[:, None] >= cdf[:, h].T, axis=1)
    return out


def estimate_moment_tensor(samples, order: int | None = None, dims=None) -> np.ndarray:
    """Empirical ``E[x1 (x) ... (x) xl]``.

    `samples` is either an (N, l) integer array of category indices (with
    `dims` giving the alphabet size per view, default max index + 1) or a list
    of l real (N, n_j) arrays.
    """
    if isinstance(samples, (list, tuple)):
        views = [np.asarray(v, dtype=np.float64) for v in samples]
        if order is not None and len(views) != order:
            raise ValueError(f"expected {order} views, got {len(views)}")
        n = views[0].shape[0]
        if n == 0:
            raise ValueError("empty sample set")
        letters = "abcdefgh"[: len(views)]
        subs = ",".join(f"k{c}" for c in letters) + "->" + letters
        return np.einsum(subs, *views) / n
    idx = np.asarray(samples)
    if idx.ndim != 2 or idx.shape[0] == 0:
        raise ValueError("empty sample set")
    if order is not None and idx.shape[1] != order:
        raise ValueError(f"expected {order} views, got {idx.shape[1]}")
    if dims is None:
        dims = tuple(int(v) for v in idx.max(axis=0) + 1)
    dims = tuple(int(d) for d in np.broadcast_to(dims, (idx.shape[1],)))
    check_shape(dims)
    if np.any(idx < 0) or np.any(idx >= np.array(dims)):
        raise ValueError("category index out of range")
    flat = np.ravel_multi_index(tuple(idx.T), dims)
    counts = np.bincount(flat, minlength=math.prod(dims))
    return (counts / idx.shape[0]).reshape(dims)


def required_samples_multiview(eps: float, order: int, n: int, c_max: float = 1.0,
                               constant: float = 8.0) -> int:
    """Conservative sample size ``C (c_max n)^l sqrt(l ln n) / eps^2``.

    ``ln n`` is floored at ``ln 2`` so the bound stays positive for n == 1.
    """
    if eps <= 0 or order < 1 or n < 1 or c_max <= 0:
        raise ValueError("eps, order, n and c_max must be positive")
    log_n = max(math.log(n), math.log(2))
    value = constant * (c_max * n) ** order * math.sqrt(order * log_n) / eps**2
    if not math.isfinite(value) or value > 2**62:
        raise OverflowError(f"required sample size {value:.3g} is out of range")
    return int(math.ceil(value))


def params_from_decomposition(cp: CPDecomposition) -> tuple[MultiViewParams, dict]:
    """Sign-fix and l1-renormalize a decomposition of a multi-view moment tensor.

    The column sums of each factor estimate the per-mode scalings (true
    columns sum to one), so they drive the sign fix; the first l-1 factors
    are then scaled to unit l1 norm and the last factor's column sums become
    the weights.
    """
    sums = np.array([f.sum(axis=0) for f in cp.factors])
    signs = sign_fix(sums)
    mats = [f * s for f, s in zip(cp.factors, signs)]
    sums = np.abs(sums)
    if np.any(sums[:-1] <= 0):
        raise RecoveryFailure("a recovered column sums to zero")
    carry = np.prod(sums[:-1], axis=0)
    means = [m / s for m, s in zip(mats[:-1], sums[:-1])]
    last = mats[-1] * carry
    w = last.sum(axis=0)
    means.append(last / w)
    diag = {"column_sums": sums.tolist(), "raw_weight_sum": float(w.sum())}
    w = w / w.sum()
    return MultiViewParams(w, tuple(means), probability_columns=False), diag


def learn_multiview_from_tensor(t, rank: int, config: LearnerConfig | None = None,
                                target_eps: float | None = None):
    """Recover multi-view parameters from a (possibly estimated) moment tensor."""
    config = config or LearnerConfig()
    eps = target_eps if target_eps is not None else (config.target_eps or EXACT_EPS)
    res = bounded_low_rank_general(np.asarray(t, dtype=np.float64), config.net_config(rank, eps))
    params, diag = params_from_decomposition(res.decomposition)
    diag.update({
        "achieved_error": res.achieved_error,
        "status": res.status,
        "candidates_evaluated": res.candidates_evaluated,
        "target_eps": eps,
    })
    return params, diag


def sampling_eps(n_samples: int) -> float:
    """Frobenius error scale of an indicator moment tensor: ``E||T^ - T||^2 <= 1/N``."""
    return 3.0 / math.sqrt(n_samples)


def learn_multiview(samples, rank: int, order: int, dims=None, config: LearnerConfig | None = None):
    """Estimate the moment tensor, decompose it, and renormalize the factors."""
    config = config or LearnerConfig()
    t = estimate_moment_tensor(samples, order, dims)
    n = len(samples[0]) if isinstance(samples, (list, tuple)) else np.asarray(samples).shape[0]
    eps = config.target_eps or sampling_eps(n)
    return learn_multiview_from_tensor(t, rank, config, eps)


def parameter_error(truth: MultiViewParams, estimate: MultiViewParams) -> dict:
    """Errors after the best column matching: per-view ``||M - M~ Pi||_F`` and weights."""
    perm = match_columns(list(truth.means), list(estimate.means))
    inv = np.argsort(perm)
    per_view = [float(np.linalg.norm(m - e[:, inv])) for m, e in zip(truth.means, estimate.means)]
    w_err = float(np.max(np.abs(truth.weights - estimate.weights[inv])))
    return {"per_view": per_view, "weights": w_err, "max": max(per_view + [w_err]),
            "permutation": perm.tolist()}


# exchangeable topic model: every view shares one mean matrix


def topic_params(weights, topics, order: int) -> MultiViewParams:
    return MultiViewParams(weights, tuple([np.asarray(topics, dtype=np.float64)] * order))


def learn_topic(samples, rank: int, order: int, dims=None, config: LearnerConfig | None = None):
    """Multi-view learner followed by averaging the (shared) topic matrices."""
    params, diag = learn_multiview(samples, rank, order, dims, config)
    ref = params.means[0]
    aligned = []
    for m in params.means:
        p = match_columns([ref], [m])
        aligned.append(m[:, np.argsort(p)])
    avg = np.mean(aligned, axis=0)
    return MultiViewParams(params.weights, tuple([avg] * order), probability_columns=False), diag
