"""Hidden Markov models embedded as three-view mixtures.

A window of 2q+1 consecutive observations is split around the middle
observation X_{q+1}, whose hidden state plays the latent variable:

* view 1 holds X_1..X_q,
* view 2 holds X_{q+1},
* view 3 holds X_{q+2}..X_{2q+1}.

Side windows are encoded as mixed-radix integers with the observation
farthest from the middle as the most significant digit.  With that encoding
the view matrices are the iterated Khatri-Rao products

    A = ((M Pr) (.) M) Pr ... (.) M) Pr,   B = M,   C = ((M P) (.) M) P ... (.) M) P

where ``Pr = diag(w) P^T diag(w)^-1`` is the reverse transition matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..decompose import bounded_low_rank_general
from ..spectral import sigma_min
from ..tensor_core import CPDecomposition, expand, khatri_rao
from ._common import EXACT_EPS, LearnerConfig, RecoveryFailure, match_columns
from .multiview import estimate_moment_tensor, params_from_decomposition, sampling_eps

WINDOW_BUDGET = 10**6


@dataclass(frozen=True)
class HMMParams:
    """Column-stochastic transition P (P[s, r] = Pr(next s | current r)),
    column-stochastic observation matrix M (n x R) and stationary weights w."""

    transition: np.ndarray
    observation: np.ndarray
    stationary: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=np.float64)
        m = np.asarray(self.observation, dtype=np.float64)
        w = np.asarray(self.stationary, dtype=np.float64)
        r = w.size
        if p.shape != (r, r) or m.ndim != 2 or m.shape[1] != r:
            raise ValueError("inconsistent HMM shapes")
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "observation", m)
        object.__setattr__(self, "stationary", w)

    @property
    def rank(self) -> int:
        return self.stationary.size

    @property
    def n(self) -> int:
        return self.observation.shape[0]

    def validate(self, tol: float = 1e-10) -> None:
        p, m, w = self.transition, self.observation, self.stationary
        if np.any(p < -tol) or np.max(np.abs(p.sum(axis=0) - 1)) > tol:
            raise ValueError("transition matrix is not column-stochastic")
        if np.any(m < -tol) or np.max(np.abs(m.sum(axis=0) - 1)) > tol:
            raise ValueError("observation matrix is not column-stochastic")
        if np.max(np.abs(p @ w - w)) > tol or abs(w.sum() - 1) > tol:
            raise ValueError("weights are not the stationary distribution")

    def to_dict(self) -> dict:
        return {
            "transition": self.transition.tolist(),
            "observation": self.observation.tolist(),
            "stationary": self.stationary.tolist(),
            "sigma_min_transition": sigma_min(self.transition),
        }


def stationary_distribution(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    vals, vecs = np.linalg.eig(p)
    k = int(np.argmin(np.abs(vals - 1.0)))
    w = np.real(vecs[:, k])
    return w / w.sum()


def random_hmm(n: int, rank: int, seed: int = 0, stay: float = 0.6) -> HMMParams:
    """Random chain with a dominant diagonal (well-conditioned P)."""
    rng = np.random.default_rng(seed)
    p = stay * np.eye(rank) + (1 - stay) * rng.dirichlet(np.ones(rank), size=rank).T
    m = rng.dirichlet(np.full(n, 0.7), size=rank).T
    return HMMParams(p, m, stationary_distribution(p))


def reverse_transition(p, w) -> np.ndarray:
    """``diag(w) P^T diag(w)^-1``: Pr(previous state | current state)."""
    p = np.asarray(p, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("stationary weights must be positive")
    return (w[:, None] * p.T) / w[None, :]


def _check_window(n: int, q: int) -> None:
    if q < 1:
        raise ValueError("q must be at least 1")
    if n**q > WINDOW_BUDGET:
        raise ValueError(f"window alphabet n^q = {n**q} exceeds the budget {WINDOW_BUDGET}")


def encode_window(window, n: int) -> np.ndarray:
    """Mixed-radix index of each row of `window`, first column most significant."""
    window = np.atleast_2d(np.asarray(window, dtype=np.int64))
    out = np.zeros(window.shape[0], dtype=np.int64)
    for col in window.T:
        out = out * n + col
    return out


def decode_window(index, n: int, length: int) -> np.ndarray:
    index = np.asarray(index, dtype=np.int64)
    digits = np.unravel_index(index, (n,) * length)
    return np.stack(digits, axis=-1)


def hmm_embed(samples, q: int, n: int) -> np.ndarray:
    """Three-view category indices from windows of 2q+1 observations."""
    x = np.atleast_2d(np.asarray(samples, dtype=np.int64))
    if x.shape[1] != 2 * q + 1:
        raise ValueError(f"windows must hold 2q+1 = {2 * q + 1} observations")
    _check_window(n, q)
    # farthest-from-middle observation first, i.e. most significant
    left = encode_window(x[:, :q], n)
    right = encode_window(x[:, q + 1:][:, ::-1], n)
    return np.stack([left, x[:, q], right], axis=1)


def view_matrices(params: HMMParams, q: int):
    """(A, B, C) with shapes (n^q, R), (n, R), (n^q, R)."""
    _check_window(params.n, q)
    m, p = params.observation, params.transition
    pr = reverse_transition(p, params.stationary)
    a, c = m @ pr, m @ p
    for _ in range(q - 1):
        a = khatri_rao(a, m) @ pr
        c = khatri_rao(c, m) @ p
    return a, m, c


def population_tensor(params: HMMParams, q: int) -> np.ndarray:
    a, b, c = view_matrices(params, q)
    return expand(CPDecomposition([a, b, c * params.stationary]))


def sample_hmm(params: HMMParams, n_samples: int, length: int, seed: int = 0) -> np.ndarray:
    """Independent windows of `length` observations started from stationarity."""
    rng = np.random.default_rng(seed)
    r = params.rank
    pcdf = np.cumsum(params.transition, axis=0)
    mcdf = np.cumsum(params.observation, axis=0)
    pcdf[-1] = mcdf[-1] = 1.0
    z = rng.choice(r, size=n_samples, p=params.stationary)
    out = np.empty((n_samples, length), dtype=np.int64)
    for t in range(length):
        out[:, t] = np.sum(rng.random(n_samples)[:, None] >= mcdf[:, z].T, axis=1)
        z = np.sum(rng.random(n_samples)[:, None] >= pcdf[:, z].T, axis=1)
    return out


def row_sum_collapse(c, n: int) -> np.ndarray:
    """Sum the rows of ``(D (.) M) P`` over the M digit, giving ``D P``.

    Valid because every column of M sums to one.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.shape[0] % n:
        raise ValueError("row count is not a multiple of n")
    return c.reshape(c.shape[0] // n, n, c.shape[1]).sum(axis=1)


def _factorize(t, rank, config, eps):
    res = bounded_low_rank_general(t, config.net_config(rank, eps))
    params, diag = params_from_decomposition(res.decomposition)
    diag.update({"achieved_error": res.achieved_error, "status": res.status,
                 "candidates_evaluated": res.candidates_evaluated, "target_eps": eps})
    return params, diag


def learn_hmm_from_tensors(tensors: dict, rank: int, q: int, n: int,
                           config: LearnerConfig | None = None, target_eps: float | None = None,
                           cond_tol: float | None = None):
    """Recover (P, M, w) from the three-view tensors at window q (and q-1 if q >= 2).

    ``tensors[k]`` is the moment tensor of the window-k embedding.  The view-3
    factor is ``C = (D (.) M) P`` with ``D`` the view-3 factor at window
    q - 1 (``D = M`` when q == 1); summing its rows over the M digit gives
    ``D P``, and P follows by least squares.

    The error in P scales like ``eps / sigma_min(D)``, so D is reported as
    ill-conditioned when ``sigma_min(D) < cond_tol`` (default
    ``max(1e-6, eps)``).
    """
    config = config or LearnerConfig()
    eps = target_eps if target_eps is not None else (config.target_eps or EXACT_EPS)
    est, diag = _factorize(tensors[q], rank, config, eps)
    _, m_hat, c_hat = est.means
    w_hat = est.weights
    # view-3 factor without the weights: C columns are probability vectors
    if q == 1:
        d, dp = m_hat, c_hat
    else:
        prev, diag_prev = _factorize(tensors[q - 1], rank, config, eps)
        perm = match_columns([m_hat], [prev.means[1]])
        d = prev.means[2][:, np.argsort(perm)]
        dp = row_sum_collapse(c_hat, n)
        diag["previous_window"] = diag_prev
    smin = sigma_min(d)
    diag["sigma_min_d"] = smin
    if cond_tol is None:
        cond_tol = max(1e-6, eps)
    if smin < cond_tol:
        raise RecoveryFailure(f"D is ill-conditioned (sigma_min = {smin:.3g})")
    p_hat = np.linalg.lstsq(d, dp, rcond=None)[0]
    return HMMParams(p_hat, m_hat, w_hat), diag


def learn_hmm(samples, rank: int, q: int, n: int, config: LearnerConfig | None = None):
    """Learn an HMM from windows of 2q+1 consecutive observations."""
    config = config or LearnerConfig()
    x = np.atleast_2d(np.asarray(samples, dtype=np.int64))
    tensors = {}
    for k in ([q, q - 1] if q >= 2 else [q]):
        trim = q - k
        views = hmm_embed(x[:, trim: x.shape[1] - trim], k, n)
        tensors[k] = estimate_moment_tensor(views, 3, dims=(n**k, n, n**k))
    eps = config.target_eps or sampling_eps(x.shape[0])
    return learn_hmm_from_tensors(tensors, rank, q, n, config, eps)


def hmm_error(truth: HMMParams, estimate: HMMParams) -> dict:
    """Frobenius errors of P and M after the best state relabeling."""
    perm = match_columns([truth.observation], [estimate.observation])
    inv = np.argsort(perm)
    m = estimate.observation[:, inv]
    p = estimate.transition[np.ix_(inv, inv)]
    w = estimate.stationary[inv]
    return {
        "transition": float(np.linalg.norm(truth.transition - p)),
        "observation": float(np.linalg.norm(truth.observation - m)),
        "stationary": float(np.max(np.abs(truth.stationary - w))),
        "permutation": perm.tolist(),
    }
