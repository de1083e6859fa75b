"""Mixtures of spherical Gaussians with a shared, known variance.

Raw moments mix mean and noise contributions.  For x = mu + e, expanding
``E[x^(x)l]`` position by position gives one term per subset S of the l modes
holding mu: ``Mom_|S|`` placed on S times ``E[e^(x)(l - |S|)]`` on the rest,
with ``Mom_0 = 1``.  Subtracting every proper-subset term from the raw moment
leaves ``Mom_l = sum_i w_i mu_i^(x)l``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..decompose import bounded_low_rank_symmetric
from ..matching import align_symmetric, recover_weight
from ._common import EXACT_EPS, LearnerConfig, match_columns

_MOMENT_CHUNK = 1 << 16


@dataclass(frozen=True)
class GaussianMixtureParams:
    weights: np.ndarray
    means: np.ndarray
    sigma: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        if w.ndim != 1 or m.shape[1] != w.size:
            raise ValueError("means need one column per weight")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def rank(self) -> int:
        return self.weights.size

    @property
    def n(self) -> int:
        return self.means.shape[0]

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "means": self.means.tolist(), "sigma": self.sigma}


def sample_gaussian_mixture(params: GaussianMixtureParams, n_samples: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    h = rng.choice(params.rank, size=n_samples, p=params.weights / params.weights.sum())
    return params.means[:, h].T + params.sigma * rng.standard_normal((n_samples, params.n))


def gaussian_univariate_moment(s: int, sigma: float) -> float:
    """``E[e^s]`` for e ~ N(0, sigma^2): 0 for odd s, ``sigma^s (s-1)!!`` for even s."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s % 2:
        return 0.0
    return float(sigma**s * math.prod(range(s - 1, 0, -2)))


def gaussian_noise_tensor(order: int, sigma: float, n: int) -> np.ndarray:
    """``E[e^(x)order]`` for e ~ N(0, sigma^2 I_n).

    Entry (j_1..j_k) is the product over groups of equal indices of the
    univariate moment of the group size.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order == 0:
        return np.array(1.0)
    out = np.zeros((n,) * order)
    if order % 2:
        return out
    for idx in itertools.product(range(n), repeat=order):
        counts = np.bincount(idx, minlength=n)
        out[idx] = math.prod(gaussian_univariate_moment(int(c), sigma) for c in counts)
    return out


def raw_moment(x, order: int) -> np.ndarray:
    """Empirical ``E[x^(x)order]`` accumulated in chunks."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n_samples, n = x.shape
    if n_samples == 0:
        raise ValueError("empty sample set")
    if order == 0:
        return np.array(1.0)
    letters = "abcdefgh"[:order]
    subs = ",".join(f"k{c}" for c in letters) + "->" + letters
    acc = np.zeros((n,) * order)
    for start in range(0, n_samples, _MOMENT_CHUNK):
        chunk = x[start:start + _MOMENT_CHUNK]
        acc += np.einsum(subs, *([chunk] * order))
    return acc / n_samples


def _place(mom: np.ndarray, noise: np.ndarray, positions: tuple, order: int) -> np.ndarray:
    """``mom`` on the modes in `positions`, ``noise`` on the others."""
    rest = tuple(i for i in range(order) if i not in positions)
    outer = np.multiply.outer(mom, noise)
    axes = positions + rest
    return np.transpose(outer, np.argsort(axes))


def mom_from_raw(raw: list, sigma: float) -> list:
    """``[Mom_0, ..., Mom_l]`` from raw moments ``raw[r] = E[x^(x)r]`` (raw[0] = 1)."""
    order = len(raw) - 1
    n = raw[1].shape[0] if order >= 1 else 0
    noise = [gaussian_noise_tensor(k, sigma, n) for k in range(order + 1)]
    moms = [np.array(1.0)]
    for ell in range(1, order + 1):
        m = np.array(raw[ell], dtype=np.float64, copy=True)
        for size in range(ell):
            if (ell - size) % 2:
                continue  # odd noise moments vanish
            for pos in itertools.combinations(range(ell), size):
                m -= _place(moms[size], noise[ell - size], pos, ell)
        moms.append(m)
    return moms


def mom_tensor(samples, order: int, sigma: float) -> np.ndarray:
    """Estimate of ``Mom_order = sum_i w_i mu_i^(x)order`` from samples."""
    raw = [np.array(1.0)] + [raw_moment(samples, r) for r in range(1, order + 1)]
    return mom_from_raw(raw, sigma)[order]


def population_moms(params: GaussianMixtureParams, order: int) -> list:
    """Exact ``[Mom_0, ..., Mom_order]`` of the mixture."""
    out = [np.array(float(params.weights.sum()))]
    for ell in range(1, order + 1):
        letters = "abcdefgh"[:ell]
        subs = ",".join(f"{c}z" for c in letters) + ",z->" + letters
        out.append(np.einsum(subs, *([params.means] * ell), params.weights))
    return out


def estimate_sigma(samples) -> float:
    """Square root of the smallest eigenvalue of the centered sample covariance.

    The means span at most R - 1 directions around their average, so for
    R <= n - 1 the smallest population eigenvalue is sigma^2.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    n_samples, n = x.shape
    if n_samples < n:
        raise ValueError(f"{n_samples} samples cannot estimate a {n}-dimensional covariance")
    c = x - x.mean(axis=0)
    cov = c.T @ c / n_samples
    return float(math.sqrt(max(np.linalg.eigvalsh(cov)[0], 0.0)))


def required_samples_gaussian(eps: float, order: int, n: int, sigma: float, c_max: float = 1.0,
                              delta: float = 0.05) -> int:
    """Sample size ``K (l ln n + ln(1/delta)) / eps^2`` with ``K = (c_max + sigma l ln n)^l``.

    Matches the scaling of the Gaussian moment concentration argument; the
    leading constant is 1.
    """
    if eps <= 0 or order < 1 or n < 1 or sigma <= 0 or not 0 < delta < 1:
        raise ValueError("invalid sample-size arguments")
    log_n = max(math.log(n), math.log(2))
    k = (c_max + sigma * order * log_n) ** order
    value = k * (order * log_n + math.log(1 / delta)) / eps**2
    if not math.isfinite(value) or value > 2**62:
        raise OverflowError(f"required sample size {value:.3g} is out of range")
    return int(math.ceil(value))


def _directions(u: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(u, axis=0)
    return u / np.where(norms > 0, norms, 1.0)


def _fit_lower(mom_lower: np.ndarray, directions: np.ndarray, order: int) -> np.ndarray:
    """Least-squares ``Mom_(l-1) ~ sum_r c_r d_r^(x)(l-1)`` along fixed directions.

    Returns ``v_r = c_r^(1/(l-1)) d_r`` (real root, sign kept for odd l-1).
    """
    k = order - 1
    cols = []
    for r in range(directions.shape[1]):
        t = directions[:, r]
        for _ in range(k - 1):
            t = np.multiply.outer(t, directions[:, r])
        cols.append(np.ravel(t))
    coef = np.linalg.lstsq(np.array(cols).T, np.ravel(mom_lower), rcond=None)[0]
    return directions * (np.sign(coef) * np.abs(coef) ** (1.0 / k))


def learn_gaussian_from_moments(moms: list, rank: int, order: int, sigma: float,
                                config: LearnerConfig | None = None, target_eps: float | None = None,
                                lower: str = "auto"):
    """Recover weights and means from ``moms[r] = Mom_r`` (r <= order).

    ``Mom_l`` gets a symmetric bounded decomposition with terms
    ``u_r = w_r^(1/l) mu_r``.  ``v_r = w_r^(1/(l-1)) mu_r`` comes from
    ``Mom_(l-1)``: by a second symmetric decomposition matched on directions
    (``lower="decompose"``, the default when l - 1 >= 3) or by a least-squares
    fit along the directions of u (``lower="fit"``, the default for l = 3,
    where a rank-R matrix does not determine its terms).  Weights follow from
    :func:`recover_weight` and means are ``u_r / w_r^(1/l)``.
    """
    config = config or LearnerConfig()
    if order < 3:
        raise ValueError("order must be at least 3")
    mom1 = np.asarray(moms[1], dtype=np.float64)
    n = mom1.shape[0]
    diag = {}
    if rank == 1:
        return GaussianMixtureParams(np.ones(1), mom1[:, None], sigma), {"note": "single component"}
    eps = target_eps if target_eps is not None else (config.target_eps or EXACT_EPS)
    mom_l = np.asarray(moms[order], dtype=np.float64)
    rho = config.rho
    if rho is None:
        # twice the norm a single term would need to carry all of Mom_l
        rho = 2.0 * max(1.0, float(np.linalg.norm(mom_l)) ** (1.0 / order))
    res = bounded_low_rank_symmetric(mom_l, config.net_config(rank, eps, rho))
    u = res.decomposition.factors[0]
    diag.update({"achieved_error": res.achieved_error, "status": res.status,
                 "candidates_evaluated": res.candidates_evaluated, "target_eps": eps, "rho": rho})
    if lower == "auto":
        lower = "decompose" if order - 1 >= 3 else "fit"
    mom_lower = np.asarray(moms[order - 1], dtype=np.float64)
    if lower == "fit":
        v = _fit_lower(mom_lower, _directions(u), order)
    elif lower == "decompose":
        res2 = bounded_low_rank_symmetric(mom_lower, config.net_config(rank, eps, rho))
        v2 = res2.decomposition.factors[0]
        # one of l, l-1 is even and leaves its terms' signs free, so match sign-free
        perm, _ = align_symmetric(_directions(u), _directions(v2), 2)
        v = v2[:, np.argsort(perm)]
        diag["lower_achieved_error"] = res2.achieved_error
    else:
        raise ValueError(f"unknown lower-moment strategy {lower!r}")
    # orient the even-order terms by the odd-order ones, which carry the sign of mu
    signs = np.where(np.sum(u * v, axis=0) < 0, -1.0, 1.0)
    if order % 2 == 0:
        u = u * signs
    else:
        v = v * signs
    w = np.array([recover_weight(v[:, r], u[:, r], order) for r in range(rank)])
    means = u / w ** (1.0 / order)
    diag["lower"] = lower
    diag["weight_sum"] = float(w.sum())
    return GaussianMixtureParams(w, means, sigma), diag


def learn_gaussian_mixture(samples, rank: int, order: int, sigma="estimate",
                           config: LearnerConfig | None = None, sigma_grid=None, lower: str = "auto"):
    """Learn a spherical mixture from samples.

    `sigma` is a number or ``"estimate"``.  With `sigma_grid` every listed
    value is tried and the one whose decomposition fits ``Mom_l`` best wins.
    """
    config = config or LearnerConfig()
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    raw = [np.array(1.0)] + [raw_moment(x, r) for r in range(1, order + 1)]
    if sigma_grid is not None:
        candidates = [float(s) for s in sigma_grid]
    elif sigma == "estimate":
        candidates = [estimate_sigma(x)]
    else:
        candidates = [float(sigma)]
    # Frobenius scale of the raw-moment error: E||x^(x)l||^2 = E||x||^(2l)
    eps = config.target_eps or 3.0 * math.sqrt(float(np.mean(np.sum(x * x, axis=1) ** order)) / x.shape[0])
    best = None
    for s in candidates:
        moms = mom_from_raw(raw, s)
        est, diag = learn_gaussian_from_moments(moms, rank, order, s, config, eps, lower)
        key = diag.get("achieved_error", 0.0)
        if best is None or key < best[2]:
            best = (est, diag, key)
    est, diag, _ = best
    diag["sigma_candidates"] = candidates
    return est, diag


def sigma_grid(center: float, step: float, count: int) -> np.ndarray:
    """Symmetric grid of positive sigma values around `center`."""
    vals = center + step * np.arange(-(count // 2), count // 2 + 1)
    return vals[vals > 0]


def gaussian_error(truth: GaussianMixtureParams, estimate: GaussianMixtureParams) -> dict:
    perm = match_columns([truth.means], [estimate.means])
    inv = np.argsort(perm)
    m_err = float(np.linalg.norm(truth.means - estimate.means[:, inv]))
    w_err = float(np.max(np.abs(truth.weights - estimate.weights[inv])))
    return {"means": m_err, "weights": w_err, "max": max(m_err, w_err), "permutation": perm.tolist()}
