"""Singular values, subspace projections and robust Kruskal rank."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .tensor_core import CPDecomposition

KRANK_BUDGET = 10**6
# Relative slack on the 1/tau threshold so orthonormal columns (sigma == 1 up to
# rounding) pass at tau == 1.
SIGMA_RTOL = 1e-12


class BudgetExceeded(RuntimeError):
    """Raised when an exhaustive enumeration would exceed its configured budget."""

    def __init__(self, message: str, estimate: float | None = None):
        super().__init__(message)
        self.estimate = estimate


def svd(m):
    """Thin SVD with a deterministic sign convention.

    Each left singular vector is flipped so that its largest-magnitude entry
    is positive (the right vector is flipped with it).

    Returns
    -------
    s : ndarray
        Singular values, descending.
    u, vt : ndarray
        ``m == u @ diag(s) @ vt``.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("svd expects a matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if u.size:
        pivots = np.argmax(np.abs(u), axis=0)
        signs = np.sign(u[pivots, np.arange(u.shape[1])])
        signs[signs == 0] = 1.0
        u = u * signs
        vt = vt * signs[:, None]
    return s, u, vt


def singular_values(m) -> np.ndarray:
    return np.linalg.svd(np.asarray(m, dtype=np.float64), compute_uv=False)


def sigma_min(m) -> float:
    """Smallest of the min(rows, cols) singular values; 0 for an empty matrix."""
    m = np.asarray(m, dtype=np.float64)
    if m.size == 0:
        return 0.0
    return float(singular_values(m)[-1])


@dataclass(frozen=True)
class SubspaceProjector:
    """Orthogonal projector onto ``span(basis)``; basis has orthonormal columns."""

    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def project(self, x) -> np.ndarray:
        return self.basis @ (self.basis.T @ np.asarray(x, dtype=np.float64))

    def coordinates(self, x) -> np.ndarray:
        return self.basis.T @ np.asarray(x, dtype=np.float64)

    def residual(self, m) -> float:
        """``||m - P m||_F``."""
        m = np.asarray(m, dtype=np.float64)
        return float(np.linalg.norm(m - self.project(m)))

    def distance(self, x) -> float:
        """Distance of a vector from the subspace (eps-closeness test)."""
        return self.residual(x)


def top_r_subspace(m, r: int) -> SubspaceProjector:
    """Projector onto the span of the top-`r` left singular vectors of `m`."""
    m = np.asarray(m, dtype=np.float64)
    if not 1 <= r <= min(m.shape):
        raise ValueError(f"r={r} out of range for a {m.shape} matrix")
    _, u, _ = svd(m)
    return SubspaceProjector(u[:, :r].copy())


def orthonormal_complement_residual(a, cols) -> np.ndarray:
    """Distances of every column of `a` from ``span(a[:, cols])``."""
    a = np.asarray(a, dtype=np.float64)
    if len(cols) == 0:
        return np.linalg.norm(a, axis=0)
    q, _ = np.linalg.qr(a[:, list(cols)])
    return np.linalg.norm(a - q @ (q.T @ a), axis=0)


@dataclass(frozen=True)
class KrankCertificate:
    """Result of a robust Kruskal-rank computation.

    ``witness_columns`` is the tightest column subset of size ``krank + 1``
    (empty when ``krank == R``) and ``witness_sigma`` its smallest singular
    value (None when there is no witness).
    """

    tau: float
    krank: int
    witness_columns: tuple = ()
    witness_sigma: float | None = None

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "krank": self.krank,
            "witness_columns": list(self.witness_columns),
            "witness_sigma": self.witness_sigma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KrankCertificate":
        ws = d.get("witness_sigma")
        return cls(
            tau=float(d["tau"]),
            krank=int(d["krank"]),
            witness_columns=tuple(int(c) for c in d.get("witness_columns", ())),
            witness_sigma=None if ws is None else float(ws),
        )


def _subset_sigmas(a: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    k = subsets.shape[1]
    if k > a.shape[0]:
        return np.zeros(len(subsets))
    blocks = np.transpose(a[:, subsets], (1, 0, 2))  # (count, n, k)
    return np.linalg.svd(blocks, compute_uv=False)[:, -1]


def _enumeration_cost(r: int) -> int:
    return sum(math.comb(r, k) for k in range(1, r + 1))


def robust_krank(a, tau: float, budget: int = KRANK_BUDGET) -> KrankCertificate:
    """Largest k such that every k-column submatrix has ``sigma_k >= 1/tau``.

    Sizes are checked in increasing order and each size is checked in full
    before it is accepted.  A failing size k certifies ``krank == k - 1``; the
    witness is the subset with the smallest sigma_k (lexicographically first
    on ties).

    Raises
    ------
    BudgetExceeded
        When the number of subsets to enumerate would exceed `budget`.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    if tau <= 0:
        raise ValueError("tau must be positive")
    n, r = a.shape
    cost = _enumeration_cost(r)
    if cost > budget:
        raise BudgetExceeded(
            f"robust_krank would enumerate {cost} subsets (budget {budget})", cost
        )
    threshold = (1.0 / tau) * (1.0 - SIGMA_RTOL)
    for k in range(1, r + 1):
        subsets = np.array(list(itertools.combinations(range(r), k)), dtype=int)
        sig = _subset_sigmas(a, subsets)
        if np.any(sig < threshold):
            worst = int(np.argmin(sig))  # argmin returns the first (lexicographic) minimum
            return KrankCertificate(
                float(tau), k - 1, tuple(int(c) for c in subsets[worst]), float(sig[worst])
            )
    return KrankCertificate(float(tau), r, (), None)


@dataclass(frozen=True)
class KruskalReport:
    taus: tuple
    kranks: tuple
    certificates: tuple
    rank: int
    order: int
    total: int
    required: int
    margin: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "taus": list(self.taus),
            "kranks": list(self.kranks),
            "certificates": [c.to_dict() for c in self.certificates],
            "rank": self.rank,
            "order": self.order,
            "total": self.total,
            "required": self.required,
            "margin": self.margin,
            "passed": self.passed,
        }


def check_kruskal_condition(decomp: CPDecomposition, taus, budget: int = KRANK_BUDGET) -> KruskalReport:
    """Robust Kruskal condition ``sum_j kappa_tau_j(U^(j)) >= 2R + l - 1``.

    `taus` may be a single value or one value per mode.  For order 3 this is
    ``k_A + k_B + k_C >= 2R + 2``.
    """
    if not isinstance(decomp, CPDecomposition):
        decomp = CPDecomposition(decomp)
    taus = np.broadcast_to(np.asarray(taus, dtype=np.float64), (decomp.order,))
    certs = tuple(robust_krank(f, t, budget) for f, t in zip(decomp.factors, taus))
    kranks = tuple(c.krank for c in certs)
    required = 2 * decomp.rank + decomp.order - 1
    total = sum(kranks)
    return KruskalReport(
        taus=tuple(float(t) for t in taus),
        kranks=kranks,
        certificates=certs,
        rank=decomp.rank,
        order=decomp.order,
        total=total,
        required=required,
        margin=total - required,
        passed=total >= required,
    )


def separation_threshold(eps: float, dim: int, count: int) -> float:
    return eps / (20.0 * dim * count)


class SeparationFailure(RuntimeError):
    """No separating direction was found within the retry budget."""

    def __init__(self, attempts: int, threshold: float):
        super().__init__(f"no separating direction found after {attempts} attempts")
        self.attempts = attempts
        self.threshold = threshold


def find_separating_vector(vectors, eps: float | None = None, seed: int = 0,
                           max_attempts: int = 64) -> np.ndarray:
    """Unit w with ``|<u_i, w>| > eps / (20 d t)`` for every input vector.

    Gaussian directions are sampled until one clears the threshold.  A single
    draw succeeds with probability above 1/2, so the default 64 attempts fail
    with probability below 2**-64.  `eps` defaults to the smallest input norm.
    """
    u = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    t, d = u.shape
    norms = np.linalg.norm(u, axis=1)
    if eps is None:
        eps = float(norms.min())
    if eps <= 0 or np.any(norms < eps * (1 - 1e-12)):
        raise ValueError("every vector must have norm >= eps > 0")
    threshold = separation_threshold(eps, d, t)
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        w = rng.standard_normal(d)
        w /= np.linalg.norm(w)
        if np.all(np.abs(u @ w) > threshold):
            return w
    raise SeparationFailure(max_attempts, threshold)


def nz_count(v, eps: float = 0.0) -> int:
    """Entries of magnitude >= eps; with eps == 0 the count of nonzero entries."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    v = np.abs(np.asarray(v, dtype=np.float64).ravel())
    if eps == 0:
        return int(np.count_nonzero(v))
    return int(np.count_nonzero(v >= eps))
