"""Alignment of decompositions up to permutation and scaling, rank-1 splitting
and weight recovery."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .spectral import svd
from .tensor_core import CPDecomposition, khatri_rao

# cost assigned to pairs involving a zero column, larger than any real pair
_ZERO_COST = 8.0


@dataclass(frozen=True)
class AlignmentResult:
    """Matching of a candidate decomposition onto a reference.

    ``permutation[s]`` is the reference column matched to candidate column s,
    so ``V^(j)[:, s] ~= scalings[j][s] * U^(j)[:, permutation[s]]``.
    """

    permutation: tuple
    scalings: tuple
    scaling_product_deviation: float
    per_mode_residuals: tuple
    zero_columns: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "permutation": list(self.permutation),
            "scalings": [[float(v) for v in s] for s in self.scalings],
            "scaling_product_deviation": self.scaling_product_deviation,
            "per_mode_residuals": list(self.per_mode_residuals),
            "zero_columns": list(self.zero_columns),
        }


def _unit_columns(m: np.ndarray):
    norms = np.linalg.norm(m, axis=0)
    zero = norms == 0
    return m / np.where(zero, 1.0, norms), zero


def _chordal_cost(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """min(||x_p - y_s||^2, ||x_p + y_s||^2) for unit columns: 2 - 2|<x_p, y_s>|."""
    return 2.0 - 2.0 * np.abs(x.T @ y)


def align(reference: CPDecomposition, candidate: CPDecomposition) -> AlignmentResult:
    """Match candidate columns to reference columns and fit per-mode scalings.

    The permutation solves the assignment problem on squared chordal
    distances of unit-normalized columns summed over modes.  Scalings are the
    least-squares coefficients ``<V_s, U_p> / ||U_p||^2``; they are optimal for
    the chosen permutation but the pair is not a joint optimum in general.
    """
    if not isinstance(reference, CPDecomposition):
        reference = CPDecomposition(reference)
    if not isinstance(candidate, CPDecomposition):
        candidate = CPDecomposition(candidate)
    if reference.rank != candidate.rank:
        raise ValueError(f"rank mismatch: {reference.rank} vs {candidate.rank}")
    if reference.shape != candidate.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {candidate.shape}")
    r = reference.rank
    cost = np.zeros((r, r))
    zero_ref = np.zeros(r, dtype=bool)
    zero_cand = np.zeros(r, dtype=bool)
    for u, v in zip(reference.factors, candidate.factors):
        xu, zu = _unit_columns(u)
        xv, zv = _unit_columns(v)
        cost += _chordal_cost(xu, xv)
        zero_ref |= zu
        zero_cand |= zv
    # zero columns go last: they only pair with each other when possible
    cost[zero_ref, :] = _ZERO_COST * reference.order
    cost[:, zero_cand] = _ZERO_COST * reference.order
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(r, dtype=int)
    perm[cols] = rows

    scalings, residuals = [], []
    for u, v in zip(reference.factors, candidate.factors):
        up = u[:, perm]
        nrm2 = np.sum(up * up, axis=0)
        lam = np.where(nrm2 > 0, np.sum(v * up, axis=0) / np.where(nrm2 > 0, nrm2, 1.0), 0.0)
        scalings.append(lam)
        residuals.append(float(np.linalg.norm(v - up * lam)))
    dev = float(np.linalg.norm(np.prod(scalings, axis=0) - 1.0)) if r else 0.0
    zeros = tuple(int(s) for s in np.flatnonzero(zero_cand | zero_ref[perm]))
    return AlignmentResult(
        permutation=tuple(int(p) for p in perm),
        scalings=tuple(tuple(float(x) for x in s) for s in scalings),
        scaling_product_deviation=dev,
        per_mode_residuals=tuple(residuals),
        zero_columns=zeros,
    )


def align_symmetric(reference, candidate, order: int):
    """Permutation matching for symmetric decompositions ``sum_r u_r^(x)l``.

    No scaling is fitted.  A column sign flip leaves ``u^(x)l`` unchanged only
    for even order, so signs are matched freely for even order and never for
    odd order.

    Returns
    -------
    permutation : tuple
        ``candidate[:, s] ~= +-reference[:, permutation[s]]``.
    residual : float
        ``||V - U Pi||_F`` with the matched signs applied.
    """
    u = np.atleast_2d(np.asarray(reference, dtype=np.float64))
    v = np.atleast_2d(np.asarray(candidate, dtype=np.float64))
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    diff = np.sum(u * u, axis=0)[:, None] + np.sum(v * v, axis=0)[None, :]
    cross = u.T @ v
    cost = diff - 2.0 * (np.abs(cross) if order % 2 == 0 else cross)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(u.shape[1], dtype=int)
    perm[cols] = rows
    up = u[:, perm]
    if order % 2 == 0:
        signs = np.where(np.sum(up * v, axis=0) < 0, -1.0, 1.0)
        up = up * signs
    return tuple(int(p) for p in perm), float(np.linalg.norm(v - up))


def split_rank_one(w, n1: int, n2: int):
    """Best rank-1 split of a length n1*n2 vector read as an n1 x n2 matrix.

    Returns ``(u, v, residual)`` with ``u = sqrt(s1) * left`` and
    ``v = sqrt(s1) * right``; residual is the Frobenius norm of what is left.
    """
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.size != n1 * n2:
        raise ValueError(f"length {w.size} != {n1} * {n2}")
    s, left, vt = svd(w.reshape(n1, n2))
    root = np.sqrt(s[0])
    return root * left[:, 0], root * vt[0], float(np.sqrt(np.sum(s[1:] ** 2)))


def recover_weight(u, v, order: int) -> float:
    """Weight w from ``u ~= w^(1/(l-1)) mu`` and ``v ~= w^(1/l) mu``.

    The coefficient of v on u is ``beta = <u, v> / ||u||^2 = w^(1/l - 1/(l-1))``,
    so ``w = beta^(-l(l-1))``.  The normalization by ``||u||^2`` makes the
    estimate independent of ``||mu||``.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if order < 2:
        raise ValueError("order must be at least 2")
    nu = float(u @ u)
    if nu == 0:
        raise ValueError("u must be nonzero")
    beta = float(u @ v) / nu
    if beta == 0:
        raise ValueError("u and v are orthogonal; no weight is defined")
    return float(beta ** (-order * (order - 1)))


class SignFixFailure(ValueError):
    """Some column's scaling product is not positive, so no sign choice works."""

    def __init__(self, columns):
        super().__init__(f"scaling products are not positive for columns {list(columns)}")
        self.columns = tuple(columns)


def sign_fix(scalings) -> np.ndarray:
    """Sign flips making every scaling entry nonnegative with products unchanged.

    Parameters
    ----------
    scalings : array_like, shape (order, R)

    Returns
    -------
    ndarray of +-1, shape (order, R)
        Multiply column r of mode j by ``signs[j, r]``; every column's signs
        multiply to +1.
    """
    lam = np.atleast_2d(np.asarray(scalings, dtype=np.float64))
    prod = np.prod(lam, axis=0)
    bad = np.flatnonzero(~(prod > 0))
    if bad.size:
        raise SignFixFailure(bad.tolist())
    # an even number of negative entries per column, since the product is positive
    return np.where(lam < 0, -1.0, 1.0)


def apply_signs(cp: CPDecomposition, signs) -> CPDecomposition:
    signs = np.asarray(signs, dtype=np.float64)
    return CPDecomposition([f * s for f, s in zip(cp.factors, signs)])


@dataclass(frozen=True)
class NecessaryConditionReport:
    sigma_min: float
    unique_compatible: bool
    null_vector: np.ndarray | None = None

    def alternative(self, cp: CPDecomposition, u=None) -> CPDecomposition:
        """A second decomposition of the same order-3 tensor.

        With ``sum_r alpha_r A_r (x) B_r == 0`` every ``C_r`` may be replaced by
        ``C_r + alpha_r u`` without changing the tensor.
        """
        if self.null_vector is None:
            raise ValueError("no dependency was detected")
        a, b, c = cp.factors
        if u is None:
            u = np.ones(c.shape[0])
        u = np.asarray(u, dtype=np.float64).ravel()
        return CPDecomposition([a, b, c + np.outer(u, self.null_vector)])


def necessary_condition_check(a, b, tol: float = 1e-10) -> NecessaryConditionReport:
    """Smallest singular value of ``a (.) b`` and, if it vanishes, a null vector.

    A dependency ``sum_r alpha_r A_r (x) B_r == 0`` means the third factor of
    any decomposition built on (a, b) is not unique.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ValueError("column counts differ")
    kr = khatri_rao(a, b)
    r = kr.shape[1]
    _, s, vt = np.linalg.svd(kr, full_matrices=True)
    smin = float(s[-1]) if len(s) == r else 0.0
    scale = max(1.0, float(s[0]) if len(s) else 1.0)
    if smin > tol * scale:
        return NecessaryConditionReport(smin, True, None)
    alpha = vt[-1].copy()
    # sign convention: largest-magnitude entry positive
    k = int(np.argmax(np.abs(alpha)))
    if alpha[k] < 0:
        alpha = -alpha
    return NecessaryConditionReport(smin, False, alpha)
