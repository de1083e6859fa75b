"""Dense tensors and CP decompositions.

Dense tensors are plain :class:`numpy.ndarray` objects in C (row-major) order,
so the last index varies fastest.  Every unfolding and Khatri-Rao ordering in
the package is defined relative to that single convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_ORDER = 8
MAX_ENTRIES = 2**31


def as_tensor(values, shape: Sequence[int] | None = None) -> np.ndarray:
    """Validate and return a float64 dense tensor.

    Parameters
    ----------
    values : array_like
        Either a nested array or a flat row-major list (when `shape` is given).
    shape : sequence of int, optional
        Positive dimensions ``(n_1, ..., n_l)``.
    """
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        check_shape(shape)
        flat = np.asarray(values, dtype=np.float64).ravel()
        if flat.size != math.prod(shape):
            raise ValueError(
                f"got {flat.size} values for shape {shape} "
                f"(expected {math.prod(shape)})"
            )
        return flat.reshape(shape).copy()
    t = np.array(values, dtype=np.float64)
    check_shape(t.shape)
    return t


def check_shape(shape: Sequence[int], max_order: int = MAX_ORDER) -> None:
    if len(shape) < 1:
        raise ValueError("tensor order must be at least 1")
    if len(shape) > max_order:
        raise ValueError(f"tensor order {len(shape)} exceeds the cap {max_order}")
    if any(int(s) < 1 for s in shape):
        raise ValueError(f"all dimensions must be positive, got {tuple(shape)}")
    total = 1
    for s in shape:
        total *= int(s)
        if total > MAX_ENTRIES:
            raise OverflowError(f"shape {tuple(shape)} has too many entries")


@dataclass(frozen=True)
class CPDecomposition:
    """A list of factor matrices ``U^(1), ..., U^(l)`` sharing R columns.

    The represented tensor is ``sum_r U^(1)_r (x) ... (x) U^(l)_r``.  Weights,
    when present, are absorbed into one factor by the caller.
    """

    factors: tuple

    def __init__(self, factors):
        mats = tuple(np.array(f, dtype=np.float64, ndmin=2) for f in factors)
        if len(mats) < 1:
            raise ValueError("a decomposition needs at least one factor")
        ranks = {m.shape[1] for m in mats}
        if len(ranks) != 1:
            raise ValueError(f"factors disagree on the rank: {sorted(ranks)}")
        if any(m.ndim != 2 for m in mats):
            raise ValueError("factors must be matrices")
        for m in mats:
            m.setflags(write=False)
        object.__setattr__(self, "factors", mats)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    def expand(self) -> np.ndarray:
        return expand(self)

    def permuted(self, perm) -> "CPDecomposition":
        """Apply the same column permutation to every factor."""
        perm = np.asarray(perm, dtype=int)
        return CPDecomposition([f[:, perm] for f in self.factors])

    def column_norms(self) -> np.ndarray:
        """Array of shape ``(order, rank)`` with Euclidean column lengths."""
        return np.array([np.linalg.norm(f, axis=0) for f in self.factors])

    def __eq__(self, other):
        if not isinstance(other, CPDecomposition):
            return NotImplemented
        return len(self.factors) == len(other.factors) and all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.factors, other.factors)
        )

    __hash__ = None


def expand(cp: CPDecomposition) -> np.ndarray:
    """Sum of the rank-1 outer products of a decomposition."""
    if not isinstance(cp, CPDecomposition):
        cp = CPDecomposition(cp)
    shape = cp.shape
    check_shape(shape)
    if cp.rank == 0:
        return np.zeros(shape)
    letters = "abcdefghijklmnopq"[: cp.order]
    subs = ",".join(f"{c}z" for c in letters) + "->" + letters
    return np.einsum(subs, *cp.factors)


def frobenius_distance(t1, t2) -> float:
    t1 = np.asarray(t1, dtype=np.float64)
    t2 = np.asarray(t2, dtype=np.float64)
    if t1.shape != t2.shape:
        raise ValueError(f"shape mismatch: {t1.shape} vs {t2.shape}")
    return float(np.linalg.norm((t1 - t2).ravel()))


def _check_mode(t: np.ndarray, mode: int) -> None:
    if not 0 <= mode < t.ndim:
        raise IndexError(f"mode {mode} out of range for an order-{t.ndim} tensor")


def unfold(t, mode: int) -> np.ndarray:
    """Mode-`mode` matricization (modes are 0-based).

    Row ``i`` holds the entries with index ``i`` in `mode`; columns run over the
    remaining modes in row-major order.
    """
    t = np.asarray(t, dtype=np.float64)
    _check_mode(t, mode)
    return np.moveaxis(t, mode, 0).reshape(t.shape[mode], -1)


def fold(m, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    shape = tuple(shape)
    if not 0 <= mode < len(shape):
        raise IndexError(f"mode {mode} out of range for shape {shape}")
    rest = shape[:mode] + shape[mode + 1:]
    m = np.asarray(m, dtype=np.float64)
    return np.moveaxis(m.reshape((shape[mode],) + rest), 0, mode)


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product; row ``i * n_b + j`` of column r is a[i,r] b[j,r].

    With this ordering ``unfold(expand([A, B, C]), 2) == C @ khatri_rao(A, B).T``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def mode_contract(t, mode: int, x) -> np.ndarray:
    """Weighted sum of the slices of a 3-tensor along `mode`."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3:
        raise ValueError("mode_contract expects an order-3 tensor")
    _check_mode(t, mode)
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != t.shape[mode]:
        raise ValueError(f"vector length {x.shape[0]} != dimension {t.shape[mode]}")
    return np.tensordot(t, x, axes=([mode], [0]))


def symmetric_cp(u, order: int) -> CPDecomposition:
    if order < 2:
        raise ValueError("a symmetric decomposition needs order >= 2")
    u = np.array(u, dtype=np.float64, ndmin=2)
    if u.ndim != 2:
        raise ValueError("u must be a matrix")
    return CPDecomposition([u] * order)


def multilinear_transform(t, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Apply ``mats[j]`` along mode j: ``t x_1 mats[0] x_2 mats[1] ...``."""
    out = np.asarray(t, dtype=np.float64)
    for j, m in enumerate(mats):
        out = np.moveaxis(np.tensordot(m, out, axes=([1], [j])), 0, j)
    return out
