"""Shared learner configuration and parameter-error helpers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..decompose import SEARCH_BUDGET, NetSearchConfig


@dataclass(frozen=True)
class LearnerConfig:
    """Decomposition settings used inside the learners.

    `target_eps` of None lets each learner pick a value from the sample size
    (or a tiny value for exact population input).  `rho` of None means 1 for
    the probability-vector models and a moment-based bound for Gaussians.
    """

    target_eps: float | None = None
    rho: float | None = None
    net_resolution: float | None = None
    seed: int = 0
    budget: int = SEARCH_BUDGET
    search: str = "guided"
    restarts: int = 8
    workers: int | None = None

    def net_config(self, rank: int, target_eps: float, rho: float | None = None) -> NetSearchConfig:
        return NetSearchConfig(
            rank=rank,
            rho=rho if rho is not None else (self.rho if self.rho is not None else 1.0),
            target_eps=target_eps,
            net_resolution=self.net_resolution,
            seed=self.seed,
            workers=self.workers,
            budget=self.budget,
            search=self.search,
            restarts=self.restarts,
        )


EXACT_EPS = 1e-9


class RecoveryFailure(RuntimeError):
    """A learner hit a numerically ill-posed step (reported, not ignored)."""


def match_columns(reference: list, estimate: list) -> np.ndarray:
    """Permutation p with ``estimate[j][:, s]`` matched to ``reference[j][:, p[s]]``.

    Minimizes the summed squared Euclidean distance over all matrices.
    """
    r = reference[0].shape[1]
    cost = np.zeros((r, r))
    for a, b in zip(reference, estimate):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        cost += np.sum((a[:, :, None] - b[:, None, :]) ** 2, axis=0)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(r, dtype=int)
    perm[cols] = rows
    return perm
