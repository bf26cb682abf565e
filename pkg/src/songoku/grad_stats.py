"""Per-task EMA gradient buffers, interference matrix, and descent-bound helpers.

The interference coefficient between two tasks is the negated cosine of their
averaged gradients: positive values mean the tasks pull the shared parameters
in opposing directions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DegenerateMatrixError(ValueError):
    """Fewer than two tasks have usable (above-floor) EMA gradients."""


@dataclass
class GradStats:
    """EMA gradient state for K tasks over a shared d-dimensional space.

    ``ema[i]`` is the exponentially averaged gradient of task i.  Tasks whose
    EMA norm sits below ``norm_floor`` are flagged ``excluded`` and contribute
    no interference entries until their buffer stabilizes.
    """

    ema: np.ndarray                  # (K, d) float64
    beta: float
    norm_floor: float = 1e-8
    steps: np.ndarray = field(default=None)     # per-task update counts
    excluded: np.ndarray = field(default=None)  # per-task bool

    def __post_init__(self):
        self.ema = np.asarray(self.ema, dtype=np.float64)
        if self.ema.ndim != 2:
            raise ValueError(f"ema must be a K x d matrix, got shape {self.ema.shape}")
        if not (0.0 <= self.beta < 1.0):
            raise ValueError(f"beta={self.beta} outside [0, 1)")
        if self.norm_floor < 0:
            raise ValueError(f"norm_floor={self.norm_floor} must be nonnegative")
        K = self.ema.shape[0]
        if self.steps is None:
            self.steps = np.zeros(K, dtype=np.int64)
        if self.excluded is None:
            self.excluded = np.ones(K, dtype=bool)
            self._refresh_excluded()

    @classmethod
    def zeros(cls, K: int, d: int, beta: float, norm_floor: float = 1e-8) -> "GradStats":
        return cls(ema=np.zeros((K, d)), beta=beta, norm_floor=norm_floor)

    @property
    def K(self) -> int:
        return self.ema.shape[0]

    @property
    def d(self) -> int:
        return self.ema.shape[1]

    def _refresh_excluded(self, task: int | None = None) -> None:
        if task is None:
            norms = np.linalg.norm(self.ema, axis=1)
            self.excluded = norms < self.norm_floor
        else:
            self.excluded[task] = np.linalg.norm(self.ema[task]) < self.norm_floor

    def included_count(self) -> int:
        return int(np.count_nonzero(~self.excluded))


def update_ema(stats: GradStats, task: int, grad: np.ndarray) -> GradStats:
    """Blend ``grad`` into task's EMA row: row <- beta*row + (1-beta)*grad.

    Mutates ``stats`` in place and returns it.  Only the given row and its
    excluded flag change.
    """
    if not (0 <= task < stats.K):
        raise IndexError(f"task index {task} outside [0, {stats.K})")
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != (stats.d,):
        raise ValueError(
            f"gradient for task {task} has dimension {grad.shape}, expected ({stats.d},)"
        )
    stats.ema[task] = stats.beta * stats.ema[task] + (1.0 - stats.beta) * grad
    stats.steps[task] += 1
    stats._refresh_excluded(task)
    return stats


def effective_sample_size(beta: float, R: int) -> float:
    """Effective number of independent samples inside an R-step EMA window.

    With normalized weights w_t = (1-beta) beta^(R-t) / (1-beta^R), this is
    1 / sum(w_t^2), which has the closed form

        n_eff = (1-beta^R)^2 (1-beta^2) / ((1-beta)^2 (1-beta^{2R})).

    Monotone nondecreasing in R; tends to (1+beta)/(1-beta) as R grows.
    """
    if not (0.0 <= beta < 1.0):
        raise ValueError(f"beta={beta} outside [0, 1)")
    if R < 1:
        raise ValueError(f"R={R} must be >= 1")
    if beta == 0.0:
        return 1.0
    bR = beta ** R
    b2R = beta ** (2 * R)
    if b2R == 1.0:  # numerically beta ~ 1 underflow guard (cannot happen for beta<1, R>=1)
        raise ValueError("beta too close to 1 for a stable evaluation")
    return ((1.0 - bR) ** 2 * (1.0 - beta ** 2)) / ((1.0 - beta) ** 2 * (1.0 - b2R))


def beta_for_effective_sample_size(n_eff: float, R: int) -> float:
    """Invert effective_sample_size in beta by bisection for a fixed window R.

    The achievable range for a window of length R is [1, R]; requests outside
    it are rejected so callers notice an undersized window rather than getting
    a silently saturated beta.
    """
    if n_eff < 1.0:
        raise ValueError(f"n_eff={n_eff} must be >= 1")
    if n_eff > R * (1 - 1e-12):
        raise ValueError(f"n_eff={n_eff} unreachable within a window of R={R} steps")
    if n_eff == 1.0:
        return 0.0
    lo, hi = 0.0, 1.0 - 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if effective_sample_size(mid, R) < n_eff:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class InterferenceMatrix:
    """Pairwise task interference: rho[i, j] = -cos(ema_i, ema_j).

    Entries touching an excluded task are NaN and carry no meaning; consumers
    must consult ``included``.  ``tau_used`` records the threshold a graph was
    later built with (None until then).
    """

    rho: np.ndarray            # (K, K) float64, NaN where excluded
    included: np.ndarray       # (K,) bool
    tau_used: float | None = None

    @property
    def K(self) -> int:
        return self.rho.shape[0]


def interference_matrix(stats: GradStats) -> InterferenceMatrix:
    """Negated-cosine matrix over the currently included tasks.

    Raises DegenerateMatrixError when fewer than two tasks are included; the
    scheduler treats that as "fall back to one all-task class".
    """
    included = ~stats.excluded
    if int(included.sum()) < 2:
        raise DegenerateMatrixError(
            f"only {int(included.sum())} task(s) above the norm floor; need >= 2"
        )
    K = stats.K
    rho = np.full((K, K), np.nan)
    idx = np.flatnonzero(included)
    M = stats.ema[idx]
    norms = np.linalg.norm(M, axis=1)
    cos = (M @ M.T) / np.outer(norms, norms)
    sub = -cos
    # mirror the upper triangle so rho is exactly symmetric bit-for-bit
    sub = np.triu(sub)
    sub = sub + sub.T - np.diag(np.diag(sub))
    rho[np.ix_(idx, idx)] = sub
    rho[idx, idx] = -1.0
    return InterferenceMatrix(rho=rho, included=included)


def tau_eff(gradients: list[np.ndarray] | np.ndarray) -> float:
    """Aggregate conflict ratio of a gradient set.

    Sum over ordered pairs i != j of the clipped negative inner products,
    normalized by the total squared norm:

        tau_eff = sum_{i != j} max(0, -<g_i, g_j>) / sum_k ||g_k||^2.

    An all-zero set has no conflict and returns 0.
    """
    G = np.asarray(gradients, dtype=np.float64)
    if G.ndim == 1:
        G = G[None, :]
    if G.shape[0] == 0:
        return 0.0
    gram = G @ G.T
    denom = float(np.trace(gram))
    if denom == 0.0:
        return 0.0
    off = gram.copy()
    np.fill_diagonal(off, 0.0)
    neg = np.clip(-off, 0.0, None)
    return float(neg.sum() / denom)


def is_tau_compatible(gradients: list[np.ndarray] | np.ndarray, tau: float) -> bool:
    """True when every pair satisfies <g_i, g_j> >= -tau * ||g_i|| * ||g_j||."""
    G = np.asarray(gradients, dtype=np.float64)
    if G.ndim == 1 or G.shape[0] < 2:
        return True
    gram = G @ G.T
    norms = np.sqrt(np.diag(gram))
    bound = -tau * np.outer(norms, norms)
    off_mask = ~np.eye(G.shape[0], dtype=bool)
    return bool(np.all(gram[off_mask] >= bound[off_mask] - 1e-12))
