"""Examinee-selection strategies for item calibration.

Three ways of producing target latent-trait levels for the next batch:

* the two-stage scheme, which recruits low-trait examinees for the guessing
  parameter and a symmetric logistic-quantile pair for (a, b);
* a strict D-optimal scheme that batches examinees at the trait level
  maximizing the determinant of the accumulated information matrix;
* a random scheme drawing traits from a truncated normal population.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    BatchTag,
    Gamma,
    ItemParams,
    fisher_information_grid,
)

# Offset of the D-optimal pair for a logistic regression: the design points
# sit at the 17.6% and 82.4% quantiles of the logistic factor, i.e. at
# b +/- logit(0.824)/a.
DOPT_LOGIT_OFFSET = math.log(0.824 / 0.176)


@dataclass(frozen=True)
class DesignConfig:
    """Knobs of the selection strategies.

    p0 is the near-1 probability defining the low-trait cutoff for guessing
    batches; theta_c is the cruder cutoff used only for the very first
    guessing sample. Batch sizes default to the 2:1 (a,b)-to-c ratio.
    """

    p0: float = 0.99
    theta_c: float = -2.0
    pool_min: float = -3.6
    pool_max: float = 3.6
    n_init_ab: int = 100
    n_init_c: int = 10
    batch_ab: int = 10
    batch_c: int = 5
    dopt_batch: int = 15
    random_sd: float = 1.16
    dopt_grid_size: int = 721
    c_fallback_width: float = 0.5

    def __post_init__(self):
        if not 0.5 < self.p0 < 1.0:
            raise ValueError(f"p0 must lie in (0.5, 1), got {self.p0}")
        if not self.pool_min < self.pool_max:
            raise ValueError("pool range is empty")
        for name in ("n_init_ab", "n_init_c", "batch_ab", "batch_c", "dopt_batch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def pool_range(self) -> tuple[float, float]:
        return (self.pool_min, self.pool_max)


@dataclass(frozen=True)
class Target:
    """count examinees requested at a point trait level or within a range."""

    count: int
    tag: BatchTag
    theta: float | None = None
    theta_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("target count must be >= 1")
        if (self.theta is None) == (self.theta_range is None):
            raise ValueError("exactly one of theta / theta_range must be set")


@dataclass(frozen=True)
class DesignRequest:
    """An ordered batch request; ``c_fallback`` flags a collapsed c-range."""

    targets: tuple[Target, ...]
    c_fallback: bool = False

    @property
    def total(self) -> int:
        return sum(t.count for t in self.targets)

    def expanded_tags(self) -> list[BatchTag]:
        """Batch tags aligned with the recruitment expansion order."""
        tags = []
        for t in self.targets:
            tags.extend([t.tag] * t.count)
        return tags

    def truncated(self, max_total: int) -> "DesignRequest":
        """Same request limited to the first max_total examinees."""
        kept, remaining = [], max_total
        for t in self.targets:
            if remaining <= 0:
                break
            take = min(t.count, remaining)
            kept.append(
                Target(count=take, tag=t.tag, theta=t.theta, theta_range=t.theta_range)
            )
            remaining -= take
        return DesignRequest(targets=tuple(kept), c_fallback=self.c_fallback)


@dataclass
class CalibrationState:
    """Accumulated data and current estimates of one calibration run."""

    theta: list[float] = field(default_factory=list)
    y: list[int] = field(default_factory=list)
    theta_true: list[float] = field(default_factory=list)
    tags: list[BatchTag] = field(default_factory=list)
    gamma_hat: Gamma | None = None
    item_hat: ItemParams | None = None
    info: np.ndarray | None = None
    iteration: int = 0
    lambda_min_path: list[float] = field(default_factory=list)
    c_fallbacks: int = 0

    @property
    def n(self) -> int:
        return len(self.y)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Estimation-visible data (theta_observed, y)."""
        return np.asarray(self.theta, dtype=float), np.asarray(self.y, dtype=float)


def theta_lower_bound(item_est: ItemParams, p0: float) -> float:
    """Upper trait cutoff for guessing-parameter batches.

    Reflects the p0-quantile of the ICC through b:
    theta_ell = b - log((p0 - c)/(1 - p0)) / a, so that
    icc(theta_ell) = c + (1 - p0).
    """
    if not 0.0 < p0 < 1.0:
        raise ValueError(f"p0 must lie in (0, 1), got {p0}")
    if p0 <= item_est.c:
        raise ValueError(f"p0={p0} must exceed the guessing estimate c={item_est.c}")
    return item_est.b - math.log((p0 - item_est.c) / (1.0 - p0)) / item_est.a


def d_optimal_pair(item_est: ItemParams) -> tuple[float, float]:
    """The two trait levels where the logistic factor equals 0.176 and 0.824.

    Symmetric about b; spread shrinks as 1/a.
    """
    off = DOPT_LOGIT_OFFSET / item_est.a
    return (item_est.b - off, item_est.b + off)


def two_stage_batch(state: CalibrationState, cfg: DesignConfig) -> DesignRequest:
    """One iteration batch of the two-stage scheme.

    Emits batch_c examinees uniformly below the current theta_ell (guessing
    batch) plus batch_ab examinees split across the D-optimal pair, clipped
    into the pool. When theta_ell falls below the pool, the guessing range
    collapses to a thin band at the pool floor and the request is flagged.
    """
    item = state.item_hat
    if item is None:
        raise ValueError("two_stage_batch requires current estimates in the state")
    lo, hi = cfg.pool_min, cfg.pool_max

    theta_ell = theta_lower_bound(item, cfg.p0)
    fallback = theta_ell <= lo
    if fallback:
        c_range = (lo, lo + cfg.c_fallback_width)
    else:
        c_range = (lo, min(theta_ell, hi))

    t_low, t_high = d_optimal_pair(item)
    t_low = min(max(t_low, lo), hi)
    t_high = min(max(t_high, lo), hi)
    n_low = cfg.batch_ab - cfg.batch_ab // 2  # odd batches put the extra point low
    n_high = cfg.batch_ab // 2

    targets = [Target(count=cfg.batch_c, tag=BatchTag.C_BATCH, theta_range=c_range)]
    targets.append(Target(count=n_low, tag=BatchTag.AB_BATCH, theta=t_low))
    if n_high:
        targets.append(Target(count=n_high, tag=BatchTag.AB_BATCH, theta=t_high))
    return DesignRequest(targets=tuple(targets), c_fallback=fallback)


def dopt_grid(cfg: DesignConfig) -> np.ndarray:
    """Equispaced candidate trait levels for the greedy D-optimal search."""
    return np.linspace(cfg.pool_min, cfg.pool_max, cfg.dopt_grid_size)


def _det3(M: np.ndarray) -> np.ndarray:
    """Determinants of a stack of 3x3 matrices (closed form)."""
    return (
        M[..., 0, 0] * (M[..., 1, 1] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 1])
        - M[..., 0, 1] * (M[..., 1, 0] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 0])
        + M[..., 0, 2] * (M[..., 1, 0] * M[..., 2, 1] - M[..., 1, 1] * M[..., 2, 0])
    )


def strict_d_optimal_batch(
    state: CalibrationState, batch_size: int, grid: np.ndarray
) -> DesignRequest:
    """Whole batch at the determinant-maximizing trait level.

    Places batch_size examinees at the grid point whose single-observation
    information maximizes det(J + info) against the accumulated matrix J.
    A lone point is rank-1 with zero determinant, so the objective needs J;
    the argmax is then independent of the batch size, since
    det(J + k vv') = det(J) (1 + k v'J^-1 v), and the objective is
    non-decreasing in every examinee added at the chosen point.
    """
    if state.info is None or state.gamma_hat is None:
        raise ValueError("strict_d_optimal_batch requires estimates and information")
    infos = fisher_information_grid(state.gamma_hat, grid)
    k = int(np.argmax(_det3(state.info[None, :, :] + infos)))
    targets = tuple(
        Target(count=1, tag=BatchTag.DOPT, theta=float(grid[k]))
        for _ in range(batch_size)
    )
    return DesignRequest(targets=targets)


def random_batch(
    batch_size: int, sd: float, rng: np.random.Generator,
    pool_range: tuple[float, float] = (-3.6, 3.6),
) -> DesignRequest:
    """batch_size traits drawn N(0, sd^2), truncated to the pool by redraw."""
    if sd <= 0:
        raise ValueError(f"random design sd must be > 0, got {sd}")
    lo, hi = pool_range
    draws = rng.normal(0.0, sd, size=batch_size)
    bad = (draws <= lo) | (draws >= hi)
    while np.any(bad):
        draws[bad] = rng.normal(0.0, sd, size=int(bad.sum()))
        bad = (draws <= lo) | (draws >= hi)
    targets = tuple(Target(count=1, tag=BatchTag.RANDOM, theta=float(t)) for t in draws)
    return DesignRequest(targets=targets)
