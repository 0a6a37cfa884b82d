"""Synthetic examinee pool with decaying trait measurement error.

Design requests target *observed* trait levels; the pool assigns each
recruited examinee a true trait equal to the target minus a normal error
whose standard deviation shrinks with the recruitment index. Responses are
generated from the true trait, so selection operates on observed traits
while the data-generating process uses the real ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import DesignRequest
from .model import ItemParams, icc


@dataclass(frozen=True)
class PoolConfig:
    pool_min: float = -3.6
    pool_max: float = 3.6
    error_scale: float = 0.5
    error_log_exponent: float = 1.1

    def __post_init__(self):
        if not self.pool_min < self.pool_max:
            raise ValueError("pool range is empty")
        if self.error_scale < 0:
            raise ValueError("error_scale must be >= 0")

    @property
    def pool_range(self) -> tuple[float, float]:
        return (self.pool_min, self.pool_max)


@dataclass(frozen=True)
class Examinee:
    theta_observed: float
    theta_true: float
    index: int


def measurement_error_sd(n: int, cfg: PoolConfig) -> float:
    """Error SD of the n-th recruit: scale / (sqrt(m) * (ln m)^exponent).

    m = max(n, 2) guards the ln(1) = 0 singularity. Strictly decreasing for
    n >= 2.
    """
    if n < 1:
        raise ValueError(f"recruitment index must be >= 1, got {n}")
    m = max(n, 2)
    return cfg.error_scale / (math.sqrt(m) * math.log(m) ** cfg.error_log_exponent)


def recruit(request: DesignRequest, next_index: int, cfg: PoolConfig,
            rng: np.random.Generator) -> list[Examinee]:
    """Recruit examinees whose observed traits match the request.

    Point targets are met exactly; range targets draw uniformly. True traits
    are the observed ones minus the per-index measurement error, clamped to
    the pool range. Indices increase consecutively from next_index.
    """
    observed = []
    for t in request.targets:
        if t.theta is not None:
            observed.extend([t.theta] * t.count)
        else:
            lo, hi = t.theta_range
            observed.extend(rng.uniform(lo, hi, size=t.count).tolist())
    observed = np.asarray(observed)
    idx = np.arange(next_index, next_index + observed.size)
    sds = np.array([measurement_error_sd(int(i), cfg) for i in idx])
    xi = rng.normal(0.0, 1.0, size=observed.size) * sds
    true = np.clip(observed - xi, cfg.pool_min, cfg.pool_max)
    return [
        Examinee(theta_observed=float(o), theta_true=float(t), index=int(i))
        for o, t, i in zip(observed, true, idx)
    ]


def respond(examinee: Examinee, item_true: ItemParams, rng: np.random.Generator) -> int:
    """One Bernoulli response generated at the examinee's true trait."""
    return int(rng.random() < icc(examinee.theta_true, item_true))


def respond_all(examinees, item_true: ItemParams, rng: np.random.Generator) -> np.ndarray:
    """Responses for a whole batch (one uniform draw per examinee, in order)."""
    true = np.array([e.theta_true for e in examinees])
    return (rng.random(true.size) < icc(true, item_true)).astype(int)
