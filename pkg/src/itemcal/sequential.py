"""Precision-based stopping rule and confidence-set coverage checks.

Sampling stops at the first n (not below n0) where the smallest eigenvalue
of the observed information reaches C_alpha^2 / d^2; the confidence
ellipsoid centered at the estimate then has maximum axis half-length at
most d with asymptotic coverage 1 - alpha.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaincc

from .errors import SingularInformation
from .model import Gamma, ItemParams, from_gamma


@dataclass(frozen=True)
class StoppingConfig:
    """d bounds the ellipsoid's maximum axis half-length; n0 is the minimum
    sample size before stopping is considered."""

    d: float = 0.5
    alpha: float = 0.05
    n0: int = 110

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError(f"d must be > 0, got {self.d}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.n0 < 1:
            raise ValueError(f"n0 must be >= 1, got {self.n0}")

    @property
    def threshold(self) -> float:
        return chi_square_critical(self.alpha) / self.d**2


@dataclass(frozen=True)
class StoppingDecision:
    stop: bool
    n: int
    lambda_min: float
    threshold: float


@lru_cache(maxsize=64)
def chi_square_critical(alpha: float, df: int = 3) -> float:
    """Upper-tail chi-square critical value: P(chi2(df) >= C) = alpha.

    Solved by bracketed root-finding on the regularized upper incomplete
    gamma function Q(df/2, C/2).
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    f = lambda x: gammaincc(df / 2.0, x / 2.0) - alpha
    hi = 2.0 * df
    while f(hi) > 0:
        hi *= 2.0
    return float(brentq(f, 0.0, hi, xtol=1e-12, rtol=8.9e-16))


def lambda_min(J) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    return float(np.linalg.eigvalsh(np.asarray(J, dtype=float))[0])


def stopping_check(J, n: int, cfg: StoppingConfig) -> StoppingDecision:
    """Evaluate the stopping rule on the current observed information."""
    lam = lambda_min(J)
    thr = cfg.threshold
    return StoppingDecision(stop=(n >= cfg.n0 and lam >= thr), n=n,
                            lambda_min=lam, threshold=thr)


def ellipsoid_contains(gamma_hat: Gamma, J, gamma0: Gamma, alpha: float) -> bool:
    """Joint-coverage event: the quadratic form at gamma0 is within C_alpha^2."""
    diff = gamma_hat.as_array() - gamma0.as_array()
    quad = float(diff @ np.asarray(J, dtype=float) @ diff)
    return quad <= chi_square_critical(alpha)


def _natural_jacobian(gamma_hat: Gamma) -> np.ndarray:
    """Jacobian of (a, b, c) = (beta2, -beta1/beta2, c) at gamma_hat."""
    b2 = gamma_hat.beta2
    return np.array(
        [
            [0.0, 1.0, 0.0],
            [-1.0 / b2, gamma_hat.beta1 / b2**2, 0.0],
            [0.0, 0.0, 1.0],
        ]
    )


def marginal_coverage(gamma_hat: Gamma, J, item_true: ItemParams,
                      alpha: float) -> tuple[bool, bool, bool]:
    """Per-parameter coverage via axis-aligned projections of the ellipsoid.

    The gamma-space ellipsoid is mapped to (a, b, c) by the delta method:
    Sigma = T J^{-1} T' with T the Jacobian at gamma_hat; parameter j is
    covered when |est_j - true_j| <= sqrt(C_alpha^2 * Sigma_jj).
    """
    J = np.asarray(J, dtype=float)
    lam = lambda_min(J)
    if not np.isfinite(lam) or lam <= 0:
        raise SingularInformation(
            f"observed information is not positive definite (lambda_min={lam:.3g})",
            gamma=gamma_hat,
        )
    T = _natural_jacobian(gamma_hat)
    sigma = T @ np.linalg.inv(J) @ T.T
    half_widths = np.sqrt(chi_square_critical(alpha) * np.diag(sigma))
    est = from_gamma(gamma_hat)
    truth = np.array([item_true.a, item_true.b, item_true.c])
    fit = np.array([est.a, est.b, est.c])
    covered = np.abs(fit - truth) <= half_widths
    return bool(covered[0]), bool(covered[1]), bool(covered[2])
