"""Three-parameter logistic (3PL) response model and likelihood derivatives.

The item characteristic curve is

    P(Y=1 | theta) = c + (1 - c) / (1 + exp(-a*(theta - b)))

with discrimination a > 0, difficulty b and guessing probability c.
Estimation works on the regression parameterization

    gamma = (beta1, beta2, c),   beta = (-a*b, a),   x = (1, theta)

so that a*(theta - b) = x'beta and the logistic factor is
G = 1 / (1 + exp(-x'beta)), giving P = c + (1 - c)*G and dP/dc = 1 - G.
Vector and matrix quantities are always ordered (beta1, beta2, c).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

# Floor applied to probabilities inside logs and to sigma^2 = P(1-P) so the
# likelihood and score stay finite in the c = 0 edge cases.
PROB_EPS = 1e-12


class BatchTag(str, Enum):
    """Provenance of a recruited examinee within a calibration run."""

    INITIAL_C = "INITIAL_C"
    INITIAL_AB = "INITIAL_AB"
    C_BATCH = "C_BATCH"
    AB_BATCH = "AB_BATCH"
    DOPT = "DOPT"
    RANDOM = "RANDOM"


@dataclass(frozen=True)
class ItemParams:
    """Natural item parameters of a 3PL item."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0):
            raise ValueError(f"discrimination a must be finite and > 0, got {self.a}")
        if not np.isfinite(self.b):
            raise ValueError(f"difficulty b must be finite, got {self.b}")
        if not (0.0 <= self.c < 1.0):
            raise ValueError(f"guessing c must lie in [0, 1), got {self.c}")


@dataclass(frozen=True)
class Gamma:
    """Reparameterized item vector (beta1, beta2, c) with beta = (-a*b, a)."""

    beta1: float
    beta2: float
    c: float

    def as_array(self) -> np.ndarray:
        return np.array([self.beta1, self.beta2, self.c], dtype=float)

    @classmethod
    def from_array(cls, v) -> "Gamma":
        return cls(float(v[0]), float(v[1]), float(v[2]))


@dataclass(frozen=True)
class ParamBounds:
    """Box constraints on the natural parameters used by the estimators.

    The defaults are wide enough to contain every item in the simulation
    grid while keeping the optimizer away from pathological regions.
    """

    a_min: float = 0.2
    a_max: float = 3.0
    b_min: float = -4.0
    b_max: float = 4.0
    c_min: float = 0.0
    c_max: float = 0.5


@dataclass(frozen=True)
class DesignPoint:
    """An observed latent-trait level together with its covariate (1, theta)."""

    theta_observed: float

    def covariate(self) -> np.ndarray:
        return np.array([1.0, self.theta_observed])


@dataclass(frozen=True)
class ResponseRecord:
    """One examinee's contribution to the calibration data.

    ``theta_true`` exists only for response generation and post-hoc
    evaluation; estimation code must consume ``theta_observed`` and ``y``
    exclusively (see :func:`response_arrays`).
    """

    theta_observed: float
    theta_true: float
    y: int
    batch_tag: BatchTag


def response_arrays(records) -> tuple[np.ndarray, np.ndarray]:
    """Extract the estimation-visible data (theta_observed, y) as arrays."""
    theta = np.array([r.theta_observed for r in records], dtype=float)
    y = np.array([r.y for r in records], dtype=float)
    return theta, y


def to_gamma(item: ItemParams) -> Gamma:
    """Map natural parameters to gamma = (-a*b, a, c)."""
    return Gamma(-item.a * item.b, item.a, item.c)


def from_gamma(g: Gamma) -> ItemParams:
    """Invert :func:`to_gamma`; requires beta2 > 0."""
    if not g.beta2 > 0:
        raise ValueError(f"beta2 must be > 0 to recover a discrimination, got {g.beta2}")
    return ItemParams(a=g.beta2, b=-g.beta1 / g.beta2, c=g.c)


def icc(theta, item: ItemParams):
    """Item characteristic curve: c + (1-c)*sigmoid(a*(theta-b)).

    Accepts a scalar or an array of trait levels. Strictly increasing in
    theta with range (c, 1).
    """
    p = item.c + (1.0 - item.c) * expit(item.a * (np.asarray(theta, dtype=float) - item.b))
    return float(p) if np.ndim(theta) == 0 else p


def _model_terms(gamma: Gamma, theta: np.ndarray):
    """Logistic factor G, response probability P and sigma^2 = P(1-P)."""
    z = gamma.beta1 + gamma.beta2 * theta
    G = expit(z)
    P = gamma.c + (1.0 - gamma.c) * G
    s2 = np.maximum(P * (1.0 - P), PROB_EPS)
    return G, P, s2


def log_likelihood(gamma: Gamma, theta, y) -> float:
    """Bernoulli log-likelihood of responses y at observed traits theta."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if theta.size == 0:
        return 0.0
    _, P, _ = _model_terms(gamma, theta)
    P = np.clip(P, PROB_EPS, 1.0 - PROB_EPS)
    return float(np.sum(y * np.log(P) + (1.0 - y) * np.log(1.0 - P)))


def _grad_p(gamma: Gamma, theta: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Stacked gradient of P w.r.t. (beta1, beta2, c), shape (n, 3)."""
    u = (1.0 - gamma.c) * G * (1.0 - G)
    return np.stack([u, u * theta, 1.0 - G], axis=1)


def score(gamma: Gamma, theta, y) -> np.ndarray:
    """Score vector: sum_i (y_i - P_i)/sigma_i^2 * dP_i/dgamma.

    Equals the analytic gradient of :func:`log_likelihood`. The score over
    zero records is the zero vector.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if theta.size == 0:
        return np.zeros(3)
    G, P, s2 = _model_terms(gamma, theta)
    r = (y - P) / s2
    return _grad_p(gamma, theta, G).T @ r


def observed_information(gamma: Gamma, theta, y) -> np.ndarray:
    """Negative Hessian of :func:`log_likelihood` at gamma (3x3 symmetric).

    Per record, with gradP = dP/dgamma and hessP = d^2P/dgamma^2,

        -d^2 l_i = [1/s2 + (y-P)(1-2P)/s2^2] gradP gradP' - (y-P)/s2 * hessP.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if theta.size == 0:
        return np.zeros((3, 3))
    G, P, s2 = _model_terms(gamma, theta)
    gradp = _grad_p(gamma, theta, G)
    A = 1.0 / s2 + (y - P) * (1.0 - 2.0 * P) / s2**2
    J = np.einsum("i,ij,ik->jk", A, gradp, gradp)

    # hessP: d2P/dbeta_j dbeta_k = (1-c) G(1-G)(1-2G) x_j x_k with x = (1, theta),
    # d2P/dbeta_j dc = -G(1-G) x_j, d2P/dc2 = 0.
    B = (y - P) / s2
    hbb = B * (1.0 - gamma.c) * G * (1.0 - G) * (1.0 - 2.0 * G)
    hbc = B * (-G * (1.0 - G))
    J[0, 0] -= np.sum(hbb)
    J[0, 1] -= np.sum(hbb * theta)
    J[1, 1] -= np.sum(hbb * theta * theta)
    J[0, 2] -= np.sum(hbc)
    J[1, 2] -= np.sum(hbc * theta)
    J[1, 0] = J[0, 1]
    J[2, 0] = J[0, 2]
    J[2, 1] = J[1, 2]
    return (J + J.T) / 2.0


def loglik_derivatives(gamma: Gamma, theta, y):
    """Log-likelihood, score and observed information in one data pass.

    Matches log_likelihood / score / observed_information exactly; used by
    the Newton solver where all three are needed per iterate.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if theta.size == 0:
        return 0.0, np.zeros(3), np.zeros((3, 3))
    G, P, s2 = _model_terms(gamma, theta)
    Pc = np.clip(P, PROB_EPS, 1.0 - PROB_EPS)
    ll = float(np.sum(y * np.log(Pc) + (1.0 - y) * np.log(1.0 - Pc)))

    gradp = _grad_p(gamma, theta, G)
    resid = (y - P) / s2
    U = gradp.T @ resid

    A = 1.0 / s2 + (y - P) * (1.0 - 2.0 * P) / s2**2
    J = np.einsum("i,ij,ik->jk", A, gradp, gradp)
    hbb = resid * ((1.0 - gamma.c) * G * (1.0 - G) * (1.0 - 2.0 * G))
    hbc = resid * (-G * (1.0 - G))
    J[0, 0] -= np.sum(hbb)
    J[0, 1] -= np.sum(hbb * theta)
    J[1, 1] -= np.sum(hbb * theta * theta)
    J[0, 2] -= np.sum(hbc)
    J[1, 2] -= np.sum(hbc * theta)
    J[1, 0] = J[0, 1]
    J[2, 0] = J[0, 2]
    J[2, 1] = J[1, 2]
    return ll, U, (J + J.T) / 2.0


def fisher_information_point(gamma: Gamma, theta: float) -> np.ndarray:
    """Expected information of a single observation at trait level theta.

    Rank-1 and positive semidefinite: gradP gradP' / sigma^2.
    """
    th = np.asarray([theta], dtype=float)
    G, _, s2 = _model_terms(gamma, th)
    g = _grad_p(gamma, th, G)[0]
    return np.outer(g, g) / s2[0]


def fisher_information_grid(gamma: Gamma, thetas) -> np.ndarray:
    """Single-observation information matrices for many trait levels.

    Returns an array of shape (len(thetas), 3, 3); used by the D-optimal
    greedy search and the information-curve emitter.
    """
    thetas = np.asarray(thetas, dtype=float)
    G, _, s2 = _model_terms(gamma, thetas)
    g = _grad_p(gamma, thetas, G)
    return np.einsum("ij,ik->ijk", g, g) / s2[:, None, None]
