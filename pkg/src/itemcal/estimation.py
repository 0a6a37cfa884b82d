"""Maximum-likelihood estimation of 3PL item parameters.

Three estimators, matching the stages of the calibration procedure:

* ``initial_c_estimate`` — proportion of correct responses among very
  low-trait examinees;
* ``fit_ab_given_c`` — profile fit of (a, b) with the guessing value frozen;
* ``fit_mle`` — joint fit of all three parameters.

Both fits run a damped Newton ascent on the log-likelihood using the
observed information, with step halving and a gradient-step fallback, and
box constraints applied in the natural (a, b, c) parameterization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateData, NonConvergence, SingularInformation
from .model import (
    Gamma,
    ParamBounds,
    from_gamma,
    log_likelihood,
    loglik_derivatives,
)

# Guessing estimates are kept strictly inside [C_FLOOR, bounds.c_max]; ICCs
# with c >= 0.5 are pathological for calibration.
C_FLOOR = 1e-3

_MAX_HALVINGS = 30


@dataclass(frozen=True)
class FitOptions:
    """Newton solver controls. grad_tol is per observation (scaled by n)."""

    max_iter: int = 100
    grad_tol: float = 1e-8
    step_tol: float = 1e-10
    bounds: ParamBounds = ParamBounds()


@dataclass(frozen=True)
class FitResult:
    gamma: Gamma
    item: ItemParams
    loglik: float
    n_iter: int
    converged: bool
    active_bounds: tuple[str, ...]
    grad_norm: float
    loglik_path: tuple[float, ...]


def initial_c_estimate(y, c_max: float = 0.5) -> float:
    """Proportion of correct responses, clamped to [0.001, c_max].

    Intended for responses of examinees with traits below the low cutoff,
    where the correct-answer probability is close to c.
    """
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise DegenerateData("initial c estimate needs at least one response")
    return float(np.clip(y.mean(), C_FLOOR, c_max))


def _project(vec: np.ndarray, bounds: ParamBounds, c_frozen: bool) -> np.ndarray:
    """Clamp gamma to the natural-parameter box (a, b, c)."""
    a = min(max(vec[1], bounds.a_min), bounds.a_max)
    b = min(max(-vec[0] / a, bounds.b_min), bounds.b_max)
    out = np.array([-a * b, a, vec[2]])
    if not c_frozen:
        out[2] = min(max(vec[2], max(bounds.c_min, C_FLOOR)), bounds.c_max)
    return out


def _active_bounds(vec: np.ndarray, bounds: ParamBounds, c_frozen: bool, tol=1e-9):
    active = []
    a, b, c = vec[1], -vec[0] / vec[1], vec[2]
    if a <= bounds.a_min + tol:
        active.append("a_min")
    if a >= bounds.a_max - tol:
        active.append("a_max")
    if b <= bounds.b_min + tol:
        active.append("b_min")
    if b >= bounds.b_max - tol:
        active.append("b_max")
    if not c_frozen:
        if c <= max(bounds.c_min, C_FLOOR) + tol:
            active.append("c_min")
        if c >= bounds.c_max - tol:
            active.append("c_max")
    return tuple(active)


def _check_degenerate(theta: np.ndarray, y: np.ndarray, min_distinct: int):
    if theta.size == 0:
        raise DegenerateData("no responses")
    if np.all(y == y[0]):
        raise DegenerateData("all responses identical")
    if np.unique(theta).size < min_distinct:
        raise DegenerateData(
            f"need at least {min_distinct} distinct trait levels, "
            f"got {np.unique(theta).size}"
        )


def _newton_ascent(theta, y, start: np.ndarray, free: np.ndarray, opts: FitOptions):
    """Damped Newton maximization over the free gamma coordinates.

    Accepted damped steps never decrease the likelihood. Once likelihood
    improvements fall below floating-point resolution, a short polish phase
    takes score-norm-decreasing Newton steps to drive the gradient down to
    the tolerance. Returns the final gamma vector plus diagnostics.
    """
    c_frozen = not free[2]
    x = _project(start.astype(float).copy(), opts.bounds, c_frozen)
    ll, U, J = loglik_derivatives(Gamma.from_array(x), theta, y)
    ll_path = [ll]
    grad_tol = opts.grad_tol * theta.size
    n_iter = 0

    for n_iter in range(1, opts.max_iter + 1):
        if _stationary(x, U, free, grad_tol, opts.bounds, c_frozen):
            return x, ll, n_iter - 1, True, float(np.abs(U[free]).max()), ll_path

        step = _solve_direction(J, U, _working_set(x, U, free, opts.bounds, c_frozen))
        moved, x_new, ll_new = _line_search(theta, y, x, step, ll, opts, c_frozen)
        if not moved and np.abs(step).max() > 1e3 * opts.step_tol:
            # a large Newton step failed to ascend: fall back to a
            # (projected) gradient step
            grad_step = np.where(free, U, 0.0)
            norm = np.abs(grad_step).max()
            if norm > 0:
                grad_step = grad_step / norm
            moved, x_new, ll_new = _line_search(
                theta, y, x, grad_step, ll, opts, c_frozen
            )
        if not moved:
            # likelihood is flat at float resolution: polish on the score
            return _finish(theta, y, x, free, opts, c_frozen, n_iter, ll_path)

        small_step = np.abs(x_new - x).max() <= opts.step_tol
        x, ll = x_new, ll_new
        ll_path.append(ll)
        if small_step:
            return _finish(theta, y, x, free, opts, c_frozen, n_iter, ll_path)
        _, U, J = loglik_derivatives(Gamma.from_array(x), theta, y)

    return _finish(theta, y, x, free, opts, c_frozen, n_iter, ll_path)


def _finish(theta, y, x, free, opts, c_frozen, n_iter, ll_path):
    """Score polish followed by the final stationarity verdict."""
    grad_tol = opts.grad_tol * theta.size
    x, U = _score_polish(theta, y, x, free, opts, c_frozen)
    ll = log_likelihood(Gamma.from_array(x), theta, y)
    ok = _stationary(x, U, free, grad_tol, opts.bounds, c_frozen, slack=True)
    return x, ll, n_iter, ok, float(np.abs(U[free]).max()), ll_path


def _score_polish(theta, y, x, free, opts, c_frozen, max_steps=12):
    """Newton steps accepted only when they shrink the score norm.

    Used within floating-point distance of the maximum, where quadratic
    convergence on the score root applies but likelihood comparisons are
    pure noise.
    """
    _, U, J = loglik_derivatives(Gamma.from_array(x), theta, y)
    for _ in range(max_steps):
        working = _working_set(x, U, free, opts.bounds, c_frozen)
        norm = np.abs(U[working]).max() if working.any() else 0.0
        if norm == 0.0:
            break
        step = _solve_direction(J, U, working)
        t, accepted = 1.0, None
        for _ in range(6):
            cand = _project(x + t * step, opts.bounds, c_frozen)
            _, U_cand, J_cand = loglik_derivatives(Gamma.from_array(cand), theta, y)
            if np.all(np.isfinite(U_cand)) and np.abs(U_cand[working]).max() < norm:
                accepted = (cand, U_cand, J_cand)
                break
            t *= 0.5
        if accepted is None:
            break
        x, U, J = accepted
    return x, U


def _working_set(x, U, free, bounds, c_frozen) -> np.ndarray:
    """Drop the guessing coordinate from the Newton system while it sits on
    its bound with the gradient pointing outward.

    Without this the projected Newton step zigzags against the box on the
    flat c-ridge of weakly identified items.
    """
    working = free.copy()
    if c_frozen or not free[2]:
        return working
    c_lo, c_hi = max(bounds.c_min, C_FLOOR), bounds.c_max
    if (x[2] <= c_lo + 1e-12 and U[2] < 0) or (x[2] >= c_hi - 1e-12 and U[2] > 0):
        working[2] = False
    return working


def _solve_direction(J: np.ndarray, U: np.ndarray, free: np.ndarray) -> np.ndarray:
    step = np.zeros(3)
    Jf = J[np.ix_(free, free)]
    try:
        sol = np.linalg.solve(Jf, U[free])
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
        step[free] = sol
    except np.linalg.LinAlgError:
        step[free] = U[free]  # singular system: revert to the gradient
    return step


def _line_search(theta, y, x, step, ll, opts, c_frozen):
    """Backtracking ascent with projection; at most _MAX_HALVINGS halvings.

    Gives up once the damped step shrinks below step_tol, where no
    likelihood change is resolvable anyway.
    """
    t = 1.0
    scale = np.abs(step).max()
    for _ in range(_MAX_HALVINGS + 1):
        if t * scale < opts.step_tol:
            break
        cand = _project(x + t * step, opts.bounds, c_frozen)
        ll_cand = log_likelihood(Gamma.from_array(cand), theta, y)
        if np.isfinite(ll_cand) and ll_cand > ll and np.any(cand != x):
            return True, cand, ll_cand
        t *= 0.5
    return False, x, ll


def _stationary(x, U, free, grad_tol, bounds, c_frozen, slack=False):
    """Gradient small in every free coordinate, or excused by an active bound.

    beta2 maps to the a-bound; beta1 to the b-bound (given beta2); c to the
    c-bound (excused only when the gradient points out of the box). With
    ``slack`` the bound excuse also applies when the line search cannot
    ascend any further.
    """
    active = _active_bounds(x, bounds, c_frozen)
    a_act = any(k.startswith("a_") for k in active)
    b_act = any(k.startswith("b_") for k in active)
    c_act = ("c_min" in active and U[2] < 0) or ("c_max" in active and U[2] > 0)
    excused = {0: b_act, 1: a_act or b_act, 2: c_act}
    for j in range(3):
        if not free[j]:
            continue
        if abs(U[j]) <= grad_tol:
            continue
        if excused[j] or (slack and active):
            continue
        return False
    return True


def fit_ab_given_c(theta, y, c_fixed: float, opts: FitOptions | None = None,
                   init: tuple[float, float] | None = None) -> FitResult:
    """Box-constrained profile fit of (a, b) with the guessing value frozen.

    Needs both response values and at least two distinct trait levels.
    Raises NonConvergence after the iteration budget.
    """
    opts = opts or FitOptions()
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_degenerate(theta, y, min_distinct=2)
    a0, b0 = init if init is not None else (1.0, 0.0)
    start = np.array([-a0 * b0, a0, c_fixed])
    free = np.array([True, True, False])
    x, ll, n_iter, ok, gnorm, path = _newton_ascent(theta, y, start, free, opts)
    result = _make_result(x, ll, n_iter, ok, gnorm, path, opts, c_frozen=True)
    if not ok:
        raise NonConvergence(
            f"profile (a, b) fit did not converge in {n_iter} iterations "
            f"(grad norm {gnorm:.3g})",
            result=result,
        )
    return result


def fit_mle(theta, y, init: Gamma, opts: FitOptions | None = None) -> FitResult:
    """Full three-parameter maximum-likelihood fit from a starting value.

    Damped Newton on the observed information; the returned likelihood is
    never below the (projected) starting value. Needs >= 3 distinct trait
    levels and both response values.
    """
    opts = opts or FitOptions()
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_degenerate(theta, y, min_distinct=3)
    free = np.array([True, True, True])
    x, ll, n_iter, ok, gnorm, path = _newton_ascent(theta, y, init.as_array(), free, opts)
    if not np.isfinite(ll):
        raise SingularInformation(
            "likelihood not finite at the final iterate", gamma=Gamma.from_array(x)
        )
    result = _make_result(x, ll, n_iter, ok, gnorm, path, opts, c_frozen=False)
    if not ok:
        raise NonConvergence(
            f"MLE did not converge in {n_iter} iterations (grad norm {gnorm:.3g})",
            result=result,
        )
    return result


def _make_result(x, ll, n_iter, ok, gnorm, path, opts, c_frozen):
    gamma = Gamma.from_array(x)
    return FitResult(
        gamma=gamma,
        item=from_gamma(gamma),
        loglik=ll,
        n_iter=n_iter,
        converged=ok,
        active_bounds=_active_bounds(x, opts.bounds, c_frozen),
        grad_norm=gnorm,
        loglik_path=tuple(path),
    )
