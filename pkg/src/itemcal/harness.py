"""End-to-end calibration runs and the Monte Carlo study driver.

A run recruits examinees according to the configured strategy, re-estimates
the item after every batch, and stops when the smallest eigenvalue of the
accumulated information clears the precision threshold (or the examinee cap
is hit). The Monte Carlo driver replays seeded, independent runs over a
grid of true items and aggregates estimate, stopping-time and coverage
statistics per grid cell.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .design import (
    BatchTag,
    CalibrationState,
    DesignConfig,
    DesignRequest,
    Target,
    dopt_grid,
    random_batch,
    strict_d_optimal_batch,
    two_stage_batch,
)
from .errors import CalibrationError
from .estimation import FitOptions, fit_ab_given_c, fit_mle, initial_c_estimate
from .model import (
    Gamma,
    ItemParams,
    fisher_information_grid,
    observed_information,
    to_gamma,
)
from .pool import PoolConfig, recruit, respond_all
from .sequential import StoppingConfig, ellipsoid_contains, marginal_coverage, stopping_check


class Strategy(str, Enum):
    TWO_STAGE = "TWO_STAGE"
    STRICT_DOPT = "STRICT_DOPT"
    RANDOM = "RANDOM"


DEFAULT_GRID: tuple[ItemParams, ...] = tuple(
    ItemParams(a, b, 0.1) for a in (0.5, 1.0, 1.5, 2.0) for b in (-2.0, -1.0, 0.0, 1.0, 2.0)
)

# starting value for the full MLE when no staged estimates exist
# (strict D-optimal and random strategies skip the guessing pre-estimate)
_NEUTRAL_INIT = Gamma(0.0, 1.0, 0.2)


@dataclass(frozen=True)
class StudyConfig:
    strategy: Strategy = Strategy.TWO_STAGE
    grid: tuple[ItemParams, ...] = DEFAULT_GRID
    replications: int = 200
    stopping: StoppingConfig = StoppingConfig()
    design: DesignConfig = DesignConfig()
    pool: PoolConfig = PoolConfig()
    fit: FitOptions = FitOptions()
    max_examinees: int = 50_000
    master_seed: int = 20100501
    threads: int = 1
    max_failure_rate: float = 0.1

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.max_examinees < self.design.n_init_ab + self.design.n_init_c:
            raise ValueError("max_examinees must cover the initial samples")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass(frozen=True)
class CalibrationResult:
    item_true: ItemParams
    estimates: ItemParams
    gamma_hat: Gamma
    n_used: int
    stopped: bool
    n_iterations: int
    joint_covered: bool
    marginal_covered: tuple[bool, bool, bool]
    lambda_min: float
    lambda_min_path: tuple[float, ...]
    c_fallbacks: int
    seed: int


@dataclass(frozen=True)
class McSummary:
    """Aggregated Monte Carlo statistics for one grid cell.

    SDs are population SDs (NaN below two converged runs), so each MSE
    decomposes exactly as bias^2 + sd^2.
    """

    strategy: Strategy
    item_true: ItemParams
    replications: int
    n_converged: int
    n_nonconverged: int
    mean_a: float
    sd_a: float
    mse_a: float
    mean_b: float
    sd_b: float
    mse_b: float
    mean_c: float
    sd_c: float
    mse_c: float
    mean_n: float
    sd_n: float
    coverage_a: float
    coverage_b: float
    coverage_c: float
    coverage_joint: float
    stop_rate: float
    c_fallback_rate: float


def _append_batch(state: CalibrationState, request: DesignRequest, item_true, cfg, rng):
    examinees = recruit(request, next_index=state.n + 1, cfg=cfg.pool, rng=rng)
    responses = respond_all(examinees, item_true, rng)
    tags = request.expanded_tags()
    for e, y, tag in zip(examinees, responses, tags):
        state.theta.append(e.theta_observed)
        state.y.append(int(y))
        state.theta_true.append(e.theta_true)
        state.tags.append(tag)
    return examinees


def _accumulate_info(state: CalibrationState, new_thetas) -> None:
    """Add the new batch's expected information at the current estimate.

    The running design/stopping state grows by positive-semidefinite
    single-point information matrices, so its smallest eigenvalue is
    non-decreasing across iterations (Weyl); the final confidence set is
    still built from the fully re-evaluated observed information.
    """
    batch = fisher_information_grid(state.gamma_hat, np.asarray(new_thetas)).sum(axis=0)
    state.info = batch if state.info is None else state.info + batch


def _initialize_two_stage(state, item_true, cfg, rng):
    d = cfg.design
    low_cut = min(d.theta_c, d.pool_max)
    step1 = DesignRequest(
        targets=(Target(count=d.n_init_c, tag=BatchTag.INITIAL_C,
                        theta_range=(d.pool_min, low_cut)),)
    )
    _append_batch(state, step1, item_true, cfg, rng)
    c0 = initial_c_estimate(state.y, c_max=cfg.fit.bounds.c_max)

    step2 = DesignRequest(
        targets=(Target(count=d.n_init_ab, tag=BatchTag.INITIAL_AB,
                        theta_range=d.pool_range),)
    )
    _append_batch(state, step2, item_true, cfg, rng)
    theta, y = state.arrays()
    prof = fit_ab_given_c(theta, y, c_fixed=c0, opts=cfg.fit)
    state.gamma_hat = prof.gamma
    state.item_hat = prof.item


def _initialize_pooled(state, item_true, cfg, rng, tag, random_thetas=False):
    d = cfg.design
    n_init = d.n_init_ab + d.n_init_c
    if random_thetas:
        request = random_batch(n_init, d.random_sd, rng, d.pool_range)
    else:
        request = DesignRequest(
            targets=(Target(count=n_init, tag=tag, theta_range=d.pool_range),)
        )
    _append_batch(state, request, item_true, cfg, rng)
    theta, y = state.arrays()
    fit = fit_mle(theta, y, init=_NEUTRAL_INIT, opts=cfg.fit)
    state.gamma_hat = fit.gamma
    state.item_hat = fit.item


def _next_request(state, cfg, rng, grid):
    if cfg.strategy is Strategy.TWO_STAGE:
        return two_stage_batch(state, cfg.design)
    if cfg.strategy is Strategy.STRICT_DOPT:
        return strict_d_optimal_batch(state, cfg.design.dopt_batch, grid)
    return random_batch(cfg.design.dopt_batch, cfg.design.random_sd, rng, cfg.design.pool_range)


def run_calibration(item_true: ItemParams, cfg: StudyConfig, seed: int) -> CalibrationResult:
    """One full calibration run of the configured strategy.

    Deterministic in (item_true, cfg, seed). Raises NonConvergence (or
    SingularInformation) if an estimation step fails; the Monte Carlo driver
    records such replications as non-converged.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    state = CalibrationState()

    if cfg.strategy is Strategy.TWO_STAGE:
        _initialize_two_stage(state, item_true, cfg, rng)
    elif cfg.strategy is Strategy.STRICT_DOPT:
        _initialize_pooled(state, item_true, cfg, rng, tag=BatchTag.INITIAL_AB)
    else:
        _initialize_pooled(state, item_true, cfg, rng, tag=BatchTag.RANDOM,
                           random_thetas=True)

    n_initial = state.n
    _accumulate_info(state, state.theta)
    grid = dopt_grid(cfg.design) if cfg.strategy is Strategy.STRICT_DOPT else None

    stopped = False
    batches_recruited = 0
    while state.n < cfg.max_examinees:
        request = _next_request(state, cfg, rng, grid)
        if request.c_fallback:
            state.c_fallbacks += 1
        remaining = cfg.max_examinees - state.n
        if request.total > remaining:
            request = request.truncated(remaining)
        n_before = state.n
        _append_batch(state, request, item_true, cfg, rng)
        batches_recruited += request.total
        state.iteration += 1

        theta, y = state.arrays()
        fit = fit_mle(theta, y, init=state.gamma_hat, opts=cfg.fit)
        state.gamma_hat = fit.gamma
        state.item_hat = fit.item
        _accumulate_info(state, state.theta[n_before:])

        decision = stopping_check(state.info, state.n, cfg.stopping)
        if state.lambda_min_path:  # PSD increments keep the statistic monotone
            assert decision.lambda_min >= state.lambda_min_path[-1] - 1e-9
        state.lambda_min_path.append(decision.lambda_min)
        if decision.stop:
            stopped = True
            break

    assert state.n == n_initial + batches_recruited  # recruitment accounting

    # the confidence set is built from the observed information re-evaluated
    # at the final estimate
    theta, y = state.arrays()
    info_final = observed_information(state.gamma_hat, theta, y)
    gamma0 = to_gamma(item_true)
    joint = ellipsoid_contains(state.gamma_hat, info_final, gamma0, cfg.stopping.alpha)
    marginal = marginal_coverage(state.gamma_hat, info_final, item_true, cfg.stopping.alpha)
    lam = state.lambda_min_path[-1] if state.lambda_min_path else float("nan")
    return CalibrationResult(
        item_true=item_true,
        estimates=state.item_hat,
        gamma_hat=state.gamma_hat,
        n_used=state.n,
        stopped=stopped,
        n_iterations=state.iteration,
        joint_covered=joint,
        marginal_covered=marginal,
        lambda_min=lam,
        lambda_min_path=tuple(state.lambda_min_path),
        c_fallbacks=state.c_fallbacks,
        seed=seed,
    )


def replication_seed(master_seed: int, cell_index: int, rep_index: int) -> int:
    """Derive one replication's integer seed from the master seed.

    Counter-based: depends only on the indices, so any execution schedule
    produces identical runs.
    """
    ss = np.random.SeedSequence((master_seed, cell_index, rep_index))
    return int(ss.generate_state(1, np.uint64)[0])


def summarize(strategy: Strategy, item_true: ItemParams, results, n_failed: int) -> McSummary:
    """Aggregate converged replications of one grid cell."""
    n_total = len(results) + n_failed
    k = len(results)
    if k == 0:
        nan = float("nan")
        return McSummary(strategy, item_true, n_total, 0, n_failed, *([nan] * 11),
                         coverage_a=nan, coverage_b=nan, coverage_c=nan,
                         coverage_joint=nan, stop_rate=nan, c_fallback_rate=nan)

    a = np.array([r.estimates.a for r in results])
    b = np.array([r.estimates.b for r in results])
    c = np.array([r.estimates.c for r in results])
    n = np.array([r.n_used for r in results], dtype=float)

    def stats(x, truth):
        sd = float(np.std(x)) if k >= 2 else float("nan")
        return float(x.mean()), sd, float(np.mean((x - truth) ** 2))

    mean_a, sd_a, mse_a = stats(a, item_true.a)
    mean_b, sd_b, mse_b = stats(b, item_true.b)
    mean_c, sd_c, mse_c = stats(c, item_true.c)
    marg = np.array([r.marginal_covered for r in results], dtype=float)
    return McSummary(
        strategy=strategy,
        item_true=item_true,
        replications=n_total,
        n_converged=k,
        n_nonconverged=n_failed,
        mean_a=mean_a, sd_a=sd_a, mse_a=mse_a,
        mean_b=mean_b, sd_b=sd_b, mse_b=mse_b,
        mean_c=mean_c, sd_c=sd_c, mse_c=mse_c,
        mean_n=float(n.mean()),
        sd_n=float(np.std(n)) if k >= 2 else float("nan"),
        coverage_a=float(marg[:, 0].mean()),
        coverage_b=float(marg[:, 1].mean()),
        coverage_c=float(marg[:, 2].mean()),
        coverage_joint=float(np.mean([r.joint_covered for r in results])),
        stop_rate=float(np.mean([r.stopped for r in results])),
        c_fallback_rate=float(np.mean([r.c_fallbacks > 0 for r in results])),
    )


def _run_cell_chunk(args):
    item, cfg, cell_index, rep_indices = args
    out = []
    for r in rep_indices:
        seed = replication_seed(cfg.master_seed, cell_index, r)
        try:
            out.append((r, run_calibration(item, cfg, seed), None))
        except CalibrationError as exc:
            out.append((r, None, f"{type(exc).__name__}: {exc}"))
    return cell_index, out


def run_monte_carlo(cfg: StudyConfig, progress=None) -> list[McSummary]:
    """Independent seeded replications for every grid cell, aggregated.

    Deterministic in (cfg, master_seed) regardless of thread count: each
    replication's stream is derived from (master_seed, cell, rep) and
    aggregation follows (cell, rep) order.
    """
    chunks = []
    for ci, item in enumerate(cfg.grid):
        reps = list(range(cfg.replications))
        size = max(1, math.ceil(len(reps) / max(1, 4 * cfg.threads)))
        for k in range(0, len(reps), size):
            chunks.append((item, cfg, ci, reps[k:k + size]))

    per_cell: dict[int, list] = {ci: [] for ci in range(len(cfg.grid))}
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            outputs = list(pool.map(_run_cell_chunk, chunks))
    else:
        outputs = [_run_cell_chunk(ch) for ch in chunks]
    for ci, rows in outputs:
        per_cell[ci].extend(rows)
        if progress is not None:
            progress(ci, len(rows))

    summaries = []
    for ci, item in enumerate(cfg.grid):
        rows = sorted(per_cell[ci], key=lambda t: t[0])
        ok = [res for _, res, err in rows if err is None]
        failed = sum(1 for _, _, err in rows if err is not None)
        summaries.append(summarize(cfg.strategy, item, ok, failed))
    return summaries


def failure_rate(summaries) -> float:
    total = sum(s.replications for s in summaries)
    failed = sum(s.n_nonconverged for s in summaries)
    return failed / total if total else 0.0
