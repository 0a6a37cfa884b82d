"""Tests for the examinee-selection strategies."""

import math

import numpy as np
import pytest
from scipy.special import expit

from itemcal.design import (
    CalibrationState,
    DesignConfig,
    d_optimal_pair,
    dopt_grid,
    random_batch,
    strict_d_optimal_batch,
    theta_lower_bound,
    two_stage_batch,
)
from itemcal.model import BatchTag, ItemParams, fisher_information_grid, icc, to_gamma


def bisect_icc_inverse(item, p, lo=-60.0, hi=60.0, tol=1e-12):
    """Oracle: theta with icc(theta) = p, by bisection."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if icc(mid, item) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestThetaLowerBound:
    def test_reference_value(self):
        item = ItemParams(1, 0, 0.1)
        got = theta_lower_bound(item, 0.99)
        assert got == pytest.approx(-math.log(89), abs=1e-12)
        assert got == pytest.approx(-4.48864, abs=1e-4)
        # independent route: locate theta_h numerically, reflect through b
        theta_h = bisect_icc_inverse(item, 0.99)
        assert got == pytest.approx(2 * item.b - theta_h, abs=1e-9)

    def test_offset_halves_when_a_doubles(self):
        assert theta_lower_bound(ItemParams(2, 0, 0.1), 0.99) == pytest.approx(
            -2.2443, abs=1e-4
        )

    def test_icc_identity(self):
        for item in [ItemParams(1, 0, 0.1), ItemParams(2, 0, 0.1)]:
            ell = theta_lower_bound(item, 0.99)
            assert icc(ell, item) == pytest.approx(0.11, abs=1e-12)

    def test_monotone_in_p0_and_c(self):
        item = ItemParams(1.2, 0.5, 0.15)
        p0s = np.linspace(0.9, 0.999, 40)
        vals = [theta_lower_bound(item, p) for p in p0s]
        assert np.all(np.diff(vals) < 0)  # strictly decreasing in p0
        cs = np.linspace(0.0, 0.45, 40)
        vals = [theta_lower_bound(ItemParams(1.2, 0.5, c), 0.99) for c in cs]
        assert np.all(np.diff(vals) > 0)  # strictly increasing in c

    def test_rejects_p0_at_or_below_c(self):
        with pytest.raises(ValueError):
            theta_lower_bound(ItemParams(1, 0, 0.6), 0.6)


class TestDOptimalPair:
    def test_unit_item(self):
        z = 2 * math.atanh(2 * 0.824 - 1)  # logit(0.824) via atanh identity
        low, high = d_optimal_pair(ItemParams(1, 0, 0.1))
        assert (low, high) == pytest.approx((-z, z), abs=1e-9)
        assert high == pytest.approx(1.5437, abs=1e-3)
        # the pair solves sigmoid(a*(theta-b)) = 0.176 / 0.824
        assert expit(low) == pytest.approx(0.176, abs=1e-12)
        assert expit(high) == pytest.approx(0.824, abs=1e-12)

    def test_scaled_shifted_item(self):
        low, high = d_optimal_pair(ItemParams(2, 1, 0.1))
        assert (low, high) == pytest.approx((0.2282, 1.7718), abs=1e-3)

    def test_midpoint_is_b(self):
        for item in [ItemParams(0.5, -2, 0.1), ItemParams(2.5, 1.3, 0.3)]:
            low, high = d_optimal_pair(item)
            assert 0.5 * (low + high) == pytest.approx(item.b, abs=1e-12)

    def test_spread_halves_when_a_doubles(self):
        for a in (0.4, 0.9, 1.7):
            s1 = np.diff(d_optimal_pair(ItemParams(a, 0.3, 0.1)))[0]
            s2 = np.diff(d_optimal_pair(ItemParams(2 * a, 0.3, 0.1)))[0]
            assert s1 == pytest.approx(2 * s2, rel=1e-12)


def state_with(item, cfg=None, info=None):
    st = CalibrationState()
    st.item_hat = item
    st.gamma_hat = to_gamma(item)
    st.info = info
    return st


class TestTwoStageBatch:
    def test_fallback_and_pair_for_unit_item(self):
        cfg = DesignConfig(batch_ab=10, batch_c=5)
        req = two_stage_batch(state_with(ItemParams(1, 0, 0.1)), cfg)
        assert req.c_fallback  # theta_ell = -4.4886 < pool floor
        c_t, ab_low, ab_high = req.targets
        assert c_t.tag is BatchTag.C_BATCH and c_t.count == 5
        assert c_t.theta_range == pytest.approx((-3.6, -3.1))
        assert (ab_low.count, ab_high.count) == (5, 5)
        assert ab_low.theta == pytest.approx(-1.5437, abs=1e-3)
        assert ab_high.theta == pytest.approx(1.5437, abs=1e-3)

    def test_clipping_of_far_pair(self):
        cfg = DesignConfig(p0=0.95)
        req = two_stage_batch(state_with(ItemParams(0.5, 2, 0.1)), cfg)
        assert req.c_fallback  # theta_ell = 2 - 2*ln(17) = -3.666
        _, ab_low, ab_high = req.targets
        assert ab_low.theta == pytest.approx(2 - 2 * math.atanh(2 * 0.824 - 1) * 2, abs=1e-3)
        assert ab_low.theta == pytest.approx(-1.0874, abs=1e-3)
        assert ab_high.theta == pytest.approx(3.6)  # clipped to pool ceiling

    def test_in_pool_theta_ell_is_used_directly(self):
        cfg = DesignConfig(p0=0.99)
        item = ItemParams(2, 2, 0.1)  # theta_ell = 2 - 4.4886/2 = -0.244
        req = two_stage_batch(state_with(item), cfg)
        assert not req.c_fallback
        assert req.targets[0].theta_range == pytest.approx((-3.6, 2 - math.log(89) / 2))

    def test_odd_ab_batch_puts_extra_point_low(self):
        cfg = DesignConfig(batch_ab=9, batch_c=5)
        req = two_stage_batch(state_with(ItemParams(1, 0, 0.1)), cfg)
        _, ab_low, ab_high = req.targets
        assert (ab_low.count, ab_high.count) == (5, 4)

    def test_total_and_pool_containment(self):
        rng = np.random.default_rng(11)
        cfg = DesignConfig()
        for _ in range(50):
            item = ItemParams(rng.uniform(0.2, 3), rng.uniform(-4, 4), rng.uniform(0, 0.45))
            req = two_stage_batch(state_with(item), cfg)
            assert req.total == cfg.batch_ab + cfg.batch_c
            for t in req.targets:
                if t.theta is not None:
                    assert cfg.pool_min <= t.theta <= cfg.pool_max
                else:
                    assert t.theta_range[0] >= cfg.pool_min
                    assert t.theta_range[1] <= cfg.pool_max + cfg.c_fallback_width


class TestStrictDOptimalBatch:
    def test_large_identity_state_picks_largest_trace_increment(self):
        # det(lam*I + g g') = lam^3 (1 + |g|^2/lam): the greedy pick under a
        # dominant identity state is the point with the largest diagonal
        # (trace) increment
        item = ItemParams(1, 0, 0.1)
        gamma = to_gamma(item)
        grid = np.linspace(-3.6, 3.6, 721)
        J = 1e4 * np.eye(3)
        infos = fisher_information_grid(gamma, grid)
        st = state_with(item, info=J)
        req = strict_d_optimal_batch(st, 1, grid)
        picked = req.targets[0].theta
        traces = np.trace(infos, axis1=1, axis2=2)
        assert picked == pytest.approx(grid[int(np.argmax(traces))], abs=1e-12)
        # boundary maxima are legitimate picks: the pool really is bounded
        assert -3.6 <= picked <= 3.6

    def test_beta_block_objective_symmetric_when_c_zero(self):
        # with c = 0 the (beta1, beta2) information block is symmetric about
        # b, so mirrored grid points tie in the 2x2 determinant objective
        gamma = to_gamma(ItemParams(1, 0, 1e-12))
        grid = np.linspace(-3.6, 3.6, 721)
        bb = fisher_information_grid(gamma, grid)[:, :2, :2]
        J2 = 50.0 * np.eye(2)
        dets = np.linalg.det(J2[None] + bb)
        np.testing.assert_allclose(dets, dets[::-1], rtol=1e-9)

    def test_objective_nondecreasing_across_batch(self):
        rng = np.random.default_rng(12)
        item = ItemParams(1.2, -0.5, 0.1)
        gamma = to_gamma(item)
        thetas = rng.uniform(-3.6, 3.6, 110)
        J0 = fisher_information_grid(gamma, thetas).sum(axis=0)
        st = state_with(item, info=J0)
        grid = np.linspace(-3.6, 3.6, 721)
        req = strict_d_optimal_batch(st, 15, grid)
        J = J0.copy()
        dets = [np.linalg.det(J)]
        for t in req.targets:
            J += fisher_information_grid(gamma, [t.theta])[0]
            dets.append(np.linalg.det(J))
        assert np.all(np.diff(dets) >= -1e-9 * np.abs(dets[:-1]))

    def test_batch_placed_at_determinant_argmax(self):
        item = ItemParams(1.0, 0.5, 0.1)
        gamma = to_gamma(item)
        grid = np.linspace(-3.6, 3.6, 721)
        J0 = fisher_information_grid(gamma, np.linspace(-3, 3, 110)).sum(axis=0)
        req = strict_d_optimal_batch(state_with(item, info=J0), 15, grid)
        picks = {t.theta for t in req.targets}
        assert len(picks) == 1  # the whole batch sits at one trait level
        dets = np.linalg.det(J0[None] + fisher_information_grid(gamma, grid))
        assert picks.pop() == pytest.approx(grid[int(np.argmax(dets))])

    def test_batch_of_15_from_fresh_state(self):
        rng = np.random.default_rng(13)
        item = ItemParams(1, 0, 0.1)
        thetas = rng.uniform(-3.6, 3.6, 110)
        J0 = fisher_information_grid(to_gamma(item), thetas).sum(axis=0)
        req = strict_d_optimal_batch(state_with(item, info=J0), 15, np.linspace(-3.6, 3.6, 721))
        assert req.total == 15
        assert len(req.targets) == 15
        assert all(t.tag is BatchTag.DOPT for t in req.targets)

    def test_picks_cluster_tighter_for_larger_a(self):
        # accumulate several successive batches: the chosen trait levels
        # stay in a narrower band around b when the discrimination is high
        grid = np.linspace(-3.6, 3.6, 721)
        spreads = {}
        for a in (0.5, 2.0):
            item = ItemParams(a, 0, 0.1)
            gamma = to_gamma(item)
            st = state_with(
                item,
                info=fisher_information_grid(gamma, np.linspace(-3.5, 3.5, 110)).sum(axis=0),
            )
            picks = []
            for _ in range(12):
                req = strict_d_optimal_batch(st, 15, grid)
                theta = req.targets[0].theta
                picks.append(theta)
                st.info = st.info + 15 * fisher_information_grid(gamma, [theta])[0]
            spreads[a] = np.std(picks)
        assert spreads[2.0] < spreads[0.5]


class TestRandomBatch:
    def test_truncated_normal_mass(self):
        rng = np.random.default_rng(14)
        req = random_batch(100_000, 1.16, rng)
        draws = np.array([t.theta for t in req.targets])
        frac = np.mean(np.abs(draws) < 3.0)
        assert 0.985 <= frac <= 0.996  # about 99% within (-3, 3)
        assert np.all((draws > -3.6) & (draws < 3.6))

    def test_sample_mean_near_zero(self):
        rng = np.random.default_rng(15)
        req = random_batch(100_000, 1.16, rng)
        draws = np.array([t.theta for t in req.targets])
        assert abs(draws.mean()) < 3 * 1.16 / math.sqrt(draws.size)

    def test_replay_identical_with_fixed_seed(self):
        r1 = random_batch(500, 1.16, np.random.default_rng(99))
        r2 = random_batch(500, 1.16, np.random.default_rng(99))
        assert r1 == r2

    def test_rejects_bad_sd(self):
        with pytest.raises(ValueError):
            random_batch(5, 0.0, np.random.default_rng(0))


class TestDesignConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            DesignConfig(p0=0.4)
        with pytest.raises(ValueError):
            DesignConfig(pool_min=2.0, pool_max=-2.0)
        with pytest.raises(ValueError):
            DesignConfig(batch_c=0)

    def test_dopt_grid(self):
        grid = dopt_grid(DesignConfig())
        assert grid.size == 721
        assert grid[0] == -3.6 and grid[-1] == 3.6
