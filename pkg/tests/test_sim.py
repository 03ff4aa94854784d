import warnings

import numpy as np
import pytest

from aoi_mfg import (
    bisection_lambda,
    default_types,
    error_weight,
    game_scenario,
    make_streams,
    population_for,
    run_estimator_experiment,
    run_game_experiment,
    run_scheduling_experiment,
    scheduling_scenario,
    solve_mfe,
    step_channel,
    update_aoi,
)
from aoi_mfg.model import AgentType, ScenarioConfig
from aoi_mfg.scheduler import RelaxedPolicy


def fixed_policy(N, threshold, q=1.0, klow=None):
    klow = threshold if klow is None else klow
    return RelaxedPolicy(klow=np.full(N, klow), kbar=np.full(N, threshold), q=q,
                         lam_low=0.0, lam_high=0.0, rate_low=0.0, rate_high=0.0,
                         per_type={})


@pytest.fixture(scope="module")
def sched_setup():
    cfg = scheduling_scenario(N=100, T=1500, seed=1)
    policy = bisection_lambda(population_for(cfg), cfg.p, cfg.capacity)
    return cfg, policy


class TestPrimitives:
    def test_update_aoi(self):
        assert update_aoi(5, 1) == 0
        assert update_aoi(5, 0) == 6
        with pytest.raises(ValueError):
            update_aoi(-1, 0)

    def test_channel_perfect(self):
        rng = np.random.default_rng(0)
        zeta = np.array([1, 0, 1], dtype=bool)
        assert np.array_equal(step_channel(zeta, 0.0, rng), zeta)

    def test_channel_total_loss(self):
        rng = np.random.default_rng(0)
        zeta = np.ones(10, dtype=bool)
        # p -> 1: survival requires draw >= p, which has probability 0 at p=1
        out = step_channel(zeta, 1.0 - 1e-12, rng)
        assert not out.any()

    def test_channel_success_rate(self):
        rng = np.random.default_rng(123)
        zeta = np.ones(10**6, dtype=bool)
        out = step_channel(zeta, 0.2, rng)
        assert out.mean() == pytest.approx(0.8, abs=0.002)

    def test_streams_deterministic_and_distinct(self):
        a = make_streams(99)
        b = make_streams(99)
        assert a["channel"].random(5) == pytest.approx(b["channel"].random(5))
        c = make_streams(99)
        assert not np.allclose(c["channel"].random(5), c["noise"].random(5))


class TestSchedulingExperiment:
    def test_deterministic(self, sched_setup):
        cfg, policy = sched_setup
        m1 = run_scheduling_experiment(cfg, policy, "matb", seed=5)
        m2 = run_scheduling_experiment(cfg, policy, "matb", seed=5)
        assert m1.j_bs == m2.j_bs
        assert np.array_equal(m1.aoi_hist, m2.aoi_hist)
        m3 = run_scheduling_experiment(cfg, policy, "matb", seed=6)
        assert m1.j_bs != m3.j_bs

    def test_capacity_respected(self, sched_setup):
        cfg, policy = sched_setup
        m = run_scheduling_experiment(cfg, policy, "matb", seed=2)
        assert m.attempts <= cfg.capacity * cfg.T

    def test_always_transmit_zero_cost_in_relaxed_mode(self):
        # perfect channel, threshold 0, no projection: AoI pinned at 0
        cfg = scheduling_scenario(N=4, alpha=0.5, p=0.0, T=100)
        m = run_scheduling_experiment(cfg, fixed_policy(4, 0), "relaxed", seed=0)
        assert m.j_bs == 0.0
        assert m.max_aoi == 0

    def test_common_random_numbers_order_costs(self, sched_setup):
        cfg, policy = sched_setup
        rel, matb = run_scheduling_experiment(cfg, policy, "both", seed=3)
        assert matb.j_bs >= rel.j_bs - 1e-9

    def test_histogram_accounts_every_step(self, sched_setup):
        cfg, policy = sched_setup
        m = run_scheduling_experiment(cfg, policy, "matb", seed=4)
        assert m.aoi_hist.sum() == cfg.N * cfg.T

    def test_unknown_mode_rejected(self, sched_setup):
        cfg, policy = sched_setup
        with pytest.raises(ValueError):
            run_scheduling_experiment(cfg, policy, "other")


@pytest.fixture(scope="module")
def mfe():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return solve_mfe(default_types())


class TestGameExperiment:
    def test_deterministic(self, mfe):
        cfg = game_scenario(N=30, T=120)
        policy = bisection_lambda(population_for(cfg), cfg.p, cfg.capacity)
        m1 = run_game_experiment(cfg, mfe, policy, seed=8)
        m2 = run_game_experiment(cfg, mfe, policy, seed=8)
        assert np.array_equal(m1.per_agent_cost, m2.per_agent_cost)
        assert np.array_equal(m1.consensus_error, m2.consensus_error)

    def test_noiseless_symmetric_population_matches_mean_field(self):
        # one type, (almost) zero noise and spread: every agent follows the
        # deterministic mean trajectory, so the consensus error vanishes
        t = AgentType(label="only", A=0.5, B=0.1269, C_W=1e-12, Q=2.0, R=2.0,
                      x0_mean=3.0, x0_cov=1e-16, prob=1.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sol = solve_mfe((t,))
        cfg = ScenarioConfig(N=8, capacity=7, p=0.0, T=150, types=(t,))
        policy = fixed_policy(8, 0)
        m = run_game_experiment(cfg, sol, policy, seed=0)
        assert m.mean_field_gap < 1e-6

    def test_costs_finite_and_positive(self, mfe):
        cfg = game_scenario(N=30, T=120)
        policy = bisection_lambda(population_for(cfg), cfg.p, cfg.capacity)
        m = run_game_experiment(cfg, mfe, policy, seed=1)
        assert np.all(np.isfinite(m.per_agent_cost))
        assert np.all(m.per_agent_cost > 0)

    def test_initial_age_convention_insensitive(self, sched_setup):
        # long-run scheduling averages barely move if decoders start stale
        cfg, policy = sched_setup
        base = run_scheduling_experiment(cfg, policy, "matb", seed=9)
        import aoi_mfg.sim as sim

        def run_with_offset(offset):
            rng = sim.make_streams(9)
            N, T, C, p = cfg.N, cfg.T, cfg.capacity, cfg.p
            costs = sim._CostTables(population_for(cfg))
            tau = np.full(N, offset, dtype=np.int64)
            cost_sum = 0.0
            for _ in range(T):
                coins = rng["coin"].random(N)
                draws = rng["channel"].random(N)
                a = sim._intents(tau, policy, coins)
                zeta = sim._project(a, tau, C)
                recv = zeta & (draws >= p)
                cost_sum += costs.step_cost(tau)
                tau = np.where(recv, 0, tau + 1)
            return cost_sum / (T * N)

        shifted = run_with_offset(5)
        assert shifted == pytest.approx(base.j_bs, rel=0.05)


class TestEstimatorExperiment:
    def test_conditional_error_matches_weight(self):
        cfg = scheduling_scenario(N=100, T=4000, seed=11)
        policy = fixed_policy(100, 12)
        out = run_estimator_experiment(cfg, policy, seed=11, tau_cap=6)
        pop = population_for(cfg)
        cond = out["cond_sum_sq"] / np.maximum(out["cond_count"], 1)
        for i, t in enumerate(pop.types):
            for tau in range(1, 7):
                want = error_weight(tau, t.A, t.C_W)
                assert cond[i, tau] == pytest.approx(want, rel=0.1)

    def test_zero_age_zero_error(self):
        cfg = scheduling_scenario(N=50, T=500, seed=2)
        policy = fixed_policy(50, 2)
        out = run_estimator_experiment(cfg, policy, seed=2, tau_cap=4)
        assert np.all(out["cond_sum_sq"][:, 0] == 0.0)

    def test_snapshots_shape(self):
        cfg = scheduling_scenario(N=50, T=200, seed=3)
        policy = fixed_policy(50, 3)
        out = run_estimator_experiment(cfg, policy, seed=3, sample_ks=(10, 50))
        assert set(out["snapshots"]) == {10, 50}
        assert out["snapshots"][10].shape == (50, 1)
