import math

import numpy as np
import pytest

from songoku.combinators import CombinatorConfig
from songoku.records import parse_csv, tasks_from_mask
from songoku.scheduler import (
    SchedulerConfig,
    active_set,
    anneal_tau,
    apply_update,
    init_state,
    refresh,
    run,
)
from songoku.sim import (
    PlantedOracle,
    QuadraticOracle,
    make_planted_suite,
    reference_block_diagonal_instance,
)


def small_cfg(**kw):
    base = dict(K=4, d=6, T=64, R=8, beta=0.8, tau_star=0.5, seed=3)
    base.update(kw)
    return SchedulerConfig(**base)


class TestConfig:
    def test_horizon_defaults_to_4R(self):
        assert small_cfg(R=16).horizon == 64
        assert small_cfg(R=16, anneal_horizon=5).horizon == 5

    def test_step_size_rules(self):
        cfg = small_cfg(T=400, eta=2.0, eta_rule="const_over_sqrt_T")
        assert cfg.step_size() == pytest.approx(0.1)
        assert small_cfg(eta=2.0).step_size() == 2.0

    @pytest.mark.parametrize(
        "kw",
        [
            {"K": 0},
            {"d": 0},
            {"T": -1},
            {"R": 0},
            {"tau_star": 0.0},
            {"tau_star": 1.0001},
            {"beta": 1.0},
            {"T_warm": 64},
            {"f_min": 0},
            {"eta": 0.0},
            {"eta_rule": "warp"},
            {"anneal_a": 0.0},
            {"anneal_horizon": 0},
        ],
    )
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            small_cfg(**kw)

    def test_tau_star_one_allowed(self):
        cfg = small_cfg(tau_star=1.0)
        assert anneal_tau(10_000, cfg) == 1.0


class TestAnnealTau:
    def test_warmup_pins_to_one(self):
        cfg = small_cfg(T_warm=10)
        for t in range(10):
            assert anneal_tau(t, cfg) == 1.0

    def test_glide_start_and_clamp(self):
        cfg = small_cfg(T_warm=4, anneal_horizon=32)
        assert anneal_tau(4, cfg) == 1.0  # s = 0
        assert anneal_tau(4 + 32, cfg) == 0.5
        assert anneal_tau(4 + 33, cfg) == 0.5
        assert anneal_tau(10_000, cfg) == 0.5

    def test_midpoint_value(self):
        cfg = small_cfg(T_warm=0, anneal_horizon=128, tau_star=0.5, anneal_a=9.0)
        expect = 1.0 - 0.5 * math.log1p(9 * 64) / math.log1p(9 * 128)
        assert anneal_tau(64, cfg) == pytest.approx(expect)
        assert anneal_tau(64, cfg) == pytest.approx(0.549097, abs=1e-6)

    def test_monotone_nonincreasing(self):
        cfg = small_cfg(T_warm=7, anneal_horizon=50, tau_star=0.3)
        vals = [anneal_tau(t, cfg) for t in range(80)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
        assert vals[0] == 1.0 and vals[-1] == pytest.approx(0.3)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            anneal_tau(-1, small_cfg())


class TestStateAndUpdates:
    def test_init_state_installs_all_task_window(self):
        state = init_state(small_cfg())
        assert state.schedule.m == 1
        assert active_set(state, 0) == (0, 1, 2, 3)
        assert state.tau == 1.0
        assert state.stats.included_count() == 0

    def test_init_theta_shape_checked(self):
        with pytest.raises(ValueError):
            init_state(small_cfg(), theta0=np.zeros(5))

    def test_apply_update_sums_active_gradients(self):
        state = init_state(small_cfg(d=2))
        apply_update(
            state, (0, 1), {0: np.array([1.0, 0.0]), 1: np.array([0.0, 2.0])}, None, 0.5
        )
        np.testing.assert_allclose(state.theta, [-0.5, -1.0])

    def test_apply_update_rejects_mismatches(self):
        state = init_state(small_cfg(d=2))
        with pytest.raises(ValueError, match="missing"):
            apply_update(state, (0, 1), {0: np.zeros(2)}, None, 0.1)
        with pytest.raises(ValueError, match="inactive"):
            apply_update(
                state, (0,), {0: np.zeros(2), 2: np.zeros(2)}, None, 0.1
            )

    def test_task_parameter_updates(self):
        state = init_state(small_cfg(d=2, d_phi=3))
        apply_update(
            state, (1,), {1: np.zeros(2)}, {1: np.array([1.0, 1.0, 1.0])}, 0.1
        )
        np.testing.assert_allclose(state.phi[1], [-0.1, -0.1, -0.1])
        np.testing.assert_allclose(state.phi[0], 0.0)
        with pytest.raises(ValueError, match="inactive"):
            apply_update(state, (1,), {1: np.zeros(2)}, {0: np.ones(3)}, 0.1)

    def test_refresh_rebuilds_from_probes(self):
        state = init_state(small_cfg(K=2, d=2))
        probes = [np.array([1.0, 0.0]), np.array([-1.0, 0.0])]
        refresh(state, probes, tau=0.5)
        assert state.graph.edges == {(0, 1)}
        assert state.schedule.m == 2
        assert state.r == 1 and state.tau == 0.5

    def test_refresh_degenerate_falls_back(self):
        state = init_state(small_cfg(K=2, d=2))
        refresh(state, [np.zeros(2), np.zeros(2)], tau=0.5)
        assert state.schedule.m == 1
        assert state.graph.edges == frozenset()

    def test_frozen_state_keeps_schedule_but_tracks_stats(self):
        state = init_state(small_cfg(K=2, d=2, freeze_after_first_coloring=True))
        refresh(state, [np.array([1.0, 0.0]), np.array([-1.0, 0.0])], tau=0.5)
        assert state.frozen
        before = state.schedule.base_classes
        refresh(state, [np.array([1.0, 0.0]), np.array([1.0, 0.0])], tau=0.5)
        assert state.schedule.base_classes == before  # grouping pinned
        assert state.stats.steps.tolist() == [2, 2]   # statistics still advance

    def test_active_set_cycles_through_slots(self):
        state = init_state(small_cfg(K=2, d=2))
        refresh(state, [np.array([1.0, 0.0]), np.array([-1.0, 0.0])], tau=0.5)
        state.t_r = 8
        sets = [active_set(state, t) for t in range(8, 12)]
        assert sets[0] != sets[1]
        assert sets[0] == sets[2] and sets[1] == sets[3]


def planted_oracle(seed=0, sigma=0.5, K=4, d=6):
    suite = make_planted_suite(
        K=K, d=d, groups=2, tau=0.5, gamma=0.3, sigma=sigma, m0=1.0, seed=seed
    )
    return PlantedOracle(suite)


class TestRun:
    def test_zero_steps_is_empty(self):
        record = run(small_cfg(T=0), planted_oracle())
        assert record.steps == [] and record.windows == []

    def test_refresh_cadence_and_window_count(self):
        record = run(small_cfg(T=64, R=16), planted_oracle())
        flags = [row.t for row in record.steps if row.refresh]
        assert flags == [15, 31, 47, 63]
        assert [w.t_start for w in record.windows] == [0, 16, 32, 48, 64]

    def test_warmup_rows_pin_tau(self):
        record = run(small_cfg(T=32, T_warm=12, R=8), planted_oracle())
        for row in record.steps:
            if row.t < 12:
                assert row.tau == 1.0

    def test_same_seed_bit_identical(self):
        cfg = small_cfg(T=48, R=8)
        a = run(cfg, planted_oracle(seed=5))
        b = run(cfg, planted_oracle(seed=5))
        assert a.to_csv() == b.to_csv()
        assert a.content_hash() == b.content_hash()

    def test_different_seed_differs(self):
        a = run(small_cfg(T=48, seed=1), planted_oracle(seed=5))
        b = run(small_cfg(T=48, seed=2), planted_oracle(seed=5))
        assert a.to_csv() != b.to_csv()

    def test_active_sets_respect_windows(self):
        record = run(small_cfg(T=64, R=8, K=4), planted_oracle(sigma=0.1))
        by_window = {}
        for w, nxt in zip(record.windows, record.windows[1:] + [None]):
            end = nxt.t_start if nxt else len(record.steps)
            for row in record.steps[w.t_start:end]:
                by_window.setdefault(w.r, set()).add(tasks_from_mask(row.active_mask))
        # every observed active set within a window is one of its slots
        for w in record.windows:
            if w.r not in by_window:
                continue
            slots = set()
            extras = dict(w.extra_slots)
            for s, cls in enumerate(w.classes, start=1):
                slots.add(tuple(sorted(set(cls) | set(extras.get(s, ())))))
            assert by_window[w.r] <= slots

    def test_loss_logged_before_update(self):
        quad, groups, theta0, eta = reference_block_diagonal_instance()
        oracle = QuadraticOracle(quad, theta0)
        cfg = SchedulerConfig(K=2, d=4, T=8, R=4, eta=eta, seed=0, beta=0.5)
        record = run(cfg, oracle)
        assert record.steps[0].loss == pytest.approx(quad.total_loss(theta0))
        # losses strictly decrease on this convex instance
        losses = [row.loss for row in record.steps]
        assert losses[-1] < losses[0]

    def test_permute_classes_changes_order_not_partition(self):
        base = run(small_cfg(T=64, R=8), planted_oracle(sigma=0.0))
        perm = run(
            small_cfg(T=64, R=8, permute_classes=True), planted_oracle(sigma=0.0)
        )
        for wa, wb in zip(base.windows, perm.windows):
            assert frozenset(frozenset(c) for c in wa.classes) == frozenset(
                frozenset(c) for c in wb.classes
            )

    def test_csv_roundtrip(self):
        record = run(small_cfg(T=24, R=8), planted_oracle())
        rows = parse_csv(record.to_csv())
        assert len(rows) == 24
        assert rows[0].t == 0 and rows[-1].refresh
