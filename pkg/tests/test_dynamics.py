import itertools
import math

import numpy as np
import pytest

from mcem.lattice import (
    NEUTRAL,
    AllFacilitating,
    Closed,
    Configuration,
    Frozen,
    Region,
    SpecError,
    all_neutral,
    required_frame_sites,
    validate_params,
)
from mcem.dynamics import (
    detailed_balance_check,
    empirical_marginals,
    enumerate_transitions,
    kmc_run,
    legal_ring,
)

from conftest import random_boundary, random_config, random_valid_spec


def blocked_core_config(h2_full):
    region = Region.box((0, 0), (2, 2))
    cfg = all_neutral(region, Closed())
    for h in h2_full.types:
        site = tuple(1 - b for b in h)
        cfg.set(site, h2_full.code(h))
    return cfg


class TestLegalRing:
    def setup_method(self):
        self.spec = validate_params(2, [(0, 0), (1, 1)], [0.2, 0.1])
        region = Region.box((0, 0), (2, 2))
        self.cfg = all_neutral(region, Closed())
        self.a = self.spec.code((0, 0))
        self.b = self.spec.code((1, 1))

    def test_rule_a_vacancy_to_neutral(self):
        self.cfg.set((0, 0), self.a)
        self.cfg.set((1, 0), self.a)    # facilitated from the west
        assert legal_ring(self.spec, self.cfg, (1, 0), NEUTRAL) == NEUTRAL

    def test_rule_b_requires_constraint(self):
        assert legal_ring(self.spec, self.cfg, (1, 0), self.b) is None
        self.cfg.set((1, 1), self.b)    # b facilitates from north-east side
        assert legal_ring(self.spec, self.cfg, (1, 0), self.b) == self.b

    def test_rule_c_noop_is_legal(self):
        self.cfg.set((0, 0), self.a)
        self.cfg.set((1, 0), self.a)
        assert legal_ring(self.spec, self.cfg, (1, 0), self.a) == self.a

    def test_no_vacancy_to_vacancy(self):
        self.cfg.set((0, 0), self.a)
        self.cfg.set((1, 0), self.a)
        self.cfg.set((2 - 1, 1), self.b)
        assert legal_ring(self.spec, self.cfg, (1, 0), self.b) is None

    def test_neutral_mark_on_neutral_site(self):
        assert legal_ring(self.spec, self.cfg, (0, 0), NEUTRAL) is None


class TestEnumerateTransitions:
    def test_single_site_all_facilitating(self):
        spec = validate_params(2, [(0, 0), (1, 1)], [0.2, 0.1])
        region = Region.box((0, 0), (1, 1))
        cfg = all_neutral(region, AllFacilitating())
        trs = enumerate_transitions(spec, cfg)
        got = {(t.h, t.to_vacancy, t.rate) for t in trs}
        assert got == {((0, 0), True, 0.2), ((1, 1), True, 0.1)}

    def test_all_neutral_closed_empty(self, abc):
        cfg = all_neutral(Region.box((0, 0), (3, 3)))
        assert enumerate_transitions(abc, cfg) == []

    def test_blocked_core_has_no_transitions(self, h2_full):
        cfg = blocked_core_config(h2_full)
        assert enumerate_transitions(h2_full, cfg) == []

    def test_rates_are_only_q_and_p(self, abc):
        rng = np.random.default_rng(3)
        region = Region.box((0, 0), (2, 3))
        for _ in range(10):
            boundary = random_boundary(rng, abc, region)
            cfg = random_config(rng, abc, region, boundary)
            for tr in enumerate_transitions(abc, cfg):
                assert tr.rate in set(abc.q) | {abc.p}


class TestKmcRun:
    def test_zero_time(self, abc):
        cfg = all_neutral(Region.box((0, 0), (2, 2)), AllFacilitating())
        traj = kmc_run(abc, cfg, 0.0, np.random.default_rng(0))
        assert traj.events == []
        assert traj.final == cfg

    @pytest.mark.parametrize("engine", ["clock", "gillespie"])
    def test_blocked_core_frozen(self, h2_full, engine):
        cfg = blocked_core_config(h2_full)
        traj = kmc_run(h2_full, cfg, 25.0, np.random.default_rng(4), engine=engine)
        assert traj.events == []
        assert traj.final == cfg

    @pytest.mark.parametrize("engine", ["clock", "gillespie"])
    def test_single_site_occupancy(self, engine):
        # two-state chain: occupancy of the neutral state converges to p
        spec = validate_params(1, [(0,)], [0.3])
        cfg = all_neutral(Region.box((0,), (1,)), AllFacilitating())
        t_max = 4000.0
        traj = kmc_run(spec, cfg, t_max, np.random.default_rng(8), engine=engine)
        occ = empirical_marginals(traj, burn_in=50.0, n_states=2)
        # effective samples ~ number of switches; binomial-style 3 sigma
        n_eff = max(len(traj.events) / 2.0, 1.0)
        sigma = math.sqrt(0.7 * 0.3 / n_eff)
        assert abs(occ[0, NEUTRAL] - 0.7) <= 3 * sigma + 0.01

    def test_replay_reproduces_final(self, abc):
        cfg = all_neutral(Region.box((0, 0), (2, 2)), AllFacilitating())
        traj = kmc_run(abc, cfg, 5.0, np.random.default_rng(5))
        assert traj.replay() == traj.final

    def test_deterministic_given_seed(self, abc):
        cfg = all_neutral(Region.box((0, 0), (2, 2)), AllFacilitating())
        t1 = kmc_run(abc, cfg, 5.0, np.random.default_rng(6))
        t2 = kmc_run(abc, cfg, 5.0, np.random.default_rng(6))
        assert t1.events == t2.events

    def test_engines_agree_in_law(self, abc):
        # mean neutral density over repeated runs matches between engines
        cfg = all_neutral(Region.box((0, 0), (2, 2)), AllFacilitating())
        means = {}
        for engine in ("clock", "gillespie"):
            vals = []
            for s in range(60):
                traj = kmc_run(
                    abc, cfg, 6.0, np.random.default_rng(100 + s), engine=engine
                )
                vals.append(float(np.mean(traj.final.states == NEUTRAL)))
            means[engine] = (np.mean(vals), np.std(vals) / math.sqrt(len(vals)))
        diff = abs(means["clock"][0] - means["gillespie"][0])
        se = math.hypot(means["clock"][1], means["gillespie"][1])
        assert diff <= 3.5 * se + 1e-9

    def test_pathwise_legality(self, abc):
        from mcem.dynamics import legal_ring

        cfg = all_neutral(Region.box((0, 0), (2, 2)), AllFacilitating())
        traj = kmc_run(abc, cfg, 8.0, np.random.default_rng(9))
        work = traj.initial.copy()
        for t, i, old, new in traj.events:
            mark = new if new != NEUTRAL else NEUTRAL
            assert legal_ring(abc, work, work.region.coord(i), mark) == mark
            work.states[i] = new


class TestDetailedBalance:
    def test_one_by_two_frozen(self, abc):
        rng = np.random.default_rng(10)
        region = Region.box((0, 0), (1, 2))
        frame = {y: int(rng.integers(0, abc.n_states))
                 for y in required_frame_sites(abc, region)}
        worst = detailed_balance_check(abc, region, Frozen(frame))
        assert worst <= 1e-12

    def test_single_site_all_facilitating(self, abc):
        worst = detailed_balance_check(
            abc, Region.box((0, 0), (1, 1)), AllFacilitating()
        )
        assert worst <= 1e-15

    def test_corrupted_rate_detected(self, abc):
        region = Region.box((0, 0), (1, 2))

        def bad_rates(to_vacancy, code):
            if to_vacancy:
                return abc.q_of(code) * (1.1 if code == 1 else 1.0)
            return abc.p

        worst = detailed_balance_check(abc, region, Closed(), rates=bad_rates)
        assert worst > 1e-6


class TestEmpiricalMarginals:
    def test_frozen_trajectory(self, h2_full):
        cfg = blocked_core_config(h2_full)
        traj = kmc_run(h2_full, cfg, 2.0, np.random.default_rng(1))
        occ = empirical_marginals(traj, n_states=h2_full.n_states)
        for i in range(cfg.region.size):
            assert occ[i, cfg.states[i]] == pytest.approx(1.0)

    def test_rows_sum_to_one(self, abc):
        cfg = all_neutral(Region.box((0, 0), (2, 2)), AllFacilitating())
        traj = kmc_run(abc, cfg, 20.0, np.random.default_rng(2))
        occ = empirical_marginals(traj, burn_in=1.0, n_states=abc.n_states)
        assert np.allclose(occ.sum(axis=1), 1.0, atol=1e-12)

    def test_burn_in_precondition(self, abc):
        cfg = all_neutral(Region.box((0, 0), (2, 2)), AllFacilitating())
        traj = kmc_run(abc, cfg, 1.0, np.random.default_rng(3))
        with pytest.raises(SpecError):
            empirical_marginals(traj, burn_in=1.0)

    def test_ergodic_box_matches_nu(self, abc):
        # batch-means standard error over one long run
        cfg = all_neutral(Region.box((0, 0), (2, 2)), AllFacilitating())
        n_batches, batch_t, burn = 16, 150.0, 20.0
        total = burn + n_batches * batch_t
        traj = kmc_run(abc, cfg, total, np.random.default_rng(21), engine="gillespie")
        nu = abc.state_probs()
        per_batch = np.zeros((n_batches, cfg.region.size, abc.n_states))
        events = traj.events
        work = traj.initial.copy()
        ei = 0
        for b in range(n_batches):
            t0, t1 = burn + b * batch_t, burn + (b + 1) * batch_t
            while ei < len(events) and events[ei][0] <= t0:
                work.states[events[ei][1]] = events[ei][3]
                ei += 1
            seg = work.copy()
            last = np.full(cfg.region.size, t0)
            j = ei
            while j < len(events) and events[j][0] <= t1:
                t, i, old, new = events[j]
                per_batch[b, i, old] += t - last[i]
                last[i] = t
                seg.states[i] = new
                j += 1
            for i in range(cfg.region.size):
                per_batch[b, i, seg.states[i]] += t1 - last[i]
        per_batch /= batch_t
        mean = per_batch.mean(axis=0)
        se = per_batch.std(axis=0, ddof=1) / math.sqrt(n_batches)
        for i in range(cfg.region.size):
            for s in range(abc.n_states):
                assert abs(mean[i, s] - nu[s]) <= 3 * se[i, s] + 0.02


class TestStationarity:
    def test_distribution_preserved_from_mu_sample(self, abc):
        # start at an exact product sample on an ergodic box; the state at a
        # later time keeps the product marginals (3 sigma over seeds)
        from mcem.lattice import sample_config

        region = Region.box((0, 0), (1, 2))
        boundary = AllFacilitating()
        n_runs = 400
        t_obs = 0.5
        counts = np.zeros((region.size, abc.n_states))
        for s in range(n_runs):
            rng = np.random.default_rng(5000 + s)
            cfg = sample_config(abc, region, boundary, rng)
            traj = kmc_run(abc, cfg, t_obs, rng, engine="gillespie")
            for i in range(region.size):
                counts[i, traj.final.states[i]] += 1
        nu = abc.state_probs()
        for i in range(region.size):
            for st in range(abc.n_states):
                p = nu[st]
                sigma = math.sqrt(n_runs * p * (1 - p))
                assert abs(counts[i, st] - n_runs * p) <= 3.5 * sigma


class TestFrozenBoundaryDynamics:
    def test_frame_facilitates_but_never_updates(self, east1d):
        region = Region.box((0,), (2,))
        frame = {(-1,): east1d.code((0,))}    # a vacancy frozen left of the chain
        boundary = Frozen(frame)
        cfg = all_neutral(region, boundary)
        traj = kmc_run(east1d, cfg, 50.0, np.random.default_rng(12))
        assert len(traj.events) > 0            # the frame drives site 0
        assert boundary.frame == frame         # and is never written
        occ = empirical_marginals(traj, burn_in=5.0, n_states=2)
        assert 0.1 < occ[0, NEUTRAL] < 1.0
