import numpy as np
import pytest

from mcem.lattice import (
    AllFacilitating,
    Region,
    SpecError,
    all_neutral,
    validate_params,
)
from mcem.reachability import LegalPath, find_legal_path
from mcem.spectral import (
    block_relax_check,
    path_method_bound,
    var_transition_bound_check,
)

from conftest import east_chain, random_config, random_valid_spec


class TestVarianceTransitionBound:
    def test_constant_function(self, abc):
        lhs, rhs, ok = var_transition_bound_check(abc, np.full(abc.n_states, 3.0))
        assert lhs == pytest.approx(0.0) and rhs == pytest.approx(0.0) and ok

    def test_neutral_indicator_single_type(self):
        spec = validate_params(1, [(0,)], [0.3])
        f = np.array([1.0, 0.0])
        lhs, rhs, ok = var_transition_bound_check(spec, f)
        assert lhs == pytest.approx(0.21)
        assert rhs == pytest.approx(0.6)
        assert ok

    def test_thousand_random_instances(self):
        rng = np.random.default_rng(19)
        for _ in range(1000):
            spec = random_valid_spec(rng)
            f = rng.normal(size=spec.n_states) * rng.uniform(0.1, 10)
            lhs, rhs, ok = var_transition_bound_check(spec, f)
            assert ok, (spec.q, f, lhs, rhs)

    def test_shape_checked(self, abc):
        with pytest.raises(SpecError):
            var_transition_bound_check(abc, np.zeros(2))


class TestPathMethodBound:
    def test_trivial_path(self, abc):
        cfg = all_neutral(Region.box((0, 0), (1, 1)), AllFacilitating())
        path = LegalPath([cfg], [])
        lhs, rhs, ok = path_method_bound(abc, path, np.zeros(1))
        assert lhs == 0.0 and ok

    def test_east_pair_random_f(self, east1d):
        rng = np.random.default_rng(23)
        region, boundary = east_chain(2)
        omega = all_neutral(region, boundary)
        eta = omega.copy()
        eta.set((0,), 1)
        eta.set((1,), 1)
        path = find_legal_path(east1d, omega, eta)
        for _ in range(10):
            f = rng.normal(size=east1d.n_states ** 2)
            lhs, rhs, ok = path_method_bound(east1d, path, f)
            assert ok and lhs <= rhs + 1e-10 * rhs

    def test_hundred_random_bfs_paths(self, east1d):
        rng = np.random.default_rng(29)
        region, boundary = east_chain(3)
        checked = 0
        while checked < 100:
            a = random_config(rng, east1d, region, boundary)
            b = random_config(rng, east1d, region, boundary)
            path = find_legal_path(east1d, a, b)
            if path is None or path.length < 2:
                continue
            n_lam = len(
                {s.site for s in path.steps}
            )
            f = rng.normal(size=east1d.n_states ** n_lam)
            lhs, rhs, ok = path_method_bound(east1d, path, f)
            assert ok, (path.length, lhs, rhs)
            checked += 1

    def test_invalid_path_rejected(self, east1d):
        region, boundary = east_chain(2)
        a = all_neutral(region, boundary)
        b = a.copy()
        b.set((1,), 1)    # not facilitated: site 0 is neutral
        from mcem.reachability import PathStep

        path = LegalPath([a, b], [PathStep((1,), (0,), True)])
        with pytest.raises(SpecError):
            path_method_bound(east1d, path, np.zeros(east1d.n_states))


class TestBlockRelax:
    def test_full_event_two_block_decomposition(self):
        rng = np.random.default_rng(31)
        nu1 = np.array([0.25, 0.75])
        nu2 = np.array([0.5, 0.3, 0.2])
        f = rng.normal(size=(2, 3))
        event = np.array([True, True])
        lhs, rhs, ok = block_relax_check(nu1, nu2, event, f)
        assert ok

    def test_three_state_blocks_with_vacancy_event(self):
        rng = np.random.default_rng(37)
        q = np.array([0.7, 0.2, 0.1])
        f = rng.normal(size=(3, 3))
        event = np.array([False, True, False])   # probability q_B = 0.2
        lhs, rhs, ok = block_relax_check(q, q, event, f)
        assert ok

    def test_five_hundred_random_instances(self):
        rng = np.random.default_rng(41)
        for _ in range(500):
            n1 = int(rng.integers(2, 5))
            n2 = int(rng.integers(2, 5))
            nu1 = rng.dirichlet(np.ones(n1))
            nu2 = rng.dirichlet(np.ones(n2))
            event = rng.random(n1) < 0.6
            if not event.any():
                event[int(rng.integers(n1))] = True
            f = rng.normal(size=(n1, n2)) * rng.uniform(0.1, 5)
            lhs, rhs, ok = block_relax_check(nu1, nu2, event, f)
            assert ok, (nu1, nu2, event, lhs, rhs)

    def test_zero_measure_event_rejected(self):
        with pytest.raises(SpecError):
            block_relax_check(
                np.array([0.5, 0.5]),
                np.array([1.0]),
                np.array([False, False]),
                np.zeros((2, 1)),
            )
