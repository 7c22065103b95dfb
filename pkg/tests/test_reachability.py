import itertools

import numpy as np
import pytest

from mcem.lattice import (
    NEUTRAL,
    AllFacilitating,
    Closed,
    Configuration,
    Region,
    all_neutral,
    validate_params,
)
from mcem.dynamics import enumerate_state_space, legal_ring
from mcem.reachability import (
    LegalPath,
    PathStep,
    find_legal_path,
    is_blocked_core,
    is_colourful,
    is_good_box,
    reachable_set,
    reachability_classes,
    verify_legal_path,
)
from mcem.paths import star_spec_2d

from conftest import east_chain, random_boundary, random_config, random_valid_spec


def blocked_core_config(h2_full):
    cfg = all_neutral(Region.box((0, 0), (2, 2)), Closed())
    for h in h2_full.types:
        cfg.set(tuple(1 - b for b in h), h2_full.code(h))
    return cfg


class TestBlockedCore:
    def test_blocked_pattern(self, h2_full):
        cfg = blocked_core_config(h2_full)
        assert is_blocked_core(h2_full, cfg)

    def test_all_neutral_not_blocked(self, h2_full):
        cfg = all_neutral(Region.box((0, 0), (2, 2)), Closed())
        assert not is_blocked_core(h2_full, cfg)

    def test_perturbed_core_not_blocked(self, h2_full):
        cfg = blocked_core_config(h2_full)
        cfg.set((0, 0), NEUTRAL)
        assert not is_blocked_core(h2_full, cfg)

    def test_translated_core(self, h2_full):
        region = Region.box((0, 0), (3, 3))
        cfg = all_neutral(region, Closed())
        for h in h2_full.types:
            cfg.set(tuple(1 - b + 1 for b in h), h2_full.code(h))
        assert is_blocked_core(h2_full, cfg, origin=(1, 1))
        assert not is_blocked_core(h2_full, cfg)

    def test_smaller_g_is_false(self, abc):
        cfg = all_neutral(Region.box((0, 0), (2, 2)), Closed())
        assert not is_blocked_core(abc, cfg)


def brute_force_classes(spec, region, boundary):
    """Independent oracle: adjacency through legal_ring over all marks."""
    states = enumerate_state_space(spec, region)
    keys = [states[i].tobytes() for i in range(states.shape[0])]
    index = {k: i for i, k in enumerate(keys)}
    adj = [[] for _ in keys]
    for i in range(states.shape[0]):
        cfg = Configuration(region, states[i].copy(), boundary)
        for si, x in enumerate(region.sites):
            for mark in range(spec.n_states):
                new = legal_ring(spec, cfg, x, mark)
                if new is not None and new != cfg.states[si]:
                    other = states[i].copy()
                    other[si] = new
                    adj[i].append(index[other.tobytes()])
    seen = [False] * len(keys)
    classes = []
    for i in range(len(keys)):
        if seen[i]:
            continue
        stack, cls = [i], set()
        seen[i] = True
        while stack:
            j = stack.pop()
            cls.add(keys[j])
            for m in adj[j]:
                if not seen[m]:
                    seen[m] = True
                    stack.append(m)
        classes.append(cls)
    return classes


class TestReachableSet:
    def test_blocked_core_is_singleton(self, h2_full):
        cfg = blocked_core_config(h2_full)
        reached = reachable_set(h2_full, cfg)
        assert len(reached) == 1 and not reached.truncated

    def test_single_facilitated_site(self):
        spec = validate_params(2, [(0, 0)], [0.3])
        cfg = all_neutral(Region.box((0, 0), (1, 1)), AllFacilitating())
        assert len(reachable_set(spec, cfg)) == 2

    def test_east_chain_fully_reachable(self, east1d):
        region, boundary = east_chain(3)
        cfg = all_neutral(region, boundary)
        reached = reachable_set(east1d, cfg)
        oracle = brute_force_classes(east1d, region, boundary)
        assert len(oracle) == 1
        assert reached.keys == oracle[0]
        assert len(reached) == 8

    def test_classes_match_oracle_on_random_instances(self):
        rng = np.random.default_rng(17)
        for _ in range(6):
            spec = random_valid_spec(rng, d=2, max_types=3)
            region = Region.box((0, 0), (2, 2))
            boundary = random_boundary(rng, spec, region)
            mine = {frozenset(c.keys) for c in
                    reachability_classes(spec, region, boundary)}
            oracle = {frozenset(c) for c in
                      brute_force_classes(spec, region, boundary)}
            assert mine == oracle

    def test_symmetry(self, abc):
        rng = np.random.default_rng(23)
        region = Region.box((0, 0), (2, 2))
        boundary = AllFacilitating(frozenset({(0, 0)}))
        for _ in range(5):
            a = random_config(rng, abc, region, boundary)
            b = random_config(rng, abc, region, boundary)
            assert (b in reachable_set(abc, a)) == (a in reachable_set(abc, b))

    def test_cap_truncates(self, east1d):
        region, boundary = east_chain(4)
        cfg = all_neutral(region, boundary)
        reached = reachable_set(east1d, cfg, cap=3)
        assert reached.truncated and len(reached) == 3


class TestFindLegalPath:
    def test_identity_path(self, abc):
        cfg = all_neutral(Region.box((0, 0), (2, 2)), AllFacilitating())
        path = find_legal_path(abc, cfg, cfg)
        assert path.length == 1 and path.steps == []

    def test_blocked_core_unreachable(self, h2_full):
        cfg = blocked_core_config(h2_full)
        other = cfg.copy()
        other.set((0, 0), NEUTRAL)
        assert find_legal_path(h2_full, cfg, other) is None

    def test_east_pair_fill(self, east1d):
        region, boundary = east_chain(2)
        omega = all_neutral(region, boundary)
        eta = omega.copy()
        eta.set((0,), 1)
        eta.set((1,), 1)
        path = find_legal_path(east1d, omega, eta)
        assert path.length == 3
        assert verify_legal_path(east1d, path).valid

    def test_found_paths_verify(self, abc):
        rng = np.random.default_rng(31)
        region = Region.box((0, 0), (1, 3))
        boundary = AllFacilitating(frozenset({(0, 0)}))
        for _ in range(10):
            a = random_config(rng, abc, region, boundary)
            b = random_config(rng, abc, region, boundary)
            path = find_legal_path(abc, a, b)
            if path is not None:
                assert verify_legal_path(abc, path).valid


class TestVerifyLegalPath:
    def test_vacancy_to_vacancy_flip_rejected(self, abc):
        region, boundary = Region.box((0, 0), (1, 1)), AllFacilitating()
        a = all_neutral(region, boundary)
        b = a.copy()
        b.set((0, 0), 1)
        c = b.copy()
        c.set((0, 0), 2)
        path = LegalPath(
            [a, b, c],
            [PathStep((0, 0), abc.types[0], True),
             PathStep((0, 0), abc.types[1], True)],
        )
        report = verify_legal_path(abc, path)
        assert not report.valid and report.first_bad_index == 1

    def test_unconstrained_flip_rejected(self, abc):
        region = Region.box((0, 0), (2, 2))
        a = all_neutral(region, Closed())
        b = a.copy()
        b.set((1, 1), 1)
        path = LegalPath([a, b], [PathStep((1, 1), abc.types[0], True)])
        report = verify_legal_path(abc, path)
        assert not report.valid and report.first_bad_index == 0

    def test_multi_site_diff_rejected(self, abc):
        region, boundary = Region.box((0, 0), (2, 2)), AllFacilitating()
        a = all_neutral(region, boundary)
        b = a.copy()
        b.set((0, 0), 1)
        b.set((0, 1), 1)
        path = LegalPath([a, b], [PathStep((0, 0), abc.types[0], True)])
        assert not verify_legal_path(abc, path).valid

    def test_reversal_of_valid_paths(self, abc):
        rng = np.random.default_rng(37)
        region = Region.box((0, 0), (1, 3))
        boundary = AllFacilitating(frozenset({(0, 0)}))
        checked = 0
        for _ in range(20):
            a = random_config(rng, abc, region, boundary)
            b = random_config(rng, abc, region, boundary)
            path = find_legal_path(abc, a, b)
            if path is None or path.length < 2:
                continue
            assert verify_legal_path(abc, path.reversed()).valid
            checked += 1
        assert checked >= 5


class TestColourful:
    def test_single_site_single_type(self):
        spec = validate_params(2, [(0, 1)], [0.3])
        cfg = all_neutral(Region.box((0, 0), (1, 1)), Closed())
        cfg.set((0, 0), 1)
        assert is_colourful(spec, cfg, (0, 0), (1, 1))

    def test_neutral_row_fails(self, abc):
        region = Region.box((0, 0), (3, 3))
        cfg = all_neutral(region, Closed())
        for x in region.sites:
            cfg.set(x, abc.code((0, 0)))
        for i in range(3):
            cfg.set((i, 1), NEUTRAL)
        assert not is_colourful(abc, cfg, (0, 0), (3, 3))

    def test_matches_double_loop_oracle(self, abc):
        rng = np.random.default_rng(41)
        region = Region.box((0, 0), (3, 3))
        for _ in range(60):
            cfg = random_config(rng, abc, region, Closed())
            mine = is_colourful(abc, cfg, (0, 0), (3, 3))
            oracle = True
            for code in range(1, abc.n_states):
                for axis in range(2):
                    for other in range(3):
                        hit = False
                        for along in range(3):
                            x = (along, other) if axis == 0 else (other, along)
                            if cfg.get(x) == code:
                                hit = True
                        if not hit:
                            oracle = False
            assert mine == oracle


class TestGoodBox:
    def test_canonical_good_box(self):
        spec = star_spec_2d()
        region = Region.box((0, 0), (4, 4))
        cfg = all_neutral(region, Closed())
        for h in spec.types:
            cfg.set(tuple(2 * b for b in h), spec.code(h))
        assert is_good_box(spec, cfg, (0, 0))

    def test_corner_neutralised_fails(self):
        spec = star_spec_2d()
        region = Region.box((0, 0), (4, 4))
        cfg = all_neutral(region, Closed())
        for h in spec.types:
            cfg.set(tuple(2 * b for b in h), spec.code(h))
        cfg.set((2, 0), NEUTRAL)
        assert not is_good_box(spec, cfg, (0, 0))

    def test_extra_face_vacancy_fails(self):
        spec = star_spec_2d()
        region = Region.box((0, 0), (4, 4))
        cfg = all_neutral(region, Closed())
        for h in spec.types:
            cfg.set(tuple(2 * b for b in h), spec.code(h))
        cfg.set((0, 1), spec.code((0, 0)))
        assert not is_good_box(spec, cfg, (0, 0))


class TestBlockedCoreOtherDimensions:
    def test_d1_blocked_pair_is_singleton(self):
        spec = validate_params(1, [(0,), (1,)], [0.2, 0.2])
        region = Region.box((0,), (2,))
        cfg = all_neutral(region, Closed())
        cfg.set((1,), spec.code((0,)))
        cfg.set((0,), spec.code((1,)))
        assert is_blocked_core(spec, cfg)
        assert len(reachable_set(spec, cfg)) == 1

    def test_d3_core_admits_no_transitions(self):
        from mcem.lattice import hypercube
        from mcem.dynamics import enumerate_transitions

        types = hypercube(3)
        spec = validate_params(3, types, [0.05] * 8)
        region = Region.box((0, 0, 0), (2, 2, 2))
        cfg = all_neutral(region, Closed())
        for h in types:
            cfg.set(tuple(1 - b for b in h), spec.code(h))
        assert is_blocked_core(spec, cfg)
        assert enumerate_transitions(spec, cfg) == []
