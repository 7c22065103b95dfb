import numpy as np
import pytest

from mcem.lattice import (
    AllFacilitating,
    Closed,
    Configuration,
    Frozen,
    Region,
    required_frame_sites,
    validate_params,
)


@pytest.fixture
def abc():
    """Three-type d=2 model used throughout the crossing analysis."""
    return validate_params(2, [(0, 0), (1, 1), (0, 1)], [0.2, 0.1, 0.15])


@pytest.fixture
def east1d():
    return validate_params(1, [(0,)], [0.3])


@pytest.fixture
def h2_full():
    return validate_params(2, [(0, 0), (0, 1), (1, 0), (1, 1)], [0.1] * 4)


def east_chain(n):
    """Region and boundary of a length-n chain with facilitating left end."""
    region = Region.box((0,), (n,))
    return region, AllFacilitating(frozenset({(0,)}))


def random_valid_spec(rng, d=None, max_types=None):
    from mcem.lattice import hypercube

    d = d if d is not None else int(rng.integers(1, 3))
    cube = hypercube(d)
    k_max = max_types if max_types is not None else len(cube)
    k = int(rng.integers(1, k_max + 1))
    idx = rng.choice(len(cube), size=k, replace=False)
    types = [cube[i] for i in idx]
    raw = rng.uniform(0.05, 1.0, size=k)
    q = raw / raw.sum() * rng.uniform(0.2, 0.8)
    return validate_params(d, types, q)


def random_boundary(rng, spec, region):
    kind = rng.integers(0, 3)
    if kind == 0:
        return Closed()
    if kind == 1:
        n_sites = max(1, int(rng.integers(1, region.size + 1)))
        idx = rng.choice(region.size, size=n_sites, replace=False)
        return AllFacilitating(frozenset(region.coord(i) for i in idx))
    frame = {}
    for y in required_frame_sites(spec, region):
        frame[y] = int(rng.integers(0, spec.n_states))
    return Frozen(frame)


def random_config(rng, spec, region, boundary):
    probs = spec.state_probs()
    states = rng.choice(len(probs), size=region.size, p=probs).astype(np.uint8)
    return Configuration(region, states, boundary)
