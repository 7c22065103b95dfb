"""Model definitions for the multicolour East model on finite boxes.

A vacancy type is a corner of the hypercube H_d = {0,1}^d.  Each type h
propagates along the d unit vectors v with h+v still in H_d, and a site x is
facilitated for type h when some x-v (v a propagation direction of h) holds an
h-vacancy.  Neighbouring vacancies of a different type never facilitate.

Site states are stored as one byte per site: 0 is the neutral state, and
1+i is the vacancy whose bit-vector is ``spec.types[i]`` (types canonically
sorted, so enumeration-dependent output is reproducible).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

NEUTRAL = 0

VacancyType = tuple  # bit-vector, e.g. (0, 1); length = model dimension
Coord = tuple        # lattice site, tuple of ints


class SpecError(ValueError):
    """A model specification violates a validity condition."""


class NonPositiveDensity(SpecError):
    pass


class DensitySumNotBelowOne(SpecError):
    pass


class TypeOutsideHypercube(SpecError):
    pass


class DuplicateType(SpecError):
    pass


class EmptyVacancySet(SpecError):
    pass


class CapExceeded(RuntimeError):
    """A state-space or search cap was exceeded."""


def hypercube(d):
    """All 2^d vacancy types of dimension d, canonically sorted."""
    types = []
    for m in range(2 ** d):
        types.append(tuple((m >> (d - 1 - i)) & 1 for i in range(d)))
    return sorted(types)


def propagation_directions(h, d=None):
    """Signed unit vectors v with ||v||=1 and h+v in {0,1}^d.

    For each coordinate i exactly one of +e_i / -e_i qualifies, so the result
    always has cardinality d.
    """
    if d is None:
        d = len(h)
    if len(h) != d:
        raise SpecError(f"dimension mismatch: |h|={len(h)} but d={d}")
    if any(b not in (0, 1) for b in h):
        raise TypeOutsideHypercube(f"{h} is not a 0/1 vector")
    dirs = set()
    for i, b in enumerate(h):
        sign = 1 if b == 0 else -1
        v = [0] * d
        v[i] = sign
        dirs.add(tuple(v))
    return dirs


def partial_order_leq(h, x, y):
    """True iff x precedes y in the h-order: x.v <= y.v for every v in P(h).

    For h = 0 this is the usual componentwise order; a 1-bit in coordinate i
    reverses the comparison there.
    """
    for v in propagation_directions(h):
        if _dot(x, v) > _dot(y, v):
            return False
    return True


def _dot(x, v):
    return sum(a * b for a, b in zip(x, v))


@dataclass(frozen=True)
class ModelSpec:
    """Validated model parameters: dimension, vacancy set G, densities.

    Built through :func:`validate_params`; carries the derived neutral density
    p and theta_h = |log2 q_h| per type.
    """

    d: int
    types: tuple          # sorted tuple of VacancyType
    q: tuple              # densities, parallel to types
    p: float
    theta: tuple

    @property
    def n_states(self):
        return len(self.types) + 1

    def code(self, h):
        """Byte code of vacancy type h (1-based; 0 is neutral)."""
        try:
            return self.types.index(tuple(h)) + 1
        except ValueError:
            raise SpecError(f"{h} not in the vacancy set") from None

    def type_of(self, code):
        if code == NEUTRAL:
            return None
        return self.types[code - 1]

    def q_of(self, code):
        return self.q[code - 1]

    def state_probs(self):
        """nu as an array indexed by state code: [p, q_1, ..., q_|G|]."""
        return np.array((self.p,) + self.q)

    def prop_dirs(self, code):
        return propagation_directions(self.types[code - 1])

    def state_label(self, code):
        if code == NEUTRAL:
            return "*"
        return "".join(str(b) for b in self.types[code - 1])

    def code_of_label(self, label):
        if label in ("*", "star"):
            return NEUTRAL
        bits = tuple(int(c) for c in label)
        return self.code(bits)


def validate_params(d, types, q):
    """Check a (d, G, q) triple and return the ModelSpec.

    Raises a SpecError subclass naming the violated condition: every density
    must be positive, their sum strictly below one, every type a distinct
    element of {0,1}^d, and G non-empty.
    """
    if d < 1:
        raise SpecError("dimension must be >= 1")
    types = [tuple(h) for h in types]
    if not types:
        raise EmptyVacancySet("vacancy set G must be non-empty")
    for h in types:
        if len(h) != d or any(b not in (0, 1) for b in h):
            raise TypeOutsideHypercube(f"type {h} is not in {{0,1}}^{d}")
    if len(set(types)) != len(types):
        raise DuplicateType("vacancy types must be distinct")
    q = [float(v) for v in q]
    if len(q) != len(types):
        raise SpecError("q must have one density per type")
    order = sorted(range(len(types)), key=lambda i: types[i])
    types = tuple(types[i] for i in order)
    q = tuple(q[i] for i in order)
    for h, qh in zip(types, q):
        if not qh > 0:
            raise NonPositiveDensity(f"q_{h} = {qh} must be > 0")
    total = math.fsum(q)
    if not total < 1:
        raise DensitySumNotBelowOne(f"sum of densities is {total}, must be < 1")
    p = 1.0 - total
    theta = tuple(abs(math.log2(qh)) for qh in q)
    return ModelSpec(d=d, types=types, q=q, p=p, theta=theta)


@dataclass(frozen=True)
class Region:
    """A finite set of sites in Z^d with a fixed row-major indexing.

    Either an axis-aligned box (origin + side lengths, last coordinate
    fastest) or an explicit vertex set (sorted).  Index and coordinate maps
    are mutual inverses.
    """

    d: int
    sites: tuple                      # tuple of Coord, in index order
    origin: tuple | None = None       # set for boxes
    sides: tuple | None = None
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.sites:
            raise SpecError("region must be non-empty")
        object.__setattr__(self, "_index", {x: i for i, x in enumerate(self.sites)})

    @staticmethod
    def box(origin, sides):
        origin = tuple(origin)
        sides = tuple(int(s) for s in sides)
        if len(origin) != len(sides) or any(s < 1 for s in sides):
            raise SpecError(f"bad box: origin={origin} sides={sides}")
        coords = []
        for offs in np.ndindex(*sides):
            coords.append(tuple(o + k for o, k in zip(origin, offs)))
        return Region(d=len(origin), sites=tuple(coords), origin=origin, sides=sides)

    @staticmethod
    def from_sites(sites):
        sites = tuple(sorted(tuple(x) for x in set(map(tuple, sites))))
        return Region(d=len(sites[0]), sites=sites)

    @property
    def size(self):
        return len(self.sites)

    def index(self, x):
        try:
            return self._index[tuple(x)]
        except KeyError:
            raise SpecError(f"site {x} outside region") from None

    def coord(self, i):
        return self.sites[i]

    def __contains__(self, x):
        return tuple(x) in self._index


class BoundaryCondition:
    """How constraints treat neighbours that fall outside the region."""


@dataclass(frozen=True)
class Closed(BoundaryCondition):
    """Off-region neighbours never facilitate."""


@dataclass(frozen=True)
class AllFacilitating(BoundaryCondition):
    """Every constraint is declared satisfied at the designated sites.

    ``sites=None`` designates the whole region.  At non-designated sites
    off-region neighbours never facilitate (as in Closed).
    """

    sites: frozenset | None = None

    def covers(self, x):
        return self.sites is None or tuple(x) in self.sites


@dataclass(frozen=True)
class Frozen(BoundaryCondition):
    """A fixed frame of states on the sites just outside the region.

    The frame must cover exactly the sites x - v (x in region, v a
    propagation direction of some type in G) that fall outside the region.
    Frame sites never update.
    """

    frame: Mapping  # Coord -> state code

    def state(self, y):
        return self.frame[tuple(y)]


def required_frame_sites(spec, region):
    """The off-region sites read by some constraint: exactly the frame."""
    out = set()
    for x in region.sites:
        for code in range(1, spec.n_states):
            for v in spec.prop_dirs(code):
                y = tuple(a - b for a, b in zip(x, v))
                if y not in region:
                    out.add(y)
    return out


def check_boundary(spec, region, boundary):
    """Validate a boundary condition against (spec, region)."""
    if isinstance(boundary, Frozen):
        need = required_frame_sites(spec, region)
        have = set(map(tuple, boundary.frame))
        if need - have:
            raise SpecError(f"frozen frame missing sites: {sorted(need - have)[:4]} ...")
        if have - need:
            raise SpecError(f"frozen frame has extra sites: {sorted(have - need)[:4]} ...")
        for y, code in boundary.frame.items():
            if not 0 <= code < spec.n_states:
                raise SpecError(f"bad frame state {code} at {y}")
    elif isinstance(boundary, AllFacilitating):
        if boundary.sites is not None:
            for x in boundary.sites:
                if x not in region:
                    raise SpecError(f"AllFacilitating site {x} outside region")
    elif not isinstance(boundary, Closed):
        raise SpecError(f"unknown boundary condition {boundary!r}")


@dataclass
class Configuration:
    """States on a region (dense byte array) plus its boundary condition."""

    region: Region
    states: np.ndarray
    boundary: BoundaryCondition

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.uint8)
        if self.states.shape != (self.region.size,):
            raise SpecError("states length must equal region size")

    def copy(self):
        return Configuration(self.region, self.states.copy(), self.boundary)

    def get(self, x):
        return int(self.states[self.region.index(x)])

    def set(self, x, code):
        self.states[self.region.index(x)] = code

    def key(self):
        """Bytewise identity of the state array (region/boundary fixed)."""
        return self.states.tobytes()

    def __eq__(self, other):
        return (
            isinstance(other, Configuration)
            and self.region == other.region
            and self.boundary == other.boundary
            and np.array_equal(self.states, other.states)
        )


def all_neutral(region, boundary=None):
    if boundary is None:
        boundary = Closed()
    return Configuration(region, np.zeros(region.size, dtype=np.uint8), boundary)


def constraint(spec, cfg, x, h):
    """The facilitation indicator c_x^h: some x-v holds an h-vacancy.

    Off-region neighbours resolve through the boundary condition.  The value
    never depends on the state of x itself.
    """
    return constraint_code(spec, cfg, tuple(x), spec.code(h))


def constraint_code(spec, cfg, x, code):
    region = cfg.region
    if x not in region:
        raise SpecError(f"site {x} outside region")
    boundary = cfg.boundary
    if isinstance(boundary, AllFacilitating) and boundary.covers(x):
        return True
    for v in spec.prop_dirs(code):
        y = tuple(a - b for a, b in zip(x, v))
        if y in region:
            if cfg.states[region.index(y)] == code:
                return True
        elif isinstance(boundary, Frozen):
            if boundary.state(y) == code:
                return True
    return False


def measure_weight(spec, cfg, log=False):
    """Product-measure weight of a configuration: q_h per vacancy, p per star.

    The linear value underflows on large regions; use ``log=True`` beyond a
    few dozen sites.
    """
    probs = spec.state_probs()
    vals = probs[cfg.states]
    if log:
        return float(np.sum(np.log(vals)))
    return float(np.prod(vals))


def sample_config(spec, region, boundary, rng):
    """Draw an i.i.d. nu-sample on the region; deterministic given the rng."""
    probs = spec.state_probs()
    states = rng.choice(len(probs), size=region.size, p=probs).astype(np.uint8)
    return Configuration(region, states, boundary)
