"""Configuration-space search: legal paths, reachability, box predicates."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .lattice import (
    NEUTRAL,
    Configuration,
    Region,
    SpecError,
    constraint_code,
    hypercube,
)
from . import dynamics


@dataclass(frozen=True)
class PathStep:
    """Certificate for one legal flip: where, which type, which direction."""

    site: tuple
    h: tuple
    to_vacancy: bool


@dataclass
class LegalPath:
    """Configurations connected by single-site legal flips, with certificates.

    ``configs`` has one more entry than ``steps``; a length-1 path is a lone
    configuration with no steps.
    """

    configs: list
    steps: list

    @property
    def length(self):
        return len(self.configs)

    def reversed(self):
        configs = [c.copy() for c in reversed(self.configs)]
        steps = [
            PathStep(s.site, s.h, not s.to_vacancy) for s in reversed(self.steps)
        ]
        return LegalPath(configs, steps)


@dataclass
class PathReport:
    valid: bool
    first_bad_index: int | None
    touched_sites: set
    length: int


def verify_legal_path(spec, path):
    """Check single-site differences, star<->h flips, and constraints.

    Certificates are checked against the actual differences.  The report
    carries the first failing step index and the set of touched sites (the
    Lambda of the path-method bound).
    """
    configs = path.configs
    touched = set()
    if len(configs) != len(path.steps) + 1:
        return PathReport(False, 0, touched, len(configs))
    for i, step in enumerate(path.steps):
        a, b = configs[i], configs[i + 1]
        diff = np.nonzero(a.states != b.states)[0]
        if len(diff) != 1:
            return PathReport(False, i, touched, len(configs))
        j = int(diff[0])
        site = a.region.coord(j)
        old, new = int(a.states[j]), int(b.states[j])
        try:
            code = spec.code(step.h)
        except SpecError:
            return PathReport(False, i, touched, len(configs))
        if site != tuple(step.site):
            return PathReport(False, i, touched, len(configs))
        if step.to_vacancy:
            if not (old == NEUTRAL and new == code):
                return PathReport(False, i, touched, len(configs))
        else:
            if not (old == code and new == NEUTRAL):
                return PathReport(False, i, touched, len(configs))
        if not constraint_code(spec, a, site, code):
            return PathReport(False, i, touched, len(configs))
        touched.add(site)
    return PathReport(True, None, touched, len(configs))


class PathBuilder:
    """Grows a legal path one checked flip at a time.

    Every ``flip`` validates the constraint and the star<->h direction before
    recording, so a construction bug raises at the offending move instead of
    producing an invalid path.  ``undo(mark)`` re-emits the inverse flips in
    reverse order (each checked again), which restores the state exactly.
    """

    def __init__(self, spec, cfg0):
        self.spec = spec
        self.cfg = cfg0.copy()
        self.configs = [cfg0.copy()]
        self.steps = []

    def mark(self):
        return len(self.steps)

    def flip(self, x, code):
        x = tuple(x)
        cur = self.cfg.get(x)
        if cur == NEUTRAL:
            to_vacancy = True
        elif cur == code:
            to_vacancy = False
        else:
            raise SpecError(
                f"illegal flip at {x}: holds {cur}, asked for type code {code}"
            )
        if not constraint_code(self.spec, self.cfg, x, code):
            raise SpecError(f"constraint violated flipping {x} for code {code}")
        self.cfg.set(x, code if to_vacancy else NEUTRAL)
        self.steps.append(PathStep(x, self.spec.type_of(code), to_vacancy))
        self.configs.append(self.cfg.copy())

    def extend_chain(self, code, sites):
        for x in sites:
            self.flip(x, code)

    def undo(self, mark, stop=None):
        stop = len(self.steps) if stop is None else stop
        for step in reversed(self.steps[mark:stop]):
            self.flip(step.site, self.spec.code(step.h))

    def path(self):
        return LegalPath(self.configs, self.steps)


def is_blocked_core(spec, cfg, origin=None):
    """True iff the translated hypercube holds the blocked pattern.

    Blocked means the site 1-h carries an h-vacancy for every corner h of
    H_d; from such a core no legal transition exists when G = H_d.  With a
    smaller G the pattern cannot be stored, so the predicate is simply false.
    """
    d = spec.d
    if origin is None:
        origin = (0,) * d
    for h in hypercube(d):
        x = tuple(o + (1 - b) for o, b in zip(origin, h))
        if h not in spec.types:
            return False
        if cfg.get(x) != spec.code(h):
            return False
    return True


@dataclass
class ReachableSet:
    keys: set          # byte keys of reached state arrays
    truncated: bool
    region: Region
    boundary: object

    def __contains__(self, cfg):
        return cfg.key() in self.keys

    def __len__(self):
        return len(self.keys)

    def configurations(self):
        for key in sorted(self.keys):
            yield Configuration(
                self.region, np.frombuffer(key, dtype=np.uint8).copy(), self.boundary
            )


def _neighbours(spec, cfg):
    for tr in dynamics.enumerate_transitions(spec, cfg):
        out = cfg.copy()
        out.set(tr.site, spec.code(tr.h) if tr.to_vacancy else NEUTRAL)
        yield tr, out


def reachable_set(spec, cfg, cap=10 ** 6):
    """BFS closure of a configuration under legal transitions.

    Reversibility makes forward closure equal to the full communication
    class.  A cap bound marks the result truncated instead of failing.
    """
    seen = {cfg.key()}
    queue = deque([cfg])
    truncated = False
    while queue:
        cur = queue.popleft()
        for _, nxt in _neighbours(spec, cur):
            k = nxt.key()
            if k not in seen:
                if len(seen) >= cap:
                    truncated = True
                    continue
                seen.add(k)
                queue.append(nxt)
    return ReachableSet(seen, truncated, cfg.region, cfg.boundary)


def find_legal_path(spec, omega, eta, cap=10 ** 6):
    """Shortest legal path between two configurations, or None within cap."""
    if omega.region != eta.region:
        raise SpecError("configurations live on different regions")
    goal = eta.key()
    start = omega.key()
    if start == goal:
        return LegalPath([omega.copy()], [])
    parents = {start: None}
    queue = deque([omega])
    found = None
    while queue and found is None:
        cur = queue.popleft()
        for tr, nxt in _neighbours(spec, cur):
            k = nxt.key()
            if k in parents:
                continue
            if len(parents) >= cap:
                return None
            parents[k] = (cur.key(), PathStep(tr.site, tr.h, tr.to_vacancy))
            if k == goal:
                found = nxt
                break
            queue.append(nxt)
    if found is None:
        return None
    steps = []
    keys = [goal]
    k = goal
    while parents[k] is not None:
        prev, step = parents[k]
        steps.append(step)
        keys.append(prev)
        k = prev
    steps.reverse()
    keys.reverse()
    configs = [
        Configuration(
            omega.region, np.frombuffer(key, dtype=np.uint8).copy(), omega.boundary
        )
        for key in keys
    ]
    return LegalPath(configs, steps)


def reachability_classes(spec, region, boundary, cap=10 ** 6):
    """Partition of the full state space into communication classes."""
    states = dynamics.enumerate_state_space(spec, region, cap=cap)
    seen = set()
    classes = []
    for i in range(states.shape[0]):
        key = states[i].tobytes()
        if key in seen:
            continue
        cls = reachable_set(spec, Configuration(region, states[i], boundary), cap=cap)
        seen |= cls.keys
        classes.append(cls)
    return classes


def is_colourful(spec, cfg, origin, sides):
    """Every axis-aligned transversal line of the box meets every type in G.

    ``exclude`` sites are skipped, which supports the event variant that
    removes the origin from its colourful box.
    """
    return _colourful(spec, cfg, origin, sides, exclude=frozenset())


def _colourful(spec, cfg, origin, sides, exclude):
    d = len(origin)
    idx = []
    for offs in np.ndindex(*sides):
        x = tuple(o + k for o, k in zip(origin, offs))
        idx.append(-1 if x in exclude else cfg.region.index(x))
    arr = np.empty(len(idx), dtype=np.int16)
    for j, i in enumerate(idx):
        arr[j] = -1 if i < 0 else cfg.states[i]
    arr = arr.reshape(sides)
    for code in range(1, spec.n_states):
        for axis in range(d):
            if not np.all(np.any(arr == code, axis=axis)):
                return False
    return True


def star_types(d):
    """The star graph in H_d: the origin corner plus each unit corner."""
    types = [(0,) * d]
    for i in range(d):
        e = [0] * d
        e[i] = 1
        types.append(tuple(e))
    return sorted(types)


def is_star_spec(spec):
    return list(spec.types) == star_types(spec.d)


def good_box_sites(spec, origin):
    """The (site, required state code) pairs of a good box at ``origin``."""
    d = spec.d
    out = {}
    for h in spec.types:
        corner = tuple(o + 2 * b for o, b in zip(origin, h))
        out[corner] = spec.code(h)
    for i in range(d):
        for offs in np.ndindex(*((3,) * d)):
            if offs[i] != 0:
                continue
            x = tuple(o + k for o, k in zip(origin, offs))
            if x not in out:
                out[x] = NEUTRAL
    return out


def is_good_box(spec, cfg, origin):
    """Star-graph good box: h at origin+2h for each h, neutral faces."""
    if not is_star_spec(spec):
        raise SpecError("good boxes are defined for the star vacancy set")
    for x, code in good_box_sites(spec, origin).items():
        if x not in cfg.region or cfg.get(x) != code:
            return False
    return True
