"""Traversability classifications and Monte-Carlo event estimation.

The estimators sample i.i.d. product-measure states on exactly the sites an
event reads, evaluate the event predicate, and report the failure frequency
with a Wilson interval.  Sampling is stream-split: sample i uses the i-th
jump of a counter-based generator, so estimates are reproducible and
embarrassingly parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import (
    NEUTRAL,
    Closed,
    Configuration,
    Region,
    SpecError,
    validate_params,
)
from .geometry import GridGeometry
from .reachability import PathBuilder, good_box_sites, is_colourful

A_TYPE = (0, 0)
B_TYPE = (1, 1)
C_TYPE = (0, 1)


def abc_spec(q_a, q_b, q_c):
    """The two-dimensional three-type model used by the crossing analysis."""
    return validate_params(2, [A_TYPE, B_TYPE, C_TYPE], [q_a, q_b, q_c])


def _require_abc(spec):
    if spec.d != 2 or set(spec.types) != {A_TYPE, B_TYPE, C_TYPE}:
        raise SpecError("this classification needs the {A,B,C} vacancy set")


def _param(params, key):
    if key not in params:
        raise SpecError(f"event needs parameter {key!r}")
    try:
        return int(params[key])
    except (TypeError, ValueError):
        raise SpecError(f"parameter {key!r} must be an integer") from None


def wilson_ci(k, n, z=1.959963984540054):
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise SpecError("need at least one sample")
    phat = k / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


def default_grid_params(spec, h):
    """The asymptotic cell and grid sizes for the given type's density.

    ell = ceil(theta^{3/2}) rounded up to a multiple of 8 (the cell geometry
    needs one); N = 2^ceil(theta/2 + log2 theta).  Desk runs override both
    and are flagged out-of-regime.
    """
    theta = spec.theta[spec.types.index(tuple(h))]
    ell = int(math.ceil(theta ** 1.5))
    ell = max(8, ((ell + 7) // 8) * 8)
    n = int(2 ** math.ceil(theta / 2 + math.log2(max(theta, 1.0000001))))
    return ell, n


# ---------------------------------------------------------------------------
# Hard-crossing failure probability
# ---------------------------------------------------------------------------

def strip_for(spec, h, ell, n, orientation, index=0):
    geom = GridGeometry(tuple(h), ell, n)
    if orientation == "vertical":
        return geom.vertical_strip(index)
    if orientation == "horizontal":
        return geom.horizontal_strip(index)
    raise SpecError(f"unknown orientation {orientation!r}")


def find_hard_crossing(spec, cfg, strip):
    """Deterministic smallest traversable hard crossing of the strip."""
    return strip.find_crossing(spec, cfg)


def crossing_failure_mc(spec, h, ell, n, orientation, samples, rng,
                        batch=2048):
    """P(no traversable hard crossing in one strip) by direct sampling.

    A site blocks iff it carries a vacancy of a type other than h, which
    happens with probability 1 - p - q_h independently per site.
    """
    strip = strip_for(spec, h, ell, n, orientation)
    q_block = 1.0 - spec.p - spec.q_of(spec.code(h))
    n_sites = len(strip.domain)
    fails = 0
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        open_mat = rng.random((m, n_sites)) >= q_block
        ok = strip.crossing_exists_batch(open_mat)
        fails += int(m - np.count_nonzero(ok))
        done += m
    est = fails / samples
    lo, hi = wilson_ci(fails, samples)
    return {
        "estimate": est,
        "ci_lo": lo,
        "ci_hi": hi,
        "samples": samples,
        "failures": fails,
        "support_size": n_sites,
    }


# ---------------------------------------------------------------------------
# Box and block classifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxClass3ii:
    traversable: bool
    super_: bool

    @property
    def evil(self):
        return not self.traversable

    @property
    def kind(self):
        if self.super_:
            return "super"
        if self.traversable:
            return "traversable"
        return "evil"


def enlarged_box_sites(j, L):
    """(outline, enlargement, top-right corner) of the classification box."""
    o = ((L + 1) * j[0], (L + 1) * j[1])
    outline = set()
    for m in range(L):
        outline |= {
            (o[0] + m, o[1]),
            (o[0] + m, o[1] + L - 1),
            (o[0], o[1] + m),
            (o[0] + L - 1, o[1] + m),
        }
    enlargement = set()
    for m in range(L + 1):
        enlargement.add((o[0] + m, o[1] + L))
        enlargement.add((o[0] + L, o[1] + m))
    corner = (o[0] + L, o[1] + L)
    return outline, enlargement, corner


def classify_box_3ii(spec, cfg, j, L):
    """Traversability of the enlarged outline box at block index j.

    Traversable: the outline holds only the frequent type or the neutral
    state, the enlargement additionally tolerates the walking type, and both
    the bottom and left outline segments carry at least one frequent vacancy
    (the shared corner counts for both segments).  Super additionally puts
    the walking type on the top-right corner; evil is the complement of
    traversable.
    """
    _require_abc(spec)
    if L < 2:
        raise SpecError("classification box needs L >= 2")
    a, b = spec.code(A_TYPE), spec.code(B_TYPE)
    outline, enlargement, corner = enlarged_box_sites(j, L)
    for x in outline | enlargement:
        if x not in cfg.region:
            raise SpecError(f"region does not cover classification site {x}")
    ok = all(cfg.get(x) in (NEUTRAL, a) for x in outline)
    ok = ok and all(cfg.get(x) in (NEUTRAL, a, b) for x in enlargement)
    o = ((L + 1) * j[0], (L + 1) * j[1])
    for axis in range(2):
        seg = []
        for m in range(L):
            x = list(o)
            x[axis] += m
            seg.append(tuple(x))
        ok = ok and any(cfg.get(x) == a for x in seg)
    return BoxClass3ii(ok, ok and cfg.get(corner) == b)


@dataclass(frozen=True)
class BlockClass3iii:
    b_traversable: bool
    b_super: bool
    ac_traversable: bool
    ac_super: bool


def block_sites_3iii(j):
    """The three-site column at block index j: lower, central, upper."""
    base = (j[0], 3 * j[1])
    return base, (base[0], base[1] + 1), (base[0], base[1] + 2)


def classify_block_3iii(spec, cfg, j):
    """Flags of one three-site column block.

    No walking-type vacancy on the outer vertices makes it traversable for
    that type; super additionally puts it on the centre.  The AC flags demand
    no walking type anywhere, and AC-super a frequent-lower / frequent-upper
    vacancy pair aligned with their shared east propagation direction.
    """
    _require_abc(spec)
    a, b, c = spec.code(A_TYPE), spec.code(B_TYPE), spec.code(C_TYPE)
    lower, centre, upper = block_sites_3iii(j)
    s_lo, s_ce, s_up = cfg.get(lower), cfg.get(centre), cfg.get(upper)
    b_trav = s_lo != b and s_up != b
    ac_trav = b_trav and s_ce != b
    return BlockClass3iii(
        b_traversable=b_trav,
        b_super=b_trav and s_ce == b,
        ac_traversable=ac_trav,
        ac_super=ac_trav and s_lo == a and s_up == c,
    )


# ---------------------------------------------------------------------------
# Grids of smallest crossings and their intersection points
# ---------------------------------------------------------------------------

@dataclass
class GoodGrid:
    vertical: list        # kernel-frame witness per vertical strip
    horizontal: list
    points: dict          # (i, j) -> kernel intersection point
    super_point: tuple | None   # (i, j) index of the chosen point, or None


def find_good_grid(spec, cfg, geometry):
    """Per-strip smallest traversable crossings, assembled into a grid.

    Returns None when some strip has no crossing.  Intersection point (i, j)
    is the last common vertex of the i-th vertical and j-th horizontal
    witness (the highest in the type's order, which is total along a path).
    The super point is the lexicographically largest (i, j) whose east or
    north neighbouring intersection point carries the grid's own vacancy
    type; it is None when no point qualifies.
    """
    n = geometry.n
    code = spec.code(geometry.h)
    vert, horiz = [], []
    for i in range(n + 1):
        s = geometry.vertical_strip(i)
        w = s.smallest_witness(s.open_from_config(spec, cfg))
        if w is None:
            return None
        vert.append(w)
    for j in range(n + 1):
        s = geometry.horizontal_strip(j)
        w = s.smallest_witness(s.open_from_config(spec, cfg))
        if w is None:
            return None
        horiz.append(w)
    points = {}
    for i in range(n + 1):
        vset = set(vert[i])
        for j in range(n + 1):
            common = [p for p in horiz[j] if p in vset]
            if not common:
                raise SpecError(f"crossings ({i},{j}) fail to intersect")
            points[(i, j)] = common[-1]
    super_point = None
    for i in range(n + 1):
        for j in range(n + 1):
            for nb in ((i + 1, j), (i, j + 1)):
                if nb in points:
                    abs_site = geometry.to_abs(points[nb])
                    if cfg.get(abs_site) == code:
                        if super_point is None or (i, j) > super_point:
                            super_point = (i, j)
    return GoodGrid(vert, horiz, points, super_point)


# ---------------------------------------------------------------------------
# Named events and their Monte-Carlo failure estimates
# ---------------------------------------------------------------------------

def _grid_event_b1(spec, params):
    ell, n = _param(params, "ell"), _param(params, "n")
    geom = GridGeometry(B_TYPE, ell, n)
    sites = sorted(geom.abs_sites())

    def predicate(cfg):
        grid = find_good_grid(spec, cfg, geom)
        if grid is None or grid.super_point is None:
            return False
        i, j = grid.super_point
        return i > n / 2 and j > n / 2

    return sites, predicate


def _grid_event_b2(spec, params):
    ell = _param(params, "ell")
    geom = GridGeometry(B_TYPE, ell, 0)
    code = spec.code(B_TYPE)
    sites = sorted(geom.to_abs(p) for p in geom.cells[(0, 0)].d1)

    def predicate(cfg):
        return all(cfg.get(x) in (NEUTRAL, code) for x in sites)

    return sites, predicate


def _paths_event_3ii(spec, params):
    _require_abc(spec)
    lb, lc = _param(params, "L_B"), _param(params, "L_C")
    a, b, c = spec.code(A_TYPE), spec.code(B_TYPE), spec.code(C_TYPE)
    yb = 3 * (lb + 1) + lb
    xb = lb
    gamma_b = [(0, y) for y in range(1, yb + 1)] + [(x, yb) for x in range(1, xb + 1)]
    left_tail = [(x, 1) for x in range(-lc, 0)]
    gamma_b_left = left_tail + [(-1, y) for y in range(2, yb + 1)]
    gamma_b_right = [(1, y) for y in range(lb, yb)] + \
        [(x, yb - 1) for x in range(2, xb + 1)]
    xc = -3 * (lc + 1) + lc
    gamma_c = [(x, 0) for x in range(xc, 0)] + [(xc, y) for y in range(1, lc + 1)]
    gamma_c_left = [(x - 1, y - 1) for x, y in gamma_c] + \
        [(xc - m, 0) for m in range(1, lc + 1)]
    need_a_b_left = [p for p in left_tail if p != (-1, 1)]
    need_a_b_right = [(1, y) for y in range(lb, yb - 1)]
    need_a_c_left = [(xc - m, 0) for m in range(1, lc + 1)]
    sites = sorted(
        set(gamma_b) | set(gamma_b_left) | set(gamma_b_right)
        | set(gamma_c) | set(gamma_c_left)
    )

    def predicate(cfg):
        if any(cfg.get(x) not in (NEUTRAL, a, b) for x in gamma_b):
            return False
        for grp in (gamma_b_left, gamma_b_right):
            if any(cfg.get(x) not in (NEUTRAL, a) for x in grp):
                return False
        if not any(cfg.get(x) == a for x in need_a_b_left):
            return False
        if not any(cfg.get(x) == a for x in need_a_b_right):
            return False
        if any(cfg.get(x) not in (NEUTRAL, a, c) for x in gamma_c):
            return False
        if any(cfg.get(x) not in (NEUTRAL, a) for x in gamma_c_left):
            return False
        return any(cfg.get(x) == a for x in need_a_c_left)

    return sites, predicate


def _block_window_sites(ell, n, w):
    sites = set()
    for jx in range(-w, (n + 1) * ell):
        for jy in range(0, n * ell + 1):
            sites |= set(block_sites_3iii((jx, jy)))
    return sites


def vertical_crossing_3iii(spec, cfg, i, ell, n, w):
    """Leftmost qualifying vertical slab of the i-th block strip, or None.

    A slab of w block columns qualifies when its right column is fully
    walking-type traversable, the rest fully AC-traversable, and every row
    left of the right column holds at least one AC-super block.
    """
    for x0 in range(i * ell, i * ell + ell - w + 1):
        ok = True
        for jy in range(1, n * ell + 1):
            cls = classify_block_3iii(spec, cfg, (x0 + w - 1, jy))
            if not cls.b_traversable:
                ok = False
                break
            row = [classify_block_3iii(spec, cfg, (x, jy)) for x in range(x0, x0 + w - 1)]
            if not all(r.ac_traversable for r in row):
                ok = False
                break
            if not any(r.ac_super for r in row):
                ok = False
                break
        if ok:
            return x0
    return None


def horizontal_line_3iii(spec, cfg, j, ell, n):
    """Lowest fully traversable block row of the j-th horizontal strip."""
    for jy in range(j * ell + 1, j * ell + ell + 1):
        if all(
            classify_block_3iii(spec, cfg, (jx, jy)).b_traversable
            for jx in range(0, (n + 1) * ell)
        ):
            return jy
    return None


def _grid_event_3iii(spec, params):
    _require_abc(spec)
    ell, n, w = _param(params, "ell"), _param(params, "n"), _param(params, "w")
    sites = sorted(_block_window_sites(ell, n, 0))

    def predicate(cfg):
        cols = []
        for i in range(n + 1):
            x0 = vertical_crossing_3iii(spec, cfg, i, ell, n, w)
            if x0 is None:
                return False
            cols.append(x0 + w - 1)
        rows = []
        for j in range(n):
            y = horizontal_line_3iii(spec, cfg, j, ell, n)
            if y is None:
                return False
            rows.append(y)
        for i, x in enumerate(cols):
            for j, y in enumerate(rows):
                if i > n / 2 and j > n / 2:
                    if classify_block_3iii(spec, cfg, (x, y)).b_super:
                        return True
        return False

    return sites, predicate


def _tail_event_3iii(spec, params):
    _require_abc(spec)
    ell, w = _param(params, "ell"), _param(params, "w")
    g1 = [(x, 0) for x in range(-w, 0)]
    g2 = [(x, 1) for x in range(-w, 0)]
    g3 = [(0, y) for y in range(1, ell)]
    sites = set()
    for j in g1 + g2 + g3:
        sites |= set(block_sites_3iii(j))
    sites = sorted(sites)

    def predicate(cfg):
        for grp in (g1, g2):
            cls = [classify_block_3iii(spec, cfg, j) for j in grp]
            if not all(x.ac_traversable for x in cls):
                return False
            if not any(x.ac_super for x in cls):
                return False
        return all(classify_block_3iii(spec, cfg, j).b_traversable for j in g3)

    return sites, predicate


def _propagation_event_bii(spec, params):
    from .reachability import is_good_box, is_star_spec

    if not is_star_spec(spec) or spec.d != 2:
        raise SpecError("the propagation event needs the d=2 star vacancy set")
    n = _param(params, "n")
    if n % 2 or n < 4:
        raise SpecError("the propagation event needs even n >= 4")
    sites = set()
    box_b = [(-n + dx, -n + dy) for dx in range(n + 1) for dy in range(n + 1)]
    sites |= set(box_b)
    for x in box_b:
        if min(x) == -n:
            for k in range(1, n + 1):
                o = (x[0] - k - 2, x[1] - k - 2)
                sites |= set(good_box_sites(spec, o))
    for i in range(2):
        o = [0, 0]
        o[i] = -2 * n
        s = [n // 2, n // 2]
        s[i] = n
        for dx in range(s[0] + 1):
            for dy in range(s[1] + 1):
                sites.add((o[0] + dx, o[1] + dy))
    sites = sorted(sites)

    def predicate(cfg):
        from .reachability import is_good_box, _colourful

        if not _colourful(
            spec, cfg, (-(n - 1), -(n - 1)), (n, n), exclude=frozenset({(0, 0)})
        ):
            return False
        for x in box_b:
            if min(x) != -n:
                continue
            if not any(
                is_good_box(spec, cfg, (x[0] - k - 2, x[1] - k - 2))
                for k in range(1, n + 1)
            ):
                return False
        for i in range(2):
            o = [0, 0]
            o[i] = -2 * n
            s = [n // 2 + 1, n // 2 + 1]
            s[i] = n + 1
            if not is_colourful(spec, cfg, tuple(o), tuple(s)):
                return False
        return True

    return sites, predicate


EVENTS = {
    "E_B1": _grid_event_b1,
    "E_B2": _grid_event_b2,
    "E0_3ii": _paths_event_3ii,
    "E1_3iii": _grid_event_3iii,
    "E2_3iii": _tail_event_3iii,
    "E_N_Bii": _propagation_event_bii,
}


def event_probability_mc(spec, event, params, samples, rng):
    """Failure probability of a named event under the product measure.

    Returns the Wilson-interval estimate together with the support size and
    the support-size-times-failure product driven to zero in the asymptotic
    statements.
    """
    if event not in EVENTS:
        raise SpecError(f"unknown event {event!r}; choose from {sorted(EVENTS)}")
    sites, predicate = EVENTS[event](spec, params)
    region = Region.from_sites(sites)
    probs = spec.state_probs()
    fails = 0
    for _ in range(samples):
        states = rng.choice(len(probs), size=region.size, p=probs).astype(np.uint8)
        cfg = Configuration(region, states, Closed())
        if not predicate(cfg):
            fails += 1
    est = fails / samples
    lo, hi = wilson_ci(fails, samples)
    return {
        "estimate": est,
        "ci_lo": lo,
        "ci_hi": hi,
        "samples": samples,
        "failures": fails,
        "support_size": region.size,
        "support_failure_product": region.size * est,
    }


# ---------------------------------------------------------------------------
# The six-step corner exchange path
# ---------------------------------------------------------------------------

def corner_exchange_path(spec=None):
    """Legal path retyping a block corner using a neighbouring super corner.

    Starting from a frequent vacancy west-below, a walking vacancy on the
    corner and another one east of it, six flips move the corner through the
    neutral state to the frequent type: plant east-below, remove below,
    remove east-below, re-type below, remove the corner, re-type the corner.
    """
    if spec is None:
        spec = abc_spec(0.2, 0.1, 0.1)
    _require_abc(spec)
    a, b = spec.code(A_TYPE), spec.code(B_TYPE)
    region = Region.box((-1, -1), (3, 2))
    cfg = Configuration(region, np.zeros(region.size, dtype=np.uint8), Closed())
    pa, pb, pc, pd, pe = (-1, -1), (0, -1), (1, -1), (0, 0), (1, 0)
    cfg.set(pa, a)
    cfg.set(pb, b)
    cfg.set(pd, b)
    cfg.set(pe, b)
    builder = PathBuilder(spec, cfg)
    builder.flip(pc, b)
    builder.flip(pb, b)
    builder.flip(pc, b)
    builder.flip(pb, a)
    builder.flip(pd, b)
    builder.flip(pd, a)
    return builder.path()
