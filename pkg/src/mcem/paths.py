"""Constructive legal paths behind the ergodicity results.

Three builders generate explicit legal paths: clearing slabs above a
hypercube of vacancies that share a propagation direction, moving a good
star-graph box one diagonal step using fresh vacancies ahead of it, and
moving it N-2 diagonal steps re-using a fixed supply of vacancies.

Every move goes through a checked PathBuilder, so the emitted paths are
legal by construction; builders additionally assert that the endpoint
matches the advertised final state exactly.  Scaffolding (temporary vacancy
chains) is always retracted through ``undo``, which re-checks each inverse
flip.
"""

from __future__ import annotations

import numpy as np

from .lattice import (
    NEUTRAL,
    Closed,
    Region,
    SpecError,
    all_neutral,
    hypercube,
    validate_params,
)
from .reachability import (
    PathBuilder,
    good_box_sites,
    is_good_box,
    is_star_spec,
    star_types,
)


def _add(x, y):
    return tuple(a + b for a, b in zip(x, y))


def _scaled(x, c):
    return tuple(c * a for a in x)


def _e(i, d):
    v = [0] * d
    v[i] = 1
    return tuple(v)


# ---------------------------------------------------------------------------
# Slab clearing for vacancy sets sharing one propagation direction.
# ---------------------------------------------------------------------------

def shared_direction_spec(d, q_total=0.5):
    """All vacancy types with last coordinate 0: they share +e_d."""
    if d < 2:
        raise SpecError("need d >= 2")
    types = [h + (0,) for h in hypercube(d - 1)]
    q = [q_total / len(types)] * len(types)
    return validate_params(d, types, q)


def hd_good_config(spec, k):
    """Starting state on a height-(k+1) slab over the hypercube.

    Rows 0 and 1 hold the canonical pattern (each type at its own corner,
    neutral above); rows 2..k are seeded with a vacancy per column so the
    path has something to clear.
    """
    d = spec.d
    region = Region.box((0,) * d, (2,) * (d - 1) + (k + 1,))
    cfg = all_neutral(region, Closed())
    for h in spec.types:
        cfg.set(h, spec.code(h))
    for r in range(2, k + 1):
        for u in hypercube(d - 1):
            cfg.set(u + (r,), spec.code(u + (0,)))
    return cfg


def _fill_order(d, j_bits):
    """Columns of H_{d-1} by distance from the seed column, ties lexicographic."""
    cols = hypercube(d - 1)
    dist = lambda u: sum(a != b for a, b in zip(u, j_bits))
    return sorted(cols, key=lambda u: (dist(u), u))


def build_hd_good_path(d, k):
    """Legal path clearing rows 2..k above the corner pattern.

    Returns (initial configuration, path).  The path fills intermediate rows
    with one type at a time, removes that type from the target row, and
    retracts; iterating over rows and types leaves every site of the upper
    slab neutral while rows 0-1 return to the starting pattern.
    """
    if d < 2 or k < 2:
        raise SpecError("need d >= 2 and k >= 2")
    spec = shared_direction_spec(d)
    cfg0 = hd_good_config(spec, k)
    b = PathBuilder(spec, cfg0)

    def fill_row1(code, j_bits):
        order = _fill_order(d, j_bits)
        for u in order:
            b.flip(u + (1,), code)
        return order

    for r in range(2, k + 1):
        for h in spec.types:
            code = spec.code(h)
            j_bits = h[:-1]
            m = b.mark()
            order = fill_row1(code, j_bits)
            for row in range(2, r):
                for u in order:
                    b.flip(u + (row,), code)
            fill_end = b.mark()
            for u in hypercube(d - 1):
                if b.cfg.get(u + (r,)) == code:
                    b.flip(u + (r,), code)
            b.undo(m, stop=fill_end)

    expected = cfg0.copy()
    for r in range(2, k + 1):
        for u in hypercube(d - 1):
            expected.set(u + (r,), NEUTRAL)
    if b.cfg != expected:
        raise SpecError("slab-clearing endpoint mismatch")
    return cfg0, b.path()


# ---------------------------------------------------------------------------
# Star-graph gadgets on a 3x3 box (d = 2).
# ---------------------------------------------------------------------------

class StarBox:
    """Checked move gadgets around one good 3x3 box with origin ``o``.

    ``toggle`` flips an interior site between neutral and a given type by
    building a facilitation scaffold from the box corners and tearing it down
    afterwards; it is its own inverse.  Requires d = 2 and the star vacancy
    set {0, e1, e2}.
    """

    def __init__(self, builder, o):
        spec = builder.spec
        if spec.d != 2 or not is_star_spec(spec):
            raise SpecError("star-box gadgets need the d=2 star vacancy set")
        self.b = builder
        self.o = tuple(o)
        self.hc = spec.code((0, 0))
        self.h1 = spec.code((1, 0))
        self.h2 = spec.code((0, 1))

    def at(self, rel):
        return _add(self.o, rel)

    def toggle(self, rel, code):
        b, at = self.b, self.at
        hc, h1, h2 = self.hc, self.h1, self.h2
        if rel == (1, 1):
            chain = {hc: (1, 0), h1: (1, 0), h2: (0, 1)}[code]
            m = b.mark()
            b.flip(at(chain), code)
            b.flip(at(rel), code)
            b.undo(m, stop=m + 1)
        elif rel == (2, 1):
            if code == h1:
                b.flip(at(rel), code)       # corner at (2,0) always facilitates
            else:
                self._via((1, 1), rel, code)
        elif rel == (1, 2):
            if code == h2:
                b.flip(at(rel), code)       # corner at (0,2)
            else:
                self._via((1, 1), rel, code)
        elif rel == (2, 2):
            helper = (1, 2) if code == h2 else (2, 1)
            self._via(helper, rel, code)
        else:
            raise SpecError(f"{rel} is not an interior site of the box")

    def _via(self, helper_rel, rel, code):
        self.toggle(helper_rel, code)
        self.b.flip(self.at(rel), code)
        self.toggle(helper_rel, code)

    def clear_interior(self):
        for rel in ((1, 1), (2, 1), (1, 2), (2, 2)):
            cur = self.b.cfg.get(self.at(rel))
            if cur != NEUTRAL:
                self.toggle(rel, cur)


def star_spec_2d(q=(0.1, 0.1, 0.1)):
    return validate_params(2, star_types(2), q)


def _axis_codes(spec):
    """(h_c, h_1, h_2) codes of the star set."""
    return spec.code((0, 0)), spec.code((1, 0)), spec.code((0, 1))


def _corridor_sites(v, i, lo, hi, d=2):
    e = _e(i, d)
    return [_add(v, _scaled(e, j)) for j in range(lo, hi + 1)]


def _check_move_good_hypothesis(spec, omega, k, origin):
    if spec.d != 2 or not is_star_spec(spec):
        raise SpecError("box moves need the d=2 star vacancy set")
    if len(k) != 2 or any(int(ki) != ki or ki < 2 for ki in k):
        raise SpecError(f"per-axis distances must be integers >= 2, got {k}")
    if not is_good_box(spec, omega, origin):
        raise SpecError("the box at the origin is not good")
    _, h1, h2 = _axis_codes(spec)
    hcodes = (h1, h2)
    v = _add(origin, (1, 1))
    for i, ki in enumerate(k):
        e = _e(i, 2)
        for j in range(1, ki):
            x = _add(v, _scaled(e, j))
            if x not in omega.region:
                raise SpecError(f"region does not contain corridor site {x}")
            if omega.get(x) == hcodes[i]:
                raise SpecError(
                    f"k_{i + 1} is not minimal: axis vacancy already at {x}"
                )
        far = _add(v, _scaled(e, ki))
        if far not in omega.region or omega.get(far) != hcodes[i]:
            raise SpecError(f"missing axis-{i + 1} vacancy at {far}")


def move_good_endpoint(spec, omega, k, origin=(0, 0)):
    """The advertised final state: box moved by (1,1), corridor swept."""
    hc, h1, h2 = _axis_codes(spec)
    v = _add(origin, (1, 1))
    sigma = omega.copy()
    for x, code in good_box_sites(spec, v).items():
        sigma.set(x, code)
    for i, ki in enumerate(k):
        for j in range(3, ki):
            sigma.set(_add(v, _scaled(_e(i, 2), j)), NEUTRAL)
    return sigma


def build_move_good_path(spec, omega, k, origin=(0, 0)):
    """One diagonal step of a good box (d = 2).

    Move order: relax the box interior, sweep non-axis
    vacancies out of each corridor, drag the axis vacancy to the new corner
    (leaving the far copy in place), seed the new centre, and restore the
    one interior site the new box does not specify.
    """
    _check_move_good_hypothesis(spec, omega, k, origin)
    hc, h1, h2 = _axis_codes(spec)
    v = _add(origin, (1, 1))
    b = PathBuilder(spec, omega)
    box = StarBox(b, origin)

    kept_interior = omega.get(_add(origin, (2, 2)))
    box.clear_interior()

    for i, ki in enumerate(k):
        e = _e(i, 2)
        axis = (h1, h2)[i]
        for j in range(2, ki):
            s = _add(v, _scaled(e, j))
            cur = b.cfg.get(s)
            if cur == NEUTRAL:
                continue
            m = b.mark()
            box.toggle((1, 1), cur)
            b.extend_chain(cur, _corridor_sites(v, i, 1, j - 1))
            b.flip(s, cur)
            b.undo(m, stop=b.mark() - 1)
        if ki > 2:
            for j in range(ki - 1, 1, -1):
                b.flip(_add(v, _scaled(e, j)), axis)
            for j in range(3, ki):
                b.flip(_add(v, _scaled(e, j)), axis)

    box.toggle((1, 1), hc)

    if kept_interior != NEUTRAL:
        helper = {
            hc: ((2, 1), v),                    # facilitated by the new centre
            h1: ((2, 1), _add(v, (2, 0))),      # facilitated by the new corner
            h2: ((1, 2), _add(v, (0, 2))),
        }[kept_interior][0]
        hx = _add(origin, helper)
        b.flip(hx, kept_interior)
        b.flip(_add(origin, (2, 2)), kept_interior)
        b.flip(hx, kept_interior)

    sigma = move_good_endpoint(spec, omega, k, origin)
    if b.cfg != sigma:
        raise SpecError("box-move endpoint mismatch")
    return b.path()


def canonical_move_good_config(spec, k, pad=1, junk=True):
    """A smallest valid starting state for the one-step box move."""
    hc, h1, h2 = _axis_codes(spec)
    side = max(3 + 1 + max(k), 4) + pad
    region = Region.box((0, 0), (side, side))
    cfg = all_neutral(region, Closed())
    for x, code in good_box_sites(spec, (0, 0)).items():
        cfg.set(x, code)
    v = (1, 1)
    cfg.set(_add(v, (k[0], 0)), h1)
    cfg.set(_add(v, (0, k[1])), h2)
    if junk:
        cfg.set((2, 2), h1)
        if k[0] > 2:
            cfg.set(_add(v, (2, 0)), h2)
        if k[1] > 2:
            cfg.set(_add(v, (0, 2)), hc)
    return cfg


# ---------------------------------------------------------------------------
# Long-range move: N-2 diagonal steps with a fixed vacancy supply.
# ---------------------------------------------------------------------------

def _check_move_good2_hypothesis(spec, omega, N, k):
    if spec.d != 2 or not is_star_spec(spec):
        raise SpecError("box moves need the d=2 star vacancy set")
    if N % 2 or N < 4:
        raise SpecError("N must be even and >= 4")
    if len(k) != 2 or any(not (N <= ki <= 3 * N // 2) for ki in k):
        raise SpecError(f"distances must lie in [N, 3N/2], got {k}")
    if not is_good_box(spec, omega, (0, 0)):
        raise SpecError("the box at the origin is not good")
    _, h1, h2 = _axis_codes(spec)
    hcodes = (h1, h2)
    v = (1, 1)
    for i, ki in enumerate(k):
        e = _e(i, 2)
        for j in range(1, ki):
            x = _add(v, _scaled(e, j))
            if x not in omega.region or omega.get(x) != NEUTRAL:
                raise SpecError(f"corridor site {x} must be neutral")
        far = _add(v, _scaled(e, ki))
        if far not in omega.region or omega.get(far) != hcodes[i]:
            raise SpecError(f"missing axis-{i + 1} vacancy at {far}")
    top = max(N + 1, 1 + max(k))
    for xy in ((top, 0), (0, top), (top, top)):
        if xy not in omega.region:
            raise SpecError(f"region must contain the box [0, {top}]^2")


def _forward_sweep(spec, start, N, k):
    """No-cleanup forward construction shared by both surgery halves.

    Iterates the one-step move while preparing, one level ahead, a cleared
    line with a fresh axis vacancy at its end.  All scaffolding is retracted;
    everything this touches is left in a state that does not depend on the
    input values at the touched sites.
    """
    hc, h1, h2 = _axis_codes(spec)
    axes = (h1, h2)
    b = PathBuilder(spec, start)
    v = (1, 1)

    def source_pos(m, i):
        return k[i] if m == 0 else N - m

    for m in range(N - 2):
        o = (m, m)
        box = StarBox(b, o)
        box.clear_interior()
        anchor = _add(o, (2, 2))                  # (m+2)v, start of next line
        if m <= N - 4:
            for i in range(2):
                e = _e(i, 2)
                vv = _add(o, (1, 1))
                axis = axes[i]
                src = source_pos(m, i)
                plant = N - m - 1

                def clear_line_site(n, cur):
                    if cur == axis:
                        m0 = b.mark()
                        b.extend_chain(
                            cur,
                            [_add(vv, _scaled(e, j)) for j in range(src - 1, n, -1)],
                        )
                        b.flip(_add(anchor, _scaled(e, n)), cur)
                        b.undo(m0, stop=b.mark() - 1)
                    else:
                        side_rel = (1, 2) if i == 0 else (2, 1)
                        m0 = b.mark()
                        box.toggle(side_rel, cur)
                        b.extend_chain(
                            cur, [_add(anchor, _scaled(e, j)) for j in range(0, n)]
                        )
                        b.flip(_add(anchor, _scaled(e, n)), cur)
                        b.undo(m0, stop=b.mark() - 1)

                for n in range(1, plant):
                    cur = b.cfg.get(_add(anchor, _scaled(e, n)))
                    if cur != NEUTRAL:
                        clear_line_site(n, cur)
                s = _add(anchor, _scaled(e, plant))
                cur = b.cfg.get(s)
                if cur != NEUTRAL and cur != axis:
                    clear_line_site(plant, cur)
                    cur = NEUTRAL
                if cur == NEUTRAL:
                    m0 = b.mark()
                    b.extend_chain(
                        axis,
                        [_add(vv, _scaled(e, j)) for j in range(src - 1, plant, -1)],
                    )
                    b.flip(s, axis)
                    b.undo(m0, stop=b.mark() - 1)
        for i in range(2):
            e = _e(i, 2)
            src = source_pos(m, i)
            vv = _add(o, (1, 1))
            if src > 2:
                for j in range(src - 1, 1, -1):
                    b.flip(_add(vv, _scaled(e, j)), axes[i])
                for j in range(3, src):
                    b.flip(_add(vv, _scaled(e, j)), axes[i])
        box.toggle((1, 1), hc)
    return b


def move_good2_endpoint(spec, omega, N):
    sigma = omega.copy()
    far = (N - 2, N - 2)
    for x, code in good_box_sites(spec, far).items():
        sigma.set(x, code)
    return sigma


def build_move_good2_path(spec, omega, N, k):
    """N-2 diagonal steps of a good box, restoring everything else.

    The literal endpoint (final box good, every other site as in the start
    state) is reached by running the forward sweep from both endpoints to a
    common midpoint and splicing the second half reversed; reversing a legal
    path is legal, and the checked builder validates every flip of both
    halves.
    """
    _check_move_good2_hypothesis(spec, omega, N, k)
    sigma = move_good2_endpoint(spec, omega, N)
    fwd = _forward_sweep(spec, omega, N, k)
    back = _forward_sweep(spec, sigma, N, k)
    if fwd.cfg != back.cfg:
        raise SpecError("surgery halves do not meet; construction bug")
    for step in reversed(back.steps):
        fwd.flip(step.site, spec.code(step.h))
    if fwd.cfg != sigma:
        raise SpecError("long-move endpoint mismatch")
    return fwd.path()


def canonical_move_good2_config(spec, N, k, junk=True):
    """A smallest valid starting state for the long box move."""
    hc, h1, h2 = _axis_codes(spec)
    side = max(N + 2, 2 + max(k))
    region = Region.box((0, 0), (side, side))
    cfg = all_neutral(region, Closed())
    for x, code in good_box_sites(spec, (0, 0)).items():
        cfg.set(x, code)
    cfg.set((1 + k[0], 1), h1)
    cfg.set((1, 1 + k[1]), h2)
    if junk:
        cfg.set((2, 2), h1)
        cfg.set((4, 2), h2)
        cfg.set((2, 4), hc)
        cfg.set((N - 1, N - 1), h2)
    return cfg
