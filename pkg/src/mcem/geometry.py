"""Cell, strip and grid geometry for the crossing-probability estimates.

Everything is built once in the frame of the north-east vacancy type (whose
paths step +e1/+e2) and mapped to the requested type by the coordinate
exchanges that rotate the propagation directions; searches therefore run in
kernel coordinates regardless of the type.

A cell with side length ell (a multiple of 8) is enclosed by four staircase
boundaries: the bottom one steps east once, zigzags two north / two east
until ell east steps are spent (single last step), and the left one runs
four north, one east, then eights north / one east ending with four north.
The top and right boundaries are translated copies, so vertically and
horizontally adjacent cells share a boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import NEUTRAL, SpecError

ANCHOR = (1, 3)   # first vertex of the bottom boundary of cell (0, 0)


def _walk(start, runs):
    """Vertices of a staircase walk; runs are (direction, count) pairs."""
    pts = [tuple(start)]
    x, y = start
    for (dx, dy), cnt in runs:
        for _ in range(cnt):
            x, y = x + dx, y + dy
            pts.append((x, y))
    return tuple(pts)


def bottom_boundary(ell, origin=(0, 0)):
    if ell % 8 or ell < 8:
        raise SpecError("cell side length must be a positive multiple of 8")
    runs = [((1, 0), 1)]
    for _ in range(ell // 2 - 1):
        runs.append(((0, 1), 2))
        runs.append(((1, 0), 2))
    runs.append(((0, 1), 2))
    runs.append(((1, 0), 1))
    start = (origin[0] + ANCHOR[0], origin[1] + ANCHOR[1])
    return _walk(start, runs)


def left_boundary(ell, origin=(0, 0)):
    if ell % 8 or ell < 8:
        raise SpecError("cell side length must be a positive multiple of 8")
    runs = [((0, 1), 4), ((1, 0), 1)]
    for _ in range(ell // 8 - 1):
        runs.append(((0, 1), 8))
        runs.append(((1, 0), 1))
    runs.append(((0, 1), 4))
    start = (origin[0] + ANCHOR[0], origin[1] + ANCHOR[1])
    return _walk(start, runs)


def _shift(points, dx, dy):
    return tuple((x + dx, y + dy) for x, y in points)


@dataclass(frozen=True)
class Cell:
    """One cell: its four boundaries and the enclosed vertex set."""

    ell: int
    origin: tuple
    d1: tuple   # bottom
    d2: tuple   # left
    d3: tuple   # top
    d4: tuple   # right
    sites: frozenset


def base_cell(ell, origin=(0, 0)):
    d1 = bottom_boundary(ell, origin)
    d2 = left_boundary(ell, origin)
    d3 = _shift(d1, ell // 8, ell)
    d4 = _shift(d2, ell, ell)
    boundary = set(d1) | set(d2) | set(d3) | set(d4)
    rows = {}
    for x, y in boundary:
        lo, hi = rows.get(y, (x, x))
        rows[y] = (min(lo, x), max(hi, x))
    sites = set()
    for y, (lo, hi) in rows.items():
        for x in range(lo, hi + 1):
            sites.add((x, y))
    return Cell(ell, tuple(origin), d1, d2, d3, d4, frozenset(sites))


KERNEL_TYPE = (1, 1)

# Coordinate exchange taking the kernel frame to each supported type's frame.
_TRANSFORMS = {
    (1, 1): lambda x, y: (x, y),
    (0, 0): lambda x, y: (-y, -x),    # e1 <-> -e2, e2 <-> -e1
    (0, 1): lambda x, y: (-x, y),     # e1 <-> -e1
}


def frame_map(h):
    h = tuple(h)
    if h not in _TRANSFORMS:
        raise SpecError(f"no cell geometry for vacancy type {h}")
    return _TRANSFORMS[h]


@dataclass(frozen=True)
class GridGeometry:
    """(n+1) x (n+1) cells translated along b1 = (ell, ell), b2 = (ell/8, ell).

    Vertically adjacent cells share their top/bottom boundary and
    horizontally adjacent cells their right/left boundary.  ``to_abs`` maps
    kernel coordinates to the requested type's frame (plus the origin); all
    searches run in kernel coordinates.
    """

    h: tuple
    ell: int
    n: int
    origin: tuple = (0, 0)
    cells: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        frame_map(self.h)
        for i in range(self.n + 1):
            for j in range(self.n + 1):
                o = (i * self.ell + j * (self.ell // 8), i * self.ell + j * self.ell)
                self.cells[(i, j)] = base_cell(self.ell, o)

    @property
    def b1(self):
        return (self.ell, self.ell)

    @property
    def b2(self):
        return (self.ell // 8, self.ell)

    def to_abs(self, p):
        x, y = frame_map(self.h)(*p)
        return (x + self.origin[0], y + self.origin[1])

    def all_kernel_sites(self):
        out = set()
        for cell in self.cells.values():
            out |= cell.sites
        return out

    def abs_sites(self):
        return {self.to_abs(p) for p in self.all_kernel_sites()}

    def vertical_strip(self, i):
        cells = [self.cells[(i, j)] for j in range(self.n + 1)]
        left = set().union(*(set(c.d2) for c in cells))
        right = set().union(*(set(c.d4) for c in cells))
        entry = [p for p in cells[0].d1 if p not in left and p not in right]
        exit_ = [p for p in cells[-1].d3 if p not in left and p not in right]
        return Strip(self, "vertical", i, cells, left, right, entry, exit_)

    def horizontal_strip(self, j):
        cells = [self.cells[(i, j)] for i in range(self.n + 1)]
        bottom = set().union(*(set(c.d1) for c in cells))
        top = set().union(*(set(c.d3) for c in cells))
        entry = [p for p in cells[0].d2 if p not in bottom and p not in top]
        exit_ = [p for p in cells[-1].d4 if p not in bottom and p not in top]
        return Strip(self, "horizontal", j, cells, bottom, top, entry, exit_)


@dataclass
class CrossingResult:
    exists: bool
    witness: tuple | None     # absolute coordinates when present
    orientation: str


class Strip:
    """One strip of cells with the crossing search machinery.

    ``sides`` holds the two side chains a crossing must avoid; entries and
    exits are the far boundaries minus those chains.  Kernel paths step
    +e1/+e2 (against the kernel type's propagation arrows), so reachability
    is a single sweep in (x+y) order.
    """

    def __init__(self, geometry, orientation, index, cells, side_a, side_b, entry, exit_):
        self.geometry = geometry
        self.orientation = orientation
        self.index = index
        self.cells = cells
        self.sides = side_a | side_b
        self.entry = [p for p in entry]
        self.exit = [p for p in exit_]
        self.sites = set()
        for c in cells:
            self.sites |= c.sites
        self.domain = sorted(self.sites - self.sides, key=lambda p: (p[0] + p[1], p))
        self._pos = {p: k for k, p in enumerate(self.domain)}
        self.entry_set = set(self.entry)
        self.exit_set = set(self.exit)
        n = len(self.domain)
        self.pred_left = np.full(n, -1, dtype=np.int64)
        self.pred_below = np.full(n, -1, dtype=np.int64)
        self.entry_mask = np.zeros(n, dtype=bool)
        self.exit_mask = np.zeros(n, dtype=bool)
        for k, p in enumerate(self.domain):
            le = (p[0] - 1, p[1])
            be = (p[0], p[1] - 1)
            if le in self._pos:
                self.pred_left[k] = self._pos[le]
            if be in self._pos:
                self.pred_below[k] = self._pos[be]
            if p in self.entry_set:
                self.entry_mask[k] = True
            if p in self.exit_set:
                self.exit_mask[k] = True

    # -- state access -------------------------------------------------------

    def open_from_config(self, spec, cfg):
        """open[k]: domain site k holds the neutral state or the strip's type."""
        code = spec.code(self.geometry.h)
        out = np.zeros(len(self.domain), dtype=bool)
        for k, p in enumerate(self.domain):
            a = self.geometry.to_abs(p)
            if a not in cfg.region:
                raise SpecError(f"configuration does not cover strip site {a}")
            s = cfg.get(a)
            out[k] = s == NEUTRAL or s == code
        return out

    # -- crossing search ----------------------------------------------------

    def reach(self, open_vec):
        r = np.zeros(len(self.domain), dtype=bool)
        for k in range(len(self.domain)):
            if not open_vec[k]:
                continue
            if self.entry_mask[k]:
                r[k] = True
                continue
            lf = self.pred_left[k]
            bw = self.pred_below[k]
            r[k] = (lf >= 0 and r[lf]) or (bw >= 0 and r[bw])
        return r

    def has_crossing(self, open_vec):
        return bool(np.any(self.reach(open_vec) & self.exit_mask))

    def reach_batch(self, open_mat):
        """Vectorised reachability over many samples: (n_samples, n_sites)."""
        r = np.zeros_like(open_mat)
        for k in range(len(self.domain)):
            acc = self.entry_mask[k]
            lf, bw = self.pred_left[k], self.pred_below[k]
            col = np.full(open_mat.shape[0], acc)
            if lf >= 0:
                col |= r[:, lf]
            if bw >= 0:
                col |= r[:, bw]
            r[:, k] = col & open_mat[:, k]
        return r

    def crossing_exists_batch(self, open_mat):
        r = self.reach_batch(open_mat)
        return np.any(r[:, self.exit_mask], axis=1)

    def smallest_witness(self, open_vec):
        """Greedy east-first minimal crossing, or None.

        The first vertex is the smallest feasible entry in the componentwise
        order (total along the entry staircase); afterwards the east step is
        preferred, which resolves the incomparable successor pairs the
        crossing order leaves free.
        """
        can_exit = np.zeros(len(self.domain), dtype=bool)
        for k in range(len(self.domain) - 1, -1, -1):
            if not open_vec[k]:
                continue
            if self.exit_mask[k]:
                can_exit[k] = True
                continue
            p = self.domain[k]
            for q in ((p[0] + 1, p[1]), (p[0], p[1] + 1)):
                m = self._pos.get(q)
                if m is not None and can_exit[m]:
                    can_exit[k] = True
                    break
        starts = [k for k, p in enumerate(self.domain)
                  if self.entry_mask[k] and can_exit[k]]
        if not starts:
            return None
        k = min(starts, key=lambda m: self.domain[m])
        path = [self.domain[k]]
        while not self.exit_mask[k]:
            p = self.domain[k]
            step = None
            for q in ((p[0] + 1, p[1]), (p[0], p[1] + 1)):
                m = self._pos.get(q)
                if m is not None and can_exit[m]:
                    step = m
                    break
            if step is None:
                raise SpecError("witness extraction lost the exit")
            k = step
            path.append(self.domain[k])
        return tuple(path)

    def find_crossing(self, spec, cfg):
        open_vec = self.open_from_config(spec, cfg)
        witness = self.smallest_witness(open_vec)
        if witness is None:
            return CrossingResult(False, None, self.orientation)
        return CrossingResult(
            True, tuple(self.geometry.to_abs(p) for p in witness), self.orientation
        )

    # -- dual contour check # ----------------------------------------------------------

    def closed_dual_path(self, open_vec):
        """The blocking contour on the dual lattice, or None.

        Re-derives the reachable set with a plain queue BFS (independent of
        the sweep used by the crossing search), takes the faces straddling
        its boundary together with the entry line, and searches them for a
        dual path connecting a face incident to one side chain to a face
        incident to the other.  A dual step is admissible exactly when the
        primal edge it crosses does not have both endpoints inside the
        reached set: every path from the entry stays inside that set, so an
        admissible curve is impossible for a crossing to traverse, while the
        frontier of the reached set supplies one whenever no crossing exists.
        The sites the frontier excludes are blocking vacancies or side-chain
        sites, which is the countable content of the contour argument.
        """
        from collections import deque

        usable = {p: bool(open_vec[k]) for k, p in enumerate(self.domain)}
        inside = set()
        queue = deque()
        for p in self.entry:
            if usable.get(p, False):
                inside.add(p)
                queue.append(p)
        while queue:
            p = queue.popleft()
            for q in ((p[0] + 1, p[1]), (p[0], p[1] + 1)):
                if q not in inside and usable.get(q, False):
                    inside.add(q)
                    queue.append(q)
        if inside & self.exit_set:
            return None
        blob = inside | self.entry_set

        faces = set()
        for c in self.sites:
            if all((c[0] + dx, c[1] + dy) in self.sites
                   for dx in (0, 1) for dy in (0, 1)):
                faces.add(c)
        corners = ((0, 0), (1, 0), (0, 1), (1, 1))
        contour = set()
        for c in faces:
            hits = sum(((c[0] + dx, c[1] + dy) in blob) for dx, dy in corners)
            if 0 < hits < 4:
                contour.add(c)
        side_a, side_b = self._side_chains()
        start = {c for c in contour if self._touches(c, side_a)}
        goal = {c for c in contour if self._touches(c, side_b)}
        if not start or not goal:
            return None
        parents = {c: None for c in start}
        queue = deque(sorted(start))
        hit = None
        while queue and hit is None:
            c = queue.popleft()
            if c in goal:
                hit = c
                break
            sw, se = c, (c[0] + 1, c[1])
            nw, ne = (c[0], c[1] + 1), (c[0] + 1, c[1] + 1)
            moves = []
            if not (se in blob and ne in blob):
                moves.append((c[0] + 1, c[1]))            # east
            if not (nw in blob and ne in blob):
                moves.append((c[0], c[1] + 1))            # north
            if not (sw in blob and se in blob):
                moves.append((c[0], c[1] - 1))            # south
            if not (sw in blob and nw in blob):
                moves.append((c[0] - 1, c[1]))            # west
            for nxt in moves:
                if nxt in contour and nxt not in parents:
                    parents[nxt] = c
                    queue.append(nxt)
        if hit is None:
            for c in sorted(goal):
                if c in parents:
                    hit = c
                    break
        if hit is None:
            return None
        path = [hit]
        while parents[path[-1]] is not None:
            path.append(parents[path[-1]])
        path.reverse()
        return tuple(path)

    def closed_dual_path_exists(self, open_vec):
        return self.closed_dual_path(open_vec) is not None

    def _touches(self, c, chain):
        return any(
            (c[0] + dx, c[1] + dy) in chain for dx in (0, 1) for dy in (0, 1)
        )

    def _side_chains(self):
        if not hasattr(self, "_sa"):
            if self.orientation == "vertical":
                self._sa = set().union(*(set(c.d2) for c in self.cells))
                self._sb = set().union(*(set(c.d4) for c in self.cells))
            else:
                self._sa = set().union(*(set(c.d1) for c in self.cells))
                self._sb = set().union(*(set(c.d3) for c in self.cells))
        return self._sa, self._sb
