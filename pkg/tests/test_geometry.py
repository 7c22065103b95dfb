import numpy as np
import pytest

from mcem.lattice import SpecError, propagation_directions
from mcem.geometry import (
    GridGeometry,
    base_cell,
    bottom_boundary,
    frame_map,
    left_boundary,
)


class TestBoundaries:
    def test_bottom_shape_ell8(self):
        # single east step, three two-by-two zigzags, a final double-north
        # and a single east step
        expected = [
            (1, 3), (2, 3), (2, 4), (2, 5), (3, 5), (4, 5), (4, 6), (4, 7),
            (5, 7), (6, 7), (6, 8), (6, 9), (7, 9), (8, 9), (8, 10), (8, 11),
            (9, 11),
        ]
        assert list(bottom_boundary(8)) == expected

    def test_left_shape_ell8(self):
        expected = [
            (1, 3), (1, 4), (1, 5), (1, 6), (1, 7),
            (2, 7), (2, 8), (2, 9), (2, 10), (2, 11),
        ]
        assert list(left_boundary(8)) == expected

    def test_left_ell16_starts_with_four_north(self):
        d2 = left_boundary(16)
        assert d2[:5] == ((1, 3), (1, 4), (1, 5), (1, 6), (1, 7))
        ys = [y for _, y in d2]
        assert max(ys) - min(ys) == 16

    def test_bottom_ell16_first_and_last_steps_single(self):
        d1 = bottom_boundary(16)
        assert d1[1][0] - d1[0][0] == 1 and d1[1][1] == d1[0][1]
        assert d1[-1][0] - d1[-2][0] == 1 and d1[-1][1] == d1[-2][1]
        assert d1[-1] == (1 + 16, 3 + 16)

    def test_boundaries_are_kernel_paths(self):
        # consecutive-vertex differences are reversed propagation steps of
        # the north-east type
        steps = set()
        for pts in (bottom_boundary(16), left_boundary(16)):
            for a, b in zip(pts, pts[1:]):
                steps.add((b[0] - a[0], b[1] - a[1]))
        assert steps == {(1, 0), (0, 1)}

    def test_multiple_of_eight_required(self):
        for bad in (0, 4, 12):
            with pytest.raises(SpecError):
                base_cell(bad)


class TestCell:
    def test_corner_gluing(self):
        c = base_cell(8)
        assert c.d3[0] == c.d2[-1]
        assert c.d4[0] == c.d1[-1]
        assert c.d3[-1] == c.d4[-1]

    def test_translation_equivariance(self):
        c = base_cell(8)
        t = base_cell(8, origin=(4, -3))
        assert t.sites == frozenset((x + 4, y - 3) for x, y in c.sites)
        assert t.d1 == tuple((x + 4, y - 3) for x, y in c.d1)

    def test_row_intervals_have_no_holes(self):
        c = base_cell(16)
        rows = {}
        for x, y in c.sites:
            rows.setdefault(y, []).append(x)
        for y, xs in rows.items():
            xs = sorted(xs)
            assert xs == list(range(xs[0], xs[-1] + 1))


class TestGrid:
    def test_shared_boundaries(self):
        g = GridGeometry((1, 1), 8, 1)
        assert g.cells[(0, 0)].d4 == g.cells[(1, 0)].d2
        assert g.cells[(0, 0)].d3 == g.cells[(0, 1)].d1
        assert g.cells[(1, 0)].d3 == g.cells[(1, 1)].d1

    def test_lattice_vectors(self):
        g = GridGeometry((1, 1), 16, 1)
        assert g.b1 == (16, 16) and g.b2 == (2, 16)
        base = g.cells[(0, 0)].d1[0]
        assert g.cells[(1, 0)].d1[0] == (base[0] + 16, base[1] + 16)
        assert g.cells[(0, 1)].d1[0] == (base[0] + 2, base[1] + 16)

    @pytest.mark.parametrize("h", [(0, 0), (0, 1), (1, 1)])
    def test_transformed_paths_follow_propagation(self, h):
        # absolute boundary walks of the h-geometry step against P(h):
        # consecutive vertices satisfy x_i - x_{i+1} in P(h)
        g = GridGeometry(h, 8, 0)
        dirs = propagation_directions(h)
        pts = [g.to_abs(p) for p in g.cells[(0, 0)].d1]
        for a, b in zip(pts, pts[1:]):
            assert (a[0] - b[0], a[1] - b[1]) in dirs

    def test_no_geometry_for_fourth_type(self):
        with pytest.raises(SpecError):
            GridGeometry((1, 0), 8, 0)

    def test_origin_translation(self):
        g0 = GridGeometry((1, 1), 8, 0)
        g1 = GridGeometry((1, 1), 8, 0, origin=(10, 20))
        assert g1.to_abs((1, 3)) == (11, 23)
        assert g1.abs_sites() == {(x + 10, y + 20) for x, y in g0.abs_sites()}


class TestStrip:
    def test_entries_and_exits_avoid_side_chains(self):
        g = GridGeometry((1, 1), 8, 1)
        s = g.vertical_strip(0)
        for p in s.entry + s.exit:
            assert p not in s.sides
        h = g.horizontal_strip(1)
        for p in h.entry + h.exit:
            assert p not in h.sides

    def test_domain_topologically_sorted(self):
        g = GridGeometry((1, 1), 8, 1)
        s = g.vertical_strip(1)
        keys = [p[0] + p[1] for p in s.domain]
        assert keys == sorted(keys)
