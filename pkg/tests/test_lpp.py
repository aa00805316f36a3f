import numpy as np
import pytest

import kpzlab as kz
from kpzlab.errors import BoundsError, InfeasibleError, ParameterError, UnreachableError
from conftest import oracle_passage, oracle_two_path, random_grid


def grid_of(rows):
    w = np.asarray(rows, dtype=float)
    return kz.EnvGrid(w.shape[0], w.shape[1], w, kz.constant(1.0), 0)


G22 = grid_of([[1, 2], [3, 4]])


class TestPassageField:
    def test_2x2(self):
        f = kz.passage_field(G22, (0, 0))
        assert f.values[1, 1] == 8.0
        assert f.values[0, 0] == 1.0  # source value is its own weight

    def test_single_cell(self):
        g = grid_of([[3.5]])
        assert kz.passage_field(g, (0, 0)).values[0, 0] == 3.5

    def test_unique_path_1x3(self):
        g = grid_of([[1, 2, 3]])
        assert kz.passage_field(g, (0, 0)).values[0, 2] == 6.0

    def test_recursion_invariant(self, rng):
        g = random_grid(rng, 5, 6)
        v = kz.passage_field(g, (0, 0)).values
        for i in range(1, 5):
            for j in range(1, 6):
                assert v[i, j] == pytest.approx(
                    g.weights[i, j] + max(v[i - 1, j], v[i, j - 1])
                )

    def test_interior_source_unreachable_region(self):
        f = kz.passage_field(G22, (1, 1))
        assert f.values[1, 1] == 4.0
        assert np.isneginf(f.values[0, 0])

    def test_source_out_of_range(self):
        with pytest.raises(BoundsError):
            kz.passage_field(G22, (2, 0))

    def test_matches_enumeration(self, rng):
        for _ in range(150):
            rows, cols = rng.integers(1, 5, size=2)
            g = random_grid(rng, rows, cols)
            v = kz.passage_field(g, (0, 0)).values
            assert v[rows - 1, cols - 1] == pytest.approx(
                oracle_passage(g.weights, (0, 0), (rows - 1, cols - 1)), abs=1e-10
            )


class TestPointToPoint:
    def test_unique_path(self):
        assert kz.point_to_point(G22, (0, 0), (1, 0)) == 4.0

    def test_degenerate(self):
        assert kz.point_to_point(G22, (0, 0), (0, 0)) == 1.0

    def test_composition_with_double_count_correction(self):
        target = kz.point_to_point(G22, (0, 0), (1, 1))
        over_mid = max(
            kz.point_to_point(G22, (0, 0), k)
            + kz.point_to_point(G22, k, (1, 1))
            - G22.weights[k]
            for k in [(1, 0), (0, 1)]
        )
        assert over_mid == target == 8.0

    def test_unreachable(self):
        with pytest.raises(UnreachableError):
            kz.point_to_point(G22, (1, 1), (0, 0))

    def test_reversal_symmetry(self, rng):
        g = random_grid(rng, 4, 5)
        rev = kz.EnvGrid(4, 5, np.ascontiguousarray(g.weights[::-1, ::-1]), g.dist, 0)
        for a, b in [((0, 0), (3, 4)), ((1, 1), (2, 3))]:
            ra = (3 - b[0], 4 - b[1])
            rb = (3 - a[0], 4 - a[1])
            assert kz.point_to_point(g, a, b) == pytest.approx(
                kz.point_to_point(rev, ra, rb)
            )


class TestGeodesic:
    def test_2x2(self):
        assert kz.geodesic(G22, (0, 0), (1, 1)).sites == [(0, 0), (1, 0), (1, 1)]

    def test_1x3(self):
        g = grid_of([[1, 2, 3]])
        assert kz.geodesic(g, (0, 0), (0, 2)).sites == [(0, 0), (0, 1), (0, 2)]

    def test_tie_break_down_first(self):
        g = grid_of([[1, 1], [1, 1]])
        assert kz.geodesic(g, (0, 0), (1, 1)).sites == [(0, 0), (1, 0), (1, 1)]

    def test_weight_matches_passage(self, rng):
        for _ in range(50):
            g = random_grid(rng, 6, 6)
            path = kz.geodesic(g, (0, 0), (5, 5))
            assert path.weight(g) == pytest.approx(kz.point_to_point(g, (0, 0), (5, 5)))
            steps = np.diff(np.asarray(path.sites), axis=0)
            assert ((steps == [0, 1]) | (steps == [1, 0])).all(axis=1).all()

    def test_matches_enumeration(self, rng):
        from conftest import enumerate_paths, path_weight

        for _ in range(40):
            g = random_grid(rng, 4, 4)
            best = max(
                enumerate_paths((0, 0), (3, 3)), key=lambda p: path_weight(g.weights, p)
            )
            assert kz.geodesic(g, (0, 0), (3, 3)).sites == best


class TestTwoPath:
    def test_center_bonus(self):
        w = np.ones((3, 3))
        w[1, 1] = 5.0
        g = kz.EnvGrid(3, 3, w, kz.constant(1.0), 0)
        assert kz.two_path_passage(g, ((0, 0), (0, 1)), ((2, 1), (2, 2))) == 12.0

    def test_forced_configuration(self):
        assert kz.two_path_passage(G22, ((0, 0), (0, 1)), ((1, 0), (1, 1))) == 10.0

    def test_equality_iff_disjoint_geodesics(self, rng):
        hits = 0
        for _ in range(120):
            g = random_grid(rng, 4, 4)
            starts, ends = ((1, 0), (0, 1)), ((3, 2), (2, 3))
            tp = kz.two_path_passage(g, starts, ends)
            singles = kz.point_to_point(g, starts[0], ends[0]) + kz.point_to_point(
                g, starts[1], ends[1]
            )
            from conftest import ordered_disjoint

            disjoint = ordered_disjoint(
                kz.geodesic(g, starts[0], ends[0]).sites,
                kz.geodesic(g, starts[1], ends[1]).sites,
            )
            # continuous weights: a.s. unique geodesics, so equality <=> disjoint
            assert (abs(tp - singles) < 1e-9) == disjoint
            assert tp <= singles + 1e-9
            hits += disjoint
        assert 0 < hits < 120  # both branches exercised

    def test_matches_enumeration(self, rng):
        for _ in range(60):
            g = random_grid(rng, 4, 4)
            starts, ends = ((1, 0), (0, 1)), ((3, 2), (2, 3))
            want = oracle_two_path(g.weights, starts, ends)
            assert kz.two_path_passage(g, starts, ends) == pytest.approx(want, abs=1e-9)

    def test_staggered_endpoints_match_enumeration(self, rng):
        for _ in range(40):
            g = random_grid(rng, 4, 4)
            starts, ends = ((0, 0), (0, 2)), ((3, 1), (3, 3))
            want = oracle_two_path(g.weights, starts, ends)
            assert kz.two_path_passage(g, starts, ends) == pytest.approx(want, abs=1e-9)

    def test_infeasible(self):
        # a single-row grid cannot hold two ordered paths on a shared antidiagonal
        g = grid_of([[1, 1, 1]])
        with pytest.raises(InfeasibleError):
            kz.two_path_passage(g, ((0, 0), (0, 1)), ((0, 1), (0, 2)))

    def test_ordering_validation(self):
        with pytest.raises(ParameterError):
            kz.two_path_passage(G22, ((0, 1), (1, 0)), ((1, 0), (1, 1)))


class TestQuadrangle:
    def test_constant_grid_zero(self):
        g = grid_of(np.ones((3, 3)))
        assert kz.quadrangle_defect(g, (0, 0), (0, 1), (2, 1), (2, 2)) == 0.0

    def test_crafted_defect_one(self):
        g = grid_of([[1, 1, 1], [10, 0.5, 10], [1, 1, 1]])
        assert kz.quadrangle_defect(g, (0, 0), (0, 1), (2, 1), (2, 2)) == pytest.approx(1.0)

    def test_nonnegative_property(self, rng):
        # planarity inequality on random grids and feasible quadruples
        for _ in range(400):
            rows, cols = rng.integers(3, 7, size=2)
            g = random_grid(rng, rows, cols)
            d = rng.integers(1, rows + cols - 2)
            sites = [(i, d - i) for i in range(max(0, d - cols + 1), min(rows - 1, d) + 1)]
            if len(sites) < 2:
                continue
            x1, x2 = sites[-1], sites[0]  # leftmost has largest row
            y1, y2 = (rows - 1, cols - 2), (rows - 2, cols - 1)
            if x1[1] >= y1[1] or x2[0] < y2[0]:
                continue
            try:
                defect = kz.quadrangle_defect(g, x1, x2, y1, y2)
            except (InfeasibleError, ParameterError):
                continue
            assert defect >= -1e-9

    def test_infeasible_pair(self):
        g = grid_of(np.ones((3, 3)))
        with pytest.raises(InfeasibleError):
            kz.quadrangle_defect(g, (2, 0), (0, 2), (2, 1), (0, 2))

    def test_ordering_validation(self):
        g = grid_of(np.ones((3, 3)))
        with pytest.raises(ParameterError):
            kz.quadrangle_defect(g, (0, 1), (0, 0), (2, 1), (2, 2))
