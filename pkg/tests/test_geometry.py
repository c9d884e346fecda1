import math

import numpy as np
import pytest

from beltrami_lab import (CantorSpec, GridSpec, PointCloud, cantor_cloud,
                          default_garnett_displacements, garnett_map,
                          make_radial_stretch_coefficient, map_cloud,
                          neumann_solve, segment_cloud, similarity_dimension,
                          square_cloud)


class TestCantorCloud:
    def test_generation_zero_is_center(self):
        cloud = cantor_cloud(CantorSpec(0))
        assert len(cloud) == 1
        assert cloud.points[0] == 0j

    def test_generation_one_corners(self):
        # one corner-similitude step: centers at (+-3/8, +-3/8)
        cloud = cantor_cloud(CantorSpec(1, 0.25))
        got = sorted(cloud.points.tolist(), key=lambda z: (z.real, z.imag))
        want = [complex(-0.375, -0.375), complex(-0.375, 0.375),
                complex(0.375, -0.375), complex(0.375, 0.375)]
        assert np.allclose(got, want, atol=1e-15)

    @pytest.mark.parametrize("gen", range(1, 7))
    def test_cardinality(self, gen):
        assert len(cantor_cloud(CantorSpec(gen))) == 4 ** gen

    def test_determinism(self):
        a = cantor_cloud(CantorSpec(5, 1 / 3))
        b = cantor_cloud(CantorSpec(5, 1 / 3))
        assert np.array_equal(a.points, b.points)

    def test_nesting(self):
        # every child center stays within (sqrt2/2) * rho^(N-1) of a parent center
        rho = 0.25
        parents = cantor_cloud(CantorSpec(3, rho)).points
        children = cantor_cloud(CantorSpec(4, rho)).points
        lim = (math.sqrt(2) / 2) * rho ** 3
        dmin = np.min(np.abs(children[:, None] - parents[None, :]), axis=1)
        assert np.max(dmin) <= lim + 1e-15

    def test_cap_rejected(self):
        with pytest.raises(ValueError, match="cap"):
            cantor_cloud(CantorSpec(13))

    def test_contraction_validated(self):
        with pytest.raises(ValueError):
            CantorSpec(2, 0.6)
        with pytest.raises(ValueError):
            CantorSpec(2, 0.0)


class TestSimilarityDimension:
    def test_quarter(self):
        assert similarity_dimension(CantorSpec(1, 0.25)) == pytest.approx(1.0)

    def test_third(self):
        assert similarity_dimension(CantorSpec(1, 1 / 3)) == pytest.approx(
            math.log(4) / math.log(3))

    def test_half_tiles_plane(self):
        assert similarity_dimension(CantorSpec(1, 0.5)) == pytest.approx(2.0)


class TestCalibrationClouds:
    def test_segment_three_points(self):
        cloud = segment_cloud(3)
        assert np.allclose(cloud.points, [-0.5, 0.0, 0.5])

    def test_segment_count_validated(self):
        with pytest.raises(ValueError):
            segment_cloud(1)

    def test_square_layout(self):
        cloud = square_cloud(16)
        assert len(cloud) == 16
        assert np.max(np.abs(cloud.points.real)) < 0.5


class TestPointCloud:
    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            PointCloud(np.array([np.nan + 0j]))

    def test_read_only(self):
        cloud = segment_cloud(8)
        with pytest.raises(ValueError):
            cloud.points[0] = 0


class TestGarnettMap:
    def test_zero_displacements_identity(self):
        spec = CantorSpec(4, 0.25)
        out = garnett_map(spec, [0.0] * 4)
        assert np.array_equal(out.points, cantor_cloud(spec).points)

    def test_default_injective(self):
        out = garnett_map(CantorSpec(6, 0.25))
        assert np.unique(out.points).size == 4 ** 6

    def test_displacement_budget_exact(self):
        spec = CantorSpec(6, 0.25)
        disp = default_garnett_displacements(6)
        out = garnett_map(spec, disp)
        src = cantor_cloud(spec)
        moved = np.max(np.abs(out.points - src.points))
        assert moved <= sum(disp) + 1e-15
        # the all-NE branch accumulates every level displacement exactly
        assert moved == pytest.approx(math.fsum(disp), abs=1e-12)
        assert math.fsum(default_garnett_displacements(6)) <= 0.1

    def test_displacement_count_checked(self):
        with pytest.raises(ValueError, match="displacements"):
            garnett_map(CantorSpec(3, 0.25), [0.1, 0.1])

    def test_rho_checked(self):
        with pytest.raises(ValueError, match="quarter"):
            garnett_map(CantorSpec(3, 1 / 3))

    def test_center_collision_rejected_with_level(self):
        # sqrt(2) d' = 3 side/4 collapses the moved siblings at that level
        bad = 3.0 / (4.0 * math.sqrt(2.0))
        with pytest.raises(ValueError, match="level 1"):
            garnett_map(CantorSpec(2, 0.25), [bad, 0.001])
        with pytest.raises(ValueError, match="level 2"):
            garnett_map(CantorSpec(2, 0.25), [0.001, bad * 0.25])


class TestMapCloud:
    def test_identity_solution(self):
        grid_mu = make_radial_stretch_coefficient(1.0, 0.5, GridSpec(64, 2.0))
        sol = neumann_solve(grid_mu, tol=1e-12)
        cloud = segment_cloud(64)
        out = map_cloud(sol, cloud)
        assert np.allclose(out.points, cloud.points, atol=1e-12)
        assert len(out) == len(cloud)

    def test_radial_image_point(self, radial_sol_512):
        from oracles import radial_stretch_map
        cloud = PointCloud(np.array([0.25 + 0j]))
        out = map_cloud(radial_sol_512, cloud)
        want = radial_stretch_map(np.array([0.25 + 0j]), 2.0, 0.8)[0]
        assert abs(out.points[0] - want) <= 3 * radial_sol_512.grid.spacing
        assert np.all(np.isfinite(out.points.view(np.float64)))
