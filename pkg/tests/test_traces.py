import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parsym.errors import DegenerateSurface, InputError, OutOfDomain
from parsym.geometry import Disk, Ellipse, Polygon, minkowski_sum_ball
from parsym.solver import solve_torsion
from parsym.traces import (
    boundary_extrema,
    lipschitz_seminorm,
    normal_derivative,
    pair_seminorm,
    parallel_oscillation,
    sample_boundary,
    tangential_seminorm,
    trace_values,
)

UNIT = Disk((0.0, 0.0), 1.0)


class TestSampling:
    def test_four_points_on_circle(self):
        tr = sample_boundary(UNIT, 4)
        ang = np.sort(np.mod(np.arctan2(tr.points[:, 1], tr.points[:, 0]), 2 * np.pi))
        assert np.allclose(np.diff(ang), np.pi / 2)

    def test_ellipse_quasi_uniform(self):
        tr = sample_boundary(Ellipse(semi_axes=(2.0, 1.0)), 1024)
        p = np.vstack([tr.points, tr.points[:1]])
        gaps = np.linalg.norm(np.diff(p, axis=0), axis=1)
        assert gaps.max() / gaps.min() <= 1.1

    def test_square_two_per_side(self):
        tr = sample_boundary(Polygon([(0, 0), (1, 0), (1, 1), (0, 1)]), 8)
        p = tr.points
        sides = [np.isclose(p[:, 1], 0), np.isclose(p[:, 0], 1), np.isclose(p[:, 1], 1), np.isclose(p[:, 0], 0)]
        # a corner sample would count for two sides
        assert [int(s.sum()) for s in sides] == [2, 2, 2, 2]

    def test_csv_columns(self, tmp_path):
        tr = sample_boundary(UNIT, 16).with_values(np.zeros(16))
        tr.to_csv(tmp_path / "t.csv")
        rows = list(csv.reader(open(tmp_path / "t.csv")))
        assert rows[0] == ["s", "x", "y", "u", "nu_x", "nu_y"] and len(rows) == 17


class TestSeminorm:
    def test_radial_trace_is_flat(self, concentric):
        G, u = concentric
        tr = sample_boundary(G, 2048)
        assert lipschitz_seminorm(u, tr) <= 5e-3
        lo, hi = boundary_extrema(u, tr)
        assert hi - lo <= 5e-3 and lo == pytest.approx(0.3125, abs=5e-3)

    def test_coordinate_function(self):
        tr = sample_boundary(UNIT, 2048)
        val = lipschitz_seminorm(lambda p: p[:, 0], tr)
        assert 0.99 <= val <= 1.0 + 1e-12
        lo, hi = boundary_extrema(lambda p: p[:, 0], tr)
        assert lo == pytest.approx(-1, abs=1e-5) and hi == pytest.approx(1, abs=1e-5)

    def test_constant_is_zero(self):
        tr = sample_boundary(UNIT, 512)
        assert lipschitz_seminorm(lambda p: np.full(len(p), 7.0), tr) == 0.0

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-5, 5))
    def test_affine_bounded_by_gradient(self, a, b, c):
        tr = sample_boundary(Ellipse(semi_axes=(1.5, 1.0)), 256)
        val = lipschitz_seminorm(lambda p: a * p[:, 0] + b * p[:, 1] + c, tr)
        assert val <= np.hypot(a, b) * (1 + 1e-9) + 1e-12

    def test_subsample_is_seeded(self):
        rng = np.random.default_rng(0)
        pts = rng.random((5000, 2))
        vals = rng.random(5000)
        assert pair_seminorm(pts, vals, seed=3) == pair_seminorm(pts, vals, seed=3)

    def test_extrema_vs_seminorm_on_ellipse(self, ellipse_case):
        G, u = ellipse_case
        tr = sample_boundary(G, 1024)
        lo, hi = boundary_extrema(u, tr)
        sn = lipschitz_seminorm(u, tr)
        assert 0 < hi - lo <= G.diameter * sn
        # the tangential derivative is a lower estimate of the chordal seminorm up to grid error
        assert tangential_seminorm(u, tr) <= sn * 1.2 + 1e-3

    def test_margin_enforced(self, concentric):
        _, u = concentric
        with pytest.raises(OutOfDomain):
            trace_values(u, sample_boundary(Disk((0.0, 0.0), 1.499), 64))

    def test_no_values(self):
        with pytest.raises(InputError):
            lipschitz_seminorm(None, sample_boundary(UNIT, 16))


class TestNormalDerivative:
    def test_unit_disk(self, unit_torsion):
        _, _, un = normal_derivative(unit_torsion, UNIT, 512)
        assert np.max(np.abs(un + 0.5)) <= 5e-3

    def test_larger_disk(self, concentric):
        _, u = concentric
        _, _, un = normal_derivative(u, Disk((0.0, 0.0), 1.5), 512)
        assert np.max(np.abs(un + 0.75)) <= 5e-3


class TestParallelOscillation:
    def test_ball(self, concentric):
        _, u = concentric
        om = Disk((0.0, 0.0), 1.5)
        for t in (0.1, 0.4, 0.9):
            assert parallel_oscillation(u, om, t) <= 5e-3

    def test_zero_depth(self, concentric):
        assert parallel_oscillation(concentric[1], Disk((0.0, 0.0), 1.5), 0.0) == 0.0

    def test_ellipse_increasing(self):
        om = minkowski_sum_ball(Ellipse(semi_axes=(1.0, 0.7)), 0.3)
        u, _ = solve_torsion(om, 1 / 64)
        osc = [parallel_oscillation(u, om, t) for t in (0.05, 0.1, 0.2)]
        assert osc[0] < osc[1] < osc[2]

    def test_too_deep(self, concentric):
        with pytest.raises(DegenerateSurface):
            parallel_oscillation(concentric[1], Disk((0.0, 0.0), 1.5), 1.6)
