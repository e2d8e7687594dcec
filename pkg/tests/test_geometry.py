import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parsym.errors import InputError
from parsym.geometry import (
    Disk,
    Ellipse,
    FourierDisk,
    HyperplaneFrame,
    Polygon,
    Union,
    containment_margin,
    critical_position,
    domain_from_dict,
    extent,
    interior_ball_radius,
    load_domain,
    minkowski_sum_ball,
    parallel_set,
    reflect,
    signed_distance,
)

UNIT = Disk((0.0, 0.0), 1.0)


def polar_curvature_radius(eps, k=3, n=20000):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    r = 1 + eps * np.cos(k * t)
    r1 = -k * eps * np.sin(k * t)
    r2 = -k * k * eps * np.cos(k * t)
    return float(np.min((r**2 + r1**2) ** 1.5 / (r**2 + 2 * r1**2 - r * r2)))


class TestSignedDistance:
    def test_disk_outside_and_center(self):
        assert signed_distance(UNIT, (2.0, 0.0)) == pytest.approx(1.0, abs=1e-12)
        assert signed_distance(UNIT, (0.0, 0.0)) == pytest.approx(-1.0, abs=1e-12)

    def test_ellipse_center_is_minor_axis(self):
        assert signed_distance(Ellipse(semi_axes=(2.0, 1.0)), (0.0, 0.0)) == pytest.approx(-1.0, abs=1e-12)

    @pytest.mark.parametrize(
        "G",
        [
            UNIT,
            Ellipse(semi_axes=(2.0, 1.0), angle=0.3),
            FourierDisk(radius=1.0, cos={3: 0.05}),
            Polygon([(0, 0), (1, 0), (1, 1), (0, 1)]),
            Union((UNIT, Disk((0.8, 0.0), 0.5))),
        ],
        ids=["disk", "ellipse", "fourier", "square", "union"],
    )
    def test_zero_on_boundary_and_sign(self, G):
        # 256 samples keep the square's vertices out of the sample set
        pts, nrm = G.boundary(256)
        assert np.max(np.abs(G.sdf(pts))) < 1e-9
        assert np.all(G.sdf(pts - 1e-3 * nrm) < 0)
        assert np.all(G.sdf(pts + 1e-3 * nrm) > 0)

    def test_ellipse_sdf_is_distance_to_boundary_samples(self):
        G = Ellipse(semi_axes=(2.0, 1.0))
        pts, _ = G.boundary(200000)
        rng = np.random.default_rng(1)
        q = rng.uniform(-3, 3, size=(50, 2))
        brute = np.min(np.linalg.norm(q[:, None, :] - pts[None, :, :], axis=2), axis=1)
        assert np.allclose(np.abs(G.sdf(q)), brute, atol=1e-4)

    def test_metric_invariants(self):
        for G in (UNIT, Ellipse(semi_axes=(2.0, 1.0)), FourierDisk(cos={3: 0.1})):
            assert 0 < G.rho <= G.diameter / 2 + 1e-12


class TestMinkowski:
    def test_disk_becomes_larger_disk(self):
        om = minkowski_sum_ball(UNIT, 0.5)
        rng = np.random.default_rng(0)
        x = rng.uniform(-2, 2, size=(500, 2))
        assert np.allclose(om.sdf(x), np.linalg.norm(x, axis=1) - 1.5, atol=1e-12)

    def test_ellipse_offset_between_balls(self):
        om = minkowski_sum_ball(Ellipse(semi_axes=(1.0, 1.05)), 1.0)
        pts, _ = om.boundary(2048)
        r = np.linalg.norm(pts, axis=1)
        assert r.min() >= 2.0 - 1e-9 and r.max() <= 2.05 + 1e-9

    def test_offset_distance_is_R(self):
        G = FourierDisk(cos={3: 0.05})
        om = minkowski_sum_ball(G, 0.5)
        pts, _ = G.boundary(512)
        assert np.allclose(om.sdf(pts), -0.5, atol=1e-9)

    def test_rejects_nonpositive_R(self):
        with pytest.raises(InputError):
            minkowski_sum_ball(UNIT, 0.0)


class TestReflection:
    def test_examples(self):
        assert np.allclose(reflect((2.0, 1.0), HyperplaneFrame((1.0, 0.0), 0.0)), (-2.0, 1.0))
        assert np.allclose(reflect((3.0, 0.0), HyperplaneFrame((1.0, 0.0), 1.0)), (-1.0, 0.0))
        assert np.allclose(reflect((1.0, 5.0), HyperplaneFrame((1.0, 0.0), 1.0)), (1.0, 5.0))

    def test_non_unit_normal_rejected(self):
        with pytest.raises(InputError):
            HyperplaneFrame((1.0, 1.0), 0.0)

    @settings(max_examples=60, deadline=None)
    @given(
        st.floats(0, 2 * math.pi),
        st.floats(-3, 3),
        st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
    )
    def test_involution_and_isometry(self, theta, lam, x):
        frame = HyperplaneFrame((math.cos(theta), math.sin(theta)), lam)
        x = np.array(x)
        y = reflect(x, frame)
        assert np.allclose(reflect(y, frame), x, atol=1e-10)
        # the midpoint lies on the plane
        assert (0.5 * (x + y)) @ np.array(frame.omega) == pytest.approx(lam, abs=1e-10)


class TestExtentAndCritical:
    def test_extent_examples(self):
        assert extent(UNIT, (0.6, 0.8)) == pytest.approx(1.0)
        assert extent(Disk((0.3, 0.0), 1.0), (1.0, 0.0)) == pytest.approx(1.3)
        w = (math.cos(math.pi / 4), math.sin(math.pi / 4))
        assert extent(Ellipse(semi_axes=(2.0, 1.0)), w) == pytest.approx(math.sqrt(2.5), abs=1e-9)

    def test_disk_critical_positions(self):
        assert critical_position(UNIT, (1.0, 0.0)).critical_m == pytest.approx(0.0, abs=1e-6)
        assert critical_position(Disk((0.3, 0.0), 1.0), (1.0, 0.0)).critical_m == pytest.approx(0.3, abs=1e-6)

    def test_union_matches_brute_force_scan(self):
        G = Union((UNIT, Disk((0.8, 0.0), 0.5)))
        cap = critical_position(G, (1.0, 0.0))
        pts, _ = G.boundary(4096)
        tol = 1e-9 * G.diameter
        lams = np.arange(1.3, -0.5, -1e-4)
        brute = lams[0]
        for lam in lams:
            if containment_margin(G, (1.0, 0.0), lam, pts) > tol:
                break
            brute = lam
        assert abs(cap.critical_m - brute) <= 2e-4
        assert cap.critical_m < cap.extent_M

    def test_case_kinds(self):
        # symmetric disk: the plane meets the boundary orthogonally
        assert critical_position(UNIT, (1.0, 0.0)).case_kind in ("orthogonal_contact", "both")
        cap = critical_position(FourierDisk(cos={3: 0.05}), (0.0, 1.0))
        assert cap.witness_Q is not None or cap.witness_P is not None

    def test_reflected_cap_inside_at_critical(self):
        G = FourierDisk(cos={3: 0.05})
        for w in [(1.0, 0.0), (0.0, 1.0), (0.6, 0.8)]:
            cap = critical_position(G, w)
            assert cap.containment_margin <= 10 * cap.tol + 1e-12


class TestParallelSetAndRho:
    def test_parallel_disk(self):
        P = parallel_set(UNIT, 0.25)
        r = np.linspace(0, 1, 101)
        pts = np.column_stack([r, np.zeros_like(r)])
        assert np.array_equal(P.contains(pts), r < 0.75)

    def test_zero_offset_is_identity(self):
        G = FourierDisk(cos={3: 0.05})
        x = np.random.default_rng(3).uniform(-1.2, 1.2, size=(2000, 2))
        assert np.array_equal(parallel_set(G, 0.0).contains(x), G.contains(x))

    def test_ellipse_parallel_set_connected(self):
        from scipy import ndimage

        P = parallel_set(Ellipse(semi_axes=(1.0, 1.05)), 0.5)
        h = 1 / 128
        xs = np.arange(-1.2, 1.2, h)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        inside = P.contains(np.column_stack([X.ravel(), Y.ravel()])).reshape(X.shape)
        assert ndimage.label(inside)[1] == 1

    def test_rho_examples(self):
        assert interior_ball_radius(UNIT) == pytest.approx(1.0)
        assert interior_ball_radius(Ellipse(semi_axes=(2.0, 1.0))) == pytest.approx(0.5)
        est = interior_ball_radius(FourierDisk(cos={3: 0.05}))
        assert est == pytest.approx(polar_curvature_radius(0.05), rel=0.1)


class TestDomainFiles:
    def test_roundtrip(self, tmp_path):
        for G in (UNIT, Ellipse(semi_axes=(2.0, 1.0), angle=0.2), FourierDisk(cos={3: 0.05}, sin={2: 0.01})):
            path = tmp_path / "d.json"
            path.write_text(json.dumps(G.to_dict()))
            H = load_domain(path)
            x = np.random.default_rng(0).uniform(-2, 2, size=(100, 2))
            assert np.allclose(G.sdf(x), H.sdf(x), atol=1e-12)

    def test_bad_field_is_named(self):
        with pytest.raises(InputError, match="radius"):
            domain_from_dict({"kind": "disk", "params": {"radius": -1}})
        with pytest.raises(InputError, match="foo"):
            domain_from_dict({"kind": "disk", "params": {"radius": 1, "foo": 2}})
        with pytest.raises(InputError, match="kind"):
            domain_from_dict({"kind": "blob"})

    def test_json_syntax_error_has_position(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"kind": "disk",\n "params": {radius: 1}}')
        with pytest.raises(InputError, match=r"bad.json:2:\d+"):
            load_domain(path)

    def test_fourier_amplitude_limit(self):
        with pytest.raises(InputError):
            FourierDisk(radius=1.0, cos={3: 1.2})
