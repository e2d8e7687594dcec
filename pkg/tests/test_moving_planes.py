import functools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parsym.errors import InputError
from parsym.geometry import Disk, Ellipse, FourierDisk, critical_position, reflect
from parsym.grid import max_gradient_norm
from parsym.moving_planes import (
    approximate_center,
    certify,
    core_area_fraction,
    core_gap,
    reflected_difference,
    sandwich_check,
    stability_radii,
    sup_wm,
    symmetric_core,
)

@functools.lru_cache(maxsize=None)
def _tilted_core():
    G = FourierDisk(cos={3: 0.1}, sin={2: 0.03})
    return symmetric_core(G, critical_position(G, (0.6, 0.8)))


DIRS8 = [(np.cos(a), np.sin(a)) for a in np.arange(8) * np.pi / 8]


@pytest.fixture(scope="module")
def fourier_report(fourier_case):
    G, u = fourier_case
    return certify(G, 0.5, h=u.h, u=u, extra_directions=8)


class TestReflectedDifference:
    def test_radial_vanishes_in_eight_directions(self, concentric):
        G, u = concentric
        bound = 2 * u.h * max_gradient_norm(u)
        for w in DIRS8:
            wd = reflected_difference(u, critical_position(G, w), G, 0.5)
            assert abs(sup_wm(wd)) <= bound
            assert wd.nonnegative

    def test_ellipse_symmetry_axis(self, ellipse_case):
        G, u = ellipse_case
        wd = reflected_difference(u, critical_position(G, (1.0, 0.0)), G, 0.5)
        vals = wd.values[wd.cap_nodes]
        assert np.max(np.abs(vals)) <= 2 * u.h * max_gradient_norm(u)

    def test_fourier_against_higher_order(self, fourier_case):
        G, u = fourier_case
        cap = critical_position(G, (1.0, 0.0))
        lo = reflected_difference(u, cap, G, 0.5, order=1)
        hi = reflected_difference(u, cap, G, 0.5, order=3)
        assert sup_wm(hi) > 10 * 3 * u.h**2
        idx = np.argwhere(hi.cap_nodes)
        pick = idx[np.random.default_rng(0).choice(len(idx), 1000, replace=False)]
        a = lo.values[pick[:, 0], pick[:, 1]]
        b = hi.values[pick[:, 0], pick[:, 1]]
        assert np.max(np.abs(a - b)) <= 3 * u.h**2

    def test_harmonic_and_nonnegative(self, fourier_case):
        G, u = fourier_case
        for w in [(1.0, 0.0), (0.0, 1.0), (0.6, 0.8)]:
            wd = reflected_difference(u, critical_position(G, w), G, 0.5)
            # w solves Lap w = 0 away from cut cells: relative residual at round-off scale
            assert wd.laplacian_max * u.h**2 <= 1e-8 * max(1.0, np.nanmax(np.abs(wd.values)))
            assert wd.nonnegative

    def test_component_meets_witness_ball(self, fourier_case):
        G, u = fourier_case
        cap = critical_position(G, (1.0, 0.0))
        wd = reflected_difference(u, cap, G, 0.5)
        assert wd.component.any()
        assert not np.any(wd.component & ~wd.cap_nodes)


class TestSymmetricCore:
    def test_symmetric_domain_is_its_own_core(self):
        G = Ellipse(semi_axes=(1.0, 0.7))
        X = symmetric_core(G, critical_position(G, (1.0, 0.0)))
        x = np.random.default_rng(1).uniform(-1.1, 1.1, size=(20000, 2))
        assert np.mean(X.contains(x) == G.contains(x)) >= 0.999
        assert core_gap(X) <= 2 / 128

    def test_core_is_folded_right_cap(self):
        G = FourierDisk(cos={3: 0.1}, sin={2: 0.05})
        cap = critical_position(G, (0.6, 0.8))
        X = symmetric_core(G, cap)
        x = np.random.default_rng(2).uniform(-1.2, 1.2, size=(5000, 2))
        right = x @ np.array(cap.omega) > cap.critical_m
        assert np.array_equal(X.contains(x[right]), G.contains(x[right]))
        mirror = reflect(x[~right], cap.frame)
        assert np.array_equal(X.contains(x[~right]), G.contains(mirror))

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-1.3, 1.3), st.floats(-1.3, 1.3))
    def test_exact_reflection_symmetry(self, a, b):
        X = _tilted_core()
        x = np.array([[a, b]])
        assert X.contains(x)[0] == X.contains(reflect(x, X.cap.frame))[0]

    def test_area_fraction(self):
        G = FourierDisk(cos={3: 0.05})
        for w in [(1.0, 0.0), (0.0, 1.0)]:
            assert core_area_fraction(symmetric_core(G, critical_position(G, w)), 1 / 128) >= 0.9

    def test_core_gap_bounded_by_certificate_constant(self, fourier_report):
        rep = fourier_report
        for d in rep.directions[:2]:
            assert d.core_gap <= rep.empirical.C_star * rep.seminorm


class TestSandwich:
    def test_radial(self):
        G = Disk((0.0, 0.0), 1.0)
        cap = critical_position(G, (1.0, 0.0))
        for s in (0.05, 0.2, 0.45):
            assert sandwich_check(G, symmetric_core(G, cap, s), s).passed

    def test_contract_rejects_small_s(self):
        G = Disk((0.0, 0.0), 1.0)
        cap = critical_position(G, (1.0, 0.0))
        with pytest.raises(InputError):
            sandwich_check(G, symmetric_core(G, cap), 0.1, seminorm=0.1, C_star=2.0)

    def test_report_records_sandwich(self, fourier_report):
        for d in fourier_report.directions:
            assert d.sandwich is not None and d.sandwich.n_samples == 10_000


class TestCenterAndRadii:
    def test_translated_disk(self):
        G = Disk((0.3, -0.2), 1.0)
        assert np.allclose(approximate_center(G), (0.3, -0.2), atol=2 / 128)

    def test_ellipse_center(self):
        assert np.allclose(approximate_center(Ellipse(semi_axes=(1.0, 1.05))), (0, 0), atol=2 / 128)

    def test_radii_examples(self):
        assert stability_radii(Disk((0.0, 0.0), 1.0), (0, 0)) == pytest.approx((1.0, 1.0))
        ri, re = stability_radii(Ellipse(semi_axes=(1.0, 1.05)), (0, 0))
        assert (ri, re) == pytest.approx((1.0, 1.05), abs=1e-9)
        for eps in (0.02, 0.1):
            ri, re = stability_radii(FourierDisk(cos={3: eps}), (0, 0))
            assert re - ri == pytest.approx(2 * eps, abs=1e-6)

    def test_radii_contract(self):
        with pytest.raises(InputError):
            stability_radii(Disk(), (0, 0), n=100)


class TestCertify:
    def test_radial_case(self, concentric):
        G, u = concentric
        rep = certify(G, 0.5, h=u.h, u=u)
        assert rep.gap <= 2 * u.h
        assert rep.seminorm <= 5e-3
        assert rep.passed and rep.passes["concentric_balls"]

    def test_fourier_formula_slack(self, fourier_report):
        rep = fourier_report
        assert np.isfinite(rep.gap / rep.seminorm)
        assert rep.passes["certificate_formula"] and rep.passes["certificate_empirical"]
        assert rep.log10_certificate_ratio_formula < -50
        assert rep.passes["wm_nonnegative"]

    def test_direction_independent_upper_constant(self, fourier_report):
        rep = fourier_report
        ratios = [d.sup_w / rep.seminorm for d in rep.directions]
        # w^m vanishes near symmetry directions, so only the upper envelope is direction independent
        assert max(ratios) <= 5 * max(ratios[:2])

    def test_extra_directions_do_not_move_constants(self, fourier_case, fourier_report):
        G, u = fourier_case
        plain = certify(G, 0.5, h=u.h, u=u)
        assert plain.empirical.C_final == fourier_report.empirical.C_final
        assert plain.center == fourier_report.center

    def test_translation_equivariance(self, fourier_case, fourier_report):
        G, u = fourier_case
        v = np.array([0.3, -0.2])
        rep = certify(G.translated(v), 0.5, h=u.h)
        assert np.allclose(np.array(rep.center) - v, fourier_report.center, atol=2 * u.h)
        assert rep.gap == pytest.approx(fourier_report.gap, rel=1e-3)
        assert rep.seminorm == pytest.approx(fourier_report.seminorm, rel=1e-3)

    def test_rotation(self, fourier_case, fourier_report):
        G, u = fourier_case
        rep30 = certify(G.rotated(np.pi / 6), 0.5, h=u.h)
        assert rep30.seminorm == pytest.approx(fourier_report.seminorm, rel=0.05)
        # a quarter turn maps the coordinate frame onto itself, so the center construction commutes with it
        rep90 = certify(G.rotated(np.pi / 2), 0.5, h=u.h)
        assert rep90.gap == pytest.approx(fourier_report.gap, rel=0.05)
        assert rep90.seminorm == pytest.approx(fourier_report.seminorm, rel=0.05)

    def test_refinement(self, fourier_case, fourier_report):
        G, _ = fourier_case
        fine = certify(G, 0.5, h=1 / 128)
        assert fine.gap == pytest.approx(fourier_report.gap, rel=0.1)
        assert fine.seminorm == pytest.approx(fourier_report.seminorm, rel=0.1)

    def test_json_roundtrip(self, fourier_report):
        doc = json.loads(fourier_report.to_json())
        assert doc["gap"] == fourier_report.gap
        assert doc["constants_formula"]["modes"]["C_final"] == "formula"
        assert len(doc["directions"]) == 10

    def test_unknown_problem(self):
        with pytest.raises(InputError):
            certify(Disk(), 0.5, problem="wave", h=1 / 16)
