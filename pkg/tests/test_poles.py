import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqwave.poles import (
    PoleEntry,
    analyticity_report,
    data_analyticity_radius,
    formulation_poles_sphere,
    interior_eigenvalues_sphere,
    map_pole_to_z,
    scattering_poles_sphere,
    sphere_pole_atlas,
)
from cqwave.radau import RADAU_DEFECTIVE_POINT, radau2_eigenvalues
from cqwave.special import spherical_bessel_j, spherical_bessel_j_prime, spherical_hankel1
from cqwave.zdomain import BACKWARD_EULER, BDF2, TimeGrid, multistep_symbol

GRID = TimeGrid(343.0, 5e-4, 40)  # c dt = 0.1715


def first(entries, n):
    return min(e.k_value.real for e in entries if e.n == n and e.k_value != 0)


class TestInterior:
    def test_dirichlet(self):
        e = interior_eigenvalues_sphere("dirichlet", n_max=3)
        assert first(e, 0) == pytest.approx(np.pi, abs=1e-10)
        for entry in e:
            assert abs(spherical_bessel_j(entry.n, entry.k_value.real)) < 1e-10

    def test_neumann_contains_zero(self):
        e = interior_eigenvalues_sphere("neumann", n_max=3)
        assert any(x.k_value == 0 for x in e)
        for entry in e:
            if entry.k_value != 0:
                assert abs(spherical_bessel_j_prime(entry.n, entry.k_value.real)) < 1e-10

    def test_impedance(self):
        e = interior_eigenvalues_sphere("impedance", eta=1.0, n_max=2)
        assert first(e, 0) == pytest.approx(np.pi / 2, abs=1e-10)
        e20 = interior_eigenvalues_sphere("impedance", eta=20.0, n_max=4)
        for entry in e20:
            k = entry.k_value.real
            assert abs(k * spherical_bessel_j_prime(entry.n, k) + 20 * spherical_bessel_j(entry.n, k)) < 1e-10

    def test_complex_eta_rejected(self):
        with pytest.raises(ValueError):
            interior_eigenvalues_sphere("impedance", eta=1j)

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            interior_eigenvalues_sphere("robin")


class TestScattering:
    def test_n1(self):
        poles = [p for p in scattering_poles_sphere(1) if p.n == 1]
        assert len(poles) == 1
        assert abs(poles[0].k_value + 1j) < 1e-12

    def test_n0_empty(self):
        assert [p for p in scattering_poles_sphere(3) if p.n == 0] == []

    def test_lower_half_plane_and_zeros(self):
        for p in scattering_poles_sphere(8):
            assert p.k_value.imag < 0
            assert abs(spherical_hankel1(p.n, p.k_value)) < 1e-8 * max(1, abs(spherical_hankel1(p.n, 1.0 + p.k_value)))
        counts = np.bincount([p.n for p in scattering_poles_sphere(8)])
        np.testing.assert_array_equal(counts, np.arange(9))

    def test_limit(self):
        with pytest.raises(ValueError):
            scattering_poles_sphere(40)


class TestMapping:
    def test_backward_euler_origin(self):
        assert map_pole_to_z(BACKWARD_EULER, 0.0, GRID) == [1.0]

    def test_backward_euler_examples(self):
        (z,) = map_pole_to_z(BACKWARD_EULER, np.pi, GRID)
        assert z == pytest.approx(1 + 0.53878j, abs=1e-5)
        assert abs(z) == pytest.approx(np.hypot(1.0, 0.1715 * np.pi), rel=1e-14)
        (z,) = map_pole_to_z(BACKWARD_EULER, -1j, GRID)
        assert z == pytest.approx(1.1715, abs=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(re=st.floats(-10, 10), im=st.floats(-5, 0.5))
    def test_bdf2_roots_satisfy_symbol(self, re, im):
        k = complex(re, im)
        for z in map_pole_to_z(BDF2, k, GRID):
            assert abs(multistep_symbol(BDF2, z) + 1j * GRID.cdt * k) < 1e-11 * max(1, abs(k))

    @settings(max_examples=40, deadline=None)
    @given(re=st.floats(-10, 10), im=st.floats(-5, 0.5))
    def test_radau_image_is_stage_eigenvalue(self, re, im):
        k = complex(re, im)
        (z,) = map_pole_to_z("radau2a", k, GRID)
        target = -1j * GRID.cdt * k
        if abs(2 * target + 6) < 1e-6:
            return
        g1, g2 = radau2_eigenvalues(z)
        assert min(abs(g1 - target), abs(g2 - target)) < 1e-9 * max(1, abs(target))

    def test_unknown_rule(self):
        with pytest.raises(TypeError):
            map_pole_to_z("rk4", 1.0, GRID)


class TestReport:
    def test_second_kind_beam(self):
        rep = sphere_pole_atlas("second-kind", BACKWARD_EULER, GRID)
        assert rep.dominant.kind == "neumann" and rep.dominant.k_value == 0
        assert rep.lambda_U == 1.0

    def test_first_kind(self):
        rep = sphere_pole_atlas("first-kind", BACKWARD_EULER, GRID)
        assert rep.dominant.kind == "dirichlet"
        assert rep.lambda_U == pytest.approx(1.135908, abs=1e-6)
        moduli = {e.kind: min(x.z_modulus for x in rep.entries if x.kind == e.kind) for e in rep.entries}
        assert moduli["scattering"] == pytest.approx(1.1715, abs=1e-12)

    def test_combined_eta_one(self):
        rep = sphere_pole_atlas("combined-const", BACKWARD_EULER, GRID, eta=1.0)
        assert rep.dominant.kind == "impedance"
        assert rep.dominant.k_value.real == pytest.approx(np.pi / 2, abs=1e-10)

    def test_data_radius_caps(self):
        entries = [PoleEntry("scattering", 1, -1j, 1.1)]
        rep = analyticity_report(entries, lambda_G=0.8)
        assert rep.lambda_B == pytest.approx(1.1)
        assert rep.lambda_U == 0.8

    def test_empty(self):
        with pytest.raises(ValueError):
            analyticity_report([])
        assert analyticity_report([], lambda_G=2.0).lambda_U == 2.0

    def test_radau_advisory(self):
        rep = sphere_pole_atlas("combined-omega", "radau2a", GRID)
        assert rep.advisory[0].z_image == RADAU_DEFECTIVE_POINT
        assert rep.lambda_U == pytest.approx(1.0, abs=1e-14)
        assert rep.rate(0.95) == pytest.approx(0.95, abs=1e-14)

    def test_sphere_analytic_has_only_scattering(self):
        assert {p.kind for p in formulation_poles_sphere("sphere-analytic")} == {"scattering"}
        with pytest.raises(ValueError):
            formulation_poles_sphere("galerkin")


def test_data_radius():
    assert data_analyticity_radius("gaussian-beam", GRID) == np.inf
    grid = TimeGrid(343.0, 0.3 / 80, 80)
    assert data_analyticity_radius("exponential-envelope", grid, beta=150.0) == pytest.approx(np.exp(0.5625))
    assert data_analyticity_radius("exponential-envelope", grid, beta=0.0) == 1.0
    with pytest.raises(ValueError):
        data_analyticity_radius("white-noise", grid)


def test_pole_entry_kind():
    with pytest.raises(ValueError):
        PoleEntry("ghost", 0, 1.0)
