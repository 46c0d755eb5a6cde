import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqwave.radau import (
    RADAU_DEFECTIVE_POINT,
    RADAU_IIA_2,
    DefectivePointError,
    RKTableau,
    avoid_defective_nodes,
    delta_matrix,
    mix_stage_data,
    radau2_eigenvalues,
    recombine_solution,
    stage_boundary_transform,
    stage_decomposition,
    stage_signal,
)
from cqwave.zdomain import ContourSpec, TimeGrid, contour_nodes

complex_z = st.builds(
    lambda r, t: r * np.exp(1j * t),
    st.floats(0.05, 0.99),
    st.floats(0, 2 * np.pi),
)


def test_tableau_is_stiffly_accurate():
    np.testing.assert_array_equal(RADAU_IIA_2.A[-1], RADAU_IIA_2.b)
    with pytest.raises(ValueError, match="stiffly"):
        RKTableau("bad", A=[[0.5, 0.0], [0.5, 0.4]], b=[0.5, 0.5], c=[0.5, 1.0])


def test_delta_at_origin_is_inverse_of_a():
    np.testing.assert_allclose(delta_matrix(RADAU_IIA_2, 0.0), [[1.5, 0.5], [-4.5, 2.5]], atol=1e-14)
    assert np.trace(delta_matrix(RADAU_IIA_2, 0.0)).real == pytest.approx(4.0, abs=1e-14)


def test_delta_undefined_at_one():
    with pytest.raises(ZeroDivisionError):
        delta_matrix(RADAU_IIA_2, 1.0)


def test_eigenvalues_at_origin():
    g1, g2 = radau2_eigenvalues(0.0)
    assert g1 == pytest.approx(2 - 1j * np.sqrt(2), abs=1e-14)
    assert g2 == pytest.approx(2 + 1j * np.sqrt(2), abs=1e-14)
    dense = np.sort_complex(np.linalg.eigvals(delta_matrix(RADAU_IIA_2, 0.0)))
    np.testing.assert_allclose(np.sort_complex([g1, g2]), dense, atol=1e-13)


def test_eigenvalues_coincide_at_defective_point():
    g1, g2 = radau2_eigenvalues(RADAU_DEFECTIVE_POINT)
    assert g1 == pytest.approx(3 * np.sqrt(3) - 3, abs=1e-7)
    assert g2 == pytest.approx(3 * np.sqrt(3) - 3, abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(z=complex_z)
def test_trace_and_determinant(z):
    d = delta_matrix(RADAU_IIA_2, z)
    g1, g2 = radau2_eigenvalues(z)
    assert abs(g1 + g2 - np.trace(d)) <= 1e-12 * max(1, abs(np.trace(d)))
    assert abs(g1 * g2 - np.linalg.det(d)) <= 1e-12 * max(1, abs(np.linalg.det(d)))


@settings(max_examples=60, deadline=None)
@given(z=complex_z)
def test_recomposition(z):
    if abs(z - RADAU_DEFECTIVE_POINT) < 1e-3:
        return
    dec = stage_decomposition(RADAU_IIA_2, z)
    d = delta_matrix(RADAU_IIA_2, z)
    assert np.abs(dec.recompose() - d).max() <= 1e-11 * np.abs(d).max()


@settings(max_examples=30, deadline=None)
@given(z=complex_z)
def test_conjugation_symmetry(z):
    if abs(z - RADAU_DEFECTIVE_POINT) < 1e-3:
        return
    a = np.sort_complex(stage_decomposition(RADAU_IIA_2, z).gamma)
    b = np.sort_complex(np.conj(stage_decomposition(RADAU_IIA_2, np.conj(z)).gamma))
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_decomposition_examples():
    dec = stage_decomposition(RADAU_IIA_2, 0.0)
    A_inv = np.linalg.inv(RADAU_IIA_2.A)
    for j in range(2):
        np.testing.assert_allclose(A_inv @ dec.P[:, j], dec.gamma[j] * dec.P[:, j], atol=1e-13)
    dec = stage_decomposition(RADAU_IIA_2, 0.5)
    np.testing.assert_allclose(dec.recompose(), delta_matrix(RADAU_IIA_2, 0.5), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(dec.P, axis=0), 1.0, atol=1e-14)


def test_defective_point_raises():
    with pytest.raises(DefectivePointError):
        stage_decomposition(RADAU_IIA_2, RADAU_DEFECTIVE_POINT)


def test_generic_tableau_falls_back_to_dense_eig():
    be = RKTableau("implicit-euler", A=[[1.0]], b=[1.0], c=[1.0])
    dec = stage_decomposition(be, 0.3)
    assert dec.gamma[0] == pytest.approx(0.7, abs=1e-14)


def test_stage_boundary_transform():
    grid = TimeGrid(1.0, 0.1, 10)
    sig = stage_signal(lambda t: np.exp(-t), grid, RADAU_IIA_2, 400)
    G = stage_boundary_transform(sig, 0.5)
    expected = np.exp(-0.1) / (1 - 0.5 * np.exp(-0.1))
    assert G[1] == pytest.approx(expected, rel=1e-13)
    G0 = stage_boundary_transform(sig, 0.0)
    np.testing.assert_allclose(G0, np.exp(-RADAU_IIA_2.c * 0.1), rtol=1e-15)
    pulse = stage_signal(lambda t: (t < 0.1 + 1e-12).astype(float), grid, RADAU_IIA_2, 5)
    np.testing.assert_allclose(stage_boundary_transform(pulse, 0.7 - 0.2j), [1.0, 1.0])


def test_mix_stage_data():
    G = np.array([2.0 + 1j, -3.0])
    np.testing.assert_array_equal(mix_stage_data(np.eye(2), G), G)
    np.testing.assert_array_equal(mix_stage_data(np.array([[0, 1], [1, 0]]), G), G[::-1])
    rng = np.random.default_rng(0)
    M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    np.testing.assert_allclose(mix_stage_data(M, G), M @ G, atol=1e-14)
    with pytest.raises(ValueError):
        mix_stage_data(np.eye(3), G)


def test_recombine_solution():
    W = np.array([1.5, -2.0 + 1j])
    assert recombine_solution(np.eye(2), W, 0.3) == pytest.approx(0.3 * W[1])
    assert recombine_solution(np.eye(2), W, 0.0) == 0


def test_avoid_defective_nodes_rejects_radius():
    contour = ContourSpec(abs(RADAU_DEFECTIVE_POINT), 16)
    assert np.min(np.abs(contour_nodes(contour) - RADAU_DEFECTIVE_POINT)) < 1e-12
    with pytest.raises(ValueError, match="coincides"):
        avoid_defective_nodes(contour)
    assert avoid_defective_nodes(ContourSpec(0.95, 16)) == ContourSpec(0.95, 16)


def test_avoid_defective_nodes_bumps_count():
    defect = 0.9 * np.exp(2j * np.pi * 3 / 16)
    moved = avoid_defective_nodes(ContourSpec(0.9, 16), defect=defect)
    assert moved.n_freq == 17
    assert np.min(np.abs(contour_nodes(moved) - defect)) >= 1e-6
