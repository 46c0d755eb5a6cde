import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqwave.zdomain import (
    BACKWARD_EULER,
    BDF2,
    AmplificationWarning,
    ContourSpec,
    FrequencySamples,
    TimeGrid,
    TimeSignal,
    aliasing_error_oracle,
    contour_nodes,
    decay_bound,
    expand_half_spectrum,
    frequency_of_node,
    half_spectrum_indices,
    inverse_ztransform,
    multistep_symbol,
    predicted_rate,
    ztransform_at_node,
    ztransform_nodes,
)


def geometric(n):
    return 0.5**n


class TestContour:
    def test_quarter_nodes(self):
        z = contour_nodes(ContourSpec(0.95, 4))
        np.testing.assert_array_equal(z, [0.95j, -0.95, -0.95j, 0.95])

    def test_single_node(self):
        np.testing.assert_array_equal(contour_nodes(ContourSpec(1.0, 1)), [1.0])

    def test_node_two_of_eight(self):
        assert contour_nodes(ContourSpec(0.9, 8))[1] == 0.9j

    @pytest.mark.parametrize("lam,nf", [(0.0, 4), (-1.0, 4), (0.9, 0)])
    def test_invalid(self, lam, nf):
        with pytest.raises(ValueError):
            ContourSpec(lam, nf)


class TestSymbols:
    def test_backward_euler(self):
        assert multistep_symbol(BACKWARD_EULER, 0.0) == 1
        assert multistep_symbol(BACKWARD_EULER, 1.0) == 0

    def test_bdf2_at_minus_one(self):
        assert multistep_symbol(BDF2, -1.0) == pytest.approx(4.0, abs=1e-15)

    def test_frequency_of_node(self):
        grid = TimeGrid(343.0, 5e-4, 40)
        omega, k = frequency_of_node(1.0, grid)
        assert omega == pytest.approx(1 / 0.1715, rel=1e-14)
        assert k == pytest.approx(1j / 0.1715, rel=1e-14)
        assert frequency_of_node(0.0, grid) == (0, 0)
        omega, k = frequency_of_node(-0.1715, grid)
        assert omega == pytest.approx(-1.0, rel=1e-14)
        assert k == pytest.approx(-1j, rel=1e-14)


class TestForwardTransform:
    def test_delta(self):
        sig = TimeSignal(np.array([1.0, 0.0, 0.0]))
        assert ztransform_at_node(sig, 0.3 + 0.7j) == 1

    def test_shift(self):
        assert ztransform_at_node(TimeSignal(np.array([0.0, 1.0])), 0.5) == 0.5

    def test_geometric(self):
        sig = TimeSignal(geometric(np.arange(200)))
        assert ztransform_at_node(sig, 0.95) == pytest.approx(1 / (1 - 0.475), rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(
        n_sig=st.integers(1, 90),
        nf=st.integers(1, 24),
        lam=st.floats(0.5, 1.0),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_fold_matches_horner(self, n_sig, nf, lam, seed):
        rng = np.random.default_rng(seed)
        values = rng.standard_normal((n_sig, 2))
        contour = ContourSpec(lam, nf)
        fast = ztransform_nodes(TimeSignal(values), contour).values
        slow = np.array([ztransform_at_node(TimeSignal(values), z) for z in contour_nodes(contour)])
        scale = np.abs(values).sum()
        np.testing.assert_allclose(fast, slow, atol=1e-13 * scale)


class TestInverse:
    def test_constant(self):
        contour = ContourSpec(0.95, 8)
        u = inverse_ztransform(FrequencySamples(np.ones(8), contour), 8).values
        np.testing.assert_allclose(u, np.eye(8)[0], atol=1e-14)

    def test_shift(self):
        contour = ContourSpec(0.95, 4)
        u = inverse_ztransform(FrequencySamples(contour_nodes(contour), contour), 4).values
        np.testing.assert_allclose(u, [0, 1, 0, 0], atol=1e-14)

    def test_aliased_geometric(self):
        contour = ContourSpec(0.95, 8)
        z = contour_nodes(contour)
        u = inverse_ztransform(FrequencySamples(1 / (1 - z / 2), contour), 1).values
        assert u[0].real == pytest.approx(1.0025982, abs=1e-7)

    @settings(max_examples=40, deadline=None)
    @given(nf=st.integers(1, 32), lam=st.floats(0.6, 1.0), seed=st.integers(0, 2**31 - 1))
    def test_round_trip(self, nf, lam, seed):
        values = np.random.default_rng(seed).standard_normal(nf)
        contour = ContourSpec(lam, nf)
        back = inverse_ztransform(ztransform_nodes(TimeSignal(values), contour), nf).values
        np.testing.assert_allclose(back, values, atol=1e-12 * lam ** (-nf) * max(1, np.abs(values).max()))

    def test_amplification_warning(self):
        contour = ContourSpec(0.5, 64)
        with pytest.warns(AmplificationWarning):
            inverse_ztransform(FrequencySamples(np.ones(64), contour), 64)

    @settings(max_examples=30, deadline=None)
    @given(
        nf=st.sampled_from([4, 8, 16, 30]),
        lam=st.floats(0.7, 0.99),
        n=st.integers(0, 3),
    )
    def test_aliasing_identity(self, nf, lam, n):
        contour = ContourSpec(lam, nf)
        z = contour_nodes(contour)
        u = inverse_ztransform(FrequencySamples(1 / (1 - z / 2), contour), n + 1).values[n]
        err = u - geometric(n)
        assert err == pytest.approx(aliasing_error_oracle(geometric, contour, n), rel=1e-10, abs=1e-15)


class TestHalfSpectrum:
    def test_indices(self):
        np.testing.assert_array_equal(half_spectrum_indices(8), [8, 1, 2, 3, 4])
        np.testing.assert_array_equal(half_spectrum_indices(5), [5, 1, 2])

    def test_conjugate_fill(self):
        contour = ContourSpec(0.95, 4)
        full = expand_half_spectrum([2.0, 1 + 2j, -1.0], contour).values
        assert full[2] == 1 - 2j
        assert full[3] == 2.0

    def test_complex_real_node_rejected(self):
        with pytest.raises(ValueError, match="imaginary"):
            expand_half_spectrum([2.0 + 1e-6j, 1 + 2j, -1.0], ContourSpec(0.95, 4))

    @settings(max_examples=30, deadline=None)
    @given(nf=st.integers(1, 40), seed=st.integers(0, 2**31 - 1))
    def test_matches_full_transform(self, nf, seed):
        values = np.random.default_rng(seed).standard_normal(3 * nf)
        contour = ContourSpec(0.9, nf)
        full = ztransform_nodes(TimeSignal(values), contour).values
        half = full[half_spectrum_indices(nf) - 1]
        np.testing.assert_allclose(expand_half_spectrum(half, contour).values, full, atol=1e-12)


class TestTheory:
    def test_oracle_geometric(self):
        q = 0.475**8
        val = aliasing_error_oracle(geometric, ContourSpec(0.95, 8), 0)
        assert val == pytest.approx(q / (1 - q), rel=1e-12)
        assert val == pytest.approx(0.0025982193, abs=1e-10)

    def test_oracle_two_nodes(self):
        val = aliasing_error_oracle(geometric, ContourSpec(1.0, 2), 0)
        assert val == pytest.approx(1 / 3, rel=1e-12)
        two_node = 0.5 * (1 / (1 - 0.5) + 1 / (1 + 0.5))
        assert two_node - 1 == pytest.approx(val, rel=1e-12)

    def test_oracle_no_aliasing(self):
        assert aliasing_error_oracle([1.0, 2.0, 3.0], ContourSpec(0.9, 4), 1) == 0

    def test_decay_bound(self):
        assert decay_bound(1.0, 1.0, 10) == 1.0
        assert decay_bound(2.0, 2.0, 3) == 0.25
        theta = np.linspace(0, 2 * np.pi, 4001)
        m = np.max(np.abs(1 / (1 - 1.9 * np.exp(1j * theta) / 2)))
        assert decay_bound(m, 1.9, 20) >= 2.0**-20

    def test_predicted_rate(self):
        assert predicted_rate(0.95, 1.0346) == pytest.approx(0.91824, abs=5e-5)
        assert predicted_rate(0.9, 1.1318) == pytest.approx(0.79519, abs=5e-5)
        with pytest.raises(ValueError):
            predicted_rate(1.1, 1.0)
