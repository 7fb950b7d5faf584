import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specgrad import ConfigError, DimensionError, StftConfig, amp_phase, make_operator, stft_fast, stft_matrix

from .conftest import random_configs
from .oracles import dft_frames


class TestConfig:
    @pytest.mark.parametrize("L,S,N", [(4, 5, 8), (16, 1, 8), (4, 2, 12), (4, 0, 8)])
    def test_invalid(self, L, S, N):
        with pytest.raises(ConfigError):
            StftConfig(L, S, N)

    def test_unknown_window(self):
        with pytest.raises(ConfigError):
            StftConfig(4, 2, 8, "triangle")


class TestOperator:
    def test_frame_count(self):
        op = make_operator(StftConfig(4, 2, 4), 8)
        assert op.shape == (4, 3)

    def test_tail_padding(self):
        op = make_operator(StftConfig(4, 2, 4), 5)
        assert op.num_frames == 3
        assert list(op.frame_support(2)) == [4]
        row = op.row(2, 0)
        np.testing.assert_array_equal(row, [0, 0, 0, 0, 1])

    def test_first_row_rectangular(self):
        op = make_operator(StftConfig(4, 2, 8), 10)
        np.testing.assert_array_equal(op.row(0, 0), [1, 1, 1, 1, 0, 0, 0, 0, 0, 0])

    def test_row_support(self):
        op = make_operator(StftConfig(6, 4, 8, "hann"), 13)
        for t in range(op.num_frames):
            nz = np.flatnonzero(op.matrix[t * op.num_bins + 1])
            assert nz.size <= 6
            if nz.size == 0:  # last frame holds only sample 12, under the Hann zero
                continue
            assert nz.min() >= t * 4 and nz.max() <= min(t * 4 + 5, 12)

    def test_length_mismatch(self):
        op = make_operator(StftConfig(4, 2, 8), 10)
        with pytest.raises(DimensionError):
            stft_fast(op, np.zeros(9))
        with pytest.raises(DimensionError):
            stft_matrix(op, np.zeros(11))


class TestForward:
    def test_zero_signal(self):
        op = make_operator(StftConfig(8, 3, 16), 20)
        assert not np.any(stft_fast(op, np.zeros(20)).entries)
        assert not np.any(stft_matrix(op, np.zeros(20)).entries)

    def test_impulse(self):
        op = make_operator(StftConfig(4, 2, 8), 12)
        y = np.zeros(12)
        y[0] = 1
        Y = stft_matrix(op, y).entries
        np.testing.assert_array_equal(Y[0], np.ones(5))
        assert not np.any(Y[1:])

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_textbook_dft(self, seed):
        rng = np.random.default_rng(seed)
        (cfg, M), = random_configs(rng, 1)
        y = rng.standard_normal(M)
        expected = dft_frames(cfg, y)
        op = make_operator(cfg, M)
        np.testing.assert_allclose(stft_matrix(op, y).entries, expected, atol=1e-12)
        np.testing.assert_allclose(stft_fast(op, y).entries, expected, atol=1e-12)

    def test_bin_aligned_cosine(self):
        N, k = 32, 5
        m = np.arange(96)
        op = make_operator(StftConfig(N, N, N, one_sided=True), 96)
        A = stft_fast(op, np.cos(2 * np.pi * k * m / N)).amplitude
        # integer-period frames: all energy at bin k, magnitude N/2
        np.testing.assert_allclose(A[:, k], N / 2, atol=1e-10)
        others = np.delete(A, k, axis=1)
        assert np.max(others) < 1e-10


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_fast_matches_matrix(self, seed):
        rng = np.random.default_rng(seed)
        (cfg, M), = random_configs(rng, 1)
        op = make_operator(cfg, M)
        y = rng.standard_normal(M)
        Yf, Ym = stft_fast(op, y).entries, stft_matrix(op, y).entries
        assert np.max(np.abs(Yf - Ym)) <= 1e-10 * max(1.0, np.max(np.abs(Ym)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_parseval(self, seed):
        rng = np.random.default_rng(seed)
        cfg = StftConfig(8, 3, 16, "rectangular", one_sided=False)
        op = make_operator(cfg, 40)
        y = rng.standard_normal(40)
        energy = np.sum(np.abs(stft_fast(op, y).entries) ** 2, axis=1)
        frames = op.frames(y)
        np.testing.assert_allclose(energy, 16 * np.sum(frames**2, axis=1), rtol=1e-9)

    def test_linearity(self, rng):
        op = make_operator(StftConfig(8, 2, 16, "hann"), 33)
        y1, y2 = rng.standard_normal((2, 33))
        lhs = stft_fast(op, 2.5 * y1 - 0.7 * y2).entries
        rhs = 2.5 * stft_fast(op, y1).entries - 0.7 * stft_fast(op, y2).entries
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_two_sided_conjugate_symmetry(self, rng):
        op = make_operator(StftConfig(8, 4, 16, one_sided=False), 30)
        Y = stft_fast(op, rng.standard_normal(30)).entries
        n = np.arange(1, 16)
        np.testing.assert_allclose(Y[:, n], np.conj(Y[:, 16 - n]), atol=1e-12)

    def test_one_sided_is_prefix_of_two_sided(self, rng):
        y = rng.standard_normal(30)
        one = stft_fast(make_operator(StftConfig(8, 4, 16, one_sided=True), 30), y).entries
        two = stft_fast(make_operator(StftConfig(8, 4, 16, one_sided=False), 30), y).entries
        np.testing.assert_allclose(one, two[:, :9], atol=1e-12)


class TestAmpPhase:
    def test_345(self):
        A, theta = amp_phase(np.array([[3 + 4j]]))
        assert A[0, 0] == 5.0
        assert theta[0, 0] == np.arctan2(4, 3)

    def test_zero_convention(self):
        A, theta = amp_phase(np.array([[0j, -0.0 - 0.0j]]))
        assert np.all(A == 0) and np.all(theta == 0)

    def test_negative_real_axis(self):
        _, theta = amp_phase(np.array([[complex(-1.0, -0.0)]]))
        assert theta[0, 0] == np.pi

    def test_reconstruction(self, rng):
        Y = rng.standard_normal((6, 9)) + 1j * rng.standard_normal((6, 9))
        A, theta = amp_phase(Y)
        np.testing.assert_allclose(A * np.exp(1j * theta), Y, atol=1e-12)
        assert np.all((theta > -np.pi) & (theta <= np.pi))
