"""
Unit tests for beamform.py module.
"""

import numpy as np
import pytest

from rir_inpaint.beamform import (
    NoiseCovariance,
    SingularCovarianceError,
    StftConfig,
    apply_beamformer,
    atf_steering,
    estimate_noise_cov,
    istft,
    mvdr_weights,
    noise_output_power,
    null_projection_dist,
    steering_for_stft,
    stft,
)
from rir_inpaint.core import InvalidInputError, RirMatrix, ShapeMismatchError

from tests.fixtures.sample_data import MVDR_2MIC_WEIGHTS, SAMPLE_RATE

pytestmark = pytest.mark.unit

SMALL_STFT = StftConfig(frame_length=128, hop=64, fft_size=128)


def random_hpd(rng, bins, channels):
    """Random Hermitian positive definite matrices (bins, channels, channels)."""
    a = rng.standard_normal((bins, channels, 2 * channels)) + 1j * rng.standard_normal((bins, channels, 2 * channels))
    return a @ np.conj(np.swapaxes(a, -1, -2)) / (2 * channels) + 0.1 * np.eye(channels)[None]


def delta_rirs(delays, num_samples=64):
    """One unit impulse per column at the given sample delays."""
    data = np.zeros((num_samples, len(delays)))
    for column, delay in enumerate(delays):
        data[delay, column] = 1.0
    return RirMatrix(data, SAMPLE_RATE)


class TestStftConfig:
    """Test cases for StftConfig validation."""

    def test_defaults(self):
        config = StftConfig()
        assert config.num_bins == 257
        np.testing.assert_allclose(config.window_array() ** 2, np.hanning(513)[:512], atol=1e-12)

    @pytest.mark.parametrize("kwargs", [
        {"hop": 0},
        {"hop": 600},
        {"fft_size": 256},
        {"window": "hamming"},
        {"hop": 200},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidInputError):
            StftConfig(**kwargs)


class TestStft:
    """Test cases for stft / istft."""

    def test_round_trip(self, rng):
        x = rng.standard_normal(1000)
        frames = stft(x, SMALL_STFT)
        assert frames.shape[-1] == SMALL_STFT.num_bins
        y = istft(frames, SMALL_STFT, length=x.size)
        assert np.max(np.abs(y - x)) < 1e-10

    def test_round_trip_multichannel(self, rng):
        x = rng.standard_normal((3, 777))
        y = istft(stft(x, SMALL_STFT), SMALL_STFT, length=777)
        assert y.shape == (3, 777)
        assert np.max(np.abs(y - x)) < 1e-10

    def test_sinusoid_lands_in_its_bin(self):
        k0 = 10
        n = np.arange(2048)
        frames = stft(np.cos(2 * np.pi * k0 * n / SMALL_STFT.fft_size), SMALL_STFT)
        power = np.abs(frames[frames.shape[0] // 2]) ** 2
        assert int(np.argmax(power)) == k0
        assert power[k0 - 2:k0 + 3].sum() / power.sum() > 0.98

    def test_empty_signal(self):
        with pytest.raises(InvalidInputError):
            stft(np.zeros(0), SMALL_STFT)

    def test_istft_bin_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            istft(np.zeros((4, 10), dtype=complex), SMALL_STFT)


class TestSteering:
    """Test cases for ATF steering vectors."""

    def test_delta_at_origin_is_flat(self):
        field = atf_steering(delta_rirs([0, 0]), 64)
        np.testing.assert_allclose(field.values, 1.0)
        assert field.num_bins == 33
        assert field.freqs[-1] == pytest.approx(SAMPLE_RATE / 2)

    def test_delayed_delta_is_linear_phase(self):
        field = atf_steering(delta_rirs([5]), 64)
        k = np.arange(33)
        np.testing.assert_allclose(field.values[:, 0], np.exp(-2j * np.pi * k * 5 / 64), atol=1e-12)

    def test_sampled_on_stft_grid(self, rng):
        rirs = RirMatrix(rng.standard_normal((256, 3)), SAMPLE_RATE)
        field = steering_for_stft(rirs, SMALL_STFT)
        assert field.values.shape == (65, 3)
        np.testing.assert_allclose(field.values, np.fft.rfft(rirs.data, n=256, axis=0)[::2])

    def test_dft_size_must_be_multiple(self, rng):
        rirs = RirMatrix(rng.standard_normal((256, 2)), SAMPLE_RATE)
        with pytest.raises(InvalidInputError):
            steering_for_stft(rirs, SMALL_STFT, dft_size=300)


class TestNoiseCovariance:
    """Test cases for estimate_noise_cov."""

    @pytest.fixture
    def noise_stft(self, rng):
        return rng.standard_normal((3, 200, 5)) + 1j * rng.standard_normal((3, 200, 5))

    def test_sample_covariance_without_loading(self, noise_stft):
        cov = estimate_noise_cov(noise_stft, loading=0.0)
        assert cov.matrices.shape == (5, 3, 3)
        y = noise_stft[:, :, 2]
        np.testing.assert_allclose(cov.matrices[2], y @ y.conj().T / 200)

    def test_hermitian_and_loaded(self, noise_stft):
        bare = estimate_noise_cov(noise_stft, loading=0.0).matrices
        loaded = estimate_noise_cov(noise_stft, loading=0.1).matrices
        np.testing.assert_allclose(loaded, np.conj(np.swapaxes(loaded, -1, -2)))
        trace = np.real(np.trace(bare, axis1=1, axis2=2))
        np.testing.assert_allclose(loaded - bare, (0.1 * trace / 3)[:, None, None] * np.eye(3)[None], atol=1e-12)

    def test_select_channels(self, noise_stft):
        cov = estimate_noise_cov(noise_stft)
        sub = cov.select([0, 2])
        np.testing.assert_array_equal(sub.matrices, cov.matrices[:, [0, 2]][:, :, [0, 2]])

    def test_invalid_input(self):
        with pytest.raises(InvalidInputError):
            estimate_noise_cov(np.zeros((2, 0, 4), dtype=complex))
        with pytest.raises(ShapeMismatchError):
            estimate_noise_cov(np.zeros((2, 4), dtype=complex))


class TestMvdr:
    """Test cases for mvdr_weights."""

    def test_two_mic_hand_solved(self):
        cov = NoiseCovariance(np.diag([1.0, 4.0]).astype(complex)[None])
        result = mvdr_weights(np.ones((1, 2), dtype=complex), cov)
        np.testing.assert_allclose(result.weights[0], MVDR_2MIC_WEIGHTS, atol=1e-12)

    def test_distortionless(self, rng):
        d = rng.standard_normal((1000, 4)) + 1j * rng.standard_normal((1000, 4))
        cov = NoiseCovariance(random_hpd(rng, 1000, 4))
        w = mvdr_weights(d, cov).weights
        response = np.einsum("fn,fn->f", w.conj(), d)
        np.testing.assert_allclose(response, 1.0, atol=1e-9)

    def test_minimum_noise_power(self, rng):
        d = rng.standard_normal((1, 4)) + 1j * rng.standard_normal((1, 4))
        cov = NoiseCovariance(random_hpd(rng, 1, 4))
        w = mvdr_weights(d, cov).weights
        optimum = noise_output_power(w, cov)[0]
        for _ in range(100):
            v = rng.standard_normal((1, 4)) + 1j * rng.standard_normal((1, 4))
            # keep the competitor distortionless: remove the component along d
            v = v - d * (np.vdot(d[0], v[0]) / np.vdot(d[0], d[0]))
            assert noise_output_power(w + v, cov)[0] >= optimum - 1e-12

    def test_null_steering_bins(self, rng):
        d = rng.standard_normal((4, 2)) + 0j
        d[1] = 0.0
        result = mvdr_weights(d, NoiseCovariance(random_hpd(rng, 4, 2)))
        assert result.null_bins.tolist() == [False, True, False, False]
        np.testing.assert_array_equal(result.weights[1], 0.0)

    def test_singular_covariance(self):
        cov = NoiseCovariance(np.zeros((2, 3, 3), dtype=complex))
        with pytest.raises(SingularCovarianceError):
            mvdr_weights(np.ones((2, 3), dtype=complex), cov)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatchError):
            mvdr_weights(np.ones((3, 2), dtype=complex), NoiseCovariance(random_hpd(rng, 3, 3)))


class TestApplyBeamformer:
    """Test cases for apply_beamformer."""

    def test_channel_selection_reproduces_channel(self, rng):
        x = rng.standard_normal((2, 900))
        weights = np.zeros((SMALL_STFT.num_bins, 2), dtype=complex)
        weights[:, 0] = 1.0
        y = apply_beamformer(weights, stft(x, SMALL_STFT), SMALL_STFT, length=900)
        assert np.max(np.abs(y - x[0])) < 1e-10

    def test_steered_source_passes_unchanged(self, rng):
        bins = SMALL_STFT.num_bins
        d = rng.standard_normal((bins, 3)) + 1j * rng.standard_normal((bins, 3))
        weights = mvdr_weights(d, NoiseCovariance(random_hpd(rng, bins, 3)))
        s = rng.standard_normal(900)
        S = stft(s, SMALL_STFT)
        Y = d.T[:, None, :] * S[None]
        y = apply_beamformer(weights, Y, SMALL_STFT, length=900)
        np.testing.assert_allclose(y, s, atol=1e-8)

    def test_weight_shape_checked(self, rng):
        Y = stft(rng.standard_normal((2, 300)), SMALL_STFT)
        with pytest.raises(ShapeMismatchError):
            apply_beamformer(np.ones((SMALL_STFT.num_bins, 3), dtype=complex), Y, SMALL_STFT)


class TestNullProjectionDist:
    """Test cases for null_projection_dist."""

    def test_identical_is_zero(self, toy_rirs):
        result = null_projection_dist(toy_rirs, toy_rirs)
        assert result.total == pytest.approx(0.0, abs=1e-10)
        assert np.isnan(result.per_bin[0])
        assert not result.evaluated[0]

    def test_scale_invariant(self, toy_rirs):
        scaled = RirMatrix(-2.5 * toy_rirs.data, toy_rirs.sample_rate)
        assert null_projection_dist(toy_rirs, scaled).total == pytest.approx(0.0, abs=1e-10)

    def test_orthogonal_estimate_scores_one_per_bin(self):
        data = np.zeros((8, 2))
        data[0, 0] = 1.0
        truth = RirMatrix(data, SAMPLE_RATE)
        estimate = RirMatrix(data[:, ::-1], SAMPLE_RATE)
        result = null_projection_dist(truth, estimate)
        assert result.evaluated.sum() == 4
        assert result.total == pytest.approx(4.0)
        assert result.mean == pytest.approx(1.0)

    def test_include_dc(self, toy_rirs):
        result = null_projection_dist(toy_rirs, toy_rirs, exclude_dc=False)
        assert result.evaluated[0]

    def test_errors(self, toy_rirs):
        with pytest.raises(ShapeMismatchError):
            null_projection_dist(toy_rirs, toy_rirs.select([0, 1]))
        zeros = RirMatrix(np.zeros(toy_rirs.shape), toy_rirs.sample_rate)
        with pytest.raises(InvalidInputError):
            null_projection_dist(zeros, zeros)
