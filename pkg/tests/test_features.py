import numpy as np
import pytest

from kwspot.errors import AudioTooShortError, DataError, FormatError, ShapeError
from kwspot.features import (
    AudioBuffer,
    FeatureKind,
    FeatureSequence,
    MfccConfig,
    apply_cmvn,
    delta_features,
    extract_mfcc,
    frame_count,
    read_features,
    read_wav,
    write_features,
    write_wav,
)


def tone(duration, sr=16000, freq=440.0, amp=0.3):
    t = np.arange(int(duration * sr)) / sr
    return AudioBuffer(amp * np.sin(2 * np.pi * freq * t), sr)


class TestExtractMfcc:
    def test_frame_count_formula(self):
        audio = tone(1.0)
        feats = extract_mfcc(audio)
        assert feats.num_frames == (16000 - 400) // 160 + 1 == 98
        assert feats.frame_rate == pytest.approx(100.0)

    def test_frame_count_random_durations(self):
        rng = np.random.default_rng(0)
        cfg = MfccConfig()
        for _ in range(20):
            n = int(rng.integers(400, 40000))
            audio = AudioBuffer(rng.uniform(-0.5, 0.5, size=n), 16000)
            feats = extract_mfcc(audio, cfg)
            assert feats.num_frames == frame_count(n, 400, 160)

    def test_dimension_is_39(self):
        feats = extract_mfcc(tone(0.5))
        assert feats.dim == 39
        assert feats.feature_kind == FeatureKind.MFCC

    def test_statics_only(self):
        feats = extract_mfcc(tone(0.5), MfccConfig(append_deltas=False))
        assert feats.dim == 13

    def test_too_short_audio(self):
        with pytest.raises(AudioTooShortError):
            extract_mfcc(AudioBuffer(np.zeros(399), 16000))

    def test_silence_is_stationary(self):
        rng = np.random.default_rng(1)
        samples = rng.normal(scale=1e-6, size=8000)
        feats = extract_mfcc(AudioBuffer(samples, 16000))
        statics = feats.frames[:, :13].astype(np.float64)
        gaps = np.linalg.norm(np.diff(statics, axis=0), axis=1)
        assert gaps.max() < 0.5 * (1.0 + np.abs(statics).max())

    def test_unsupported_rate_rejected(self):
        with pytest.raises(DataError, match="FFT"):
            extract_mfcc(tone(0.5, sr=48000))

    def test_8khz_supported(self):
        feats = extract_mfcc(tone(0.5, sr=8000))
        assert feats.dim == 39


class TestCmvn:
    def test_normalizes_mean_and_variance(self):
        rng = np.random.default_rng(2)
        x = FeatureSequence(5.0 + 2.0 * rng.normal(size=(200, 7)), 100.0)
        out = apply_cmvn(x).frames.astype(np.float64)
        assert np.abs(out.mean(axis=0)).max() < 1e-6
        assert np.abs(out.var(axis=0) - 1.0).max() < 1e-5

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        x = FeatureSequence(rng.normal(size=(150, 5)), 100.0)
        once = apply_cmvn(x)
        twice = apply_cmvn(once)
        assert np.abs(once.frames - twice.frames).max() < 1e-6

    def test_affine_invariance(self):
        rng = np.random.default_rng(4)
        base = rng.normal(size=(120, 6))
        scale = rng.uniform(0.5, 3.0, size=6)
        offset = rng.uniform(-2.0, 2.0, size=6)
        a = apply_cmvn(FeatureSequence(base, 100.0))
        b = apply_cmvn(FeatureSequence(base * scale + offset, 100.0))
        assert np.abs(a.frames - b.frames).max() < 1e-4

    def test_zero_variance_column_clamped(self):
        x = np.ones((50, 3), dtype=np.float32)
        out = apply_cmvn(FeatureSequence(x, 100.0))
        assert np.all(np.isfinite(out.frames))

    def test_requires_two_frames(self):
        with pytest.raises(ShapeError):
            apply_cmvn(FeatureSequence(np.ones((1, 3)), 100.0))


class TestDeltas:
    def test_constant_sequence_zero(self):
        out = delta_features(np.full((10, 4), 3.7))
        assert np.all(out == 0.0)

    def test_linear_ramp_interior_equals_slope(self):
        slope = 0.25
        x = slope * np.arange(20)[:, None] * np.ones((1, 3))
        d = delta_features(x, window=2)
        assert np.abs(d[2:-2] - slope).max() < 1e-12

    def test_single_frame_zero(self):
        assert np.all(delta_features(np.ones((1, 5))) == 0.0)

    def test_linearity(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(30, 4))
        y = rng.normal(size=(30, 4))
        a, b = 2.5, -0.7
        lhs = delta_features(a * x + b * y)
        rhs = a * delta_features(x) + b * delta_features(y)
        assert np.abs(lhs - rhs).max() < 1e-12


class TestContainer:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(6)
        feats = FeatureSequence(
            rng.normal(size=(17, 39)).astype(np.float32), 100.0, FeatureKind.BNF
        )
        path = tmp_path / "x.kwsf"
        write_features(feats, path)
        back = read_features(path)
        assert np.array_equal(
            feats.frames.view(np.uint32), back.frames.view(np.uint32)
        )
        assert back.feature_kind == FeatureKind.BNF
        assert back.frame_rate == feats.frame_rate

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.kwsf"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(FormatError, match="magic"):
            read_features(path)

    def test_truncated_payload(self, tmp_path):
        rng = np.random.default_rng(7)
        feats = FeatureSequence(rng.normal(size=(10, 4)).astype(np.float32), 50.0)
        path = tmp_path / "t.kwsf"
        write_features(feats, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(FormatError, match="payload"):
            read_features(path)


class TestWav:
    def test_wav_round_trip(self, tmp_path):
        audio = tone(0.25)
        path = tmp_path / "a.wav"
        write_wav(path, audio)
        back = read_wav(path)
        assert back.sample_rate == 16000
        assert np.abs(back.samples - audio.samples).max() < 1.0 / 32768

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk.wav"
        path.write_bytes(b"this is not audio")
        with pytest.raises(FormatError):
            read_wav(path)


def test_feature_sequence_rejects_nonfinite():
    bad = np.ones((3, 3))
    bad[1, 1] = np.nan
    with pytest.raises(DataError):
        FeatureSequence(bad, 100.0)
