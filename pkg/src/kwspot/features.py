"""Frame-level feature extraction and storage.

MFCC extraction (13 statics + deltas + delta-deltas = 39 dims at 100 Hz),
per-utterance cepstral mean/variance normalisation, and a bit-exact binary
container for any frame-level feature type.

The MFCC pipeline is fixed and fully documented so results are reproducible
without an external toolkit: pre-emphasis 0.97, Hamming window, 26 mel
filters, 512-point FFT, DCT-II (orthonormal), no liftering. All internal
math runs in float64; stored features are float32.
"""

import enum
import struct
import wave
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct

from .errors import AudioTooShortError, DataError, FormatError, ShapeError

CMVN_VARIANCE_FLOOR = 1e-8


class FeatureKind(enum.IntEnum):
    MFCC = 0
    BNF = 1
    AE = 2
    CAE = 3
    OTHER = 4


@dataclass
class AudioBuffer:
    """Mono audio: float samples in [-1, 1] plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ShapeError(f"audio must be 1-D, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise DataError(f"sample_rate must be positive, got {self.sample_rate}")


@dataclass
class FeatureSequence:
    """A T x D matrix of frame-level feature vectors.

    The universal currency of the pipeline. Frames are stored as float32
    (the container format below is float32) and must be finite.
    """

    frames: np.ndarray
    frame_rate: float
    feature_kind: FeatureKind = FeatureKind.OTHER

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1 or self.frames.shape[1] < 1:
            raise ShapeError(f"frames must be a T x D matrix with T,D >= 1, got {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise DataError("feature frames contain non-finite values")
        self.feature_kind = FeatureKind(self.feature_kind)

    @property
    def num_frames(self):
        return self.frames.shape[0]

    @property
    def dim(self):
        return self.frames.shape[1]


@dataclass
class MfccConfig:
    window_length: float = 0.025
    frame_shift: float = 0.010
    n_ceps: int = 13
    n_mel_filters: int = 26
    fft_size: int = 512
    pre_emphasis: float = 0.97
    append_deltas: bool = True
    delta_window: int = 2

    def __post_init__(self):
        if not self.window_length > self.frame_shift > 0:
            raise DataError("require window_length > frame_shift > 0")
        if self.n_ceps > self.n_mel_filters:
            raise DataError("n_ceps must not exceed n_mel_filters")


def read_wav(path):
    """Read a mono 16-bit PCM WAV file into an AudioBuffer.

    Only this format is supported; anything else is rejected with an error
    naming the constraint. No resampling is performed.
    """
    try:
        with wave.open(str(path), "rb") as w:
            n_channels = w.getnchannels()
            sampwidth = w.getsampwidth()
            rate = w.getframerate()
            n = w.getnframes()
            raw = w.readframes(n)
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"not a readable WAV file: {path}: {exc}") from exc
    if n_channels != 1:
        raise DataError(f"{path}: expected mono audio, got {n_channels} channels")
    if sampwidth != 2:
        raise DataError(f"{path}: expected 16-bit PCM, got {8 * sampwidth}-bit")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioBuffer(samples, rate)


def write_wav(path, audio):
    """Write an AudioBuffer as mono 16-bit PCM WAV (values clipped to [-1, 1])."""
    pcm = np.clip(audio.samples, -1.0, 1.0)
    pcm = np.round(pcm * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(audio.sample_rate))
        w.writeframes(pcm.tobytes())


def frame_count(n_samples, window, shift):
    """Number of full analysis windows: floor((N - window) / shift) + 1."""
    if n_samples < window:
        return 0
    return (n_samples - window) // shift + 1


def _mel(f):
    return 2595.0 * np.log10(1.0 + f / 700.0)


def _mel_inv(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def mel_filterbank(n_filters, fft_size, sample_rate):
    """Triangular mel filterbank on FFT bin centres, 0 Hz to Nyquist."""
    n_bins = fft_size // 2 + 1
    edges = _mel_inv(np.linspace(_mel(0.0), _mel(sample_rate / 2.0), n_filters + 2))
    bin_freqs = np.arange(n_bins) * sample_rate / fft_size
    fbank = np.zeros((n_filters, n_bins))
    for j in range(n_filters):
        lo, mid, hi = edges[j], edges[j + 1], edges[j + 2]
        up = (bin_freqs - lo) / (mid - lo)
        down = (hi - bin_freqs) / (hi - mid)
        fbank[j] = np.maximum(0.0, np.minimum(up, down))
    return fbank


def delta_features(statics, window=2):
    """Regression-based deltas over +-window frames with edge replication.

    delta_t = sum_{n=1..W} n * (x_{t+n} - x_{t-n}) / (2 * sum_{n=1..W} n^2)

    A constant sequence has zero deltas; a per-frame linear ramp of slope s
    has interior deltas exactly s. Applying the function twice yields
    acceleration coefficients. T == 1 gives all zeros.
    """
    x = np.asarray(statics, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected T x n matrix, got shape {x.shape}")
    t_len = x.shape[0]
    padded = np.concatenate([np.repeat(x[:1], window, axis=0), x, np.repeat(x[-1:], window, axis=0)])
    num = np.zeros_like(x)
    for n in range(1, window + 1):
        num += n * (padded[window + n : window + n + t_len] - padded[window - n : window - n + t_len])
    return num / (2.0 * sum(n * n for n in range(1, window + 1)))


def extract_mfcc(audio, cfg=None):
    """Extract MFCC features (T x 39 by default) from an AudioBuffer.

    Frames are placed without padding, so T = floor((N - window)/shift) + 1.
    Raises AudioTooShortError if the signal does not fill one window, and
    DataError if the analysis window exceeds the FFT size at the given
    sample rate (no resampling is done; 8 kHz and 16 kHz both work with the
    default 512-point FFT).
    """
    cfg = cfg or MfccConfig()
    sr = audio.sample_rate
    win = int(round(cfg.window_length * sr))
    shift = int(round(cfg.frame_shift * sr))
    if win > cfg.fft_size:
        raise DataError(
            f"window of {win} samples exceeds FFT size {cfg.fft_size} at {sr} Hz; "
            f"supported rates with defaults include 8000 and 16000 Hz"
        )
    n = audio.samples.shape[0]
    t_len = frame_count(n, win, shift)
    if t_len < 1:
        raise AudioTooShortError(f"audio of {n} samples is shorter than one {win}-sample window")

    emphasized = np.empty(n, dtype=np.float64)
    emphasized[0] = audio.samples[0]
    emphasized[1:] = audio.samples[1:] - cfg.pre_emphasis * audio.samples[:-1]

    idx = np.arange(win)[None, :] + shift * np.arange(t_len)[:, None]
    frames = emphasized[idx] * np.hamming(win)

    spectrum = np.fft.rfft(frames, n=cfg.fft_size)
    power = np.abs(spectrum) ** 2
    fbank = mel_filterbank(cfg.n_mel_filters, cfg.fft_size, sr)
    energies = np.maximum(power @ fbank.T, 1e-20)
    ceps = dct(np.log(energies), type=2, axis=1, norm="ortho")[:, : cfg.n_ceps]

    if cfg.append_deltas:
        vel = delta_features(ceps, cfg.delta_window)
        acc = delta_features(vel, cfg.delta_window)
        ceps = np.concatenate([ceps, vel, acc], axis=1)

    return FeatureSequence(ceps, frame_rate=1.0 / cfg.frame_shift, feature_kind=FeatureKind.MFCC)


def apply_cmvn(feats):
    """Per-utterance, per-dimension mean/variance normalisation.

    Dimensions with variance below CMVN_VARIANCE_FLOOR are clamped to the
    floor rather than failing, so digital silence stays finite. Requires
    T >= 2. Idempotent within float32 precision.
    """
    if feats.num_frames < 2:
        raise ShapeError("CMVN needs at least 2 frames")
    x = feats.frames.astype(np.float64)
    mean = x.mean(axis=0)
    var = np.maximum(x.var(axis=0), CMVN_VARIANCE_FLOOR)
    out = (x - mean) / np.sqrt(var)
    return FeatureSequence(out, feats.frame_rate, feats.feature_kind)


_MAGIC = b"KWSF"
_FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHIIf")


def write_features(feats, path):
    """Write a FeatureSequence to the KWSF binary container (bit-exact)."""
    header = _HEADER.pack(
        _MAGIC,
        _FORMAT_VERSION,
        int(feats.feature_kind),
        feats.num_frames,
        feats.dim,
        np.float32(feats.frame_rate),
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(feats.frames, dtype="<f4").tobytes())


def read_features(path):
    """Read a KWSF container written by write_features.

    Round-trips bit-exactly. Raises FormatError (with the byte offset) on a
    bad magic number, unknown version, or a payload shorter than the header
    promises.
    """
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"truncated header: {len(blob)} bytes", offset=len(blob))
    magic, version, kind, t_len, dim, frame_rate = _HEADER.unpack_from(blob, 0)
    if magic != _MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {_MAGIC!r}", offset=0)
    if version != _FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}", offset=4)
    expected = t_len * dim * 4
    payload = blob[_HEADER.size :]
    if len(payload) < expected:
        raise FormatError(
            f"payload holds {len(payload)} bytes but header declares {expected}",
            offset=_HEADER.size + len(payload),
        )
    frames = np.frombuffer(payload[:expected], dtype="<f4").reshape(t_len, dim)
    return FeatureSequence(frames, float(np.float32(frame_rate)), FeatureKind(kind))
