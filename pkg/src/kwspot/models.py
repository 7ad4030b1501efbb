"""The two CNN keyword spotters.

The supervised classifier takes a 60x39 time-resampled template through
three convolutions (64@11x11, 128@7x7, 256@5x5, stride 1, max pools after
the second and third), dense layers of 500/100/300 units with dropout 0.5
after the first and third, and a K-way softmax. At test time it slides a
60-frame window at step 1 over the utterance and keeps each class's max.

The CNN-DTW model distils DTW scores: ten stride-1 convolutions (80@39x10,
then 3x80, 3x256 and 3x512 @1x10), global temporal max pooling, two
3000-unit dense layers with dropout 0.5, and K sigmoid outputs; leaky ReLU
(alpha = 1/3) on every hidden layer. One forward pass scores a whole
utterance of any length >= 91 frames (ten valid width-10 convolutions eat
90 frames); shorter utterances are padded by repeating the final frame,
with a warning, down to a hard minimum of 10 frames.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .dtw import ScoreVector
from .errors import ConfigError, DataError, ShapeError
from .features import FeatureSequence
from .nn import (
    ADAM,
    Activation,
    CATEGORICAL_CROSS_ENTROPY,
    Conv2d,
    Dense,
    Dropout,
    GlobalTemporalMaxPool,
    MaxPool2d,
    NetworkSpec,
    OptimizerSpec,
    SGD_NESTEROV,
    SUMMED_BINARY_CROSS_ENTROPY,
    build_state,
    forward,
    train,
)

CLASSIFIER_WINDOW = 60
CNN_DTW_MIN_FRAMES = 91  # ten width-10 valid convolutions: T_out = T - 90
CNN_DTW_HARD_MIN = 10
LEAKY_ALPHA = 1.0 / 3.0


@dataclass
class Detection:
    utterance_id: str
    keyword_id: int
    score: float


def build_classifier_spec(n_keywords):
    relu = Activation("relu")
    return NetworkSpec(
        (1, CLASSIFIER_WINDOW, 39),
        [
            Conv2d(64, 11, 11), relu,
            Conv2d(128, 7, 7), relu,
            MaxPool2d(),
            Conv2d(256, 5, 5), relu,
            MaxPool2d(),
            Dense(500), relu, Dropout(0.5),
            Dense(100), relu,
            Dense(300), relu, Dropout(0.5),
            Dense(n_keywords), Activation("softmax"),
        ],
    )


def build_cnn_dtw_spec(n_keywords):
    leaky = Activation("leaky_relu", alpha=LEAKY_ALPHA)
    layers = [Conv2d(80, 39, 10), leaky]
    for _ in range(3):
        layers += [Conv2d(80, 1, 10), leaky]
    for _ in range(3):
        layers += [Conv2d(256, 1, 10), leaky]
    for _ in range(3):
        layers += [Conv2d(512, 1, 10), leaky]
    layers += [
        GlobalTemporalMaxPool(),
        Dense(3000), leaky, Dropout(0.5),
        Dense(3000), leaky, Dropout(0.5),
        Dense(n_keywords), Activation("sigmoid"),
    ]
    return NetworkSpec((1, 39, None), layers)


def resample_time(feats, target_len=CLASSIFIER_WINDOW):
    """Cubic interpolation of each feature dimension onto target_len
    uniformly spaced points across the original time axis. Needs T >= 2."""
    frames = feats.frames if isinstance(feats, FeatureSequence) else np.asarray(feats)
    t_len = frames.shape[0]
    if t_len < 2:
        raise ShapeError(f"resampling needs T >= 2, got T={t_len}")
    if t_len == target_len:
        out = frames.astype(np.float64)
    else:
        spline = CubicSpline(np.arange(t_len), frames.astype(np.float64), axis=0)
        out = spline(np.linspace(0.0, t_len - 1, target_len))
    rate = feats.frame_rate if isinstance(feats, FeatureSequence) else 100.0
    kind = feats.feature_kind if isinstance(feats, FeatureSequence) else 4
    return FeatureSequence(out, rate, kind)


def _holdout_split(rng, n, frac):
    idx = rng.permutation(n)
    n_hold = max(1, int(round(frac * n))) if n > 1 else 0
    return idx[n_hold:], idx[:n_hold]


def train_cnn_classifier(
    templates,
    n_keywords,
    seed,
    epochs=1000,
    batch_size=32,
    holdout_frac=0.1,
    patience=25,
    dtype=np.float64,
):
    """Supervised training on resampled templates; Nesterov momentum with a
    linear 1e-4 -> 1e-6 schedule and early stopping on a held-out split."""
    spec = build_classifier_spec(n_keywords)
    xs, ys = [], []
    for t in templates:
        if t.keyword_id >= n_keywords:
            raise DataError(f"keyword_id {t.keyword_id} outside inventory of {n_keywords}")
        xs.append(resample_time(t.features).frames[None, :, :].astype(dtype))
        onehot = np.zeros(n_keywords, dtype=dtype)
        onehot[t.keyword_id] = 1.0
        ys.append(onehot)

    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 0xC1A]))
    # stratified holdout: keep at least one template of every type in training
    train_idx, hold_idx = [], []
    by_type = {}
    for i, t in enumerate(templates):
        by_type.setdefault(t.keyword_id, []).append(i)
    for kw in range(n_keywords):
        idxs = by_type.get(kw)
        if not idxs:
            raise DataError(f"keyword type {kw} has no templates in the training split")
        perm = rng.permutation(len(idxs))
        n_hold = min(len(idxs) - 1, max(1, int(round(holdout_frac * len(idxs))))) if len(idxs) > 1 else 0
        hold_idx += [idxs[p] for p in perm[:n_hold]]
        train_idx += [idxs[p] for p in perm[n_hold:]]

    state = build_state(spec, seed, dtype=dtype)
    opt = OptimizerSpec(SGD_NESTEROV, lr_start=1e-4, lr_end=1e-6, total_epochs=epochs, momentum=0.9)
    monitor = ([xs[i] for i in hold_idx], [ys[i] for i in hold_idx]) if hold_idx else None
    state, history = train(
        spec,
        state,
        ([xs[i] for i in train_idx], [ys[i] for i in train_idx]),
        CATEGORICAL_CROSS_ENTROPY,
        opt,
        epochs=epochs,
        batch_size=batch_size,
        monitor=monitor,
        patience=patience if monitor else None,
    )
    return spec, state, history


def cnn_score_utterance(spec, state, utterance, utterance_id="", chunk=128):
    """Max softmax output per keyword over 60-frame windows at step 1.

    Utterances shorter than 60 frames are resampled whole; incomplete tail
    windows are dropped.
    """
    frames = utterance.frames if isinstance(utterance, FeatureSequence) else np.asarray(utterance)
    if frames.shape[0] < 2:
        raise ShapeError("scoring needs at least 2 frames")
    if frames.shape[0] < CLASSIFIER_WINDOW:
        windows = resample_time(utterance).frames[None, :, :]
    else:
        view = np.lib.stride_tricks.sliding_window_view(frames, CLASSIFIER_WINDOW, axis=0)
        windows = np.ascontiguousarray(view.transpose(0, 2, 1))
    x = windows[:, None, :, :].astype(state.dtype)
    best = None
    for lo in range(0, x.shape[0], chunk):
        out, _ = forward(spec, state, x[lo : lo + chunk], mode="eval")
        m = out.max(axis=0)
        best = m if best is None else np.maximum(best, m)
    return ScoreVector(np.clip(best.astype(np.float64), 0.0, 1.0), utterance_id)


def _pad_min_frames(frames, minimum=CNN_DTW_MIN_FRAMES):
    t_len = frames.shape[0]
    if t_len < CNN_DTW_HARD_MIN:
        raise ShapeError(
            f"CNN-DTW input needs at least {CNN_DTW_HARD_MIN} frames (first convolution width), got {t_len}"
        )
    if t_len < minimum:
        warnings.warn(
            f"utterance of {t_len} frames padded to {minimum} by repeating the final frame"
        )
        pad = np.repeat(frames[-1:], minimum - t_len, axis=0)
        return np.concatenate([frames, pad], axis=0)
    return frames


def _as_cnn_dtw_input(feats, dtype):
    frames = feats.frames if isinstance(feats, FeatureSequence) else np.asarray(feats)
    frames = _pad_min_frames(frames)
    return np.ascontiguousarray(frames.T)[None, :, :].astype(dtype)


def train_cnn_dtw(
    score_targets,
    n_keywords,
    seed,
    epochs=1000,
    batch_size=32,
    holdout_frac=0.1,
    patience=10,
    dtype=np.float64,
    log_every=0,
):
    """Distil DTW targets into the CNN-DTW model.

    `score_targets` is a collection of (FeatureSequence, ScoreVector); no
    transcriptions are involved anywhere. Adam with a linear 1e-4 -> 1e-5
    schedule; early stopping monitors the summed cross-entropy on a held-out
    10% of the scored utterances.
    """
    items = list(score_targets)
    if not items:
        raise ConfigError("no scored utterances to train on")
    xs, ys = [], []
    for feats, sv in items:
        scores = sv.scores if isinstance(sv, ScoreVector) else np.asarray(sv, dtype=np.float64)
        if scores.shape != (n_keywords,):
            raise ShapeError(f"target has {scores.shape} scores, expected ({n_keywords},)")
        if np.any(scores < 0.0) or np.any(scores > 1.0):
            raise DataError("DTW targets must lie in [0, 1]")
        xs.append(_as_cnn_dtw_input(feats, dtype))
        ys.append(scores.astype(dtype))

    spec = build_cnn_dtw_spec(n_keywords)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 0xD7]))
    train_sel, hold_sel = _holdout_split(rng, len(xs), holdout_frac)
    state = build_state(spec, seed, dtype=dtype)
    opt = OptimizerSpec(ADAM, lr_start=1e-4, lr_end=1e-5, total_epochs=epochs)
    monitor = ([xs[i] for i in hold_sel], [ys[i] for i in hold_sel]) if len(hold_sel) else None
    state, history = train(
        spec,
        state,
        ([xs[i] for i in train_sel], [ys[i] for i in train_sel]),
        SUMMED_BINARY_CROSS_ENTROPY,
        opt,
        epochs=epochs,
        batch_size=batch_size,
        monitor=monitor,
        patience=patience if monitor else None,
        log_every=log_every,
    )
    return spec, state, history


def cnn_dtw_score_utterance(spec, state, utterance, utterance_id=""):
    """Single forward pass over the whole utterance; sigmoid scores in (0,1)."""
    x = _as_cnn_dtw_input(utterance, state.dtype)
    out, _ = forward(spec, state, x, mode="eval")
    return ScoreVector(np.clip(out[0].astype(np.float64), 0.0, 1.0), utterance_id)


def detect(score_vector, threshold, utterance_id=None):
    """Keywords whose score reaches the threshold, best first; ties broken
    by keyword index."""
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError(f"threshold must be in [0, 1], got {threshold}")
    uid = utterance_id if utterance_id is not None else score_vector.utterance_id
    hits = [
        Detection(uid, k, float(s))
        for k, s in enumerate(score_vector.scores)
        if s >= threshold
    ]
    hits.sort(key=lambda d: (-d.score, d.keyword_id))
    return hits
