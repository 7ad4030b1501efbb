"""Stacked autoencoder (AE) and correspondence autoencoder (CAE).

Architecture: 39-dim input, eight 100-unit tanh encoder layers, a 39-unit
tanh feature-extraction (FE) layer, eight tied 100-unit decoder layers (the
transposes of the mirror-image encoder layers), and a linear 39-unit
output. The AE pretrains one layer at a time (each stage reconstructs its
own input for a few epochs) and then fine-tunes the whole stack; the CAE
starts from the AE weights and learns to map a frame from one keyword
template onto the DTW-aligned frame of another template of the same type.
"""

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .dtw import dtw_align
from .errors import ConfigError, DataError, FormatError, ShapeError
from .features import FeatureKind, FeatureSequence
from .nn import (
    Activation,
    Dense,
    NetworkSpec,
    NetworkState,
    SQUARED_ERROR,
    TiedDense,
    build_state,
    default_adadelta,
    forward,
    train,
)

AE_BATCH_SIZE = 2048
AE_EPOCHS_PER_LAYER = 5
AE_FINETUNE_EPOCHS = 5
CAE_EPOCHS = 120


@dataclass
class AutoencoderLayout:
    """The network spec plus the indices needed to slice out the encoder."""

    spec: NetworkSpec
    encoder_dims: tuple  # per-stage output dims, e.g. (100,)*8 + (39,)
    fe_end: int  # layer index one past the FE activation

    @property
    def dim(self):
        return self.spec.input_shape[0]


def build_autoencoder(dim=39, hidden_units=100, n_hidden=8):
    """Symmetric tied-weight stack; returns the layout."""
    layers = []
    dims = []
    for _ in range(n_hidden):
        layers += [Dense(hidden_units), Activation("tanh")]
        dims.append(hidden_units)
    layers += [Dense(dim), Activation("tanh")]  # feature-extraction layer
    dims.append(dim)
    fe_end = len(layers)
    dense_indices = [i for i, ly in enumerate(layers) if isinstance(ly, Dense)]
    for src in reversed(dense_indices[1:]):
        layers += [TiedDense(src), Activation("tanh")]
    layers += [TiedDense(dense_indices[0])]  # linear output
    spec = NetworkSpec((dim,), layers)
    return AutoencoderLayout(spec, tuple(dims), fe_end)


def _collect_frames(features):
    mats = []
    for f in features:
        frames = f.frames if isinstance(f, FeatureSequence) else np.asarray(f)
        mats.append(frames.astype(np.float64))
    if not mats:
        raise ConfigError("no feature sequences given")
    return np.concatenate(mats, axis=0)


def _stage_seed(seed, stage):
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, stage]).generate_state(1)[0])


def pretrain_ae(features, seed, layout=None, epochs_per_layer=AE_EPOCHS_PER_LAYER,
                finetune_epochs=AE_FINETUNE_EPOCHS, batch_size=AE_BATCH_SIZE):
    """Layerwise pretraining followed by whole-network fine-tuning.

    Returns (layout, state, history). Squared-error reconstruction with
    adadelta throughout; deterministic in the seed.
    """
    layout = layout or build_autoencoder()
    data = _collect_frames(features)
    if data.shape[1] != layout.dim:
        raise ShapeError(f"expected D={layout.dim} features, got D={data.shape[1]}")

    state = build_state(layout.spec, seed)
    opt = default_adadelta()
    history = {"stage_final_loss": []}

    encoded = data
    dense_indices = [i for i, ly in enumerate(layout.spec.layers) if isinstance(ly, Dense)]
    for stage, idx in enumerate(dense_indices):
        d_in = encoded.shape[1]
        units = layout.encoder_dims[stage]
        mini = NetworkSpec((d_in,), [Dense(units), Activation("tanh"), TiedDense(0)])
        mini_state = build_state(mini, _stage_seed(seed, stage))
        mini_state, hist = train(
            mini, mini_state, (encoded, encoded), SQUARED_ERROR, opt,
            epochs=epochs_per_layer, batch_size=batch_size,
        )
        history["stage_final_loss"].append(hist["train_loss"][-1])
        state.params[f"{idx}.W"] = mini_state.params["0.W"].copy()
        state.params[f"{idx}.b"] = mini_state.params["0.b"].copy()
        # the mirror decoder layer inherits the stage's reconstruction bias
        decoder_idx = _mirror_tied_index(layout, idx)
        state.params[f"{decoder_idx}.b"] = mini_state.params["2.b"].copy()
        encoded, _ = forward(
            NetworkSpec((d_in,), [Dense(units), Activation("tanh")]), mini_state, encoded
        )

    state, hist = train(
        layout.spec, state, (data, data), SQUARED_ERROR, opt,
        epochs=finetune_epochs, batch_size=batch_size,
    )
    history["stage_final_loss"].append(hist["train_loss"][-1])
    history["finetune"] = hist
    return layout, state, history


def _mirror_tied_index(layout, dense_idx):
    for i, ly in enumerate(layout.spec.layers):
        if isinstance(ly, TiedDense) and ly.source == dense_idx:
            return i
    raise ShapeError(f"no tied layer for dense layer {dense_idx}")


@dataclass
class FramePairs:
    """DTW-aligned frame pairs mined from same-keyword template pairs."""

    x_a: np.ndarray  # (P, D)
    x_b: np.ndarray  # (P, D)
    keyword_id: np.ndarray  # (P,)
    template_a: np.ndarray  # (P,)
    template_b: np.ndarray  # (P,)

    def __len__(self):
        return self.x_a.shape[0]


def mine_pairs(templates):
    """All C(J,2) template pairs per keyword type, DTW-aligned, each aligned
    frame pair emitted in both input-output directions.

    Types with fewer than two templates are skipped with a warning naming
    them. Total pair count is exactly 2 * sum of alignment path lengths.
    """
    by_type = {}
    for t in templates:
        by_type.setdefault(t.keyword_id, []).append(t)
    if not any(len(ts) >= 2 for ts in by_type.values()):
        raise DataError("pair mining needs at least one keyword type with >= 2 templates")

    xs_a, xs_b, kws, tpl_a, tpl_b = [], [], [], [], []
    for kw in sorted(by_type):
        tpls = by_type[kw]
        if len(tpls) < 2:
            warnings.warn(f"keyword type {kw} has {len(tpls)} template(s); skipped in pair mining")
            continue
        for i in range(len(tpls)):
            for j in range(i + 1, len(tpls)):
                a, b = tpls[i], tpls[j]
                path = dtw_align(a.features, b.features).path
                fa = a.features.frames[path[:, 0]].astype(np.float64)
                fb = b.features.frames[path[:, 1]].astype(np.float64)
                xs_a.append(np.concatenate([fa, fb]))
                xs_b.append(np.concatenate([fb, fa]))
                n = 2 * path.shape[0]
                kws.append(np.full(n, kw, dtype=np.int64))
                tpl_a.append(np.full(n, a.template_id, dtype=np.int64))
                tpl_b.append(np.full(n, b.template_id, dtype=np.int64))
    return FramePairs(
        np.concatenate(xs_a),
        np.concatenate(xs_b),
        np.concatenate(kws),
        np.concatenate(tpl_a),
        np.concatenate(tpl_b),
    )


def init_cae_state(ae_state):
    """CAE starts as a copy of the AE parameters (fresh optimiser slots)."""
    return NetworkState(ae_state.copy_params(), ae_state.seed, ae_state.dtype, {})


def train_cae(layout, ae_state, pairs, seed, epochs=CAE_EPOCHS, batch_size=AE_BATCH_SIZE):
    """Fine-tune the pretrained AE to map x_a onto the aligned x_b."""
    if len(pairs) == 0:
        raise DataError("empty frame-pair set")
    state = init_cae_state(ae_state)
    state.seed = int(seed)
    opt = default_adadelta()
    state, history = train(
        layout.spec, state, (pairs.x_a, pairs.x_b), SQUARED_ERROR, opt,
        epochs=epochs, batch_size=batch_size,
    )
    return state, history


def encode(layout, state, features, kind=FeatureKind.AE, batch_size=8192):
    """Frame-by-frame FE-layer activations; T is preserved and D == input D."""
    frames = features.frames if isinstance(features, FeatureSequence) else np.asarray(features)
    if frames.shape[1] != layout.dim:
        raise ShapeError(f"expected D={layout.dim}, got D={frames.shape[1]}")
    encoder = NetworkSpec((layout.dim,), layout.spec.layers[: layout.fe_end])
    outs = []
    for lo in range(0, frames.shape[0], batch_size):
        out, _ = forward(encoder, state, frames[lo : lo + batch_size].astype(np.float64))
        outs.append(out)
    encoded = np.concatenate(outs, axis=0)
    rate = features.frame_rate if isinstance(features, FeatureSequence) else 100.0
    return FeatureSequence(encoded, rate, kind)


_PAIR_MAGIC = b"KWSP"


def write_pair_cache(pairs, path):
    """Pair cache: "KWSP" | count u64 | records (keyword_id u32, D f32, D f32)."""
    d = pairs.x_a.shape[1]
    with open(path, "wb") as f:
        f.write(_PAIR_MAGIC)
        f.write(struct.pack("<QH", len(pairs), d))
        blob = np.empty(len(pairs), dtype=[("kw", "<u4"), ("a", "<f4", (d,)), ("b", "<f4", (d,))])
        blob["kw"] = pairs.keyword_id.astype("<u4")
        blob["a"] = pairs.x_a
        blob["b"] = pairs.x_b
        f.write(blob.tobytes())


def read_pair_cache(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != _PAIR_MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}", offset=0)
    count, d = struct.unpack_from("<QH", blob, 4)
    rec = np.frombuffer(blob, dtype=[("kw", "<u4"), ("a", "<f4", (d,)), ("b", "<f4", (d,))], offset=14)
    if rec.shape[0] < count:
        raise FormatError(f"expected {count} records, found {rec.shape[0]}", offset=len(blob))
    zeros = np.zeros(count, dtype=np.int64)
    return FramePairs(
        rec["a"][:count].astype(np.float64),
        rec["b"][:count].astype(np.float64),
        rec["kw"][:count].astype(np.int64),
        zeros,
        zeros.copy(),
    )
