"""Model file format (magic "KWSM").

Layout, all little-endian:

  "KWSM" | u16 version | 32-byte spec sha256 | u32 len + canonical spec text
  | u64 seed | u8 runtime dtype (0: float64, 1: float32)
  | parameter section | slot-group section | scalar section

Parameters and optimiser slots are stored as float64 regardless of the
runtime dtype (the float32 fast path casts on load; float32 -> float64 ->
float32 is exact, so round-trips are bit-exact). Each tensor record is
u16 key length | key utf-8 | u8 ndim | u32 dims... | raw float64 data.
Loading verifies the spec hash and refuses mismatches.
"""

import struct

import numpy as np

from ..errors import FormatError
from .network import NetworkState

_MAGIC = b"KWSM"
_VERSION = 1
_DTYPE_CODES = {np.float64: 0, np.float32: 1}
_DTYPE_FROM_CODE = {0: np.float64, 1: np.float32}


def _pack_tensor(key, arr):
    data = np.ascontiguousarray(arr, dtype="<f8")
    head = struct.pack("<H", len(key.encode())) + key.encode()
    head += struct.pack("<B", data.ndim) + struct.pack(f"<{data.ndim}I", *data.shape)
    return head + data.tobytes()


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.blob):
            raise FormatError("truncated model file", offset=self.pos)
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def tensor(self):
        (klen,) = self.unpack("<H")
        key = self.take(klen).decode()
        (ndim,) = self.unpack("<B")
        dims = self.unpack(f"<{ndim}I") if ndim else ()
        n = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(self.take(8 * n), dtype="<f8").reshape(dims).copy()
        return key, arr


def save_state(state, spec, path):
    parts = [
        _MAGIC,
        struct.pack("<H", _VERSION),
        spec.hash(),
    ]
    text = spec.canonical_text().encode()
    parts.append(struct.pack("<I", len(text)))
    parts.append(text)
    parts.append(struct.pack("<Q", int(state.seed) & 0xFFFFFFFFFFFFFFFF))
    parts.append(struct.pack("<B", _DTYPE_CODES[state.dtype]))

    parts.append(struct.pack("<I", len(state.params)))
    for key, arr in state.params.items():
        parts.append(_pack_tensor(key, arr))

    groups = [(name, grp) for name, grp in state.opt_slots.items() if name != "scalars"]
    parts.append(struct.pack("<I", len(groups)))
    for name, grp in groups:
        parts.append(struct.pack("<H", len(name.encode())) + name.encode())
        parts.append(struct.pack("<I", len(grp)))
        for key, arr in grp.items():
            parts.append(_pack_tensor(key, arr))

    scalars = state.opt_slots.get("scalars", {})
    parts.append(struct.pack("<I", len(scalars)))
    for key, value in scalars.items():
        parts.append(struct.pack("<H", len(key.encode())) + key.encode())
        parts.append(struct.pack("<q", int(value)))

    with open(path, "wb") as f:
        f.write(b"".join(parts))


def load_state(path, spec):
    """Load a NetworkState; refuses files whose spec hash differs from `spec`."""
    with open(path, "rb") as f:
        r = _Reader(f.read())
    if r.take(4) != _MAGIC:
        raise FormatError("bad magic, not a model file", offset=0)
    (version,) = r.unpack("<H")
    if version != _VERSION:
        raise FormatError(f"unsupported model version {version}", offset=4)
    stored_hash = r.take(32)
    if stored_hash != spec.hash():
        raise FormatError("spec hash mismatch: model was trained for a different network")
    (tlen,) = r.unpack("<I")
    r.take(tlen)  # canonical text kept for inspection; hash already checked
    (seed,) = r.unpack("<Q")
    (dtype_code,) = r.unpack("<B")
    dtype = _DTYPE_FROM_CODE[dtype_code]

    (n_params,) = r.unpack("<I")
    params = {}
    for _ in range(n_params):
        key, arr = r.tensor()
        params[key] = arr.astype(dtype)

    (n_groups,) = r.unpack("<I")
    slots = {}
    for _ in range(n_groups):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode()
        (n_entries,) = r.unpack("<I")
        grp = {}
        for _ in range(n_entries):
            key, arr = r.tensor()
            grp[key] = arr.astype(dtype)
        slots[name] = grp
    (n_scalars,) = r.unpack("<I")
    if n_scalars:
        scalars = {}
        for _ in range(n_scalars):
            (klen,) = r.unpack("<H")
            key = r.take(klen).decode()
            (value,) = r.unpack("<q")
            scalars[key] = value
        slots["scalars"] = scalars

    return NetworkState(params, int(seed), dtype, slots)
