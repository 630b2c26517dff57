"""Binary checkpoint container for a warping network plus reconstructor.

Layout (little-endian)::

    16 B   magic  b"WARPSPACE-CKPT\\0\\0"
     1 B   version
    3x8 B  K, N, d                           (int64)
     1 B   flags: 1 bipolar, 2 frozen scales, 4 frozen weights, 8 frozen supports
           S (K*N*d), A (K*N), log G (K*N)   (float64, row-major, mirrored form)
     4 B   reconstructor tensor count        (uint32)
           per tensor: uint32 name length, name, uint32 ndim, ndim x uint64 dims, float64 data
     4 B   metadata length, then UTF-8 JSON
     4 B   CRC-32 of every preceding byte
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import WarpingNetwork
from .nn import Reconstructor

MAGIC = b"WARPSPACE-CKPT\x00\x00"
VERSION = 1

FLAG_BIPOLAR = 1
FLAG_FROZEN_SCALES = 2
FLAG_FROZEN_WEIGHTS = 4
FLAG_FROZEN_SUPPORTS = 8


class CheckpointError(ValueError):
    pass


class ChecksumMismatch(CheckpointError):
    pass


@dataclass
class Checkpoint:
    net: WarpingNetwork
    recon: Reconstructor
    metadata: dict = field(default_factory=dict)


def _f64(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def to_bytes(net: WarpingNetwork, recon: Reconstructor, metadata: dict | None = None) -> bytes:
    K, N, d = net.supports.shape
    flags = (
        FLAG_BIPOLAR * net.bipolar
        | FLAG_FROZEN_SCALES * net.freeze_scales
        | FLAG_FROZEN_WEIGHTS * net.freeze_weights
        | FLAG_FROZEN_SUPPORTS * net.freeze_supports
    )
    out = bytearray(MAGIC)
    out += struct.pack("<B3qB", VERSION, K, N, d, flags)
    out += _f64(net.support_tensor) + _f64(net.weight_matrix) + _f64(net.log_scale_matrix)
    arrays = recon.state_arrays()
    out += struct.pack("<I", len(arrays))
    for name, arr in arrays:
        encoded = name.encode("utf-8")
        out += struct.pack("<I", len(encoded)) + encoded
        out += struct.pack(f"<I{arr.ndim}Q", arr.ndim, *arr.shape)
        out += _f64(arr)
    meta = json.dumps(metadata or {}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out += struct.pack("<I", len(meta)) + meta
    out += struct.pack("<I", zlib.crc32(out))
    return bytes(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("checkpoint truncated")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, shape) -> np.ndarray:
        count = int(np.prod(shape, dtype=np.int64))
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)


def from_bytes(buf: bytes) -> Checkpoint:
    if len(buf) < len(MAGIC) + 4 or buf[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a warpspace checkpoint (bad magic)")
    body, (stored,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(body) != stored:
        raise ChecksumMismatch(f"checksum mismatch: stored {stored:#010x}, computed {zlib.crc32(body):#010x}")
    r = _Reader(body)
    r.take(len(MAGIC))
    version, K, N, d, flags = r.unpack("<B3qB")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    supports = r.floats((K, N, d))
    weights = r.floats((K, N))
    log_scales = r.floats((K, N))
    bipolar = bool(flags & FLAG_BIPOLAR)
    if bipolar:
        if N % 2 or np.any(weights[:, 1::2] != -weights[:, 0::2]) or np.any(
            log_scales[:, 1::2] != log_scales[:, 0::2]
        ):
            raise CheckpointError("bipolar flag set but tensors are not pairwise tied")
        weights, log_scales = weights[:, 0::2], log_scales[:, 0::2]
    net = WarpingNetwork(
        supports, weights, log_scales, bipolar=bipolar,
        freeze_supports=bool(flags & FLAG_FROZEN_SUPPORTS),
        freeze_weights=bool(flags & FLAG_FROZEN_WEIGHTS),
        freeze_scales=bool(flags & FLAG_FROZEN_SCALES),
    )
    (count,) = r.unpack("<I")
    arrays = []
    for _ in range(count):
        (name_len,) = r.unpack("<I")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("<I")
        shape = r.unpack(f"<{ndim}Q")
        arrays.append((name, r.floats(shape)))
    named = dict(arrays)
    if "conv0.weight" not in named or "cls.bias" not in named:
        raise CheckpointError("reconstructor tensors missing")
    recon = Reconstructor(len(named["cls.bias"]), in_channels=named["conv0.weight"].shape[1])
    try:
        recon.load_arrays(arrays)
    except ValueError as err:
        raise CheckpointError(str(err)) from None
    (meta_len,) = r.unpack("<I")
    metadata = json.loads(r.take(meta_len).decode("utf-8"))
    if r.pos != len(body):
        raise CheckpointError("trailing bytes after metadata")
    return Checkpoint(net, recon, metadata)


def save(path, net: WarpingNetwork, recon: Reconstructor, metadata: dict | None = None) -> Path:
    path = Path(path)
    path.write_bytes(to_bytes(net, recon, metadata))
    return path


def load(path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes())
