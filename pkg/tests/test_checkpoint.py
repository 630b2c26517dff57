import struct
import zlib

import pytest
from hypothesis import given, settings, strategies as st

from warpspace import checkpoint as ckpt
from warpspace.evaluation import random_baseline
from warpspace.network import init, linear_directions_mode
from warpspace.nn import Reconstructor


def sample_state(seed=0, K=3, N=4, d=5):
    return init(K, N, d, seed=seed), Reconstructor(K, seed=seed)


def test_round_trip_is_bit_exact():
    net, recon = sample_state()
    meta = {"kind": "nonlinear", "config": {"dim": 5}}
    blob = ckpt.to_bytes(net, recon, meta)
    state = ckpt.from_bytes(blob)
    assert ckpt.to_bytes(state.net, state.recon, state.metadata) == blob
    for p, q in zip(net.parameters() + recon.parameters(),
                    state.net.parameters() + state.recon.parameters()):
        assert p.data.tobytes() == q.data.tobytes()
    assert state.metadata == meta


@settings(max_examples=15)
@given(seed=st.integers(0, 1000), K=st.integers(2, 4), half=st.integers(1, 3), d=st.integers(1, 6))
def test_round_trip_property(seed, K, half, d):
    net, recon = sample_state(seed, K, 2 * half, d)
    blob = ckpt.to_bytes(net, recon)
    assert ckpt.to_bytes(*_pair(ckpt.from_bytes(blob))) == blob


def _pair(state):
    return state.net, state.recon, state.metadata


def test_frozen_flags_survive():
    net = linear_directions_mode(3, 6, seed=2)
    state = ckpt.from_bytes(ckpt.to_bytes(net, Reconstructor(3)))
    assert state.net.trainable_parameters() == [state.net.supports]
    frozen = random_baseline(3, 6, seed=1)
    assert ckpt.from_bytes(ckpt.to_bytes(frozen, Reconstructor(3))).net.trainable_parameters() == []


def test_header_layout():
    net, recon = sample_state()
    blob = ckpt.to_bytes(net, recon)
    assert blob[:16] == b"WARPSPACE-CKPT\x00\x00"
    version, K, N, d, flags = struct.unpack_from("<B3qB", blob, 16)
    assert (version, K, N, d, flags) == (1, 3, 4, 5, ckpt.FLAG_BIPOLAR)
    assert struct.unpack("<I", blob[-4:])[0] == zlib.crc32(blob[:-4])


@pytest.mark.parametrize("offset", [20, 200, -10])
def test_bit_flip_detected(offset):
    blob = bytearray(ckpt.to_bytes(*sample_state()))
    blob[offset] ^= 0x01
    with pytest.raises(ckpt.ChecksumMismatch):
        ckpt.from_bytes(bytes(blob))


def test_bad_magic_and_truncation():
    blob = ckpt.to_bytes(*sample_state())
    with pytest.raises(ckpt.CheckpointError):
        ckpt.from_bytes(b"NOTACKPT" + blob[8:])
    with pytest.raises(ckpt.CheckpointError):
        ckpt.from_bytes(blob[:40])


def test_untied_bipolar_rejected():
    net, recon = sample_state()
    blob = bytearray(ckpt.to_bytes(net, recon))
    # first stored weight sits right after the header and S
    at = 16 + struct.calcsize("<B3qB") + 8 * net.supports.data.size
    blob[at : at + 8] = struct.pack("<d", 0.123)
    body = bytes(blob[:-4])
    with pytest.raises(ckpt.CheckpointError, match="tied"):
        ckpt.from_bytes(body + struct.pack("<I", zlib.crc32(body)))


def test_save_and_load(tmp_path):
    net, recon = sample_state()
    path = ckpt.save(tmp_path / "c.bin", net, recon, {"a": 1})
    assert ckpt.load(path).metadata == {"a": 1}
