"""Versioned binary checkpoints.

Layout (all integers little-endian uint32, all reals little-endian float64)::

    magic  b"SPKLTHCK"
    version
    payload length, CRC32 of payload
    payload:
        n_layers, widths[n_layers + 1]
        per layer: beta, u_th, v_reset, weights, mask bitset,
                   has_norm [gamma, sigma_b, mu_b, shift, eps_bn]
        has_scores [scores per layer]
        rng digest (32 bytes)

Masks are packed eight entries per byte (little bit order). Saving the
same checkpoint twice yields identical bytes.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .core import BatchNorm, LifParams, MaskedDenseLayer, SpikingNetwork

MAGIC = b"SPKLTHCK"
FORMAT_VERSION = 1
DIGEST_BYTES = 32


class CheckpointError(ValueError):
    """Malformed or truncated checkpoint file."""


class CheckpointVersionError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    net: SpikingNetwork
    scores: list | None = None
    rng_digest: bytes = bytes(DIGEST_BYTES)

    def __post_init__(self):
        if len(self.rng_digest) != DIGEST_BYTES:
            raise CheckpointError(f"rng digest must be {DIGEST_BYTES} bytes")

    def equals(self, other: "Checkpoint") -> bool:
        """Field-for-field equality (bitwise on arrays)."""
        return to_bytes(self) == to_bytes(other)


def rng_digest(seed) -> bytes:
    """Digest identifying the seed material a run started from."""
    return hashlib.sha256(repr(seed).encode()).digest()


def _f64(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def to_bytes(ck: Checkpoint) -> bytes:
    net = ck.net
    out = [struct.pack("<I", net.depth), struct.pack(f"<{net.depth + 1}I", *net.widths)]
    for layer, prm in zip(net.layers, net.params):
        out.append(struct.pack("<3d", prm.beta, prm.u_th, prm.v_reset))
        out.append(_f64(layer.weights))
        out.append(np.packbits(layer.mask.ravel(), bitorder="little").tobytes())
        if layer.norm is None:
            out.append(struct.pack("<I", 0))
        else:
            nm = layer.norm
            out += [struct.pack("<I", 1), _f64(nm.gamma), _f64(nm.sigma_b), _f64(nm.mu_b), _f64(nm.shift)]
            out.append(struct.pack("<d", nm.eps_bn))
    if ck.scores is None:
        out.append(struct.pack("<I", 0))
    else:
        out.append(struct.pack("<I", 1))
        for layer, s in zip(net.layers, ck.scores):
            if np.shape(s) != layer.weights.shape:
                raise CheckpointError("scores must match the weight shapes")
            out.append(_f64(s))
    out.append(bytes(ck.rng_digest))
    payload = b"".join(out)
    header = MAGIC + struct.pack("<III", FORMAT_VERSION, len(payload), zlib.crc32(payload))
    return header + payload


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("truncated checkpoint")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self, n: int = 1):
        vals = struct.unpack(f"<{n}I", self.take(4 * n))
        return vals[0] if n == 1 else vals

    def f64(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)


def from_bytes(buf: bytes) -> Checkpoint:
    if len(buf) < len(MAGIC) + 12:
        raise CheckpointError("truncated checkpoint header")
    if buf[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, length, crc = struct.unpack("<III", buf[len(MAGIC) : len(MAGIC) + 12])
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"checkpoint version {version}, expected {FORMAT_VERSION}")
    payload = buf[len(MAGIC) + 12 :]
    if len(payload) != length:
        raise CheckpointError(f"truncated checkpoint: payload {len(payload)} of {length} bytes")
    if zlib.crc32(payload) != crc:
        raise CheckpointError("checkpoint checksum mismatch")
    r = _Reader(payload)
    depth = r.u32()
    if depth < 1:
        raise CheckpointError("checkpoint holds no layers")
    widths = list(r.u32(depth + 1))
    layers, params = [], []
    for n_in, n_out in zip(widths, widths[1:]):
        beta, u_th, v_reset = struct.unpack("<3d", r.take(24))
        params.append(LifParams(beta, u_th, v_reset))
        w = r.f64((n_out, n_in))
        bits = np.frombuffer(r.take((n_out * n_in + 7) // 8), dtype=np.uint8)
        mask = np.unpackbits(bits, count=n_out * n_in, bitorder="little").reshape(n_out, n_in)
        norm = None
        if r.u32():
            g, sb, mb, sh = (r.f64((n_out,)) for _ in range(4))
            (eps_bn,) = struct.unpack("<d", r.take(8))
            norm = BatchNorm(g, sb, mb, sh, eps_bn)
        layers.append(MaskedDenseLayer(w, mask, norm))
    scores = None
    if r.u32():
        scores = [r.f64(layer.weights.shape) for layer in layers]
    digest = r.take(DIGEST_BYTES)
    if r.pos != len(payload):
        raise CheckpointError("trailing bytes in checkpoint")
    return Checkpoint(SpikingNetwork(layers, params), scores, digest)


def save_checkpoint(path, ck: Checkpoint) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(ck))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
