"""Agnostic selective encryption of byte chunks with the 5/3 wavelet.

Each 8x8 tile of a chunk is transformed twice and its 64 coefficients are
split into three levels:

* level 1 (2LL, 40 bits) is encrypted with AES-128-CTR,
* level 2 (2HL, 2LH, 2HH, 124 bits) is XORed with SHA-256 of the plain level 1,
* level 3 (first-level details, 480 bits) is XORed with SHA-512 of the plain level 2.

Levels 1 and 2 form the private fragment, level 3 the public one.
"""

from __future__ import annotations

import hashlib
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from . import _kernels
from .errors import FormatError, IntegrityFailure, InvalidIv, LikelyWrongKey, RangeViolation
from .model import Chunk, LevelPlanes
from .wavelet import BOUND_GRID

MAGIC = b"FEDW"
WIRE_VERSION = 1
KIND_PRIVATE = 0
KIND_PUBLIC = 1
FLAG_LEVEL2_PUBLIC = 1

L1_BITS = sum(LevelPlanes.LEVEL1_WIDTHS)
L2_BITS = sum(LevelPlanes.LEVEL2_WIDTHS)
L3_BITS = sum(LevelPlanes.LEVEL3_WIDTHS)


def aes_ctr(key: bytes, iv: bytes, data: bytes) -> bytes:
    """AES-CTR with the 16-byte iv as initial counter block (big-endian increment)."""
    enc = Cipher(algorithms.AES(bytes(key)), modes.CTR(bytes(iv))).encryptor()
    return enc.update(bytes(data)) + enc.finalize()


def _check_key_iv(key, iv):
    if len(key) != 16:
        raise ValueError("key must be 16 bytes (AES-128)")
    if len(iv) != 16:
        raise InvalidIv("iv must be 16 bytes")


def _bits_to_bytes(bits, nbytes: int) -> bytes:
    if isinstance(bits, (bytes, bytearray)):
        raw = bytes(bits)
    else:
        raw = np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()
    return raw.ljust(nbytes, b"\0")[:nbytes]


def keystream2(key: bytes, iv: bytes, block_index: int, level1_bits) -> bytes:
    """256-bit keystream protecting level 2, from the plain level-1 bits."""
    pre = bytes(key) + bytes(iv) + struct.pack(">Q", block_index) + _bits_to_bytes(level1_bits, 5)
    return hashlib.sha256(pre).digest()


def keystream3(key: bytes, iv: bytes, block_index: int, level2_bits) -> bytes:
    """512-bit keystream protecting level 3, from the plain level-2 bits."""
    pre = bytes(key) + bytes(iv) + struct.pack(">Q", block_index) + _bits_to_bytes(level2_bits, 16)
    return hashlib.sha512(pre).digest()


def stream_sizes(n_blocks: int) -> tuple[int, int, int]:
    """Byte lengths of the level-1, level-2 and level-3 streams."""
    return (math.ceil(n_blocks * L1_BITS / 8), math.ceil(n_blocks * L2_BITS / 8),
            math.ceil(n_blocks * L3_BITS / 8))


def integrity_tag(level1_ct: bytes, level2_prot: bytes) -> bytes:
    return hashlib.sha256(level1_ct + level2_prot).digest()


@dataclass(frozen=True)
class PrivateFragment:
    chunk_index: int
    side: int
    iv: bytes
    level1_ct: bytes
    level2_prot: bytes | None
    integrity_tag: bytes

    def to_bytes(self) -> bytes:
        flags = FLAG_LEVEL2_PUBLIC if self.level2_prot is None else 0
        head = struct.pack(">4sBBBxII", MAGIC, WIRE_VERSION, KIND_PRIVATE, flags,
                           self.chunk_index, self.side)
        return head + self.iv + self.level1_ct + (self.level2_prot or b"") + self.integrity_tag


@dataclass(frozen=True)
class PublicFragment:
    chunk_index: int
    side: int
    level3_prot: bytes
    level2_prot: bytes | None = None

    def to_bytes(self) -> bytes:
        flags = FLAG_LEVEL2_PUBLIC if self.level2_prot is not None else 0
        head = struct.pack(">4sBBBxII", MAGIC, WIRE_VERSION, KIND_PUBLIC, flags,
                           self.chunk_index, self.side)
        return head + (self.level2_prot or b"") + self.level3_prot

    def view(self) -> np.ndarray:
        """The level-3 stream laid out as rows of ``side`` bytes (whole rows only)."""
        rows = len(self.level3_prot) // self.side
        return np.frombuffer(self.level3_prot, dtype=np.uint8)[: rows * self.side].reshape(rows, self.side)


def parse_fragment(data: bytes) -> PrivateFragment | PublicFragment:
    if len(data) < 16:
        raise FormatError("fragment shorter than its header")
    magic, version, kind, flags, index, side = struct.unpack(">4sBBBxII", data[:16])
    if magic != MAGIC or version != WIRE_VERSION:
        raise FormatError("not a wavelet SE fragment")
    if side <= 0 or side % 8:
        raise FormatError(f"bad side {side}")
    n1, n2, n3 = stream_sizes((side // 8) ** 2)
    body = data[16:]
    l2_public = bool(flags & FLAG_LEVEL2_PUBLIC)
    if kind == KIND_PRIVATE:
        need = 16 + n1 + (0 if l2_public else n2) + 32
        if len(body) != need:
            raise FormatError(f"private fragment body is {len(body)} bytes, expected {need}")
        iv, body = body[:16], body[16:]
        l1, body = body[:n1], body[n1:]
        l2 = None
        if not l2_public:
            l2, body = body[:n2], body[n2:]
        return PrivateFragment(index, side, iv, l1, l2, body)
    if kind == KIND_PUBLIC:
        need = n3 + (n2 if l2_public else 0)
        if len(body) != need:
            raise FormatError(f"public fragment body is {len(body)} bytes, expected {need}")
        l2 = None
        if l2_public:
            l2, body = body[:n2], body[n2:]
        return PublicFragment(index, side, body, l2)
    raise FormatError(f"unknown fragment kind {kind}")


class IvRegistry:
    """Remembers every iv handed to protect_chunk during one protection run."""

    def __init__(self):
        self._seen: set[bytes] = set()

    def claim(self, iv: bytes) -> None:
        iv = bytes(iv)
        if iv in self._seen:
            raise InvalidIv(f"iv {iv.hex()} reused within this run")
        self._seen.add(iv)


def _ranges(n_blocks: int, workers: int) -> list[tuple[int, int]]:
    # split points on even block numbers keep level-2 slices byte aligned
    workers = max(1, min(workers, (n_blocks + 1) // 2 or 1))
    per = -(-n_blocks // workers)
    per += per % 2
    return [(s, min(s + per, n_blocks)) for s in range(0, n_blocks, per)]


def _run(fn, ranges, workers):
    if len(ranges) == 1:
        return [fn(*ranges[0])]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))


def protect_chunk(chunk: Chunk, key: bytes, iv: bytes, *, workers: int = 1,
                  level2_public: bool = False, registry: IvRegistry | None = None,
                  cipher=aes_ctr) -> tuple[PrivateFragment, PublicFragment]:
    _check_key_iv(key, iv)
    if registry is not None:
        registry.claim(iv)
    n_blocks = chunk.n_blocks
    n1, n2, n3 = stream_sizes(n_blocks)
    l1 = np.zeros(n1, dtype=np.uint8)
    l2 = np.zeros(n2, dtype=np.uint8)
    l3 = np.zeros(n3, dtype=np.uint8)
    k = np.frombuffer(bytes(key), dtype=np.uint8)
    v = np.frombuffer(bytes(iv), dtype=np.uint8)
    img = np.ascontiguousarray(chunk.data)

    def work(start, stop):
        viol = np.full(4, -1, dtype=np.int64)
        _kernels.protect_range(img, start, stop, k, v, BOUND_GRID, l1, l2, l3, viol)
        return viol

    for viol in _run(work, _ranges(n_blocks, workers), workers):
        if viol[0] >= 0:
            b, r, c, val = (int(x) for x in viol)
            raise RangeViolation(val, f"+-{BOUND_GRID[r, c]}", f"block {b} coefficient ({r},{c})")
    l1_ct = cipher(key, iv, l1.tobytes())
    l2_prot = l2.tobytes()
    tag = integrity_tag(l1_ct, l2_prot)
    priv = PrivateFragment(chunk.index, chunk.side, bytes(iv), l1_ct,
                           None if level2_public else l2_prot, tag)
    pub = PublicFragment(chunk.index, chunk.side, l3.tobytes(), l2_prot if level2_public else None)
    return priv, pub


def restore_chunk(priv: PrivateFragment, pub: PublicFragment, key: bytes, *,
                  payload_len: int | None = None, workers: int = 1, strict: bool = True,
                  cipher=aes_ctr) -> Chunk:
    """Rebuild the original chunk.

    Raises IntegrityFailure when the private streams were altered and
    LikelyWrongKey when decrypted level-1/2 values fall outside their
    certified ranges (``strict=False`` returns the garbage instead).
    """
    _check_key_iv(key, priv.iv)
    if priv.chunk_index != pub.chunk_index or priv.side != pub.side:
        raise FormatError("private and public fragments belong to different chunks")
    l2_prot = priv.level2_prot if priv.level2_prot is not None else pub.level2_prot
    if l2_prot is None:
        raise FormatError("level-2 stream missing from both fragments")
    if integrity_tag(priv.level1_ct, l2_prot) != priv.integrity_tag:
        raise IntegrityFailure(f"chunk {priv.chunk_index}: private streams fail their tag")
    side = priv.side
    n_blocks = (side // 8) ** 2
    n1, n2, n3 = stream_sizes(n_blocks)
    if len(priv.level1_ct) != n1 or len(l2_prot) != n2 or len(pub.level3_prot) != n3:
        raise FormatError("stream lengths do not match the chunk side")
    l1 = np.frombuffer(cipher(key, priv.iv, priv.level1_ct), dtype=np.uint8)
    l2 = np.frombuffer(l2_prot, dtype=np.uint8)
    l3 = np.frombuffer(pub.level3_prot, dtype=np.uint8)
    k = np.frombuffer(bytes(key), dtype=np.uint8)
    v = np.frombuffer(bytes(priv.iv), dtype=np.uint8)
    img = np.empty((side, side), dtype=np.uint8)

    def work(start, stop):
        counts = np.zeros(2, dtype=np.int64)
        _kernels.restore_range(img, start, stop, k, v, BOUND_GRID, l1, l2, l3, counts)
        return counts

    counts = sum(_run(work, _ranges(n_blocks, workers), workers))
    if strict and counts[0]:
        raise LikelyWrongKey(f"chunk {priv.chunk_index}: {counts[0]} of {n_blocks} blocks decode "
                             "to out-of-range private coefficients")
    if payload_len is None:
        payload_len = side * side
    return Chunk(priv.chunk_index, side, img, payload_len)


def protect_bytes(data: bytes, key: bytes, ivs, side: int, **kw):
    """Chunk ``data`` and protect every chunk; ``ivs`` yields one iv per chunk."""
    from .model import chunk_stream

    registry = kw.pop("registry", None) or IvRegistry()
    out = []
    for chunk, iv in zip(chunk_stream(data, side), ivs):
        out.append(protect_chunk(chunk, key, iv, registry=registry, **kw))
    return out
