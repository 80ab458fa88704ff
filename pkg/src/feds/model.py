"""Shared data model: byte-stream chunking, bit packing, fragment records and the map."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    FormatError,
    InvalidSide,
    LengthMismatch,
    MapIntegrityError,
    MissingChunk,
    RangeViolation,
)

DEFAULT_SIDE = 1024
MAP_VERSION = 1

ROLES = ("private", "public", "share", "decoy")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Chunk:
    """A side x side byte matrix carved from an input stream."""

    index: int
    side: int
    data: np.ndarray
    payload_len: int

    def __post_init__(self):
        if self.side <= 0 or self.side % 8:
            raise InvalidSide(f"chunk side {self.side} is not a positive multiple of 8")
        if self.data.shape != (self.side, self.side) or self.data.dtype != np.uint8:
            raise LengthMismatch(f"chunk data must be uint8 {self.side}x{self.side}")
        if not 0 <= self.payload_len <= self.side * self.side:
            raise LengthMismatch(f"payload_len {self.payload_len} outside 0..{self.side ** 2}")
        _frozen(self.data)

    @property
    def n_blocks(self) -> int:
        return (self.side // 8) ** 2

    def payload(self) -> bytes:
        return self.data.reshape(-1)[: self.payload_len].tobytes()


@dataclass(frozen=True)
class Block:
    """An 8x8 grid of signed integers, pixel or coefficient domain."""

    coeffs: np.ndarray
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if np.shape(self.coeffs) != (8, 8):
            raise LengthMismatch("a block is exactly 8x8")
        object.__setattr__(self, "coeffs", _frozen(np.array(self.coeffs, dtype=np.int64)))

    @classmethod
    def from_bytes(cls, data, origin=(0, 0)) -> "Block":
        """Level-shift an 8x8 byte tile into [-128, 127]."""
        return cls(np.asarray(data, dtype=np.int64).reshape(8, 8) - 128, origin)

    def to_bytes(self) -> np.ndarray:
        return np.clip(self.coeffs + 128, 0, 255).astype(np.uint8)


def chunk_stream(data: bytes, side: int = DEFAULT_SIDE) -> list[Chunk]:
    """Cut ``data`` into zero-padded side x side chunks."""
    if side <= 0 or side % 8:
        raise InvalidSide(f"chunk side {side} is not a positive multiple of 8")
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    per = side * side
    chunks = []
    for i, start in enumerate(range(0, len(buf), per)):
        piece = buf[start:start + per]
        mat = np.zeros(per, dtype=np.uint8)
        mat[: len(piece)] = piece
        chunks.append(Chunk(i, side, mat.reshape(side, side), len(piece)))
    return chunks


def unchunk(chunks: Iterable[Chunk], original_len: int) -> bytes:
    ordered = sorted(chunks, key=lambda c: c.index)
    for expect, c in enumerate(ordered):
        if c.index != expect:
            raise MissingChunk(f"chunk {expect} missing")
    total = sum(c.payload_len for c in ordered)
    if total != original_len:
        raise LengthMismatch(f"chunks carry {total} payload bytes, expected {original_len}")
    return b"".join(c.payload() for c in ordered)


# -- bit packing ------------------------------------------------------------

def pack_bits(values: Sequence[int], widths: Sequence[int]) -> np.ndarray:
    """Pack signed integers as MSB-first two's complement fields.

    Returns a uint8 array of 0/1 of length ``sum(widths)``.
    """
    if len(values) != len(widths):
        raise LengthMismatch("values and widths differ in length")
    out = np.empty(int(sum(widths)), dtype=np.uint8)
    pos = 0
    for v, w in zip(values, widths):
        v = int(v)
        if not -(1 << (w - 1)) <= v < (1 << (w - 1)):
            raise RangeViolation(v, f"{w}-bit field")
        u = v & ((1 << w) - 1)
        for b in range(w):
            out[pos + b] = (u >> (w - 1 - b)) & 1
        pos += w
    return out


def unpack_bits(bits, widths: Sequence[int]) -> list[int]:
    if isinstance(bits, str):
        bits = [int(c) for c in bits]
    bits = np.asarray(bits, dtype=np.uint8)
    if len(bits) != sum(widths):
        raise LengthMismatch(f"{len(bits)} bits given, widths need {sum(widths)}")
    values = []
    pos = 0
    for w in widths:
        u = 0
        for b in bits[pos:pos + w]:
            u = (u << 1) | int(b)
        if u >= 1 << (w - 1):
            u -= 1 << w
        values.append(u)
        pos += w
    return values


def pack_fields(values: np.ndarray, widths: Sequence[int]) -> np.ndarray:
    """Vectorised ``pack_bits`` over rows: (N, F) ints -> (N, sum(widths)) bits."""
    values = np.asarray(values, dtype=np.int64)
    widths = np.asarray(widths, dtype=np.int64)
    lo = -(1 << (widths - 1))
    hi = (1 << (widths - 1)) - 1
    bad = (values < lo) | (values > hi)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise RangeViolation(int(values[r, c]), f"{widths[c]}-bit field")
    wmax = int(widths.max())
    u = values & ((1 << widths) - 1)
    shifts = widths[:, None] - 1 - np.arange(wmax)[None, :]
    bits = (u[..., None] >> np.maximum(shifts, 0)) & 1
    keep = (shifts >= 0).ravel()
    return bits.reshape(len(values), -1)[:, keep].astype(np.uint8)


def unpack_fields(bits: np.ndarray, widths: Sequence[int]) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    widths = list(widths)
    out = np.empty((bits.shape[0], len(widths)), dtype=np.int64)
    pos = 0
    for j, w in enumerate(widths):
        weights = 1 << np.arange(w - 1, -1, -1)
        u = bits[:, pos:pos + w] @ weights
        out[:, j] = np.where(u >= 1 << (w - 1), u - (1 << w), u)
        pos += w
    return out


@dataclass(frozen=True)
class LevelPlanes:
    """Per-block coefficients split by confidentiality level.

    level1 holds the second-level LL band, level2 the other second-level
    bands (HL, LH, HH), level3 the three first-level detail bands.
    """

    level1: tuple[int, ...]
    level2: tuple[int, ...]
    level3: tuple[int, ...]

    LEVEL1_WIDTHS = (10,) * 4
    LEVEL2_WIDTHS = (10,) * 4 + (10,) * 4 + (11,) * 4
    LEVEL3_WIDTHS = (10,) * 48
    # certified magnitude bounds in the same field order
    LEVEL1_BOUNDS = (338,) * 4
    LEVEL2_BOUNDS = (468,) * 4 + (468,) * 4 + (648,) * 4
    LEVEL3_BOUNDS = (383,) * 16 + (384,) * 16 + (511,) * 16

    def __post_init__(self):
        for name in ("level1", "level2", "level3"):
            vals = tuple(int(v) for v in getattr(self, name))
            bounds = getattr(self, name.upper() + "_BOUNDS")
            if len(vals) != len(bounds):
                raise LengthMismatch(f"{name} needs {len(bounds)} values")
            for v, b in zip(vals, bounds):
                if abs(v) > b:
                    raise RangeViolation(v, f"+-{b}", name)
            object.__setattr__(self, name, vals)

    def pack(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            pack_bits(self.level1, self.LEVEL1_WIDTHS),
            pack_bits(self.level2, self.LEVEL2_WIDTHS),
            pack_bits(self.level3, self.LEVEL3_WIDTHS),
        )

    @classmethod
    def unpack(cls, b1, b2, b3) -> "LevelPlanes":
        return cls(
            tuple(unpack_bits(b1, cls.LEVEL1_WIDTHS)),
            tuple(unpack_bits(b2, cls.LEVEL2_WIDTHS)),
            tuple(unpack_bits(b3, cls.LEVEL3_WIDTHS)),
        )


BITS_PER_BLOCK = sum(LevelPlanes.LEVEL1_WIDTHS) + sum(LevelPlanes.LEVEL2_WIDTHS) + sum(LevelPlanes.LEVEL3_WIDTHS)


# -- fragments and map ------------------------------------------------------

@dataclass
class FragmentRecord:
    id: str
    role: str
    node_uri: str = ""
    filename: str = ""
    size: int = 0
    digest: str = ""
    group: str | None = None
    order: int = 0
    share_index: int | None = None
    # role of the fragment a share was cut from; drives trusted placement
    origin: str | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise FormatError(f"unknown fragment role {self.role!r}")

    @property
    def sensitive(self) -> bool:
        return self.role == "private" or self.origin == "private"


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class FragmentMap:
    """Everything needed to find, order and decode the fragments of one input.

    The symmetric key is never stored; ``key_descriptor`` only says where it lives.
    """

    data_id: str
    original_len: int
    chunk_side: int
    scheme: dict
    iv_per_chunk: list[bytes] = field(default_factory=list)
    fragments: list[FragmentRecord] = field(default_factory=list)
    key_descriptor: dict = field(default_factory=dict)
    version: int = MAP_VERSION

    def groups(self) -> dict[str, list[FragmentRecord]]:
        out: dict[str, list[FragmentRecord]] = {}
        for rec in self.fragments:
            if rec.role != "decoy" and rec.group is not None:
                out.setdefault(rec.group, []).append(rec)
        return out

    def validate(self) -> None:
        for g, recs in self.groups().items():
            idx = [r.share_index for r in recs]
            if None in idx or len(set(idx)) != len(idx):
                raise FormatError(f"group {g} has missing or repeated share indices")
            n = (self.scheme.get("share") or {}).get("n")
            if n is not None and not all(1 <= i <= n for i in idx):
                raise FormatError(f"group {g} share index outside 1..{n}")
        orders = {r.order for r in self.fragments if r.role != "decoy"}
        n_chunks = len(self.iv_per_chunk)
        if n_chunks and orders != set(range(n_chunks)):
            raise FormatError("reassembly order does not cover every chunk exactly once")
        if "key" in self.key_descriptor:
            raise FormatError("key bytes must not be stored in the map")

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "data_id": self.data_id,
            "original_len": self.original_len,
            "chunk_side": self.chunk_side,
            "scheme": self.scheme,
            "iv_per_chunk": [iv.hex() for iv in self.iv_per_chunk],
            "fragments": [asdict(r) for r in self.fragments],
            "key_descriptor": self.key_descriptor,
        }

    def to_json(self) -> str:
        body = self.to_dict()
        body["checksum"] = sha256_hex(canonical_json(body).encode())
        return canonical_json(body) + "\n"

    @classmethod
    def from_json(cls, text: str | bytes) -> "FragmentMap":
        try:
            body = json.loads(text)
            checksum = body.pop("checksum")
        except (ValueError, KeyError, AttributeError, TypeError) as exc:
            raise MapIntegrityError(f"unreadable map: {exc}") from None
        if sha256_hex(canonical_json(body).encode()) != checksum:
            raise MapIntegrityError("map checksum mismatch")
        if body.get("version") != MAP_VERSION:
            raise FormatError(f"unsupported map version {body.get('version')}")
        return cls(
            data_id=body["data_id"],
            original_len=body["original_len"],
            chunk_side=body["chunk_side"],
            scheme=body["scheme"],
            iv_per_chunk=[bytes.fromhex(h) for h in body["iv_per_chunk"]],
            fragments=[FragmentRecord(**r) for r in body["fragments"]],
            key_descriptor=body["key_descriptor"],
            version=body["version"],
        )

    def fragment_filename(self, fragment_id: str) -> str:
        return f"{self.data_id}_{fragment_id}.frag"
