"""Selective encryption of 8-bit grayscale images in the 8x8 DCT domain.

Six low-frequency coefficients per block (DC and the five lowest ACs) go to a
small private store that is encrypted with AES-128-CTR. What remains of the
block is transformed back and published as an ordinary image. The strong
variant additionally XORs every public block with a SHA-512 pad keyed on the
stored coefficients.

Two storage modes are supported:

``bits11``  DC in 11 unsigned bits, ACs in 11-bit two's complement (66 bits/block)
``bits8``   DC in 11 unsigned bits, ACs saturated to +-127 in 8 bits (51 bits/block)

Each selected slot of the public block keeps whatever the store does not
capture (the rounding residual, plus the saturation excess in bits8 mode),
so restore simply adds the stored values back.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn

from .errors import FormatError, GeometryMismatch, LengthMismatch
from .se_dwt import aes_ctr

SELECTED = ((0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2))
_ROWS = np.array([p[0] for p in SELECTED])
_COLS = np.array([p[1] for p in SELECTED])

MODES = {
    # mode: (dc width, ac width, ac magnitude cap)
    "bits11": (11, 11, 1023),
    "bits8": (11, 8, 127),
}
DC_MAX = 2040

STORE_MAGIC = b"FEDC"


def round_half_away(x):
    """Nearest integer, ties away from zero."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def bits_per_block(mode: str) -> int:
    dc_w, ac_w, _ = MODES[mode]
    return dc_w + 5 * ac_w


def dct8(block) -> np.ndarray:
    """Orthonormal 2-D DCT-II of one 8x8 tile (DC = 8 * mean)."""
    return dctn(np.asarray(block, dtype=np.float64), norm="ortho")


def idct8(coeffs) -> np.ndarray:
    return idctn(np.asarray(coeffs, dtype=np.float64), norm="ortho")


def _check_image(image) -> np.ndarray:
    img = np.asarray(image)
    if img.ndim != 2 or img.shape[0] % 8 or img.shape[1] % 8 or img.size == 0:
        raise GeometryMismatch(f"image shape {img.shape} does not tile into 8x8 blocks")
    if img.dtype != np.uint8:
        if img.min() < 0 or img.max() > 255:
            raise GeometryMismatch("pixel values must lie in 0..255")
        img = img.astype(np.uint8)
    return img


def to_blocks(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    return img.reshape(h // 8, 8, w // 8, 8).swapaxes(1, 2).reshape(-1, 8, 8)


def from_blocks(blocks: np.ndarray, height: int, width: int) -> np.ndarray:
    return blocks.reshape(height // 8, width // 8, 8, 8).swapaxes(1, 2).reshape(height, width)


# -- store packing ------------------------------------------------------------

def _pack_store(values: np.ndarray, mode: str) -> bytes:
    """(N, 6) ints -> concatenated per-block fields, zero padded to a byte."""
    dc_w, ac_w, _ = MODES[mode]
    widths = np.array([dc_w] + [ac_w] * 5)
    u = values.astype(np.int64) & ((1 << widths) - 1)
    fields = []
    for j, w in enumerate(widths):
        shifts = np.arange(w - 1, -1, -1)
        fields.append((u[:, j:j + 1] >> shifts) & 1)
    bits = np.concatenate(fields, axis=1).astype(np.uint8).ravel()
    return np.packbits(bits).tobytes()


def _unpack_store(raw: bytes, n_blocks: int, mode: str) -> np.ndarray:
    dc_w, ac_w, _ = MODES[mode]
    per = bits_per_block(mode)
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[: n_blocks * per]
    bits = bits.reshape(n_blocks, per).astype(np.int64)
    out = np.empty((n_blocks, 6), dtype=np.int64)
    pos = 0
    for j in range(6):
        w = dc_w if j == 0 else ac_w
        u = bits[:, pos:pos + w] @ (1 << np.arange(w - 1, -1, -1))
        out[:, j] = u if j == 0 else np.where(u >= 1 << (w - 1), u - (1 << w), u)
        pos += w
    return out


def _block_records(values: np.ndarray, mode: str) -> list[bytes]:
    """Per-block packed coefficient bytes, used as the strong-pad preimage."""
    per = bits_per_block(mode)
    nbytes = (per + 7) // 8
    raw = _pack_store(values, mode)
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[: len(values) * per].reshape(-1, per)
    padded = np.zeros((len(values), nbytes * 8), dtype=np.uint8)
    padded[:, :per] = bits
    packed = np.packbits(padded, axis=1)
    return [row.tobytes() for row in packed]


@dataclass(frozen=True)
class DctPrivateStore:
    mode: str
    width: int
    height: int
    iv: bytes
    ciphertext: bytes

    @property
    def n_blocks(self) -> int:
        return (self.width // 8) * (self.height // 8)

    def overhead(self) -> float:
        """Encrypted store size relative to the original image."""
        return len(self.ciphertext) / (self.width * self.height)

    def to_bytes(self) -> bytes:
        head = struct.pack(">4sBxHII", STORE_MAGIC, 11 if self.mode == "bits11" else 8, 0,
                           self.width, self.height)
        return head + self.iv + self.ciphertext

    @classmethod
    def from_bytes(cls, data: bytes) -> "DctPrivateStore":
        if len(data) < 32:
            raise FormatError("store shorter than its header")
        magic, m, _, w, h = struct.unpack(">4sBxHII", data[:16])
        if magic != STORE_MAGIC or m not in (8, 11):
            raise FormatError("not a DCT private store")
        mode = "bits11" if m == 11 else "bits8"
        store = cls(mode, w, h, data[16:32], data[32:])
        need = -(-store.n_blocks * bits_per_block(mode) // 8)
        if len(store.ciphertext) != need:
            raise FormatError(f"store body is {len(store.ciphertext)} bytes, expected {need}")
        return store


@dataclass(frozen=True)
class PublicImage:
    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.shape != (self.height, self.width):
            raise GeometryMismatch(f"pixels {px.shape} vs declared {self.height}x{self.width}")
        object.__setattr__(self, "pixels", px)


# -- first level ----------------------------------------------------------------

def _split(img: np.ndarray, mode: str):
    _, _, cap = MODES[mode]
    blocks = to_blocks(img).astype(np.float64)
    c = dctn(blocks, axes=(1, 2), norm="ortho")
    sel = c[:, _ROWS, _COLS]
    stored = round_half_away(sel)
    stored[:, 0] = np.clip(stored[:, 0], 0, DC_MAX)
    stored[:, 1:] = np.clip(stored[:, 1:], -cap, cap)
    c[:, _ROWS, _COLS] = sel - stored
    residual = idctn(c, axes=(1, 2), norm="ortho")
    public = np.clip(round_half_away(residual) + 128, 0, 255).astype(np.uint8)
    return stored.astype(np.int64), public


def _merge(stored: np.ndarray, public_blocks: np.ndarray) -> np.ndarray:
    c = dctn(public_blocks.astype(np.float64) - 128, axes=(1, 2), norm="ortho")
    c[:, _ROWS, _COLS] += stored
    out = idctn(c, axes=(1, 2), norm="ortho")
    return np.clip(round_half_away(out), 0, 255).astype(np.uint8)


def protect_first_level(image, key: bytes, mode: str = "bits11", iv: bytes | None = None):
    """Split an image into an encrypted coefficient store and a public image."""
    if mode not in MODES:
        raise ValueError(f"unknown storage mode {mode!r}")
    img = _check_image(image)
    iv = os.urandom(16) if iv is None else bytes(iv)
    if len(iv) != 16:
        raise LengthMismatch("iv must be 16 bytes")
    stored, public = _split(img, mode)
    h, w = img.shape
    store = DctPrivateStore(mode, w, h, iv, aes_ctr(key, iv, _pack_store(stored, mode)))
    return store, PublicImage(w, h, from_blocks(public, h, w))


def _decrypt_store(store: DctPrivateStore, key: bytes) -> np.ndarray:
    return _unpack_store(aes_ctr(key, store.iv, store.ciphertext), store.n_blocks, store.mode)


def _check_pair(store: DctPrivateStore, public: PublicImage):
    if (store.width, store.height) != (public.width, public.height):
        raise GeometryMismatch(f"store is {store.height}x{store.width}, public image "
                               f"{public.height}x{public.width}")


def restore_first_level(store: DctPrivateStore, public: PublicImage, key: bytes) -> np.ndarray:
    _check_pair(store, public)
    stored = _decrypt_store(store, key)
    out = _merge(stored, to_blocks(public.pixels))
    return from_blocks(out, store.height, store.width)


# -- strong level ---------------------------------------------------------------

def strong_pads(key: bytes, iv: bytes, stored: np.ndarray, mode: str) -> np.ndarray:
    """One 64-byte SHA-512 pad per block, keyed on its stored coefficients."""
    pre = bytes(key) + bytes(iv)
    recs = _block_records(stored, mode)
    pads = np.empty((len(recs), 64), dtype=np.uint8)
    for i, rec in enumerate(recs):
        pads[i] = np.frombuffer(hashlib.sha512(pre + struct.pack(">Q", i) + rec).digest(), dtype=np.uint8)
    return pads.reshape(-1, 8, 8)


def protect_strong(image, key: bytes, mode: str = "bits11", iv: bytes | None = None):
    store, public = protect_first_level(image, key, mode, iv)
    stored = _decrypt_store(store, key)
    blocks = to_blocks(public.pixels) ^ strong_pads(key, store.iv, stored, mode)
    return store, PublicImage(public.width, public.height, from_blocks(blocks, public.height, public.width))


def restore_strong(store: DctPrivateStore, public: PublicImage, key: bytes) -> np.ndarray:
    _check_pair(store, public)
    stored = _decrypt_store(store, key)
    blocks = to_blocks(public.pixels) ^ strong_pads(key, store.iv, stored, store.mode)
    out = _merge(stored, blocks)
    return from_blocks(out, store.height, store.width)
