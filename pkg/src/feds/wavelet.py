"""Reversible integer LeGall 5/3 lifting on 8x8 tiles.

Coefficients are kept in the usual Mallat layout of an 8x8 array::

    +-------+-------+---------------+
    | 2LL   | 2HL   |               |
    +-------+-------+     1HL       |
    | 2LH   | 2HH   |               |
    +-------+-------+---------------+
    |               |               |
    |     1LH       |     1HH       |
    |               |               |
    +---------------+---------------+

HL is horizontally high-pass / vertically low-pass, LH the opposite.
Boundaries use whole-sample symmetric extension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, OddLength, RangeViolation, ShapeMismatch
from .model import Block

# Certified magnitude bound of every subband for level-shifted byte input.
BOUNDS = {
    "l2_LL": 338,
    "l2_HL": 468,
    "l2_LH": 468,
    "l2_HH": 648,
    "l1_HL": 383,
    "l1_LH": 384,
    "l1_HH": 511,
}

SLICES = {
    "l2_LL": (slice(0, 2), slice(0, 2)),
    "l2_HL": (slice(0, 2), slice(2, 4)),
    "l2_LH": (slice(2, 4), slice(0, 2)),
    "l2_HH": (slice(2, 4), slice(2, 4)),
    "l1_HL": (slice(0, 4), slice(4, 8)),
    "l1_LH": (slice(4, 8), slice(0, 4)),
    "l1_HH": (slice(4, 8), slice(4, 8)),
}


def _bound_grid() -> np.ndarray:
    grid = np.zeros((8, 8), dtype=np.int64)
    for name, sl in SLICES.items():
        grid[sl] = BOUNDS[name]
    return grid


BOUND_GRID = _bound_grid()


def _lift_fwd(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    even = x[..., 0::2]
    odd = x[..., 1::2]
    even_next = np.concatenate([even[..., 1:], even[..., -1:]], axis=-1)
    high = odd - ((even + even_next) >> 1)
    high_prev = np.concatenate([high[..., :1], high[..., :-1]], axis=-1)
    low = even + ((high_prev + high + 2) >> 2)
    return low, high


def _lift_inv(low: np.ndarray, high: np.ndarray) -> np.ndarray:
    high_prev = np.concatenate([high[..., :1], high[..., :-1]], axis=-1)
    even = low - ((high_prev + high + 2) >> 2)
    even_next = np.concatenate([even[..., 1:], even[..., -1:]], axis=-1)
    odd = high + ((even + even_next) >> 1)
    out = np.empty(low.shape[:-1] + (2 * low.shape[-1],), dtype=np.int64)
    out[..., 0::2] = even
    out[..., 1::2] = odd
    return out


def fwd53_1d(signal) -> tuple[list[int], list[int]]:
    x = np.asarray(signal, dtype=np.int64)
    if x.ndim != 1 or len(x) < 2:
        raise OddLength("signal must be 1-D with at least two samples")
    if len(x) % 2:
        raise OddLength(f"signal length {len(x)} is odd")
    low, high = _lift_fwd(x)
    return low.tolist(), high.tolist()


def inv53_1d(low, high) -> list[int]:
    lo = np.asarray(low, dtype=np.int64)
    hi = np.asarray(high, dtype=np.int64)
    if lo.shape != hi.shape or lo.ndim != 1 or len(lo) == 0:
        raise LengthMismatch("low and high must be equal-length 1-D sequences")
    return _lift_inv(lo, hi).tolist()


def _fwd_2d(a: np.ndarray) -> np.ndarray:
    """One separable level on the trailing two axes (rows first, then columns)."""
    lo, hi = _lift_fwd(a)
    a = np.concatenate([lo, hi], axis=-1)
    t = np.swapaxes(a, -1, -2)
    lo, hi = _lift_fwd(t)
    return np.swapaxes(np.concatenate([lo, hi], axis=-1), -1, -2)


def _inv_2d(c: np.ndarray) -> np.ndarray:
    h = c.shape[-1] // 2
    t = np.swapaxes(c, -1, -2)
    t = _lift_inv(t[..., :h], t[..., h:])
    a = np.swapaxes(t, -1, -2)
    return _lift_inv(a[..., :h], a[..., h:])


def fwd53_blocks(pixels: np.ndarray) -> np.ndarray:
    """Two-level transform of a stack of level-shifted (..., 8, 8) tiles."""
    c = _fwd_2d(np.asarray(pixels, dtype=np.int64))
    c[..., :4, :4] = _fwd_2d(c[..., :4, :4])
    return c


def inv53_blocks(coeffs: np.ndarray) -> np.ndarray:
    c = np.array(coeffs, dtype=np.int64)
    c[..., :4, :4] = _inv_2d(c[..., :4, :4])
    return _inv_2d(c)


def range_violations(coeffs: np.ndarray) -> np.ndarray:
    """Boolean mask of coefficients outside their subband bound."""
    return np.abs(coeffs) > BOUND_GRID


@dataclass(frozen=True)
class SubbandSet:
    l1_HL: np.ndarray
    l1_LH: np.ndarray
    l1_HH: np.ndarray
    l2_LL: np.ndarray
    l2_HL: np.ndarray
    l2_LH: np.ndarray
    l2_HH: np.ndarray

    @classmethod
    def from_array(cls, c: np.ndarray) -> "SubbandSet":
        return cls(**{name: np.array(c[sl]) for name, sl in SLICES.items()})

    def to_array(self) -> np.ndarray:
        c = np.zeros((8, 8), dtype=np.int64)
        for name, sl in SLICES.items():
            band = np.asarray(getattr(self, name))
            if band.shape != c[sl].shape:
                raise ShapeMismatch(f"{name} must be {c[sl].shape}, got {band.shape}")
            c[sl] = band
        return c


def fwd53_block(block: Block) -> SubbandSet:
    """Forward transform of a pixel-domain block; checks the subband bounds."""
    px = np.asarray(block.coeffs if isinstance(block, Block) else block, dtype=np.int64)
    if px.shape != (8, 8):
        raise ShapeMismatch("block must be 8x8")
    if px.min() < -128 or px.max() > 127:
        raise RangeViolation(int(px.flat[np.abs(px).argmax()]), "[-128, 127]", "pixel domain")
    c = fwd53_blocks(px)
    bad = range_violations(c)
    if bad.any():
        r, col = np.argwhere(bad)[0]
        raise RangeViolation(int(c[r, col]), f"+-{BOUND_GRID[r, col]}", f"coefficient ({r},{col})")
    return SubbandSet.from_array(c)


def inv53_block(subbands: SubbandSet, origin=(0, 0)) -> Block:
    return Block(inv53_blocks(subbands.to_array()), origin)
