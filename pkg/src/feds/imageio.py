"""Reading and writing 8-bit grayscale images (BMP via Pillow, or square raw dumps)."""

from __future__ import annotations

import io
import math
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import FormatError


def decode_image(raw: bytes, name: str = "") -> np.ndarray:
    if name.endswith(".raw"):
        side = math.isqrt(len(raw))
        if side * side != len(raw) or side == 0:
            raise FormatError(f"raw image of {len(raw)} bytes is not a square matrix")
        return np.frombuffer(raw, dtype=np.uint8).reshape(side, side).copy()
    try:
        im = Image.open(io.BytesIO(raw))
        im.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise FormatError(f"cannot read image {name}: {exc}") from None
    if im.mode == "P":
        pal = np.array(im.getpalette()[:768]).reshape(-1, 3)
        if not (pal[:, 0] == pal[:, 1]).all() or not (pal[:, 1] == pal[:, 2]).all():
            raise FormatError(f"{name} has a colour palette; expected 8-bit grayscale")
        im = im.convert("L")
    if im.mode != "L":
        raise FormatError(f"{name} is mode {im.mode}; expected 8-bit grayscale")
    return np.asarray(im, dtype=np.uint8).copy()


def read_image(path) -> np.ndarray:
    path = Path(path)
    return decode_image(path.read_bytes(), path.name)


def encode_bmp(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="L").save(buf, format="BMP")
    return buf.getvalue()


def write_image(path, pixels: np.ndarray) -> None:
    path = Path(path)
    if path.suffix == ".raw":
        path.write_bytes(np.asarray(pixels, dtype=np.uint8).tobytes())
    else:
        path.write_bytes(encode_bmp(pixels))
