"""End-to-end workflow: protect -> (share) -> place -> disperse, and back."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import se_dct, se_dwt
from .dispersion import (
    PlacementPolicy,
    StorageNode,
    collect,
    disperse,
    make_decoys,
    new_fragment_id,
    plan_placement,
)
from .errors import ConfigError, IntegrityFailure, Unrecoverable
from .imageio import decode_image, encode_bmp
from .model import DEFAULT_SIDE, FragmentMap, FragmentRecord, chunk_stream, unchunk
from .sharing import SCHEMES as SHARE_SCHEMES, Share, combine, random_bytes, split, threshold

PROTECTION_SCHEMES = ("dwt-se", "dct-first", "dct-strong")


@dataclass
class ProtectConfig:
    scheme: str = "dwt-se"
    chunk_side: int = DEFAULT_SIDE
    share: str | None = None
    k: int = 2
    n: int = 3
    decoys: int = 0
    seed: int | None = None
    workers: int = 1
    level2_public: bool = False
    dct_mode: str = "bits11"
    require_trusted: bool = False

    def check(self):
        if self.scheme not in PROTECTION_SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {PROTECTION_SCHEMES}")
        if self.share is not None:
            if self.share not in SHARE_SCHEMES:
                raise ConfigError(f"unknown sharing scheme {self.share!r}")
            if not 1 <= self.k <= self.n <= 255:
                raise ConfigError(f"need 1 <= k <= n <= 255, got k={self.k} n={self.n}")
            if self.share == "xor" and (self.k != self.n or self.n < 2):
                raise ConfigError("xor splitting needs k == n >= 2")
        if self.chunk_side <= 0 or self.chunk_side % 8:
            raise ConfigError(f"chunk side {self.chunk_side} is not a positive multiple of 8")
        if self.decoys < 0:
            raise ConfigError("decoy count must be >= 0")

    def rng(self):
        return None if self.seed is None else np.random.default_rng(self.seed)


def read_key(path) -> bytes:
    try:
        key = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read key file {path}: {exc}") from None
    if len(key) != 16:
        raise ConfigError(f"key file {path} holds {len(key)} bytes; AES-128 needs 16")
    return key


def _share_records(blob: bytes, cfg: ProtectConfig, group: str, order: int, origin: str, rng):
    out = []
    for sh in split(cfg.share, blob, cfg.k, cfg.n, rng):
        rec = FragmentRecord(new_fragment_id(rng), "share", group=group, order=order,
                             share_index=sh.index, origin=origin)
        out.append((rec, sh.to_bytes()))
    return out


def _private_records(blob: bytes, cfg: ProtectConfig, order: int, rng):
    if cfg.share is None:
        return [(FragmentRecord(new_fragment_id(rng), "private", order=order), blob)]
    return _share_records(blob, cfg, f"c{order}-private", order, "private", rng)


def _with_decoys(frags, count, rng):
    if not count or not frags:
        return []
    templates = [b for _, b in frags]
    picked = [templates[0]]

    def sampler(r):
        i = int(np.random.default_rng(r).integers(len(templates))) if r is not None else \
            int.from_bytes(os.urandom(4), "big") % len(templates)
        picked[0] = templates[i]
        return len(picked[0])

    # decoys copy the 16-byte header of a real fragment of the same size
    return make_decoys(count, sampler, rng, header_for=lambda size: picked[0][:16])


def protect_fragments(payload, key: bytes, cfg: ProtectConfig):
    """Protect ``payload`` and return (fragments, map skeleton).

    For dwt-se ``payload`` is any byte string; the dct schemes expect a 2-D
    uint8 image (or the bytes of an image file).
    """
    cfg.check()
    rng = cfg.rng()
    frags = []
    ivs = []
    scheme = {"name": cfg.scheme,
              "share": None if cfg.share is None else {"scheme": cfg.share, "k": cfg.k, "n": cfg.n}}
    if cfg.scheme == "dwt-se":
        data = bytes(payload)
        scheme["level2_public"] = cfg.level2_public
        registry = se_dwt.IvRegistry()
        for chunk in chunk_stream(data, cfg.chunk_side):
            iv = random_bytes(rng, 16)
            priv, pub = se_dwt.protect_chunk(chunk, key, iv, workers=cfg.workers,
                                             level2_public=cfg.level2_public, registry=registry)
            ivs.append(iv)
            frags += _private_records(priv.to_bytes(), cfg, chunk.index, rng)
            frags.append((FragmentRecord(new_fragment_id(rng), "public", order=chunk.index), pub.to_bytes()))
        original_len = len(data)
        side = cfg.chunk_side
    else:
        img = payload if isinstance(payload, np.ndarray) else decode_image(bytes(payload))
        scheme["mode"] = cfg.dct_mode
        iv = random_bytes(rng, 16)
        fn = se_dct.protect_strong if cfg.scheme == "dct-strong" else se_dct.protect_first_level
        store, public = fn(img, key, cfg.dct_mode, iv)
        ivs.append(iv)
        frags += _private_records(store.to_bytes(), cfg, 0, rng)
        frags.append((FragmentRecord(new_fragment_id(rng), "public", order=0), encode_bmp(public.pixels)))
        original_len = img.size
        side = 8
    scheme["decoys"] = cfg.decoys
    frags += _with_decoys(frags, cfg.decoys, rng)
    data_id = random_bytes(rng, 8).hex()
    fmap = FragmentMap(data_id, original_len, side, scheme, ivs, [r for r, _ in frags])
    return frags, fmap


def protect_to_nodes(payload, key: bytes, nodes: list[StorageNode], cfg: ProtectConfig,
                     map_path=None, key_path=None) -> FragmentMap:
    frags, fmap = protect_fragments(payload, key, cfg)
    if key_path is not None:
        fmap.key_descriptor = {"kind": "key-file", "path": str(Path(key_path).resolve())}
    policy = PlacementPolicy(k=cfg.k if cfg.share else None, require_trusted=cfg.require_trusted)
    plan = plan_placement([r for r, _ in frags], nodes, policy)
    fmap = disperse(frags, plan, fmap, map_path)
    fmap.validate()
    return fmap


def _share_threshold(fmap: FragmentMap) -> int | None:
    share = fmap.scheme.get("share")
    if not share:
        return None
    return threshold(share["scheme"], share["k"], share["n"])


def _private_blob(fmap: FragmentMap, recs: list[FragmentRecord], fetched: dict) -> bytes:
    share = fmap.scheme.get("share")
    if not share:
        (rec,) = recs
        return fetched[rec.id]
    shares = [Share.from_bytes(fetched[r.id]) for r in recs if r.id in fetched]
    return combine(share["scheme"], shares)


def restore_from_map(fmap: FragmentMap, key: bytes, workers: int = 1):
    """Collect, decode and invert; bytes for dwt-se, a uint8 image for dct."""
    fmap.validate()
    fetched = collect(fmap, _share_threshold(fmap))
    by_order: dict[int, dict[str, list]] = {}
    for rec in fmap.fragments:
        if rec.role == "decoy":
            continue
        kind = "public" if rec.role == "public" and not rec.sensitive else "private"
        by_order.setdefault(rec.order, {"private": [], "public": []})[kind].append(rec)
    name = fmap.scheme["name"]
    if name == "dwt-se":
        chunks = []
        per = fmap.chunk_side ** 2
        for order in range(len(fmap.iv_per_chunk)):
            parts = by_order.get(order)
            if not parts or len(parts["public"]) != 1:
                raise Unrecoverable(f"chunk {order} lacks its public fragment")
            priv = se_dwt.parse_fragment(_private_blob(fmap, parts["private"], fetched))
            pub = se_dwt.parse_fragment(fetched[parts["public"][0].id])
            if priv.iv != fmap.iv_per_chunk[order] or priv.chunk_index != order:
                raise IntegrityFailure(f"chunk {order}: private fragment does not match the map")
            payload_len = min(per, fmap.original_len - order * per)
            chunks.append(se_dwt.restore_chunk(priv, pub, key, payload_len=payload_len, workers=workers))
        return unchunk(chunks, fmap.original_len)
    parts = by_order.get(0)
    if not parts or len(parts["public"]) != 1:
        raise Unrecoverable("image lacks its public fragment")
    store = se_dct.DctPrivateStore.from_bytes(_private_blob(fmap, parts["private"], fetched))
    if store.iv != fmap.iv_per_chunk[0]:
        raise IntegrityFailure("private store does not match the map")
    pixels = decode_image(fetched[parts["public"][0].id], "public.bmp")
    public = se_dct.PublicImage(pixels.shape[1], pixels.shape[0], pixels)
    fn = se_dct.restore_strong if name == "dct-strong" else se_dct.restore_first_level
    return fn(store, public, key)


# -- plain dispersal of arbitrary files (maps included) -----------------------------------

def disperse_file(data: bytes, nodes: list[StorageNode], share: str, k: int, n: int,
                  decoys: int = 0, seed=None, map_path=None) -> FragmentMap:
    cfg = ProtectConfig(share=share, k=k, n=n, decoys=decoys, seed=seed)
    cfg.check()
    if share is None:
        raise ConfigError("disperse needs a sharing scheme (--share)")
    rng = cfg.rng()
    frags = _share_records(bytes(data), cfg, "g0", 0, None, rng)
    frags += _with_decoys(frags, decoys, rng)
    fmap = FragmentMap(random_bytes(rng, 8).hex(), len(data), 0,
                       {"name": "plain", "share": {"scheme": share, "k": k, "n": n}, "decoys": decoys},
                       [], [r for r, _ in frags])
    plan = plan_placement([r for r, _ in frags], nodes, PlacementPolicy(k=k))
    fmap = disperse(frags, plan, fmap, map_path)
    fmap.validate()
    return fmap


def recover_file(fmap: FragmentMap) -> bytes:
    fmap.validate()
    fetched = collect(fmap, _share_threshold(fmap))
    recs = [r for r in fmap.fragments if r.role != "decoy"]
    data = _private_blob(fmap, recs, fetched)
    if len(data) != fmap.original_len:
        raise IntegrityFailure(f"recovered {len(data)} bytes, map says {fmap.original_len}")
    return data


# -- public views for the analysis battery ------------------------------------------------

def public_view_fn(scheme: str, chunk_side: int | None = None, workers: int = 1, dct_mode: str = "bits11",
                   iv: bytes = bytes(16)):
    """``f(plain_image, key) -> 2-D uint8 public view`` with a fixed iv."""

    def dwt(plain, key):
        img = np.asarray(plain, dtype=np.uint8)
        side = chunk_side or (img.shape[1] if img.shape[0] == img.shape[1] else DEFAULT_SIDE)
        base = int.from_bytes(iv, "big")
        # consecutive ivs keep chunks of one image from sharing a keystream
        l3 = b"".join(se_dwt.protect_chunk(c, key, ((base + c.index) % (1 << 128)).to_bytes(16, "big"),
                                           workers=workers)[1].level3_prot
                      for c in chunk_stream(img.tobytes(), side))
        rows = len(l3) // side
        return np.frombuffer(l3, dtype=np.uint8)[: rows * side].reshape(rows, side)

    def dct(plain, key):
        fn = se_dct.protect_strong if scheme == "dct-strong" else se_dct.protect_first_level
        return fn(plain, key, dct_mode, iv)[1].pixels

    if scheme == "dwt-se":
        return dwt
    if scheme in ("dct-first", "dct-strong"):
        return dct
    raise ConfigError(f"unknown scheme {scheme!r}")
