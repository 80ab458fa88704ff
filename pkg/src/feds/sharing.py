"""k-of-n splitting schemes over GF(2^8).

* ``xor``       (n, n) splitting, every share needed
* ``shamir``    polynomial threshold sharing, evaluation points x = 1..n
* ``ida``       systematic erasure code with a Cauchy parity block
* ``krawczyk``  AES-CTR the data, disperse the ciphertext with IDA, Shamir-share the key
* ``aont-rs``   all-or-nothing package (AES-256-CTR + hash-masked key), dispersed with IDA

Every function takes an explicit randomness source: ``None`` (OS entropy), a
``numpy.random.Generator`` or a ``random.Random``.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    CanaryMismatch,
    DivideByZero,
    DuplicateIndex,
    FormatError,
    InsufficientShares,
    MissingShare,
)
from .se_dwt import aes_ctr

POLY = 0x11B

SCHEMES = ("xor", "shamir", "ida", "krawczyk", "aont-rs")
_TAGS = {name: i + 1 for i, name in enumerate(SCHEMES)}
SHARE_MAGIC = b"FSHR"
_HEADER = struct.Struct(">4sBBBBII")

# fixed plaintext word whose survival proves the package decoded intact
CANARY = b"FEDS-AONT-CANARY"


# -- field arithmetic --------------------------------------------------------------

def _build_tables():
    exp = np.zeros(512, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int64)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        # multiply by the generator 3 = x + 1
        x ^= (x << 1) ^ (POLY if x & 0x80 else 0)
        x &= 0xFF
    exp[255:510] = exp[:255]
    a = np.arange(256)
    mul = exp[(log[:, None] + log[None, :]) % 255].astype(np.uint8)
    mul[0, :] = 0
    mul[:, 0] = 0
    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = exp[(255 - log[a[1:]]) % 255]
    return exp, log, mul, inv


EXP, LOG, MUL, INV = _build_tables()


def gf256_mul(a: int, b: int) -> int:
    return int(MUL[a & 0xFF, b & 0xFF])


def gf256_inv(a: int) -> int:
    if a % 256 == 0:
        raise DivideByZero("0 has no inverse in GF(256)")
    return int(INV[a & 0xFF])


def gf_matmul(m: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """(r, k) field matrix times (k, L) byte rows."""
    out = np.zeros((m.shape[0], rows.shape[1]), dtype=np.uint8)
    for i in range(m.shape[0]):
        acc = out[i]
        for j in range(m.shape[1]):
            if m[i, j]:
                acc ^= MUL[m[i, j]][rows[j]]
    return out


def gf_invert(m: np.ndarray) -> np.ndarray:
    """Gauss-Jordan inverse of a square matrix over GF(256)."""
    n = m.shape[0]
    a = np.concatenate([m.astype(np.uint8), np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r, col]), None)
        assert pivot is not None, "singular matrix"
        a[[col, pivot]] = a[[pivot, col]]
        a[col] = MUL[INV[a[col, col]]][a[col]]
        for r in range(n):
            if r != col and a[r, col]:
                a[r] ^= MUL[a[r, col]][a[col]]
    return a[:, n:]


# -- shares --------------------------------------------------------------------

@dataclass(frozen=True)
class Share:
    scheme: str
    index: int
    k: int
    n: int
    payload: bytes
    aux: bytes = b""

    def __post_init__(self):
        if self.scheme not in _TAGS:
            raise FormatError(f"unknown scheme {self.scheme!r}")
        if not 1 <= self.k <= self.n <= 255:
            raise ValueError(f"need 1 <= k <= n <= 255, got k={self.k} n={self.n}")
        if not 1 <= self.index <= self.n:
            raise ValueError(f"share index {self.index} outside 1..{self.n}")

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(SHARE_MAGIC, _TAGS[self.scheme], self.k, self.n, self.index,
                            len(self.payload), len(self.aux))
        return head + self.payload + self.aux

    @classmethod
    def from_bytes(cls, data: bytes) -> "Share":
        if len(data) < _HEADER.size:
            raise FormatError("share shorter than its header")
        magic, tag, k, n, index, plen, alen = _HEADER.unpack(data[:_HEADER.size])
        if magic != SHARE_MAGIC or tag not in _TAGS.values():
            raise FormatError("not a share file")
        body = data[_HEADER.size:]
        if len(body) != plen + alen:
            raise FormatError(f"share body is {len(body)} bytes, header says {plen + alen}")
        try:
            return cls(SCHEMES[tag - 1], index, k, n, body[:plen], body[plen:])
        except ValueError as exc:
            raise FormatError(str(exc)) from None


def random_bytes(rng, n: int) -> bytes:
    if rng is None:
        return os.urandom(n)
    if hasattr(rng, "bytes"):
        return rng.bytes(n)
    return rng.randbytes(n)


def _check_kn(k, n, kmin=1):
    if not kmin <= k <= n <= 255:
        raise ValueError(f"need {kmin} <= k <= n <= 255, got k={k} n={n}")


def _gather(shares, scheme: str, need: int | None = None) -> list[Share]:
    """Validate a set of shares of one group and return the first ``k``."""
    shares = [s for s in shares if s is not None]
    if not shares:
        raise InsufficientShares("no shares given")
    first = shares[0]
    for s in shares:
        if s.scheme != scheme or (s.k, s.n) != (first.k, first.n):
            raise FormatError("shares come from different schemes or groups")
    seen = set()
    for s in shares:
        if s.index in seen:
            raise DuplicateIndex(f"share index {s.index} given twice")
        seen.add(s.index)
    need = first.k if need is None else need
    if len(shares) < need:
        raise InsufficientShares(f"{len(shares)} shares given, {need} needed")
    return sorted(shares, key=lambda s: s.index)[:need]


# -- xor -------------------------------------------------------------------------

def xor_split(data: bytes, n: int, rng=None) -> list[Share]:
    if n < 2:
        raise ValueError("xor splitting needs n >= 2")
    _check_kn(n, n)
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    pads = [np.frombuffer(random_bytes(rng, len(buf)), dtype=np.uint8) for _ in range(n - 1)]
    last = buf.copy()
    for p in pads:
        last ^= p
    return [Share("xor", i + 1, n, n, p.tobytes()) for i, p in enumerate(pads + [last])]


def xor_combine(shares) -> bytes:
    shares = [s for s in shares if s is not None]
    if not shares:
        raise MissingShare("no shares given")
    n = shares[0].n
    present = {s.index for s in shares}
    missing = sorted(set(range(1, n + 1)) - present)
    if missing:
        raise MissingShare(f"xor splitting needs every share; missing {missing}")
    shares = _gather(shares, "xor", n)
    out = np.zeros(len(shares[0].payload), dtype=np.uint8)
    for s in shares:
        if len(s.payload) != len(out):
            raise FormatError("xor shares differ in length")
        out ^= np.frombuffer(s.payload, dtype=np.uint8)
    return out.tobytes()


# -- shamir ------------------------------------------------------------------------

def _shamir_rows(secret: np.ndarray, k: int, n: int, rng) -> np.ndarray:
    coeffs = np.frombuffer(random_bytes(rng, (k - 1) * len(secret)), dtype=np.uint8).reshape(k - 1, len(secret))
    out = np.empty((n, len(secret)), dtype=np.uint8)
    for x in range(1, n + 1):
        # Horner from the highest coefficient down to the secret
        acc = np.zeros(len(secret), dtype=np.uint8)
        for c in coeffs[::-1]:
            acc = MUL[x][acc] ^ c
        out[x - 1] = MUL[x][acc] ^ secret
    return out


def lagrange_at_zero(xs) -> list[int]:
    """Lagrange basis values at x = 0 for distinct nonzero points."""
    out = []
    for i, xi in enumerate(xs):
        num, den = 1, 1
        for j, xj in enumerate(xs):
            if i != j:
                num = gf256_mul(num, xj)
                den = gf256_mul(den, xi ^ xj)
        out.append(gf256_mul(num, gf256_inv(den)))
    return out


def shamir_split(secret: bytes, k: int, n: int, rng=None) -> list[Share]:
    _check_kn(k, n)
    rows = _shamir_rows(np.frombuffer(bytes(secret), dtype=np.uint8), k, n, rng)
    return [Share("shamir", i + 1, k, n, rows[i].tobytes()) for i in range(n)]


def _shamir_join(pairs: list[tuple[int, bytes]]) -> bytes:
    xs = [x for x, _ in pairs]
    lens = {len(p) for _, p in pairs}
    if len(lens) != 1:
        raise FormatError("shamir shares differ in length")
    out = np.zeros(lens.pop(), dtype=np.uint8)
    for lam, (_, payload) in zip(lagrange_at_zero(xs), pairs):
        out ^= MUL[lam][np.frombuffer(payload, dtype=np.uint8)]
    return out.tobytes()


def shamir_combine(shares) -> bytes:
    shares = _gather(shares, "shamir")
    return _shamir_join([(s.index, s.payload) for s in shares])


# -- information dispersal --------------------------------------------------------

def cauchy_generator(k: int, n: int) -> np.ndarray:
    """n x k systematic generator: identity on top, Cauchy rows below."""
    g = np.zeros((n, k), dtype=np.uint8)
    g[:k] = np.eye(k, dtype=np.uint8)
    for i in range(n - k):
        for j in range(k):
            g[k + i, j] = INV[(k + i) ^ j]
    return g


def _ida_rows(data: bytes, k: int, n: int) -> np.ndarray:
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    m = -(-len(buf) // k)
    pad = m * k - len(buf)
    stripes = np.zeros(m * k, dtype=np.uint8)
    stripes[: len(buf)] = buf
    coded = gf_matmul(cauchy_generator(k, n), stripes.reshape(k, m))
    head = np.full((n, 1), pad, dtype=np.uint8)
    return np.concatenate([head, coded], axis=1)


def ida_encode(data: bytes, k: int, n: int) -> list[Share]:
    _check_kn(k, n)
    rows = _ida_rows(data, k, n)
    return [Share("ida", i + 1, k, n, rows[i].tobytes()) for i in range(n)]


def _ida_join(pairs: list[tuple[int, bytes]], k: int, n: int) -> bytes:
    lens = {len(p) for _, p in pairs}
    if len(lens) != 1 or 0 in lens:
        raise FormatError("ida shares differ in length or are empty")
    rows = np.stack([np.frombuffer(p, dtype=np.uint8) for _, p in pairs])
    pad = int(rows[0, 0])
    if pad >= k or (rows[:, 0] != pad).any():
        raise FormatError("ida shares disagree on the padding count")
    g = cauchy_generator(k, n)[[x - 1 for x, _ in pairs]]
    stripes = gf_matmul(gf_invert(g), rows[:, 1:])
    flat = stripes.reshape(-1)
    return flat[: len(flat) - pad].tobytes()


def ida_decode(shares, k: int | None = None) -> bytes:
    shares = _gather(shares, "ida", k)
    first = shares[0]
    return _ida_join([(s.index, s.payload) for s in shares], first.k, first.n)


# -- krawczyk --------------------------------------------------------------------------

_ZERO_IV = bytes(16)


def krawczyk_split(data: bytes, k: int, n: int, rng=None) -> list[Share]:
    _check_kn(k, n)
    key = random_bytes(rng, 16)
    # the key is fresh for every call, so a fixed counter block is safe
    ct = aes_ctr(key, _ZERO_IV, data)
    rows = _ida_rows(ct, k, n)
    keys = _shamir_rows(np.frombuffer(key, dtype=np.uint8), k, n, rng)
    return [Share("krawczyk", i + 1, k, n, rows[i].tobytes(), keys[i].tobytes()) for i in range(n)]


def krawczyk_combine(shares) -> bytes:
    shares = _gather(shares, "krawczyk")
    first = shares[0]
    key = _shamir_join([(s.index, s.aux) for s in shares])
    if len(key) != 16:
        raise FormatError("krawczyk key shares must be 16 bytes")
    ct = _ida_join([(s.index, s.payload) for s in shares], first.k, first.n)
    return aes_ctr(key, _ZERO_IV, ct)


# -- AONT-RS -----------------------------------------------------------------------------

def aont_package(data: bytes, rng=None) -> bytes:
    key = random_bytes(rng, 32)
    ct = aes_ctr_256(key, bytes(data) + CANARY)
    digest = hashlib.sha256(ct).digest()
    return ct + bytes(a ^ b for a, b in zip(digest, key))


def aont_unpackage(package: bytes) -> bytes:
    if len(package) < len(CANARY) + 32:
        raise CanaryMismatch("package too short to hold the canary and key word")
    ct, last = package[:-32], package[-32:]
    digest = hashlib.sha256(ct).digest()
    key = bytes(a ^ b for a, b in zip(digest, last))
    plain = aes_ctr_256(key, ct)
    if plain[-len(CANARY):] != CANARY:
        raise CanaryMismatch("AONT canary does not verify; package altered")
    return plain[: -len(CANARY)]


def aes_ctr_256(key: bytes, data: bytes) -> bytes:
    # word i of the package uses counter block i (16-byte words)
    return aes_ctr(key, _ZERO_IV, data)


def aont_rs_encode(data: bytes, k: int, n: int, rng=None) -> list[Share]:
    _check_kn(k, n)
    rows = _ida_rows(aont_package(data, rng), k, n)
    return [Share("aont-rs", i + 1, k, n, rows[i].tobytes()) for i in range(n)]


def aont_rs_decode(shares) -> bytes:
    shares = _gather(shares, "aont-rs")
    first = shares[0]
    package = _ida_join([(s.index, s.payload) for s in shares], first.k, first.n)
    return aont_unpackage(package)


# -- dispatch --------------------------------------------------------------------------

def split(scheme: str, data: bytes, k: int, n: int, rng=None) -> list[Share]:
    if scheme == "xor":
        if k != n:
            raise ValueError("xor splitting is an (n, n) scheme; k must equal n")
        return xor_split(data, n, rng)
    if scheme == "shamir":
        return shamir_split(data, k, n, rng)
    if scheme == "ida":
        return ida_encode(data, k, n)
    if scheme == "krawczyk":
        return krawczyk_split(data, k, n, rng)
    if scheme == "aont-rs":
        return aont_rs_encode(data, k, n, rng)
    raise ValueError(f"unknown sharing scheme {scheme!r}")


def combine(scheme: str, shares) -> bytes:
    shares = list(shares)
    if scheme == "xor":
        return xor_combine(shares)
    if scheme == "shamir":
        return shamir_combine(shares)
    if scheme == "ida":
        return ida_decode(shares)
    if scheme == "krawczyk":
        return krawczyk_combine(shares)
    if scheme == "aont-rs":
        return aont_rs_decode(shares)
    raise ValueError(f"unknown sharing scheme {scheme!r}")


def threshold(scheme: str, k: int, n: int) -> int:
    """Number of shares needed to decode."""
    return n if scheme == "xor" else k
