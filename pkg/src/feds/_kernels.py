"""Compiled per-block kernels for the wavelet selective-encryption hot path.

The hash routines handle single-compression messages only (SHA-256 up to 55
bytes, SHA-512 up to 111 bytes), which covers the fixed-size keystream
preimages. They are checked against hashlib in the test suite.
"""

import numpy as np
from numba import njit

_K256 = np.array([
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
], dtype=np.int64)

_H256 = np.array([
    0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
], dtype=np.int64)

_K512 = np.array([
    0x428a2f98d728ae22, 0x7137449123ef65cd, 0xb5c0fbcfec4d3b2f, 0xe9b5dba58189dbbc, 0x3956c25bf348b538,
    0x59f111f1b605d019, 0x923f82a4af194f9b, 0xab1c5ed5da6d8118, 0xd807aa98a3030242, 0x12835b0145706fbe,
    0x243185be4ee4b28c, 0x550c7dc3d5ffb4e2, 0x72be5d74f27b896f, 0x80deb1fe3b1696b1, 0x9bdc06a725c71235,
    0xc19bf174cf692694, 0xe49b69c19ef14ad2, 0xefbe4786384f25e3, 0x0fc19dc68b8cd5b5, 0x240ca1cc77ac9c65,
    0x2de92c6f592b0275, 0x4a7484aa6ea6e483, 0x5cb0a9dcbd41fbd4, 0x76f988da831153b5, 0x983e5152ee66dfab,
    0xa831c66d2db43210, 0xb00327c898fb213f, 0xbf597fc7beef0ee4, 0xc6e00bf33da88fc2, 0xd5a79147930aa725,
    0x06ca6351e003826f, 0x142929670a0e6e70, 0x27b70a8546d22ffc, 0x2e1b21385c26c926, 0x4d2c6dfc5ac42aed,
    0x53380d139d95b3df, 0x650a73548baf63de, 0x766a0abb3c77b2a8, 0x81c2c92e47edaee6, 0x92722c851482353b,
    0xa2bfe8a14cf10364, 0xa81a664bbc423001, 0xc24b8b70d0f89791, 0xc76c51a30654be30, 0xd192e819d6ef5218,
    0xd69906245565a910, 0xf40e35855771202a, 0x106aa07032bbd1b8, 0x19a4c116b8d2d0c8, 0x1e376c085141ab53,
    0x2748774cdf8eeb99, 0x34b0bcb5e19b48a8, 0x391c0cb3c5c95a63, 0x4ed8aa4ae3418acb, 0x5b9cca4f7763e373,
    0x682e6ff3d6b2b8a3, 0x748f82ee5defb2fc, 0x78a5636f43172f60, 0x84c87814a1f0ab72, 0x8cc702081a6439ec,
    0x90befffa23631e28, 0xa4506cebde82bde9, 0xbef9a3f7b2c67915, 0xc67178f2e372532b, 0xca273eceea26619c,
    0xd186b8c721c0c207, 0xeada7dd6cde0eb1e, 0xf57d4f7fee6ed178, 0x06f067aa72176fba, 0x0a637dc5a2c898a6,
    0x113f9804bef90dae, 0x1b710b35131c471b, 0x28db77f523047d84, 0x32caab7b40c72493, 0x3c9ebe0a15c9bebc,
    0x431d67c49c100d4c, 0x4cc5d4becb3e42b6, 0x597f299cfc657e2a, 0x5fcb6fab3ad6faec, 0x6c44198c4a475817,
], dtype=np.uint64)

_H512 = np.array([
    0x6a09e667f3bcc908, 0xbb67ae8584caa73b, 0x3c6ef372fe94f82b, 0xa54ff53a5f1d36f1,
    0x510e527fade682d1, 0x9b05688c2b3e6c1f, 0x1f83d9abfb41bd6b, 0x5be0cd19137e2179,
], dtype=np.uint64)

_K256_32 = _K256.astype(np.uint32)
_H256_32 = _H256.astype(np.uint32)


@njit(cache=True, inline="always")
def _rotr32(x, n):
    return np.uint32((x >> np.uint32(n)) | (x << np.uint32(32 - n)))


@njit(cache=True, nogil=True)
def sha256_short(msg, n, out, w):
    """SHA-256 of msg[:n] (n <= 55) into out[:32]; w is uint32[64] scratch."""
    for t in range(16):
        v = np.uint32(0)
        for j in range(4):
            p = 4 * t + j
            if p < n:
                byte = np.uint32(msg[p])
            elif p == n:
                byte = np.uint32(0x80)
            else:
                byte = np.uint32(0)
            v = np.uint32((v << np.uint32(8)) | byte)
        w[t] = v
    w[15] = np.uint32(n * 8)
    for t in range(16, 64):
        x = w[t - 15]
        y = w[t - 2]
        s0 = _rotr32(x, 7) ^ _rotr32(x, 18) ^ (x >> np.uint32(3))
        s1 = _rotr32(y, 17) ^ _rotr32(y, 19) ^ (y >> np.uint32(10))
        w[t] = np.uint32(w[t - 16] + s0 + w[t - 7] + s1)
    a = _H256_32[0]; b = _H256_32[1]; c = _H256_32[2]; d = _H256_32[3]
    e = _H256_32[4]; f = _H256_32[5]; g = _H256_32[6]; h = _H256_32[7]
    for t in range(64):
        S1 = _rotr32(e, 6) ^ _rotr32(e, 11) ^ _rotr32(e, 25)
        ch = (e & f) ^ (~e & g)
        t1 = np.uint32(h + S1 + ch + _K256_32[t] + w[t])
        S0 = _rotr32(a, 2) ^ _rotr32(a, 13) ^ _rotr32(a, 22)
        maj = (a & b) ^ (a & c) ^ (b & c)
        t2 = np.uint32(S0 + maj)
        h = g; g = f; f = e
        e = np.uint32(d + t1)
        d = c; c = b; b = a
        a = np.uint32(t1 + t2)
    hs = (a, b, c, d, e, f, g, h)
    for i in range(8):
        v = np.uint32(hs[i] + _H256_32[i])
        out[4 * i] = np.uint8(v >> np.uint32(24))
        out[4 * i + 1] = np.uint8((v >> np.uint32(16)) & np.uint32(0xFF))
        out[4 * i + 2] = np.uint8((v >> np.uint32(8)) & np.uint32(0xFF))
        out[4 * i + 3] = np.uint8(v & np.uint32(0xFF))


@njit(cache=True, inline="always")
def _rotr64(x, n):
    return (x >> np.uint64(n)) | (x << np.uint64(64 - n))


@njit(cache=True, nogil=True)
def sha512_short(msg, n, out, w):
    """SHA-512 of msg[:n] (n <= 111) into out[:64]; w is uint64[80] scratch."""
    for t in range(16):
        v = np.uint64(0)
        for j in range(8):
            p = 8 * t + j
            if p < n:
                byte = np.uint64(msg[p])
            elif p == n:
                byte = np.uint64(0x80)
            else:
                byte = np.uint64(0)
            v = (v << np.uint64(8)) | byte
        w[t] = v
    w[15] = np.uint64(n * 8)
    for t in range(16, 80):
        x = w[t - 15]
        s0 = _rotr64(x, 1) ^ _rotr64(x, 8) ^ (x >> np.uint64(7))
        y = w[t - 2]
        s1 = _rotr64(y, 19) ^ _rotr64(y, 61) ^ (y >> np.uint64(6))
        w[t] = w[t - 16] + s0 + w[t - 7] + s1
    a = _H512[0]; b = _H512[1]; c = _H512[2]; d = _H512[3]
    e = _H512[4]; f = _H512[5]; g = _H512[6]; h = _H512[7]
    for t in range(80):
        S1 = _rotr64(e, 14) ^ _rotr64(e, 18) ^ _rotr64(e, 41)
        ch = (e & f) ^ ((~e) & g)
        t1 = h + S1 + ch + _K512[t] + w[t]
        S0 = _rotr64(a, 28) ^ _rotr64(a, 34) ^ _rotr64(a, 39)
        maj = (a & b) ^ (a & c) ^ (b & c)
        t2 = S0 + maj
        h = g; g = f; f = e
        e = d + t1
        d = c; c = b; b = a
        a = t1 + t2
    hs = (a, b, c, d, e, f, g, h)
    for i in range(8):
        v = hs[i] + _H512[i]
        for j in range(8):
            out[8 * i + j] = np.uint8((v >> np.uint64(56 - 8 * j)) & np.uint64(0xFF))


# -- lifting on the 8x8 block, in place -------------------------------------

@njit(cache=True, inline="always")
def _fwd_line(c, fixed, n, along_rows, t):
    h = n // 2
    for k in range(n):
        t[k] = c[fixed, k] if along_rows else c[k, fixed]
    for k in range(h):
        nxt = t[2 * k + 2] if 2 * k + 2 < n else t[n - 2]
        t[n + k] = t[2 * k + 1] - ((t[2 * k] + nxt) >> 1)
    for k in range(h):
        prv = t[n + k - 1] if k > 0 else t[n]
        lo = t[2 * k] + ((prv + t[n + k] + 2) >> 2)
        if along_rows:
            c[fixed, k] = lo
            c[fixed, h + k] = t[n + k]
        else:
            c[k, fixed] = lo
            c[h + k, fixed] = t[n + k]


@njit(cache=True, inline="always")
def _inv_line(c, fixed, n, along_rows, t):
    h = n // 2
    for k in range(n):
        t[k] = c[fixed, k] if along_rows else c[k, fixed]
    # t[:h] low, t[h:n] high; even samples into t[n:n+h]
    for k in range(h):
        prv = t[h + k - 1] if k > 0 else t[h]
        t[n + k] = t[k] - ((prv + t[h + k] + 2) >> 2)
    for k in range(h):
        ev = t[n + k]
        nxt = t[n + k + 1] if k + 1 < h else t[n + k]
        od = t[h + k] + ((ev + nxt) >> 1)
        if along_rows:
            c[fixed, 2 * k] = ev
            c[fixed, 2 * k + 1] = od
        else:
            c[2 * k, fixed] = ev
            c[2 * k + 1, fixed] = od


@njit(cache=True, nogil=True)
def fwd_block(c, t):
    for n in (8, 4):
        for r in range(n):
            _fwd_line(c, r, n, True, t)
        for col in range(n):
            _fwd_line(c, col, n, False, t)


@njit(cache=True, nogil=True)
def inv_block(c, t):
    for n in (4, 8):
        for col in range(n):
            _inv_line(c, col, n, False, t)
        for r in range(n):
            _inv_line(c, r, n, True, t)


# -- keystream hashing with a per-chunk constant prefix ---------------------
#
# Both keystream preimages start with key || iv (32 bytes), so the first 8
# SHA-256 rounds and the first 4 SHA-512 rounds are the same for every block
# of a chunk and are computed once.

@njit(cache=True, nogil=True)
def sha256_prefix_state(key, iv, w, state):
    for t in range(8):
        src = key if t < 4 else iv
        o = 4 * (t % 4)
        w[t] = np.uint32((np.uint32(src[o]) << np.uint32(24)) | (np.uint32(src[o + 1]) << np.uint32(16))
                         | (np.uint32(src[o + 2]) << np.uint32(8)) | np.uint32(src[o + 3]))
    a = _H256_32[0]; b = _H256_32[1]; c = _H256_32[2]; d = _H256_32[3]
    e = _H256_32[4]; f = _H256_32[5]; g = _H256_32[6]; h = _H256_32[7]
    for t in range(8):
        S1 = _rotr32(e, 6) ^ _rotr32(e, 11) ^ _rotr32(e, 25)
        ch = (e & f) ^ (~e & g)
        t1 = np.uint32(h + S1 + ch + _K256_32[t] + w[t])
        S0 = _rotr32(a, 2) ^ _rotr32(a, 13) ^ _rotr32(a, 22)
        maj = (a & b) ^ (a & c) ^ (b & c)
        t2 = np.uint32(S0 + maj)
        h = g; g = f; f = e
        e = np.uint32(d + t1)
        d = c; c = b; b = a
        a = np.uint32(t1 + t2)
    state[0] = a; state[1] = b; state[2] = c; state[3] = d
    state[4] = e; state[5] = f; state[6] = g; state[7] = h


@njit(cache=True, inline="always")
def _sha256_finish(state, w, out):
    """Rounds 8..63 given w[0:16] and the state after round 7."""
    for t in range(16, 64):
        x = w[t - 15]
        y = w[t - 2]
        s0 = _rotr32(x, 7) ^ _rotr32(x, 18) ^ (x >> np.uint32(3))
        s1 = _rotr32(y, 17) ^ _rotr32(y, 19) ^ (y >> np.uint32(10))
        w[t] = np.uint32(w[t - 16] + s0 + w[t - 7] + s1)
    a = state[0]; b = state[1]; c = state[2]; d = state[3]
    e = state[4]; f = state[5]; g = state[6]; h = state[7]
    for t in range(8, 64):
        S1 = _rotr32(e, 6) ^ _rotr32(e, 11) ^ _rotr32(e, 25)
        ch = (e & f) ^ (~e & g)
        t1 = np.uint32(h + S1 + ch + _K256_32[t] + w[t])
        S0 = _rotr32(a, 2) ^ _rotr32(a, 13) ^ _rotr32(a, 22)
        maj = (a & b) ^ (a & c) ^ (b & c)
        t2 = np.uint32(S0 + maj)
        h = g; g = f; f = e
        e = np.uint32(d + t1)
        d = c; c = b; b = a
        a = np.uint32(t1 + t2)
    hs = (a, b, c, d, e, f, g, h)
    for i in range(8):
        v = np.uint32(hs[i] + _H256_32[i])
        out[4 * i] = np.uint8(v >> np.uint32(24))
        out[4 * i + 1] = np.uint8((v >> np.uint32(16)) & np.uint32(0xFF))
        out[4 * i + 2] = np.uint8((v >> np.uint32(8)) & np.uint32(0xFF))
        out[4 * i + 3] = np.uint8(v & np.uint32(0xFF))


@njit(cache=True, nogil=True)
def sha512_prefix_state(key, iv, w, state):
    for t in range(4):
        src = key if t < 2 else iv
        o = 8 * (t % 2)
        v = np.uint64(0)
        for j in range(8):
            v = (v << np.uint64(8)) | np.uint64(src[o + j])
        w[t] = v
    a = _H512[0]; b = _H512[1]; c = _H512[2]; d = _H512[3]
    e = _H512[4]; f = _H512[5]; g = _H512[6]; h = _H512[7]
    for t in range(4):
        S1 = _rotr64(e, 14) ^ _rotr64(e, 18) ^ _rotr64(e, 41)
        ch = (e & f) ^ ((~e) & g)
        t1 = h + S1 + ch + _K512[t] + w[t]
        S0 = _rotr64(a, 28) ^ _rotr64(a, 34) ^ _rotr64(a, 39)
        maj = (a & b) ^ (a & c) ^ (b & c)
        t2 = S0 + maj
        h = g; g = f; f = e
        e = d + t1
        d = c; c = b; b = a
        a = t1 + t2
    state[0] = a; state[1] = b; state[2] = c; state[3] = d
    state[4] = e; state[5] = f; state[6] = g; state[7] = h


@njit(cache=True, inline="always")
def _sha512_finish(state, w, out):
    """Rounds 4..79 given w[0:16] and the state after round 3."""
    for t in range(16, 80):
        x = w[t - 15]
        s0 = _rotr64(x, 1) ^ _rotr64(x, 8) ^ (x >> np.uint64(7))
        y = w[t - 2]
        s1 = _rotr64(y, 19) ^ _rotr64(y, 61) ^ (y >> np.uint64(6))
        w[t] = w[t - 16] + s0 + w[t - 7] + s1
    a = state[0]; b = state[1]; c = state[2]; d = state[3]
    e = state[4]; f = state[5]; g = state[6]; h = state[7]
    for t in range(4, 80):
        S1 = _rotr64(e, 14) ^ _rotr64(e, 18) ^ _rotr64(e, 41)
        ch = (e & f) ^ ((~e) & g)
        t1 = h + S1 + ch + _K512[t] + w[t]
        S0 = _rotr64(a, 28) ^ _rotr64(a, 34) ^ _rotr64(a, 39)
        maj = (a & b) ^ (a & c) ^ (b & c)
        t2 = S0 + maj
        h = g; g = f; f = e
        e = d + t1
        d = c; c = b; b = a
        a = t1 + t2
    hs = (a, b, c, d, e, f, g, h)
    for i in range(8):
        v = hs[i] + _H512[i]
        for j in range(8):
            out[8 * i + j] = np.uint8((v >> np.uint64(56 - 8 * j)) & np.uint64(0xFF))


@njit(cache=True, inline="always")
def _ks2_words(w, b, l1):
    # preimage bytes 32..44: block index (8), level-1 bits (5); then padding
    w[8] = np.uint32((b >> 32) & 0xFFFFFFFF)
    w[9] = np.uint32(b & 0xFFFFFFFF)
    w[10] = np.uint32((np.uint32(l1[0]) << np.uint32(24)) | (np.uint32(l1[1]) << np.uint32(16))
                      | (np.uint32(l1[2]) << np.uint32(8)) | np.uint32(l1[3]))
    w[11] = np.uint32((np.uint32(l1[4]) << np.uint32(24)) | np.uint32(0x800000))
    w[12] = np.uint32(0)
    w[13] = np.uint32(0)
    w[14] = np.uint32(0)
    w[15] = np.uint32(45 * 8)


@njit(cache=True, inline="always")
def _ks3_words(w, b, l2):
    # preimage bytes 32..55: block index (8), level-2 bits (16); then padding
    w[4] = np.uint64(b)
    for k in range(2):
        v = np.uint64(0)
        for j in range(8):
            v = (v << np.uint64(8)) | np.uint64(l2[8 * k + j])
        w[5 + k] = v
    w[7] = np.uint64(0x80) << np.uint64(56)
    for k in range(8, 15):
        w[k] = np.uint64(0)
    w[15] = np.uint64(56 * 8)


# -- fixed-width group packing ------------------------------------------------

@njit(cache=True, inline="always")
def _pack4(v0, v1, v2, v3, width, out, o):
    """Four signed fields of ``width`` bits; width 10 fills exactly 5 bytes."""
    m = (1 << width) - 1
    u = ((((((v0 & m) << width) | (v1 & m)) << width) | (v2 & m)) << width) | (v3 & m)
    nbits = 4 * width
    nfull = nbits // 8
    rem = nbits - 8 * nfull
    for i in range(nfull):
        out[o + i] = (u >> (nbits - 8 * (i + 1))) & 0xFF
    if rem:
        out[o + nfull] = (u << (8 - rem)) & 0xFF


@njit(cache=True, inline="always")
def _signed(u, width):
    return u - (1 << width) if u >= (1 << (width - 1)) else u


@njit(cache=True, inline="always")
def _unpack4(buf, o, width):
    nbits = 4 * width
    nbytes = (nbits + 7) // 8
    u = 0
    for i in range(nbytes):
        u = (u << 8) | np.int64(buf[o + i])
    u >>= 8 * nbytes - nbits
    m = (1 << width) - 1
    return (_signed((u >> (3 * width)) & m, width), _signed((u >> (2 * width)) & m, width),
            _signed((u >> width) & m, width), _signed(u & m, width))


@njit(cache=True, inline="always")
def _out_of(v, bound):
    return v > bound or v < -bound


@njit(cache=True, inline="always")
def _put_l2(stream, b, l2p):
    if b % 2 == 0:
        o = (b // 2) * 31
        for i in range(15):
            stream[o + i] = l2p[i]
        stream[o + 15] |= l2p[15] & 0xF0
    else:
        o = (b // 2) * 31 + 15
        stream[o] |= l2p[0] >> 4
        for i in range(15):
            stream[o + 1 + i] = ((l2p[i] & 0x0F) << 4) | (l2p[i + 1] >> 4)


@njit(cache=True, inline="always")
def _get_l2(stream, b, l2p):
    if b % 2 == 0:
        o = (b // 2) * 31
        for i in range(15):
            l2p[i] = stream[o + i]
        l2p[15] = stream[o + 15] & 0xF0
    else:
        o = (b // 2) * 31 + 15
        for i in range(15):
            l2p[i] = ((stream[o + i] & 0x0F) << 4) | (stream[o + i + 1] >> 4)
        l2p[15] = (stream[o + 15] & 0x0F) << 4


@njit(cache=True, nogil=True)
def protect_range(img, start, stop, key, iv, bounds, l1_out, l2_out, l3_out, viol):
    """Protect blocks [start, stop) of a square uint8 image.

    l1_out receives the plain level-1 bytes (5 per block); encryption of that
    stream happens outside. On a range violation viol gets (block, row, col,
    value) and the function returns early.
    """
    bpr = img.shape[1] // 8
    c = np.empty((8, 8), dtype=np.int64)
    t = np.empty(16, dtype=np.int64)
    w256 = np.empty(64, dtype=np.uint32)
    w512 = np.empty(80, dtype=np.uint64)
    st256 = np.empty(8, dtype=np.uint32)
    st512 = np.empty(8, dtype=np.uint64)
    sha256_prefix_state(key, iv, w256, st256)
    sha512_prefix_state(key, iv, w512, st512)
    ks2 = np.empty(32, dtype=np.uint8)
    ks3 = np.empty(64, dtype=np.uint8)
    l2b = np.zeros(16, dtype=np.uint8)
    for b in range(start, stop):
        r0 = (b // bpr) * 8
        c0 = (b % bpr) * 8
        for r in range(8):
            for q in range(8):
                c[r, q] = np.int64(img[r0 + r, c0 + q]) - 128
        fwd_block(c, t)
        for r in range(8):
            for q in range(8):
                if _out_of(c[r, q], bounds[r, q]):
                    viol[0] = b
                    viol[1] = r
                    viol[2] = q
                    viol[3] = c[r, q]
                    return
        o1 = 5 * b
        _pack4(c[0, 0], c[0, 1], c[1, 0], c[1, 1], 10, l1_out, o1)
        _ks2_words(w256, b, l1_out[o1:o1 + 5])
        _sha256_finish(st256, w256, ks2)
        _pack4(c[0, 2], c[0, 3], c[1, 2], c[1, 3], 10, l2b, 0)
        _pack4(c[2, 0], c[2, 1], c[3, 0], c[3, 1], 10, l2b, 5)
        _pack4(c[2, 2], c[2, 3], c[3, 2], c[3, 3], 11, l2b, 10)
        _ks3_words(w512, b, l2b)
        _sha512_finish(st512, w512, ks3)
        for i in range(16):
            l2b[i] ^= ks2[i]
        l2b[15] &= 0xF0
        _put_l2(l2_out, b, l2b)
        o3 = 60 * b
        for r in range(4):
            _pack4(c[r, 4], c[r, 5], c[r, 6], c[r, 7], 10, l3_out, o3 + 5 * r)
            _pack4(c[4 + r, 0], c[4 + r, 1], c[4 + r, 2], c[4 + r, 3], 10, l3_out, o3 + 20 + 5 * r)
            _pack4(c[4 + r, 4], c[4 + r, 5], c[4 + r, 6], c[4 + r, 7], 10, l3_out, o3 + 40 + 5 * r)
        for i in range(60):
            l3_out[o3 + i] ^= ks3[i]


@njit(cache=True, nogil=True)
def restore_range(img, start, stop, key, iv, bounds, l1_plain, l2_in, l3_in, counts):
    """Inverse of protect_range, writing pixels into img.

    counts[0] accumulates blocks whose level-1/2 values leave their bounds
    (a wrong key), counts[1] blocks with level-3 values out of bounds.
    """
    bpr = img.shape[1] // 8
    c = np.empty((8, 8), dtype=np.int64)
    t = np.empty(16, dtype=np.int64)
    w256 = np.empty(64, dtype=np.uint32)
    w512 = np.empty(80, dtype=np.uint64)
    st256 = np.empty(8, dtype=np.uint32)
    st512 = np.empty(8, dtype=np.uint64)
    sha256_prefix_state(key, iv, w256, st256)
    sha512_prefix_state(key, iv, w512, st512)
    ks2 = np.empty(32, dtype=np.uint8)
    ks3 = np.empty(64, dtype=np.uint8)
    l2b = np.zeros(16, dtype=np.uint8)
    l3b = np.zeros(60, dtype=np.uint8)
    for b in range(start, stop):
        o1 = 5 * b
        c[0, 0], c[0, 1], c[1, 0], c[1, 1] = _unpack4(l1_plain, o1, 10)
        _ks2_words(w256, b, l1_plain[o1:o1 + 5])
        _sha256_finish(st256, w256, ks2)
        _get_l2(l2_in, b, l2b)
        for i in range(16):
            l2b[i] ^= ks2[i]
        l2b[15] &= 0xF0
        c[0, 2], c[0, 3], c[1, 2], c[1, 3] = _unpack4(l2b, 0, 10)
        c[2, 0], c[2, 1], c[3, 0], c[3, 1] = _unpack4(l2b, 5, 10)
        c[2, 2], c[2, 3], c[3, 2], c[3, 3] = _unpack4(l2b, 10, 11)
        bad = False
        for r in range(4):
            for q in range(4):
                if _out_of(c[r, q], bounds[r, q]):
                    bad = True
        if bad:
            counts[0] += 1
        _ks3_words(w512, b, l2b)
        _sha512_finish(st512, w512, ks3)
        o3 = 60 * b
        for i in range(60):
            l3b[i] = l3_in[o3 + i] ^ ks3[i]
        for r in range(4):
            c[r, 4], c[r, 5], c[r, 6], c[r, 7] = _unpack4(l3b, 5 * r, 10)
            c[4 + r, 0], c[4 + r, 1], c[4 + r, 2], c[4 + r, 3] = _unpack4(l3b, 20 + 5 * r, 10)
            c[4 + r, 4], c[4 + r, 5], c[4 + r, 6], c[4 + r, 7] = _unpack4(l3b, 40 + 5 * r, 10)
        bad = False
        for r in range(8):
            for q in range(8):
                if (r >= 4 or q >= 4) and _out_of(c[r, q], bounds[r, q]):
                    bad = True
        if bad:
            counts[1] += 1
        inv_block(c, t)
        r0 = (b // bpr) * 8
        c0 = (b % bpr) * 8
        for r in range(8):
            for q in range(8):
                v = c[r, q] + 128
                if v < 0:
                    v = 0
                elif v > 255:
                    v = 255
                img[r0 + r, c0 + q] = v
