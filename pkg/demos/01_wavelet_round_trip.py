"""Protect an arbitrary byte string with the wavelet scheme and get it back.

Run: python3 demos/01_wavelet_round_trip.py
"""

import os

from feds.model import chunk_stream, unchunk
from feds.se_dwt import protect_chunk, restore_chunk

key = os.urandom(16)
data = os.urandom(3 * 1024 * 1024)  # whole 1024x1024 chunks, so no padding slack

private_bytes = public_bytes = 0
restored = []
for chunk in chunk_stream(data, 1024):
    priv, pub = protect_chunk(chunk, key, os.urandom(16))
    private_bytes += len(priv.to_bytes())
    public_bytes += len(pub.to_bytes())
    restored.append(restore_chunk(priv, pub, key, payload_len=chunk.payload_len))

assert unchunk(restored, len(data)) == data
print(f"input            {len(data):>10} bytes")
print(f"private (local)  {private_bytes:>10} bytes  ({private_bytes / len(data):.4f} x input)")
print(f"public (cloud)   {public_bytes:>10} bytes  ({public_bytes / len(data):.4f} x input)")
print("round trip is bit-exact")
