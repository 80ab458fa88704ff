"""Command-line entry point.

Exit codes: 0 ok, 2 configuration, 3 I/O, 4 scheme error, 5 unrecoverable,
6 integrity failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, pipeline, se_dwt
from .dispersion import StorageNode
from .errors import (
    ConfigError,
    FedsError,
    FormatError,
    InsufficientShares,
    InsufficientNodes,
    IntegrityFailure,
    LikelyWrongKey,
    MissingShare,
    NoTrustedNode,
    Unrecoverable,
)
from .imageio import read_image, write_image
from .model import DEFAULT_SIDE, FragmentMap, canonical_json, chunk_stream

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SCHEME, EXIT_UNRECOVERABLE, EXIT_INTEGRITY = 0, 2, 3, 4, 5, 6


def _add_common(p, *, nodes=False, sharing=False):
    p.add_argument("--scheme", default="dwt-se", choices=pipeline.PROTECTION_SCHEMES)
    p.add_argument("--key-file")
    p.add_argument("--chunk-side", type=int, default=DEFAULT_SIDE)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    if sharing:
        p.add_argument("--share", choices=pipeline.SHARE_SCHEMES)
        p.add_argument("-k", type=int, default=2)
        p.add_argument("-n", type=int, default=3)
        p.add_argument("--decoys", type=int, default=0)
    if nodes:
        p.add_argument("--node", action="append", default=[], metavar="URI[:trusted]")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="feds", description="Fragment, protect and disperse data.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("protect", help="protect a file and disperse its fragments")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="map file to write")
    _add_common(p, nodes=True, sharing=True)
    p.add_argument("--level2-public", action="store_true")
    p.add_argument("--dct-mode", default="bits11", choices=("bits11", "bits8"))

    p = sub.add_parser("restore", help="rebuild a protected file from its map")
    p.add_argument("map")
    p.add_argument("-o", "--output", required=True)
    _add_common(p)

    p = sub.add_parser("disperse", help="share a file as-is across nodes")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="map file to write")
    _add_common(p, nodes=True, sharing=True)

    p = sub.add_parser("recover", help="reassemble a file written by disperse")
    p.add_argument("map")
    p.add_argument("-o", "--output", required=True)
    _add_common(p)

    p = sub.add_parser("analyze", help="security statistics of a protection scheme on an image")
    p.add_argument("plain")
    p.add_argument("protected", nargs="?", help="already protected image; skips the key trials")
    p.add_argument("-o", "--output")
    _add_common(p)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--pairs", type=int, default=analysis.DEFAULT_PAIRS)

    p = sub.add_parser("bench", help="throughput of dwt-se against plain AES-CTR")
    _add_common(p)
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--size-mib", type=int, default=16)
    return ap


def _nodes(args) -> list[StorageNode]:
    if not args.node:
        raise ConfigError("at least one --node is required")
    return [StorageNode.parse(n) for n in args.node]


def _key(args) -> bytes:
    if not args.key_file:
        raise ConfigError("--key-file is required")
    return pipeline.read_key(args.key_file)


def _read_map(path) -> FragmentMap:
    try:
        text = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read map {path}: {exc}") from exc
    return FragmentMap.from_json(text)


def cmd_protect(args) -> int:
    key = _key(args)
    nodes = _nodes(args)
    cfg = pipeline.ProtectConfig(scheme=args.scheme, chunk_side=args.chunk_side, share=args.share,
                                 k=args.k, n=args.n, decoys=args.decoys, seed=args.seed,
                                 workers=args.workers, level2_public=args.level2_public,
                                 dct_mode=args.dct_mode)
    cfg.check()
    src = Path(args.input)
    payload = src.read_bytes()
    if args.scheme != "dwt-se":
        payload = read_image(src)
    fmap = pipeline.protect_to_nodes(payload, key, nodes, cfg, map_path=args.output, key_path=args.key_file)
    print(f"protected {fmap.original_len} bytes into {len(fmap.fragments)} fragment(s); map {args.output}")
    return EXIT_OK


def cmd_restore(args) -> int:
    key = _key(args)
    fmap = _read_map(args.map)
    out = pipeline.restore_from_map(fmap, key, workers=args.workers)
    if isinstance(out, np.ndarray):
        write_image(args.output, out)
    else:
        Path(args.output).write_bytes(out)
    print(f"restored {args.output}")
    return EXIT_OK


def cmd_disperse(args) -> int:
    data = Path(args.input).read_bytes()
    fmap = pipeline.disperse_file(data, _nodes(args), args.share, args.k, args.n, args.decoys,
                                  args.seed, map_path=args.output)
    print(f"dispersed {len(data)} bytes into {len(fmap.fragments)} fragment(s); map {args.output}")
    return EXIT_OK


def cmd_recover(args) -> int:
    data = pipeline.recover_file(_read_map(args.map))
    Path(args.output).write_bytes(data)
    print(f"recovered {args.output}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    plain = read_image(args.plain)
    if args.protected:
        report = analysis.pair_report(plain, read_image(args.protected), args.pairs,
                                      args.seed if args.seed is not None else 0)
    else:
        side = args.chunk_side if args.chunk_side != DEFAULT_SIDE else None
        fn = pipeline.public_view_fn(args.scheme, side, workers=1)
        report = analysis.run_report(plain, fn, args.trials, seed=args.seed if args.seed is not None else 0,
                                     pairs=args.pairs, workers=args.workers)
    text = report.to_json()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _rate(nbytes, seconds):
    return nbytes / seconds / 1e6


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    data = rng.bytes(args.size_mib << 20)
    chunks = chunk_stream(data, args.chunk_side)
    key = rng.bytes(16)
    ivs = [rng.bytes(16) for _ in chunks]
    most = max(1, os.cpu_count() or 1, args.workers)
    rows = []
    for w in sorted({1, 2, most}):
        best_p = best_r = best_a = float("inf")
        for _ in range(max(1, args.trials)):
            t = time.perf_counter()
            frags = [se_dwt.protect_chunk(c, key, iv, workers=w) for c, iv in zip(chunks, ivs)]
            best_p = min(best_p, time.perf_counter() - t)
            t = time.perf_counter()
            for priv, pub in frags:
                se_dwt.restore_chunk(priv, pub, key, workers=w)
            best_r = min(best_r, time.perf_counter() - t)
            t = time.perf_counter()
            _aes_parallel(key, ivs[0], data, w)
            best_a = min(best_a, time.perf_counter() - t)
        rows.append({
            "workers": w,
            "dwt_se_protect_MBps": round(_rate(len(data), best_p), 2),
            "dwt_se_restore_MBps": round(_rate(len(data), best_r), 2),
            "aes_ctr_MBps": round(_rate(len(data), best_a), 2),
            "se_over_aes": round(best_a / best_p, 4),
        })
    out = {
        "size_MiB": args.size_mib,
        "chunk_side": args.chunk_side,
        "cpu_count": os.cpu_count(),
        "rows": rows,
        "gpu_reference_MBps": {"laptop": 360, "desktop": [2800, 3200],
                               "note": "external GPU figures, hardware bound, not targets"},
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _aes_parallel(key, iv, data, workers):
    """Full AES-CTR over ``data``, split into ``workers`` contiguous pieces."""
    from concurrent.futures import ThreadPoolExecutor

    if workers <= 1:
        return se_dwt.aes_ctr(key, iv, data)
    step = -(-len(data) // workers)
    step += -step % 16
    start_ctr = int.from_bytes(iv, "big")

    def piece(i):
        ctr = ((start_ctr + i * step // 16) % (1 << 128)).to_bytes(16, "big")
        return se_dwt.aes_ctr(key, ctr, data[i * step:(i + 1) * step])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return b"".join(pool.map(piece, range(workers)))


COMMANDS = {
    "protect": cmd_protect,
    "restore": cmd_restore,
    "disperse": cmd_disperse,
    "recover": cmd_recover,
    "analyze": cmd_analyze,
    "bench": cmd_bench,
}


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, InsufficientNodes, NoTrustedNode)):
        return EXIT_CONFIG
    if isinstance(exc, (Unrecoverable, InsufficientShares, MissingShare)):
        return EXIT_UNRECOVERABLE
    if isinstance(exc, (IntegrityFailure, LikelyWrongKey)):
        return EXIT_INTEGRITY
    if isinstance(exc, (OSError, FormatError)):
        return EXIT_IO
    return EXIT_SCHEME


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (FedsError, OSError, ValueError) as exc:
        print(f"feds {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
