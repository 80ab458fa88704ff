"""Placing fragments on storage nodes and getting them back.

A node is a directory. Private material goes to trusted nodes whenever any
exist, everything else to untrusted ones, and no node ever receives k or
more shares of one (k, n) group.
"""

from __future__ import annotations

import os
import secrets
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .errors import (
    DigestMismatch,
    InsufficientNodes,
    NodeWriteFailure,
    NoTrustedNode,
    Unrecoverable,
)
from .model import FragmentMap, FragmentRecord, sha256_hex
from .sharing import Share, random_bytes, shamir_combine, shamir_split

TRUST_LEVELS = ("trusted", "untrusted")


@dataclass(frozen=True)
class StorageNode:
    uri: str
    label: str = ""
    trust: str = "untrusted"

    def __post_init__(self):
        if self.trust not in TRUST_LEVELS:
            raise ValueError(f"trust must be one of {TRUST_LEVELS}")

    @property
    def path(self) -> Path:
        uri = self.uri[len("file://"):] if self.uri.startswith("file://") else self.uri
        return Path(uri)

    @classmethod
    def parse(cls, text: str) -> "StorageNode":
        """``URI`` or ``URI:trusted`` / ``URI:untrusted``."""
        uri, trust = text, "untrusted"
        head, sep, tail = text.rpartition(":")
        if sep and tail in TRUST_LEVELS:
            uri, trust = head, tail
        return cls(uri, Path(uri).name or uri, trust)


@dataclass
class PlacementPolicy:
    k: int | None = None                # threshold of every sharing group
    require_trusted: bool = False      # refuse to place private material without a trusted node

    def describe(self) -> dict:
        return {"rule": "round-robin, <= k-1 shares of a group per node, private on trusted",
                "k": self.k, "require_trusted": self.require_trusted}


@dataclass
class PlacementPlan:
    assignments: dict[str, StorageNode]
    policy: dict = field(default_factory=dict)


def plan_placement(records: list[FragmentRecord], nodes: list[StorageNode],
                   policy: PlacementPolicy | None = None) -> PlacementPlan:
    policy = policy or PlacementPolicy()
    if not nodes:
        raise InsufficientNodes("no storage nodes given")
    trusted = [n for n in nodes if n.trust == "trusted"]
    untrusted = [n for n in nodes if n.trust != "trusted"]
    if policy.require_trusted and not trusted and any(r.sensitive for r in records):
        raise NoTrustedNode("private fragments need a trusted node")
    private_pool = trusted or nodes
    public_pool = untrusted or nodes
    # spill pool for shares of private data when the trusted nodes alone are too few
    spill_pool = trusted + untrusted

    group_size: dict[str, int] = {}
    for rec in records:
        if rec.group is not None:
            group_size[rec.group] = group_size.get(rec.group, 0) + 1
    k = policy.k
    if group_size and k is None:
        raise InsufficientNodes("sharing groups present but the policy has no threshold")

    def fits(pool, g):
        return len(pool) * (k - 1) >= group_size[g]

    def pool_of(rec):
        if not rec.sensitive:
            if rec.group is None or fits(public_pool, rec.group):
                return public_pool
            # any node may hold non-private data; untrusted ones come first
            return untrusted + trusted
        if rec.group is None or fits(private_pool, rec.group) or policy.require_trusted:
            return private_pool
        return spill_pool

    for rec in records:
        if rec.group is not None and not fits(pool_of(rec), rec.group):
            raise InsufficientNodes(f"group {rec.group}: {group_size[rec.group]} shares cannot avoid "
                                    f"k={k} co-location on {len(pool_of(rec))} eligible node(s)")

    cursor: dict[int, int] = {}
    load: dict[tuple[str, str], int] = {}
    assignments = {}
    for rec in records:
        pool = pool_of(rec)
        start = cursor.get(id(pool), 0)
        for step in range(len(pool)):
            node = pool[(start + step) % len(pool)]
            if rec.group is None or load.get((rec.group, node.uri), 0) < k - 1:
                break
        else:  # pragma: no cover - excluded by the capacity check
            raise InsufficientNodes(f"no node left for {rec.id}")
        cursor[id(pool)] = (start + step + 1) % len(pool)
        if rec.group is not None:
            load[(rec.group, node.uri)] = load.get((rec.group, node.uri), 0) + 1
        assignments[rec.id] = node
    return PlacementPlan(assignments, policy.describe())


def audit_placement(fmap: FragmentMap, k: int) -> list[str]:
    """Every (group, node) pair holding k or more shares; empty when compliant."""
    counts: dict[tuple[str, str], int] = {}
    for rec in fmap.fragments:
        if rec.role != "decoy" and rec.group is not None:
            key = (rec.group, rec.node_uri)
            counts[key] = counts.get(key, 0) + 1
    return [f"{g} on {uri}: {c}" for (g, uri), c in sorted(counts.items()) if c >= k]


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def disperse(fragments: list[tuple[FragmentRecord, bytes]], plan: PlacementPlan,
             fmap: FragmentMap, map_path: str | os.PathLike | None = None) -> FragmentMap:
    """Write fragment files to their nodes, fill in the records, write the map."""
    written: list[Path] = []
    records = []
    try:
        for rec, data in fragments:
            node = plan.assignments[rec.id]
            node.path.mkdir(parents=True, exist_ok=True)
            rec.filename = fmap.fragment_filename(rec.id)
            rec.node_uri = node.uri
            rec.size = len(data)
            rec.digest = sha256_hex(data)
            target = node.path / rec.filename
            _write_atomic(target, data)
            written.append(target)
            records.append(rec)
        fmap.fragments = records
        if map_path is not None:
            _write_atomic(Path(map_path), fmap.to_json().encode())
    except OSError as exc:
        for p in written:
            try:
                p.unlink()
            except OSError:
                pass
        raise NodeWriteFailure(f"dispersal failed, {len(written)} file(s) rolled back: {exc}") from exc
    return fmap


def new_fragment_id(rng=None) -> str:
    """Opaque id; real and decoy fragments draw from the same space."""
    if rng is None:
        return secrets.token_hex(8)
    return random_bytes(rng, 8).hex()


def make_decoys(count: int, size_sampler: Callable, rng=None,
                header_for: Callable[[int], bytes] | None = None) -> list[tuple[FragmentRecord, bytes]]:
    """Random-content fragments, marked as decoys only in the map.

    ``size_sampler(rng)`` draws a file size; ``header_for(size)`` may supply
    a format header so the file parses like a real fragment.
    """
    out = []
    for _ in range(count):
        size = int(size_sampler(rng))
        head = header_for(size) if header_for else b""
        if len(head) > size:
            head = b""
        body = head + random_bytes(rng, size - len(head))
        out.append((FragmentRecord(new_fragment_id(rng), "decoy", order=-1), body))
    return out


def _read(rec: FragmentRecord) -> bytes:
    return (StorageNode(rec.node_uri).path / rec.filename).read_bytes()


def _fetch(rec: FragmentRecord) -> bytes | None:
    try:
        data = _read(rec)
    except OSError:
        return None
    return data


def collect(fmap: FragmentMap, threshold: int | None = None) -> dict[str, bytes]:
    """Fetch and verify what restore needs, keyed by fragment id.

    Stand-alone fragments must all be present and intact. For each sharing
    group, shares are read in index order until ``threshold`` verified ones
    are in hand; damaged or missing shares are skipped.
    """
    out: dict[str, bytes] = {}
    groups = fmap.groups()
    for rec in fmap.fragments:
        if rec.role == "decoy" or rec.group is not None:
            continue
        data = _fetch(rec)
        if data is None:
            raise Unrecoverable(f"fragment {rec.id} is missing from {rec.node_uri}")
        if sha256_hex(data) != rec.digest:
            raise DigestMismatch(f"fragment {rec.id} on {rec.node_uri} does not match its digest")
        out[rec.id] = data
    for g, recs in groups.items():
        need = threshold if threshold is not None else len(recs)
        got = 0
        damaged = 0
        for rec in sorted(recs, key=lambda r: r.share_index):
            data = _fetch(rec)
            if data is None:
                continue
            if sha256_hex(data) != rec.digest:
                damaged += 1
                continue
            out[rec.id] = data
            got += 1
            if got == need:
                break
        if got < need:
            raise Unrecoverable(f"group {g}: only {got} intact share(s) of {need} needed "
                                f"({damaged} failed their digest)")
    return out


# -- the map itself as shares -------------------------------------------------------

def map_share(map_bytes: bytes, k: int, n: int, rng=None) -> list[Share]:
    return shamir_split(map_bytes, k, n, rng)


def map_recover(shares) -> FragmentMap:
    """Interpolate the map back; a bad share surfaces as MapIntegrityError."""
    return FragmentMap.from_json(shamir_combine(shares))
