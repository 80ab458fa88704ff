import itertools
import os

import numpy as np
import pytest

from feds.dispersion import (
    PlacementPlan,
    PlacementPolicy,
    StorageNode,
    audit_placement,
    collect,
    disperse,
    make_decoys,
    map_recover,
    map_share,
    plan_placement,
)
from feds.errors import DigestMismatch, InsufficientNodes, MapIntegrityError, NodeWriteFailure, NoTrustedNode, Unrecoverable
from feds.model import FragmentMap, FragmentRecord
from feds.pipeline import ProtectConfig, disperse_file, protect_to_nodes, recover_file, restore_from_map
from feds.sharing import Share

KEY = bytes(range(16))


def nodes_in(tmp_path, n, trusted=0):
    return [StorageNode(str(tmp_path / f"node{i}"), f"node{i}", "trusted" if i < trusted else "untrusted")
            for i in range(n)]


def group(n, name="g"):
    return [FragmentRecord(f"s{i}", "share", group=name, share_index=i + 1, order=0) for i in range(n)]


def test_node_parse():
    n = StorageNode.parse("/tmp/a:trusted")
    assert (n.uri, n.trust, n.label) == ("/tmp/a", "trusted", "a")
    assert StorageNode.parse("file:///tmp/b").path.as_posix() == "/tmp/b"
    assert StorageNode.parse("/tmp/c").trust == "untrusted"


def test_one_share_per_node(tmp_path):
    plan = plan_placement(group(3), nodes_in(tmp_path, 3), PlacementPolicy(k=2))
    assert len({n.uri for n in plan.assignments.values()}) == 3


def test_too_few_nodes(tmp_path):
    with pytest.raises(InsufficientNodes):
        plan_placement(group(3), nodes_in(tmp_path, 2), PlacementPolicy(k=2))
    with pytest.raises(InsufficientNodes):
        plan_placement(group(3), [], PlacementPolicy(k=2))


def test_private_on_trusted_public_on_untrusted(tmp_path):
    nodes = nodes_in(tmp_path, 3, trusted=1)
    recs = [FragmentRecord("p", "private", order=0), FragmentRecord("q", "public", order=0),
            FragmentRecord("r", "public", order=1)]
    plan = plan_placement(recs, nodes)
    assert plan.assignments["p"].trust == "trusted"
    assert {plan.assignments["q"].uri, plan.assignments["r"].uri} == {nodes[1].uri, nodes[2].uri}


def test_require_trusted(tmp_path):
    with pytest.raises(NoTrustedNode):
        plan_placement([FragmentRecord("p", "private")], nodes_in(tmp_path, 2), PlacementPolicy(require_trusted=True))


def test_private_shares_spill_when_trusted_pool_small(tmp_path):
    nodes = nodes_in(tmp_path, 3, trusted=1)
    recs = [FragmentRecord(f"s{i}", "share", group="g", share_index=i + 1, origin="private") for i in range(3)]
    plan = plan_placement(recs, nodes, PlacementPolicy(k=2))
    assert len({n.uri for n in plan.assignments.values()}) == 3
    with pytest.raises(InsufficientNodes):
        plan_placement(recs, nodes, PlacementPolicy(k=2, require_trusted=True))


def test_placement_deterministic(tmp_path):
    nodes = nodes_in(tmp_path, 4)
    a = plan_placement(group(5), nodes, PlacementPolicy(k=3))
    b = plan_placement(group(5), nodes, PlacementPolicy(k=3))
    assert a.assignments == b.assignments


def test_make_decoys():
    assert make_decoys(0, lambda r: 10) == []
    ds = make_decoys(5, lambda r: 100, np.random.default_rng(0), header_for=lambda s: b"HEAD")
    assert all(r.role == "decoy" and b.startswith(b"HEAD") and len(b) == 100 for r, b in ds)
    assert len({r.id for r, _ in ds}) == 5


def _protect(tmp_path, data, **kw):
    nodes = nodes_in(tmp_path, kw.pop("n_nodes", 4), trusted=kw.pop("trusted", 1))
    cfg = ProtectConfig(chunk_side=kw.pop("side", 64), seed=kw.pop("seed", 1), **kw)
    return protect_to_nodes(data, KEY, nodes, cfg, map_path=tmp_path / "map.json")


def test_disperse_collect_identical(tmp_path):
    data = os.urandom(10_000)
    fmap = _protect(tmp_path, data)
    got = collect(fmap)
    for rec in fmap.fragments:
        if rec.role != "decoy":
            path = StorageNode(rec.node_uri).path / rec.filename
            assert got[rec.id] == path.read_bytes()
            assert rec.filename == f"{fmap.data_id}_{rec.id}.frag"
    assert restore_from_map(FragmentMap.from_json((tmp_path / "map.json").read_text()), KEY) == data


def test_digest_mismatch_caught(tmp_path):
    fmap = _protect(tmp_path, b"a" * 5000)
    rec = next(r for r in fmap.fragments if r.role == "public")
    path = StorageNode(rec.node_uri).path / rec.filename
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 1
    path.write_bytes(bytes(raw))
    with pytest.raises(DigestMismatch):
        collect(fmap)


def test_missing_standalone_fragment(tmp_path):
    fmap = _protect(tmp_path, b"b" * 5000)
    rec = next(r for r in fmap.fragments if r.role == "private")
    (StorageNode(rec.node_uri).path / rec.filename).unlink()
    with pytest.raises(Unrecoverable):
        restore_from_map(fmap, KEY)


@pytest.mark.parametrize("scheme", ["shamir", "ida", "krawczyk", "aont-rs"])
def test_any_n_minus_k_shares_deleted(tmp_path, scheme):
    data = os.urandom(3000)
    k, n = 2, 4
    fmap = _protect(tmp_path, data, share=scheme, k=k, n=n, n_nodes=5, trusted=1)
    assert audit_placement(fmap, k) == []
    for g, recs in fmap.groups().items():
        for gone in itertools.combinations(recs, n - k):
            saved = {}
            for r in gone:
                p = StorageNode(r.node_uri).path / r.filename
                saved[p] = p.read_bytes()
                p.unlink()
            assert restore_from_map(fmap, KEY) == data
            for p, b in saved.items():
                p.write_bytes(b)
        gone = recs[: n - k + 1]
        for r in gone:
            (StorageNode(r.node_uri).path / r.filename).unlink()
        with pytest.raises(Unrecoverable):
            restore_from_map(fmap, KEY)
        break


def test_damaged_share_skipped(tmp_path):
    data = os.urandom(2000)
    fmap = _protect(tmp_path, data, share="shamir", k=2, n=3, n_nodes=4)
    rec = next(iter(fmap.groups().values()))[0]
    p = StorageNode(rec.node_uri).path / rec.filename
    p.write_bytes(p.read_bytes()[:-1] + b"\x00")
    assert restore_from_map(fmap, KEY) == data


def test_decoys_do_not_change_output(tmp_path):
    data = os.urandom(20_000)
    plain = _protect(tmp_path / "a", data, seed=5)
    with_decoys = _protect(tmp_path / "b", data, seed=5, decoys=6)
    assert sum(r.role == "decoy" for r in with_decoys.fragments) == 6
    assert restore_from_map(plain, KEY) == restore_from_map(with_decoys, KEY) == data
    for r in with_decoys.fragments:
        if r.role == "decoy":
            (StorageNode(r.node_uri).path / r.filename).unlink()
    assert restore_from_map(with_decoys, KEY) == data


def test_decoys_look_like_fragments(tmp_path):
    fmap = _protect(tmp_path, os.urandom(20_000), decoys=8)
    real = [r for r in fmap.fragments if r.role != "decoy"]
    fake = [r for r in fmap.fragments if r.role == "decoy"]
    real_sizes = {r.size for r in real}
    real_heads = {(StorageNode(r.node_uri).path / r.filename).read_bytes()[:4] for r in real}
    for r in fake:
        raw = (StorageNode(r.node_uri).path / r.filename).read_bytes()
        assert r.size in real_sizes
        assert raw[:4] in real_heads
        assert len(r.id) == len(real[0].id)


def test_disperse_rolls_back(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_bytes(b"")
    good = StorageNode(str(tmp_path / "ok"))
    bad = StorageNode(str(blocker / "sub"))
    recs = [FragmentRecord("a", "public"), FragmentRecord("b", "public")]
    plan = PlacementPlan({"a": good, "b": bad})
    fmap = FragmentMap("d", 2, 8, {"name": "dwt-se", "share": None}, [], recs)
    with pytest.raises(NodeWriteFailure):
        disperse([(recs[0], b"x"), (recs[1], b"y")], plan, fmap, tmp_path / "m.json")
    assert list((tmp_path / "ok").iterdir()) == []


def test_map_sharing(tmp_path):
    fmap = _protect(tmp_path, b"z" * 1000)
    raw = fmap.to_json().encode()
    shares = map_share(raw, 3, 5, np.random.default_rng(0))
    for sub in itertools.combinations(shares, 3):
        assert map_recover(sub).to_json() == fmap.to_json()
    assert map_recover(map_share(raw, 1, 1)).to_json() == fmap.to_json()
    s = shares[0]
    bad = Share(s.scheme, s.index, s.k, s.n, bytes([s.payload[0] ^ 1]) + s.payload[1:])
    with pytest.raises(MapIntegrityError):
        map_recover([bad, shares[1], shares[2]])


def test_plain_file_dispersal(tmp_path):
    data = os.urandom(5000)
    fmap = disperse_file(data, nodes_in(tmp_path, 3), "ida", 2, 3, decoys=2, seed=3)
    assert audit_placement(fmap, 2) == []
    rec = fmap.groups()["g0"][0]
    (StorageNode(rec.node_uri).path / rec.filename).unlink()
    assert recover_file(fmap) == data


@pytest.mark.parametrize("scheme", ["dct-first", "dct-strong"])
def test_image_schemes_through_nodes(tmp_path, images, scheme):
    img = images["camera"][:128, :128]
    fmap = _protect(tmp_path, img, scheme=scheme, share="shamir", k=2, n=3)
    out = restore_from_map(fmap, KEY)
    assert out.shape == img.shape
    assert np.abs(out.astype(int) - img).max() <= 2
