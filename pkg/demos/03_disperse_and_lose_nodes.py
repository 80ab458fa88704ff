"""Protect a file, share its private fragments 2-of-3, spread them over nodes,
lose the trusted node, and restore anyway.

Only private fragments are shared; public fragments are stored whole, so the
node lost here is one that holds shares and no public data.

Run: python3 demos/03_disperse_and_lose_nodes.py
"""

import os
import shutil
import tempfile
from pathlib import Path

from feds.dispersion import StorageNode, audit_placement
from feds.pipeline import ProtectConfig, protect_to_nodes, restore_from_map

root = Path(tempfile.mkdtemp(prefix="feds-demo-"))
nodes = [StorageNode(str(root / "vault"), "vault", "trusted")]
nodes += [StorageNode(str(root / f"cloud{i}"), f"cloud{i}") for i in range(3)]
key = os.urandom(16)
data = os.urandom(500_000)

cfg = ProtectConfig(chunk_side=256, share="shamir", k=2, n=3, decoys=4)
fmap = protect_to_nodes(data, key, nodes, cfg, map_path=root / "map.json")

for node in nodes:
    names = sorted(p.name for p in node.path.iterdir())
    print(f"{node.label:<7} {node.trust:<9} {len(names):>3} fragment file(s)")
print("co-location violations:", audit_placement(fmap, cfg.k) or "none")

shutil.rmtree(nodes[0].path)
print(f"deleted {nodes[0].label}; restoring from the surviving shares")
assert restore_from_map(fmap, key) == data
print("restored byte-identical output")
shutil.rmtree(root)
