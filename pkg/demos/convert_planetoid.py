"""Turn downloaded Planetoid files into the layout the ``hoga`` CLI reads.

The raw files (``ind.cora.x``, ``ind.cora.graph``, ...) are the ones
distributed with the original Planetoid and GCN code. Download them by any
means available to you, then run::

    python demos/convert_planetoid.py path/to/raw cora data/cora
    python demos/convert_planetoid.py path/to/raw citeseer data/citeseer

and check the result with ``hoga khop-stats --dataset data/cora``.
"""

import sys

from hoga.graph import load_dataset
from hoga.planetoid import convert_planetoid

raw, name, out = sys.argv[1:4]
path = convert_planetoid(raw, name, out)
data = load_dataset(path)
print(f"{name}: {data.graph.num_nodes} nodes, {data.graph.num_edges} edges, "
      f"{data.features.shape[1]} features, {data.num_classes} classes")
print({k: len(v) for k, v in data.splits.items()})
