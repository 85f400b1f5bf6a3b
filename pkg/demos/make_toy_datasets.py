"""Regenerate the small datasets shipped under ``data/``.

Each dataset is a directory in the same layout the CLI reads for real
benchmarks, so the full pipeline can be exercised in seconds:

* ``c6``: a six-cycle with random features, for checking k-hop sets by eye.
* ``star``: a star (diameter 2), so every order above 2 is empty.
* ``two_cluster``: two 6-cliques joined by a bridge, linearly separable.
* ``planted``: a 3-block stochastic block model with 300 nodes and a
  public-style split, big enough for the sampler comparison to mean
  something.

Run from the repository root::

    python demos/make_toy_datasets.py
"""

from pathlib import Path

import numpy as np

from hoga.graph import save_dataset
from hoga.toy import cycle_graph, planted_partition, star_graph, two_cluster

root = Path(__file__).resolve().parent.parent / "data"
rng = np.random.default_rng(0)

g = cycle_graph(6)
save_dataset(root / "c6", g.edge_list(), rng.random((6, 3)), [0, 0, 0, 1, 1, 1])

g = star_graph(7)
save_dataset(root / "star", g.edge_list(), rng.random((8, 3)), [0, 1, 1, 1, 1, 0, 0, 0])

g, x, y = two_cluster(6, seed=0)
save_dataset(root / "two_cluster", g.edge_list(), x, y,
             {"train": [0, 1, 6, 7], "val": [2, 8], "test": [3, 4, 5, 9, 10, 11]})

edges, x, y = planted_partition([100, 100, 100], 0.05, 0.01, feature_dim=16, noise=3.0, seed=0)
order = np.random.default_rng(1).permutation(300)
# 20 labelled nodes per class, 60 validation and 120 test nodes
train = np.concatenate([order[y[order] == c][:20] for c in range(3)])
rest = np.setdiff1d(order, train, assume_unique=True)
rest = rest[np.random.default_rng(2).permutation(len(rest))]
save_dataset(root / "planted", edges, x, y,
             {"train": sorted(train.tolist()), "val": sorted(rest[:60].tolist()),
              "test": sorted(rest[60:180].tolist())})

for d in sorted(root.iterdir()):
    print(d.name, *(f.name for f in sorted(d.iterdir())))
