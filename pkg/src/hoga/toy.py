"""Small synthetic graphs used by the tests, demos and bundled toy datasets."""

from __future__ import annotations

import numpy as np

from .graph import Graph, build_graph


def path_graph(n: int) -> Graph:
    return build_graph([(i, i + 1) for i in range(n - 1)], n)


def cycle_graph(n: int) -> Graph:
    return build_graph([(i, (i + 1) % n) for i in range(n)], n)


def star_graph(leaves: int) -> Graph:
    return build_graph([(0, i) for i in range(1, leaves + 1)], leaves + 1)


def erdos_renyi(n: int, p: float, seed: int = 0) -> Graph:
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return build_graph(np.stack([iu[keep], ju[keep]], axis=1), n)


def planted_partition(sizes, p_in: float, p_out: float, feature_dim: int, noise: float = 1.0,
                      seed: int = 0):
    """Stochastic block model with class-dependent Gaussian features.

    Returns ``(edges, features, labels)``; features are shifted to be
    non-negative so L1 normalisation keeps class structure.
    """
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    n = len(labels)
    iu, ju = np.triu_indices(n, 1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(iu.size) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    centers = rng.normal(size=(len(sizes), feature_dim)) * 2.0
    features = centers[labels] + noise * rng.normal(size=(n, feature_dim))
    features -= features.min() - 0.1
    return edges, features, labels


def two_cluster(per_cluster: int = 6, seed: int = 0):
    """Two cliques joined by a single bridge, with separable features.

    Returns ``(graph, features, labels)``.
    """
    rng = np.random.default_rng(seed)
    edges = []
    for c in range(2):
        base = c * per_cluster
        edges += [(base + i, base + j) for i in range(per_cluster) for j in range(i + 1, per_cluster)]
    edges.append((per_cluster - 1, per_cluster))
    n = 2 * per_cluster
    labels = np.repeat([0, 1], per_cluster)
    features = np.where(labels[:, None] == np.array([0, 1]), 1.0, 0.0) + 0.1 * rng.random((n, 2))
    return build_graph(edges, n), np.hstack([features, 0.1 * rng.random((n, 2))]), labels
