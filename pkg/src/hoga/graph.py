"""Immutable undirected graph container, feature preprocessing and dataset IO."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DatasetError(ValueError):
    """Raised when a dataset directory is missing or malformed."""


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph in compressed sparse row form.

    ``indptr[i]:indptr[i + 1]`` slices ``indices`` to give the sorted
    neighbours of node ``i``. Self-loops are never stored.
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    num_edges: int

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edge_list(self) -> np.ndarray:
        """Undirected edges as an ``(m, 2)`` array with ``i < j``, sorted."""
        src = np.repeat(np.arange(self.num_nodes), self.degrees())
        keep = src < self.indices
        return np.stack([src[keep], self.indices[keep]], axis=1)

    def directed_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Both orientations of every edge as ``(dst, src)`` arrays."""
        dst = np.repeat(np.arange(self.num_nodes), self.degrees())
        return dst, self.indices.copy()


def build_graph(edge_pairs, num_nodes: int) -> Graph:
    """Symmetrise, deduplicate and strip self-loops from a pair list.

    Raises ``ValueError`` naming the first pair with an out-of-range index.
    """
    num_nodes = int(num_nodes)
    pairs = np.asarray(list(edge_pairs) if not isinstance(edge_pairs, np.ndarray) else edge_pairs,
                       dtype=np.int64).reshape(-1, 2)
    bad = np.flatnonzero((pairs < 0).any(axis=1) | (pairs >= num_nodes).any(axis=1))
    if bad.size:
        u, v = pairs[bad[0]]
        raise ValueError(f"edge ({u}, {v}) out of range for {num_nodes} nodes")
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    both = np.concatenate([pairs, pairs[:, ::-1]])
    if both.size:
        key = np.unique(both[:, 0] * num_nodes + both[:, 1])
        src, dst = key // num_nodes, key % num_nodes
    else:
        src = dst = np.zeros(0, dtype=np.int64)
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=num_nodes), out=indptr[1:])
    return Graph(num_nodes, indptr, dst.astype(np.int64), int(len(dst) // 2))


def branching_factor(g: Graph) -> float:
    """Average node degree, ``2|E| / |V|``."""
    if g.num_nodes == 0:
        return 0.0
    return 2.0 * g.num_edges / g.num_nodes


def preprocess_features(features) -> np.ndarray:
    """Row-normalise to unit L1 norm; all-zero rows are left untouched."""
    f = np.asarray(features, dtype=np.float64)
    if not np.all(np.isfinite(f)):
        raise ValueError("feature matrix contains non-finite entries")
    norms = np.abs(f).sum(axis=1, keepdims=True)
    return np.divide(f, norms, out=f.copy(), where=norms > 0)


@dataclass(frozen=True)
class LabeledSplit:
    labels: np.ndarray
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray

    def __post_init__(self):
        masks = np.stack([self.train_mask, self.val_mask, self.test_mask])
        if (masks.sum(axis=0) > 1).any():
            raise ValueError("train/val/test masks overlap")

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


@dataclass(frozen=True)
class Dataset:
    name: str
    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    splits: dict | None = field(default=None)

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1


def split_from_ids(labels: np.ndarray, ids: dict) -> LabeledSplit:
    n = len(labels)
    masks = []
    for key in ("train", "val", "test"):
        m = np.zeros(n, dtype=bool)
        m[np.asarray(ids[key], dtype=np.int64)] = True
        masks.append(m)
    return LabeledSplit(labels, *masks)


def load_dataset(path) -> Dataset:
    """Read a dataset directory (``edges.txt``, ``features.csv``, ``labels.txt``
    and optionally ``splits.json``). Features are returned unnormalised."""
    path = Path(path)
    try:
        features = np.loadtxt(path / "features.csv", delimiter=",", ndmin=2, dtype=np.float64)
        labels = np.loadtxt(path / "labels.txt", dtype=np.int64, ndmin=1)
        edges = np.loadtxt(path / "edges.txt", dtype=np.int64, ndmin=2, delimiter="\t")
    except (OSError, ValueError) as exc:
        raise DatasetError(f"cannot read dataset at {path}: {exc}") from exc
    if len(features) != len(labels):
        raise DatasetError(f"{len(features)} feature rows but {len(labels)} labels")
    if labels.min() < 0:
        raise DatasetError("negative class label")
    try:
        graph = build_graph(edges.reshape(-1, 2), len(labels))
    except ValueError as exc:
        raise DatasetError(str(exc)) from exc
    splits = None
    if (path / "splits.json").exists():
        with open(path / "splits.json", encoding="utf-8") as fh:
            splits = json.load(fh)
        for key in ("train", "val", "test"):
            ids = np.asarray(splits.get(key, []), dtype=np.int64)
            if key not in splits or (ids.size and (ids.min() < 0 or ids.max() >= len(labels))):
                raise DatasetError(f"splits.json: missing or out-of-range {key!r} ids")
    return Dataset(path.name, graph, features, labels, splits)


def save_dataset(path, edges, features, labels, splits=None) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "edges.txt", "w", encoding="utf-8") as fh:
        for u, v in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
            fh.write(f"{u}\t{v}\n")
    np.savetxt(path / "features.csv", np.asarray(features, dtype=np.float64), delimiter=",", fmt="%.17g")
    np.savetxt(path / "labels.txt", np.asarray(labels, dtype=np.int64), fmt="%d")
    if splits is not None:
        with open(path / "splits.json", "w", encoding="utf-8") as fh:
            json.dump({k: [int(i) for i in v] for k, v in splits.items()}, fh)
