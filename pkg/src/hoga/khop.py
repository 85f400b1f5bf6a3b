"""Exact distance-k pair sets via breadth-first search truncated at k."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .graph import Graph

UNREACHABLE = -1


def _expand(g: Graph, frontier: np.ndarray) -> np.ndarray:
    """Concatenated neighbour lists of every node in ``frontier``."""
    starts = g.indptr[frontier]
    lens = g.indptr[frontier + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    offsets = np.repeat(starts - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens)
    return g.indices[offsets + np.arange(total)]


def bfs_distances(g: Graph, src: int, cap: int) -> np.ndarray:
    """Hop distances from ``src``; nodes beyond ``cap`` hops (or in another
    component) are marked ``UNREACHABLE``."""
    if not 0 <= src < g.num_nodes:
        raise IndexError(f"source {src} out of range")
    dist = np.full(g.num_nodes, UNREACHABLE, dtype=np.int64)
    dist[src] = 0
    frontier = np.array([src], dtype=np.int64)
    for d in range(1, cap + 1):
        nxt = _expand(g, frontier)
        nxt = np.unique(nxt[dist[nxt] == UNREACHABLE])
        if nxt.size == 0:
            break
        dist[nxt] = d
        frontier = nxt
    return dist


def khop_neighbors(g: Graph, i: int, k: int) -> np.ndarray:
    """Sorted array of nodes at shortest-path distance exactly ``k`` from ``i``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return g.neighbors(i).copy()
    return np.flatnonzero(bfs_distances(g, i, k) == k)


def iter_khop_neighbors(g: Graph, k: int) -> Iterator[tuple[int, np.ndarray]]:
    """Stream ``(i, N_k(i))`` for every source in ascending order."""
    for i in range(g.num_nodes):
        yield i, khop_neighbors(g, i, k)


def count_khop_pairs(g: Graph, k: int) -> int:
    """|E_k| without materialising the pair list."""
    total = 0
    for i, nbrs in iter_khop_neighbors(g, k):
        total += int(np.count_nonzero(nbrs > i))
    return total


@dataclass(frozen=True)
class KHopEdgeSet:
    k: int
    pairs: np.ndarray  # (m, 2), i < j, lexicographically sorted

    def __len__(self) -> int:
        return len(self.pairs)

    def as_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.pairs}


def build_khop_edges(g: Graph, k: int) -> KHopEdgeSet:
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return KHopEdgeSet(1, g.edge_list())
    chunks = []
    for i, nbrs in iter_khop_neighbors(g, k):
        upper = nbrs[nbrs > i]
        if upper.size:
            chunks.append(np.stack([np.full(upper.size, i), upper], axis=1))
    pairs = np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.int64)
    return KHopEdgeSet(k, pairs.astype(np.int64))


def save_pairs(path, pairs) -> None:
    """Write ``i<TAB>j`` lines, one pair per line, in sorted order."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{i}\t{j}\n" for i, j in pairs[order])


def load_pairs(path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").split()
    return np.asarray(text, dtype=np.int64).reshape(-1, 2)
