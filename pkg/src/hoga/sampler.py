"""Sampling tractable subsets of the distance-k pair sets.

The heuristic walk moves over the augmented graph whose edges join nodes at
shortest-path distance exactly k. Successors are drawn in proportion to a
dissimilarity score that mixes a greedy cosine term with a term measured
against an exponential moving average of recently visited features. Four
purely topological samplers are provided as baselines.
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .graph import Graph
from .khop import build_khop_edges, count_khop_pairs, khop_neighbors, load_pairs, save_pairs

logger = logging.getLogger(__name__)

METHODS = ("heuristic-walk", "random-sample", "random-walk", "breadth-first", "depth-first")


@dataclass(frozen=True)
class SamplerConfig:
    method: str = "heuristic-walk"
    gamma: float = 0.9
    jump_prob: float = 0.05
    edge_cap: int = 90000
    history_size: int = 16
    seed: int = 0
    step_factor: int = 50

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown sampler {self.method!r}; expected one of {METHODS}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.jump_prob <= 1.0:
            raise ValueError("jump_prob must lie in [0, 1]")
        if self.edge_cap < 0 or self.history_size < 1:
            raise ValueError("edge_cap must be >= 0 and history_size >= 1")


@dataclass
class SampleSet:
    k: int
    pairs: np.ndarray  # (m, 2), i < j, sorted
    config: SamplerConfig
    status: str = "ok"  # "ok" | "budget-exhausted" | "empty"

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class HeadSampleSet:
    k: int
    heads: list[SampleSet] = field(default_factory=list)

    def __post_init__(self):
        if not self.heads:
            raise ValueError("a HeadSampleSet needs at least one head")
        if any(s.k != self.k for s in self.heads):
            raise ValueError("all heads must share k")

    def __len__(self) -> int:
        return len(self.heads)

    def __getitem__(self, h: int) -> SampleSet:
        return self.heads[h % len(self.heads)]


@dataclass
class WalkState:
    current: int
    history: deque  # node ids, most recent last

    @classmethod
    def start(cls, node: int, size: int) -> "WalkState":
        return cls(node, deque([node], maxlen=size))

    def move(self, node: int) -> None:
        self.current = node
        self.history.append(node)


class NeighborCache:
    """Lazily computed, memoised N_k(i) for one graph and hop count."""

    def __init__(self, g: Graph, k: int):
        self.g, self.k = g, k
        self._memo: dict[int, np.ndarray] = {}

    def __call__(self, i: int) -> np.ndarray:
        nbrs = self._memo.get(i)
        if nbrs is None:
            nbrs = self._memo[i] = khop_neighbors(self.g, i, self.k)
        return nbrs


def cosine_dissimilarity(a, b) -> float:
    """``1 - cos(a, b)``; defined as 1 when either vector is zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 1.0
    return float(np.clip(1.0 - a @ b / (na * nb), 0.0, 2.0))


def ema_buffer(history, gamma: float) -> np.ndarray:
    """Decay-weighted sum of the history, newest entry weighted by gamma**0.

    The sum is deliberately left unnormalised.
    """
    h = np.asarray(history, dtype=np.float64)
    if h.ndim < 2 or len(h) == 0:
        raise ValueError("history must contain at least one feature vector")
    weights = gamma ** np.arange(len(h) - 1, -1, -1, dtype=np.float64)
    return weights @ h


def dissimilarity_score(xi, xj, xhat, gamma: float) -> float:
    return gamma * cosine_dissimilarity(xi, xj) + (1.0 - gamma) * cosine_dissimilarity(xhat, xj)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def successor_probabilities(features: np.ndarray, state: WalkState, candidates: np.ndarray,
                            gamma: float, unit_features: np.ndarray | None = None,
                            zero_rows: np.ndarray | None = None) -> np.ndarray:
    """Probability of stepping to each candidate, proportional to its score.

    Falls back to uniform when every score is zero. ``unit_features`` and
    ``zero_rows`` may be precomputed by the caller.
    """
    unit = _unit_rows(features) if unit_features is None else unit_features
    if zero_rows is None:
        zero_rows = ~unit.any(axis=1)
    xhat = ema_buffer(features[list(state.history)], gamma)
    refs = np.stack([unit[state.current], _unit_rows(xhat)], axis=1)
    f = np.clip(1.0 - unit[candidates] @ refs, 0.0, 2.0)
    # zero vectors on either side take the neutral value 1
    f[zero_rows[candidates]] = 1.0
    f[:, ~refs.any(axis=0)] = 1.0
    scores = gamma * f[:, 0] + (1.0 - gamma) * f[:, 1]
    total = scores.sum()
    if total <= 0.0:
        return np.full(len(candidates), 1.0 / len(candidates))
    return scores / total


def _target_size(g: Graph, k: int, cfg: SamplerConfig, khop_size: int | None) -> int:
    if khop_size is None:
        khop_size = count_khop_pairs(g, k)
    return min(g.num_edges, cfg.edge_cap, khop_size)


def _finish(k: int, pairs, cfg: SamplerConfig, status: str) -> SampleSet:
    arr = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    if status == "empty":
        logger.warning("E_%d is empty; returning an empty sample", k)
    return SampleSet(k, arr, cfg, status)


def _walk(g: Graph, k: int, cfg: SamplerConfig, target: int, neighbors: NeighborCache,
          choose) -> SampleSet:
    rng = np.random.default_rng(cfg.seed)
    pairs: set[tuple[int, int]] = set()
    if target == 0:
        return _finish(k, pairs, cfg, "empty")
    state = WalkState.start(int(rng.integers(g.num_nodes)), cfg.history_size)
    budget = cfg.step_factor * target
    steps = 0
    while len(pairs) < target and steps < budget:
        steps += 1
        cands = neighbors(state.current)
        if cands.size == 0 or rng.random() < cfg.jump_prob:
            state.move(int(rng.integers(g.num_nodes)))
            continue
        j = int(cands[choose(rng, state, cands)])
        i = state.current
        pairs.add((i, j) if i < j else (j, i))
        state.move(j)
    return _finish(k, pairs, cfg, "ok" if len(pairs) >= target else "budget-exhausted")


def _edges_sample(g: Graph, cfg: SamplerConfig) -> SampleSet:
    return SampleSet(1, g.edge_list(), cfg, "ok" if g.num_edges else "empty")


def heuristic_walk_sample(g: Graph, features, k: int, cfg: SamplerConfig, *,
                          khop_size: int | None = None,
                          neighbors: NeighborCache | None = None) -> SampleSet:
    """Feature-diversity-driven walk on the distance-k augmented graph.

    For ``k == 1`` the full edge set is returned unsampled.
    """
    if cfg.method != "heuristic-walk":
        raise ValueError(f"config method is {cfg.method!r}, not 'heuristic-walk'")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return _edges_sample(g, cfg)
    x = np.asarray(features, dtype=np.float64)
    unit = _unit_rows(x)
    zero = ~unit.any(axis=1)
    target = _target_size(g, k, cfg, khop_size)

    def choose(rng, state, cands):
        p = successor_probabilities(x, state, cands, cfg.gamma, unit, zero)
        return rng.choice(len(cands), p=p)

    return _walk(g, k, cfg, target, neighbors or NeighborCache(g, k), choose)


def _search(g: Graph, k: int, cfg: SamplerConfig, target: int, neighbors: NeighborCache,
            depth_first: bool) -> SampleSet:
    rng = np.random.default_rng(cfg.seed)
    if target == 0:
        return _finish(k, set(), cfg, "empty")
    visited = np.zeros(g.num_nodes, dtype=bool)
    tree: list[tuple[int, int]] = []
    other: list[tuple[int, int]] = []  # non-tree pairs in encounter order

    def key(u, v):
        return (u, v) if u < v else (v, u)

    while len(tree) < target and not visited.all():
        root = int(rng.choice(np.flatnonzero(~visited)))
        if depth_first:
            stack = [(-1, root)]
            while stack and len(tree) < target:
                parent, u = stack.pop()
                if visited[u]:
                    if parent >= 0:
                        other.append(key(parent, u))
                    continue
                visited[u] = True
                if parent >= 0:
                    tree.append(key(parent, u))
                stack.extend((u, int(v)) for v in neighbors(u)[::-1] if not visited[v])
        else:
            visited[root] = True
            queue = deque([root])
            while queue and len(tree) < target:
                u = queue.popleft()
                for v in neighbors(u):
                    v = int(v)
                    if not visited[v]:
                        visited[v] = True
                        tree.append(key(u, v))
                        queue.append(v)
                        if len(tree) >= target:
                            break
                    else:
                        other.append(key(u, v))

    pairs = dict.fromkeys(tree)
    if len(pairs) < target:
        # the spanning forest is smaller than the target: top up with the
        # non-tree pairs seen during traversal, then the rest of E_k
        for p in other:
            if len(pairs) >= target:
                break
            pairs.setdefault(p)
        for i in range(g.num_nodes):
            if len(pairs) >= target:
                break
            for j in neighbors(i):
                if j > i:
                    pairs.setdefault((i, int(j)))
                    if len(pairs) >= target:
                        break
    return _finish(k, pairs, cfg, "ok" if len(pairs) >= target else "budget-exhausted")


def baseline_sample(g: Graph, k: int, cfg: SamplerConfig, *, khop_size: int | None = None,
                    neighbors: NeighborCache | None = None) -> SampleSet:
    """Topological samplers: uniform pairs, uniform walk, BFS and DFS on G_k."""
    if cfg.method == "heuristic-walk" or cfg.method not in METHODS:
        raise ValueError(f"{cfg.method!r} is not a baseline sampler")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return _edges_sample(g, cfg)
    neighbors = neighbors or NeighborCache(g, k)
    if cfg.method == "random-sample":
        all_pairs = build_khop_edges(g, k).pairs
        target = min(g.num_edges, cfg.edge_cap, len(all_pairs))
        if target == 0:
            return _finish(k, set(), cfg, "empty")
        rng = np.random.default_rng(cfg.seed)
        pick = np.sort(rng.choice(len(all_pairs), size=target, replace=False))
        return SampleSet(k, all_pairs[pick], cfg, "ok")
    target = _target_size(g, k, cfg, khop_size)
    if cfg.method == "random-walk":
        return _walk(g, k, cfg, target, neighbors, lambda rng, state, cands: rng.integers(len(cands)))
    return _search(g, k, cfg, target, neighbors, depth_first=cfg.method == "depth-first")


def sample(g: Graph, features, k: int, cfg: SamplerConfig, **kw) -> SampleSet:
    """Dispatch on ``cfg.method``."""
    if cfg.method == "heuristic-walk":
        return heuristic_walk_sample(g, features, k, cfg, **kw)
    return baseline_sample(g, k, cfg, **kw)


def sample_heads(g: Graph, features, k: int, cfg: SamplerConfig, num_heads: int) -> HeadSampleSet:
    """Independent sampler runs for each head, seeded ``cfg.seed + h``."""
    if num_heads < 1:
        raise ValueError("num_heads must be >= 1")
    if k == 1:
        return HeadSampleSet(1, [_edges_sample(g, cfg)] * num_heads)
    size = count_khop_pairs(g, k)
    neighbors = NeighborCache(g, k)
    heads = [sample(g, features, k, replace(cfg, seed=cfg.seed + h), khop_size=size, neighbors=neighbors)
             for h in range(num_heads)]
    return HeadSampleSet(k, heads)


def cache_path(cache_dir, dataset: str, method: str, k: int, seed: int, head: int) -> Path:
    return Path(cache_dir) / dataset / method / f"k{k}_seed{seed}_head{head}.txt"


def save_cached(cache_dir, dataset: str, heads: HeadSampleSet, base_seed: int) -> list[Path]:
    """Write each head's pairs plus a JSON sidecar with its full config."""
    written = []
    for h, s in enumerate(heads.heads):
        path = cache_path(cache_dir, dataset, s.config.method, heads.k, base_seed, h)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_pairs(path, s.pairs)
        meta = {"k": heads.k, "head": h, "status": s.status, "size": len(s),
                "config": asdict(s.config)}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")
        written.append(path)
    return written


def load_cached(cache_dir, dataset: str, method: str, k: int, base_seed: int,
                num_heads: int) -> HeadSampleSet | None:
    """Load a cached HeadSampleSet, or ``None`` if any head file is missing."""
    heads = []
    for h in range(num_heads):
        path = cache_path(cache_dir, dataset, method, k, base_seed, h)
        if not path.exists() or not path.with_suffix(".json").exists():
            return None
        meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        heads.append(SampleSet(k, load_pairs(path), SamplerConfig(**meta["config"]), meta["status"]))
    return HeadSampleSet(k, heads)
