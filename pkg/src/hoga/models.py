"""Multi-hop attention layers and the two host models built on them.

Each order k has its own attention block: pairs at distance k are scored by
the GAT scorer ``leaky_relu(aᵀ[W x_i ‖ W x_j])``, normalised per destination
node, and used to aggregate transformed features. Blocks are averaged over
heads and combined with harmonic weights ``1/k``.

``HogaGAT`` stacks such layers with per-layer parameters. ``HogaGRAND``
integrates an attention diffusion with forward Euler, sharing one set of
attention parameters across all steps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tensor
from .graph import Graph
from .sampler import HeadSampleSet, SampleSet


def beta(k: int) -> float:
    """Hop weight: the harmonic series ``1/k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return 1.0 / k


@dataclass(frozen=True)
class HogaConfig:
    K: int = 3
    heads_first_layer: int = 8
    heads_rest: int = 1
    layers: int = 2
    hidden_dim: int = 64
    dropout: float = 0.6
    beta: str = "harmonic"
    slope: float = 0.2

    def __post_init__(self):
        if self.K < 1 or self.layers < 1 or self.heads_first_layer < 1 or self.heads_rest < 1:
            raise ValueError("K, layers and head counts must be >= 1")
        if self.beta != "harmonic":
            raise ValueError(f"unsupported beta {self.beta!r}")

    def heads(self, layer: int) -> int:
        return self.heads_first_layer if layer == 0 else self.heads_rest


@dataclass(frozen=True)
class GrandConfig:
    integration_time: float = 4.0
    step_size: float = 0.5
    diffusive: bool = True  # False integrates dx/dt = A x literally
    shared_attention: bool = True

    def __post_init__(self):
        if self.integration_time <= 0 or not 0 < self.step_size <= self.integration_time:
            raise ValueError("need T > 0 and 0 < step <= T")

    @property
    def steps(self) -> int:
        return math.ceil(self.integration_time / self.step_size - 1e-12)


@dataclass(frozen=True)
class AttentionEdges:
    """Directed (dst, src) pairs of one attention block, sorted by dst then src."""

    dst: np.ndarray
    src: np.ndarray
    num_nodes: int

    @property
    def indptr(self) -> np.ndarray:
        ptr = self.__dict__.get("_indptr")
        if ptr is None:
            ptr = np.zeros(self.num_nodes + 1, dtype=np.int64)
            np.cumsum(np.bincount(self.dst, minlength=self.num_nodes), out=ptr[1:])
            object.__setattr__(self, "_indptr", ptr)
        return ptr

    @classmethod
    def from_pairs(cls, pairs, num_nodes: int, include_self: bool) -> "AttentionEdges":
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        dst = np.concatenate([pairs[:, 0], pairs[:, 1]])
        src = np.concatenate([pairs[:, 1], pairs[:, 0]])
        if include_self:
            nodes = np.arange(num_nodes)
            dst, src = np.concatenate([dst, nodes]), np.concatenate([src, nodes])
        key = np.unique(dst * num_nodes + src)
        return cls(key // num_nodes, key % num_nodes, num_nodes)

    def covered(self) -> np.ndarray:
        """Boolean mask of nodes that own at least one entry."""
        mask = np.zeros(self.num_nodes, dtype=bool)
        mask[self.dst] = True
        return mask


@dataclass
class AttentionHeadParams:
    weight: Tensor  # d_in x d_out
    attn: Tensor    # 2 * d_out


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_head(rng: np.random.Generator, d_in: int, d_out: int, name: str) -> AttentionHeadParams:
    return AttentionHeadParams(
        ad.parameter(_glorot(rng, d_in, d_out, (d_in, d_out)), f"{name}.W"),
        ad.parameter(_glorot(rng, 2 * d_out, 1, (2 * d_out,)), f"{name}.a"),
    )


def prepare_edges(g: Graph, samples: dict, K: int) -> dict[int, list[AttentionEdges]]:
    """Turn sample sets into attention edge blocks for orders ``1..K``.

    Order 1 always uses the full edge set plus self-loops. Orders >= 2 need
    an entry in ``samples`` (a SampleSet, HeadSampleSet or raw pair array).
    """
    blocks = {1: [AttentionEdges.from_pairs(g.edge_list(), g.num_nodes, include_self=True)]}
    for k in range(2, K + 1):
        if k not in samples:
            raise KeyError(f"no sample set for k={k}")
        s = samples[k]
        if isinstance(s, HeadSampleSet):
            sets = [h.pairs for h in s.heads]
        elif isinstance(s, SampleSet):
            sets = [s.pairs]
        else:
            sets = [np.asarray(s)]
        blocks[k] = [AttentionEdges.from_pairs(p, g.num_nodes, include_self=False) for p in sets]
    return blocks


def attention_coefficients(params: AttentionHeadParams, x, edges, include_self: bool = False,
                           slope: float = 0.2, h: Tensor | None = None) -> Tensor:
    """Per-edge attention weights, normalised over each destination's entries.

    ``edges`` may be an :class:`AttentionEdges` or a pair list/SampleSet, in
    which case it is symmetrically expanded (plus self-loops if requested).
    """
    if not isinstance(edges, AttentionEdges):
        pairs = edges.pairs if isinstance(edges, SampleSet) else edges
        edges = AttentionEdges.from_pairs(pairs, x.shape[0], include_self)
    if h is None:
        h = ad.matmul(x, params.weight)
    raw = ad.leaky_relu(ad.edge_scores(h, params.attn, edges.dst, edges.src), slope)
    return ad.segment_softmax(raw, edges.dst, edges.num_nodes)


def _block_message(params: AttentionHeadParams, x: Tensor, edges: AttentionEdges, slope: float,
                   transform_values: bool) -> Tensor:
    h = ad.matmul(x, params.weight)
    if len(edges.dst) == 0:
        return ad.scale(h if transform_values else x, 0.0)
    alpha = attention_coefficients(params, x, edges, slope=slope, h=h)
    return ad.weighted_scatter(alpha, edges.dst, edges.src, h if transform_values else x, edges.indptr)


def hoga_combine(x: Tensor, per_k, slope: float = 0.2, final: bool = False,
                 transform_values: bool = True) -> Tensor:
    """``sum_k beta(k) * mean_h A_{k,h} (x W_{k,h})``, followed by ELU unless ``final``.

    ``per_k`` is a sequence of ``(k, edges_per_head, params_per_head)``; head
    ``h`` uses ``edges_per_head[h % len(edges_per_head)]``.
    """
    out = None
    for k, edge_sets, heads in per_k:
        acc = None
        for h, params in enumerate(heads):
            m = _block_message(params, x, edge_sets[h % len(edge_sets)], slope, transform_values)
            acc = m if acc is None else ad.add(acc, m)
        term = ad.scale(acc, beta(k) / len(heads))
        out = term if out is None else ad.add(out, term)
    if out is None:
        raise ValueError("hoga_combine needs at least one order")
    return out if final else ad.elu(out)


class _Model:
    params: dict[str, Tensor]

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def parameter_count(self) -> int:
        return sum(p.value.size for p in self.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: dict) -> None:
        for name, p in self.params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.value.shape:
                raise ValueError(f"{name}: expected shape {p.value.shape}, got {value.shape}")
            p.value[...] = value


def parameter_count(model: _Model) -> int:
    return model.parameter_count()


def _input_tensor(x0) -> Tensor:
    if isinstance(x0, Tensor):
        return x0
    if sp.issparse(x0):
        return Tensor(x0)
    return Tensor(np.asarray(x0, dtype=np.float64))


class HogaGAT(_Model):
    """Stacked multi-hop attention layers; ``K=1`` is a plain GAT with averaged heads."""

    def __init__(self, in_dim: int, num_classes: int, cfg: HogaConfig = HogaConfig(), seed: int = 0):
        if cfg.layers < 2:
            raise ValueError("HogaGAT needs at least 2 layers")
        self.cfg = cfg
        self.in_dim, self.num_classes = in_dim, num_classes
        rng = np.random.default_rng(seed)
        dims = [in_dim] + [cfg.hidden_dim] * (cfg.layers - 1) + [num_classes]
        self.heads: dict[tuple[int, int], list[AttentionHeadParams]] = {}
        self.params = {}
        for t in range(cfg.layers):
            for k in range(1, cfg.K + 1):
                block = []
                for h in range(cfg.heads(t)):
                    name = f"layer{t}.k{k}.head{h}"
                    hp = init_head(rng, dims[t], dims[t + 1], name)
                    self.params[f"{name}.W"], self.params[f"{name}.a"] = hp.weight, hp.attn
                    block.append(hp)
                self.heads[t, k] = block

    def forward(self, x0, blocks: dict[int, list[AttentionEdges]], training: bool = False,
                rng: np.random.Generator | None = None, hidden: list | None = None) -> Tensor:
        """Logits for every node. Intermediate layer outputs are appended to
        ``hidden`` (as arrays) when a list is given."""
        cfg = self.cfg
        x = ad.dropout(_input_tensor(x0), cfg.dropout, rng, training)
        for t in range(cfg.layers):
            final = t == cfg.layers - 1
            if t > 0:
                x = ad.dropout(x, cfg.dropout, rng, training)
            per_k = [(k, blocks[k], self.heads[t, k]) for k in range(1, cfg.K + 1)]
            x = hoga_combine(x, per_k, cfg.slope, final=final)
            if hidden is not None:
                hidden.append(x.value)
        return x


def hoga_gat_forward(model: HogaGAT, x0, blocks, training=False, rng=None) -> Tensor:
    return model.forward(x0, blocks, training, rng)


class HogaGRAND(_Model):
    """Encoder, forward-Euler attention diffusion with shared parameters, decoder."""

    def __init__(self, in_dim: int, num_classes: int, cfg: HogaConfig = HogaConfig(),
                 gcfg: GrandConfig = GrandConfig(), seed: int = 0):
        self.cfg, self.gcfg = cfg, gcfg
        self.in_dim, self.num_classes = in_dim, num_classes
        rng = np.random.default_rng(seed)
        d = cfg.hidden_dim
        self.params = {
            "encoder.W": ad.parameter(_glorot(rng, in_dim, d, (in_dim, d)), "encoder.W"),
            "encoder.b": ad.parameter(np.zeros(d), "encoder.b"),
        }
        self.heads: dict[int, list[AttentionHeadParams]] = {}
        for k in range(1, cfg.K + 1):
            block = []
            for h in range(cfg.heads_first_layer):
                name = f"layer0.k{k}.head{h}"
                hp = init_head(rng, d, d, name)
                self.params[f"{name}.W"], self.params[f"{name}.a"] = hp.weight, hp.attn
                block.append(hp)
            self.heads[k] = block
        self.params["decoder.W"] = ad.parameter(_glorot(rng, d, num_classes, (d, num_classes)), "decoder.W")
        self.params["decoder.b"] = ad.parameter(np.zeros(num_classes), "decoder.b")

    def row_mass(self, blocks: dict[int, list[AttentionEdges]]) -> np.ndarray:
        """Row sums of the combined operator; fixed by structure, not by parameters."""
        n = blocks[1][0].num_nodes
        mass = np.zeros(n)
        for k in range(1, self.cfg.K + 1):
            heads = len(self.heads[k])
            sets = blocks[k]
            cover = sum(sets[h % len(sets)].covered().astype(float) for h in range(heads))
            mass += beta(k) * cover / heads
        return mass

    def derivative(self, x: Tensor, blocks, inv_mass: np.ndarray | None) -> Tensor:
        per_k = [(k, blocks[k], self.heads[k]) for k in range(1, self.cfg.K + 1)]
        ax = hoga_combine(x, per_k, self.cfg.slope, final=True, transform_values=False)
        if inv_mass is None:
            return ax
        ax = ad.mul(ax, np.repeat(inv_mass[:, None], x.shape[1], axis=1))
        return ad.sub(ax, x)

    def forward(self, x0, blocks: dict[int, list[AttentionEdges]], training: bool = False,
                rng: np.random.Generator | None = None, hidden: list | None = None) -> Tensor:
        cfg = self.cfg
        x = ad.dropout(_input_tensor(x0), cfg.dropout, rng, training)
        x = ad.add(ad.matmul(x, self.params["encoder.W"]), self.params["encoder.b"])
        x = self.integrate(x, blocks, hidden)
        x = ad.dropout(x, cfg.dropout, rng, training)
        return ad.add(ad.matmul(x, self.params["decoder.W"]), self.params["decoder.b"])

    def integrate(self, x: Tensor, blocks, hidden: list | None = None, steps: int | None = None) -> Tensor:
        """Forward-Euler steps of the attention flow starting from encoded ``x``."""
        gcfg = self.gcfg
        inv_mass = 1.0 / self.row_mass(blocks) if gcfg.diffusive else None
        for _ in range(gcfg.steps if steps is None else steps):
            x = ad.add(x, ad.scale(self.derivative(x, blocks, inv_mass), gcfg.step_size))
            if not np.all(np.isfinite(x.value)):
                raise ad.NonFiniteError("GRAND state diverged")
            if hidden is not None:
                hidden.append(x.value)
        return x


def hoga_grand_forward(model: HogaGRAND, x0, blocks, training=False, rng=None) -> Tensor:
    return model.forward(x0, blocks, training, rng)


def save_checkpoint(model: _Model, path) -> None:
    data = {name: {"shape": list(p.value.shape), "values": p.value.reshape(-1).tolist()}
            for name, p in model.params.items()}
    Path(path).write_text(json.dumps(data), encoding="utf-8")


def load_checkpoint(model: _Model, path) -> None:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    model.load_state_dict({name: np.reshape(v["values"], v["shape"]) for name, v in data.items()})
