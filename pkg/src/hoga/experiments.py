"""Reproducible experiment runs: splits, sample caching, repeated training and
the ablation sweeps, all emitting tidy CSV."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import Dataset, LabeledSplit, branching_factor, load_dataset, preprocess_features, split_from_ids
from .khop import bfs_distances, count_khop_pairs
from .models import GrandConfig, HogaConfig, HogaGAT, HogaGRAND, prepare_edges
from .sampler import METHODS, SamplerConfig, load_cached, sample_heads, save_cached
from .train import TrainConfig, TrainReport, aggregate_runs, train, wilcoxon_signed_rank

logger = logging.getLogger(__name__)

MODELS = ("gat", "hoga-gat", "grand", "hoga-grand")
RUN_COLUMNS = ["seed", "model", "dataset", "sampler", "K", "layers", "test_acc", "best_val_acc",
               "epochs", "seconds"]


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "public"  # "public" falls back to random when no splits.json exists
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("public", "random"):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if abs(sum(self.fractions) - 1.0) > 1e-9 or min(self.fractions) < 0:
            raise ValueError("split fractions must be non-negative and sum to 1")


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: str
    model: str = "hoga-gat"
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    hoga: HogaConfig = field(default_factory=HogaConfig)
    grand: GrandConfig = field(default_factory=GrandConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    seeds: tuple[int, ...] = tuple(range(20))
    out: str = "runs"
    cache_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.model in ("gat", "grand") and self.hoga.K != 1:
            object.__setattr__(self, "hoga", replace(self.hoga, K=1))
        if not self.seeds:
            raise ValueError("at least one seed is required")

    @property
    def K(self) -> int:
        return self.hoga.K

    def flat(self) -> dict:
        """Effective configuration flattened into CSV-friendly columns."""
        out = {"dataset_path": self.dataset, "model": self.model}
        for prefix, cfg in (("sampler", self.sampler), ("hoga", self.hoga), ("grand", self.grand),
                            ("train", self.train), ("split", self.split)):
            for key, value in asdict(cfg).items():
                if prefix == "train" and key == "seed":
                    continue
                if prefix == "sampler" and key == "seed":
                    continue
                out[f"{prefix}.{key}"] = "/".join(map(str, value)) if isinstance(value, tuple) else value
        return out


def make_random_split(n: int, fractions=(0.6, 0.2, 0.2), seed: int = 0):
    """Seeded uniform shuffle cut at rounded cumulative fractions.

    Returns boolean ``(train, val, test)`` masks.
    """
    if n < 5:
        raise ValueError("need at least 5 nodes to split")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    perm = np.random.default_rng(seed).permutation(n)
    cuts = [int(math.floor(c * n + 0.5)) for c in np.cumsum(fractions)[:-1]]
    masks = []
    for part in np.split(perm, cuts):
        m = np.zeros(n, dtype=bool)
        m[part] = True
        masks.append(m)
    return tuple(masks)


def resolve_split(data: Dataset, split: SplitSpec) -> LabeledSplit:
    if split.mode == "public" and data.splits is not None:
        return split_from_ids(data.labels, data.splits)
    if split.mode == "public":
        logger.info("%s has no splits.json; using a random split", data.name)
    return LabeledSplit(data.labels, *make_random_split(len(data.labels), split.fractions, split.seed))


def model_features(data: Dataset):
    """L1-normalised features, stored sparse when mostly zero."""
    x = preprocess_features(data.features)
    return sp.csr_matrix(x) if np.count_nonzero(x) < 0.1 * x.size else x


def build_model(spec: ExperimentSpec, in_dim: int, num_classes: int, seed: int):
    if spec.model in ("gat", "hoga-gat"):
        return HogaGAT(in_dim, num_classes, spec.hoga, seed=seed)
    return HogaGRAND(in_dim, num_classes, spec.hoga, spec.grand, seed=seed)


def heads_needed(spec: ExperimentSpec) -> int:
    return spec.hoga.heads_first_layer


def get_samples(spec: ExperimentSpec, data: Dataset, seed: int) -> dict:
    """Sample sets for k = 2..K, read from the cache when available."""
    samples = {}
    features = preprocess_features(data.features)
    cfg = replace(spec.sampler, seed=seed)
    for k in range(2, spec.K + 1):
        heads = None
        if spec.cache_dir:
            heads = load_cached(spec.cache_dir, data.name, cfg.method, k, seed, heads_needed(spec))
        if heads is None:
            heads = sample_heads(data.graph, features, k, cfg, heads_needed(spec))
            if spec.cache_dir:
                save_cached(spec.cache_dir, data.name, heads, seed)
        samples[k] = heads
    return samples


def run_seed(spec: ExperimentSpec, data: Dataset, seed: int) -> TrainReport:
    """One repetition: sample, initialise with ``seed``, train, evaluate."""
    split = resolve_split(data, spec.split)
    x = model_features(data)
    blocks = prepare_edges(data.graph, get_samples(spec, data, seed), spec.K)
    model = build_model(spec, x.shape[1], data.num_classes, seed)
    cfg = replace(spec.train, seed=seed)
    return train(model, data.graph, x, split, blocks, cfg, echo={"seed": seed, **spec.flat()})


def run_seeds(spec: ExperimentSpec, data: Dataset) -> list[TrainReport]:
    """Run every seed (in parallel when ``workers > 1``), ordered by seed."""
    if spec.workers > 1 and len(spec.seeds) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            return list(pool.map(run_seed, [spec] * len(spec.seeds), [data] * len(spec.seeds), spec.seeds))
    return [run_seed(spec, data, s) for s in spec.seeds]


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(path, rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns: list[str] = []
    for row in rows:
        columns.extend(c for c in row if c not in columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    return path


def read_test_accs(path) -> list[float]:
    """Per-seed test accuracies from a run CSV (aggregate rows skipped)."""
    with open(path, newline="", encoding="utf-8") as fh:
        return [float(r["test_acc"]) for r in csv.DictReader(fh) if r["seed"].lstrip("-").isdigit()]


def _run_row(spec: ExperimentSpec, data: Dataset, seed: int, r: TrainReport) -> dict:
    return {"seed": seed, "model": spec.model, "dataset": data.name, "sampler": spec.sampler.method,
            "K": spec.K, "layers": spec.hoga.layers, "test_acc": r.test_acc, "best_val_acc": r.best_val_acc,
            "epochs": r.epochs, "seconds": round(r.seconds, 3), "status": r.status,
            "best_epoch": r.best_epoch, **spec.flat()}


def _summary(reports: list[TrainReport]) -> tuple[float, float]:
    if len(reports) == 1:
        return reports[0].test_acc, float("nan")
    return aggregate_runs(reports)


def load(spec: ExperimentSpec) -> Dataset:
    return load_dataset(spec.dataset)


def cmd_sample(spec: ExperimentSpec, data: Dataset | None = None, spot_checks: int = 50) -> list[dict]:
    """Materialise S_k for every k in 2..K, head and seed into the cache."""
    data = data or load(spec)
    cache = spec.cache_dir or str(Path(spec.out) / "cache")
    features = preprocess_features(data.features)
    out = []
    for seed in spec.seeds:
        cfg = replace(spec.sampler, seed=seed)
        for k in range(2, spec.K + 1):
            heads = sample_heads(data.graph, features, k, cfg, heads_needed(spec))
            paths = save_cached(cache, data.name, heads, seed)
            rng = np.random.default_rng(seed)
            ok = True
            for s in heads.heads:
                if len(s) > min(data.graph.num_edges, cfg.edge_cap):
                    ok = False
                picks = rng.choice(len(s), size=min(spot_checks, len(s)), replace=False) if len(s) else []
                for i, j in s.pairs[picks]:
                    ok &= bool(bfs_distances(data.graph, int(i), k)[j] == k)
            row = {"seed": seed, "k": k, "sizes": [len(s) for s in heads.heads],
                   "status": [s.status for s in heads.heads], "verified": ok, "files": [str(p) for p in paths]}
            print(f"seed={seed} k={k} sizes={row['sizes']} verified={'ok' if ok else 'FAILED'}")
            out.append(row)
    return out


def cmd_train(spec: ExperimentSpec, data: Dataset | None = None, baseline_csv=None,
              name: str = "train") -> list[dict]:
    """Repeated runs: one CSV row per seed plus an aggregate row; per-run JSON."""
    data = data or load(spec)
    reports = run_seeds(spec, data)
    out = Path(spec.out)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    rows = []
    for seed, r in zip(spec.seeds, reports):
        tag = f"{name}_{spec.model}_{spec.sampler.method}_K{spec.K}_L{spec.hoga.layers}_seed{seed}"
        (out / "runs" / f"{tag}.json").write_text(json.dumps(r.to_dict(), indent=1, sort_keys=True),
                                                  encoding="utf-8")
        rows.append(_run_row(spec, data, seed, r))
    mean, std = _summary(reports)
    agg = {"seed": "aggregate", "model": spec.model, "dataset": data.name, "sampler": spec.sampler.method,
           "K": spec.K, "layers": spec.hoga.layers, "test_acc": mean, "test_acc_std": std}
    if baseline_csv is not None:
        base = read_test_accs(baseline_csv)
        agg["p_value"] = wilcoxon_signed_rank([r.test_acc for r in reports], base)
    rows.append(agg)
    write_csv(out / f"{name}.csv", rows)
    print(f"{data.name} {spec.model} K={spec.K}: {100 * mean:.1f} ± {100 * std:.1f}")
    return rows


def _sweep_row(spec: ExperimentSpec, data: Dataset, reports: list[TrainReport], **extra) -> dict:
    mean, std = _summary(reports)
    energies = [r.dirichlet[-1] if r.dirichlet else float("nan") for r in reports]
    return {**extra, "model": spec.model, "dataset": data.name, "sampler": spec.sampler.method,
            "K": spec.K, "layers": spec.hoga.layers, "mean_test_acc": mean, "std_test_acc": std,
            "runs": len(reports), "mean_dirichlet": float(np.mean(energies)),
            "test_accs": "/".join(repr(r.test_acc) for r in reports), **spec.flat()}


def cmd_ablate_k(spec: ExperimentSpec, k_values, data: Dataset | None = None) -> list[dict]:
    """Accuracy as a function of the maximum hop K (shared seeds)."""
    data = data or load(spec)
    rows = []
    for K in k_values:
        s = replace(spec, hoga=replace(spec.hoga, K=int(K)))
        rows.append(_sweep_row(s, data, run_seeds(s, data)))
        print(f"K={K}: {100 * rows[-1]['mean_test_acc']:.1f}")
    write_csv(Path(spec.out) / "ablate_k.csv", rows)
    return rows


def cmd_ablate_depth(spec: ExperimentSpec, layer_values, data: Dataset | None = None) -> list[dict]:
    """Accuracy and final hidden-layer Dirichlet energy against depth.

    For the GRAND models depth is the number of Euler steps.
    """
    data = data or load(spec)
    rows = []
    for L in layer_values:
        L = int(L)
        if spec.model in ("grand", "hoga-grand"):
            s = replace(spec, grand=replace(spec.grand, integration_time=L * spec.grand.step_size),
                        hoga=replace(spec.hoga, layers=L))
        else:
            s = replace(spec, hoga=replace(spec.hoga, layers=L))
        rows.append(_sweep_row(s, data, run_seeds(s, data)))
        print(f"layers={L}: {100 * rows[-1]['mean_test_acc']:.1f}  energy={rows[-1]['mean_dirichlet']:.4g}")
    write_csv(Path(spec.out) / "ablate_depth.csv", rows)
    return rows


def cmd_compare_samplers(spec: ExperimentSpec, methods, data: Dataset | None = None) -> list[dict]:
    """One aggregate row per sampler under shared seeds, with Wilcoxon p-values
    of the heuristic walk (or the first method) against each other method."""
    data = data or load(spec)
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown sampler {m!r}")
    results, rows = [], []
    for m in methods:
        s = replace(spec, sampler=replace(spec.sampler, method=m))
        results.append(run_seeds(s, data))
        rows.append(_sweep_row(s, data, results[-1]))
    ref = methods.index("heuristic-walk") if "heuristic-walk" in methods else 0
    ref_accs = [r.test_acc for r in results[ref]]
    for i, (row, m) in enumerate(zip(rows, methods)):
        if i != ref and len(ref_accs) >= 5:
            row["p_value_vs_" + methods[ref]] = wilcoxon_signed_rank(ref_accs, [r.test_acc for r in results[i]])
        print(f"{m}: {100 * row['mean_test_acc']:.1f} ± {100 * row['std_test_acc']:.1f}")
    write_csv(Path(spec.out) / "compare_samplers.csv", rows)
    return rows


def cmd_khop_stats(spec: ExperimentSpec, data: Dataset | None = None) -> list[dict]:
    data = data or load(spec)
    b = branching_factor(data.graph)
    rows = []
    for k in range(1, spec.K + 1):
        size = count_khop_pairs(data.graph, k)
        rows.append({"k": k, "pairs": size, "branching_factor": b})
        print(f"k={k}\t|E_k|={size}\tb={b:.4f}")
    return rows
