"""Command-line entry point (``hoga <subcommand> ...``).

Exit codes: 0 success, 2 configuration error, 3 dataset error,
4 numerical divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .autodiff import NonFiniteError
from .experiments import (MODELS, ExperimentSpec, SplitSpec, cmd_ablate_depth, cmd_ablate_k,
                          cmd_compare_samplers, cmd_khop_stats, cmd_sample, cmd_train)
from .graph import DatasetError
from .models import GrandConfig, HogaConfig
from .sampler import METHODS, SamplerConfig
from .train import TrainConfig

EXIT_CONFIG, EXIT_DATASET, EXIT_DIVERGED = 2, 3, 4


def _ints(text: str) -> list[int]:
    """Parse ``0,1,2`` or a range ``0-19``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else (part, part)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dataset", required=True, help="dataset directory")
    common.add_argument("--model", choices=MODELS, default="hoga-gat")
    common.add_argument("--sampler", choices=METHODS, default="heuristic-walk")
    common.add_argument("--k-max", type=int, default=3)
    common.add_argument("--layers", type=int, default=2)
    common.add_argument("--heads", type=int, default=8, help="heads in the first layer")
    common.add_argument("--heads-rest", type=int, default=1)
    common.add_argument("--hidden", type=int, default=64)
    common.add_argument("--dropout", type=float, default=0.6)
    common.add_argument("--seeds", type=_ints, default=list(range(20)), help="e.g. 0-19 or 0,3,7")
    common.add_argument("--gamma", type=float, default=0.9)
    common.add_argument("--jump-prob", type=float, default=0.05)
    common.add_argument("--edge-cap", type=int, default=90000)
    common.add_argument("--history-size", type=int, default=16)
    common.add_argument("--lr", type=float, default=0.005)
    common.add_argument("--weight-decay", type=float, default=5e-4)
    common.add_argument("--epochs", type=int, default=500)
    common.add_argument("--patience", type=int, default=100)
    common.add_argument("--split", choices=("public", "random"), default="public")
    common.add_argument("--split-seed", type=int, default=0)
    common.add_argument("--out", default="runs")
    common.add_argument("--cache-dir", default=None)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--grand-time", type=float, default=4.0)
    common.add_argument("--grand-step", type=float, default=0.5)
    common.add_argument("--grand-literal", action="store_true",
                        help="integrate dx/dt = A x instead of the diffusive form")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hoga", description="Higher-order graph attention experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="materialise k-hop samples into the cache")
    p = sub.add_parser("train", parents=[common], help="repeated training runs")
    p.add_argument("--baseline-csv", default=None, help="run CSV to test against (Wilcoxon)")
    p = sub.add_parser("ablate-k", parents=[common], help="accuracy against maximum hop K")
    p.add_argument("--k-values", type=_ints, default=[1, 2, 3, 4, 5])
    p = sub.add_parser("ablate-depth", parents=[common], help="accuracy against depth")
    p.add_argument("--layer-values", type=_ints, default=[2, 4, 8])
    p = sub.add_parser("compare-samplers", parents=[common], help="one row per sampler")
    p.add_argument("--methods", default=",".join(METHODS))
    sub.add_parser("khop-stats", parents=[common], help="print |E_k| and branching factor")
    return parser


def spec_from_args(args) -> ExperimentSpec:
    return ExperimentSpec(
        dataset=args.dataset,
        model=args.model,
        sampler=SamplerConfig(method=args.sampler, gamma=args.gamma, jump_prob=args.jump_prob,
                              edge_cap=args.edge_cap, history_size=args.history_size),
        hoga=HogaConfig(K=args.k_max, heads_first_layer=args.heads, heads_rest=args.heads_rest,
                        layers=args.layers, hidden_dim=args.hidden, dropout=args.dropout),
        grand=GrandConfig(integration_time=args.grand_time, step_size=args.grand_step,
                          diffusive=not args.grand_literal),
        train=TrainConfig(learning_rate=args.lr, weight_decay=args.weight_decay,
                          max_epochs=args.epochs, patience=args.patience),
        split=SplitSpec(mode=args.split, seed=args.split_seed),
        seeds=tuple(args.seeds),
        out=args.out,
        cache_dir=args.cache_dir,
        workers=args.workers,
    )


def run(args) -> list[dict]:
    spec = spec_from_args(args)
    if args.command == "sample":
        return cmd_sample(spec)
    if args.command == "train":
        return cmd_train(spec, baseline_csv=args.baseline_csv)
    if args.command == "ablate-k":
        return cmd_ablate_k(spec, args.k_values)
    if args.command == "ablate-depth":
        return cmd_ablate_depth(spec, args.layer_values)
    if args.command == "compare-samplers":
        return cmd_compare_samplers(spec, [m.strip() for m in args.methods.split(",") if m.strip()])
    return cmd_khop_stats(spec)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rows = run(args)
    except DatasetError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except NonFiniteError as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if any(r.get("status") == "diverged" for r in rows if isinstance(r, dict)):
        return EXIT_DIVERGED
    return 0


if __name__ == "__main__":
    sys.exit(main())
