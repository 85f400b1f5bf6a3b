"""Convert the raw Planetoid pickles (``ind.<name>.x`` and friends) into the
dataset directory layout read by :func:`hoga.graph.load_dataset`.

The raw files are not shipped; fetch them yourself and point
:func:`convert_planetoid` at the folder holding them.
"""

from __future__ import annotations

import pickle
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import DatasetError, save_dataset

PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")


def _load(path: Path):
    with open(path, "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def convert_planetoid(raw_dir, name: str, out_dir) -> Path:
    """Write ``edges.txt``, ``features.csv``, ``labels.txt`` and the public
    ``splits.json`` (first labelled rows for training, the next 500 for
    validation, the listed test indices for testing)."""
    raw_dir = Path(raw_dir)
    try:
        x, y, tx, ty, allx, ally, graph = (_load(raw_dir / f"ind.{name}.{p}") for p in PARTS)
        test_idx = np.loadtxt(raw_dir / f"ind.{name}.test.index", dtype=np.int64, ndmin=1)
    except (OSError, pickle.UnpicklingError) as exc:
        raise DatasetError(f"cannot read Planetoid files for {name!r} in {raw_dir}: {exc}") from exc

    tx, ty = sp.csr_matrix(tx), np.asarray(ty)
    order = np.sort(test_idx)
    lo, hi = order[0], order[-1]
    if hi - lo + 1 != tx.shape[0]:
        # some test nodes are isolated and missing from tx/ty; pad with zero rows
        full_tx = sp.lil_matrix((hi - lo + 1, tx.shape[1]))
        full_tx[order - lo] = tx
        full_ty = np.zeros((hi - lo + 1, ty.shape[1]))
        full_ty[order - lo] = ty
        tx, ty = full_tx.tocsr(), full_ty

    feats = sp.vstack([sp.csr_matrix(allx), tx]).tolil()
    labels = np.vstack([np.asarray(ally), ty])
    # raw test rows are stored in sorted-index order; move them to their nodes
    feats[test_idx] = feats[order]
    labels[test_idx] = labels[order]

    n = feats.shape[0]
    edges = sorted({(min(u, v), max(u, v)) for u, nbrs in graph.items() for v in nbrs
                    if u != v and u < n and v < n})
    val_end = min(len(y) + 500, allx.shape[0])
    splits = {"train": list(range(len(y))), "val": list(range(len(y), val_end)),
              "test": sorted(test_idx.tolist())}
    out = Path(out_dir)
    save_dataset(out, edges, feats.toarray(), labels.argmax(axis=1), splits)
    return out
