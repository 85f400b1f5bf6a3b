"""Training loop, metrics, oversmoothing diagnostic and significance testing."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import autodiff as ad
from .graph import Graph, LabeledSplit

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.005
    weight_decay: float = 5e-4
    max_epochs: int = 500
    patience: int = 100
    seed: int = 0
    repetitions: int = 20

    def __post_init__(self):
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning rate and weight decay must be non-negative")
        if self.max_epochs < 1 or self.patience < 1 or self.repetitions < 1:
            raise ValueError("max_epochs, patience and repetitions must be >= 1")


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float = 0.0
    test_acc: float = 0.0
    dirichlet: list[float] = field(default_factory=list)
    seconds: float = 0.0
    status: str = "ok"
    config: dict = field(default_factory=dict)

    @property
    def epochs(self) -> int:
        return len(self.train_loss)

    def to_dict(self) -> dict:
        return asdict(self)


class AdamW:
    """Adam with bias correction and decoupled weight decay."""

    def __init__(self, params, lr=0.005, weight_decay=5e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr, self.weight_decay, self.eps = lr, weight_decay, eps
        self.b1, self.b2 = betas
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            p.value *= 1.0 - self.lr * self.weight_decay
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def accuracy(logits, labels, mask) -> float:
    """Fraction of masked nodes whose argmax (lowest index on ties) is the label."""
    rows = np.flatnonzero(mask)
    if rows.size == 0:
        raise ValueError("empty mask")
    z = logits.value if isinstance(logits, ad.Tensor) else np.asarray(logits)
    return float(np.mean(np.argmax(z[rows], axis=1) == np.asarray(labels)[rows]))


def dirichlet_energy(x, g: Graph) -> float:
    """Half the sum of squared feature differences over undirected edges."""
    x = np.asarray(x.value if isinstance(x, ad.Tensor) else x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    e = g.edge_list()
    return 0.5 * float(np.sum((x[e[:, 0]] - x[e[:, 1]]) ** 2))


def _exact_upper_tail(ranks2: np.ndarray, w2: int) -> tuple[float, float]:
    """P(W >= w) and P(W <= w) under the sign-flip null, on doubled ranks."""
    counts = np.zeros(int(ranks2.sum()) + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in ranks2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:len(counts) - r]
        counts = counts + shifted
    counts /= 2.0 ** len(ranks2)
    return float(counts[w2:].sum()), float(counts[:w2 + 1].sum())


def wilcoxon_signed_rank(a, b, exact_max: int = 25) -> float:
    """Two-sided paired signed-rank test p-value.

    Zero differences are dropped and tied magnitudes get averaged ranks. The
    null distribution is enumerated exactly for up to ``exact_max`` non-zero
    differences; above that a tie-corrected normal approximation is used.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("need two equal-length 1-d sequences")
    if len(a) < 5:
        raise ValueError("need at least 5 pairs")
    d = a - b
    d = d[np.round(np.abs(d), 12) != 0]
    n = len(d)
    if n == 0:
        return 1.0
    ranks = rankdata(np.round(np.abs(d), 12))
    w = ranks[d > 0].sum()
    if n <= exact_max:
        ranks2 = np.rint(2 * ranks).astype(np.int64)
        hi, lo = _exact_upper_tail(ranks2, int(round(2 * w)))
        return min(1.0, 2.0 * min(hi, lo))
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts ** 3 - tie_counts) / 48.0
    z = (w - mean) / math.sqrt(var)
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


def aggregate_runs(reports) -> tuple[float, float]:
    """Mean and Bessel-corrected standard deviation of test accuracies."""
    accs = np.array([r.test_acc if isinstance(r, TrainReport) else r for r in reports], dtype=np.float64)
    if len(accs) < 2:
        raise ValueError("need at least two runs for a standard deviation")
    return float(accs.mean()), float(accs.std(ddof=1))


def train(model, graph: Graph, features, split: LabeledSplit, blocks, cfg: TrainConfig = TrainConfig(),
          echo: dict | None = None) -> TrainReport:
    """Fit ``model`` on the training mask, selecting on validation accuracy.

    The returned test accuracy and Dirichlet energies belong to the epoch
    with the highest validation accuracy (earliest on ties).
    """
    start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    opt = AdamW(params, lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    labels = split.labels
    report = TrainReport(best_val_acc=-1.0, config={**asdict(cfg), **(echo or {})})
    try:
        for epoch in range(1, cfg.max_epochs + 1):
            with ad.Tape() as tape:
                logits = model.forward(features, blocks, training=True, rng=rng)
                loss = ad.nll_from_log_softmax(logits, labels, split.train_mask)
            opt.step(ad.backward(tape, loss, params))

            hidden: list = []
            logits = model.forward(features, blocks, training=False, hidden=hidden)
            report.train_loss.append(float(loss.value))
            report.val_loss.append(float(ad.nll_from_log_softmax(logits, labels, split.val_mask).value))
            report.train_acc.append(accuracy(logits, labels, split.train_mask))
            val = accuracy(logits, labels, split.val_mask)
            report.val_acc.append(val)
            if val > report.best_val_acc:
                report.best_val_acc, report.best_epoch = val, epoch
                report.test_acc = accuracy(logits, labels, split.test_mask)
                report.dirichlet = [dirichlet_energy(h, graph) for h in hidden]
            elif epoch - report.best_epoch >= cfg.patience:
                break
    except ad.NonFiniteError as exc:
        logger.error("training diverged: %s", exc)
        report.status = "diverged"
    report.best_val_acc = max(report.best_val_acc, 0.0)
    report.seconds = time.perf_counter() - start
    return report
