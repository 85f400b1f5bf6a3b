import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from hoga.graph import LabeledSplit, build_graph
from hoga.models import HogaConfig, HogaGAT, HogaGRAND, GrandConfig, prepare_edges
from hoga.sampler import SamplerConfig, sample_heads
from hoga.toy import path_graph, two_cluster
from hoga.train import (AdamW, TrainConfig, TrainReport, accuracy, aggregate_runs, dirichlet_energy, train,
                        wilcoxon_signed_rank)
from hoga import autodiff as ad


def brute_force_wilcoxon(a, b):
    d = [x - y for x, y in zip(a, b) if round(abs(x - y), 12) != 0]
    n = len(d)
    if n == 0:
        return 1.0
    mags = [round(abs(v), 12) for v in d]
    order = sorted(range(n), key=lambda i: mags[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and mags[order[j + 1]] == mags[order[i]]:
            j += 1
        for t in range(i, j + 1):
            ranks[order[t]] = (i + j) / 2 + 1
        i = j + 1
    w = sum(r for r, v in zip(ranks, d) if v > 0)
    ge = le = 0
    for signs in itertools.product((0, 1), repeat=n):
        s = sum(r for r, on in zip(ranks, signs) if on)
        ge += s >= w - 1e-9
        le += s <= w + 1e-9
    return min(1.0, 2 * min(ge, le) / 2 ** n)


def test_accuracy_examples():
    labels = np.array([0, 1, 2])
    mask = np.ones(3, bool)
    assert accuracy(np.eye(3), labels, mask) == 1.0
    assert accuracy(np.eye(3)[[1, 2, 0]], labels, mask) == 0.0
    assert accuracy(np.eye(3)[[0, 1, 0]], labels, mask) == pytest.approx(2 / 3)
    # ties go to the lowest class index
    assert accuracy(np.zeros((3, 3)), labels, mask) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        accuracy(np.eye(3), labels, np.zeros(3, bool))


def test_dirichlet_examples():
    g = path_graph(4)
    assert dirichlet_energy(np.ones((4, 3)), g) == 0.0
    assert dirichlet_energy(np.array([0.0, 1.0]), path_graph(2)) == 0.5
    x = np.random.default_rng(0).normal(size=(4, 3))
    direct = 0.5 * sum(sum((x[i][c] - x[i + 1][c]) ** 2 for c in range(3)) for i in range(3))
    assert dirichlet_energy(x, g) == pytest.approx(direct, abs=1e-12)


def test_dirichlet_zero_iff_constant_per_component():
    g = build_graph([(0, 1), (1, 2), (3, 4)], 5)
    assert dirichlet_energy(np.array([1.0, 1.0, 1.0, -2.0, -2.0]), g) == 0.0
    assert dirichlet_energy(np.array([1.0, 1.0, 1.1, -2.0, -2.0]), g) > 0.0


def test_wilcoxon_examples():
    a = [0.8, 0.81, 0.79, 0.82, 0.8, 0.83]
    assert wilcoxon_signed_rank(a, a) == 1.0
    b = [x - 0.01 * (i + 1) for i, x in enumerate(a)]
    assert wilcoxon_signed_rank(a, b) == pytest.approx(2 / 64, abs=1e-15)
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([1, 2, 3, 4], [1, 2, 3, 5])


@pytest.mark.parametrize("seed", range(25))
def test_wilcoxon_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 13))
    # coarse values so ties and zero differences occur
    a = np.round(rng.normal(0.8, 0.02, n), 2)
    b = np.round(rng.normal(0.8, 0.02, n), 2)
    assert wilcoxon_signed_rank(a, b) == pytest.approx(brute_force_wilcoxon(a, b), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=5, max_size=14))
def test_wilcoxon_affine_invariance(pairs):
    a = np.array([p[0] for p in pairs], float) / 20
    b = np.array([p[1] for p in pairs], float) / 20
    assert wilcoxon_signed_rank(2 * a + 1, 2 * b + 1) == pytest.approx(wilcoxon_signed_rank(a, b), abs=1e-12)
    p = wilcoxon_signed_rank(a, b)
    assert 0.0 < p <= 1.0


def test_wilcoxon_normal_approximation():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=40), rng.normal(size=40) + 0.3
    ref = stats.wilcoxon(a, b, correction=False, method="approx").pvalue
    assert wilcoxon_signed_rank(a, b) == pytest.approx(ref, rel=1e-9)


def test_aggregate():
    assert aggregate_runs([0.8, 0.8]) == (0.8, 0.0)
    mean, std = aggregate_runs([0.7, 0.9])
    assert mean == pytest.approx(0.8) and std == pytest.approx(math.sqrt(0.02))
    vals = list(np.random.default_rng(1).uniform(0.7, 0.9, 20))
    mean, std = aggregate_runs([TrainReport(test_acc=v) for v in vals])
    mu = sum(vals) / 20
    assert mean == pytest.approx(mu, abs=1e-15)
    assert std == pytest.approx(math.sqrt(sum((v - mu) ** 2 for v in vals) / 19), abs=1e-15)
    with pytest.raises(ValueError):
        aggregate_runs([0.5])


def test_adamw_first_step():
    p = ad.parameter([1.0, -2.0])
    opt = AdamW([p], lr=0.1, weight_decay=0.01)
    opt.step([np.array([0.5, -3.0])])
    # the bias-corrected first step moves each coordinate by lr * sign(g)
    np.testing.assert_allclose(p.value, [1.0 * 0.999 - 0.1, -2.0 * 0.999 + 0.1], atol=1e-7)


def toy_setup(model_kind="gat", K=2, seed=0):
    g, x, labels = two_cluster(6, seed=seed)
    train_mask = np.zeros(12, bool)
    train_mask[[0, 1, 6, 7]] = True
    val_mask = np.zeros(12, bool)
    val_mask[[2, 8]] = True
    split = LabeledSplit(labels, train_mask, val_mask, ~(train_mask | val_mask))
    samples = {k: sample_heads(g, x, k, SamplerConfig(seed=seed), 2) for k in range(2, K + 1)}
    blocks = prepare_edges(g, samples, K)
    cfg = HogaConfig(K=K, heads_first_layer=2, hidden_dim=8, dropout=0.0)
    if model_kind == "gat":
        model = HogaGAT(4, 2, cfg, seed=seed)
    else:
        model = HogaGRAND(4, 2, cfg, GrandConfig(1.0, 0.5), seed=seed)
    return model, g, x, split, blocks


@pytest.mark.parametrize("kind", ["gat", "grand"])
def test_separable_toy_is_learned(kind):
    model, g, x, split, blocks = toy_setup(kind)
    report = train(model, g, x, split, blocks, TrainConfig(learning_rate=0.02, max_epochs=200, patience=200))
    assert report.test_acc == 1.0
    assert report.status == "ok"
    assert report.best_epoch <= 200


def test_loss_decreases_early():
    model, g, x, split, blocks = toy_setup()
    report = train(model, g, x, split, blocks, TrainConfig(max_epochs=10, patience=100))
    assert all(b <= a + 1e-12 for a, b in zip(report.train_loss, report.train_loss[1:]))


def test_zero_learning_rate():
    model, g, x, split, blocks = toy_setup()
    before = model.state_dict()
    init_acc = accuracy(model.forward(x, blocks), split.labels, split.test_mask)
    report = train(model, g, x, split, blocks, TrainConfig(learning_rate=0.0, max_epochs=5))
    for name, value in model.state_dict().items():
        np.testing.assert_array_equal(value, before[name])
    assert report.test_acc == init_acc


def test_report_deterministic():
    r1 = train(*toy_setup(), TrainConfig(max_epochs=15))
    r2 = train(*toy_setup(), TrainConfig(max_epochs=15))
    d1, d2 = r1.to_dict(), r2.to_dict()
    d1.pop("seconds"), d2.pop("seconds")
    assert d1 == d2


def test_best_epoch_selection_and_patience():
    model, g, x, split, blocks = toy_setup()
    report = train(model, g, x, split, blocks, TrainConfig(max_epochs=300, patience=5))
    assert report.best_val_acc == max(report.val_acc)
    assert report.val_acc.index(report.best_val_acc) + 1 == report.best_epoch
    assert report.epochs <= report.best_epoch + 5
    assert 0.0 <= report.test_acc <= 1.0
    assert len(report.dirichlet) == model.cfg.layers


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_gives_status():
    model, g, x, split, blocks = toy_setup()
    before = model.state_dict()
    report = train(model, g, x * 1e306, split, blocks, TrainConfig(max_epochs=3))
    assert report.status == "diverged"
    # the abort happens before any update is applied
    for name, value in model.state_dict().items():
        np.testing.assert_array_equal(value, before[name])


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)
    with pytest.raises(ValueError):
        TrainConfig(repetitions=0)
