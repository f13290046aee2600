# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import json

import numpy as np
import pytest

from survcobra.module_utils.dataset import SurvivalDataset, TimeGrid
from survcobra.module_utils.errors import FitError, PredictionError
from survcobra.module_utils.estimators import kaplan_meier
from survcobra.module_utils.survival_tree import (
    LeafNode,
    SplitNode,
    SurvivalTree,
    TreeConfig,
    build_machine_pool,
    fit_tree,
    logrank_scan,
    logrank_statistic,
    pool_configs,
    predict_tree,
)


def _oracle_logrank(left, right):
    pooled = [(t, e, 1) for t, e in left] + [(t, e, 0) for t, e in right]
    num = var = 0.0
    for u in sorted(set(t for t, e, _ in pooled if e)):
        n = sum(1 for t, _, _ in pooled if t >= u)
        d = sum(1 for t, e, _ in pooled if e and t == u)
        n1 = sum(1 for t, _, g in pooled if g and t >= u)
        d1 = sum(1 for t, e, g in pooled if g and e and t == u)
        num += d1 - d * n1 / n
        if n > 1:
            var += d * (n1 / n) * (1 - n1 / n) * (n - d) / (n - 1)
    return num * num / var if var > 0 else 0.0


def _random_groups(rng, n):
    times = rng.choice([1.0, 2.0, 3.0, 4.0, 5.0], n)
    events = rng.rand(n) < 0.7
    pairs = list(zip(times.tolist(), events.tolist()))
    k = rng.randint(1, n)
    return pairs[:k], pairs[k:]


def _separable(n=100, seed=0):
    rng = np.random.RandomState(seed)
    X = rng.uniform(size=(n, 2))
    time = np.where(X[:, 0] > 0.5, 10.0, 1.0) + rng.uniform(size=n)
    return SurvivalDataset(X, time, np.ones(n, dtype=bool), ('signal', 'noise'))


def test_logrank_matches_oracle_on_small_samples():
    rng = np.random.RandomState(0)
    for n in range(2, 9):
        for _ in range(40):
            left, right = _random_groups(rng, n)
            assert logrank_statistic(left, right) == pytest.approx(_oracle_logrank(left, right), rel=1e-9, abs=1e-12)


def test_logrank_is_symmetric():
    rng = np.random.RandomState(1)
    for _ in range(30):
        left, right = _random_groups(rng, 8)
        assert logrank_statistic(left, right) == pytest.approx(logrank_statistic(right, left), rel=1e-12, abs=1e-12)


def test_logrank_of_identical_groups_is_zero():
    group = [(1.0, True), (2.0, False), (3.0, True), (3.0, True)]
    assert logrank_statistic(group, list(group)) == pytest.approx(0.0, abs=1e-12)


def test_logrank_needs_two_groups():
    with pytest.raises(FitError):
        logrank_statistic([], [(1.0, True)])


def test_logrank_scan_scores_each_threshold_like_a_direct_split(dataset):
    x, time, event = dataset.X[:, 0], dataset.time, dataset.event
    thresholds, stats = logrank_scan(x, time, event, 10)
    assert thresholds.size > 0
    for threshold, stat in zip(thresholds, stats):
        go_left = x <= threshold
        assert go_left.sum() >= 10 and (~go_left).sum() >= 10
        left = list(zip(time[go_left], event[go_left]))
        right = list(zip(time[~go_left], event[~go_left]))
        assert stat == pytest.approx(logrank_statistic(left, right), rel=1e-9)


def test_logrank_scan_without_room_for_two_leaves():
    thresholds, stats = logrank_scan(np.arange(5.0), np.arange(1.0, 6.0), np.ones(5, dtype=bool), 3)
    assert thresholds.size == 0 and stats.size == 0


def test_root_splits_on_the_separating_feature():
    tree = fit_tree(_separable(), TreeConfig(max_depth=1, min_leaf_size=5, bootstrap=False))
    assert isinstance(tree.root, SplitNode)
    assert tree.root.feature == 0
    assert 0.3 < tree.root.threshold < 0.7


def test_small_sample_is_a_single_kaplan_meier_leaf():
    data = _separable(n=15)
    tree = fit_tree(data, TreeConfig(max_depth=5, min_leaf_size=10, bootstrap=False))
    assert isinstance(tree.root, LeafNode)
    grid = TimeGrid(np.linspace(1.0, 11.0, 6))
    expected = kaplan_meier(data.time, data.event)(grid.times)
    assert np.array_equal(tree.predict(data.X, grid), np.tile(expected, (15, 1)))


def test_depth_and_leaf_size_are_respected(large_dataset):
    tree = fit_tree(large_dataset, TreeConfig(max_depth=3, min_leaf_size=15, bootstrap=False))
    assert tree.depth() <= 3
    assert all(leaf.n >= 15 for leaf in tree.leaves)


def test_fit_is_deterministic_for_a_seed(dataset):
    config = TreeConfig(max_depth=4, min_leaf_size=10, bootstrap=True, seed=11, max_features='sqrt')
    a, b = fit_tree(dataset, config), fit_tree(dataset, config)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_threshold_ties_go_left():
    leaf = LeafNode(kaplan_meier([1.0], [True]), 1)
    other = LeafNode(kaplan_meier([2.0], [True]), 1)
    tree = SurvivalTree(SplitNode(0, 0.5, leaf, other), 1)
    assert tree.apply([[0.5], [0.5000001], [0.1]]).tolist() == [0, 1, 0]


def test_prediction_checks_the_covariate_count(dataset):
    tree = fit_tree(dataset, TreeConfig(bootstrap=False))
    grid = TimeGrid([0.0, 1.0])
    with pytest.raises(PredictionError):
        tree.predict(np.zeros((2, dataset.d + 1)), grid)


def test_predict_tree_returns_a_curve(dataset):
    tree = fit_tree(dataset, TreeConfig(bootstrap=False))
    grid = TimeGrid(np.linspace(dataset.time.min(), dataset.time.max(), 9))
    curve = predict_tree(tree, dataset.X[0], grid)
    assert curve.values.shape == (9,)
    assert np.all(np.diff(curve.values) <= 0)


def test_fit_rejects_too_few_samples():
    with pytest.raises(FitError):
        fit_tree(_separable(n=5), TreeConfig(min_leaf_size=10))


@pytest.mark.parametrize('kwargs', [{'max_depth': 0}, {'min_leaf_size': 1}, {'max_features': 'log2'}])
def test_tree_config_validation(kwargs):
    with pytest.raises(FitError):
        TreeConfig(**kwargs)


def test_tree_round_trips_through_dict(dataset):
    tree = fit_tree(dataset, TreeConfig(max_depth=3, bootstrap=False))
    back = SurvivalTree.from_dict(json.loads(json.dumps(tree.to_dict())))
    grid = TimeGrid(np.linspace(dataset.time.min(), dataset.time.max(), 12))
    assert np.array_equal(back.predict(dataset.X, grid), tree.predict(dataset.X, grid))


def test_pool_configs():
    configs = pool_configs(9, seed=100)
    assert len(configs) == 8
    assert [(c.max_depth, c.min_leaf_size) for c in configs] == [
        (3, 10), (3, 20), (4, 10), (4, 20), (5, 10), (5, 20), (6, 10), (6, 20)]
    assert [c.seed for c in configs] == list(range(100, 108))
    assert all(c.bootstrap and c.max_features == 3 for c in configs)


def test_machine_pool_predictions(large_dataset):
    pool = build_machine_pool(large_dataset, seed=3)
    grid = TimeGrid(np.linspace(large_dataset.time.min(), large_dataset.time.max(), 10))
    preds = pool.predict(large_dataset.X[:7], grid)
    assert len(pool) == 8
    assert preds.shape == (8, 7, 10)
    assert np.all((preds >= 0) & (preds <= 1))
    assert np.all(np.diff(preds, axis=-1) <= 0)
    assert len(pool.to_dict()['machines']) == 8


def test_machine_pool_is_reproducible_for_a_seed(dataset):
    a = build_machine_pool(dataset, seed=21)
    b = build_machine_pool(dataset, seed=21)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_distinct_seeds_give_different_machines(dataset):
    a = build_machine_pool(dataset, seed=21).to_dict()['machines']
    b = build_machine_pool(dataset, seed=22).to_dict()['machines']
    assert any(json.dumps(x) != json.dumps(y) for x, y in zip(a, b))


def test_deep_tree_predicts_the_kaplan_meier_of_its_leaf(dataset):
    assert np.unique(dataset.X, axis=0).shape[0] == dataset.n
    tree = fit_tree(dataset, TreeConfig(max_depth=None, min_leaf_size=2, bootstrap=False))
    grid = TimeGrid(np.linspace(0.0, dataset.time.max() + 1.0, 25))
    leaves = tree.apply(dataset.X)
    preds = tree.predict(dataset.X, grid)
    assert len(tree.leaves) > 10
    for i in range(dataset.n):
        members = np.flatnonzero(leaves == leaves[i])
        assert i in members
        assert members.size == tree.leaves[leaves[i]].n
        assert members.size < dataset.n // 2
        expected = kaplan_meier(dataset.time[members], dataset.event[members])(grid.times)
        assert np.array_equal(preds[i], expected)
