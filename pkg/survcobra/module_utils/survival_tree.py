# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""Survival trees grown with the log-rank split criterion, and the machine pool.

Leaves predict the Kaplan-Meier curve of their training members. A sample goes
left when its feature value is <= the node threshold.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from joblib import Parallel, delayed

from survcobra.module_utils.errors import FitError, PredictionError
from survcobra.module_utils.estimators import StepFunction, kaplan_meier
from survcobra.module_utils.metrics import SurvivalCurve

log = logging.getLogger(__name__)

# max_depth x min_leaf_size combinations of the default pool
POOL_DEPTHS = (3, 4, 5, 6)
POOL_LEAF_SIZES = (10, 20)


@dataclass(frozen=True)
class TreeConfig(object):
    max_depth: Optional[int] = 5
    min_leaf_size: int = 10
    bootstrap: bool = True
    seed: int = 0
    max_features: Union[int, str] = 'all'

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise FitError("max_depth must be at least 1, got %s" % self.max_depth)
        if self.min_leaf_size < 2:
            raise FitError("min_leaf_size must be at least 2, got %s" % self.min_leaf_size)
        if isinstance(self.max_features, str) and self.max_features not in ('all', 'sqrt'):
            raise FitError("max_features must be a count, 'all' or 'sqrt', got %s" % self.max_features)

    def n_features(self, d):
        if self.max_features == 'all':
            return d
        if self.max_features == 'sqrt':
            return max(1, int(math.ceil(math.sqrt(d))))
        return max(1, min(int(self.max_features), d))


class LeafNode(object):
    def __init__(self, curve, n, leaf_id=None):
        self.curve = curve
        self.n = n
        self.leaf_id = leaf_id


class SplitNode(object):
    def __init__(self, feature, threshold, left, right):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right


def _counts(time, event):
    """Risk-set counts over the pooled distinct event times: (n_j, d_j, tau)."""
    tau = np.unique(time[event])
    at_risk = (time[:, None] >= tau[None, :]).sum(axis=0).astype(float)
    deaths = ((time[:, None] == tau[None, :]) & event[:, None]).sum(axis=0).astype(float)
    return at_risk, deaths, tau


def _logrank_from_counts(n, d, n1, d1):
    """Chi-square log-rank statistic from pooled (n, d) and group-1 (n1, d1) counts.
    The last axis runs over event times; leading axes broadcast."""
    with np.errstate(divide='ignore', invalid='ignore'):
        share = np.where(n > 0, n1 / n, 0.0)
        expected = d * share
        variance = np.where(n > 1, d * share * (1.0 - share) * (n - d) / (n - 1.0), 0.0)
    num = (d1 - expected).sum(axis=-1)
    den = variance.sum(axis=-1)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(den > 0, np.square(num) / den, 0.0)


def _as_pairs(sample):
    pairs = np.asarray(sample, dtype=float).reshape(-1, 2)
    return pairs[:, 0], pairs[:, 1].astype(bool)


def logrank_statistic(left, right):
    """Two-sample log-rank chi-square statistic between lists of (time, event) pairs."""
    t1, e1 = _as_pairs(left)
    t2, e2 = _as_pairs(right)
    if t1.size == 0 or t2.size == 0:
        raise FitError("log-rank statistic needs two nonempty groups")
    time = np.concatenate([t1, t2])
    event = np.concatenate([e1, e2])
    n, d, tau = _counts(time, event)
    n1 = (t1[:, None] >= tau[None, :]).sum(axis=0).astype(float)
    d1 = ((t1[:, None] == tau[None, :]) & e1[:, None]).sum(axis=0).astype(float)
    return float(_logrank_from_counts(n, d, n1, d1))


def logrank_scan(x, time, event, min_leaf_size):
    """
    Scores every threshold of one feature at once.

    Returns:
        tuple: (thresholds, statistics) for the admissible splits, i.e. the
        midpoints between consecutive distinct sorted values that leave at
        least min_leaf_size samples on both sides
    """
    order = np.argsort(x, kind='mergesort')
    xs, ts, es = x[order], time[order], event[order]
    size = xs.size
    positions = np.arange(min_leaf_size - 1, size - min_leaf_size)
    if positions.size == 0:
        return np.empty(0), np.empty(0)
    positions = positions[xs[positions] < xs[positions + 1]]
    if positions.size == 0 or not es.any():
        return np.empty(0), np.empty(0)
    tau = np.unique(ts[es])
    risk = ts[:, None] >= tau[None, :]
    death = (ts[:, None] == tau[None, :]) & es[:, None]
    cum_risk = np.cumsum(risk, axis=0, dtype=float)
    cum_death = np.cumsum(death, axis=0, dtype=float)
    n, d = cum_risk[-1], cum_death[-1]
    stats = _logrank_from_counts(n[None, :], d[None, :], cum_risk[positions], cum_death[positions])
    thresholds = (xs[positions] + xs[positions + 1]) / 2.0
    return thresholds, stats


def _leaf(time, event):
    return LeafNode(kaplan_meier(time, event), int(time.size))


def _grow(X, time, event, depth, config, n_features, rng):
    size = time.size
    if (config.max_depth is not None and depth >= config.max_depth) or size < 2 * config.min_leaf_size or not event.any():
        return _leaf(time, event)

    d = X.shape[1]
    features = np.arange(d) if n_features >= d else np.sort(rng.choice(d, n_features, replace=False))
    best_stat, best = 0.0, None
    for feature in features:
        thresholds, stats = logrank_scan(X[:, feature], time, event, config.min_leaf_size)
        if stats.size == 0:
            continue
        k = int(np.argmax(stats))
        if stats[k] > best_stat:
            best_stat, best = float(stats[k]), (int(feature), float(thresholds[k]))
    if best is None:
        return _leaf(time, event)

    feature, threshold = best
    go_left = X[:, feature] <= threshold
    left = _grow(X[go_left], time[go_left], event[go_left], depth + 1, config, n_features, rng)
    right = _grow(X[~go_left], time[~go_left], event[~go_left], depth + 1, config, n_features, rng)
    return SplitNode(feature, threshold, left, right)


class SurvivalTree(object):
    """A fitted survival tree. Immutable once built."""

    def __init__(self, root, n_features, config=None):
        self.root = root
        self.n_features = n_features
        self.config = config
        self.leaves = []
        self._number_leaves(self.root)

    def _number_leaves(self, node):
        if isinstance(node, LeafNode):
            node.leaf_id = len(self.leaves)
            self.leaves.append(node)
        else:
            self._number_leaves(node.left)
            self._number_leaves(node.right)

    def depth(self, node=None):
        node = self.root if node is None else node
        if isinstance(node, LeafNode):
            return 0
        return 1 + max(self.depth(node.left), self.depth(node.right))

    def apply(self, X):
        """Leaf index of every row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise PredictionError("expected %d covariates, got %d" % (self.n_features, X.shape[1]))
        out = np.empty(X.shape[0], dtype=int)
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if isinstance(node, LeafNode):
                out[rows] = node.leaf_id
                continue
            go_left = X[rows, node.feature] <= node.threshold
            stack.append((node.left, rows[go_left]))
            stack.append((node.right, rows[~go_left]))
        return out

    def predict(self, X, grid):
        """n x T matrix of leaf Kaplan-Meier curves evaluated on the grid."""
        leaf_curves = np.vstack([leaf.curve(grid.times) for leaf in self.leaves])
        return leaf_curves[self.apply(X)]

    def to_dict(self):
        return {'n_features': self.n_features, 'root': _node_to_dict(self.root)}

    @classmethod
    def from_dict(cls, data):
        return cls(_node_from_dict(data['root']), int(data['n_features']))


def _node_to_dict(node):
    if isinstance(node, LeafNode):
        return {'leaf': node.curve.to_dict(), 'n': node.n}
    return {'feature': node.feature, 'threshold': node.threshold,
            'left': _node_to_dict(node.left), 'right': _node_to_dict(node.right)}


def _node_from_dict(data):
    if 'leaf' in data:
        return LeafNode(StepFunction.from_dict(data['leaf']), int(data['n']))
    return SplitNode(int(data['feature']), float(data['threshold']),
                     _node_from_dict(data['left']), _node_from_dict(data['right']))


def tree_to_dict(tree):
    return tree.to_dict()


def tree_from_dict(data):
    return SurvivalTree.from_dict(data)


def fit_tree(data, config):
    """Greedy top-down log-rank tree on a SurvivalDataset."""
    if data.n < 2 or data.n < config.min_leaf_size:
        raise FitError("cannot fit a tree with min_leaf_size=%d on %d samples" % (config.min_leaf_size, data.n))
    rng = np.random.RandomState(config.seed)
    X, time, event = data.X, data.time, data.event
    if config.bootstrap:
        rows = rng.randint(0, data.n, data.n)
        X, time, event = X[rows], time[rows], event[rows]
    root = _grow(X, time, event, 0, config, config.n_features(data.d), rng)
    return SurvivalTree(root, data.d, config)


def predict_tree(tree, covariates, grid):
    covariates = np.asarray(covariates, dtype=float).reshape(1, -1)
    return SurvivalCurve(grid, tree.predict(covariates, grid)[0])


class MachinePool(object):
    """The M weak learners whose predictions feed the aggregator."""

    def __init__(self, trees):
        self.trees = list(trees)

    def __len__(self):
        return len(self.trees)

    def __iter__(self):
        return iter(self.trees)

    def predict(self, X, grid):
        """M x n x T survival predictions."""
        return np.stack([tree.predict(X, grid) for tree in self.trees])

    def to_dict(self):
        return {'machines': [tree_to_dict(tree) for tree in self.trees]}


def pool_configs(d, seed):
    max_features = int(math.ceil(math.sqrt(d)))
    configs = []
    for depth in POOL_DEPTHS:
        for leaf_size in POOL_LEAF_SIZES:
            configs.append(TreeConfig(max_depth=depth, min_leaf_size=leaf_size, bootstrap=True,
                                      seed=seed + len(configs), max_features=max_features))
    return configs


def build_machine_pool(d_k, seed, workers=1):
    """Fits the eight survival trees on D_k."""
    configs = pool_configs(d_k.d, seed)
    log.debug("fitting %d machines on %d samples", len(configs), d_k.n)
    trees = Parallel(n_jobs=workers)(delayed(fit_tree)(d_k, config) for config in configs)
    return MachinePool(trees)
