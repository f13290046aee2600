# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""Cross-validated grid search over (epsilon, alpha, norm).

Every fold holds out one part of the data for scoring, splits the rest into
D_k/D_l, fits the machine pool on D_k and scores every candidate by the IBS of
the COBRA predictions on the held-out part. The epsilon candidates and the
time grid are shared by all folds; they come from a reference D_k/D_l split of
the whole tuning dataset.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.spatial.distance import pdist
from sklearn.model_selection import KFold

from survcobra.module_utils.cobra import (
    CobraOptions,
    CobraParams,
    NormKind,
    Variant,
    aggregate_from_distances,
    alpha_grid,
    build_table,
    machine_distances,
    machine_ibs_weights,
    norm_kind,
    variant_kind,
)
from survcobra.module_utils.dataset import DEFAULT_GRID_RESOLUTION, ceil_share, make_time_grid
from survcobra.module_utils.errors import FitError, ParameterError, SplitError, TuningError
from survcobra.module_utils.estimators import censoring_survival
from survcobra.module_utils.metrics import integrated_brier_score, per_machine_ibs
from survcobra.module_utils.survival_tree import build_machine_pool

log = logging.getLogger(__name__)

# scores closer than this are treated as ties
SCORE_TOLERANCE = 1e-12
EPSILON_QUANTILES = (5.0, 100.0)
NORM_ORDER = (NormKind.FROBENIUS, NormKind.SUP)


class Scheme(enum.Enum):
    WHOLE_DATASET = 'whole_dataset'
    TRAIN_ONLY = 'train_only'


def norms_from(value):
    """'both' or a single norm name into a tuple of NormKind."""
    if isinstance(value, (tuple, list)):
        return tuple(norm_kind(v) for v in value)
    if str(value).lower() == 'both':
        return NORM_ORDER
    return (norm_kind(value),)


@dataclass(frozen=True)
class TuneConfig(object):
    k_folds: int = 5
    epsilon_grid_size: int = 20
    variant: Variant = Variant.WEIGHTED
    norms: Tuple[NormKind, ...] = NORM_ORDER
    seed: int = 0
    scheme: Scheme = Scheme.WHOLE_DATASET
    dl_fraction: float = 0.5
    grid_resolution: int = DEFAULT_GRID_RESOLUTION
    options: CobraOptions = field(default_factory=CobraOptions)

    def __post_init__(self):
        object.__setattr__(self, 'variant', variant_kind(self.variant))
        object.__setattr__(self, 'norms', norms_from(self.norms))
        object.__setattr__(self, 'scheme', Scheme(self.scheme) if not isinstance(self.scheme, Scheme) else self.scheme)
        if self.k_folds < 2:
            raise ParameterError("k_folds must be at least 2, got %s" % self.k_folds, option='k_folds')
        if self.epsilon_grid_size < 2:
            raise ParameterError("epsilon_grid_size must be at least 2, got %s" % self.epsilon_grid_size,
                                 option='epsilon_grid_size')
        if not self.norms:
            raise ParameterError("at least one norm is required", option='norm')

    def alpha_grid(self, machines):
        return alpha_grid(machines)


def spread(values):
    """Sample standard deviation, 0 for a single value."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1))


@dataclass(frozen=True, eq=False)
class TuneResult(object):
    best: CobraParams
    cv_scores: pd.DataFrame
    config: TuneConfig = None

    def best_for(self, norm):
        """Best params when the search is restricted to one norm."""
        norm = norm_kind(norm)
        rows = self.cv_scores[self.cv_scores['norm'] == norm.value]
        if rows.empty:
            raise TuningError("norm %s was not searched" % norm.value)
        return select_best(rows, self.best.variant)

    @property
    def best_score(self):
        row = self.cv_scores[(self.cv_scores['epsilon'] == self.best.epsilon)
                             & (self.cv_scores['alpha'] == self.best.alpha)
                             & (self.cv_scores['norm'] == self.best.norm.value)]
        return float(row['mean_ibs'].iloc[0])

    def to_rows(self):
        return [{'epsilon': float(row.epsilon), 'alpha': float(row.alpha), 'norm': str(row.norm),
                 'mean_ibs': float(row.mean_ibs), 'sd_ibs': float(row.sd_ibs)}
                for row in self.cv_scores.itertuples(index=False)]

    def to_summary(self):
        summary = {
            'best': self.best.to_dict(),
            'best_mean_ibs': self.best_score,
            'candidates': int(len(self.cv_scores)),
        }
        if self.config is not None:
            summary.update({
                'scheme': self.config.scheme.value,
                'variant': self.config.variant.value,
                'folds': self.config.k_folds,
                'norms': [n.value for n in self.config.norms],
            })
        return summary


def select_best(scores, variant):
    """
    Row of minimum mean IBS; ties go to larger epsilon, then larger alpha,
    then Frobenius before Sup.
    """
    frame = scores.copy()
    frame['_rounded'] = np.round(frame['mean_ibs'] / SCORE_TOLERANCE) * SCORE_TOLERANCE
    frame['_norm_rank'] = frame['norm'].map(dict((n.value, i) for i, n in enumerate(NORM_ORDER)))
    frame = frame.sort_values(['_rounded', 'epsilon', 'alpha', '_norm_rank'],
                              ascending=[True, False, False, True], kind='mergesort')
    row = frame.iloc[0]
    return CobraParams(epsilon=float(row['epsilon']), alpha=float(row['alpha']), norm=row['norm'], variant=variant)


def epsilon_grid(table, size, norm):
    """
    Equally spaced quantiles, 5th to 100th percentile, of the per-machine
    pairwise distances between table points. Ascending and deduplicated.
    """
    if table.points < 2:
        raise TuningError("epsilon grid needs at least 2 table points, got %d" % table.points)
    metric = 'euclidean' if norm_kind(norm) is NormKind.FROBENIUS else 'chebyshev'
    distances = np.concatenate([pdist(table.values[m], metric=metric) for m in range(table.machines)])
    if not np.any(distances > 0):
        return np.zeros(1)
    quantiles = np.linspace(EPSILON_QUANTILES[0], EPSILON_QUANTILES[1], int(size))
    return np.unique(np.percentile(distances, quantiles))


def fold_indices(n, k_folds, seed):
    """List of (rest, held_out) index arrays of a seeded shuffled k-fold partition."""
    if n < k_folds:
        raise TuningError("cannot make %d folds from %d records" % (k_folds, n))
    splitter = KFold(n_splits=k_folds, shuffle=True, random_state=seed)
    return [(rest, held) for rest, held in splitter.split(np.arange(n))]


def row_assignment(n, k_folds, seed):
    """
    Seed-derived assignment of every row: its fold and one random key per
    subdivision (column 0 for the reference split, column f + 1 for fold f).
    All randomness of the search flows from it, so permuting the rows together
    with their assignment leaves every score unchanged.

    Returns:
        tuple: (fold of every row, n x (k_folds + 1) keys)
    """
    folds = np.empty(n, dtype=int)
    for fold, (_, held) in enumerate(fold_indices(n, k_folds, seed)):
        folds[held] = fold
    keys = np.random.RandomState(seed).random_sample((n, k_folds + 1))
    return folds, keys


def _subdivide(dataset, rest, keys, fraction, fold=None):
    """D_k/D_l of the rows in rest, both ordered by key; D_l takes the ceil(fraction * n) lowest keys."""
    order = rest[np.argsort(keys[rest], kind='mergesort')]
    k = ceil_share(order.size, fraction)
    d_k, d_l = order[k:], order[:k]
    for name, part in (('d_k', d_k), ('d_l', d_l)):
        if part.size < 2 or not dataset.event[part].any():
            raise TuningError("fold %s: %s has %d record(s) and %d event(s)"
                              % (fold, name, part.size, int(dataset.event[part].sum())), fold=fold)
    return dataset.subset(d_k), dataset.subset(d_l)


def _fit_table(d_k, d_l, grid, seed, fold=None):
    try:
        pool = build_machine_pool(d_k, seed)
    except (FitError, SplitError) as e:
        raise TuningError("fold %s: cannot fit the machine pool: %s" % (fold, e), fold=fold)
    return pool, build_table(pool, d_l, grid)


def reference_epsilons(dataset, grid, config, keys):
    """Epsilon candidates per norm from a reference D_k/D_l split of the tuning dataset."""
    d_k, d_l = _subdivide(dataset, np.arange(dataset.n), keys[:, 0], config.dl_fraction, fold='reference')
    _, table = _fit_table(d_k, d_l, grid, config.seed, fold='reference')
    return dict((norm, epsilon_grid(table, config.epsilon_grid_size, norm)) for norm in config.norms)


def score_fold(dataset, rest, held, fold, keys, grid, epsilons, config, variants):
    """
    IBS of every candidate on one fold.

    Returns:
        dict: (variant, norm) -> array of shape (len(epsilons[norm]), M)
    """
    seed = config.seed + fold + 1
    d_k, d_l = _subdivide(dataset, rest, keys[:, fold + 1], config.dl_fraction, fold=fold)
    pool, table = _fit_table(d_k, d_l, grid, seed, fold=fold)
    held_out = dataset.subset(held)
    subjects = held_out.subjects()
    g_hat = censoring_survival(*subjects)

    weights = None
    if Variant.WEIGHTED in variants:
        dl_ibs = per_machine_ibs(table, table.subjects(), censoring_survival(*table.subjects()), grid)
        weights = machine_ibs_weights(dl_ibs, config.options.weights)

    query = np.transpose(pool.predict(held_out.X, grid), (1, 0, 2))
    alphas = config.alpha_grid(table.machines)
    scores = {}
    for norm in config.norms:
        distances = machine_distances(query, table, norm)
        for variant in variants:
            out = np.empty((len(epsilons[norm]), len(alphas)))
            for i, epsilon in enumerate(epsilons[norm]):
                for j, alpha in enumerate(alphas):
                    params = CobraParams(epsilon=float(epsilon), alpha=alpha, norm=norm, variant=variant)
                    curves, _ = aggregate_from_distances(distances, table, params, config.options, weights,
                                                         on_exhausted='baseline', log_level=logging.DEBUG)
                    out[i, j] = integrated_brier_score(curves, subjects, g_hat, grid)
            scores[(variant, norm)] = out
    log.info("fold %d/%d scored (held out %d, d_k %d, d_l %d)", fold + 1, config.k_folds, held.size, d_k.n, d_l.n)
    return scores


def _score_table(fold_scores, epsilons, alphas, variant, norms):
    rows = []
    for norm in norms:
        stacked = np.stack([scores[(variant, norm)] for scores in fold_scores])
        for i, epsilon in enumerate(epsilons[norm]):
            for j, alpha in enumerate(alphas):
                values = stacked[:, i, j]
                rows.append({'epsilon': float(epsilon), 'alpha': float(alpha), 'norm': norm.value,
                             'mean_ibs': float(values.mean()), 'sd_ibs': spread(values),
                             'fold_ibs': [float(v) for v in values]})
    return pd.DataFrame(rows, columns=['epsilon', 'alpha', 'norm', 'mean_ibs', 'sd_ibs', 'fold_ibs'])


def cv_tune_variants(dataset, config, variants=None, grid=None, workers=1):
    """
    cv_tune for several variants at once; the folds, pools and distances are
    shared between variants.

    Returns:
        dict: Variant -> TuneResult
    """
    variants = tuple(variant_kind(v) for v in (variants or (config.variant,)))
    grid = grid or make_time_grid(dataset, config.grid_resolution)
    assignment, keys = row_assignment(dataset.n, config.k_folds, config.seed)
    epsilons = reference_epsilons(dataset, grid, config, keys)
    log.info("tuning %s on n=%d with %d folds, norms %s", "/".join(v.value for v in variants), dataset.n,
             config.k_folds, "/".join(n.value for n in config.norms))

    fold_scores = Parallel(n_jobs=workers)(
        delayed(score_fold)(dataset, np.flatnonzero(assignment != fold), np.flatnonzero(assignment == fold), fold, keys,
                            grid, epsilons, config, variants)
        for fold in range(config.k_folds))

    machines = fold_scores[0][(variants[0], config.norms[0])].shape[1]
    alphas = config.alpha_grid(machines)
    results = {}
    for variant in variants:
        scores = _score_table(fold_scores, epsilons, alphas, variant, config.norms)
        best = select_best(scores, variant)
        results[variant] = TuneResult(best, scores, _with_variant(config, variant))
        log.info("best %s params: epsilon=%g alpha=%g norm=%s (mean IBS %.4f)", variant.value, best.epsilon,
                 best.alpha, best.norm.value, results[variant].best_score)
    return results


def _with_variant(config, variant):
    return TuneConfig(config.k_folds, config.epsilon_grid_size, variant, config.norms, config.seed, config.scheme,
                      config.dl_fraction, config.grid_resolution, config.options)


def cv_tune(dataset, config, grid=None, workers=1):
    """k-fold cross-validated search for the (epsilon, alpha, norm) of minimum mean IBS."""
    return cv_tune_variants(dataset, config, (config.variant,), grid=grid, workers=workers)[config.variant]
