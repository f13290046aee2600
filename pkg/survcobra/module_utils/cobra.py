# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""COBRA aggregation of survival-curve machines.

A point of D_l joins the proximity set of a query when at least M*alpha
machines predict curves within epsilon of the query's curves. The Straight
variant fits a Nelson-Aalen estimator on the outcomes of the proximity set;
the Weighted variant averages each machine's curves over the proximity set
and combines the machines with weights derived from their IBS on D_l.
"""

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from survcobra.module_utils.dataset import TimeGrid
from survcobra.module_utils.errors import DistanceError, NoNeighborsError, ParameterError, PredictionError
from survcobra.module_utils.estimators import censoring_survival, kaplan_meier, nelson_aalen, survival_from_hazard
from survcobra.module_utils.metrics import SurvivalCurve, as_matrix, check_curves, per_machine_ibs
from survcobra.module_utils.survival_tree import build_machine_pool

log = logging.getLogger(__name__)

HAZARD_FLOOR = 1e-12
# max elements of one (queries x M x l x T) difference block
DISTANCE_CHUNK = 2 ** 22


class NormKind(enum.Enum):
    FROBENIUS = 'frobenius'
    SUP = 'sup'


class Variant(enum.Enum):
    STRAIGHT = 'straight'
    WEIGHTED = 'weighted'


def norm_kind(value):
    if isinstance(value, NormKind):
        return value
    try:
        return NormKind(str(value).lower())
    except ValueError:
        raise ParameterError("unknown norm: %s" % value, option='norm')


def variant_kind(value):
    if isinstance(value, Variant):
        return value
    try:
        return Variant(str(value).lower())
    except ValueError:
        raise ParameterError("unknown variant: %s" % value, option='variant')


def alpha_grid(machines):
    return [k / float(machines) for k in range(1, machines + 1)]


@dataclass(frozen=True)
class CobraParams(object):
    epsilon: float
    alpha: float
    norm: NormKind = NormKind.FROBENIUS
    variant: Variant = Variant.WEIGHTED

    def __post_init__(self):
        object.__setattr__(self, 'norm', norm_kind(self.norm))
        object.__setattr__(self, 'variant', variant_kind(self.variant))
        if not self.epsilon >= 0:
            raise ParameterError("epsilon must be nonnegative, got %s" % self.epsilon, option='epsilon')
        if not 0 < self.alpha <= 1:
            raise ParameterError("alpha must be in (0, 1], got %s" % self.alpha, option='alpha')

    def required_agreement(self, machines):
        """M * alpha as an integer count of machines."""
        count = self.alpha * machines
        rounded = int(round(count))
        if abs(count - rounded) > 1e-9 or not 1 <= rounded <= machines:
            raise ParameterError("alpha * M must be an integer in [1, %d], got %s" % (machines, count), option='alpha')
        return rounded

    def to_dict(self):
        return {'epsilon': float(self.epsilon), 'alpha': float(self.alpha),
                'norm': self.norm.value, 'variant': self.variant.value}

    @classmethod
    def from_dict(cls, data, variant=None):
        try:
            return cls(epsilon=float(data['epsilon']), alpha=float(data['alpha']),
                       norm=data.get('norm', 'frobenius'), variant=variant or data.get('variant', 'weighted'))
        except KeyError as e:
            raise ParameterError("COBRA params are missing %s" % e, option='params')


@dataclass(frozen=True)
class CobraOptions(object):
    weights: str = 'complement'
    straight_estimator: str = 'nelson_aalen'
    max_widenings: int = 10
    widen_factor: float = 1.5

    def __post_init__(self):
        if self.weights not in ('complement', 'literal'):
            raise ParameterError("weights must be complement or literal, got %s" % self.weights, option='weights')
        if self.straight_estimator not in ('nelson_aalen', 'kaplan_meier'):
            raise ParameterError("unknown straight estimator: %s" % self.straight_estimator, option='straight_estimator')


@dataclass(frozen=True, eq=False)
class PredictionTable(object):
    """Survival predictions of M machines on the l points of D_l."""

    values: np.ndarray
    grid: TimeGrid
    dl_time: np.ndarray
    dl_event: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 3 or values.shape[2] != self.grid.resolution:
            raise PredictionError("prediction table must be M x l x T, got %s" % (values.shape,))
        if values.shape[1] != np.asarray(self.dl_time).size:
            raise PredictionError("prediction table has %d points but %d outcomes" % (values.shape[1], np.asarray(self.dl_time).size))
        check_curves(values)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'dl_time', np.asarray(self.dl_time, dtype=float))
        object.__setattr__(self, 'dl_event', np.asarray(self.dl_event, dtype=bool))

    @property
    def machines(self):
        return self.values.shape[0]

    @property
    def points(self):
        return self.values.shape[1]

    def subjects(self):
        return self.dl_time, self.dl_event


@dataclass(frozen=True, eq=False)
class CobraModel(object):
    pool: object
    table: PredictionTable
    params: CobraParams
    options: CobraOptions = field(default_factory=CobraOptions)
    machine_weights: np.ndarray = None
    machine_ibs: np.ndarray = None

    def __post_init__(self):
        self.params.required_agreement(self.table.machines)
        if self.params.variant is Variant.WEIGHTED:
            if self.machine_weights is None:
                raise PredictionError("weighted COBRA needs machine weights")
            if self.options.weights == 'complement':
                weights = np.asarray(self.machine_weights)
                if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
                    raise PredictionError("machine weights must be nonnegative and sum to 1")

    @property
    def grid(self):
        return self.table.grid

    def with_params(self, params):
        return CobraModel(self.pool, self.table, params, self.options, self.machine_weights, self.machine_ibs)

    def query_predictions(self, X):
        """M x n x T machine predictions for the query rows."""
        return self.pool.predict(np.atleast_2d(np.asarray(X, dtype=float)), self.grid)

    def predict(self, X, on_exhausted='raise'):
        """
        Curves for every query row.

        Parameters:
            X: n x d covariates
            on_exhausted: 'raise' to fail when a query has no neighbours even
                after widening, 'baseline' to fall back to the Kaplan-Meier
                curve of D_l

        Returns:
            tuple: (n x T matrix, diagnostics dict)
        """
        preds = self.query_predictions(X)
        distances = machine_distances(np.transpose(preds, (1, 0, 2)), self.table, self.params.norm)
        return aggregate_from_distances(distances, self.table, self.params, self.options, self.machine_weights,
                                        on_exhausted=on_exhausted)


def machine_distance(a, b, norm):
    """Distance between two curves of the same grid under the chosen norm."""
    if not a.grid.same_as(b.grid):
        raise DistanceError("curves live on different time grids")
    diff = np.asarray(a.values) - np.asarray(b.values)
    if norm_kind(norm) is NormKind.FROBENIUS:
        return float(np.sqrt(np.sum(np.square(diff))))
    return float(np.max(np.abs(diff)))


def machine_distances(query_preds, table, norm):
    """
    Per-machine distances between query curves and every table point.

    Parameters:
        query_preds: (M x T) for one query or (n x M x T) for a batch
        table: PredictionTable

    Returns:
        ndarray: (M x l) or (n x M x l)
    """
    query_preds = np.asarray(query_preds, dtype=float)
    single = query_preds.ndim == 2
    batch = query_preds[None] if single else query_preds
    if batch.shape[1:] != (table.machines, table.grid.resolution):
        raise DistanceError("query predictions must be M x T = %d x %d, got %s"
                            % (table.machines, table.grid.resolution, batch.shape[1:]))
    frobenius = norm_kind(norm) is NormKind.FROBENIUS
    out = np.empty(batch.shape[:2] + (table.points,))
    step = max(1, DISTANCE_CHUNK // max(1, table.values.size))
    for start in range(0, batch.shape[0], step):
        diff = batch[start:start + step, :, None, :] - table.values[None, :, :, :]
        if frobenius:
            out[start:start + step] = np.sqrt(np.einsum('nmlt,nmlt->nml', diff, diff))
        else:
            out[start:start + step] = np.max(np.abs(diff), axis=-1)
    return out[0] if single else out


def _query_matrix(query_preds):
    if isinstance(query_preds, np.ndarray):
        return query_preds
    return as_matrix(query_preds)


def proximity_mask(distances, epsilon, required):
    """Boolean (... x l) membership from (... x M x l) distances."""
    return (distances <= epsilon).sum(axis=-2) >= required


def proximity_set(query_preds, table, params):
    """Indices of D_l points whose curves agree with the query on at least M*alpha machines."""
    distances = machine_distances(_query_matrix(query_preds), table, params.norm)
    mask = proximity_mask(distances, params.epsilon, params.required_agreement(table.machines))
    return np.flatnonzero(mask)


def widen_proximity(distances, params, options, machines):
    """
    Proximity membership for one query, widening epsilon by widen_factor up
    to max_widenings times when the set is empty.

    Returns:
        tuple: (mask over D_l, epsilon used, number of widenings); the mask is
        empty when widening was exhausted
    """
    required = params.required_agreement(machines)
    epsilon = params.epsilon
    mask = proximity_mask(distances, epsilon, required)
    if mask.any():
        return mask, epsilon, 0
    if epsilon <= 0:
        positive = distances[distances > 0]
        epsilon = float(positive.min()) if positive.size else 0.0
    for step in range(1, options.max_widenings + 1):
        epsilon = epsilon * options.widen_factor
        mask = proximity_mask(distances, epsilon, required)
        if mask.any():
            return mask, epsilon, step
    return mask, epsilon, options.max_widenings


def _straight_curves(mask, table, options):
    """Nelson-Aalen (or Kaplan-Meier) survival of the proximity members, one row per query."""
    grid = table.grid.times
    curves = np.ones((mask.shape[0], grid.size))
    for q, members in enumerate(mask):
        if not members.any():
            continue
        time, event = table.dl_time[members], table.dl_event[members]
        if options.straight_estimator == 'kaplan_meier':
            curve = kaplan_meier(time, event)
        else:
            curve = survival_from_hazard(nelson_aalen(time, event))
        curves[q] = curve(grid)
    return curves


def _weighted_curves(mask, table, weights, options):
    counts = mask.sum(axis=1, keepdims=True).astype(float)
    share = mask / np.where(counts > 0, counts, 1.0)
    machine_means = np.einsum('nl,mlt->nmt', share, table.values)
    weights = np.asarray(weights, dtype=float)
    if options.weights == 'literal':
        combined = np.einsum('m,nmt->nt', weights, machine_means) / float(table.machines)
    else:
        combined = np.einsum('m,nmt->nt', weights, machine_means)
    return enforce_survival(combined)


def enforce_survival(matrix):
    """Clip into [0, 1] and make every row non-increasing with a running minimum."""
    return np.minimum.accumulate(np.clip(matrix, 0.0, 1.0), axis=-1)


def baseline_curve(table):
    """Kaplan-Meier curve of all D_l outcomes on the grid."""
    return kaplan_meier(table.dl_time, table.dl_event)(table.grid.times)


def aggregate(mask, table, params, options, weights=None):
    """Curves for a batch of queries given their (n x l) proximity masks."""
    if variant_kind(params.variant) is Variant.STRAIGHT:
        return _straight_curves(mask, table, options)
    if weights is None:
        raise PredictionError("weighted COBRA needs machine weights")
    return _weighted_curves(mask, table, weights, options)


def aggregate_from_distances(distances, table, params, options, weights=None, on_exhausted='raise',
                             log_level=logging.WARNING):
    """
    Proximity sets (with widening) and aggregated curves for a batch of
    queries given their (n x M x l) distances. Widening and exhaustion are
    logged at log_level.
    """
    required = params.required_agreement(table.machines)
    mask = proximity_mask(distances, params.epsilon, required)
    widened = 0
    exhausted = []
    for q in np.flatnonzero(~mask.any(axis=1)):
        row, epsilon, steps = widen_proximity(distances[q], params, options, table.machines)
        if not row.any():
            if on_exhausted == 'raise':
                raise NoNeighborsError("no D_l point agrees with the query after %d widenings" % steps,
                                       min_distances=[float(v) for v in distances[q].min(axis=-1)])
            exhausted.append(int(q))
            continue
        log.log(log_level, "empty proximity set for query %d, widened epsilon from %g to %g", q, params.epsilon, epsilon)
        mask[q] = row
        widened += 1
    curves = aggregate(mask, table, params, options, weights)
    if exhausted:
        log.log(log_level, "%d query(ies) had no neighbours, scored with the D_l Kaplan-Meier curve", len(exhausted))
        curves[exhausted] = baseline_curve(table)
    return curves, {'widened': widened, 'exhausted': len(exhausted)}


def _single_prediction(query, model, variant):
    if model.params.variant is not variant:
        raise PredictionError("model was fitted for the %s variant" % model.params.variant.value)
    curves, _ = model.predict(np.asarray(query, dtype=float).reshape(1, -1), on_exhausted='raise')
    return SurvivalCurve(model.grid, curves[0])


def straight_predict(query, model):
    """Survival curve exp(-H) of the Nelson-Aalen estimator over the proximity set."""
    return _single_prediction(query, model, Variant.STRAIGHT)


def weighted_predict(query, model):
    """IBS-weighted combination of the machines' mean curves over the proximity set."""
    return _single_prediction(query, model, Variant.WEIGHTED)


def machine_ibs_weights(ibs, scheme='complement'):
    """
    Machine weights from per-machine IBS.

    complement: (1 - IBS_k / sum IBS) / (M - 1), so lower IBS gives more weight
    and the weights sum to 1. literal: IBS_k / sum IBS, combined later with
    a 1/M prefactor.
    """
    ibs = np.asarray(ibs, dtype=float).reshape(-1)
    machines = ibs.size
    if machines == 0:
        raise PredictionError("no machine IBS to weight")
    if np.any(ibs < 0):
        raise PredictionError("IBS values must be nonnegative")
    if machines == 1:
        return np.ones(1)
    total = ibs.sum()
    if total == 0:
        return np.full(machines, 1.0 / machines)
    share = ibs / total
    if scheme == 'literal':
        return share
    return (1.0 - share) / (machines - 1)


def regression_estimate(query_preds, table_preds, y, epsilon, alpha):
    """
    Scalar COBRA estimate: mean response of the points where at least
    M*alpha machines agree with the query within epsilon (0 when none do).

    Parameters:
        query_preds: M machine predictions for the query
        table_preds: M x l machine predictions for the l points
        y: l responses
    """
    query_preds = np.asarray(query_preds, dtype=float).reshape(-1)
    table_preds = np.asarray(table_preds, dtype=float)
    y = np.asarray(y, dtype=float)
    machines = query_preds.size
    required = int(round(alpha * machines))
    agree = (np.abs(table_preds - query_preds[:, None]) <= epsilon).sum(axis=0) >= required
    if not agree.any():
        return 0.0
    weights = agree / float(agree.sum())
    return float(weights @ y)


def cumulative_hazard(curve):
    """-log S with S floored at 1e-12."""
    values = curve.values if isinstance(curve, SurvivalCurve) else np.asarray(curve, dtype=float)
    return -np.log(np.maximum(values, HAZARD_FLOOR))


def build_table(pool, d_l, grid):
    return PredictionTable(pool.predict(d_l.X, grid), grid, d_l.time, d_l.event)


def fit_cobra(d_k, d_l, grid, params, options=None, seed=0, workers=1, pool=None):
    """
    Fits the machine pool on D_k, caches its predictions on D_l and derives
    the machine weights from each machine's IBS on D_l.
    """
    options = options or CobraOptions()
    if pool is None:
        pool = build_machine_pool(d_k, seed, workers)
    table = build_table(pool, d_l, grid)
    g_hat = censoring_survival(d_l.time, d_l.event)
    ibs = per_machine_ibs(table, table.subjects(), g_hat, grid)
    weights = machine_ibs_weights(ibs, options.weights)
    log.debug("machine IBS on D_l: %s", ", ".join("%.4f" % v for v in ibs))
    return CobraModel(pool, table, params, options, weights, ibs)
