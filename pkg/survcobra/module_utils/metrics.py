# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""Censored Brier score and its integral over the evaluation grid.

Curves are evaluated between grid points with previous-point (step) semantics.
Subjects censored at or before t contribute nothing to BS(t); events weigh
by 1/G(y-) and subjects still at risk by 1/G(t).
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from survcobra.module_utils.dataset import TimeGrid
from survcobra.module_utils.errors import DegenerateIntervalError, MetricError, ValidationError

CURVE_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class SurvivalCurve(object):
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != self.grid.resolution:
            raise ValidationError("curve has %d values for a grid of %d points" % (values.size, self.grid.resolution))
        check_curves(values[None, :])
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def at(self, t):
        return float(self.values[grid_index(self.grid, t)])


def check_curves(matrix):
    """Raises ValidationError unless every row is in [0, 1] and non-increasing."""
    matrix = np.asarray(matrix, dtype=float)
    if np.any(matrix < -CURVE_TOLERANCE) or np.any(matrix > 1 + CURVE_TOLERANCE) or np.any(np.isnan(matrix)):
        raise ValidationError("survival values must lie in [0, 1]")
    if np.any(np.diff(matrix, axis=-1) > CURVE_TOLERANCE):
        raise ValidationError("survival curves must be non-increasing")
    return matrix


def grid_index(grid, t):
    """Index of the grid point at or just before t."""
    t = np.asarray(t, dtype=float)
    if np.any(t < grid.t_min) or np.any(t > grid.t_max):
        raise MetricError("time %s outside the grid span [%s, %s]" % (t, grid.t_min, grid.t_max))
    return np.searchsorted(grid.times, t, side='right') - 1


def as_matrix(curves, grid=None):
    """Stacks a sequence of SurvivalCurve (or passes an n x T array through)."""
    if isinstance(curves, np.ndarray):
        matrix = np.atleast_2d(curves).astype(float)
    else:
        curves = list(curves)
        if grid is not None and any(not c.grid.same_as(grid) for c in curves):
            raise MetricError("curves were evaluated on a different grid")
        matrix = np.vstack([c.values for c in curves]) if curves else np.zeros((0, 0))
    return matrix


def _subjects(subjects):
    time, event = subjects
    time = np.asarray(time, dtype=float).reshape(-1)
    event = np.asarray(event, dtype=bool).reshape(-1)
    if time.size == 0:
        raise MetricError("cannot score an empty cohort")
    return time, event


def _brier_terms(matrix, time, event, g_hat, times, idx):
    s = matrix[:, idx]
    died = (time[:, None] <= times[None, :]) & event[:, None]
    at_risk = time[:, None] > times[None, :]
    g_event = g_hat.left_limit(time)[:, None]
    g_t = g_hat(times)[None, :]
    return died * np.square(s) / g_event + at_risk * np.square(1.0 - s) / g_t


def brier_score_censored(curves, subjects, g_hat, t):
    """BS^c(t) averaged over the N subjects."""
    time, event = _subjects(subjects)
    if isinstance(curves, np.ndarray):
        raise MetricError("brier_score_censored needs SurvivalCurve objects to locate the grid")
    curves = list(curves)
    if len(curves) != time.size:
        raise MetricError("got %d curves for %d subjects" % (len(curves), time.size))
    grid = curves[0].grid
    matrix = as_matrix(curves, grid)
    idx = np.atleast_1d(grid_index(grid, t))
    terms = _brier_terms(matrix, time, event, g_hat, np.atleast_1d(np.asarray(t, dtype=float)), idx)
    return float(terms.mean())


def brier_curve(curves, subjects, g_hat, grid):
    """BS^c evaluated at every grid point."""
    time, event = _subjects(subjects)
    matrix = as_matrix(curves, grid)
    if matrix.shape != (time.size, grid.resolution):
        raise MetricError("expected a %d x %d prediction matrix, got %s" % (time.size, grid.resolution, matrix.shape))
    idx = np.arange(grid.resolution)
    return _brier_terms(matrix, time, event, g_hat, grid.times, idx).mean(axis=0)


def integrated_brier_score(curves, subjects, g_hat, grid):
    """Trapezoidal integral of BS^c over the grid divided by its span."""
    span = grid.t_max - grid.t_min
    if not span > 0:
        raise DegenerateIntervalError("integration interval is empty: t_max = t_1 = %s" % grid.t_min)
    scores = brier_curve(curves, subjects, g_hat, grid)
    return float(trapezoid(scores, grid.times) / span)


def per_machine_ibs(table, subjects, g_hat, grid):
    """IBS^c of every machine's curves on the given subjects."""
    values = np.asarray(getattr(table, 'values', table))
    return np.array([integrated_brier_score(values[m], subjects, g_hat, grid) for m in range(values.shape[0])])
