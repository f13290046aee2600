# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""Nonparametric estimators for right-censored data.

All estimators return a :class:`StepFunction`. Kaplan-Meier type functions are
right-continuous (a jump at ``t_i`` is already visible at ``t_i``). The
Nelson-Aalen cumulative hazard sums over event times strictly before ``t``, so
it is stored left-continuous (``side='left'``).
"""

from dataclasses import dataclass, field

import numpy as np

from survcobra.module_utils.errors import EstimationError

CENSORING_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class StepFunction(object):
    """Piecewise-constant function of time.

    ``side='right'``: f(t) is the value at the largest knot <= t.
    ``side='left'``: f(t) is the value at the largest knot < t.
    Before the first knot the function equals ``value_before_first``.
    Evaluated values are clamped from below at ``floor``.
    """

    knots: np.ndarray
    values: np.ndarray
    value_before_first: float = 1.0
    side: str = 'right'
    floor: float = field(default=None)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if knots.shape != values.shape:
            raise EstimationError("step function needs one value per knot, got %d knots and %d values"
                                  % (knots.size, values.size))
        if knots.size > 1 and np.any(np.diff(knots) <= 0):
            raise EstimationError("step function knots must be strictly increasing")
        if self.side not in ('right', 'left'):
            raise EstimationError("unknown step function side: %s" % self.side)
        object.__setattr__(self, 'knots', knots)
        object.__setattr__(self, 'values', values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.knots, t, side=self.side) - 1
        padded = np.concatenate(([self.value_before_first], self.values))
        out = padded[idx + 1]
        if self.floor is not None:
            out = np.maximum(out, self.floor)
        return out

    def left_limit(self, t):
        """Value just before t, f(t-)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.knots, t, side='left') - 1
        padded = np.concatenate(([self.value_before_first], self.values))
        out = padded[idx + 1]
        if self.floor is not None:
            out = np.maximum(out, self.floor)
        return out

    def to_dict(self):
        return {
            'knots': [float(k) for k in self.knots],
            'values': [float(v) for v in self.values],
            'value_before_first': float(self.value_before_first),
            'side': self.side,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data['knots'], dtype=float), np.asarray(data['values'], dtype=float),
                   value_before_first=data.get('value_before_first', 1.0), side=data.get('side', 'right'))


def eval_step(f, t):
    """Evaluate a step function at a single finite time."""
    return float(f(float(t)))


def _check_input(times, events):
    times = np.asarray(times, dtype=float).reshape(-1)
    events = np.asarray(events, dtype=bool).reshape(-1)
    if times.size == 0:
        raise EstimationError("cannot estimate from an empty sample")
    if times.shape != events.shape:
        raise EstimationError("times and events differ in length: %d != %d" % (times.size, events.size))
    if np.any(~np.isfinite(times)) or np.any(times < 0):
        raise EstimationError("times must be finite and nonnegative")
    return times, events


def event_table(times, events):
    """
    Counts per distinct event time.

    A subject censored at t_i is still at risk at t_i (events are processed
    before censorings).

    Returns:
        tuple: (distinct event times, deaths d_i, number at risk n_i)
    """
    times, events = _check_input(times, events)
    uniq, inverse = np.unique(times, return_inverse=True)
    deaths = np.bincount(inverse, weights=events.astype(float), minlength=uniq.size)
    removed = np.bincount(inverse, minlength=uniq.size)
    at_risk = times.size - np.concatenate(([0], np.cumsum(removed)[:-1]))
    mask = deaths > 0
    return uniq[mask], deaths[mask], at_risk[mask].astype(float)


def kaplan_meier(times, events):
    """S(t) = prod over event times t_i <= t of (1 - d_i / n_i)."""
    knots, deaths, at_risk = event_table(times, events)
    values = np.cumprod(1.0 - deaths / at_risk)
    return StepFunction(knots, values, value_before_first=1.0, side='right')


def nelson_aalen(times, events):
    """H(t) = sum over event times t_i < t of d_i / n_i."""
    knots, deaths, at_risk = event_table(times, events)
    values = np.cumsum(deaths / at_risk)
    return StepFunction(knots, values, value_before_first=0.0, side='left')


def censoring_survival(times, events):
    """Survival function of the censoring distribution, G(t), floored at 1e-8."""
    times, events = _check_input(times, events)
    km = kaplan_meier(times, ~events)
    return StepFunction(km.knots, km.values, value_before_first=1.0, side='right', floor=CENSORING_FLOOR)


def survival_from_hazard(hazard):
    """S = exp(-H), keeping the knots and continuity side of H."""
    return StepFunction(hazard.knots, np.exp(-hazard.values), value_before_first=float(np.exp(-hazard.value_before_first)),
                        side=hazard.side)
