# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import itertools
import math

import numpy as np
import pytest

from survcobra.module_utils.errors import EstimationError
from survcobra.module_utils.estimators import (
    CENSORING_FLOOR,
    StepFunction,
    censoring_survival,
    eval_step,
    event_table,
    kaplan_meier,
    nelson_aalen,
    survival_from_hazard,
)

# fixed time sets, with and without ties
TIME_SETS = [
    [1.0],
    [2.0, 1.0],
    [1.0, 1.0, 3.0],
    [1.0, 2.0, 2.0, 4.0],
    [3.0, 1.0, 2.0, 5.0, 4.0],
    [1.0, 1.0, 2.0, 3.0, 3.0, 6.0],
]


def _patterns():
    for times in TIME_SETS:
        for events in itertools.product([False, True], repeat=len(times)):
            yield times, list(events)


def _oracle_km(times, events, t):
    s = 1.0
    for u in sorted(set(x for x, e in zip(times, events) if e)):
        if u > t:
            break
        d = sum(1 for x, e in zip(times, events) if e and x == u)
        n = sum(1 for x in times if x >= u)
        s *= 1.0 - d / n
    return s


def _oracle_na(times, events, t):
    h = 0.0
    for u in sorted(set(x for x, e in zip(times, events) if e)):
        if u >= t:
            break
        d = sum(1 for x, e in zip(times, events) if e and x == u)
        n = sum(1 for x in times if x >= u)
        h += d / n
    return h


def _eval_times(times):
    points = [0.0, max(times) + 1.0]
    for x in set(times):
        points += [x - 0.5, x, x + 0.5]
    return sorted(points)


def test_kaplan_meier_matches_oracle_on_all_patterns():
    for times, events in _patterns():
        km = kaplan_meier(times, events)
        for t in _eval_times(times):
            assert abs(eval_step(km, t) - _oracle_km(times, events, t)) <= 1e-10, (times, events, t)


def test_nelson_aalen_matches_oracle_on_all_patterns():
    for times, events in _patterns():
        na = nelson_aalen(times, events)
        for t in _eval_times(times):
            assert abs(eval_step(na, t) - _oracle_na(times, events, t)) <= 1e-10, (times, events, t)


def test_kaplan_meier_examples():
    km = kaplan_meier([1, 2, 3], [True, True, True])
    assert eval_step(km, 0.5) == pytest.approx(1.0)
    assert eval_step(km, 1) == pytest.approx(2.0 / 3.0)
    assert eval_step(km, 2.5) == pytest.approx(1.0 / 3.0)
    assert eval_step(km, 3) == pytest.approx(0.0)


def test_kaplan_meier_with_censoring():
    km = kaplan_meier([1, 2, 3], [True, False, True])
    assert eval_step(km, 2.5) == pytest.approx(2.0 / 3.0)
    assert eval_step(km, 3) == pytest.approx(0.0)


def test_kaplan_meier_all_censored_is_flat():
    km = kaplan_meier([1, 2, 3], [False, False, False])
    assert np.all(km(np.array([0.0, 1.0, 10.0])) == 1.0)


def test_nelson_aalen_is_strict_before_t():
    na = nelson_aalen([1, 2, 3], [True, True, True])
    assert eval_step(na, 1) == pytest.approx(0.0)
    assert eval_step(na, 2.5) == pytest.approx(1.0 / 3.0 + 1.0 / 2.0)
    assert eval_step(na, 3.5) == pytest.approx(1.0 / 3.0 + 1.0 / 2.0 + 1.0)


def test_event_table_processes_events_before_censorings():
    knots, deaths, at_risk = event_table([1, 1, 2, 3], [True, False, True, False])
    assert list(knots) == [1.0, 2.0]
    assert list(deaths) == [1.0, 1.0]
    assert list(at_risk) == [4.0, 2.0]


def test_censoring_survival_is_floored_but_values_are_not():
    g = censoring_survival([1, 2], [False, False])
    assert g.values[-1] == 0.0
    assert eval_step(g, 5) == pytest.approx(CENSORING_FLOOR)
    assert g.left_limit(np.array([2.0]))[0] == pytest.approx(0.5)


def test_censoring_survival_is_kaplan_meier_of_flipped_events():
    for times, events in _patterns():
        g = censoring_survival(times, events)
        km = kaplan_meier(times, [not e for e in events])
        assert np.array_equal(g.knots, km.knots)
        assert np.array_equal(g.values, km.values)
        t = np.asarray(_eval_times(times))
        assert np.array_equal(g(t), np.maximum(km(t), CENSORING_FLOOR))


def test_censoring_survival_example():
    g = censoring_survival([2.0, 4.0], [True, False])
    assert list(g.knots) == [4.0]
    assert list(g.values) == [0.0]
    assert eval_step(g, 3.0) == 1.0
    assert eval_step(g, 4.0) == CENSORING_FLOOR


def test_exp_nelson_aalen_bounds_kaplan_meier_from_above():
    for times, events in _patterns():
        km = kaplan_meier(times, events)
        s = survival_from_hazard(nelson_aalen(times, events))
        t = np.asarray(_eval_times(times))
        assert np.all(s(t) >= km(t) - 1e-15), (times, events)


def test_survival_from_hazard():
    s = survival_from_hazard(nelson_aalen([1.0], [True]))
    assert eval_step(s, 1.0) == pytest.approx(1.0)
    assert eval_step(s, 1.5) == pytest.approx(math.exp(-1.0))


def test_step_function_vectorised_call():
    f = StepFunction([1.0, 2.0], [0.5, 0.25])
    assert list(f(np.array([0.0, 1.0, 1.5, 2.0, 3.0]))) == [1.0, 0.5, 0.5, 0.25, 0.25]
    assert list(f.left_limit(np.array([1.0, 2.0]))) == [1.0, 0.5]


def test_step_function_round_trips_through_dict():
    f = StepFunction([1.0, 2.0], [0.5, 0.25], side='left', value_before_first=0.0)
    g = StepFunction.from_dict(f.to_dict())
    assert g.side == 'left'
    assert list(g(np.array([1.0, 1.5, 2.5]))) == list(f(np.array([1.0, 1.5, 2.5])))


@pytest.mark.parametrize('times, events', [
    ([], []),
    ([1.0, 2.0], [True]),
    ([1.0, -1.0], [True, True]),
    ([1.0, float('nan')], [True, True]),
])
def test_invalid_input_raises(times, events):
    with pytest.raises(EstimationError):
        kaplan_meier(times, events)


def test_step_function_rejects_unsorted_knots():
    with pytest.raises(EstimationError):
        StepFunction([2.0, 1.0], [0.5, 0.25])
