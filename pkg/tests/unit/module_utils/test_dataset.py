# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import json
import logging

import numpy as np
import pytest

from survcobra.module_utils.dataset import (
    DatasetSchema,
    SplitSpec,
    SurvivalDataset,
    ceil_share,
    load_csv,
    load_queries,
    load_schema,
    make_time_grid,
    split,
    split_indices,
    write_csv,
)
from survcobra.module_utils.errors import (
    DataFileError,
    DegenerateGridError,
    ParseError,
    SchemaError,
    SplitError,
    ValidationError,
)

SCHEMA = DatasetSchema('time', 'cens', categorical_columns=('sex',))


def _write(tmp_path, text, name='data.csv'):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _events(times, events):
    return SurvivalDataset(np.zeros((len(times), 1)), times, events, ('x',))


def test_load_csv_one_hot_encodes_in_first_appearance_order(tmp_path):
    path = _write(tmp_path, "age,sex,time,cens\n60,M,5,1\n70,F,3,0\n65,M,8,1\n")
    data = load_csv(path, SCHEMA)
    assert data.n == 3
    assert data.d == 3
    assert data.feature_names == ('age', 'sex=M', 'sex=F')
    assert data.X[:, 1:].sum(axis=1).tolist() == [1.0, 1.0, 1.0]
    assert data.time.tolist() == [5.0, 3.0, 8.0]
    assert data.event.tolist() == [True, False, True]


def test_load_csv_missing_column(tmp_path):
    path = _write(tmp_path, "age,time\n60,5\n70,3\n")
    with pytest.raises(SchemaError):
        load_csv(path, SCHEMA)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataFileError) as e:
        load_csv(str(tmp_path / 'nope.csv'), SCHEMA)
    assert e.value.rc == 2


def test_load_csv_parse_error_carries_row(tmp_path):
    path = _write(tmp_path, "age,sex,time,cens\n60,M,5,1\nold,F,3,0\n")
    with pytest.raises(ParseError) as e:
        load_csv(path, SCHEMA)
    assert e.value.row == 1
    assert e.value.column == 'age'


def test_load_csv_rejects_missing_values(tmp_path):
    path = _write(tmp_path, "age,sex,time,cens\n60,M,5,1\nNA,F,3,0\n61,F,4,1\n")
    with pytest.raises(ValidationError):
        load_csv(path, SCHEMA)


def test_load_csv_imputes_when_asked(tmp_path, caplog):
    path = _write(tmp_path, "age,sex,time,cens\n60,M,5,1\nNA,,3,0\n70,M,4,1\n")
    with caplog.at_level(logging.WARNING):
        data = load_csv(path, SCHEMA, impute=True)
    assert data.X[1, 0] == 65.0
    assert data.feature_names == ('age', 'sex=M')
    assert data.X[1, 1] == 1.0
    assert 'imputed 1 missing value(s) in column age' in caplog.text


def test_load_csv_drops_columns(tmp_path):
    path = _write(tmp_path, "id,age,sex,time,cens\nA,60,M,5,1\nB,70,F,3,0\n")
    schema = DatasetSchema('time', 'cens', categorical_columns=('sex',), drop_columns=('id',))
    assert load_csv(path, schema).feature_names == ('age', 'sex=M', 'sex=F')


def test_load_csv_needs_an_event(tmp_path):
    path = _write(tmp_path, "age,sex,time,cens\n60,M,5,0\n70,F,3,0\n")
    with pytest.raises(ValidationError):
        load_csv(path, SCHEMA)


def test_event_true_values(tmp_path):
    path = _write(tmp_path, "age,time,status\n60,5,dead\n70,3,alive\n")
    data = load_csv(path, DatasetSchema('time', 'status', event_true_values=('dead',)))
    assert data.event.tolist() == [True, False]


def test_schema_requires_time_and_event():
    with pytest.raises(SchemaError):
        DatasetSchema.from_dict({'time_column': 'time'})
    with pytest.raises(SchemaError):
        DatasetSchema('t', 't')


def test_load_schema(tmp_path):
    path = tmp_path / 'schema.json'
    path.write_text(json.dumps({'time_column': 'time', 'event_column': 'cens', 'categorical_columns': ['sex']}))
    assert load_schema(str(path)) == SCHEMA


def test_write_csv_round_trip_is_bitwise(tmp_path, dataset):
    path = str(tmp_path / 'out.csv')
    write_csv(dataset, path)
    back = load_csv(path, DatasetSchema('time', 'event', event_true_values=('1',)))
    assert back.feature_names == dataset.feature_names
    assert np.array_equal(back.X, dataset.X)
    assert np.array_equal(back.time, dataset.time)
    assert np.array_equal(back.event, dataset.event)


def test_load_queries_uses_training_levels(tmp_path):
    data = load_csv(_write(tmp_path, "age,sex,time,cens\n60,M,5,1\n70,F,3,0\n"), SCHEMA)
    X = load_queries(_write(tmp_path, "age,sex\n61,F\n", name='q.csv'), data, SCHEMA)
    assert X.tolist() == [[61.0, 0.0, 1.0]]
    with pytest.raises(SchemaError):
        load_queries(_write(tmp_path, "age,sex\n61,X\n", name='bad.csv'), data, SCHEMA)


@pytest.mark.parametrize('n, test, d_l', [(10, 2, 4), (686, 138, 274), (101, 21, 40), (150, 30, 60)])
def test_split_sizes_follow_the_ceiling_rule(n, test, d_l):
    parts = split_indices(n, SplitSpec(0.8, 0.5, seed=1))
    assert parts.test.size == test
    assert parts.train.size == n - test
    assert parts.d_l.size == d_l
    assert parts.d_k.size == n - test - d_l


def test_split_is_disjoint_exhaustive_and_deterministic():
    a = split_indices(50, SplitSpec(seed=4))
    b = split_indices(50, SplitSpec(seed=4))
    for name in a._fields:
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert sorted(np.concatenate([a.train, a.test]).tolist()) == list(range(50))
    assert sorted(np.concatenate([a.d_k, a.d_l]).tolist()) == sorted(a.train.tolist())


def test_split_returns_datasets(dataset):
    parts = split(dataset, SplitSpec(seed=2))
    assert parts.train.n + parts.test.n == dataset.n
    assert parts.d_k.n + parts.d_l.n == parts.train.n


def test_split_rejects_eventless_parts():
    data = _events(np.arange(1.0, 11.0), [True] + [False] * 9)
    with pytest.raises(SplitError):
        split(data, SplitSpec(seed=0))


@pytest.mark.parametrize('fraction', [0.0, 1.0, 1.5])
def test_split_spec_fractions(fraction):
    with pytest.raises(ValidationError):
        SplitSpec(train_fraction=fraction)


def test_ceil_share_ignores_float_noise():
    assert ceil_share(150, 1.0 - 0.8) == 30
    assert ceil_share(101, 1.0 - 0.8) == 21


@pytest.mark.parametrize('times, events, resolution, expected', [
    ([1.0, 3.0], [True, True], 3, [1.0, 2.0, 3.0]),
    ([0.5, 0.5, 2.0], [True, True, True], 2, [0.5, 2.0]),
    ([1.0, 2.0, 5.0, 9.0], [True, True, True, False], 5, [1.0, 2.0, 3.0, 4.0, 5.0]),
])
def test_make_time_grid(times, events, resolution, expected):
    grid = make_time_grid(_events(times, events), resolution)
    assert grid.times.tolist() == expected
    assert grid.resolution == resolution


def test_make_time_grid_needs_two_event_times():
    with pytest.raises(DegenerateGridError):
        make_time_grid(_events([1.0, 1.0, 4.0], [True, True, False]), 10)


def test_dataset_is_read_only(dataset):
    with pytest.raises(ValueError):
        dataset.X[0, 0] = 1.0


def test_dataset_validate():
    with pytest.raises(ValidationError):
        _events([1.0], [True]).validate()
    with pytest.raises(ValidationError):
        SurvivalDataset(np.zeros((2, 1)), [1.0, -1.0], [True, True], ('x',))
