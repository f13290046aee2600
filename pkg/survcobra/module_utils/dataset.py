# -*- coding: utf-8 -*-

# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

"""Loading, encoding, validation and splitting of right-censored datasets."""

import io
import json
import logging
import math
import os
from collections import namedtuple
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import pandas as pd

from survcobra.module_utils.errors import (
    DataFileError,
    DegenerateGridError,
    ParseError,
    SchemaError,
    SplitError,
    ValidationError,
)
from survcobra.module_utils.helpers import atomic_write

log = logging.getLogger(__name__)

MISSING_TOKENS = ('', 'NA', 'NaN', 'nan', 'N/A', 'null', 'None')
DEFAULT_EVENT_TRUE_VALUES = ('1', '1.0', 'True', 'true', 'TRUE')
DEFAULT_GRID_RESOLUTION = 100


@dataclass(frozen=True)
class DatasetSchema(object):
    time_column: str
    event_column: str
    categorical_columns: Tuple[str, ...] = ()
    event_true_values: Tuple[str, ...] = DEFAULT_EVENT_TRUE_VALUES
    drop_columns: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.time_column == self.event_column:
            raise SchemaError("time_column and event_column must differ, both are %s" % self.time_column)
        for name in ('categorical_columns', 'event_true_values', 'drop_columns'):
            object.__setattr__(self, name, tuple(str(v) for v in getattr(self, name)))

    @classmethod
    def from_dict(cls, data):
        missing = [key for key in ('time_column', 'event_column') if not data.get(key)]
        if missing:
            raise SchemaError("schema is missing required keys: %s" % ", ".join(missing))
        return cls(
            time_column=data['time_column'],
            event_column=data['event_column'],
            categorical_columns=data.get('categorical_columns') or (),
            event_true_values=data.get('event_true_values') or DEFAULT_EVENT_TRUE_VALUES,
            drop_columns=data.get('drop_columns') or (),
        )


def load_schema(path):
    """Reads a JSON schema file with keys time_column, event_column,
    categorical_columns and event_true_values."""
    try:
        with open(path, encoding='utf-8') as handle:
            return DatasetSchema.from_dict(json.load(handle))
    except OSError as e:
        raise DataFileError("cannot read schema %s: %s" % (path, e), path=path)
    except ValueError as e:
        raise SchemaError("schema %s is not valid JSON: %s" % (path, e), path=path)


@dataclass(frozen=True, eq=False)
class SurvivalDataset(object):
    """Covariate matrix plus (time, event) pairs. Immutable after construction."""

    X: np.ndarray
    time: np.ndarray
    event: np.ndarray
    feature_names: Tuple[str, ...]
    # one-hot layout: source column -> ordered category levels
    categories: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.X, dtype=float, ndmin=2)
        time = np.array(self.time, dtype=float).reshape(-1)
        event = np.array(self.event, dtype=bool).reshape(-1)
        if X.shape[0] != time.size or time.size != event.size:
            raise ValidationError("covariates, times and events differ in length")
        if X.shape[1] != len(self.feature_names):
            raise ValidationError("expected %d features, got %d covariate columns" % (len(self.feature_names), X.shape[1]))
        if np.any(~np.isfinite(time)) or np.any(time < 0):
            raise ValidationError("times must be finite and nonnegative")
        for array in (X, time, event):
            array.setflags(write=False)
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'time', time)
        object.__setattr__(self, 'event', event)
        object.__setattr__(self, 'feature_names', tuple(self.feature_names))

    @property
    def n(self):
        return self.time.size

    @property
    def d(self):
        return len(self.feature_names)

    @property
    def n_events(self):
        return int(self.event.sum())

    def validate(self):
        """Checks the invariants every estimator relies on: n >= 2 and at least one event."""
        if self.n < 2:
            raise ValidationError("dataset needs at least 2 records, got %d" % self.n)
        if self.n_events == 0:
            raise ValidationError("dataset has no observed events")
        return self

    def subset(self, indices):
        indices = np.asarray(indices, dtype=int)
        return SurvivalDataset(self.X[indices], self.time[indices], self.event[indices],
                               self.feature_names, self.categories)

    def subjects(self):
        return self.time, self.event


def _parse_numeric(frame, column):
    # float() is correctly rounded, so repr-written values read back bitwise
    values = np.empty(len(frame))
    for row, token in enumerate(frame[column]):
        try:
            values[row] = float(token)
        except (TypeError, ValueError):
            raise ParseError("column %s, row %d: cannot parse %r as a number" % (column, row, token), row=row, column=column)
    return values


def _impute(frame, schema):
    for column in frame.columns:
        if column == schema.time_column or column == schema.event_column:
            continue
        missing = frame[column].isin(MISSING_TOKENS)
        count = int(missing.sum())
        if not count:
            continue
        present = frame.loc[~missing, column]
        if present.empty:
            raise ValidationError("column %s has no values to impute from" % column, column=column)
        if column in schema.categorical_columns:
            fill = present.value_counts(sort=True).index[0]
        else:
            fill = repr(float(pd.to_numeric(present, errors='coerce').median()))
        log.warning("imputed %d missing value(s) in column %s with %s", count, column, fill)
        frame.loc[missing, column] = fill
    return frame


def encode_frame(frame, schema, categories=None):
    """
    One-hot encodes the categorical columns and passes numeric ones through.

    Parameters:
        frame: DataFrame of strings
        schema: DatasetSchema
        categories: fixed category levels per column (from a training dataset);
            when None the levels are taken in first-appearance order

    Returns:
        tuple: (covariate matrix, feature names, categories)
    """
    fixed = categories is not None
    categories = dict(categories or {})
    blocks = []
    names = []
    excluded = {schema.time_column, schema.event_column} | set(schema.drop_columns)
    for column in frame.columns:
        if column in excluded:
            continue
        if column in schema.categorical_columns:
            levels = categories.get(column)
            if levels is None:
                if fixed:
                    raise SchemaError("column %s was not categorical in the training data" % column, column=column)
                levels = [str(v) for v in pd.unique(frame[column])]
                categories[column] = levels
            unseen = set(frame[column]) - set(levels)
            if unseen:
                raise SchemaError("column %s has unseen categories: %s" % (column, ", ".join(sorted(unseen))), column=column)
            for level in levels:
                blocks.append((frame[column] == level).to_numpy(dtype=float))
                names.append("%s=%s" % (column, level))
        else:
            blocks.append(_parse_numeric(frame, column))
            names.append(column)
    X = np.column_stack(blocks) if blocks else np.zeros((len(frame), 0))
    return X, names, categories


def _read_frame(path):
    if not os.path.isfile(path):
        raise DataFileError("dataset file not found: %s" % path, path=path)
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8', skipinitialspace=True)
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataFileError("cannot read %s: %s" % (path, e), path=path)


def load_csv(path, schema, impute=False):
    """Loads a CSV export into a SurvivalDataset."""
    frame = _read_frame(path)
    for column in (schema.time_column, schema.event_column) + schema.categorical_columns:
        if column not in frame.columns:
            raise SchemaError("column %s not found in %s" % (column, path), column=column)

    frame = frame.apply(lambda col: col.str.strip())
    if impute:
        frame = _impute(frame, schema)
    missing = frame.drop(columns=[c for c in schema.drop_columns if c in frame.columns]).isin(MISSING_TOKENS)
    if missing.to_numpy().any():
        row, col = np.argwhere(missing.to_numpy())[0]
        column = missing.columns[col]
        raise ValidationError("missing value in column %s, row %d" % (column, row), row=int(row), column=column)

    time = _parse_numeric(frame, schema.time_column)
    event = frame[schema.event_column].isin(schema.event_true_values).to_numpy()
    X, names, categories = encode_frame(frame, schema)

    dataset = SurvivalDataset(X, time, event, names, categories).validate()
    log.info("loaded %s: n=%d, d=%d, events=%d", path, dataset.n, dataset.d, dataset.n_events)
    return dataset


def load_queries(path, dataset, schema):
    """Reads query covariates and encodes them with the feature layout of dataset."""
    frame = _read_frame(path).apply(lambda col: col.str.strip())
    if frame.isin(MISSING_TOKENS).to_numpy().any():
        raise ValidationError("query file %s has missing values" % path, path=path)
    X, names, _ = encode_frame(frame, schema, categories=dataset.categories)
    if tuple(names) != dataset.feature_names:
        raise SchemaError("query features %s do not match dataset features %s" % (names, list(dataset.feature_names)),
                          path=path)
    return X


def write_csv(dataset, path, time_column='time', event_column='event'):
    """Writes a dataset so that load_csv with event_true_values ['1'] reads it back unchanged."""
    columns = {}
    for j, name in enumerate(dataset.feature_names):
        columns[name] = [repr(float(v)) for v in dataset.X[:, j]]
    columns[time_column] = [repr(float(t)) for t in dataset.time]
    columns[event_column] = ['1' if e else '0' for e in dataset.event]
    buf = io.StringIO()
    pd.DataFrame(columns).to_csv(buf, index=False)
    atomic_write(path, buf.getvalue())


@dataclass(frozen=True, eq=False)
class TimeGrid(object):
    times: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        if times.size < 2:
            raise DegenerateGridError("time grid needs at least 2 points")
        if np.any(np.diff(times) <= 0):
            raise DegenerateGridError("time grid must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, 'times', times)

    @property
    def resolution(self):
        return self.times.size

    @property
    def t_min(self):
        return float(self.times[0])

    @property
    def t_max(self):
        return float(self.times[-1])

    def same_as(self, other):
        return self is other or np.array_equal(self.times, other.times)


def make_time_grid(dataset, resolution=DEFAULT_GRID_RESOLUTION):
    """T equally spaced points from the first to the last observed event time."""
    event_times = np.unique(dataset.time[dataset.event])
    if event_times.size < 2:
        raise DegenerateGridError("need at least 2 distinct event times, got %d" % event_times.size)
    if resolution < 2:
        raise DegenerateGridError("grid resolution must be at least 2, got %d" % resolution)
    return TimeGrid(np.linspace(event_times[0], event_times[-1], int(resolution)))


@dataclass(frozen=True)
class SplitSpec(object):
    train_fraction: float = 0.8
    dl_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ('train_fraction', 'dl_fraction'):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValidationError("%s must be in (0, 1), got %s" % (name, value))


Split = namedtuple('Split', ['train', 'test', 'd_k', 'd_l'])
SplitIndices = namedtuple('SplitIndices', ['train', 'test', 'd_k', 'd_l'])


def ceil_share(n, fraction):
    """Size of the side that receives the remainder row: ceil(n * fraction)."""
    return int(math.ceil(round(n * fraction, 9)))


def halve(indices, fraction, rng):
    """Seeded partition of indices into (rest, share) with |share| = ceil(fraction * n)."""
    indices = np.asarray(indices, dtype=int)
    order = rng.permutation(indices.size)
    k = ceil_share(indices.size, fraction)
    return indices[order[k:]], indices[order[:k]]


def split_indices(n, spec):
    rng = np.random.RandomState(spec.seed)
    train, test = halve(np.arange(n), 1.0 - spec.train_fraction, rng)
    d_k, d_l = halve(train, spec.dl_fraction, rng)
    return SplitIndices(train, test, d_k, d_l)


def _check_part(dataset, indices, name):
    if indices.size < 2:
        raise SplitError("%s partition has %d record(s), at least 2 required" % (name, indices.size), partition=name)
    if not dataset.event[indices].any():
        raise SplitError("%s partition has no events" % name, partition=name)


def split(dataset, spec):
    """Seeded train/test split followed by the D_k/D_l subdivision of train."""
    parts = split_indices(dataset.n, spec)
    for name in SplitIndices._fields:
        _check_part(dataset, getattr(parts, name), name)
    log.debug("split n=%d into train=%d test=%d d_k=%d d_l=%d", dataset.n, parts.train.size, parts.test.size,
              parts.d_k.size, parts.d_l.size)
    return Split(*(dataset.subset(getattr(parts, name)) for name in SplitIndices._fields))
